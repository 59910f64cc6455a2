""" Splitting the lattice into contiguous site ranges, for generating fields in parallel.

Each range is handed to one worker (Pool.map); results are stitched back in site order with unchunk().
Because every site draws from its own counter-based stream, the split never changes the result.

"""
import numpy as np


def site_chunks(volume, nchunks=None, chunksize=None):
    """
    Break the site range [0, volume) into nearly-equal contiguous (start, stop) ranges.

    Either nchunks OR chunksize must be specified, but NOT both.

    Example Usage:
        site_chunks(7, nchunks=3)   => [(0, 2), (2, 4), (4, 7)]
        site_chunks(7, chunksize=3) => [(0, 3), (3, 6), (6, 7)]
    """
    if (nchunks is None) == (chunksize is None):
        raise ValueError("Specify only nchunks OR chunksize, but NOT both.")

    if nchunks is not None:
        if nchunks < 1:
            raise ValueError("nchunks must be at least 1, got {}".format(nchunks))
        nchunks = min(nchunks, volume) or 1
        # Integer boundaries so every chunk holds floor or ceil of volume/nchunks sites
        edges = [(i * volume) // nchunks for i in range(nchunks + 1)]
    else:
        if chunksize < 1:
            raise ValueError("chunksize must be at least 1, got {}".format(chunksize))
        edges = list(range(0, volume, chunksize)) + [volume]
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def unchunk(parts):
    """ Concatenate per-chunk arrays (site axis first) back into one array, in chunk order """
    return np.concatenate(parts, axis=0)
