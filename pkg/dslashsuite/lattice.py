# -*- coding: utf-8 -*-
"""
Four-dimensional periodic lattice addressing.

Sites are numbered lexicographically with t slowest and z fastest:
    n = ((t*nx + x)*ny + y)*nz + z
Direction 0 is time. Every direction wraps around (torus).
"""
import logging
import operator
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

NDIM = 4
AXES = ('t', 'x', 'y', 'z')


class LatticeError(ValueError):
    """ Bad lattice extents, or a coordinate/site outside the lattice. """


class Direction(NamedTuple):
    mu: int
    forward: bool

    @property
    def sign(self):
        return 1 if self.forward else -1

    def reverse(self):
        return Direction(self.mu, not self.forward)

# All 8 hopping directions, forward first within each axis
DIRECTIONS = tuple(Direction(mu, fwd) for mu in range(NDIM) for fwd in (True, False))


@dataclass(frozen=True)
class LatticeDims:
    nt: int
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for axis, n in zip(AXES, self.extents):
            if not isinstance(n, (int, np.integer)):
                raise LatticeError("Extent along '{}' must be an integer, got {!r}".format(axis, n))
            if n < 2:
                raise LatticeError("Extent along '{}' is {}; every direction needs at least 2 sites".format(axis, n))
        if self.volume > np.iinfo(np.int64).max // 64:
            raise LatticeError("Lattice volume {} exceeds the index range".format(self.volume))

    @property
    def extents(self):
        return (self.nt, self.nx, self.ny, self.nz)

    @property
    def volume(self):
        return int(np.prod(self.extents, dtype=object))

    @classmethod
    def parse(cls, text):
        """ Parse 'T,X,Y,Z' (e.g. '12,8,8,8') into LatticeDims """
        try:
            parts = [int(s) for s in text.replace('x', ',').split(',')]
        except ValueError:
            raise LatticeError("Cannot parse lattice dimensions from {!r}".format(text))
        if len(parts) != NDIM:
            raise LatticeError("Need 4 extents T,X,Y,Z, got {!r}".format(text))
        return cls(*parts)

    def __str__(self):
        return 'x'.join(str(n) for n in self.extents)


def index_of(dims, coords):
    """ Linear site index of the coordinate 4-tuple (t, x, y, z) """
    if len(coords) != NDIM:
        raise LatticeError("Expected 4 coordinates, got {}".format(len(coords)))
    n = 0
    for axis, c, extent in zip(AXES, coords, dims.extents):
        try:
            c = operator.index(c)
        except TypeError:
            raise TypeError("Coordinate {!r} along axis '{}' is not an integer".format(c, axis))
        if not 0 <= c < extent:
            raise LatticeError("Coordinate {} along axis '{}' is outside [0, {})".format(c, axis, extent))
        n = n * extent + c
    return n


def coords_of(dims, n):
    """ Coordinate 4-tuple (t, x, y, z) of linear site index n """
    _check_site(dims, n)
    coords = []
    for extent in reversed(dims.extents):
        n, c = divmod(n, extent)
        coords.append(c)
    return tuple(reversed(coords))


def neighbor(dims, n, d):
    """ Site index of the nearest neighbor of site n in direction d (periodic wrap) """
    coords = list(coords_of(dims, n))
    coords[d.mu] = (coords[d.mu] + d.sign) % dims.extents[d.mu]
    return index_of(dims, coords)


def _check_site(dims, n):
    if not 0 <= n < dims.volume:
        raise LatticeError("Site index {} is outside [0, {})".format(n, dims.volume))


class LatticeGeometry:
    """
    Lattice dimensions plus precomputed neighbor tables.

    fwd[mu] and bwd[mu] are int64 arrays of length V holding the index of n+mu and n-mu.
    Instances are immutable; the tables are shared read-only by all fields on this geometry.
    """

    def __init__(self, dims):
        if not isinstance(dims, LatticeDims):
            dims = LatticeDims(*dims)
        self.dims = dims
        self.volume = dims.volume
        sites = np.arange(self.volume, dtype=np.int64).reshape(dims.extents)
        fwd = np.empty((NDIM, self.volume), dtype=np.int64)
        bwd = np.empty((NDIM, self.volume), dtype=np.int64)
        for mu in range(NDIM):
            fwd[mu] = np.roll(sites, -1, axis=mu).ravel()
            bwd[mu] = np.roll(sites, 1, axis=mu).ravel()
        fwd.flags.writeable = False
        bwd.flags.writeable = False
        self.fwd = fwd
        self.bwd = bwd
        logger.debug("Built neighbor tables for %s lattice (V=%d)", dims, self.volume)

    @property
    def extents(self):
        return self.dims.extents

    def neighbors(self, d):
        """ Neighbor index array for all sites in direction d """
        return self.fwd[d.mu] if d.forward else self.bwd[d.mu]

    def neighbor(self, n, d):
        _check_site(self.dims, n)
        return int(self.neighbors(d)[n])

    def index_of(self, coords):
        return index_of(self.dims, coords)

    def coords_of(self, n):
        return coords_of(self.dims, n)

    def shift(self, values, mu, steps=1):
        """ Translate a per-site array by `steps` sites along mu: out[n] = values[n - steps*mu] """
        grid = np.asarray(values).reshape(self.extents + np.shape(values)[1:])
        return np.roll(grid, steps, axis=mu).reshape(np.shape(values))

    def __eq__(self, other):
        return isinstance(other, LatticeGeometry) and other.dims == self.dims

    def __hash__(self):
        return hash(self.dims)

    def __repr__(self):
        return "LatticeGeometry({})".format(self.dims)
