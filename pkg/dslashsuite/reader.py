# -*- coding: utf-8 -*-
'''
Reader and writer for dslashsuite field files (.dsf, optionally .dsf.gz), and for key = value
device profiles.

Includes high level, mid-level, and low-level functions. The byte layout of a field file is
documented in docs/file-format.md:

    64-byte little-endian header (HEADER_DTYPE), then the payload
        gauge       V x 4 x 3 x 3 complex, site-major, then direction, row, column
        spinor      V x 4 x 3 complex, site-major, then spin, colour
        compressed  V*4 flag bytes, then 10 reals per unflagged link, then 3x3 complex per flagged link
    CRC-32 of the payload is stored in the header and checked on every load.
'''
import csv
import gzip # For reading and writing .dsf.gz files
import logging
import os # For path splitting
import re # For parsing profile lines
import zlib
from collections import OrderedDict
from dataclasses import asdict

import numpy as np

from dslashsuite.algebra import Precision, NSPIN, NCOLOR
from dslashsuite.fields import GaugeField, CompressedGaugeField, SpinorField, SU3_TOL
from dslashsuite.lattice import LatticeDims, LatticeGeometry, NDIM
from dslashsuite.su3 import COMPRESSED_LINK_WORDS, check_special_unitary

logger = logging.getLogger(__name__)

MAGIC = b'DSLFIELD'
VERSION = 1
KIND_GAUGE = 1
KIND_SPINOR = 2
KINDS = {KIND_GAUGE: 'gauge', KIND_SPINOR: 'spinor'}

HEADER_DTYPE = np.dtype([
    ('magic', 'S8'),
    ('version', '<u4'),
    ('kind', '<u4'),
    ('word_bytes', '<u4'),
    ('compressed', '<u4'),
    ('dims', '<u4', (4,)),
    ('payload_nbytes', '<u8'),
    ('crc32', '<u4'),
    ('reserved', 'V12'),
])
HEADER_BYTES = 64
assert HEADER_DTYPE.itemsize == HEADER_BYTES


class FieldFileError(ValueError):
    """ Base class for unreadable field files """


class ChecksumError(FieldFileError):
    """ Payload missing, truncated or corrupted """


class UnknownVersionError(FieldFileError):
    """ Header carries a format version this reader does not know """


class HeaderMismatchError(FieldFileError):
    """ Header inconsistent with itself, or with what the caller expected """


class ProfileError(ValueError):
    """ Missing or malformed device profile """


def _myopen(fname):
    _, ext = os.path.splitext(fname)
    if ext == '.gz':
        return gzip.open # If the file is .dsf.gz, open using gunzip
    return open


######## HIGH LEVEL: Saving and loading fields ##########
def save(field, fname):
    """
    Write a GaugeField, CompressedGaugeField or SpinorField to a field file.
    Inputs:
        field: the field
        fname: a file path (string); a '.gz' extension writes gzip (with a zero timestamp, so the
               bytes depend only on the field)
    Outputs:
        fname
    """
    header, payload = encode(field)
    _, ext = os.path.splitext(fname)
    if ext == '.gz':
        with open(fname, 'wb') as raw, gzip.GzipFile(filename='', mode='wb', fileobj=raw, mtime=0) as f:
            f.write(header.tobytes() + payload)
    else:
        with open(fname, 'wb') as f:
            f.write(header.tobytes() + payload)
    logger.info("Wrote %s field %s to %s", KINDS[int(header['kind'])], field.geometry.dims, fname)
    return fname


def load(fname, kind=None, dims=None):
    """
    Read a field file.
    Inputs:
        fname: a file path (string), .dsf or .dsf.gz
        kind (optional): 'gauge' or 'spinor'; anything else in the file is a HeaderMismatchError
        dims (optional): LatticeDims (or 4-tuple) the file must match
    Outputs:
        GaugeField, CompressedGaugeField or SpinorField. Gauge links are re-verified as SU(3).
    Raises ChecksumError, UnknownVersionError, HeaderMismatchError (all FieldFileError).
    """
    with _myopen(fname)(fname, 'rb') as f:
        header = get_header(f)
        payload = f.read()
    if kind is not None and KINDS[header['kind']] != kind:
        raise HeaderMismatchError("{} holds a {} field, expected {}".format(fname, KINDS[header['kind']], kind))
    if dims is not None and header['dims'] != (dims if isinstance(dims, LatticeDims) else LatticeDims(*dims)):
        raise HeaderMismatchError("{} is a {} lattice, expected {}".format(fname, header['dims'], dims))
    if len(payload) != header['payload_nbytes'] or (zlib.crc32(payload) & 0xffffffff) != header['crc32']:
        raise ChecksumError("{}: payload checksum mismatch ({} of {} bytes present)".format(fname, len(payload), header['payload_nbytes']))
    logger.info("Read %s field %s from %s", KINDS[header['kind']], header['dims'], fname)
    return decode(header, payload)


######## MID LEVEL: Encoding and decoding ##########
def _payload_nbytes(kind, compressed, precision, volume, nraw=0):
    w = precision.word_bytes
    if kind == KIND_SPINOR:
        return volume * NSPIN * NCOLOR * 2 * w
    if not compressed:
        return volume * NDIM * NCOLOR * NCOLOR * 2 * w
    nlinks = volume * NDIM
    return nlinks + (nlinks - nraw) * COMPRESSED_LINK_WORDS * w + nraw * NCOLOR * NCOLOR * 2 * w


def _le(dtype):
    return np.dtype(dtype).newbyteorder('<')


def encode(field):
    """ (header record, payload bytes) of a field """
    if not isinstance(field, (SpinorField, CompressedGaugeField, GaugeField)):
        raise TypeError("Cannot save object of type {}".format(type(field).__name__))
    precision = field.precision
    dims = field.geometry.dims
    if isinstance(field, SpinorField):
        kind, compressed = KIND_SPINOR, False
        payload = np.ascontiguousarray(field.data, dtype=_le(precision.dtype)).tobytes()
    elif isinstance(field, CompressedGaugeField):
        kind, compressed = KIND_GAUGE, True
        payload = (np.ascontiguousarray(field.flags, dtype='u1').tobytes()
                   + np.ascontiguousarray(field.params, dtype=_le(precision.real_dtype)).tobytes()
                   + np.ascontiguousarray(field.raw, dtype=_le(precision.dtype)).tobytes())
    else:
        kind, compressed = KIND_GAUGE, False
        payload = np.ascontiguousarray(field.links, dtype=_le(precision.dtype)).tobytes()

    header = np.zeros((), dtype=HEADER_DTYPE)
    header['magic'] = MAGIC
    header['version'] = VERSION
    header['kind'] = kind
    header['word_bytes'] = precision.word_bytes
    header['compressed'] = int(compressed)
    header['dims'] = dims.extents
    header['payload_nbytes'] = len(payload)
    header['crc32'] = zlib.crc32(payload) & 0xffffffff
    return header, payload


def decode(header, payload):
    """ Build the field described by a parsed header (get_header) from its payload bytes """
    geom = LatticeGeometry(header['dims'])
    precision = header['precision']
    V = geom.volume
    if header['kind'] == KIND_SPINOR:
        data = np.frombuffer(payload, dtype=_le(precision.dtype)).reshape(V, NSPIN, NCOLOR)
        return SpinorField(geom, data.astype(precision.dtype))
    if not header['compressed']:
        links = np.frombuffer(payload, dtype=_le(precision.dtype)).reshape(V, NDIM, NCOLOR, NCOLOR)
        return GaugeField(geom, links.astype(precision.dtype))

    nlinks = V * NDIM
    flags = np.frombuffer(payload, dtype='u1', count=nlinks)
    nraw = int(np.count_nonzero(flags))
    if len(payload) != _payload_nbytes(KIND_GAUGE, True, precision, V, nraw):
        raise HeaderMismatchError("Compressed payload of {} bytes does not match {} flagged links".format(len(payload), nraw))
    w = precision.word_bytes
    nparams = (nlinks - nraw) * COMPRESSED_LINK_WORDS
    params = np.zeros((0, COMPRESSED_LINK_WORDS), dtype=precision.real_dtype)
    raw = np.zeros((0, NCOLOR, NCOLOR), dtype=precision.dtype)
    if nparams:
        params = np.frombuffer(payload, dtype=_le(precision.real_dtype), count=nparams, offset=nlinks)
        params = params.astype(precision.real_dtype).reshape(-1, COMPRESSED_LINK_WORDS)
    if nraw:
        raw = np.frombuffer(payload, dtype=_le(precision.dtype), offset=nlinks + nparams * w)
        raw = raw.astype(precision.dtype).reshape(-1, NCOLOR, NCOLOR)
    field = CompressedGaugeField(geom, params, raw, flags.copy())
    check_special_unitary(field.links.reshape(-1, NCOLOR, NCOLOR), tol=SU3_TOL[precision], what="reconstructed link")
    return field


def get_header(file):
    '''
    Reads the 64-byte header of a field file and advances the file position past it.
    Returns an OrderedDict with magic, version, kind, precision, compressed, dims,
    payload_nbytes and crc32, after checking the header against itself.
    '''
    if isinstance(file, str):
        # if called with a filename, recall with opened file.
        with _myopen(file)(file, 'rb') as f:
            return get_header(f)
    s = file.read(HEADER_BYTES)
    if len(s) < HEADER_BYTES:
        raise ChecksumError("File ends inside the header ({} of {} bytes)".format(len(s), HEADER_BYTES))
    rec = np.frombuffer(s, dtype=HEADER_DTYPE, count=1)[0]
    if rec['magic'] != MAGIC:
        raise HeaderMismatchError("Not a field file: magic {!r}".format(bytes(rec['magic'])))
    if int(rec['version']) != VERSION:
        raise UnknownVersionError("Unknown field file version {} (this reader knows {})".format(int(rec['version']), VERSION))

    h = OrderedDict()
    h['magic'] = bytes(rec['magic'])
    h['version'] = int(rec['version'])
    h['kind'] = int(rec['kind'])
    if h['kind'] not in KINDS:
        raise HeaderMismatchError("Unknown field kind {}".format(h['kind']))
    word = int(rec['word_bytes'])
    if word not in (4, 8):
        raise HeaderMismatchError("Unsupported word size {} bytes".format(word))
    h['precision'] = Precision.HIGH if word == 8 else Precision.LOW
    h['compressed'] = bool(rec['compressed'])
    if h['compressed'] and h['kind'] != KIND_GAUGE:
        raise HeaderMismatchError("Only gauge fields can be compressed")
    try:
        h['dims'] = LatticeDims(*(int(n) for n in rec['dims']))
    except ValueError as err:
        raise HeaderMismatchError("Bad lattice extents in header: {}".format(err))
    h['payload_nbytes'] = int(rec['payload_nbytes'])
    h['crc32'] = int(rec['crc32'])
    if not h['compressed']:
        expect = _payload_nbytes(h['kind'], False, h['precision'], h['dims'].volume)
        if h['payload_nbytes'] != expect:
            raise HeaderMismatchError("Header declares {} payload bytes, a {} {} field needs {}".format(
                h['payload_nbytes'], h['dims'], KINDS[h['kind']], expect))
    return h


######## HIGH LEVEL: CSV tables ##########
def write_csv(fname, rows):
    """ Write dataclass records (or OrderedDicts) with a header row of their field names """
    rows = [asdict(r) if not isinstance(r, dict) else r for r in rows]
    if not rows:
        raise ValueError("Nothing to write to {}".format(fname))
    with open(fname, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator='\n')
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
    return fname


def read_csv(fname):
    """ Read a table written by write_csv() into a list of OrderedDicts of strings """
    with open(fname, 'r', newline='') as f:
        return [OrderedDict(r) for r in csv.DictReader(f)]


######## HIGH LEVEL: Reading device profiles ##########
def read_profile(fname):
    """ Read an (always-ASCII) key = value profile into an OrderedDict of strings, in file order

    Blank lines and everything after '#' are ignored; repeated keys are an error.
    """
    if not os.path.isfile(fname):
        raise ProfileError("Profile file not found: {}".format(fname))
    d = OrderedDict()
    with open(fname, 'r') as f:
        for lineno, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            m = re.search(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)$", line) # e.g. "frequency_hz = 300e6"
            if not m:
                raise ProfileError("{}:{}: expected 'key = value', got {!r}".format(fname, lineno, line))
            key, value = m.group(1), m.group(2)
            if key in d:
                raise ProfileError("{}:{}: duplicate key '{}'".format(fname, lineno, key))
            d[key] = value
    return d
