# -*- coding: utf-8 -*-
"""
Gauge and spinor fields on a LatticeGeometry, and their deterministic initialisation.

    GaugeField.links   V x 4 x 3 x 3   U_mu(n), forward links only
    SpinorField.data   V x 4 x 3       psi(n)

Fields are immutable once built; the arrays are read-only views. Precision is the dtype
(complex128 high, complex64 low).

Random fields use a counter-based generator (numpy Philox). Every (seed, kind, site, direction)
owns its own key, so the content of a field is a pure function of seed and geometry, whatever
order or number of workers the sites are generated with.
"""
import logging
from dataclasses import dataclass

import numpy as np

from dslashsuite.algebra import Precision, NSPIN, NCOLOR, GeometryMismatch, axpy
from dslashsuite.chunk import site_chunks, unchunk
from dslashsuite.lattice import LatticeGeometry, NDIM
from dslashsuite import su3

logger = logging.getLogger(__name__)

# SU(3) tolerance when a field is created or loaded
SU3_TOL = {Precision.HIGH: 1e-10, Precision.LOW: 1e-5}

# Stream kinds, mixed into the Philox key next to the site/direction counter
_KIND_GAUGE = 0
_KIND_SPINOR = 1
_KIND_SAMPLE = 2


def _readonly(a):
    v = np.asarray(a).view()
    v.flags.writeable = False
    return v


def _geometry(geom):
    return geom if isinstance(geom, LatticeGeometry) else LatticeGeometry(geom)


def _trusted_gauge(geometry, links):
    """ GaugeField around links already known to be SU(3) at their source precision """
    gauge = object.__new__(GaugeField)
    object.__setattr__(gauge, 'geometry', geometry)
    object.__setattr__(gauge, 'links', _readonly(links))
    return gauge


@dataclass(frozen=True, eq=False)
class GaugeField:
    geometry: LatticeGeometry
    links: np.ndarray

    def __post_init__(self):
        links = np.asarray(self.links)
        expect = (self.geometry.volume, NDIM, NCOLOR, NCOLOR)
        if links.shape != expect:
            raise GeometryMismatch("Gauge links have shape {}, expected {}".format(links.shape, expect))
        precision = Precision.of(links)
        su3.check_special_unitary(links.reshape(-1, NCOLOR, NCOLOR), tol=SU3_TOL[precision], what="gauge link")
        object.__setattr__(self, 'links', _readonly(links))

    compressed = False

    @property
    def precision(self):
        return Precision.of(self.links)

    def link(self, n, mu):
        return self.links[n, mu]

    def convert(self, precision):
        precision = Precision.parse(precision)
        if precision is self.precision:
            return self
        links = self.links.astype(precision.dtype)
        if precision is Precision.LOW:
            return GaugeField(self.geometry, links)
        # widening is exact; the links keep the tolerance they were checked at
        return _trusted_gauge(self.geometry, links)

    def compress(self):
        params, raw, flags = su3.compress_links(self.links)
        return CompressedGaugeField(self.geometry, params, raw, flags)


@dataclass(frozen=True, eq=False)
class CompressedGaugeField:
    """
    Gauge field held as 10 reals per link (plus raw links behind a per-link flag).
    Reading .links rebuilds every link, the way the streamed kernel rebuilds them per stencil.
    """
    geometry: LatticeGeometry
    params: np.ndarray
    raw: np.ndarray
    flags: np.ndarray

    compressed = True

    def __post_init__(self):
        nlinks = self.geometry.volume * NDIM
        flags = np.asarray(self.flags, dtype=np.uint8)
        if flags.shape != (nlinks,):
            raise GeometryMismatch("Expected {} link flags, got {}".format(nlinks, flags.shape))
        nraw = int(np.count_nonzero(flags))
        if len(self.params) != nlinks - nraw or len(self.raw) != nraw:
            raise GeometryMismatch("Compressed record counts do not match the flags ({} params, {} raw, {} flagged)".format(len(self.params), len(self.raw), nraw))
        for name in ('params', 'raw'):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        object.__setattr__(self, 'flags', _readonly(flags))

    @property
    def precision(self):
        return Precision.of(self.params)

    @property
    def links(self):
        links = su3.decompress_links(self.params, self.raw.astype(self.precision.dtype), self.flags)
        return links.reshape(self.geometry.volume, NDIM, NCOLOR, NCOLOR)

    def decompress(self):
        # rebuilt links are unitary to the precision of the stored reals
        return _trusted_gauge(self.geometry, self.links)

    def convert(self, precision):
        precision = Precision.parse(precision)
        if precision is self.precision:
            return self
        return CompressedGaugeField(self.geometry, self.params.astype(precision.real_dtype), self.raw.astype(precision.dtype), self.flags)


@dataclass(frozen=True, eq=False)
class SpinorField:
    geometry: LatticeGeometry
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        expect = (self.geometry.volume, NSPIN, NCOLOR)
        if data.shape != expect:
            raise GeometryMismatch("Spinor data has shape {}, expected {}".format(data.shape, expect))
        Precision.of(data)
        object.__setattr__(self, 'data', _readonly(data))

    @property
    def precision(self):
        return Precision.of(self.data)

    def convert(self, precision):
        precision = Precision.parse(precision)
        return SpinorField(self.geometry, self.data.astype(precision.dtype))

    def __add__(self, other):
        return axpy(1.0, other, self)

    def __sub__(self, other):
        return axpy(-1.0, other, self)


def zeros(geom, precision=Precision.HIGH):
    geom = _geometry(geom)
    return SpinorField(geom, np.zeros((geom.volume, NSPIN, NCOLOR), dtype=Precision.parse(precision).dtype))


######## Gauge field initialisation ##########
def cold_start(geom, precision=Precision.HIGH):
    """ Gauge field with every link equal to the identity """
    geom = _geometry(geom)
    dtype = Precision.parse(precision).dtype
    links = np.zeros((geom.volume, NDIM, NCOLOR, NCOLOR), dtype=dtype)
    links[..., range(NCOLOR), range(NCOLOR)] = 1
    return GaugeField(geom, links)


def hot_start(geom, seed, precision=Precision.HIGH, pool=None):
    """
    Gauge field with an independent random SU(3) matrix on every link.
    Inputs:
        geom: LatticeGeometry (or LatticeDims / 4-tuple)
        seed: non-negative integer
        precision: generated in high precision, then rounded if 'single' is requested
        pool (optional): multiprocessing Pool; sites are split into one chunk per worker
    Outputs:
        GaugeField, bitwise identical for the same (seed, geometry) with or without a pool
    """
    geom = _geometry(geom)
    seed = _check_seed(seed)
    links = _map_sites(_hot_chunk, geom.volume, seed, pool).reshape(geom.volume, NDIM, NCOLOR, NCOLOR)
    logger.info("Generated hot gauge field on %s lattice (seed %d)", geom.dims, seed)
    return GaugeField(geom, links.astype(Precision.parse(precision).dtype))


def random_su3(count, seed):
    """ `count` random SU(3) matrices (count x 3 x 3, complex128) drawn from their own streams """
    seed = _check_seed(seed)
    draws = np.stack([_draw(seed, _KIND_SAMPLE, i, 0, 2 * NCOLOR * NCOLOR) for i in range(count)]) if count else np.zeros((0, 18))
    return _su3_from_gaussian(draws)


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2 ** 63:
        raise ValueError("Seed must be a non-negative 63-bit integer, got {}".format(seed))
    return seed


def _draw(seed, kind, site, direction, count):
    """ `count` standard normals from the stream keyed by (seed, kind, site, direction) """
    stream = ((site * 8 + direction) << 2) | kind
    key = seed | (stream << 64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(count)


def _map_sites(func, volume, seed, pool):
    if pool is None:
        return func((seed, 0, volume))
    nworkers = getattr(pool, '_processes', None) or 1
    jobs = [(seed, start, stop) for start, stop in site_chunks(volume, nchunks=nworkers)]
    logger.info("Generating %d sites in %d chunks", volume, len(jobs))
    return unchunk(pool.map(func, jobs))


def _hot_chunk(args):
    seed, start, stop = args
    draws = np.empty(((stop - start) * NDIM, 2 * NCOLOR * NCOLOR))
    k = 0
    for site in range(start, stop):
        for mu in range(NDIM):
            draws[k] = _draw(seed, _KIND_GAUGE, site, mu, 2 * NCOLOR * NCOLOR)
            k += 1
    return _su3_from_gaussian(draws).reshape(stop - start, NDIM, NCOLOR, NCOLOR)


def _cdot3(a, b):
    # sum_k conj(a_k) b_k, written out so the summation order is fixed
    return a[:, 0].conj() * b[:, 0] + a[:, 1].conj() * b[:, 1] + a[:, 2].conj() * b[:, 2]


def _normalize(v):
    n2 = (v.real * v.real + v.imag * v.imag)
    return v / np.sqrt(n2[:, 0] + n2[:, 1] + n2[:, 2])[:, None]


def _su3_from_gaussian(draws):
    """
    Gaussian complex 3x3 matrices (N x 18 reals, real/imag interleaved row-major)
    -> row-wise Gram-Schmidt (unitary) -> divide by a cube root of the determinant (det = 1).
    """
    g = draws[:, 0::2] + 1j * draws[:, 1::2]
    g = g.reshape(-1, NCOLOR, NCOLOR)
    r0 = _normalize(g[:, 0])
    v1 = g[:, 1] - _cdot3(r0, g[:, 1])[:, None] * r0
    r1 = _normalize(v1)
    v2 = g[:, 2] - _cdot3(r0, g[:, 2])[:, None] * r0 - _cdot3(r1, g[:, 2])[:, None] * r1
    r2 = _normalize(v2)
    u = np.stack([r0, r1, r2], axis=1)
    det = (u[:, 0, 0] * (u[:, 1, 1] * u[:, 2, 2] - u[:, 1, 2] * u[:, 2, 1])
           - u[:, 0, 1] * (u[:, 1, 0] * u[:, 2, 2] - u[:, 1, 2] * u[:, 2, 0])
           + u[:, 0, 2] * (u[:, 1, 0] * u[:, 2, 1] - u[:, 1, 1] * u[:, 2, 0]))
    return u * np.exp(-1j * np.angle(det) / 3)[:, None, None]


######## Spinor fields ##########
def point_source(geom, site, spin, color, precision=Precision.HIGH):
    """ Spinor field that is zero except a single unit component at (site, spin, color) """
    geom = _geometry(geom)
    if isinstance(site, (tuple, list)):
        site = geom.index_of(site)
    if not 0 <= site < geom.volume or not 0 <= spin < NSPIN or not 0 <= color < NCOLOR:
        raise ValueError("Point source ({}, spin {}, color {}) is outside the field".format(site, spin, color))
    data = np.zeros((geom.volume, NSPIN, NCOLOR), dtype=Precision.parse(precision).dtype)
    data[site, spin, color] = 1
    return SpinorField(geom, data)


def random_spinor(geom, seed, precision=Precision.HIGH, pool=None):
    """ Spinor field with independent standard complex Gaussian components, counter-based like hot_start """
    geom = _geometry(geom)
    seed = _check_seed(seed)
    data = _map_sites(_spinor_chunk, geom.volume, seed, pool)
    return SpinorField(geom, data.astype(Precision.parse(precision).dtype))


def _spinor_chunk(args):
    seed, start, stop = args
    nwords = 2 * NSPIN * NCOLOR
    draws = np.empty((stop - start, nwords))
    for k, site in enumerate(range(start, stop)):
        draws[k] = _draw(seed, _KIND_SPINOR, site, 0, nwords)
    return (draws[:, 0::2] + 1j * draws[:, 1::2]).reshape(stop - start, NSPIN, NCOLOR)
