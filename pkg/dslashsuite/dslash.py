# -*- coding: utf-8 -*-
"""
The Wilson Dirac operator

    D psi(n) = (m_q + 4) psi(n)
               + sign/2 sum_mu [ U_mu(n) P^{-mu} psi(n+mu) + U_mu^dagger(n-mu) P^{+mu} psi(n-mu) ]

with P^{-+mu} = 1 -+ gamma_mu. sign = -1 (HOPPING_SIGN) is the standard Wilson operator, whose
constant mode on a unit gauge field is a zero mode at m_q = 0; sign = +1 is the operator with
"+1/2" in front of the sum. D^dagger is gamma_5 D gamma_5, D^dagger D is two passes.

One stencil (one output site) follows the four pipeline stages of the streamed kernel:
    stage 1  gather 8 links + 9 spinors                                   (no arithmetic)
    stage 2  8 half-spinor projections, 16 colour-vector add/sub          96 flops
    stage 3  16 colour matrix-vector products (2 per hop), 72 each        1152 flops
    stage 4  expand and add the 8 hops (7 x 24) + mass term (24 mul + 24 add)  216 flops
                                                                     total 1464 flops
A stage-3 product accumulates each row's three terms from zero (9 complex multiplies, 9 complex
adds), six operations more than the minimal MATVEC_FLOPS.
"""
import logging
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from dslashsuite.algebra import (Precision, PrecisionMismatch, GeometryMismatch, NSPIN, NCOLOR,
                                 SPINOR_WORDS, LINK_WORDS, MATVEC_FLOPS, GAMMA5_FLOPS,
                                 half_spinor, expand_half, mat_vec, mat_dag_vec, gamma5, projector, dagger)
from dslashsuite.fields import SpinorField
from dslashsuite.lattice import NDIM
from dslashsuite.su3 import COMPRESSED_LINK_WORDS, reconstruction_flops

logger = logging.getLogger(__name__)

HOPPING_SIGN = -1
DEFAULT_MASS = 0.1

D = 'D'
DDAG = 'Ddag'
DDAGD = 'DdagD'
KINDS = (D, DDAG, DDAGD)

NLINKS = 2 * NDIM        # 8 links per stencil
NSPINORS = 2 * NDIM + 1  # 9 spinors per stencil
STENCIL_WORDS = NLINKS * LINK_WORDS + NSPINORS * SPINOR_WORDS
COMPRESSED_STENCIL_WORDS = NLINKS * COMPRESSED_LINK_WORDS + NSPINORS * SPINOR_WORDS

STAGE2_FLOPS = 2 * NLINKS * NCOLOR * 2                          # 16 vector add/sub on 3 complex
STAGE3_FLOPS = 2 * NLINKS * (MATVEC_FLOPS + 2 * NCOLOR)         # 16 products at 72
STAGE4_FLOPS = (NLINKS - 1) * SPINOR_WORDS + 2 * SPINOR_WORDS   # hop sum + mass term
STENCIL_FLOPS = STAGE2_FLOPS + STAGE3_FLOPS + STAGE4_FLOPS

assert STENCIL_WORDS == 360 and COMPRESSED_STENCIL_WORDS == 296
assert STAGE3_FLOPS == 1152 and STENCIL_FLOPS == 1464

DENSE_MAX_VOLUME = 4096


class VolumeGuardError(ValueError):
    """ Dense operator requested for a lattice too large to hold it """


@dataclass(frozen=True)
class StencilInputs:
    """
    Everything one stencil reads.
        links:    8x3x3  [U_0(n) .. U_3(n), U_0(n-0) .. U_3(n-3)]
        spinors:  9x4x3  [psi(n), psi(n+0) .. psi(n+3), psi(n-0) .. psi(n-3)]
        m_q:      quark mass
    """
    links: np.ndarray
    spinors: np.ndarray
    m_q: float = DEFAULT_MASS

    def __post_init__(self):
        if np.shape(self.links) != (NLINKS, NCOLOR, NCOLOR) or np.shape(self.spinors) != (NSPINORS, NSPIN, NCOLOR):
            raise GeometryMismatch("Stencil needs 8 links and 9 spinors, got {} and {}".format(np.shape(self.links), np.shape(self.spinors)))
        if Precision.of(self.links) is not Precision.of(self.spinors):
            raise PrecisionMismatch("Stencil links and spinors differ in precision")

    @staticmethod
    def words(compressed=False):
        return COMPRESSED_STENCIL_WORDS if compressed else STENCIL_WORDS


@dataclass(frozen=True)
class FlopReport:
    stage2: int = 0
    stage3: int = 0
    stage4: int = 0
    reconstruction: int = 0
    gamma5: int = 0

    @property
    def total(self):
        return self.stage2 + self.stage3 + self.stage4 + self.reconstruction + self.gamma5

    def __add__(self, other):
        return FlopReport(*(getattr(self, f.name) + getattr(other, f.name) for f in dc_fields(self)))

    def __mul__(self, k):
        return FlopReport(*(getattr(self, f.name) * k for f in dc_fields(self)))

    __rmul__ = __mul__


def flop_count(kind, volume, compressed=False):
    """
    Exact real-operation count of one apply() of `kind` on `volume` sites.
    Compressed links add 8 reconstructions per stencil; D^dagger adds two gamma_5 sweeps.
    """
    _check_kind(kind)
    one = FlopReport(STAGE2_FLOPS, STAGE3_FLOPS, STAGE4_FLOPS,
                     NLINKS * reconstruction_flops() if compressed else 0)
    g5 = FlopReport(gamma5=2 * GAMMA5_FLOPS)
    per_site = {D: one, DDAG: one + g5, DDAGD: one + one + g5}[kind]
    return per_site * int(volume)


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError("Unknown operator kind {!r}; use one of {}".format(kind, KINDS))


######## Stencil ##########
def _wilson(center, psi_fwd, psi_bwd, u_fwd, u_bwd, m_q, sign):
    """ Shared body of stencil() and apply(); every argument may carry leading batch axes """
    acc = np.zeros_like(center)
    for mu in range(NDIM):
        h = half_spinor(psi_fwd[mu], mu, -1)
        acc += expand_half(mat_vec(u_fwd[mu][..., None, :, :], h), mu, -1)
        h = half_spinor(psi_bwd[mu], mu, +1)
        acc += expand_half(mat_dag_vec(u_bwd[mu][..., None, :, :], h), mu, +1)
    real = center.real.dtype.type
    return real(m_q + 4) * center + real(sign * 0.5) * acc


def gather(gauge, psi, n, m_q=DEFAULT_MASS):
    """ Collect the StencilInputs of site n (stage 1) """
    geom = gauge.geometry
    links = gauge.links
    fwd = [geom.fwd[mu, n] for mu in range(NDIM)]
    bwd = [geom.bwd[mu, n] for mu in range(NDIM)]
    u = np.stack([links[n, mu] for mu in range(NDIM)] + [links[bwd[mu], mu] for mu in range(NDIM)])
    s = np.stack([psi.data[n]] + [psi.data[m] for m in fwd] + [psi.data[m] for m in bwd])
    return StencilInputs(u, s, m_q)


def stencil(inputs, sign=HOPPING_SIGN):
    """ D psi at a single site from its gathered inputs (4x3 spinor) """
    u, s = inputs.links, inputs.spinors
    return _wilson(s[0], s[1:1 + NDIM], s[1 + NDIM:], u[:NDIM], u[NDIM:], inputs.m_q, sign)


######## Full-field application ##########
def _check_operands(gauge, psi):
    if gauge.geometry != psi.geometry:
        raise GeometryMismatch("Gauge field on {} but spinor field on {}".format(gauge.geometry, psi.geometry))
    if gauge.precision is not psi.precision:
        raise PrecisionMismatch("Gauge field is {} precision, spinor field {}".format(gauge.precision.value, psi.precision.value))


def _apply_d(links, geom, data, m_q, sign):
    return _wilson(data,
                   [data[geom.fwd[mu]] for mu in range(NDIM)],
                   [data[geom.bwd[mu]] for mu in range(NDIM)],
                   [links[:, mu] for mu in range(NDIM)],
                   [links[geom.bwd[mu], mu] for mu in range(NDIM)],
                   m_q, sign)


def apply(kind, gauge, psi, m_q=DEFAULT_MASS, sign=HOPPING_SIGN):
    """
    Apply D, D^dagger or D^dagger D to a spinor field.
    Inputs:
        kind: 'D', 'Ddag' or 'DdagD'
        gauge: GaugeField or CompressedGaugeField (links rebuilt once per call)
        psi: SpinorField of the same geometry and precision
        m_q: quark mass
        sign: hopping sign (-1 standard Wilson)
    Outputs:
        SpinorField; every output site is written exactly once, no reductions
    """
    _check_kind(kind)
    _check_operands(gauge, psi)
    geom = gauge.geometry
    links = gauge.links
    data = psi.data
    if kind == D:
        out = _apply_d(links, geom, data, m_q, sign)
    elif kind == DDAG:
        out = gamma5(_apply_d(links, geom, gamma5(data), m_q, sign))
    else:
        out = gamma5(_apply_d(links, geom, gamma5(_apply_d(links, geom, data, m_q, sign)), m_q, sign))
    return SpinorField(geom, out)


def normal_op(gauge, m_q=DEFAULT_MASS, sign=HOPPING_SIGN):
    """ psi -> D^dagger D psi, with the parameters bound (the operator the solvers invert) """
    def op(psi):
        return apply(DDAGD, gauge, psi, m_q, sign)
    return op


######## Dense reference ##########
def apply_dense(gauge, m_q=DEFAULT_MASS, sign=HOPPING_SIGN, kind=D):
    """
    The operator as an explicit (24V)x(24V) complex matrix, built entry by entry from the links and
    the dense 4x4 projectors (no stencil code involved). Row/column index = 12*n + 3*spin + colour.
    Test oracle only: refuses V > DENSE_MAX_VOLUME.
    """
    _check_kind(kind)
    geom = gauge.geometry
    V = geom.volume
    if V > DENSE_MAX_VOLUME:
        raise VolumeGuardError("Dense operator for V={} exceeds the guard V <= {}".format(V, DENSE_MAX_VOLUME))
    links = np.asarray(gauge.links).astype(np.complex128)
    blk = NSPIN * NCOLOR
    mat = np.zeros((blk * V, blk * V), dtype=np.complex128)
    diag = (m_q + 4) * np.eye(blk)
    half = sign * 0.5
    for n in range(V):
        rows = slice(blk * n, blk * (n + 1))
        mat[rows, rows] += diag
        for mu in range(NDIM):
            m = geom.fwd[mu, n]
            mat[rows, blk * m:blk * (m + 1)] += half * np.kron(projector(mu, -1), links[n, mu])
            m = geom.bwd[mu, n]
            mat[rows, blk * m:blk * (m + 1)] += half * np.kron(projector(mu, +1), dagger(links[m, mu]))
    if kind == DDAG:
        return mat.conj().T
    if kind == DDAGD:
        return mat.conj().T @ mat
    return mat
