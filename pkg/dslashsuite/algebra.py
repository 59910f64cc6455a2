# -*- coding: utf-8 -*-
"""
Complex colour and spin algebra for Wilson fermions.

Layout conventions (shared by every module):
    colour vector  ...x3        complex
    colour matrix  ...x3x3      complex, row-major, U[a, b]
    spinor         ...x4x3      complex, spin index first, then colour
A numpy dtype doubles as the precision tag: complex128 is "high", complex64 is "low".

Gamma basis: chiral (DeGrand-Rossi), directions ordered (t, x, y, z) to match the lattice:

    gamma_t = | 0  0  1  0 |   gamma_x = | 0  0  0  i |   gamma_y = | 0  0  0 -1 |   gamma_z = | 0  0  i  0 |
              | 0  0  0  1 |             | 0  0  i  0 |             | 0  0  1  0 |             | 0  0  0 -i |
              | 1  0  0  0 |             | 0 -i  0  0 |             | 0  1  0  0 |             |-i  0  0  0 |
              | 0  1  0  0 |             |-i  0  0  0 |             |-1  0  0  0 |             | 0  i  0  0 |

    gamma_5 = gamma_x gamma_y gamma_z gamma_t = diag(1, 1, -1, -1)
            = -gamma_0 gamma_1 gamma_2 gamma_3   (phase -1 with t first)

Projectors P^{+mu} = 1 + gamma_mu and P^{-mu} = 1 - gamma_mu. Every gamma_mu is block off-diagonal
here, so P^{+-mu} s is fixed by its upper spin doublet h; the lower doublet is +-C_mu h where C_mu
is the lower-left block of gamma_mu (one entry per row, a phase). Projection therefore costs two
colour-vector add/sub per direction and no multiplications.
"""
import enum
import logging
from dataclasses import replace

import numpy as np

logger = logging.getLogger(__name__)

NSPIN = 4
NCOLOR = 3
SPINOR_WORDS = 2 * NSPIN * NCOLOR   # 24 reals
LINK_WORDS = 2 * NCOLOR * NCOLOR    # 18 reals

# Real operations of one 3x3 complex matrix times a colour vector: 9 complex multiplies (6 each)
# plus 6 complex additions (2 each)
MATVEC_FLOPS = 9 * 6 + 6 * 2
# Sign flip of the lower spin doublet of one spinor
GAMMA5_FLOPS = (NSPIN // 2) * NCOLOR * 2

assert SPINOR_WORDS == 24 and LINK_WORDS == 18
assert MATVEC_FLOPS == 66 and GAMMA5_FLOPS == 12


class PrecisionMismatch(TypeError):
    """ Operands carry different precision tags """


class GeometryMismatch(ValueError):
    """ Operands live on different lattices or have different shapes """


class Precision(enum.Enum):
    HIGH = 'double'
    LOW = 'single'

    @property
    def dtype(self):
        return np.dtype(np.complex128) if self is Precision.HIGH else np.dtype(np.complex64)

    @property
    def real_dtype(self):
        return np.dtype(np.float64) if self is Precision.HIGH else np.dtype(np.float32)

    @property
    def word_bytes(self):
        return self.real_dtype.itemsize

    @classmethod
    def parse(cls, name):
        """ Accepts a Precision, or 'double'/'high'/'64' and 'single'/'low'/'32' """
        if isinstance(name, cls):
            return name
        key = str(name).lower()
        if key in ('double', 'high', '64', 'f64'):
            return cls.HIGH
        if key in ('single', 'low', '32', 'f32'):
            return cls.LOW
        raise ValueError("Unknown precision {!r}; use 'double' or 'single'".format(name))

    @classmethod
    def of(cls, array):
        dt = np.asarray(array).dtype
        if dt == np.complex128 or dt == np.float64:
            return cls.HIGH
        if dt == np.complex64 or dt == np.float32:
            return cls.LOW
        raise PrecisionMismatch("Array dtype {} carries no precision tag".format(dt))


################ Gamma matrices and projector recipes ################
def _gamma_basis():
    i = 1j
    g = np.zeros((NSPIN, NSPIN, NSPIN), dtype=np.complex128)
    # t
    g[0, 0, 2] = g[0, 1, 3] = g[0, 2, 0] = g[0, 3, 1] = 1
    # x
    g[1, 0, 3] = g[1, 1, 2] = i
    g[1, 2, 1] = g[1, 3, 0] = -i
    # y
    g[2, 0, 3] = g[2, 3, 0] = -1
    g[2, 1, 2] = g[2, 2, 1] = 1
    # z
    g[3, 0, 2] = g[3, 3, 1] = i
    g[3, 1, 3] = g[3, 2, 0] = -i
    return g

GAMMA = _gamma_basis()
GAMMA5 = np.diag([1, 1, -1, -1]).astype(np.complex128)
GAMMA5_PHASE = -1
IDENTITY4 = np.eye(NSPIN, dtype=np.complex128)
GAMMA.flags.writeable = False
GAMMA5.flags.writeable = False


def _block_recipe(block):
    """ Turn a 2x2 block with one nonzero per row into (columns, phases) """
    cols = np.zeros(2, dtype=np.intp)
    phases = np.zeros(2, dtype=np.complex128)
    for row in range(2):
        nz = np.flatnonzero(block[row])
        if len(nz) != 1:
            raise ValueError("Gamma block row {} is not a single phase: {}".format(row, block[row]))
        cols[row] = nz[0]
        phases[row] = block[row, nz[0]]
    return cols, phases

# UPPER[mu]: (gamma_mu s)_upper = phases * s_lower[cols]; LOWER[mu]: (gamma_mu s)_lower = phases * s_upper[cols]
UPPER = tuple(_block_recipe(GAMMA[mu, :2, 2:]) for mu in range(NSPIN))
LOWER = tuple(_block_recipe(GAMMA[mu, 2:, :2]) for mu in range(NSPIN))

for _mu in range(NSPIN):
    assert not GAMMA[_mu, :2, :2].any() and not GAMMA[_mu, 2:, 2:].any()


def projector(mu, sign):
    """ Dense 4x4 matrix 1 + sign*gamma_mu (sign = +1 or -1). Only used as a reference. """
    return IDENTITY4 + sign * GAMMA[mu]


def _apply_phase(recipe, doublet):
    cols, phases = recipe
    return phases.astype(doublet.dtype)[:, None] * doublet[..., cols, :]


def half_spinor(s, mu, sign):
    """
    Upper spin doublet of (1 + sign*gamma_mu) s.
    Inputs:
        s: spinor array ...x4x3
        mu: direction 0..3
        sign: +1 or -1
    Outputs:
        h: ...x2x3, two colour vectors (one add or subtract each)
    """
    lower = _apply_phase(UPPER[mu], s[..., 2:, :])
    if sign > 0:
        return s[..., :2, :] + lower
    return s[..., :2, :] - lower


def expand_half(h, mu, sign):
    """ Rebuild the full spinor (1 + sign*gamma_mu) s from its upper doublet h """
    out = np.empty(h.shape[:-2] + (NSPIN, NCOLOR), dtype=h.dtype)
    out[..., :2, :] = h
    low = _apply_phase(LOWER[mu], h)
    out[..., 2:, :] = low if sign > 0 else -low
    return out


def project(d, s):
    """
    Apply the hopping projector of direction d across the spin index of spinor(s) s.
    Forward hops use P^{-mu} = 1 - gamma_mu, backward hops P^{+mu} = 1 + gamma_mu.
    """
    sign = -1 if d.forward else 1
    return expand_half(half_spinor(np.asarray(s), d.mu, sign), d.mu, sign)


def gamma5(s):
    """ gamma_5 s: flips the sign of the lower spin doublet """
    s = np.asarray(s)
    out = s.copy()
    out[..., 2:, :] = -s[..., 2:, :]
    return out


################ Colour algebra ################
def mat_vec(u, v):
    """ U v for colour matrices ...x3x3 and colour vectors ...x3 (broadcasting over leading axes) """
    _same_precision(u, v)
    return np.einsum('...ab,...b->...a', u, v)


def mat_dag_vec(u, v):
    """ U^dagger v, contracting over the row index of U without forming U^dagger """
    _same_precision(u, v)
    return np.einsum('...ba,...b->...a', u, v.conj()).conj()


def dagger(u):
    return np.swapaxes(np.asarray(u), -1, -2).conj()


def _same_precision(a, b):
    if Precision.of(a) is not Precision.of(b):
        raise PrecisionMismatch("Mixed precision operands: {} and {}".format(np.asarray(a).dtype, np.asarray(b).dtype))


################ Field-level linear algebra ################
# These accept either raw numpy arrays or field objects with .data, .precision and .geometry
# (fields.SpinorField); field inputs return field outputs.
def _unwrap(x):
    return x.data if hasattr(x, 'data') and hasattr(x, 'geometry') else np.asarray(x)


def _check_pair(x, y):
    if hasattr(x, 'geometry') and hasattr(y, 'geometry') and x.geometry != y.geometry:
        raise GeometryMismatch("Fields live on different lattices: {} vs {}".format(x.geometry, y.geometry))
    xd, yd = _unwrap(x), _unwrap(y)
    if xd.shape != yd.shape:
        raise GeometryMismatch("Shape mismatch: {} vs {}".format(xd.shape, yd.shape))
    _same_precision(xd, yd)
    return xd, yd


def _rewrap(template, data):
    if hasattr(template, 'data') and hasattr(template, 'geometry'):
        return replace(template, data=data)
    return data


def axpy(a, x, y):
    """ y + a*x elementwise; the scalar a is cast to the operands' precision """
    xd, yd = _check_pair(x, y)
    a = xd.dtype.type(a)
    return _rewrap(y, yd + a * xd)


def scale(a, x):
    xd = _unwrap(x)
    return _rewrap(x, xd.dtype.type(a) * xd)


def tree_sum(values):
    """
    Sum a 1-D array with a fixed pairwise tree: split at the largest power of two below the
    length, halve the power-of-two part level by level, recurse on the remainder.
    The tree shape depends only on the length, so the result is bitwise reproducible.
    """
    values = np.asarray(values).ravel()
    n = len(values)
    if n == 0:
        return values.dtype.type(0)
    if n == 1:
        return values[0]
    m = 1 << ((n - 1).bit_length() - 1)  # largest power of two < n
    head = values[:m]
    while len(head) > 1:
        head = head[0::2] + head[1::2]
    return head[0] + tree_sum(values[m:])


def dot(x, y):
    """ Global sum of conj(x)*y, accumulated in high precision. Returns a Python complex. """
    xd, yd = _check_pair(x, y)
    prod = xd.astype(np.complex128).conj() * yd.astype(np.complex128)
    return complex(tree_sum(prod))


def norm2(x):
    """ Real part of dot(x, x), accumulated in high precision """
    xd = _unwrap(x).astype(np.complex128)
    return float(tree_sum(xd.real * xd.real + xd.imag * xd.imag))


def norm(x):
    return float(np.sqrt(norm2(x)))


def convert(x, precision):
    """ Round (high -> low, nearest) or widen (low -> high, exact) to the requested precision """
    precision = Precision.parse(precision)
    xd = _unwrap(x)
    data = xd.astype(precision.dtype)
    if hasattr(x, 'data') and hasattr(x, 'geometry'):
        return replace(x, data=data)
    return data
