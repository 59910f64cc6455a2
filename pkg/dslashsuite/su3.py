# -*- coding: utf-8 -*-
"""
SU(3) checks, and a 10-real parametrisation of gauge links for streaming.

A link U with rows a, b, c is stored as
    [Re a1, Im a1, Re a2, Im a2, Re a3, Im a3, Re b1, Im b1, Re b2, Im b2]
and rebuilt without trigonometric functions:
    b3 = -(conj(a1) b1 + conj(a2) b2) / conj(a3)      (row 2 orthogonal to row 1)
    c  = conj(a x b)                                   (row 3; fixes det U = 1)
This is one 10-parameter scheme meeting those constraints, not a reproduction of any
particular published formula set.

Links with |a3| < PIVOT_EPS cannot be rebuilt reliably; compress() refuses them with
PivotTooSmall and field-level compression stores them raw (18 words) behind a flag.
"""
import logging

import numpy as np

from dslashsuite.algebra import NCOLOR, LINK_WORDS

logger = logging.getLogger(__name__)

COMPRESSED_LINK_WORDS = 10
PIVOT_EPS = 1e-6
SU3_TOL = 1e-10

# Real operations in reconstruct():
#   b3:    2 complex multiplies (12) + 1 complex add (2)
#          + division by conj(a3): numerator times a3 (6), |a3|^2 (3), two real divides (2)  -> 25
#   row 3: per component 2 complex multiplies (12) + 1 complex subtract (2), three components -> 42
# Conjugations and the overall minus sign only flip signs of operands and are not counted.
RECONSTRUCTION_FLOPS = 25 + 42


class NotSpecialUnitary(ValueError):
    """ Link fails U^dagger U = 1 or det U = 1 within tolerance """


class PivotTooSmall(ValueError):
    """ |U[0][2]| below PIVOT_EPS: store this link uncompressed """


def reconstruction_flops():
    """ Exact real-operation count of one reconstruct() call (see RECONSTRUCTION_FLOPS) """
    return RECONSTRUCTION_FLOPS


def unitarity_error(u):
    """ max |U^dagger U - 1| over the last two axes, one value per leading index """
    u = np.asarray(u)
    udu = np.einsum('...ba,...bc->...ac', u.conj(), u)
    return np.abs(udu - np.eye(NCOLOR)).max(axis=(-1, -2))


def det_error(u):
    return np.abs(np.linalg.det(np.asarray(u).astype(np.complex128)) - 1)


def is_special_unitary(u, tol=SU3_TOL):
    """ True where every link (leading axes) is SU(3) to tol """
    return (unitarity_error(u) <= tol) & (det_error(u) <= tol)


def check_special_unitary(u, tol=SU3_TOL, what="link"):
    ok = is_special_unitary(u, tol)
    if not np.all(ok):
        bad = np.size(ok) - np.count_nonzero(ok)
        worst = max(float(np.max(unitarity_error(u))), float(np.max(det_error(u))))
        raise NotSpecialUnitary("{} {}(s) fail the SU(3) check (worst deviation {:.3e}, tolerance {:.1e})".format(bad, what, worst, tol))


def pivot_ok(u):
    """ True where U[0][2] is large enough to rebuild the link from 10 reals """
    return np.abs(np.asarray(u)[..., 0, 2]) >= PIVOT_EPS


def compress(u, check=True):
    """
    Compress one SU(3) link (or a stack of links ...x3x3) to 10 reals per link.
    Inputs:
        u: complex array ...x3x3
        check: verify SU(3) first (tolerance SU3_TOL)
    Outputs:
        c: real array ...x10 in the precision of u
    Raises NotSpecialUnitary, or PivotTooSmall if any link has |U[0][2]| < PIVOT_EPS.
    """
    u = np.asarray(u)
    if check:
        check_special_unitary(u.astype(np.complex128))
    ok = pivot_ok(u)
    if not np.all(ok):
        raise PivotTooSmall("|U[0][2]| < {} for {} link(s); store raw instead".format(PIVOT_EPS, np.size(ok) - np.count_nonzero(ok)))
    return _extract(u)


def _extract(u):
    out = np.empty(u.shape[:-2] + (COMPRESSED_LINK_WORDS,), dtype=u.real.dtype)
    row1 = u[..., 0, :]
    out[..., 0:6:2] = row1.real
    out[..., 1:6:2] = row1.imag
    out[..., 6] = u[..., 1, 0].real
    out[..., 7] = u[..., 1, 0].imag
    out[..., 8] = u[..., 1, 1].real
    out[..., 9] = u[..., 1, 1].imag
    return out


def reconstruct(c):
    """
    Rebuild SU(3) link(s) from compressed parameters ...x10 (inverse of compress).
    Precision follows the input: float64 -> complex128, float32 -> complex64.
    """
    c = np.asarray(c)
    cdt = np.complex128 if c.dtype == np.float64 else np.complex64
    a1, a2, a3, b1, b2 = (_cplx(c[..., k], c[..., k + 1], cdt) for k in range(0, COMPRESSED_LINK_WORDS, 2))

    num = a1.conj() * b1 + a2.conj() * b2
    # num / conj(a3) = num * a3 / |a3|^2
    b3 = -(num * a3) / (a3.real * a3.real + a3.imag * a3.imag)

    u = np.empty(c.shape[:-1] + (NCOLOR, NCOLOR), dtype=cdt)
    u[..., 0, 0], u[..., 0, 1], u[..., 0, 2] = a1, a2, a3
    u[..., 1, 0], u[..., 1, 1], u[..., 1, 2] = b1, b2, b3
    u[..., 2, 0] = (a2 * b3 - a3 * b2).conj()
    u[..., 2, 1] = (a3 * b1 - a1 * b3).conj()
    u[..., 2, 2] = (a1 * b2 - a2 * b1).conj()
    return u


def _cplx(re, im, cdt):
    out = np.empty(np.shape(re), dtype=cdt)
    out.real = re
    out.imag = im
    return out


def compress_links(links):
    """
    Compress a stack of links with the raw-storage fallback.
    Inputs:
        links: complex array Nx3x3 (already validated as SU(3))
    Outputs:
        params: real array Mx10 for the M links with a usable pivot (in link order)
        raw: complex array Kx3x3 for the K = N - M links stored uncompressed (in link order)
        flags: uint8 array N, 1 where the link is stored raw
    """
    links = np.asarray(links).reshape(-1, NCOLOR, NCOLOR)
    ok = pivot_ok(links)
    flags = (~ok).astype(np.uint8)
    nraw = int(flags.sum())
    if nraw:
        logger.warning("%d of %d links have |U[0][2]| < %g and are stored raw", nraw, len(links), PIVOT_EPS)
    return _extract(links[ok]), links[~ok].copy(), flags


def decompress_links(params, raw, flags):
    """ Inverse of compress_links: returns an Nx3x3 complex array """
    flags = np.asarray(flags).astype(bool)
    dtype = raw.dtype if raw.size else (np.complex128 if params.dtype == np.float64 else np.complex64)
    links = np.empty((len(flags), NCOLOR, NCOLOR), dtype=dtype)
    links[~flags] = reconstruct(params)
    links[flags] = raw
    return links


def stream_words(flags):
    """ Real words needed to stream a set of links: 10 per compressed link, 18 per raw one """
    flags = np.asarray(flags)
    nraw = int(np.count_nonzero(flags))
    return (len(flags) - nraw) * COMPRESSED_LINK_WORDS + nraw * LINK_WORDS
