# -*- coding: utf-8 -*-
"""
Solvers for the normal equations  D^dagger D psi = eta.

    cg_reference         plain conjugate gradient, everything in high precision
    residual_guided_cg   mixed precision defect correction: k low-precision CG steps on the
                         rescaled residual, then one exact high-precision residual update
    direct_solve         dense Cholesky factorisation (small lattices only, test oracle)

Dot products and norms are accumulated in high precision whatever the field precision;
scalars are cast to the field precision when they scale a field.
"""
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg

from dslashsuite.algebra import Precision, PrecisionMismatch, axpy, scale, dot, norm, norm2
from dslashsuite.dslash import apply, apply_dense, normal_op, DDAGD, DEFAULT_MASS, HOPPING_SIGN
from dslashsuite.fields import SpinorField, zeros

logger = logging.getLogger(__name__)

CG = 'cg'
RGCG = 'rgcg'
ALGORITHMS = (CG, RGCG)


class SolverBreakdown(ArithmeticError):
    """ p.q <= 0 or non-finite in a CG step: the operator is not positive definite as applied """


@dataclass(frozen=True)
class SolverConfig:
    """
    r_min:      stop once ||eta - D^dagger D psi|| < r_min ||eta||
    inner_k:    low-precision CG steps per outer iteration (residual_guided_cg)
    max_outer:  cap on outer iterations (residual_guided_cg)
    max_iter:   cap on iterations (cg_reference)
    m_q, sign:  operator parameters
    compressed: run the low-precision operator on 10-real compressed links
    """
    r_min: float = 1e-9
    inner_k: int = 16
    max_outer: int = 1000
    max_iter: int = 10000
    m_q: float = DEFAULT_MASS
    sign: int = HOPPING_SIGN
    compressed: bool = False

    high = Precision.HIGH
    low = Precision.LOW

    def __post_init__(self):
        if not self.r_min > 0:
            raise ValueError("r_min must be positive, got {}".format(self.r_min))
        if self.inner_k < 1:
            raise ValueError("inner_k must be at least 1, got {}".format(self.inner_k))
        if self.max_outer < 1 or self.max_iter < 1:
            raise ValueError("max_outer and max_iter must be at least 1")
        if self.sign not in (-1, 1):
            raise ValueError("Hopping sign must be +1 or -1, got {}".format(self.sign))


@dataclass(frozen=True)
class OuterStep:
    l: int
    s_high: float
    inner_iterations: int
    dd_high: int
    dd_low: int
    restart: bool
    relative_residual: float


@dataclass
class SolveReport:
    algorithm: str
    eta_norm: float
    steps: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    dd_high: int = 0
    dd_low: int = 0
    true_residual: float = float('nan')
    converged: bool = False

    @property
    def outer_iterations(self):
        """ Completed corrections (rows after the initial residual) """
        return max(len(self.steps) - 1, 0)

    @property
    def s_high(self):
        return [s.s_high for s in self.steps]

    @property
    def restarts(self):
        return sum(1 for s in self.steps if s.restart)

    def rows(self):
        """ One OrderedDict per logged step, in CSV column order """
        return [OrderedDict(asdict(s)) for s in self.steps]

    def summary(self):
        return OrderedDict([('algorithm', self.algorithm), ('converged', self.converged),
                            ('outer_iterations', self.outer_iterations), ('dd_high', self.dd_high),
                            ('dd_low', self.dd_low), ('restarts', self.restarts),
                            ('true_residual', self.true_residual)])


def _check_rhs(gauge, eta):
    if eta.precision is not Precision.HIGH:
        raise PrecisionMismatch("Right-hand side must be high precision, got {}".format(eta.precision.value))
    eta_norm = norm(eta)
    if eta_norm == 0:
        raise ValueError("Right-hand side is zero; the solution is trivially zero")
    return gauge.convert(Precision.HIGH), eta_norm


def _start(psi0, eta):
    if psi0 is None:
        return zeros(eta.geometry, Precision.HIGH)
    return psi0.convert(Precision.HIGH)


def true_residual(gauge, psi, eta, m_q=DEFAULT_MASS, sign=HOPPING_SIGN):
    """ ||eta - D^dagger D psi|| / ||eta|| recomputed from scratch in high precision """
    gauge = gauge.convert(Precision.HIGH)
    psi = psi.convert(Precision.HIGH)
    eta = eta.convert(Precision.HIGH)
    r = axpy(-1.0, apply(DDAGD, gauge, psi, m_q, sign), eta)
    return norm(r) / norm(eta)


######## Plain CG ##########
def cg_reference(gauge, eta, cfg=SolverConfig(), psi0=None):
    """
    Conjugate gradient on D^dagger D psi = eta in high precision.
    Inputs:
        gauge: gauge field (converted to high precision)
        eta: SpinorField, high precision, nonzero
        cfg: SolverConfig (r_min, max_iter, m_q, sign)
        psi0 (optional): starting guess
    Outputs:
        psi: SpinorField, high precision
        report: SolveReport, one step per iteration; converged is False if max_iter ran out
    Raises SolverBreakdown if p.q <= 0.
    """
    gauge, eta_norm = _check_rhs(gauge, eta)
    op = normal_op(gauge, cfg.m_q, cfg.sign)
    report = SolveReport(CG, eta_norm)
    target = cfg.r_min * eta_norm

    psi = _start(psi0, eta)
    if psi0 is None:
        r = eta
    else:
        r = axpy(-1.0, op(psi), eta)
        report.dd_high += 1
    p = r
    rr = norm2(r)
    for it in range(cfg.max_iter + 1):
        s = math.sqrt(rr)
        report.steps.append(OuterStep(it, s, 0, report.dd_high, 0, False, s / eta_norm))
        if s <= target:
            report.converged = True
            break
        if it == cfg.max_iter:
            break
        q = op(p)
        report.dd_high += 1
        pq = dot(p, q).real
        if not (pq > 0 and math.isfinite(pq)):
            raise SolverBreakdown("CG breakdown at iteration {}: p.q = {}".format(it, pq))
        alpha = rr / pq
        psi = axpy(alpha, p, psi)
        r = axpy(-alpha, q, r)
        rr_next = norm2(r)
        p = axpy(rr_next / rr, p, r)
        rr = rr_next

    report.true_residual = true_residual(gauge, psi, eta, cfg.m_q, cfg.sign)
    if report.converged:
        logger.info("cg converged in %d iterations, true residual %.3e", len(report.steps) - 1, report.true_residual)
    else:
        logger.warning("cg did not converge in %d iterations (residual %.3e)", cfg.max_iter, report.steps[-1].relative_residual)
    return psi, report


######## Residual-guided mixed precision CG ##########
def _low_gauge(gauge, cfg):
    if cfg.compressed and not gauge.compressed:
        gauge = gauge.convert(Precision.HIGH).compress()
    elif not cfg.compressed and gauge.compressed:
        gauge = gauge.decompress()
    return gauge.convert(Precision.LOW)


def _inner_cg(op, r, p, k, rho):
    """
    Up to k low-precision CG steps starting from residual r and direction p.
    Stops early once the recursive residual drops below the low-precision floor
    (rho <= eps_low^2 rho_0); past it the recursion only tracks rounding noise.
    Returns (psi_k, p_k, rho_k, rho log, steps taken, breakdown flag); psi_k already holds the
    final alpha p update.
    """
    psi = zeros(r.geometry, r.precision)
    floor = float(np.finfo(r.precision.real_dtype).eps) ** 2 * rho
    log = [rho]
    n = 0
    while n < k:
        q = op(p)
        n += 1
        pq = dot(p, q).real
        if not (pq > 0 and math.isfinite(pq)):
            logger.warning("Low-precision breakdown after %d inner steps (p.q = %s)", n - 1, pq)
            return psi, p, rho, log, n, True
        alpha = rho / pq
        psi = axpy(alpha, p, psi)
        r = axpy(-alpha, q, r)
        rho_next = norm2(r)
        log.append(rho_next)
        if rho_next == 0:
            return psi, p, rho, log, n, False
        p = axpy(rho_next / rho, p, r)
        rho = rho_next
        if rho <= floor:
            break
    return psi, p, rho, log, n, False


def residual_guided_cg(gauge, eta, cfg=SolverConfig(), psi0=None):
    """
    Residual-guided CG: the outer loop keeps the exact high-precision residual r_l and its norm
    s_l; each outer pass solves D^dagger D x = r_l / s_l approximately with cfg.inner_k
    low-precision CG steps and corrects psi += s_l x.

    The search direction is recycled between passes:
        p_0 = r_0 + beta_0 (p_k - (r_0.p_k) r_0),   beta_0 = s_{l+1} / (s_l rho_k)
    The first pass starts from p_0 = r_0, and so does any pass after a low-precision breakdown,
    after a pass that did not lower s, or when beta_0 is not finite or exceeds 1/eps_low.

    Inputs:
        gauge: gauge field (high precision; the low-precision copy, compressed when
               cfg.compressed, is derived from it)
        eta: SpinorField, high precision, nonzero
        cfg: SolverConfig
        psi0 (optional): starting guess
    Outputs:
        psi: SpinorField, high precision
        report: SolveReport; dd_high = outer_iterations + 1
    """
    high, eta_norm = _check_rhs(gauge, eta)
    low = _low_gauge(gauge, cfg)
    op_high = normal_op(high, cfg.m_q, cfg.sign)
    op_low = normal_op(low, cfg.m_q, cfg.sign)
    report = SolveReport(RGCG, eta_norm)
    target = cfg.r_min * eta_norm
    # beyond this the recycled direction only carries low-precision rounding
    beta_max = 1.0 / float(np.finfo(cfg.low.real_dtype).eps)

    psi = _start(psi0, eta)
    r_high = axpy(-1.0, op_high(psi), eta)
    report.dd_high += 1
    s = norm(r_high)
    report.steps.append(OuterStep(0, s, 0, report.dd_high, 0, False, s / eta_norm))

    p_prev = rho_prev = s_prev = None
    l = 0
    while s >= target and l < cfg.max_outer:
        r0 = scale(1.0 / s, r_high).convert(Precision.LOW)
        rho = norm2(r0)
        beta0 = None if p_prev is None else s / (s_prev * rho_prev)
        restart = beta0 is None or not (math.isfinite(beta0) and beta0 <= beta_max)
        if restart:
            p = r0
        else:
            p = axpy(beta0, axpy(-dot(r0, p_prev), r0, p_prev), r0)

        x, p_k, rho_k, log, steps, broke = _inner_cg(op_low, r0, p, cfg.inner_k, rho)
        report.dd_low += steps
        report.rho.append(log)

        psi = axpy(s, x.convert(Precision.HIGH), psi)
        r_high = axpy(-1.0, op_high(psi), eta)
        report.dd_high += 1
        s_prev, s = s, norm(r_high)
        if broke or s >= s_prev:
            if not broke:
                logger.info("outer %d left s_high at %.6e; next pass restarts from p = r", l + 1, s)
            p_prev, rho_prev = None, None
        else:
            p_prev, rho_prev = p_k, rho_k
        l += 1
        report.steps.append(OuterStep(l, s, steps, report.dd_high, report.dd_low, restart and l > 1, s / eta_norm))
        logger.debug("outer %d: s_high %.6e after %d inner steps", l, s, steps)

    report.converged = s < target
    report.true_residual = true_residual(high, psi, eta, cfg.m_q, cfg.sign)
    if report.converged:
        logger.info("rgcg converged in %d outer iterations (%d low, %d high applications), true residual %.3e",
                    l, report.dd_low, report.dd_high, report.true_residual)
    else:
        logger.warning("rgcg did not converge in %d outer iterations (residual %.3e)", cfg.max_outer, s / eta_norm)
    return psi, report


def solve(algorithm, gauge, eta, cfg=SolverConfig(), psi0=None):
    if algorithm == CG:
        return cg_reference(gauge, eta, cfg, psi0)
    if algorithm == RGCG:
        return residual_guided_cg(gauge, eta, cfg, psi0)
    raise ValueError("Unknown algorithm {!r}; use one of {}".format(algorithm, ALGORITHMS))


######## Dense oracle ##########
def direct_solve(gauge, eta, m_q=DEFAULT_MASS, sign=HOPPING_SIGN):
    """ Solve D^dagger D psi = eta by dense Cholesky factorisation (V <= 4096) """
    gauge = gauge.convert(Precision.HIGH)
    a = apply_dense(gauge, m_q, sign, kind=DDAGD)
    factor = scipy.linalg.cho_factor(a)
    x = scipy.linalg.cho_solve(factor, np.asarray(eta.data, dtype=np.complex128).ravel())
    return SpinorField(eta.geometry, x.reshape(eta.data.shape))
