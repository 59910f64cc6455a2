import numpy as np
import pytest

from conftest import rel_err
from dslashsuite import solver
from dslashsuite.algebra import PrecisionMismatch, scale
from dslashsuite.dslash import DDAGD, apply
from dslashsuite.fields import random_spinor, zeros
from dslashsuite.solver import (SolverConfig, SolverBreakdown, cg_reference, residual_guided_cg, solve,
                                true_residual, direct_solve, CG, RGCG)

R_MIN = 1e-9


@pytest.fixture(scope='module')
def manufactured(hot4):
    """ eta = D^dagger D x0 at m_q = 1 (condition number of D^dagger D at most 81) """
    x0 = random_spinor(hot4.geometry, 21)
    return x0, apply(DDAGD, hot4, x0, m_q=1.0)


@pytest.fixture(scope='module')
def heavy(hot4):
    """ m_q = 8: condition number of D^dagger D at most 4 """
    x0 = random_spinor(hot4.geometry, 22)
    return x0, apply(DDAGD, hot4, x0, m_q=8.0)


@pytest.fixture(scope='module')
def heavy_cg(hot4, heavy):
    return cg_reference(hot4, heavy[1], SolverConfig(r_min=R_MIN, m_q=8.0))


@pytest.mark.parametrize('algorithm', [CG, RGCG])
def test_manufactured_solution(hot4, manufactured, algorithm):
    x0, eta = manufactured
    cfg = SolverConfig(r_min=R_MIN, m_q=1.0)
    psi, report = solve(algorithm, hot4, eta, cfg)
    assert report.converged
    assert rel_err(psi.data, x0.data) <= 1e-7
    assert true_residual(hot4, psi, eta, m_q=1.0) <= R_MIN
    assert report.true_residual == true_residual(hot4, psi, eta, m_q=1.0)
    assert report.algorithm == algorithm


@pytest.mark.parametrize('k', [4, 16, 64])
def test_mixed_precision_matches_cg(hot4, heavy, heavy_cg, k):
    psi_cg, cg_report = heavy_cg
    assert cg_report.converged
    psi, report = residual_guided_cg(hot4, heavy[1], SolverConfig(r_min=R_MIN, inner_k=k, m_q=8.0))
    assert report.converged
    assert rel_err(psi.data, psi_cg.data) <= 10 * R_MIN
    assert report.dd_high == report.outer_iterations + 1
    assert report.steps[-1].dd_high == report.dd_high


@pytest.fixture(scope='module', params=[0.1, 1.0])
def light(request, hot4):
    """ eta = D^dagger D x0 on the 4^4 hot gauge, with the reference CG solution """
    m_q = request.param
    x0 = random_spinor(hot4.geometry, 23)
    eta = apply(DDAGD, hot4, x0, m_q=m_q)
    psi, report = cg_reference(hot4, eta, SolverConfig(r_min=R_MIN, m_q=m_q))
    assert report.converged
    return m_q, eta, psi


@pytest.mark.parametrize('k', [4, 16, 64])
def test_mixed_precision_matches_cg_light(hot4, light, k):
    m_q, eta, psi_cg = light
    psi, report = residual_guided_cg(hot4, eta, SolverConfig(r_min=R_MIN, inner_k=k, m_q=m_q))
    assert report.converged
    assert report.true_residual < R_MIN
    assert rel_err(psi.data, psi_cg.data) <= 10 * R_MIN
    assert report.dd_high == report.outer_iterations + 1


def test_inner_loop_stops_at_low_precision_floor(hot4, manufactured):
    _, eta = manufactured
    _, report = residual_guided_cg(hot4, eta, SolverConfig(r_min=R_MIN, inner_k=64, m_q=1.0))
    assert report.converged
    floor = np.finfo(np.float32).eps ** 2
    for log in report.rho:
        assert all(rho > floor * log[0] for rho in log[:-1])
        assert log[-1] > 0


@pytest.mark.parametrize('rho_k', [1.0, 1e-39])
def test_stalled_pass_restarts(monkeypatch, hot2, rho_k):
    # an inner solve that returns no correction leaves s unchanged; the next pass must not recycle p
    def idle(op, r, p, k, rho):
        return zeros(r.geometry, r.precision), p, rho_k, [rho, rho_k], 1, False

    monkeypatch.setattr(solver, '_inner_cg', idle)
    eta = random_spinor(hot2.geometry, 4)
    psi, report = residual_guided_cg(hot2, eta, SolverConfig(max_outer=4))
    assert not report.converged
    assert [step.restart for step in report.steps] == [False, False, True, True, True]
    assert report.restarts == 3


def test_outer_progress(hot4, manufactured):
    _, eta = manufactured
    _, report = residual_guided_cg(hot4, eta, SolverConfig(r_min=R_MIN, inner_k=16, m_q=1.0))
    s = report.s_high
    assert all(b < a for a, b in zip(s, s[1:]))
    # the first step logs ||eta|| for a zero start
    assert s[0] == pytest.approx(report.eta_norm)
    assert report.dd_high <= report.dd_low / 8
    assert report.restarts == 0
    assert [step.l for step in report.steps] == list(range(report.outer_iterations + 1))
    assert len(report.rho) == report.outer_iterations
    assert all(len(log) == step.inner_iterations + 1 for log, step in zip(report.rho, report.steps[1:]))


def test_final_residual_is_the_true_residual(hot4, heavy):
    _, report = residual_guided_cg(hot4, heavy[1], SolverConfig(r_min=R_MIN, m_q=8.0))
    assert report.steps[-1].relative_residual == report.true_residual
    assert report.true_residual < R_MIN


def test_single_inner_step(hot4, heavy):
    x0, eta = heavy
    psi, report = residual_guided_cg(hot4, eta, SolverConfig(r_min=R_MIN, inner_k=1, m_q=8.0))
    assert report.converged
    assert report.dd_low == report.outer_iterations
    assert rel_err(psi.data, x0.data) <= 1e-7


def test_compressed_low_precision_links(hot4, heavy, heavy_cg):
    psi, report = residual_guided_cg(hot4, heavy[1], SolverConfig(r_min=R_MIN, m_q=8.0, compressed=True))
    assert report.converged
    assert rel_err(psi.data, heavy_cg[0].data) <= 10 * R_MIN
    # already-compressed input works too
    psi2, _ = residual_guided_cg(hot4.compress(), heavy[1], SolverConfig(r_min=R_MIN, m_q=8.0))
    assert rel_err(psi2.data, heavy_cg[0].data) <= 10 * R_MIN


def test_cg_step_log(hot4, heavy_cg):
    _, report = heavy_cg
    assert report.dd_high == report.outer_iterations
    assert report.dd_low == 0
    assert report.steps[-1].relative_residual < R_MIN
    rows = report.rows()
    assert list(rows[0]) == ['l', 's_high', 'inner_iterations', 'dd_high', 'dd_low', 'restart', 'relative_residual']
    summary = report.summary()
    assert summary['algorithm'] == CG and summary['converged'] is True


def test_exact_start_needs_no_iterations(hot4, heavy):
    x0, eta = heavy
    _, report = cg_reference(hot4, eta, SolverConfig(r_min=R_MIN, m_q=8.0), psi0=x0)
    assert report.converged and report.outer_iterations == 0 and report.dd_high == 1
    _, report = residual_guided_cg(hot4, eta, SolverConfig(r_min=R_MIN, m_q=8.0), psi0=x0)
    assert report.converged and report.outer_iterations == 0 and report.dd_high == 1


def test_not_converged(hot4, manufactured):
    _, eta = manufactured
    psi, report = cg_reference(hot4, eta, SolverConfig(r_min=R_MIN, max_iter=2, m_q=1.0))
    assert not report.converged
    assert len(report.steps) == 3
    psi, report = residual_guided_cg(hot4, eta, SolverConfig(r_min=R_MIN, max_outer=2, m_q=1.0))
    assert not report.converged
    assert report.outer_iterations == 2
    assert report.true_residual > R_MIN


def test_breakdown(monkeypatch, hot2):
    # an operator that is negative definite breaks both CG variants
    monkeypatch.setattr(solver, 'normal_op', lambda gauge, m_q, sign: (lambda psi: scale(-1.0, psi)))
    eta = random_spinor(hot2.geometry, 1)
    with pytest.raises(SolverBreakdown):
        cg_reference(hot2, eta)
    psi, report = residual_guided_cg(hot2, eta, SolverConfig(max_outer=3))
    assert not report.converged
    assert report.restarts == 2
    assert report.dd_low == 3
    np.testing.assert_array_equal(psi.data, 0)


def test_true_residual(hot2):
    eta = random_spinor(hot2.geometry, 2)
    assert true_residual(hot2, zeros(hot2.geometry), eta) == pytest.approx(1.0)
    assert true_residual(hot2, direct_solve(hot2, eta, m_q=1.0), eta, m_q=1.0) < 1e-12


def test_direct_solve(hot42):
    x0 = random_spinor(hot42.geometry, 3)
    eta = apply(DDAGD, hot42, x0, m_q=0.5)
    assert rel_err(direct_solve(hot42, eta, m_q=0.5).data, x0.data) < 1e-10


def test_rhs_checks(hot2):
    with pytest.raises(PrecisionMismatch):
        cg_reference(hot2, random_spinor(hot2.geometry, 1, 'single'))
    with pytest.raises(ValueError):
        residual_guided_cg(hot2, zeros(hot2.geometry))
    with pytest.raises(ValueError):
        solve('bicgstab', hot2, random_spinor(hot2.geometry, 1))


@pytest.mark.parametrize('kwargs', [dict(r_min=0), dict(inner_k=0), dict(max_outer=0), dict(max_iter=0), dict(sign=2)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)
