import numpy as np
import pytest

from deflatron.analysis import kappa_eff
from deflatron.coarse import (
    CoarsePolicy,
    DirectCoarseSolver,
    InnerCgCoarseSolver,
    adaptive_tolerance,
    coarse_solve,
)
from deflatron.dense import sym_eig
from deflatron.errors import CoarseSolveError, ConvergenceBoundViolation, IndefiniteOperatorError
from deflatron.krylov import CgConfig, cg
from deflatron.problems import laplace_bilinear, random_unit_solution_rhs
from deflatron.projection import DeflatedOperator, DeflationBasis
from deflatron.solvers import RESIDUAL_SLACK, cg_error_bound, deflated_cg
from deflatron.subspaces import direct_interpolation, eigen_basis, full_coarsening

from conftest import random_spd


def test_cg_identity_one_step():
    b = np.array([1.0, -2.0, 3.0])
    rep = cg(np.eye(3), b)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(rep.x, b)


def test_cg_two_eigenvalues_terminates():
    rep = cg(np.diag([1.0, 2.0]), np.array([1.0, 2.0]), cfg=CgConfig(tol_rel=1e-12))
    assert rep.iterations <= 2
    np.testing.assert_allclose(rep.x, [1.0, 1.0], atol=1e-12)


def test_cg_indefinite_breakdown():
    with pytest.raises(IndefiniteOperatorError):
        cg(np.diag([1.0, -1.0]), np.array([0.0, 1.0]))


def test_cg_a_norm_error_monotone():
    a = random_spd(80, 6, cond=1e3)
    x_true = np.random.default_rng(0).standard_normal(80)
    b = a @ x_true
    errs = []
    cg(a, b, cfg=CgConfig(tol_rel=1e-10), callback=lambda i, x: errs.append(np.sqrt((x_true - x) @ a @ (x_true - x))))
    assert len(errs) > 3
    assert all(e1 <= e0 + 1e-12 for e0, e1 in zip(errs, errs[1:]))


def test_cg_config_validation():
    with pytest.raises(ValueError):
        CgConfig(tol_rel=0.0)
    with pytest.raises(ValueError):
        CgConfig(max_iter=0)
    assert CgConfig(tol_rel=1e-6, absolute=True).target(50.0) == 1e-6


def test_plain_cg_needs_more_iterations_than_deflated():
    prob = laplace_bilinear(31)
    _, b = random_unit_solution_rhs(prob.matrix, 0)
    assert cg(prob.matrix, b).iterations > 8


def test_direct_coarse_solve_small():
    s = DirectCoarseSolver(np.array([[4.0, 2.0], [2.0, 5.0]]))
    # by hand: 4 z1 + 2 z2 = 2, 2 z1 + 5 z2 = 7
    np.testing.assert_allclose(coarse_solve(s, np.array([2.0, 7.0])), [-0.25, 1.5], atol=1e-12)
    np.testing.assert_array_equal(coarse_solve(s, np.zeros(2)), 0.0)


def test_adaptive_tolerance_extremes():
    eps = 1e-6
    assert adaptive_tolerance(1e6, eps, 1.0) == pytest.approx(eps)
    assert adaptive_tolerance(eps, eps, 1.0) == pytest.approx(1.0)
    assert adaptive_tolerance(1e-3, eps, 0.5) == pytest.approx(0.5e-3)


def test_inner_cg_respects_declared_tolerance():
    e = random_spd(30, 2, cond=1e3)
    rhs = np.random.default_rng(1).standard_normal(30)
    s = InnerCgCoarseSolver(e, CoarsePolicy("fixed", tol=1e-8))
    z = s.solve(rhs)
    assert np.linalg.norm(e @ z - rhs) <= 1e-8 * np.linalg.norm(rhs)
    assert s.inner_iterations > 0 and s.tolerances == [1e-8]
    a = InnerCgCoarseSolver(e, CoarsePolicy("adaptive", c=1.0))
    a.solve(rhs, outer_residual_norm=1e-3, epsilon=1e-6)
    assert a.tolerances == [pytest.approx(1e-3)]


def test_inner_cg_exhaustion_raises():
    e = random_spd(40, 3, cond=1e4)
    s = InnerCgCoarseSolver(e, CoarsePolicy("fixed", tol=1e-12, max_iter=2))
    with pytest.raises(CoarseSolveError):
        s.solve(np.ones(40))


def test_policy_parse():
    assert CoarsePolicy.parse("direct").kind == "direct"
    assert CoarsePolicy.parse("fixed:1e-8").tol == 1e-8
    assert CoarsePolicy.parse("adaptive:0.5").c == 0.5
    assert str(CoarsePolicy.parse("adaptive:0.5")) == "adaptive:0.5"
    for bad in ("exact", "fixed", "adaptive:2", "fixed:1.5"):
        with pytest.raises(ValueError):
            CoarsePolicy.parse(bad)


def test_deflating_all_but_one_eigenvector():
    a = random_spd(20, 4)
    eig = sym_eig(a)
    basis = DeflationBasis(eig.vectors[:, 1:])
    rep = deflated_cg(a, basis, "direct", np.ones(20), cfg=CgConfig(tol_rel=1e-10))
    assert rep.iterations <= 1 and rep.converged


def test_single_small_eigenvalue_deflated_in_one_step():
    ev = np.ones(100)
    ev[0] = 0.01
    a = np.diag(ev)
    basis = DeflationBasis(np.eye(100)[:, :1])
    b = np.random.default_rng(2).standard_normal(100)
    rep = deflated_cg(a, basis, "direct", b, cfg=CgConfig(tol_rel=1e-10))
    assert rep.iterations == 1
    np.testing.assert_allclose(rep.x, b / ev, rtol=1e-9)


def test_deflated_cg_contract_and_orthogonality():
    prob = laplace_bilinear(15)
    basis = direct_interpolation(prob.matrix, full_coarsening(15))
    x_true, b = random_unit_solution_rhs(prob.matrix, 1)
    op = DeflatedOperator(prob.matrix, basis, "direct")
    cfg = CgConfig(tol_rel=1e-8)
    v = basis.dense()
    seen = []
    rep = deflated_cg(prob.matrix, op, None, b, cfg=cfg)
    assert rep.converged and rep.inner_iterations_total == 0
    assert rep.final_residual == rep.residual_history[-1]
    assert rep.true_residual <= cfg.tol_rel * np.linalg.norm(b) * RESIDUAL_SLACK
    # replay with the residual recorded: V^T r_i stays ~ 0
    a = prob.matrix.toarray()
    x = np.zeros_like(b)
    for k in range(1, rep.iterations + 1):
        r = deflated_cg(prob.matrix, op, None, b, cfg=CgConfig(tol_rel=1e-8, max_iter=k))
        seen.append(np.abs(v.T @ (b - a @ r.x)).max())
    assert max(seen) <= 1e-8 * np.linalg.norm(b)


def test_error_bound_assertion():
    prob = laplace_bilinear(15)
    basis = direct_interpolation(prob.matrix, full_coarsening(15))
    x_true, b = random_unit_solution_rhs(prob.matrix, 2)
    k = kappa_eff(prob.matrix, basis)
    rep = deflated_cg(prob.matrix, basis, "direct", b, cfg=CgConfig(tol_rel=1e-10), bound_check=(x_true, k))
    errs = rep.a_norm_errors
    assert all(errs[i] <= cg_error_bound(k, i) * errs[0] * (1 + 1e-8) for i in range(len(errs)))
    # a deliberately optimistic kappa must trip the check
    with pytest.raises(ConvergenceBoundViolation):
        deflated_cg(prob.matrix, basis, "direct", b, cfg=CgConfig(tol_rel=1e-10), bound_check=(x_true, 1.0001))


def test_direct_and_tight_inner_policy_agree():
    for N in (15, 31):
        prob = laplace_bilinear(N)
        basis = direct_interpolation(prob.matrix, full_coarsening(N))
        _, b = random_unit_solution_rhs(prob.matrix, 0)
        d = deflated_cg(prob.matrix, basis, "direct", b)
        f = deflated_cg(prob.matrix, basis, "fixed:1e-14", b)
        assert abs(d.iterations - f.iterations) <= 1
        assert f.inner_iterations_total > 0


def test_max_iter_reports_not_converged():
    prob = laplace_bilinear(15)
    basis = direct_interpolation(prob.matrix, full_coarsening(15))
    _, b = random_unit_solution_rhs(prob.matrix, 0)
    rep = deflated_cg(prob.matrix, basis, "direct", b, cfg=CgConfig(max_iter=2))
    assert rep.iterations == 2 and not rep.converged


def test_exact_eigen_deflation_converges_fast():
    a = random_spd(40, 9, cond=1e4)
    eig = sym_eig(a)
    # five eigenvalues survive the deflation
    basis = eigen_basis(eig, 5)
    rep = deflated_cg(a, basis, "direct", np.ones(40), cfg=CgConfig(tol_rel=1e-10))
    assert rep.converged and rep.iterations <= 6


def test_table1_counts_with_direct_coarse_solve():
    cfg = CgConfig(tol_rel=1e-6, absolute=True)
    for p, expected in ((4, 8), (5, 8), (6, 9), (7, 9)):
        N = 2**p - 1
        prob = laplace_bilinear(N)
        basis = direct_interpolation(prob.matrix, full_coarsening(N))
        _, b = random_unit_solution_rhs(prob.matrix, 0)
        rep = deflated_cg(prob.matrix, basis, "direct", b, cfg=cfg)
        assert rep.converged and abs(rep.iterations - expected) <= 1


def test_relaxed_inner_tolerance_with_small_constant():
    # c = 0.1 keeps the inner error below the outer tolerance and needs fewer
    # inner steps than the loosest fixed tolerance that still converges
    cfg = CgConfig(tol_rel=1e-6, absolute=True)
    for N in (15, 31):
        prob = laplace_bilinear(N)
        basis = direct_interpolation(prob.matrix, full_coarsening(N))
        _, b = random_unit_solution_rhs(prob.matrix, 0)
        relaxed = deflated_cg(prob.matrix, basis, "adaptive:0.1", b, cfg=cfg)
        fixed = deflated_cg(prob.matrix, basis, "fixed:1e-7", b, cfg=cfg)
        assert relaxed.converged and fixed.converged
        assert relaxed.inner_iterations_total <= fixed.inner_iterations_total
        tols = relaxed.inner_tolerances
        assert tols[-1] > tols[1]  # the tolerance relaxes as the residual drops


def test_loose_inner_solve_is_reported_not_converged():
    prob = laplace_bilinear(31)
    basis = direct_interpolation(prob.matrix, full_coarsening(31))
    _, b = random_unit_solution_rhs(prob.matrix, 0)
    rep = deflated_cg(prob.matrix, basis, "fixed:0.5", b, cfg=CgConfig(tol_rel=1e-6, absolute=True, max_iter=100))
    assert not rep.converged
