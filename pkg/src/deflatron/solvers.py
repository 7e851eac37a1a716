"""Standard and deflated conjugate gradients.

``deflated_cg`` follows the deflated CG of Saad, Yeung, Erhel and
Guyomarc'h: the initial guess is corrected so that ``V^T r_0 = 0`` and each
new search direction is A-orthogonalised against ``S`` by one inner solve
``(V^T A V) mu = (A V)^T r``.
"""

from __future__ import annotations

import numpy as np

from .coarse import (
    CoarsePolicy,
    CoarseSolver,
    DirectCoarseSolver,
    InnerCgCoarseSolver,
    adaptive_tolerance,
    coarse_solve,
)
from .errors import ConvergenceBoundViolation, DimensionMismatch, IndefiniteOperatorError
from .krylov import CgConfig, SolveReport, cg
from .projection import DeflatedOperator, DeflationBasis

__all__ = [
    "CgConfig",
    "CoarsePolicy",
    "CoarseSolver",
    "DirectCoarseSolver",
    "InnerCgCoarseSolver",
    "SolveReport",
    "adaptive_tolerance",
    "cg",
    "coarse_solve",
    "cg_error_bound",
    "deflated_cg",
]

RESIDUAL_SLACK = 10.0
# stop once the residual has grown this much over the initial one; with a
# loose inner solve the iteration can run away instead of stagnating
DIVERGENCE_FACTOR = 1e6


def cg_error_bound(kappa_eff: float, i: int) -> float:
    """``2 ((sqrt(k) - 1) / (sqrt(k) + 1))^i``."""
    s = np.sqrt(kappa_eff)
    return 2.0 * ((s - 1.0) / (s + 1.0)) ** i


def deflated_cg(
    a,
    basis: DeflationBasis | DeflatedOperator,
    coarse: CoarsePolicy | CoarseSolver | str | None,
    b,
    x0=None,
    cfg: CgConfig = CgConfig(),
    bound_check: tuple | None = None,
) -> SolveReport:
    """Solve ``A x = b`` by CG on the deflated system.

    ``basis`` may be a prebuilt :class:`DeflatedOperator` (then ``coarse`` is
    ignored).  The run stops early with ``converged=False`` if the residual
    grows by ``DIVERGENCE_FACTOR``.  ``bound_check=(x_true, kappa_eff)`` asserts the classical CG
    error bound in the A-norm at every iteration.
    """
    if isinstance(basis, DeflatedOperator):
        op = basis
    else:
        op = DeflatedOperator(a, basis, coarse)
    solver = op.coarse
    start_inner = solver.inner_iterations
    start_tols = len(solver.tolerances)
    A = op._op
    v, av = op.basis.v, op.av

    b = np.asarray(b, dtype=np.float64)
    n = op.n
    if b.shape != (n,):
        raise DimensionMismatch(f"rhs of shape {b.shape} does not match n={n}")
    b_norm = float(np.linalg.norm(b))
    eps = cfg.target(b_norm)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    r_norm = float(np.linalg.norm(r))
    x = x + np.asarray(v @ solver.solve(v.T @ r, r_norm, eps))
    r = b - A @ x
    rr = float(r @ r)
    history = [np.sqrt(rr)]

    errors = None
    if bound_check is not None:
        x_true, kappa_eff = bound_check
        x_true = np.asarray(x_true, dtype=np.float64)
        errors = [_a_norm(A, x_true - x)]

    p = r - np.asarray(v @ solver.solve(av.T @ r, np.sqrt(rr), eps))
    it = 0
    converged = np.sqrt(rr) <= eps
    diverged_at = DIVERGENCE_FACTOR * max(np.sqrt(rr), eps)
    while not converged and it < cfg.max_iter:
        ap = A @ p
        pap = float(p @ ap)
        if not pap > 0.0:
            raise IndefiniteOperatorError(f"deflated CG breakdown: <p, Ap> = {pap:.3e} at iteration {it}")
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        it += 1
        r_norm = np.sqrt(rr_new)
        history.append(r_norm)
        if errors is not None:
            errors.append(_a_norm(A, x_true - x))
            limit = cg_error_bound(kappa_eff, it) * errors[0]
            if errors[-1] > limit * (1.0 + 1e-8) + 1e-12 * errors[0]:
                raise ConvergenceBoundViolation(
                    f"iteration {it}: ||e||_A = {errors[-1]:.3e} exceeds bound {limit:.3e}"
                )
        converged = r_norm <= eps
        if converged or not r_norm < diverged_at:
            break
        mu = solver.solve(av.T @ r, r_norm, eps)
        p = (rr_new / rr) * p + r - np.asarray(v @ mu)
        rr = rr_new

    hist = np.array(history if cfg.record_history else history[-1:])
    return SolveReport(
        x=x,
        iterations=it,
        residual_history=hist,
        inner_iterations_total=solver.inner_iterations - start_inner,
        converged=bool(converged),
        final_residual=float(hist[-1]),
        true_residual=float(np.linalg.norm(b - A @ x)),
        inner_tolerances=list(solver.tolerances[start_tols:]),
        a_norm_errors=None if errors is None else np.array(errors),
    )


def _a_norm(A, e) -> float:
    return float(np.sqrt(max(float(e @ (A @ e)), 0.0)))
