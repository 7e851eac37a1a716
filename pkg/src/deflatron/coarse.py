"""Solvers for the inner (coarse) system ``(V^T A V) z = rhs``.

A :class:`CoarsePolicy` is a configuration; :meth:`CoarsePolicy.bind` turns it
into a solver for one fixed coarse matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CoarseSolveError, NotPositiveDefiniteError
from .krylov import CgConfig, cg

DENSE_DIRECT_LIMIT = 4000


@dataclass(frozen=True)
class CoarsePolicy:
    """``kind`` is ``"direct"``, ``"fixed"`` (inner CG, tolerance ``tol``) or
    ``"adaptive"`` (inner CG, tolerance ``max(eps/||r_i||, eps) * c``)."""

    kind: str = "direct"
    tol: float = 1e-14
    c: float = 1.0
    max_iter: int = 100_000

    def __post_init__(self):
        if self.kind not in ("direct", "fixed", "adaptive"):
            raise ValueError(f"unknown coarse policy {self.kind!r}")
        if self.kind == "fixed" and not 0.0 < self.tol < 1.0:
            raise ValueError("fixed inner tolerance must lie in (0, 1)")
        if self.kind == "adaptive" and not 0.0 < self.c <= 1.0:
            raise ValueError("adaptive constant c must satisfy 0 < c <= 1")

    @classmethod
    def parse(cls, text: str) -> "CoarsePolicy":
        """Parse ``direct``, ``fixed:<tc>`` or ``adaptive:<c>``."""
        kind, _, arg = text.partition(":")
        if kind == "direct" and not arg:
            return cls("direct")
        if kind == "fixed" and arg:
            return cls("fixed", tol=float(arg))
        if kind == "adaptive":
            return cls("adaptive", c=float(arg) if arg else 1.0)
        raise ValueError(f"cannot parse inner policy {text!r}")

    def __str__(self):
        if self.kind == "direct":
            return "direct"
        if self.kind == "fixed":
            return f"fixed:{self.tol:g}"
        return f"adaptive:{self.c:g}"

    def bind(self, e) -> "CoarseSolver":
        if self.kind == "direct":
            return DirectCoarseSolver(e)
        return InnerCgCoarseSolver(e, self)


def adaptive_tolerance(outer_residual_norm: float, epsilon: float, c: float = 1.0) -> float:
    """Relaxed inner tolerance ``max(eps/||r_i||, eps) * c``."""
    if outer_residual_norm <= 0.0:
        return c
    return max(epsilon / outer_residual_norm, epsilon) * c


class CoarseSolver:
    """Solves with a fixed coarse matrix and accumulates inner-iteration counts."""

    policy: CoarsePolicy

    def __init__(self, e):
        self.e = e
        self.m = e.shape[0]
        self.inner_iterations = 0
        self.tolerances: list[float] = []

    def solve(self, rhs, outer_residual_norm: float | None = None, epsilon: float | None = None) -> np.ndarray:
        raise NotImplementedError


class DirectCoarseSolver(CoarseSolver):
    """Dense Cholesky up to ``DENSE_DIRECT_LIMIT`` unknowns, sparse LU above."""

    policy = CoarsePolicy("direct")

    def __init__(self, e):
        super().__init__(e)
        if self.m <= DENSE_DIRECT_LIMIT:
            dense = e.toarray() if sp.issparse(e) else np.asarray(e, dtype=np.float64)
            try:
                self._chol = scipy.linalg.cho_factor(0.5 * (dense + dense.T), lower=True)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(f"coarse matrix V^T A V is not SPD: {exc}") from None
            self._lu = None
        else:
            self._chol = None
            self._lu = spla.splu(sp.csc_matrix(e))

    def solve(self, rhs, outer_residual_norm=None, epsilon=None):
        rhs = np.asarray(rhs, dtype=np.float64)
        if not np.any(rhs):
            return np.zeros_like(rhs)
        if self._chol is not None:
            return scipy.linalg.cho_solve(self._chol, rhs)
        return self._lu.solve(rhs)


class InnerCgCoarseSolver(CoarseSolver):
    def __init__(self, e, policy: CoarsePolicy):
        super().__init__(sp.csr_matrix(e) if sp.issparse(e) else np.asarray(e, dtype=np.float64))
        self.policy = policy

    def tolerance(self, outer_residual_norm=None, epsilon=None) -> float:
        if self.policy.kind == "fixed":
            return self.policy.tol
        if outer_residual_norm is None or epsilon is None:
            raise ValueError("adaptive inner policy needs the outer residual norm and epsilon")
        return adaptive_tolerance(outer_residual_norm, epsilon, self.policy.c)

    def solve(self, rhs, outer_residual_norm=None, epsilon=None):
        rhs = np.asarray(rhs, dtype=np.float64)
        if not np.any(rhs):
            return np.zeros_like(rhs)
        tol = self.tolerance(outer_residual_norm, epsilon)
        self.tolerances.append(tol)
        if tol >= 1.0:
            # zero initial guess already meets ||rhs - E z|| <= tol ||rhs||
            return np.zeros_like(rhs)
        report = cg(self.e, rhs, cfg=CgConfig(tol_rel=tol, max_iter=self.policy.max_iter, record_history=False))
        self.inner_iterations += report.iterations
        if not report.converged:
            raise CoarseSolveError(
                f"inner CG did not reach tolerance {tol:.2e} in {self.policy.max_iter} iterations"
            )
        return report.x


def coarse_solve(solver: CoarseSolver, rhs, outer_residual_norm=None, epsilon=None) -> np.ndarray:
    return solver.solve(rhs, outer_residual_norm=outer_residual_norm, epsilon=epsilon)
