"""Plain conjugate gradients and the shared solver record types."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndefiniteOperatorError
from .linalg import as_scipy


@dataclass(frozen=True)
class CgConfig:
    """Stopping rule ``||r_i||_2 <= tol_rel * ||b||_2``.

    With ``absolute=True`` the target is ``||r_i||_2 <= tol_rel`` instead.
    """

    tol_rel: float = 1e-6
    max_iter: int = 10_000
    record_history: bool = True
    absolute: bool = False

    def __post_init__(self):
        if not 0.0 < self.tol_rel < 1.0:
            raise ValueError(f"tol_rel must lie in (0, 1), got {self.tol_rel}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def target(self, b_norm: float) -> float:
        return self.tol_rel if self.absolute else self.tol_rel * b_norm


@dataclass
class SolveReport:
    x: np.ndarray = field(repr=False)
    iterations: int
    residual_history: np.ndarray = field(repr=False)
    inner_iterations_total: int
    converged: bool
    final_residual: float
    true_residual: float = float("nan")
    inner_tolerances: list = field(default_factory=list, repr=False)
    a_norm_errors: np.ndarray | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "true_residual": self.true_residual,
            "inner_iterations_total": self.inner_iterations_total,
            "residual_history": [float(r) for r in self.residual_history],
        }


def cg(a, b, x0=None, cfg: CgConfig = CgConfig(), callback=None) -> SolveReport:
    """Hestenes-Stiefel CG for an SPD operator ``a`` (anything supporting ``@``).

    ``callback(i, x)`` is invoked after every iteration.
    """
    op = as_scipy(a)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if op.shape != (n, n):
        raise DimensionMismatch(f"operator shape {op.shape} does not match rhs length {n}")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    b_norm = np.linalg.norm(b)
    target = cfg.target(b_norm)

    r = b - op @ x
    rr = float(r @ r)
    history = [np.sqrt(rr)]
    p = r.copy()
    it = 0
    converged = np.sqrt(rr) <= target
    while not converged and it < cfg.max_iter:
        ap = op @ p
        pap = float(p @ ap)
        if not pap > 0.0:
            raise IndefiniteOperatorError(f"<p, Ap> = {pap:.3e} at iteration {it}")
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        it += 1
        history.append(np.sqrt(rr_new))
        if callback is not None:
            callback(it, x)
        converged = np.sqrt(rr_new) <= target
        p = r + (rr_new / rr) * p
        rr = rr_new

    hist = np.array(history if cfg.record_history else history[-1:])
    return SolveReport(
        x=x,
        iterations=it,
        residual_history=hist,
        inner_iterations_total=0,
        converged=bool(converged),
        final_residual=float(hist[-1]),
        true_residual=float(np.linalg.norm(b - op @ x)),
    )
