"""Dense symmetric eigendecomposition, SVD, QR and Cholesky.

The default eigensolver is LAPACK (``numpy.linalg.eigh``).  A cyclic Jacobi
solver is provided as an independent route for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefiniteError, RankDeficientError


@dataclass(frozen=True)
class Tolerances:
    sym: float = 1e-12
    eig: float = 1e-10
    orth: float = 1e-10
    fact: float = 1e-12
    rank: float = 1e-10
    jacobi_offdiag: float = 1e-12
    jacobi_max_sweeps: int = 100


TOL = Tolerances()


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by descending eigenvalue (``values[0]`` is the largest)."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def residuals(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        return np.linalg.norm(m @ self.vectors - self.vectors * self.values, axis=0)


@dataclass(frozen=True)
class QrDecomposition:
    q: np.ndarray
    r: np.ndarray


def _require_symmetric(m, tol=TOL.sym) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.abs(m).max(initial=0.0), 1.0)
    if np.abs(m - m.T).max(initial=0.0) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return m


def sym_eig(m, method: str = "lapack") -> EigenDecomposition:
    m = _require_symmetric(m)
    if method == "lapack":
        w, v = np.linalg.eigh(0.5 * (m + m.T))
    elif method == "jacobi":
        w, v = jacobi_eig(m)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(w, kind="stable")[::-1]
    return EigenDecomposition(values=w[order], vectors=np.ascontiguousarray(v[:, order]))


def jacobi_eig(m, tol: float = TOL.jacobi_offdiag, max_sweeps: int = TOL.jacobi_max_sweeps):
    """Cyclic Jacobi rotations.  Returns unsorted ``(values, vectors)``."""
    a = np.array(_require_symmetric(m), dtype=np.float64)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    fro = np.linalg.norm(a)
    if n < 2 or fro == 0.0:
        return np.diag(a).copy(), v

    def off(a):
        return np.linalg.norm(a - np.diag(np.diag(a)))

    for _ in range(max_sweeps):
        if off(a) < tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) * 1e-150 >= abs(apq):
                    t = apq / diff  # theta**2 would overflow; t ~ 1/(2 theta)
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if off(a) >= tol * fro:
            raise ArithmeticError("Jacobi iteration did not converge")
    return np.diag(a).copy(), v


def svd_values(m) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if m.size == 0:
        return np.zeros(0)
    return np.linalg.svd(m, compute_uv=False)


def spectral_norm(m) -> float:
    s = svd_values(m)
    return float(s[0]) if len(s) else 0.0


def qr(m, tol_rank: float = TOL.rank) -> QrDecomposition:
    """Householder QR (reduced) with ``diag(r) > 0``."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if m.ndim != 2:
        raise DimensionMismatch("qr expects a 2-D array")
    if m.shape[1] > m.shape[0]:
        raise RankDeficientError(f"{m.shape[1]} columns cannot be independent in dimension {m.shape[0]}")
    q, r = np.linalg.qr(m, mode="reduced")
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    r = r * signs[:, None]
    scale = spectral_norm(m)
    if scale == 0.0 or np.any(np.diag(r) <= tol_rank * scale):
        raise RankDeficientError("matrix does not have full column rank")
    return QrDecomposition(q=q, r=r)


def cholesky(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``."""
    m = _require_symmetric(m, tol=1e-10)
    try:
        return scipy.linalg.cholesky(0.5 * (m + m.T), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"not positive definite: {exc}") from None


def orthonormal_complement(v) -> np.ndarray:
    """Orthonormal basis of ``range(v)^perp`` (columns), via a full QR."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    n, m = v.shape
    q, _ = np.linalg.qr(v, mode="complete")
    return np.ascontiguousarray(q[:, m:])
