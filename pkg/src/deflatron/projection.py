"""A-orthogonal projection onto a deflation subspace and the deflated operator.

With ``V`` a basis of ``S`` and ``E = V^T A V``:

* ``pi_A(S) x = V E^{-1} V^T A x``
* deflated operator ``A (I - pi_A(S)) x = A x - (A V) E^{-1} (A V)^T x``
* deflated rhs ``(I - pi_A(S))^T b = b - (A V) E^{-1} V^T b``

Nothing of size ``n x n`` is ever formed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coarse import CoarsePolicy, CoarseSolver
from .dense import TOL, qr, spectral_norm
from .errors import DimensionMismatch, RankDeficientError
from .linalg import as_scipy

DENSE_RANK_CHECK_LIMIT = 4_000_000  # n*m entries


class Provenance(str, enum.Enum):
    AGGREGATION = "aggregation"
    EXACT_EIGEN = "exact_eigen"
    PERTURBED_EIGEN = "perturbed_eigen"
    AGGREGATE_RESTRICTED_EIGEN = "aggregate_restricted_eigen"
    DIRECT_INTERPOLATION = "direct_interpolation"
    USER_SUPPLIED = "user_supplied"


@dataclass(frozen=True, eq=False)
class DeflationBasis:
    """Full-rank ``n x m`` basis (dense array or scipy sparse) with ``m < n``."""

    v: object
    provenance: Provenance = Provenance.USER_SUPPLIED

    def __post_init__(self):
        v = self.v
        if sp.issparse(v):
            v = sp.csc_matrix(v, dtype=np.float64)
        else:
            v = np.atleast_2d(np.asarray(v, dtype=np.float64))
            if v.ndim != 2:
                raise DimensionMismatch("basis must be two-dimensional")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        n, m = v.shape
        if m < 1:
            raise RankDeficientError("deflation basis needs at least one column")
        if m >= n:
            raise RankDeficientError(f"deflation basis must have m < n, got m={m}, n={n}")
        _check_rank(v)

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def m(self) -> int:
        return self.v.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.v)

    def dense(self) -> np.ndarray:
        return self.v.toarray() if self.is_sparse else self.v


def _check_rank(v) -> None:
    n, m = v.shape
    if not sp.issparse(v) and n * m <= DENSE_RANK_CHECK_LIMIT:
        qr(v, tol_rank=TOL.rank)
        return
    # large bases: pivots of the Gram matrix factorisation
    gram = sp.csc_matrix(v.T @ v) if sp.issparse(v) else sp.csc_matrix(v.T @ v)
    diag = gram.diagonal()
    if np.any(diag <= 0.0):
        raise RankDeficientError("basis has a zero column")
    try:
        lu = spla.splu(gram, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)
    except RuntimeError as exc:
        raise RankDeficientError(f"basis Gram matrix is singular: {exc}") from None
    pivots = np.abs(lu.U.diagonal())
    if pivots.min() <= (TOL.rank ** 2) * diag.max():
        raise RankDeficientError("basis does not have full column rank")


class DeflatedOperator:
    """Implicit ``A (I - pi_A(S))`` with ``A V`` cached."""

    def __init__(self, a, basis: DeflationBasis, coarse: CoarsePolicy | CoarseSolver | str | None = None):
        self.a = a
        self.basis = basis
        op = as_scipy(a)
        if op.shape != (basis.n, basis.n):
            raise DimensionMismatch(f"operator shape {op.shape} vs basis with n={basis.n}")
        self._op = op
        v = basis.v
        av = op @ v
        self.av = sp.csc_matrix(av) if sp.issparse(av) else np.asarray(av)
        e = v.T @ self.av
        if sp.issparse(e):
            e = sp.csr_matrix(e)
            e = 0.5 * (e + e.T)
        else:
            e = 0.5 * (e + e.T)
        self.e = e
        if coarse is None:
            coarse = CoarsePolicy("direct")
        elif isinstance(coarse, str):
            coarse = CoarsePolicy.parse(coarse)
        self.coarse = coarse.bind(e) if isinstance(coarse, CoarsePolicy) else coarse

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def shape(self):
        return (self.n, self.n)

    def _coarse(self, rhs, residual_norm=None, epsilon=None):
        return self.coarse.solve(rhs, outer_residual_norm=residual_norm, epsilon=epsilon)

    def project(self, x, residual_norm=None, epsilon=None) -> np.ndarray:
        """``pi_A(S) x``."""
        x = _vec(x, self.n)
        z = self._coarse(self.av.T @ x, residual_norm, epsilon)
        return np.asarray(self.basis.v @ z)

    def complement(self, x, residual_norm=None, epsilon=None) -> np.ndarray:
        """``(I - pi_A(S)) x``."""
        return _vec(x, self.n) - self.project(x, residual_norm, epsilon)

    def apply(self, x, residual_norm=None, epsilon=None) -> np.ndarray:
        x = _vec(x, self.n)
        ax = self._op @ x
        z = self._coarse(self.av.T @ x, residual_norm, epsilon)
        return ax - np.asarray(self.av @ z)

    def rhs(self, b, residual_norm=None, epsilon=None) -> np.ndarray:
        b = _vec(b, self.n)
        z = self._coarse(self.basis.v.T @ b, residual_norm, epsilon)
        return b - np.asarray(self.av @ z)

    def coarse_part(self, b, residual_norm=None, epsilon=None) -> np.ndarray:
        """``V E^{-1} V^T b`` (equals ``pi_A(S) x`` for the true solution)."""
        b = _vec(b, self.n)
        return np.asarray(self.basis.v @ self._coarse(self.basis.v.T @ b, residual_norm, epsilon))

    def reconstruct(self, b, x_hat) -> np.ndarray:
        return self.complement(x_hat) + self.coarse_part(b)

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, dtype=np.float64)

    def norm_estimate(self) -> float:
        if sp.issparse(self._op):
            return float(spla.norm(self._op, 1))
        return spectral_norm(self._op)


def _vec(x, n) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise DimensionMismatch(f"vector of shape {x.shape} does not match n={n}")
    return x


def project_a(op: DeflatedOperator, x) -> np.ndarray:
    return op.project(x)


def deflated_apply(op: DeflatedOperator, x) -> np.ndarray:
    return op.apply(x)


def deflated_rhs(op: DeflatedOperator, b) -> np.ndarray:
    return op.rhs(b)


def reconstruct(op: DeflatedOperator, b, x_hat) -> np.ndarray:
    """``x = (I - pi_A(S)) x_hat + V (V^T A V)^{-1} V^T b``."""
    return op.reconstruct(b, x_hat)
