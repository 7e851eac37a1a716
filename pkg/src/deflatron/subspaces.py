"""Constructors for deflation subspaces.

Families: aggregate indicator vectors, exact and perturbed eigenvectors,
eigenvectors restricted to aggregates, and AMG direct interpolation on a C/F
splitting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .dense import TOL, EigenDecomposition, spectral_norm
from .errors import PreconditionError, SizeLimitError
from .linalg import as_dense, as_scipy, dense_limit
from .projection import DeflationBasis, Provenance


@dataclass(frozen=True, eq=False)
class AggregateSet:
    """Partition of ``{0, ..., n-1}``; ``assignments[j]`` is the aggregate of ``j``."""

    assignments: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignments)
        if a.ndim != 1 or a.size == 0 or not np.issubdtype(a.dtype, np.integer):
            raise ValueError("assignments must be a non-empty 1-D integer array")
        if a.min() < 0:
            raise ValueError("aggregate indices must be non-negative")
        counts = np.bincount(a)
        if np.any(counts == 0):
            raise PreconditionError(f"aggregates {np.nonzero(counts == 0)[0].tolist()} are empty")
        object.__setattr__(self, "assignments", a.astype(np.int64))

    @property
    def n(self) -> int:
        return len(self.assignments)

    @property
    def count(self) -> int:
        return int(self.assignments.max()) + 1

    def to_json(self) -> str:
        return json.dumps({"assignments": self.assignments.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "AggregateSet":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["assignments"]
        return cls(np.asarray(data, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class CfSplitting:
    """Coarse/fine split; ``coarse[j]`` is True for C points."""

    coarse: np.ndarray
    grid_shape: tuple | None = None

    def __post_init__(self):
        c = np.asarray(self.coarse, dtype=bool)
        if c.ndim != 1:
            raise ValueError("coarse flags must be 1-D")
        if not c.any():
            raise PreconditionError("splitting needs at least one C point")
        object.__setattr__(self, "coarse", c)
        if self.grid_shape is not None:
            object.__setattr__(self, "grid_shape", tuple(int(s) for s in self.grid_shape))

    @property
    def n(self) -> int:
        return len(self.coarse)

    @property
    def coarse_points(self) -> np.ndarray:
        return np.nonzero(self.coarse)[0]

    @property
    def m(self) -> int:
        return int(self.coarse.sum())

    @property
    def flags(self) -> str:
        return "".join("C" if c else "F" for c in self.coarse)

    def to_json(self) -> str:
        return json.dumps({"flags": self.flags, "grid_shape": self.grid_shape})

    @classmethod
    def from_json(cls, text: str) -> "CfSplitting":
        data = json.loads(text)
        flags = data["flags"]
        coarse = [f == "C" for f in flags] if isinstance(flags, str) else [bool(f) for f in flags]
        return cls(np.array(coarse), data.get("grid_shape"))


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """``E_1 = magnitude * direction`` with ``||direction||_F = 1``."""

    direction: np.ndarray
    magnitude: float

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.direction, dtype=np.float64))
        if d.shape[0] == 1 and np.asarray(self.direction).ndim == 1:
            d = d.T
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("perturbation direction must have unit Frobenius norm")
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        object.__setattr__(self, "direction", d)

    @property
    def e1(self) -> np.ndarray:
        return self.magnitude * self.direction


def aggregation_basis(agg: AggregateSet) -> DeflationBasis:
    n, m = agg.n, agg.count
    v = sp.csc_matrix((np.ones(n), (np.arange(n), agg.assignments)), shape=(n, m))
    return DeflationBasis(v, Provenance.AGGREGATION)


def eigen_basis(eig: EigenDecomposition, k: int) -> DeflationBasis:
    """Eigenvectors ``q_{k+1}, ..., q_n`` of the ``n - k`` smallest eigenvalues."""
    if not 1 <= k < eig.n:
        raise PreconditionError(f"k must satisfy 1 <= k < n={eig.n}, got {k}")
    return DeflationBasis(eig.vectors[:, k:].copy(), Provenance.EXACT_EIGEN)


def perturbed_eigen_basis(eig: EigenDecomposition, k: int, spec: PerturbationSpec) -> DeflationBasis:
    """Basis ``Q_1 + E_1`` of the perturbed deflation space."""
    if not 1 <= k < eig.n:
        raise PreconditionError(f"k must satisfy 1 <= k < n={eig.n}, got {k}")
    q1 = eig.vectors[:, k:]
    e1 = spec.e1
    if e1.shape != q1.shape:
        raise ValueError(f"perturbation shape {e1.shape} does not match Q_1 shape {q1.shape}")
    if spectral_norm(e1) >= 1.0:
        raise PreconditionError("perturbation must satisfy ||E_1||_2 < 1")
    return DeflationBasis(q1 + e1, Provenance.PERTURBED_EIGEN)


@dataclass(frozen=True)
class Completion:
    """Orthonormal bases ``Q_1 + W_1`` of the perturbed space and ``Q_2 + W_2`` of its complement."""

    q1_tilde: np.ndarray
    q2_tilde: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    delta: float
    delta_bound: float


def qr_perturbation_bound(e1) -> float:
    """``(1 + sqrt 2) / (1 - ||E_1||_2) * ||E_1||_F``; infinite when ``||E_1||_2 >= 1``."""
    e2 = spectral_norm(e1)
    if e2 >= 1.0:
        return float("inf")
    return (1.0 + np.sqrt(2.0)) / (1.0 - e2) * float(np.linalg.norm(e1))


def orthonormal_completion(q1, q2, e1, check: bool = True) -> Completion:
    """QR of ``[Q_1 + E_1 | Q_2]`` (positive diagonal) and the induced basis perturbations.

    ``check=False`` skips the ``||E_1||_2 < 1`` requirement; the bound is then
    reported as infinite.
    """
    q1 = np.atleast_2d(np.asarray(q1, dtype=np.float64))
    q2 = np.atleast_2d(np.asarray(q2, dtype=np.float64))
    e1 = np.asarray(e1, dtype=np.float64).reshape(q1.shape)
    q = np.hstack([q1, q2])
    n = q.shape[0]
    if q.shape != (n, n) or np.abs(q.T @ q - np.eye(n)).max() > 1e-10:
        raise PreconditionError("[Q_1 | Q_2] must be square and orthogonal")
    if check and spectral_norm(e1) >= 1.0:
        raise PreconditionError("perturbation too large: ||E_1||_2 must be < 1")
    qt, r = np.linalg.qr(np.hstack([q1 + e1, q2]))
    qt = qt * np.where(np.diag(r) < 0.0, -1.0, 1.0)
    w = qt - q
    k1 = q1.shape[1]
    w1, w2 = w[:, :k1], w[:, k1:]
    delta = max(spectral_norm(w1), spectral_norm(w2))
    return Completion(qt[:, :k1], qt[:, k1:], w1, w2, delta, qr_perturbation_bound(e1))


def aggregate_restricted_eigen_basis(agg: AggregateSet, w) -> DeflationBasis:
    """Restrictions of the columns of ``w`` to each aggregate (zero elsewhere).

    Columns are ordered aggregate-major.  Vanishing restrictions are dropped;
    if the rest is rank deficient it is replaced by an orthonormal basis of
    its span.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape[0] != agg.n:
        raise ValueError(f"w has {w.shape[0]} rows, aggregates cover {agg.n} variables")
    cols = []
    for i in range(agg.count):
        mask = agg.assignments == i
        for j in range(w.shape[1]):
            c = np.where(mask, w[:, j], 0.0)
            if np.any(c != 0.0):
                cols.append(c)
    if not cols:
        raise PreconditionError("all restricted vectors vanish")
    v = np.column_stack(cols)
    q, r, _ = scipy.linalg.qr(v, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > TOL.rank * diag[0]))
    if rank < v.shape[1]:
        v = q[:, :rank]
    return DeflationBasis(v, Provenance.AGGREGATE_RESTRICTED_EIGEN)


def full_coarsening(N: int, index_base: int = 0) -> CfSplitting:
    """C points on even grid rows and columns.

    Parity is counted in ``index_base``-based coordinates.  The default
    (0-based) gives ``((N + 1) / 2)^2`` C points for odd ``N``; with
    ``index_base=1`` it gives ``floor(N / 2)^2``.
    """
    if N < 3:
        raise PreconditionError(f"grid size N must be >= 3, got {N}")
    if index_base not in (0, 1):
        raise ValueError("index_base must be 0 or 1")
    idx = np.arange(N) + index_base
    even = idx % 2 == 0
    coarse = np.logical_and.outer(even, even).ravel()
    return CfSplitting(coarse, (N, N))


def direct_interpolation(a, split: CfSplitting) -> DeflationBasis:
    """Direct interpolation for an M-matrix.

    Row ``i`` of a C point is the unit row of its coarse index.  An F point
    ``i`` with coarse neighbours ``C_i = {j in C : a_ij < 0}`` gets

        w_ij = -alpha_i * a_ij / a_ii,
        alpha_i = sum_{k != i} a_ik / sum_{j in C_i} a_ij.
    """
    A = sp.coo_matrix(as_scipy(a))
    n = A.shape[0]
    if split.n != n:
        raise ValueError(f"splitting has {split.n} points, matrix has {n} rows")
    is_c = split.coarse
    m = split.m
    cidx = np.full(n, -1, dtype=np.int64)
    cidx[is_c] = np.arange(m)

    r, c, val = A.row, A.col, A.data
    diag = np.asarray(as_scipy(a).diagonal(), dtype=np.float64)
    off = r != c
    f_off = off & ~is_c[r] & (val != 0.0)
    if np.any(val[f_off] > 0.0):
        bad = int(r[f_off][val[f_off] > 0.0][0])
        raise PreconditionError(f"positive off-diagonal in F row {bad}: not an M-matrix")
    if np.any(diag <= 0.0):
        raise PreconditionError("non-positive diagonal entry")
    row_off = np.bincount(r[off], val[off], minlength=n)
    interp = f_off & is_c[c] & (val < 0.0)
    row_c = np.bincount(r[interp], val[interp], minlength=n)
    f_rows = np.nonzero(~is_c)[0]
    orphan = f_rows[row_c[f_rows] == 0.0]
    if orphan.size:
        raise PreconditionError(f"F point {int(orphan[0])} has no coarse neighbour")

    ri = r[interp]
    alpha = row_off[ri] / row_c[ri]
    weights = -alpha * val[interp] / diag[ri]
    cp = split.coarse_points
    rows = np.concatenate([cp, ri])
    cols = np.concatenate([np.arange(m), cidx[c[interp]]])
    vals = np.concatenate([np.ones(m), weights])
    v = sp.csc_matrix((vals, (rows, cols)), shape=(n, m))
    return DeflationBasis(v, Provenance.DIRECT_INTERPOLATION)


def injection(split: CfSplitting) -> sp.csr_matrix:
    """``R e = e[C]`` in coarse-index order."""
    cp = split.coarse_points
    return sp.csr_matrix((np.ones(len(cp)), (np.arange(len(cp)), cp)), shape=(len(cp), split.n))


def verify_wap_tau(a, split: CfSplitting | None, basis: DeflationBasis, restriction=None) -> float:
    """Smallest ``tau`` with ``||e - V R e||_D^2 <= tau ||e||_A^2``, ``D = diag(A)``.

    ``R`` is injection on ``split`` unless ``restriction`` is given.
    """
    n = basis.n
    if n > dense_limit():
        raise SizeLimitError(f"dense tau computation limited to n <= {dense_limit()}, got {n}")
    A = as_dense(a)
    if restriction is None:
        if split is None:
            raise ValueError("need a splitting or an explicit restriction")
        restriction = injection(split)
    R = as_dense(restriction)
    err = np.eye(n) - basis.dense() @ R
    lhs = err.T @ (np.diag(A)[:, None] * err)
    lhs = 0.5 * (lhs + lhs.T)
    return float(scipy.linalg.eigh(lhs, A, eigvals_only=True)[-1])
