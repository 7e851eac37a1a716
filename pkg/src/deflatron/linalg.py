"""Sparse/dense primitives: CSR storage, inner products, norms, Matrix Market I/O.

Vectors and dense matrices are plain ``numpy.ndarray`` objects (float64).
The sparse system matrix is :class:`SparseMatrix`, a validated symmetric CSR
container whose products are delegated to ``scipy.sparse``.
"""

from __future__ import annotations

import os
from typing import Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DimensionMismatch, NotPositiveDefiniteError

TOL_PSD = 1e-12
DENSE_EIG_LIMIT = 4096  # admits the 63 x 63 grid
SPD_EXACT_LIMIT = 500


class SparseMatrix:
    """Square CSR matrix with both triangles stored.

    Column indices are sorted within each row, so row sums are accumulated in
    ascending column order.
    """

    def __init__(self, row_ptr, col_idx, values, n=None, check_symmetry=True):
        row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if n is None:
            n = len(row_ptr) - 1
        if len(row_ptr) != n + 1:
            raise ValueError(f"row_ptr must have length n+1={n + 1}, got {len(row_ptr)}")
        if row_ptr[0] != 0 or np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must start at 0 and be non-decreasing")
        if len(col_idx) != row_ptr[-1] or len(values) != row_ptr[-1]:
            raise ValueError("col_idx/values length must equal row_ptr[-1]")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= n):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite matrix entry")

        csr = sp.csr_matrix((values, col_idx, row_ptr), shape=(n, n))
        # csr_matrix merges nothing on its own; count before canonicalising
        nnz = csr.nnz
        csr.sum_duplicates()
        if csr.nnz != nnz:
            raise ValueError("duplicate (i, j) entries are not allowed")
        csr.sort_indices()
        self._csr = csr
        self.n = n
        self.symmetry_flag = False
        if check_symmetry:
            diff = csr - csr.T
            if diff.nnz and np.abs(diff.data).max() != 0.0:
                raise ValueError("matrix is not symmetric")
            self.symmetry_flag = True

    @classmethod
    def from_scipy(cls, m, check_symmetry=True) -> "SparseMatrix":
        csr = sp.csr_matrix(m, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.indptr, csr.indices, csr.data, csr.shape[0], check_symmetry)

    @classmethod
    def from_dense(cls, a, check_symmetry=True) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        return cls.from_scipy(sp.csr_matrix(a), check_symmetry)

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        return cls.from_scipy(sp.identity(n, format="csr"))

    @property
    def row_ptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_idx(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, other):
        return self._csr @ other

    def __rmatmul__(self, other):
        return other @ self._csr

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


Operator = Union[SparseMatrix, sp.spmatrix, np.ndarray]


def as_scipy(a: Operator):
    """Return something supporting ``@`` with scipy/numpy semantics."""
    if isinstance(a, SparseMatrix):
        return a.csr
    return a


def as_dense(a: Operator) -> np.ndarray:
    if isinstance(a, SparseMatrix):
        return a.toarray()
    if sp.issparse(a):
        return a.toarray()
    return np.asarray(a, dtype=np.float64)


def _check_len(a_n, x):
    if x.ndim != 1 or x.shape[0] != a_n:
        raise DimensionMismatch(f"vector of length {x.shape} does not match dimension {a_n}")


def spmv(a: Operator, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_len(a.shape[1], x)
    return np.asarray(as_scipy(a) @ x, dtype=np.float64)


def dot(u, v) -> float:
    """Euclidean inner product ``<u, v> = sum conj(v_i) u_i``."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionMismatch(f"shapes {u.shape} and {v.shape} differ")
    return float(np.vdot(v, u).real)


def a_dot(a: Operator, u, v) -> float:
    """A-inner product ``<A u, v>``."""
    return dot(spmv(a, u), np.asarray(v, dtype=np.float64))


def norm2(v) -> float:
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64)))


def a_norm(a: Operator, v, tol_psd: float = TOL_PSD) -> float:
    q = a_dot(a, v, v)
    if q < 0.0:
        scale = tol_psd * max(norm2(spmv(a, v)) * norm2(v), 1.0)
        if q < -scale:
            raise NotPositiveDefiniteError(f"<Av, v> = {q:.3e} < 0: operator is not SPD")
        return 0.0
    return float(np.sqrt(q))


def assert_spd_sample(a: Operator, k: int = 8, seed: int = 0) -> bool:
    """Probabilistic SPD check, exact (dense eigenvalues) when n is small.

    Returns False instead of raising when the matrix fails a check.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = a.shape[0]
    if isinstance(a, SparseMatrix) and not a.symmetry_flag:
        return False
    rng = np.random.default_rng(seed)
    for _ in range(k):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        if not a_dot(a, v, v) > 0.0:
            return False
    if n <= min(SPD_EXACT_LIMIT, dense_limit()):
        dense = as_dense(a)
        if not np.allclose(dense, dense.T, rtol=0, atol=1e-12 * max(np.abs(dense).max(), 1.0)):
            return False
        return bool(np.linalg.eigvalsh(dense)[0] > 0.0)
    return True


def dense_limit() -> int:
    """Size cap for dense analysis, overridable via ``DEFLATRON_DENSE_LIMIT``."""
    raw = os.environ.get("DEFLATRON_DENSE_LIMIT")
    return int(raw) if raw else DENSE_EIG_LIMIT


def read_matrix_market(path) -> SparseMatrix:
    m = scipy.io.mmread(str(path))
    if not sp.issparse(m):
        m = sp.csr_matrix(m)
    return SparseMatrix.from_scipy(m)


def write_matrix_market(path, a: Operator, comment: str = "") -> None:
    m = sp.coo_matrix(as_scipy(a))
    symmetric = isinstance(a, SparseMatrix) and a.symmetry_flag
    scipy.io.mmwrite(
        str(path),
        m,
        comment=comment,
        field="real",
        precision=17,
        symmetry="symmetric" if symmetric else "general",
    )


def read_dense_market(path) -> np.ndarray:
    """Read a Matrix Market ``array`` file (vectors, dense bases)."""
    m = scipy.io.mmread(str(path))
    if sp.issparse(m):
        m = m.toarray()
    m = np.asarray(m, dtype=np.float64)
    return m


def write_dense_market(path, m, comment: str = "") -> None:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    scipy.io.mmwrite(str(path), m, comment=comment, field="real", precision=17)
