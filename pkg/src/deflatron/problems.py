"""Seeded generators for the test matrices and right-hand sides.

All randomness goes through ``numpy.random.Generator(PCG64(seed))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionError
from .linalg import SparseMatrix, spmv

STENCIL_CENTER = 8.0


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class GridProblem:
    """9-point stencil matrix on the N x N interior points of a Dirichlet grid.

    Unknowns are numbered row-major: grid point ``(i, j)`` (1-based) has index
    ``(i - 1) * N + (j - 1)``.
    """

    n_grid: int
    matrix: SparseMatrix

    @property
    def n(self) -> int:
        return self.n_grid * self.n_grid

    @property
    def shape(self):
        return (self.n_grid, self.n_grid)


def laplace_bilinear(N: int) -> GridProblem:
    """Stencil ``[-1 -1 -1; -1 8 -1; -1 -1 -1]``; legs leaving the grid are dropped."""
    if N < 3:
        raise PreconditionError(f"grid size N must be >= 3, got {N}")
    ones = sp.diags([1.0, 1.0, 1.0], [-1, 0, 1], shape=(N, N))
    neighbours = sp.kron(ones, ones, format="csr")  # includes the point itself
    a = (STENCIL_CENTER + 1.0) * sp.identity(N * N, format="csr") - neighbours
    return GridProblem(n_grid=N, matrix=SparseMatrix.from_scipy(a))


def grid_index(N: int, i: int, j: int) -> int:
    """Flat index of 1-based grid point ``(i, j)``."""
    return (i - 1) * N + (j - 1)


@dataclass(frozen=True)
class SpectrumProblem:
    n: int
    eigenvalues: np.ndarray
    frame: str
    seed: int | None
    matrix: np.ndarray
    frame_matrix: np.ndarray = field(repr=False)


def spectrum_matrix(n: int, eigenvalues, frame: str = "diagonal", seed: int | None = None) -> SpectrumProblem:
    """Dense SPD matrix with a prescribed spectrum.

    ``frame="diagonal"`` gives ``diag(eigenvalues)``; ``"random_orthogonal"``
    gives ``Q.T @ diag(eigenvalues) @ Q`` with ``Q`` from the QR factor of a
    seeded Gaussian matrix.
    """
    ev = np.asarray(eigenvalues, dtype=np.float64)
    if ev.shape != (n,):
        raise ValueError(f"need {n} eigenvalues, got {ev.shape}")
    if np.any(ev <= 0.0):
        raise PreconditionError("eigenvalues must be positive")
    if frame == "diagonal":
        q = np.eye(n)
        a = np.diag(ev)
    elif frame == "random_orthogonal":
        if seed is None:
            raise ValueError("random_orthogonal frame needs a seed")
        q, r = np.linalg.qr(make_rng(seed).standard_normal((n, n)))
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
        a = (q.T * ev) @ q
        a = 0.5 * (a + a.T)
    else:
        raise ValueError(f"unknown frame {frame!r}")
    return SpectrumProblem(n=n, eigenvalues=ev, frame=frame, seed=seed, matrix=a, frame_matrix=q)


def fig1_eigenvalues(n: int = 100, small: float = 1e-2) -> np.ndarray:
    """One simple small eigenvalue and ``n - 1`` eigenvalues equal to one."""
    ev = np.ones(n)
    ev[0] = small
    return ev


def random_unit_solution_rhs(a, seed) -> tuple[np.ndarray, np.ndarray]:
    """``x_true`` uniform on the unit sphere and ``b = A @ x_true``."""
    n = a.shape[0]
    x = make_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    return x, spmv(a, x)
