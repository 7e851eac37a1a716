"""Dense computation of the constants in the deflated CG convergence bound.

For a deflation space ``S = range(V)``:

* ``kappa_eff = mu_1 / mu_ell`` from the nonzero spectrum of ``A (I - pi_A(S))``
* ``K = ||A||_2 ||W^T Q Lambda^{-1/2}||_2^2`` with ``W`` an orthonormal basis of ``S^perp``
* ``gamma`` = largest cosine of the A-angle between ``S^perp`` and ``S``
* ``xi = 1 - gamma^2`` (the A-invariance measure)

and ``kappa_eff <= K / (1 - gamma)`` must hold.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .dense import EigenDecomposition, orthonormal_complement, spectral_norm, svd_values, sym_eig
from .errors import BoundViolation, PreconditionError, SizeLimitError, SpectrumClassificationError
from .linalg import as_dense, dense_limit
from .projection import DeflationBasis
from .subspaces import PerturbationSpec, orthonormal_completion, perturbed_eigen_basis, qr_perturbation_bound

ZERO_GAP = 1e-8
KEEP_GAP = 1e-6
BOUND_SLACK = 1e-6
XI_SLACK = 1e-9


def _dense_inputs(a, basis: DeflationBasis):
    n = basis.n
    if n > dense_limit():
        raise SizeLimitError(f"dense analysis limited to n <= {dense_limit()}, got n={n}")
    A = as_dense(a)
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match basis with n={n}")
    return A, basis.dense()


def deflated_matrix(a, basis: DeflationBasis) -> np.ndarray:
    """Dense symmetric ``A - A V (V^T A V)^{-1} V^T A``."""
    A, V = _dense_inputs(a, basis)
    av = A @ V
    e = V.T @ av
    chol = scipy.linalg.cho_factor(0.5 * (e + e.T), lower=True)
    m = A - av @ scipy.linalg.cho_solve(chol, av.T)
    return 0.5 * (m + m.T)


def deflated_spectrum(a, basis: DeflationBasis) -> tuple[np.ndarray, int]:
    """Eigenvalues of ``A (I - pi_A(S))`` (descending) and the number classified zero.

    The ``dim S`` eigenvalues of smallest magnitude are the zero eigenvalues;
    a gap test guards that classification.
    """
    mu = sym_eig(deflated_matrix(a, basis)).values
    m = basis.m
    mu1 = mu[0]
    zeros = mu[len(mu) - m :]
    kept = mu[: len(mu) - m]
    if np.abs(zeros).max() >= ZERO_GAP * mu1 or kept[-1] <= KEEP_GAP * mu1:
        raise SpectrumClassificationError(
            f"no clean gap: largest declared zero {np.abs(zeros).max():.3e}, "
            f"smallest kept {kept[-1]:.3e}, mu_1 {mu1:.3e}"
        )
    if mu[-1] < -1e-11 * mu1:
        raise SpectrumClassificationError(f"deflated operator has negative eigenvalue {mu[-1]:.3e}")
    return mu, m


def kappa_eff(a, basis: DeflationBasis) -> float:
    mu, rd = deflated_spectrum(a, basis)
    return float(mu[0] / mu[len(mu) - rd - 1])


def compute_K(a, basis: DeflationBasis, eig: EigenDecomposition | None = None) -> float:
    """Smallest weak-approximation constant ``K`` for ``S = range(V)``."""
    A, V = _dense_inputs(a, basis)
    if eig is None:
        eig = sym_eig(A)
    lam = eig.values
    if lam[-1] <= 0.0:
        raise PreconditionError("matrix is not positive definite")
    W = orthonormal_complement(V)
    scaled = (W.T @ eig.vectors) / np.sqrt(lam)
    return float(lam[0] * spectral_norm(scaled) ** 2)


def _a_orthonormal(A, X) -> np.ndarray:
    g = X.T @ A @ X
    L = scipy.linalg.cholesky(0.5 * (g + g.T), lower=True)
    return scipy.linalg.solve_triangular(L, X.T, lower=True).T


def a_angle_cosine(a, basis: DeflationBasis) -> float:
    """Largest singular value of ``U^T A V`` for A-orthonormal bases of ``S^perp`` and ``S``."""
    A, V = _dense_inputs(a, basis)
    U = _a_orthonormal(A, orthonormal_complement(V))
    Vt = _a_orthonormal(A, V)
    s = svd_values(U.T @ A @ Vt)
    return float(min(s[0], 1.0)) if len(s) else 0.0


def compute_gamma(a, basis: DeflationBasis) -> float:
    return a_angle_cosine(a, basis)


def compute_xi(a, basis: DeflationBasis, gamma: float | None = None) -> float:
    """``min_{x in S^perp} ||x - pi_A x||_A^2 / ||x||_A^2 = 1 - gamma^2``."""
    if gamma is None:
        gamma = a_angle_cosine(a, basis)
    return 1.0 - gamma * gamma


@dataclass
class BoundReport:
    lambda_max: float
    lambda_min: float
    kappa: float
    mu_1: float
    mu_ell: float
    kappa_eff: float
    K: float
    gamma: float
    xi: float
    bound: float
    rank_deficiency: int
    m: int = 0

    def violations(self) -> list[str]:
        out = []
        if not 0.0 < self.xi <= 1.0 + 1e-12:
            out.append(f"xi={self.xi} outside (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            out.append(f"gamma={self.gamma} outside [0, 1)")
        if self.kappa_eff > self.bound * (1.0 + BOUND_SLACK):
            out.append(f"kappa_eff={self.kappa_eff} exceeds K/(1-gamma)={self.bound}")
        if self.xi < (1.0 - self.gamma) - XI_SLACK:
            out.append(f"xi={self.xi} < 1 - gamma={1 - self.gamma}")
        if self.mu_1 > self.lambda_max * (1.0 + 1e-10):
            out.append(f"mu_1={self.mu_1} exceeds lambda_max={self.lambda_max}")
        if self.m and self.rank_deficiency != self.m:
            out.append(f"rank deficiency {self.rank_deficiency} != dim S = {self.m}")
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["quantity", "value"])
        for k, v in self.to_dict().items():
            w.writerow([k, v])
        return buf.getvalue()


def bound_report(a, basis: DeflationBasis, strict: bool = True) -> BoundReport:
    A, _ = _dense_inputs(a, basis)
    eig = sym_eig(A)
    mu, rd = deflated_spectrum(A, basis)
    mu_1, mu_ell = float(mu[0]), float(mu[len(mu) - rd - 1])
    K = compute_K(A, basis, eig)
    gamma = compute_gamma(A, basis)
    rep = BoundReport(
        lambda_max=float(eig.values[0]),
        lambda_min=float(eig.values[-1]),
        kappa=float(eig.values[0] / eig.values[-1]),
        mu_1=mu_1,
        mu_ell=mu_ell,
        kappa_eff=mu_1 / mu_ell,
        K=K,
        gamma=gamma,
        xi=compute_xi(A, basis, gamma),
        bound=K / (1.0 - gamma),
        rank_deficiency=rd,
        m=basis.m,
    )
    if strict:
        bad = rep.violations()
        if bad:
            raise BoundViolation("; ".join(bad))
    return rep


def perturbation_estimate(kappa: float, kappa_opt: float, delta: float) -> float:
    """``[sqrt(k_opt) + sqrt(k)(2d + d^2)]^2 (1 - sqrt(k) d)^2 / (1 - 4 sqrt(k) d)``.

    Defined for ``sqrt(kappa) * delta < 1/4``.
    """
    sk = math.sqrt(kappa)
    if delta < 0.0 or not sk * delta < 0.25:
        raise PreconditionError(f"estimate needs sqrt(kappa)*delta < 1/4, got {sk * delta:.4g}")
    num = (math.sqrt(kappa_opt) + sk * (2.0 * delta + delta * delta)) ** 2 * (1.0 - sk * delta) ** 2
    return num / (1.0 - 4.0 * sk * delta)


def perturbation_estimate_simplified(kappa: float, kappa_opt: float, delta: float) -> float:
    """Coarser closed form ``[sqrt(k_opt) + d (1/4 + 2 sqrt(k))]^2 / (1 - 4 sqrt(k) d)``."""
    sk = math.sqrt(kappa)
    if delta < 0.0 or not sk * delta < 0.25:
        raise PreconditionError(f"estimate needs sqrt(kappa)*delta < 1/4, got {sk * delta:.4g}")
    return (math.sqrt(kappa_opt) + delta * (0.25 + 2.0 * sk)) ** 2 / (1.0 - 4.0 * sk * delta)


SWEEP_FIELDS = ("e1_frob", "delta_measured", "delta_bound", "kappa_eff_actual", "kappa_eff_estimate", "kappa_opt")


@dataclass(frozen=True)
class SweepRecord:
    e1_frob: float
    delta_measured: float
    delta_bound: float
    kappa_eff_actual: float
    kappa_eff_estimate: float
    kappa_opt: float


@dataclass
class PerturbationSweep:
    records: list[SweepRecord]
    kappa: float
    kappa_opt: float
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def estimate_defined(self) -> np.ndarray:
        """Mask of records inside ``sqrt(kappa) * delta < 1/4``."""
        d = self.column("delta_measured")
        return np.isfinite(d) & (math.sqrt(self.kappa) * d < 0.25)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_FIELDS)
        for r in self.records:
            w.writerow(["NA" if not math.isfinite(getattr(r, f)) else repr(getattr(r, f)) for f in SWEEP_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        def clean(x):
            return x if math.isfinite(x) else None

        return json.dumps(
            {
                "kappa": self.kappa,
                "kappa_opt": self.kappa_opt,
                "meta": self.meta,
                "records": [{f: clean(getattr(r, f)) for f in SWEEP_FIELDS} for r in self.records],
            },
            indent=2,
        )

    @classmethod
    def from_csv(cls, text: str, kappa: float, kappa_opt: float) -> "PerturbationSweep":
        rows = list(csv.DictReader(io.StringIO(text)))
        recs = [SweepRecord(**{f: float("nan") if r[f] == "NA" else float(r[f]) for f in SWEEP_FIELDS}) for r in rows]
        return cls(recs, kappa, kappa_opt)


def perturbation_sweep(a, eig: EigenDecomposition, k: int, direction, magnitudes) -> PerturbationSweep:
    """Actual and estimated ``kappa_eff`` for ``S~ = range(Q_1 + t * direction)``.

    The estimate uses the measured ``delta`` from the QR completion; the
    a-priori bound on ``delta`` is recorded alongside.  Magnitudes with
    ``||E_1||_2 >= 1`` keep the actual value and report the estimate as NaN.
    """
    A = as_dense(a)
    lam = eig.values
    kappa = float(lam[0] / lam[-1])
    kappa_opt = float(lam[0] / lam[k - 1])
    q1, q2 = eig.vectors[:, k:], eig.vectors[:, :k]
    direction = np.asarray(direction, dtype=np.float64).reshape(q1.shape)
    dnorm = np.linalg.norm(direction)
    if dnorm == 0.0:
        raise ValueError("perturbation direction is zero")
    direction = direction / dnorm
    records = []
    for t in sorted(float(t) for t in magnitudes):
        if t < 0:
            raise ValueError("magnitudes must be non-negative")
        e1 = t * direction
        comp = orthonormal_completion(q1, q2, e1, check=False)
        if spectral_norm(e1) < 1.0:
            basis = perturbed_eigen_basis(eig, k, PerturbationSpec(direction, t))
        else:
            basis = DeflationBasis(q1 + e1, "perturbed_eigen")
        actual = kappa_eff(A, basis)
        # E_1 = 0 gives W = 0 exactly; drop the QR roundoff
        delta = comp.delta if t > 0.0 else 0.0
        try:
            est = perturbation_estimate(kappa, kappa_opt, delta) if math.isfinite(comp.delta_bound) else float("nan")
        except PreconditionError:
            est = float("nan")
        records.append(
            SweepRecord(
                e1_frob=float(np.linalg.norm(e1)),
                delta_measured=float(delta),
                delta_bound=float(qr_perturbation_bound(e1)),
                kappa_eff_actual=actual,
                kappa_eff_estimate=est,
                kappa_opt=kappa_opt,
            )
        )
    return PerturbationSweep(records, kappa, kappa_opt, meta={"n": A.shape[0], "k": k})


def empirical_order(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def brute_force_K(a, basis: DeflationBasis) -> float:
    """``||A|| * max_x ||(I - P_S) x||^2 / ||x||_A^2`` via a generalized eigenproblem."""
    A, V = _dense_inputs(a, basis)
    q, _ = np.linalg.qr(V)
    perp = np.eye(A.shape[0]) - q @ q.T
    top = scipy.linalg.eigh(0.5 * (perp + perp.T), A, eigvals_only=True)[-1]
    return float(np.linalg.eigvalsh(A)[-1] * top)


def brute_force_xi(a, basis: DeflationBasis) -> float:
    """``min_{x in S^perp} x^T A(I - pi_A) x / x^T A x`` via a generalized eigenproblem."""
    A, V = _dense_inputs(a, basis)
    W = orthonormal_complement(V)
    M = deflated_matrix(A, basis)
    num = W.T @ M @ W
    den = W.T @ A @ W
    return float(scipy.linalg.eigh(0.5 * (num + num.T), 0.5 * (den + den.T), eigvals_only=True)[0])
