"""Independent eigenvalue checks of synthesized gains and certificates.

Nothing here trusts the optimization backend: every block is rebuilt from
the matrices themselves and checked with a symmetric eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .polytope import HessianPolytope, evaluate, sample_simplex

TOL_REL = 1e-7
ASYM_GUARD = 1e-10


@dataclass(frozen=True)
class BlockCheck:
    label: str
    sense: str  # "nd", "pd" or "psd"
    eig_min: float
    eig_max: float
    tol: float

    @property
    def margin(self) -> float:
        if self.sense == "nd":
            return -self.eig_max - self.tol
        if self.sense == "pd":
            return self.eig_min - self.tol
        return self.eig_min + self.tol

    @property
    def passed(self) -> bool:
        return self.margin >= 0

    def to_dict(self):
        return {"label": self.label, "sense": self.sense, "eig_min": self.eig_min,
                "eig_max": self.eig_max, "tol": self.tol, "margin": self.margin,
                "passed": self.passed}


@dataclass(frozen=True)
class CertificateReport:
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst(self) -> Optional[BlockCheck]:
        return min(self.checks, key=lambda c: c.margin) if self.checks else None

    def __getitem__(self, label) -> BlockCheck:
        for c in self.checks:
            if c.label == label:
                return c
        raise KeyError(label)

    def to_dict(self):
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _check(label, block, sense, tol=None) -> BlockCheck:
    block = np.asarray(block, dtype=float)
    asym = np.linalg.norm(block - block.T)
    if asym > ASYM_GUARD * max(1.0, np.linalg.norm(block)):
        raise DomainError(f"block {label!r} is not symmetric (asymmetry {asym:.3g})")
    w = np.linalg.eigvalsh(0.5 * (block + block.T))
    if tol is None:
        tol = TOL_REL * float(np.abs(w).max(initial=0.0))
    return BlockCheck(label, sense, float(w[0]), float(w[-1]), float(tol))


def _square(name, a, n):
    a = np.asarray(a, dtype=float)
    if a.shape != (n, n):
        raise DomainError(f"{name} has shape {a.shape}, expected {(n, n)}")
    return a


def check_certificate(result, poly: HessianPolytope, mu: float, tol: Optional[float] = None,
                      varphi: Optional[float] = None) -> CertificateReport:
    """Evaluate ``X > 0``, ``M > 0`` and every vertex block at the result.

    The vertex blocks use ``L = K X`` so the check certifies the gain the
    result actually carries.  When ``varphi`` is given and the result has a
    ``rho``, the two reaching-time coupling blocks are checked as well.
    """
    n = poly.dim
    X = _square("X", result.X, n)
    Mdec = _square("M", result.Mdec, n)
    K = _square("K", result.K, n)
    L = K @ X
    I = np.eye(n)
    checks = [_check("X > 0", X, "pd", tol), _check("M > 0", Mdec, "pd", tol)]
    for i, H in enumerate(poly.vertices):
        HL = H @ L
        B = np.block([[HL + HL.T + 0.25 * mu * I + Mdec, HL.T], [HL, -mu * I]])
        checks.append(_check(f"vertex {i + 1}", B, "nd", tol))
    rho = getattr(result, "rho", None)
    if varphi is not None and rho is not None:
        checks.append(_check("phi coupling", np.block([[varphi * I, I], [I, X]]), "psd", tol))
        checks.append(_check("rho coupling", np.block([[Mdec, X], [X, rho * I]]), "psd", tol))
    return CertificateReport(tuple(checks))


def descent_matrix(H, K, P, Qmat, mu) -> np.ndarray:
    """``(1/mu) K^T H^T H K + P H K + K^T H^T P + (mu/4) P^2 + Q``."""
    HK = H @ K
    D = HK.T @ HK / mu + P @ HK + HK.T @ P + 0.25 * mu * P @ P + Qmat
    return 0.5 * (D + D.T)


def check_descent_condition(K, P, Qmat, mu: float, poly: HessianPolytope, tol: Optional[float] = None,
                            samples: int = 50, seed: int = 0) -> CertificateReport:
    """Require the descent matrix to be negative definite at every vertex and at sampled interior points."""
    n = poly.dim
    K = _square("K", K, n)
    P = _square("P", P, n)
    Qmat = _square("Q", Qmat, n)
    checks = [_check(f"vertex {i + 1}", descent_matrix(H, K, P, Qmat, mu), "nd", tol)
              for i, H in enumerate(poly.vertices)]
    rng = np.random.default_rng(seed)
    for j in range(samples):
        H = evaluate(poly, sample_simplex(poly.n_vertices, rng))
        checks.append(_check(f"interior {j + 1}", descent_matrix(H, K, P, Qmat, mu), "nd", tol))
    return CertificateReport(tuple(checks))


def lyapunov_rate(g, H, K, P) -> np.ndarray:
    """Time derivative of ``V(g) = g^T P g / |g|`` along ``g' = H K g / |g|``.

    ``g`` may be a single vector or a stack of row vectors.  The rate is
    homogeneous of degree zero in ``g``.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    A = P @ H @ K
    quad = np.einsum("si,ij,sj->s", u, A + A.T, u)
    vp = np.einsum("si,ij,sj->s", u, P, u)
    vk = np.einsum("si,ij,sj->s", u, H @ K, u)
    return quad - vp * vk


@dataclass(frozen=True)
class DecreaseReport:
    min_margin: float  # min over samples of -dV/dt
    worst_direction: np.ndarray
    worst_alpha: np.ndarray
    samples: int
    lambda_min_Q: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.min_margin > 0

    def to_dict(self):
        return {"min_margin": self.min_margin, "worst_direction": self.worst_direction.tolist(),
                "worst_alpha": self.worst_alpha.tolist(), "samples": self.samples,
                "lambda_min_Q": self.lambda_min_Q, "passed": self.passed}


def check_finite_time_decrease(K, P, poly: HessianPolytope, samples: int = 1000, seed: int = 0,
                               Qmat=None) -> DecreaseReport:
    """Sample unit directions and Hessians; report the smallest decrease rate of ``V``.

    Each vertex is paired with every sampled direction; interior Hessians
    are paired one-to-one with the directions.
    """
    if samples < 100:
        raise DomainError("samples must be at least 100")
    n = poly.dim
    K = _square("K", K, n)
    P = _square("P", P, n)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    worst = (np.inf, None, None)
    for i, H in enumerate(poly.vertices):
        rate = lyapunov_rate(dirs, H, K, P)
        k = int(np.argmax(rate))
        if -rate[k] < worst[0]:
            worst = (-rate[k], dirs[k], np.eye(poly.n_vertices)[i])
    for s in range(samples):
        alpha = sample_simplex(poly.n_vertices, rng)
        r = float(lyapunov_rate(dirs[s], evaluate(poly, alpha), K, P)[0])
        if -r < worst[0]:
            worst = (-r, dirs[s], alpha.weights)
    lam = None if Qmat is None else float(np.linalg.eigvalsh(np.asarray(Qmat))[0])
    return DecreaseReport(float(worst[0]), np.array(worst[1]), np.array(worst[2]), samples, lam)
