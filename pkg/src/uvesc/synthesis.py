"""LMI synthesis of the unit-vector gain.

Decision variables are a symmetric ``X > 0``, a symmetric ``M > 0``, a full
``L`` and (for the reaching-time program) a scalar ``rho``.  For every
Hessian vertex ``H_i`` the program requires

    [[H_i L + L^T H_i + (mu/4) I + M,  L^T H_i],
     [H_i L,                          -mu I   ]] < 0

and the gain is recovered as ``K = L X^{-1}``.  The certificate of the
average loop is ``P = X^{-1}``, ``Q = X^{-1} M X^{-1}``.  The reaching-time
program adds ``[[phi I, I], [I, X]] >= 0`` (so ``P <= phi I``) and
``[[M, X], [X, rho I]] >= 0`` (so ``Q >= I / rho``) and minimizes ``rho``.

Blocks are kept in the canonical affine form ``F(x) = F0 + sum_k x_k F_k``
over a flat decision vector ``x``, so any SDP backend can consume them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from ._linalg import frozen
from .errors import DomainError, Infeasible, NumericalError, SolverFailure, ToleranceViolation
from .polytope import HessianPolytope

log = logging.getLogger(__name__)

EPS_STRICT = 1e-6

SENSES = ("nd", "pd", "psd")


@dataclass(frozen=True)
class DecisionLayout:
    """Packing of ``(X, M, L[, rho])`` into a flat vector."""

    n: int
    with_rho: bool = False

    @property
    def n_sym(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def size(self) -> int:
        return 2 * self.n_sym + self.n * self.n + int(self.with_rho)

    def _sym(self, v):
        S = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        S[iu] = v
        S[(iu[1], iu[0])] = v
        return S

    def unpack(self, x) -> dict:
        x = np.asarray(x, dtype=float)
        s, n = self.n_sym, self.n
        out = {
            "X": self._sym(x[:s]),
            "M": self._sym(x[s : 2 * s]),
            "L": x[2 * s : 2 * s + n * n].reshape(n, n),
        }
        out["rho"] = float(x[-1]) if self.with_rho else None
        return out

    def pack(self, X, M, L, rho=None) -> np.ndarray:
        iu = np.triu_indices(self.n)
        parts = [np.asarray(X)[iu], np.asarray(M)[iu], np.asarray(L).ravel()]
        if self.with_rho:
            parts.append([0.0 if rho is None else rho])
        return np.concatenate(parts).astype(float)

    @property
    def rho_index(self) -> Optional[int]:
        return self.size - 1 if self.with_rho else None


@dataclass(frozen=True)
class LmiBlock:
    """Affine symmetric-matrix constraint ``F0 + sum_k x_k F_k``.

    ``sense`` is ``"nd"`` (``F <= -margin I``), ``"pd"`` (``F >= margin I``)
    or ``"psd"`` (``F >= 0``).
    """

    label: str
    F0: np.ndarray
    F: np.ndarray  # shape (d, m, m)
    sense: str
    margin: float = 0.0

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, x) -> np.ndarray:
        return self.F0 + np.tensordot(np.asarray(x, dtype=float), self.F, axes=1)

    def slack(self, x) -> float:
        """Signed distance to the constraint boundary; nonnegative when satisfied."""
        w = np.linalg.eigvalsh(self.evaluate(x))
        if self.sense == "nd":
            return float(-w[-1] - self.margin)
        if self.sense == "pd":
            return float(w[0] - self.margin)
        return float(w[0])


def affine_block(label: str, fn: Callable[..., np.ndarray], layout: DecisionLayout,
                 sense: str, margin: float = 0.0) -> LmiBlock:
    """Build the canonical coefficients of ``fn(**layout.unpack(x))`` by probing basis vectors."""
    if sense not in SENSES:
        raise DomainError(f"unknown sense {sense!r}")
    zero = np.zeros(layout.size)
    F0 = np.asarray(fn(**layout.unpack(zero)), dtype=float)
    F = np.empty((layout.size,) + F0.shape)
    for k in range(layout.size):
        e = zero.copy()
        e[k] = 1.0
        F[k] = np.asarray(fn(**layout.unpack(e)), dtype=float) - F0
    return LmiBlock(label, frozen(F0), frozen(F), sense, margin)


def vertex_block(H, X, M, L, mu) -> np.ndarray:
    n = H.shape[0]
    I = np.eye(n)
    HL = H @ L
    return np.block([[HL + HL.T + 0.25 * mu * I + M, HL.T], [HL, -mu * I]])


def strictness(poly: HessianPolytope) -> float:
    """``EPS_STRICT`` scaled by the largest vertex spectral norm (at least 1)."""
    scale = max([1.0] + [float(np.linalg.norm(H, 2)) for H in poly.vertices])
    return EPS_STRICT * scale


def assemble_feasibility(poly: HessianPolytope, mu: float, layout: Optional[DecisionLayout] = None,
                         eps_strict: Optional[float] = None) -> list[LmiBlock]:
    """Blocks ``X > 0``, ``M > 0`` and one negative-definite block per vertex."""
    if not mu > 0:
        raise DomainError("mu must be positive")
    layout = layout or DecisionLayout(poly.dim)
    if layout.n != poly.dim:
        raise DomainError("layout dimension does not match the polytope")
    eps = strictness(poly) if eps_strict is None else eps_strict
    blocks = [
        affine_block("X > 0", lambda X, M, L, rho: X, layout, "pd", eps),
        affine_block("M > 0", lambda X, M, L, rho: M, layout, "pd", eps),
    ]
    for i, H in enumerate(poly.vertices):
        blocks.append(affine_block(
            f"vertex {i + 1}", lambda X, M, L, rho, H=H: vertex_block(H, X, M, L, mu),
            layout, "nd", eps))
    return blocks


@dataclass(frozen=True)
class LmiProgram:
    layout: DecisionLayout
    blocks: tuple
    objective: np.ndarray  # linear cost on x; all zeros for pure feasibility


def assemble_min_rho(poly: HessianPolytope, mu: float, varphi: float,
                     eps_strict: Optional[float] = None) -> LmiProgram:
    """Feasibility blocks plus the two coupling blocks; objective ``min rho``."""
    if not varphi > 0:
        raise DomainError("varphi must be positive")
    layout = DecisionLayout(poly.dim, with_rho=True)
    I = np.eye(poly.dim)
    blocks = assemble_feasibility(poly, mu, layout, eps_strict)
    blocks.append(affine_block(
        "phi coupling", lambda X, M, L, rho: np.block([[varphi * I, I], [I, X]]), layout, "psd"))
    blocks.append(affine_block(
        "rho coupling", lambda X, M, L, rho: np.block([[M, X], [X, rho * I]]), layout, "psd"))
    c = np.zeros(layout.size)
    c[layout.rho_index] = 1.0
    return LmiProgram(layout, tuple(blocks), c)


def assemble_feasibility_program(poly: HessianPolytope, mu: float,
                                 eps_strict: Optional[float] = None) -> LmiProgram:
    layout = DecisionLayout(poly.dim)
    blocks = assemble_feasibility(poly, mu, layout, eps_strict)
    return LmiProgram(layout, tuple(blocks), np.zeros(layout.size))


# -- backends ---------------------------------------------------------------


@dataclass
class BackendSolution:
    status: str  # "optimal", "infeasible" or "failed"
    x: Optional[np.ndarray] = None
    detail: str = ""


class SolverBackend(Protocol):
    name: str

    def solve(self, blocks: Sequence[LmiBlock], objective: np.ndarray) -> BackendSolution:
        ...


class CvxpyBackend:
    """SDP backend on top of cvxpy; Clarabel by default."""

    def __init__(self, solver: str = "CLARABEL", **options):
        self.solver = solver
        self.options = options
        self.name = f"cvxpy/{solver}"

    def solve(self, blocks, objective):
        import cvxpy as cp

        d = len(objective)
        x = cp.Variable(d)
        constraints = []
        for b in blocks:
            m = b.size
            flat = b.F.reshape(d, m * m).T
            expr = cp.reshape(flat @ x, (m, m), order="C") + b.F0
            expr = 0.5 * (expr + expr.T)
            I = np.eye(m)
            if b.sense == "nd":
                constraints.append(-expr - b.margin * I >> 0)
            elif b.sense == "pd":
                constraints.append(expr - b.margin * I >> 0)
            else:
                constraints.append(expr >> 0)
        prob = cp.Problem(cp.Minimize(np.asarray(objective) @ x), constraints)
        try:
            prob.solve(solver=self.solver, **self.options)
        except cp.error.SolverError as exc:
            return BackendSolution("failed", detail=str(exc))
        status = prob.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return BackendSolution("optimal", np.asarray(x.value, dtype=float), status)
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return BackendSolution("infeasible", detail=status)
        return BackendSolution("failed", detail=str(status))


# -- problem and result -----------------------------------------------------


@dataclass(frozen=True)
class SynthesisProblem:
    polytope: HessianPolytope
    mu: float
    varphi: Optional[float] = None
    objective: str = "minimize-rho"  # or "feasibility"

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError("mu must be positive")
        if self.objective not in ("minimize-rho", "feasibility"):
            raise DomainError(f"unknown objective {self.objective!r}")
        if self.objective == "minimize-rho" and not (self.varphi is not None and self.varphi > 0):
            raise DomainError("minimize-rho needs a positive varphi")

    def program(self, eps_strict: Optional[float] = None) -> LmiProgram:
        if self.objective == "feasibility":
            return assemble_feasibility_program(self.polytope, self.mu, eps_strict)
        return assemble_min_rho(self.polytope, self.mu, self.varphi, eps_strict)


@dataclass(frozen=True)
class SynthesisResult:
    X: np.ndarray
    Mdec: np.ndarray
    L: np.ndarray
    K: np.ndarray
    P: np.ndarray
    Qmat: np.ndarray
    rho: Optional[float]
    solver_status: str
    mu: float
    varphi: Optional[float] = None
    eps_strict: float = EPS_STRICT
    certificate: object = field(default=None, compare=False)

    @classmethod
    def from_decision(cls, X, Mdec, L, mu, rho=None, varphi=None, solver_status="given",
                      eps_strict=EPS_STRICT):
        X = 0.5 * (np.asarray(X, float) + np.asarray(X, float).T)
        Mdec = 0.5 * (np.asarray(Mdec, float) + np.asarray(Mdec, float).T)
        L = np.asarray(L, float)
        K = recover_gain(X, L)
        P = np.linalg.solve(X, np.eye(X.shape[0]))
        P = 0.5 * (P + P.T)
        Q = P @ Mdec @ P
        return cls(frozen(X), frozen(Mdec), frozen(L), frozen(K), frozen(P), frozen(0.5 * (Q + Q.T)),
                   rho, solver_status, mu, varphi, eps_strict)

    def to_dict(self) -> dict:
        out = {
            "solver_status": self.solver_status,
            "mu": self.mu,
            "varphi": self.varphi,
            "rho": self.rho,
            "eps_strict": self.eps_strict,
        }
        for name in ("K", "X", "Mdec", "L", "P", "Qmat"):
            out[name] = getattr(self, name).tolist()
        out["lambda_min_Q"] = float(np.linalg.eigvalsh(self.Qmat)[0])
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        return out


def recover_gain(X, L) -> np.ndarray:
    """``K = L X^{-1}``, computed as the solution of ``K X = L``."""
    X = np.asarray(X, dtype=float)
    L = np.asarray(L, dtype=float)
    if np.linalg.cond(X) > 1.0 / np.finfo(float).eps:
        raise NumericalError("X is singular to working precision")
    # K X = L  <=>  X^T K^T = L^T
    return np.linalg.solve(X.T, L.T).T


def reaching_time_bound(P, Qmat, g0) -> tuple[float, float]:
    """``V0 = g0^T P g0 / |g0|`` and the reaching-time bound ``V0 / lambda_min(Q)``."""
    g0 = np.asarray(g0, dtype=float)
    ng = np.linalg.norm(g0)
    if ng == 0:
        raise DomainError("g0 must be nonzero")
    V0 = float(g0 @ np.asarray(P) @ g0 / ng)
    lam = float(np.linalg.eigvalsh(np.asarray(Qmat))[0])
    if lam <= 0:
        raise DomainError("Q must be positive definite")
    return V0, V0 / lam


def solve(problem: SynthesisProblem, backend: Optional[SolverBackend] = None,
          eps_strict: Optional[float] = None) -> SynthesisResult:
    """Solve the LMI program and independently verify the returned certificate.

    Raises ``Infeasible``, ``SolverFailure`` or ``ToleranceViolation``.
    """
    from .verifier import check_certificate

    backend = backend or CvxpyBackend()
    eps = strictness(problem.polytope) if eps_strict is None else eps_strict
    prog = problem.program(eps)
    sol = backend.solve(prog.blocks, prog.objective)
    if sol.status == "infeasible":
        raise Infeasible(f"{backend.name} reports the LMIs infeasible ({sol.detail})")
    if sol.status != "optimal" or sol.x is None or not np.all(np.isfinite(sol.x)):
        raise SolverFailure(f"{backend.name} failed: {sol.detail}")
    v = prog.layout.unpack(sol.x)
    try:
        result = SynthesisResult.from_decision(
            v["X"], v["M"], v["L"], problem.mu, v["rho"], problem.varphi, sol.detail, eps)
    except (np.linalg.LinAlgError, NumericalError) as exc:
        raise SolverFailure(f"could not recover the gain: {exc}") from exc
    report = check_certificate(result, problem.polytope, problem.mu, varphi=problem.varphi)
    if not report.passed:
        raise ToleranceViolation("returned assignment rejected by the verifier", report)
    log.debug("synthesis ok: rho=%s status=%s", v["rho"], sol.detail)
    return _with_certificate(result, report)


def _with_certificate(result: SynthesisResult, report) -> SynthesisResult:
    object.__setattr__(result, "certificate", report)
    return result


def search_mu(poly: HessianPolytope, varphi: float, bracket=(1.0, 100.0), xtol: float = 1e-3,
              backend: Optional[SolverBackend] = None, max_iter: int = 60):
    """Golden-section search over ``log mu`` for the smallest ``rho``.

    Infeasible or failed points count as ``rho = inf``.  Returns
    ``(mu, result)`` for the best point evaluated.
    """
    lo, hi = (math.log(b) for b in bracket)
    if not lo < hi:
        raise DomainError("bracket must be increasing")
    cache = {}

    def rho_at(logmu):
        if logmu not in cache:
            try:
                r = solve(SynthesisProblem(poly, math.exp(logmu), varphi), backend)
                cache[logmu] = (r.rho, r)
            except (Infeasible, SolverFailure, ToleranceViolation):
                cache[logmu] = (math.inf, None)
        return cache[logmu][0]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if rho_at(c) <= rho_at(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    for end in (lo, hi):
        rho_at(end)
    best = min(cache, key=lambda k: cache[k][0])
    rho, result = cache[best]
    if result is None:
        raise Infeasible("no feasible mu inside the bracket")
    return math.exp(best), result


def certify_gain(poly: HessianPolytope, mu: float, K, backend: Optional[SolverBackend] = None,
                 eps_strict: Optional[float] = None) -> SynthesisResult:
    """Search ``X, M`` certifying a fixed gain ``K`` (the vertex blocks with ``L = K X``).

    The program is linear in ``X`` and ``M`` once ``K`` is fixed.  Raises
    ``Infeasible`` when no certificate exists for this ``mu``.
    """
    from .verifier import check_certificate

    K = np.asarray(K, dtype=float)
    if K.shape != (poly.dim, poly.dim):
        raise DomainError("gain shape does not match the polytope")
    backend = backend or CvxpyBackend()
    eps = strictness(poly) if eps_strict is None else eps_strict
    layout = DecisionLayout(poly.dim)
    blocks = [
        affine_block("X > 0", lambda X, M, L, rho: X, layout, "pd", eps),
        affine_block("M > 0", lambda X, M, L, rho: M, layout, "pd", eps),
    ]
    for i, H in enumerate(poly.vertices):
        blocks.append(affine_block(
            f"vertex {i + 1}", lambda X, M, L, rho, H=H: vertex_block(H, X, M, K @ X, mu),
            layout, "nd", eps))
    sol = backend.solve(blocks, np.zeros(layout.size))
    if sol.status == "infeasible":
        raise Infeasible(f"no certificate for the given gain ({sol.detail})")
    if sol.status != "optimal" or sol.x is None:
        raise SolverFailure(f"{backend.name} failed: {sol.detail}")
    v = layout.unpack(sol.x)
    result = SynthesisResult.from_decision(v["X"], v["M"], K @ v["X"], mu, None, None, sol.detail, eps)
    report = check_certificate(result, poly, mu)
    if not report.passed:
        raise ToleranceViolation("certificate for the given gain rejected by the verifier", report)
    return _with_certificate(result, report)
