"""Sinusoidal perturbation and demodulation signals.

Channel ``i`` is perturbed by ``a_i sin(w_i t)`` and demodulated with
``(2 / a_i) sin(w_i t)``, where ``w_i = m_i * w`` for integer multipliers
``m_i`` and a base frequency ``w``.  Integer multipliers make every signal
periodic with the common period ``T = 2 pi / (w gcd(m))``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._linalg import frozen
from .errors import DomainError, NumericalError


@dataclass(frozen=True)
class FrequencyViolation:
    channel: int
    kind: str  # "equal", "half-sum", "sum" or "difference"
    indices: tuple
    value: float


@dataclass(frozen=True)
class ValidationReport:
    multipliers: tuple
    violations: tuple = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid


def validate_frequencies(multipliers: Sequence[int]) -> ValidationReport:
    """Check the frequency-separation rule on every channel.

    Channel ``i`` must differ from every other multiplier, from every
    half-sum ``(m_j + m_k) / 2`` with ``j != k``, and from every sum and
    difference ``m_k +- m_l`` except the pair ``k = l = i``.  Indices in
    the report are zero-based.
    """
    m = [int(v) for v in multipliers]
    if not m:
        raise DomainError("at least one multiplier is required")
    n = len(m)
    found = []
    for i in range(n):
        for j in range(n):
            if j != i and m[j] == m[i]:
                found.append(FrequencyViolation(i, "equal", (j,), m[j]))
        for j, k in itertools.combinations(range(n), 2):
            if 2 * m[i] == m[j] + m[k]:
                found.append(FrequencyViolation(i, "half-sum", (j, k), 0.5 * (m[j] + m[k])))
        for k, l in itertools.product(range(n), repeat=2):
            if k == l == i:
                continue
            if k <= l and m[k] + m[l] == m[i]:
                found.append(FrequencyViolation(i, "sum", (k, l), m[k] + m[l]))
            if m[k] - m[l] == m[i]:
                found.append(FrequencyViolation(i, "difference", (k, l), m[k] - m[l]))
    return ValidationReport(tuple(m), tuple(found))


@dataclass(frozen=True)
class DitherConfig:
    """Amplitudes ``a_i``, integer multipliers ``m_i`` and base frequency ``w`` (rad/s)."""

    amplitudes: np.ndarray
    multipliers: tuple
    base_frequency: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        mult = tuple(self.multipliers)
        if a.ndim != 1 or a.size != len(mult):
            raise DomainError("need one amplitude per multiplier")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise DomainError("amplitudes must be positive")
        for v in mult:
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise DomainError(f"multipliers must be positive integers, got {v!r}")
        mult = tuple(int(v) for v in mult)
        if not (math.isfinite(self.base_frequency) and self.base_frequency > 0):
            raise DomainError("base_frequency must be positive")
        report = validate_frequencies(mult)
        if not report.valid:
            raise DomainError(f"multipliers {mult} violate the separation rule: {report.violations[0]}")
        object.__setattr__(self, "amplitudes", frozen(a))
        object.__setattr__(self, "multipliers", mult)
        object.__setattr__(self, "base_frequency", float(self.base_frequency))

    @property
    def n(self) -> int:
        return len(self.multipliers)

    @property
    def frequencies(self) -> np.ndarray:
        return self.base_frequency * np.asarray(self.multipliers, dtype=float)

    @property
    def amplitude_norm(self) -> float:
        """``a = sqrt(sum a_i^2)``, the dither size in the convergence bounds."""
        return float(np.linalg.norm(self.amplitudes))

    def scaled(self, factor: float) -> "DitherConfig":
        return DitherConfig(self.amplitudes, self.multipliers, self.base_frequency * factor)


def _phase(t, cfg: DitherConfig):
    # broadcasts scalar t -> (n,), array t -> (len(t), n)
    return np.multiply.outer(np.asarray(t, dtype=float), cfg.frequencies)


def perturbation(t, cfg: DitherConfig) -> np.ndarray:
    """``S(t)_i = a_i sin(w_i t)``."""
    return cfg.amplitudes * np.sin(_phase(t, cfg))


def demodulation(t, cfg: DitherConfig) -> np.ndarray:
    """``M(t)_i = (2 / a_i) sin(w_i t)``."""
    return (2.0 / cfg.amplitudes) * np.sin(_phase(t, cfg))


def delta_matrix(t: float, cfg: DitherConfig) -> np.ndarray:
    """Oscillating part of ``M(t) S(t)^T``, so that ``M S^T = I + Delta``.

    Diagonal entries are ``-cos(2 w_i t)``; off-diagonal entries are
    ``(a_j / a_i) [cos((w_i - w_j) t) - cos((w_i + w_j) t)]``.
    """
    w = cfg.frequencies
    a = cfg.amplitudes
    t = float(t)
    ratio = a[None, :] / a[:, None]
    d = ratio * (np.cos(np.subtract.outer(w, w) * t) - np.cos(np.add.outer(w, w) * t))
    np.fill_diagonal(d, -np.cos(2.0 * w * t))
    return d


def common_period(cfg: DitherConfig) -> tuple[float, float]:
    """Return ``(T, omega)`` with ``T = 2 pi / (w gcd(m))`` and ``omega = 2 pi / T``."""
    g = math.gcd(*cfg.multipliers)
    omega = cfg.base_frequency * g
    return 2.0 * math.pi / omega, omega


def signal_average(f: Callable[[float], np.ndarray], T: float, quadrature_points: int = 4096):
    """Average of a ``T``-periodic function over one period (periodic trapezoid rule)."""
    if quadrature_points < 64:
        raise DomainError("quadrature_points must be at least 64")
    if not T > 0:
        raise DomainError("period must be positive")
    ts = np.arange(quadrature_points) * (T / quadrature_points)
    total = None
    for t in ts:
        v = np.asarray(f(t), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite sample at t={t}")
        total = v.copy() if total is None else total + v
    return total / quadrature_points
