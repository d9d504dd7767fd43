"""Polytopic embedding of the unknown Hessian.

The Hessian ``H`` of the quadratic map is only known to lie in the convex
hull of ``N`` symmetric vertex matrices, ``H(alpha) = sum_i alpha_i H_i``
with ``alpha`` in the unit simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import as_symmetric, frozen, is_positive_definite
from .errors import DomainError

SIMPLEX_ATOL = 1e-12


@dataclass(frozen=True)
class SimplexPoint:
    """Convex-combination weights; nonnegative and summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.ndim != 1 or w.size == 0:
            raise DomainError("simplex weights must be a non-empty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_ATOL:
            raise DomainError(f"weights {w} are not in the unit simplex")
        object.__setattr__(self, "weights", frozen(w))

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class HessianPolytope:
    """Vertices ``H_1..H_N`` of the Hessian polytope, all ``n x n``.

    Vertices are symmetrized (asymmetry above 1e-12 relative is rejected)
    and must be positive definite unless ``allow_indefinite`` is set; the
    latter exists for infeasibility experiments only.
    """

    vertices: tuple
    allow_indefinite: bool = False

    def __post_init__(self):
        verts = list(self.vertices)
        if not verts:
            raise DomainError("a polytope needs at least one vertex")
        clean = []
        for i, v in enumerate(verts):
            v = as_symmetric(v, name=f"vertex {i}")
            if clean and v.shape != clean[0].shape:
                raise DomainError("all vertices must share the same dimension")
            if not self.allow_indefinite and not is_positive_definite(v):
                raise DomainError(f"vertex {i} is not positive definite")
            clean.append(frozen(v))
        object.__setattr__(self, "vertices", tuple(clean))

    @property
    def dim(self) -> int:
        return self.vertices[0].shape[0]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)


def build_scaled_polytope(H0, delta_bar: float) -> HessianPolytope:
    """Two-vertex polytope ``{(1 - delta_bar) H0, (1 + delta_bar) H0}``."""
    H0 = as_symmetric(H0, name="H0")
    if not is_positive_definite(H0):
        raise DomainError("H0 must be positive definite")
    if not 0.0 < delta_bar < 1.0:
        raise DomainError(f"delta_bar must lie in (0, 1), got {delta_bar}")
    return HessianPolytope(((1.0 - delta_bar) * H0, (1.0 + delta_bar) * H0))


def evaluate(poly: HessianPolytope, alpha) -> np.ndarray:
    """Return ``sum_i alpha_i H_i``."""
    if not isinstance(alpha, SimplexPoint):
        alpha = SimplexPoint(alpha)
    if len(alpha) != poly.n_vertices:
        raise DomainError(
            f"alpha has {len(alpha)} weights but the polytope has {poly.n_vertices} vertices"
        )
    H = np.tensordot(alpha.weights, np.stack(poly.vertices), axes=1)
    return 0.5 * (H + H.T)


def sample_simplex(n_weights: int, rng: np.random.Generator) -> SimplexPoint:
    # normalized i.i.d. exponentials are uniform on the simplex
    e = rng.exponential(size=n_weights)
    w = e / e.sum()
    # push the rounding residue of the sum into the largest weight
    w[np.argmax(w)] += 1.0 - w.sum()
    return SimplexPoint(w)


def sample_uniform(poly: HessianPolytope, seed: int):
    """Draw ``alpha`` uniformly on the simplex and return ``(alpha, H(alpha))``."""
    rng = np.random.default_rng(seed)
    alpha = sample_simplex(poly.n_vertices, rng)
    return alpha, evaluate(poly, alpha)

