import numpy as np

from .errors import DomainError

SYM_RTOL = 1e-12
PD_RTOL = 1e-10


def as_symmetric(a, rtol=SYM_RTOL, name="matrix"):
    """Return ``(a + a.T) / 2`` after checking the asymmetry is only rounding noise."""
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > rtol * max(scale, np.finfo(float).tiny):
        raise DomainError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def is_positive_definite(a, rtol=PD_RTOL):
    """Scale-invariant test ``lambda_min > rtol * lambda_max`` on a symmetric matrix."""
    w = np.linalg.eigvalsh(a)
    return bool(w[-1] > 0 and w[0] > rtol * w[-1])


def sym_eigvals(a):
    return np.linalg.eigvalsh(0.5 * (a + a.T))


def frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a
