"""Closed-loop simulation of unit-vector extremum seeking.

Two models are integrated:

* the full dithered loop, where the estimate ``theta_hat`` moves with
  velocity ``K phi(G)`` and ``G`` is the demodulated gradient estimate
  built from the measured map output;
* the average loop ``dG/dtau = (1/omega) H K G / |G|``, whose reaching
  time is bounded by the Lyapunov certificate.

The full loop supports two demodulators.  ``"window"`` (default) feeds the
controller the moving average of ``M(t) y(t)`` over one common dither
period; for a frozen estimate this is exactly ``H (theta_hat - theta*)``.
``"raw"`` feeds ``M(t) y(t)`` straight into the unit vector.  With a
positive map output the raw estimate has the direction of ``M(t)`` alone,
so the raw loop carries no gradient information; it is kept for reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._linalg import as_symmetric, frozen, is_positive_definite
from .dither import DitherConfig, common_period
from .errors import DomainError, NumericalError

DEMODULATORS = ("window", "raw")
STEPS_PER_FASTEST_PERIOD = 200


@dataclass(frozen=True)
class MapSpec:
    """Quadratic map ``y = Q* + (theta - theta*)^T H (theta - theta*) / 2``."""

    Qstar: float
    thetastar: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        H = as_symmetric(self.H, name="H")
        if not is_positive_definite(H):
            raise DomainError("the map Hessian must be positive definite")
        ts = np.atleast_1d(np.asarray(self.thetastar, dtype=float))
        if ts.shape != (H.shape[0],):
            raise DomainError("thetastar and H dimensions differ")
        object.__setattr__(self, "H", frozen(H))
        object.__setattr__(self, "thetastar", frozen(ts))
        object.__setattr__(self, "Qstar", float(self.Qstar))

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def __call__(self, theta):
        e = np.asarray(theta, dtype=float) - self.thetastar
        return self.Qstar + 0.5 * np.einsum("...i,ij,...j->...", e, self.H, e)


@dataclass(frozen=True)
class SimConfig:
    map: MapSpec
    dither: DitherConfig
    gain: np.ndarray
    theta0: np.ndarray
    t_end: float
    dt: Optional[float] = None  # None picks the largest admissible step
    uv_epsilon: float = 1e-6
    record_stride: int = 1
    demodulation: str = "window"

    def __post_init__(self):
        n = self.map.n
        K = np.asarray(self.gain, dtype=float)
        th0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if K.shape != (n, n) or th0.shape != (n,) or self.dither.n != n:
            raise DomainError("gain, theta0, dither and map dimensions must agree")
        if not self.t_end >= 0:
            raise DomainError("t_end must be nonnegative")
        if not self.uv_epsilon > 0:
            raise DomainError("uv_epsilon must be positive")
        if self.record_stride < 1:
            raise DomainError("record_stride must be at least 1")
        if self.demodulation not in DEMODULATORS:
            raise DomainError(f"demodulation must be one of {DEMODULATORS}")
        if self.dt is not None and not 0 < self.dt <= self.max_dt:
            raise DomainError(f"dt must lie in (0, {self.max_dt:.6g}]")
        object.__setattr__(self, "gain", frozen(K))
        object.__setattr__(self, "theta0", frozen(th0))

    @property
    def period(self) -> float:
        return common_period(self.dither)[0]

    @property
    def max_dt(self) -> float:
        T = self.period
        fastest = 2 * math.pi / float(np.max(self.dither.frequencies))
        return min(T, fastest) / STEPS_PER_FASTEST_PERIOD

    @property
    def steps_per_period(self) -> int:
        return int(math.ceil(self.period / (self.dt or self.max_dt) - 1e-9))

    @property
    def step(self) -> float:
        """Integration step actually used: the period divided into whole steps."""
        return self.period / self.steps_per_period


@dataclass
class Trace:
    times: np.ndarray
    g_hat: np.ndarray
    u: np.ndarray
    theta_hat: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def n(self) -> int:
        return self.g_hat.shape[1]

    def columns(self) -> list[str]:
        n = self.n
        cols = ["t"]
        if self.theta_hat is not None:
            cols += [f"theta_hat_{i}" for i in range(1, n + 1)]
            cols += [f"theta_{i}" for i in range(1, n + 1)]
            cols += ["y"]
        cols += [f"g_{i}" for i in range(1, n + 1)]
        cols += [f"u_{i}" for i in range(1, n + 1)]
        return cols

    def as_table(self) -> np.ndarray:
        parts = [self.times[:, None]]
        if self.theta_hat is not None:
            parts += [self.theta_hat, self.theta, self.y[:, None]]
        parts += [self.g_hat, self.u]
        return np.hstack(parts)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.as_table().reshape(len(self), -1), delimiter=",", fmt="%.17g",
                   header=",".join(self.columns()), comments="")

    @classmethod
    def from_csv(cls, path) -> "Trace":
        with open(path) as fh:
            cols = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).reshape(-1, len(cols))
        idx = {c: i for i, c in enumerate(cols)}
        n = sum(c.startswith("g_") for c in cols)

        def grab(prefix):
            return data[:, [idx[f"{prefix}_{i}"] for i in range(1, n + 1)]]

        full = "y" in idx
        return cls(
            times=data[:, idx["t"]], g_hat=grab("g"), u=grab("u"),
            theta_hat=grab("theta_hat") if full else None,
            theta=grab("theta") if full else None,
            y=data[:, idx["y"]] if full else None,
        )


def unit_vector(g, eps: float = 1e-6) -> np.ndarray:
    """``g / |g|`` outside the ``eps`` ball and ``g / eps`` inside it."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    g = np.asarray(g, dtype=float)
    return g / max(float(np.linalg.norm(g)), eps)


def simulate_full(cfg: SimConfig) -> Trace:
    """Fixed-step RK4 integration of the dithered loop.

    The step divides the common dither period exactly.  With the window
    demodulator the estimate is assumed to have been held at ``theta0`` for
    one period before the loop closes, so ``G(0) = H (theta0 - theta*)``.
    """
    mp, dc = cfg.map, cfg.dither
    n = mp.n
    K = np.array(cfg.gain)
    H = np.array(mp.H)
    ts, Qs = np.array(mp.thetastar), mp.Qstar
    eps = cfg.uv_epsilon
    window = cfg.demodulation == "window"
    nT = cfg.steps_per_period
    dt = cfg.step
    T = nT * dt
    N = int(math.floor(cfg.t_end / dt + 1e-9))
    # half-step grid from -T to N*dt; index j <-> time (j - 2 nT) dt / 2
    off = 2 * nT
    tau = (np.arange(2 * N + off + 1) - off) * (0.5 * dt)
    phase = np.multiply.outer(tau, dc.frequencies)
    sines = np.sin(phase)
    Sh = dc.amplitudes * sines
    Mh = (2.0 / dc.amplitudes) * sines

    def output(th, j):
        e = th + Sh[j] - ts
        return Qs + 0.5 * (e @ H @ e)

    zh = np.zeros((2 * N + off + 1, n))
    th = np.array(cfg.theta0)
    if window:
        # running integral of M y over the pre-roll period with theta frozen
        g = Mh[: off + 1] * (Qs + 0.5 * np.einsum("ji,ik,jk->j", th + Sh[: off + 1] - ts, H,
                                                    th + Sh[: off + 1] - ts))[:, None]
        ends, mids = g[0:off:2], g[1:off:2]
        nxt = g[2 : off + 1 : 2]
        incr = dt / 6.0 * (ends + 4.0 * mids + nxt)
        zfull = np.vstack([np.zeros(n), np.cumsum(incr, axis=0)])
        zh[0 : off + 1 : 2] = zfull
        zh[1:off:2] = 0.5 * (zfull[:-1] + zfull[1:]) + dt / 8.0 * (ends - nxt)
    z = zh[off].copy()

    def rhs(th, z, j):
        y = output(th, j)
        g = Mh[j] * y
        G = (z - zh[j - off]) / T if window else g
        u = K @ (G / max(math.sqrt(G @ G), eps))
        return u, g, y, G

    stride = cfg.record_stride
    n_rec = N // stride + 1
    rec_t = np.empty(n_rec)
    rec_th = np.empty((n_rec, n))
    rec_theta = np.empty((n_rec, n))
    rec_y = np.empty(n_rec)
    rec_g = np.empty((n_rec, n))
    rec_u = np.empty((n_rec, n))

    u1, g1, y1, G1 = rhs(th, z, off)
    r = 0
    for k in range(N + 1):
        j = off + 2 * k
        if k % stride == 0:
            rec_t[r] = tau[j]
            rec_th[r] = th
            rec_theta[r] = th + Sh[j]
            rec_y[r] = y1
            rec_g[r] = G1
            rec_u[r] = u1
            r += 1
        if k == N:
            break
        h2 = 0.5 * dt
        u2, g2, _, _ = rhs(th + h2 * u1, z + h2 * g1, j + 1)
        u3, g3, _, _ = rhs(th + h2 * u2, z + h2 * g2, j + 1)
        u4, g4, _, _ = rhs(th + dt * u3, z + dt * g3, j + 2)
        th_new = th + dt / 6.0 * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
        z_new = z + dt / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
        if not (np.all(np.isfinite(th_new)) and np.all(np.isfinite(z_new))):
            raise NumericalError(f"non-finite state at t={tau[j + 2]:.6g}")
        u1n, g1n, y1, G1 = rhs(th_new, z_new, j + 2)
        zh[j + 1] = 0.5 * (z + z_new) + dt / 8.0 * (g1 - g1n)
        zh[j + 2] = z_new
        th, z, u1, g1 = th_new, z_new, u1n, g1n

    return Trace(rec_t[:r], rec_g[:r], rec_u[:r], rec_th[:r], rec_theta[:r], rec_y[:r],
                 meta={"dt": dt, "period": T, "demodulation": cfg.demodulation})


def simulate_average(K, H, g0, omega: float = 1.0, dt: float = 1e-3, t_end: float = 10.0,
                     eps_stop: Optional[float] = None, uv_epsilon: float = 1e-6,
                     record_stride: int = 1, max_steps: int = 10_000_000):
    """RK4 integration of ``dG/dtau = (1/omega) H K G / |G|`` until ``|G| <= eps_stop``.

    Steps are shortened near the origin so no step can jump across the
    discontinuity: a step of length ``h`` moves ``G`` by at most
    ``|H K| h / omega``.  Returns ``(trace, reach_time)``; ``reach_time`` is
    ``None`` if the ball is not reached by ``t_end``.
    """
    K = np.asarray(K, dtype=float)
    H = np.asarray(H, dtype=float)
    g = np.asarray(g0, dtype=float).copy()
    if not np.linalg.norm(g) > 0:
        raise DomainError("g0 must be nonzero")
    if not (dt > 0 and omega > 0 and t_end >= 0):
        raise DomainError("dt, omega must be positive and t_end nonnegative")
    eps_stop = 10.0 * uv_epsilon if eps_stop is None else eps_stop
    if not eps_stop >= uv_epsilon:
        raise DomainError("eps_stop must not be inside the regularization ball")
    A = H @ K / omega
    vmax = float(np.linalg.norm(A, 2))

    def f(g):
        return A @ (g / max(math.sqrt(g @ g), uv_epsilon))

    times, gs = [0.0], [g.copy()]
    t = 0.0
    reach = None
    steps = 0
    while True:
        ng = math.sqrt(g @ g)
        if ng <= eps_stop:
            reach = t
            break
        if t >= t_end - 1e-12 or steps >= max_steps:
            break
        h = min(dt, t_end - t)
        if vmax > 0:
            h = min(h, (ng - 0.5 * eps_stop) / vmax)
        k1 = f(g)
        k2 = f(g + 0.5 * h * k1)
        k3 = f(g + 0.5 * h * k2)
        k4 = f(g + h * k3)
        g = g + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        steps += 1
        if steps % record_stride == 0:
            times.append(t)
            gs.append(g.copy())
    if times[-1] != t:
        times.append(t)
        gs.append(g.copy())
    G = np.array(gs)
    U = np.array([K @ (v / max(np.linalg.norm(v), uv_epsilon)) for v in G])
    trace = Trace(np.array(times), G, U, meta={"omega": omega, "dt": dt, "eps_stop": eps_stop})
    return trace, reach


def average_in_theta(trace: Trace, mp: MapSpec) -> Trace:
    """Map an average trace to the estimate ``theta* + H^{-1} G_av``."""
    th = mp.thetastar + np.linalg.solve(mp.H, trace.g_hat.T).T
    return replace(trace, theta_hat=th, theta=th.copy(), y=mp(th))


def measure_settling(trace: Trace, target, band: float, series: str = "theta_hat"):
    """First time after which ``|series - target|`` stays within ``band`` to the end."""
    if not band > 0:
        raise DomainError("band must be positive")
    values = np.asarray(getattr(trace, series))
    if values.ndim == 1:
        dist = np.abs(values - float(target))
    else:
        dist = np.linalg.norm(values - np.asarray(target, dtype=float), axis=1)
    outside = np.nonzero(dist > band)[0]
    if outside.size == 0:
        return float(trace.times[0])
    last = outside[-1]
    if last == len(dist) - 1:
        return None
    return float(trace.times[last + 1])


def average_prediction(cfg: SimConfig, times, dt: float = 1e-3):
    """Average-loop estimate error ``theta_av(t) - theta*`` on the given times."""
    H = np.array(cfg.map.H)
    e0 = np.array(cfg.theta0) - cfg.map.thetastar
    times = np.asarray(times, dtype=float)
    if not np.any(e0):
        return np.zeros((len(times), cfg.map.n))
    t_end = float(times[-1]) if len(times) else 0.0
    tr, reach = simulate_average(cfg.gain, H, H @ e0, dt=dt, t_end=t_end,
                                 uv_epsilon=cfg.uv_epsilon)
    err = np.linalg.solve(H, tr.g_hat.T).T
    pred = np.column_stack([np.interp(times, tr.times, err[:, i]) for i in range(cfg.map.n)])
    if reach is not None:
        pred[times >= reach] = 0.0
    return pred


def averaging_gap(cfg: SimConfig, omega_list: Sequence[float]) -> list[tuple[float, float]]:
    """Sup-norm distance between the full loop and the average prediction, per base frequency."""
    omegas = [float(w) for w in omega_list]
    if len(omegas) < 2 or any(b < a for a, b in zip(omegas, omegas[1:])):
        raise DomainError("omega_list must be non-decreasing with at least two entries")
    out = []
    for w in omegas:
        dither = DitherConfig(cfg.dither.amplitudes, cfg.dither.multipliers, w)
        run = replace(cfg, dither=dither, dt=None)
        tr = simulate_full(run)
        pred = average_prediction(run, tr.times)
        gap = np.linalg.norm(tr.theta_hat - cfg.map.thetastar - pred, axis=1)
        out.append((w, float(gap.max())))
    return out
