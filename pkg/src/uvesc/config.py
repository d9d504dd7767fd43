"""Experiment configuration files (JSON).

Units: times in seconds, frequencies in rad/s.  Matrices are row-major
nested lists.  Layout::

    {
      "polytope":   {"H0": [[...]], "delta_bar": 0.1}   or   {"vertices": [[[...]], ...]},
      "mu": 32.9034,
      "varphi": 0.4,
      "dither":     {"amplitudes": [...], "multipliers": [...], "base_frequency": 10.0},
      "map":        {"Qstar": 10.0, "thetastar": [...],
                     "H": {"explicit": [[...]]}  or  {"sampled": {"seed": 0}}},
      "simulation": {"theta0": [...], "t_end": 10.0, "dt": null, "uv_epsilon": 1e-6,
                     "record_stride": 10, "demodulation": "window",
                     "average_dt": 1e-3, "settle_band": 0.3},
      "gain": [[...]],                      (optional; otherwise synthesized)
      "output": {"dir": "out"}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .dither import DitherConfig
from .errors import UvescError
from .polytope import HessianPolytope, build_scaled_polytope, sample_uniform
from .simulator import MapSpec, SimConfig


class ConfigError(UvescError):
    """The configuration file is missing, malformed or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    polytope: HessianPolytope
    mu: float
    varphi: float
    dither: DitherConfig
    Qstar: float
    thetastar: np.ndarray
    H_explicit: Optional[np.ndarray]
    H_seed: Optional[int]
    theta0: np.ndarray
    t_end: float
    dt: Optional[float] = None
    uv_epsilon: float = 1e-6
    record_stride: int = 1
    demodulation: str = "window"
    average_dt: float = 1e-3
    settle_band: float = 0.3
    gain: Optional[np.ndarray] = None
    out_dir: str = "out"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def map_hessian(self) -> tuple[np.ndarray, Optional[list]]:
        """The simulated Hessian and, when sampled, its simplex weights."""
        if self.H_explicit is not None:
            return np.array(self.H_explicit), None
        alpha, H = sample_uniform(self.polytope, self.H_seed)
        return H, alpha.weights.tolist()

    def map_spec(self) -> MapSpec:
        return MapSpec(self.Qstar, self.thetastar, self.map_hessian()[0])

    def sim_config(self, K) -> SimConfig:
        return SimConfig(self.map_spec(), self.dither, K, self.theta0, self.t_end, self.dt,
                         self.uv_epsilon, self.record_stride, self.demodulation)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, H_explicit=None, H_seed=int(seed))

    def with_omega_scale(self, scale: float) -> "ExperimentConfig":
        if not scale > 0:
            raise ConfigError("omega scale must be positive")
        return replace(self, dither=self.dither.scaled(scale), dt=None)


def _matrix(v, name):
    a = np.asarray(v, dtype=float)
    if a.ndim != 2:
        raise ConfigError(f"{name} must be a nested (row-major) list")
    return a


def parse_config(data: dict) -> ExperimentConfig:
    try:
        poly_spec = data["polytope"]
        if "vertices" in poly_spec:
            poly = HessianPolytope(tuple(_matrix(v, "vertex") for v in poly_spec["vertices"]))
        else:
            poly = build_scaled_polytope(_matrix(poly_spec["H0"], "H0"), float(poly_spec["delta_bar"]))
        d = data["dither"]
        dither = DitherConfig(d["amplitudes"], tuple(d["multipliers"]), float(d["base_frequency"]))
        m = data["map"]
        hsel = m.get("H", {"sampled": {"seed": 0}})
        H_explicit = _matrix(hsel["explicit"], "map H") if "explicit" in hsel else None
        H_seed = None if H_explicit is not None else int(hsel["sampled"].get("seed", 0))
        s = data["simulation"]
        gain = data.get("gain")
        cfg = ExperimentConfig(
            polytope=poly,
            mu=float(data["mu"]),
            varphi=float(data["varphi"]),
            dither=dither,
            Qstar=float(m["Qstar"]),
            thetastar=np.asarray(m["thetastar"], dtype=float),
            H_explicit=H_explicit,
            H_seed=H_seed,
            theta0=np.asarray(s["theta0"], dtype=float),
            t_end=float(s["t_end"]),
            dt=None if s.get("dt") is None else float(s["dt"]),
            uv_epsilon=float(s.get("uv_epsilon", 1e-6)),
            record_stride=int(s.get("record_stride", 1)),
            demodulation=str(s.get("demodulation", "window")),
            average_dt=float(s.get("average_dt", 1e-3)),
            settle_band=float(s.get("settle_band", 0.3)),
            gain=None if gain is None else _matrix(gain, "gain"),
            out_dir=str(data.get("output", {}).get("dir", "out")),
            raw=data,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc!r}") from exc
    n = cfg.polytope.dim
    if cfg.dither.n != n or cfg.thetastar.shape != (n,) or cfg.theta0.shape != (n,):
        raise ConfigError("polytope, dither, thetastar and theta0 dimensions disagree")
    if cfg.gain is not None and cfg.gain.shape != (n, n):
        raise ConfigError("gain has the wrong shape")
    if not (cfg.mu > 0 and cfg.varphi > 0 and cfg.t_end >= 0):
        raise ConfigError("mu and varphi must be positive, t_end nonnegative")
    try:
        cfg.sim_config(np.zeros((n, n)))
    except ValueError as exc:
        raise ConfigError(f"invalid simulation settings: {exc}") from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    return parse_config(data)
