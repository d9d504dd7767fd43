"""The two-input numerical example and the checks run on it.

Each ``criterion_*`` function runs one experiment and returns a plain dict
of measurements with a ``passed`` flag; thresholds are module constants.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .config import parse_config
from .dither import (DitherConfig, common_period, delta_matrix, demodulation, perturbation,
                     signal_average)
from .errors import Infeasible
from .polytope import HessianPolytope, build_scaled_polytope, sample_uniform
from .simulator import MapSpec, SimConfig, averaging_gap, simulate_average, simulate_full
from .synthesis import SynthesisProblem, SynthesisResult, solve
from .verifier import check_certificate

H0 = np.array([[100.0, 30.0], [30.0, 20.0]])
DELTA_BAR = 0.1
VARPHI = 0.4
MU = 32.9034
REFERENCE_GAIN = np.array([[-0.2393, 0.3589], [0.3589, -1.1965]])
REFERENCE_GAIN_SCALE = 13.163  # H0 @ REFERENCE_GAIN is close to -13.163 I
QSTAR = 10.0
THETASTAR = np.array([2.0, 4.0])
THETA0 = np.array([2.5, 6.0])
AMPLITUDES = np.array([0.1, 0.1])
MULTIPLIERS = (1, 7)  # 10 and 70 rad/s
BASE_FREQUENCY = 10.0

SEED = 0
FULL_SEEDS = (0, 1, 2)
AVERAGE_SEEDS = tuple(range(20))
OMEGA_SCALES = (1, 2, 4)

# pass thresholds
REFERENCE_GAIN_TOL = 0.02
SYNTH_RUNTIME = 5.0
AVERAGE_RUNTIME = 5.0
FULL_T_END = 10.0
FULL_TAIL_START = 8.0  # last 20 % of the horizon
THETA_BAND = 0.3
Y_BAND = 1.5
FULL_RUNTIME = 30.0
GAP_T_END = 15.0
GAP_RATIO = 0.67
ZERO_AVG_TOL = 1e-8
OUTER_TOL = 1e-10
DITHER_RUNTIME = 1.0
ORACLE_RUNTIME = 5.0


def example_config_dict(seed: int = SEED) -> dict:
    return {
        "polytope": {"H0": H0.tolist(), "delta_bar": DELTA_BAR},
        "mu": MU,
        "varphi": VARPHI,
        "dither": {"amplitudes": AMPLITUDES.tolist(), "multipliers": list(MULTIPLIERS),
                   "base_frequency": BASE_FREQUENCY},
        "map": {"Qstar": QSTAR, "thetastar": THETASTAR.tolist(), "H": {"sampled": {"seed": seed}}},
        "simulation": {"theta0": THETA0.tolist(), "t_end": FULL_T_END, "dt": None,
                       "uv_epsilon": 1e-6, "record_stride": 10, "demodulation": "window",
                       "average_dt": 1e-3, "settle_band": THETA_BAND},
        "output": {"dir": "reproduction_bundle"},
    }


def example_config(seed: int = SEED):
    return parse_config(example_config_dict(seed))


def example_polytope() -> HessianPolytope:
    return build_scaled_polytope(H0, DELTA_BAR)


def example_dither(scale: float = 1.0) -> DitherConfig:
    return DitherConfig(AMPLITUDES, MULTIPLIERS, BASE_FREQUENCY * scale)


def synthesize_example(backend=None) -> SynthesisResult:
    return solve(SynthesisProblem(example_polytope(), MU, VARPHI), backend)


def reference_gain_residual() -> float:
    """``|H0 K_reference + 13.163 I|_inf`` from the published four-digit gain alone."""
    return float(np.linalg.norm(H0 @ REFERENCE_GAIN + REFERENCE_GAIN_SCALE * np.eye(2), np.inf))


def criterion_1(backend=None) -> dict:
    t0 = time.perf_counter()
    poly = example_polytope()
    try:
        res = synthesize_example(backend)
    except Infeasible as exc:
        return {"passed": False, "feasible": False, "detail": str(exc)}
    elapsed = time.perf_counter() - t0
    report = check_certificate(res, poly, MU, varphi=VARPHI)
    vertex_margins = [report[f"vertex {i + 1}"].margin for i in range(poly.n_vertices)]
    sym_eigs = [float(np.linalg.eigvalsh(H @ res.K + res.K.T @ H)[-1]) for H in poly.vertices]
    residual = reference_gain_residual()
    passed = (report.passed and min(vertex_margins) > 0 and residual <= REFERENCE_GAIN_TOL
              and max(sym_eigs) < 0 and elapsed < SYNTH_RUNTIME)
    return {"passed": bool(passed), "feasible": True, "rho": res.rho, "K": res.K.tolist(),
            "vertex_margins": vertex_margins, "max_eig_HK_sym": sym_eigs,
            "reference_gain_residual": residual, "runtime_s": elapsed, "result": res}


def seeded_initial_gradient(P, seed: int) -> np.ndarray:
    """Random ``g0`` with ``V(g0) = g0^T P g0 / |g0|`` in ``[0.05, 1]``."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(P.shape[0])
    d /= np.linalg.norm(d)
    level = rng.uniform(0.05, 1.0)
    return level / float(d @ P @ d) * d


def criterion_2(result: SynthesisResult, dt: float = 1e-3) -> dict:
    from .synthesis import reaching_time_bound

    poly = example_polytope()
    t0 = time.perf_counter()
    rows = []
    for seed in AVERAGE_SEEDS:
        _, H = sample_uniform(poly, seed)
        g0 = seeded_initial_gradient(result.P, seed)
        V0, bound = reaching_time_bound(result.P, result.Qmat, g0)
        _, reach = simulate_average(result.K, H, g0, dt=dt, t_end=2.0 * max(bound, result.rho))
        ok = reach is not None and reach <= bound + dt and reach <= result.rho + dt and V0 <= 1.0
        rows.append({"seed": seed, "V0": V0, "reach_time": reach, "bound": bound,
                     "rho": result.rho, "passed": bool(ok)})
    elapsed = time.perf_counter() - t0
    return {"passed": all(r["passed"] for r in rows) and elapsed < AVERAGE_RUNTIME,
            "runs": rows, "runtime_s": elapsed}


def full_sim_config(K, seed: int, t_end: float = FULL_T_END, scale: float = 1.0) -> SimConfig:
    _, H = sample_uniform(example_polytope(), seed)
    return SimConfig(MapSpec(QSTAR, THETASTAR, H), example_dither(scale), K, THETA0, t_end)


def criterion_3(K, traces: dict | None = None) -> dict:
    """Full-loop runs on sampled Hessians; traces are stored in ``traces`` by seed if given."""
    t0 = time.perf_counter()
    rows = []
    for seed in FULL_SEEDS:
        tr = simulate_full(full_sim_config(K, seed))
        if traces is not None:
            traces[seed] = tr
        tail = tr.times >= FULL_TAIL_START - 1e-12
        th_err = float(np.linalg.norm(tr.theta_hat[tail] - THETASTAR, axis=1).max())
        y_err = float(np.abs(tr.y[tail] - QSTAR).max())
        rows.append({"seed": seed, "max_theta_err": th_err, "max_y_err": y_err,
                     "theta_ok": th_err <= THETA_BAND, "y_ok": y_err <= Y_BAND})
    elapsed = time.perf_counter() - t0
    passed = all(r["theta_ok"] and r["y_ok"] for r in rows) and elapsed < FULL_RUNTIME
    return {"passed": bool(passed), "runs": rows, "runtime_s": elapsed}


def criterion_4(K, seed: int = SEED) -> dict:
    cfg = full_sim_config(K, seed, t_end=GAP_T_END)
    gaps = averaging_gap(cfg, [BASE_FREQUENCY * s for s in OMEGA_SCALES])
    values = [g for _, g in gaps]
    ratios = [b / a for a, b in zip(values, values[1:])]
    passed = all(r <= GAP_RATIO for r in ratios)
    return {"passed": bool(passed), "gaps": gaps, "ratios": ratios, "t_end": GAP_T_END}


def criterion_5(n_times: int = 100, seed: int = SEED) -> dict:
    t0 = time.perf_counter()
    cfg = example_dither()
    T, _ = common_period(cfg)
    H = H0
    avg_S = float(np.abs(signal_average(lambda t: perturbation(t, cfg), T)).max())
    avg_M = float(np.abs(signal_average(lambda t: demodulation(t, cfg), T)).max())
    avg_D = float(np.abs(signal_average(lambda t: delta_matrix(t, cfg), T)).max())
    avg_O = float(np.abs(signal_average(lambda t: (np.eye(2) + delta_matrix(t, cfg)) @ H, T) - H).max())
    rng = np.random.default_rng(seed)
    outer = max(
        float(np.linalg.norm(np.outer(demodulation(t, cfg), perturbation(t, cfg)) - np.eye(2)
                             - delta_matrix(t, cfg)))
        for t in rng.uniform(0, 100, n_times))
    period_err = abs(T - 2 * math.pi / 10)
    elapsed = time.perf_counter() - t0
    passed = (max(avg_S, avg_M, avg_D) <= ZERO_AVG_TOL and outer <= OUTER_TOL
              and period_err <= 1e-12 and elapsed < DITHER_RUNTIME)
    return {"passed": bool(passed), "avg_S": avg_S, "avg_M": avg_M, "avg_Delta": avg_D,
            "avg_Omega_minus_H": avg_O, "outer_identity": outer, "period": T,
            "runtime_s": elapsed}


def scalar_block_is_nd(h: float, ell: float, m: float, mu: float) -> bool:
    """Closed-form test that ``[[2 h l + mu/4 + m, h l], [h l, -mu]]`` is negative definite."""
    a, b, c = 2 * h * ell + 0.25 * mu + m, h * ell, -mu
    return a < 0 and a * c - b * b > 0


def scalar_oracle_grid():
    ells = np.linspace(-20.0, 5.0, 25)
    ms = np.linspace(-1.0, 3.0, 10)
    xs = np.linspace(-1.0, 2.0, 5)
    mus = np.geomspace(0.5, 50.0, 10)
    return ells, ms, xs, mus


def criterion_6(backend=None) -> dict:
    """Grid-search oracle versus solver and verifier for scalar problems."""
    t0 = time.perf_counter()
    h = 1.0
    poly = HessianPolytope((np.array([[h]]),))
    ells, ms, xs, mus = scalar_oracle_grid()
    disagreements = 0
    oracle_feasible_at = {float(mu): False for mu in mus}
    count = 0
    for mu in mus:
        for ell in ells:
            for m in ms:
                for x in xs:
                    count += 1
                    ok = x > 0 and m > 0 and scalar_block_is_nd(h, ell, m, mu)
                    oracle_feasible_at[float(mu)] |= ok
                    if x == 0:
                        continue
                    res = _scalar_result(x, m, ell, mu)
                    if not ok and check_certificate(res, poly, mu).passed:
                        disagreements += 1
    solver_rows = []
    for mu in mus[::3]:
        try:
            res = solve(SynthesisProblem(poly, float(mu), objective="feasibility"), backend)
            ell = float(res.K[0, 0] * res.X[0, 0])
            sat = (res.X[0, 0] > 0 and res.Mdec[0, 0] > 0
                   and scalar_block_is_nd(h, ell, float(res.Mdec[0, 0]), float(mu)))
            solver_rows.append({"mu": float(mu), "status": "feasible", "oracle_ok": bool(sat),
                                "grid_feasible": bool(oracle_feasible_at[float(mu)])})
        except Infeasible:
            solver_rows.append({"mu": float(mu), "status": "infeasible",
                                "oracle_ok": not oracle_feasible_at[float(mu)],
                                "grid_feasible": bool(oracle_feasible_at[float(mu)])})
    # sign-indefinite pair: no common certificate exists
    pair = HessianPolytope((np.array([[1.0]]), np.array([[-1.0]])), allow_indefinite=True)
    try:
        solve(SynthesisProblem(pair, 4.0, objective="feasibility"), backend)
        pair_infeasible = False
    except Infeasible:
        pair_infeasible = True
    pair_grid_feasible = any(
        x > 0 and m > 0 and scalar_block_is_nd(1.0, ell, m, 4.0) and scalar_block_is_nd(-1.0, ell, m, 4.0)
        for ell in ells for m in ms for x in xs)
    elapsed = time.perf_counter() - t0
    passed = (count >= 10_000 and disagreements == 0 and all(r["oracle_ok"] for r in solver_rows)
              and pair_infeasible and not pair_grid_feasible and elapsed < ORACLE_RUNTIME)
    return {"passed": bool(passed), "grid_points": count, "disagreements": disagreements,
            "solver_runs": solver_rows, "indefinite_pair_infeasible": pair_infeasible,
            "runtime_s": elapsed}


def _scalar_result(x, m, ell, mu) -> SynthesisResult:
    X = np.array([[x]])
    return SynthesisResult.from_decision(X, np.array([[m]]), np.array([[ell]]), mu)


def run_all(backend=None, progress=None, keep: dict | None = None) -> dict:
    """Run every criterion; ``progress`` is called with each criterion name.

    When ``keep`` is a dict it receives the synthesis result and full-loop traces.
    """
    out = {}
    say = progress or (lambda name: None)
    say("criterion 1")
    c1 = criterion_1(backend)
    res = c1.pop("result", None)
    out["1 synthesis reproduction"] = c1
    if res is None:
        return out
    traces = {}
    if keep is not None:
        keep["result"] = res
        keep["traces"] = traces
    say("criterion 2")
    out["2 average finite-time convergence"] = criterion_2(res)
    say("criterion 3")
    out["3 full-system convergence"] = criterion_3(res.K, traces)
    say("criterion 4")
    out["4 averaging order"] = criterion_4(res.K)
    say("criterion 5")
    out["5 dither identities"] = criterion_5()
    say("criterion 6")
    out["6 scalar oracle equivalence"] = criterion_6(backend)
    return out

