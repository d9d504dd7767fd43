"""Command-line front end.

Usage::

    uvesc synthesize --config exp.json [--out DIR]
    uvesc verify --config exp.json --gain synthesis.json [--out DIR]
    uvesc simulate --config exp.json --mode full|average [--seed N] [--omega-scale X]
                   [--gain FILE] [--out DIR]
    uvesc reproduce-paper [--out DIR]

Exit codes: 0 success, 1 verification failed, 2 infeasible, 3 solver and
verifier disagree, 4 configuration error, 5 numerical error.

Every JSON report has a single ``header`` field holding the timestamp and
wall-clock timings; everything else is deterministic for a fixed config.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .errors import (DomainError, Infeasible, NumericalError, SolverFailure, ToleranceViolation,
                     UvescError)
from .simulator import average_in_theta, measure_settling, simulate_average, simulate_full
from .synthesis import SynthesisProblem, SynthesisResult, certify_gain, reaching_time_bound, solve
from .verifier import check_certificate, check_descent_condition, check_finite_time_decrease

log = logging.getLogger("uvesc")

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_INFEASIBLE = 2
EXIT_DISAGREE = 3
EXIT_CONFIG = 4
EXIT_NUMERICAL = 5

TAIL_FRACTION = 0.2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _atomic(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload: dict, timings: dict | None = None) -> Path:
    """Write ``payload`` atomically with a one-field header."""
    path = Path(path)
    header = {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    if timings:
        header["runtime_s"] = timings
    doc = {"header": header, **_jsonable(payload)}
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"

    def write(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)

    _atomic(path, write)
    return path


def write_trace(path, trace) -> Path:
    path = Path(path)
    _atomic(path, trace.to_csv)
    return path


def _pop_runtimes(obj, prefix="", sink=None):
    """Move every ``runtime_s`` entry of a nested report into ``sink``."""
    sink = {} if sink is None else sink
    if isinstance(obj, dict):
        if "runtime_s" in obj:
            sink[prefix or "total"] = obj.pop("runtime_s")
        for k, v in obj.items():
            _pop_runtimes(v, f"{prefix}/{k}" if prefix else str(k), sink)
    return sink


# gain files ------------------------------------------------------------------

def load_gain(path, n: int) -> dict:
    """Read a gain file: a bare ``K`` matrix, ``{"K": ...}``, or a synthesis report.

    Returns a dict with ``K`` and, if present, ``X``, ``Mdec`` and ``rho``.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read gain file {path}: {exc}") from exc
    if isinstance(data, dict) and "synthesis" in data:
        data = data["synthesis"]
    if isinstance(data, list):
        data = {"K": data}
    if not isinstance(data, dict) or "K" not in data:
        raise ConfigError("gain file must hold a matrix or an object with a 'K' entry")
    out = {}
    try:
        for key in ("K", "X", "Mdec"):
            if data.get(key) is not None:
                a = np.asarray(data[key], dtype=float)
                if a.shape != (n, n) or not np.all(np.isfinite(a)):
                    raise ConfigError(f"{key} in gain file must be a finite {n}x{n} matrix")
                out[key] = a
        if data.get("rho") is not None:
            out["rho"] = float(data["rho"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed gain file: {exc}") from exc
    if ("X" in out) != ("Mdec" in out):
        raise ConfigError("gain file must give both X and Mdec or neither")
    return out


def _result_from_gain(gain: dict, cfg: ExperimentConfig) -> SynthesisResult:
    X = gain["X"]
    return SynthesisResult.from_decision(X, gain["Mdec"], gain["K"] @ X, cfg.mu, gain.get("rho"),
                                         cfg.varphi, "loaded")


# commands --------------------------------------------------------------------

def _synthesize(cfg: ExperimentConfig) -> SynthesisResult:
    return solve(SynthesisProblem(cfg.polytope, cfg.mu, cfg.varphi))


def _full_report(result: SynthesisResult, cfg: ExperimentConfig) -> dict:
    cert = check_certificate(result, cfg.polytope, cfg.mu, varphi=cfg.varphi)
    descent = check_descent_condition(result.K, result.P, result.Qmat, cfg.mu, cfg.polytope)
    decrease = check_finite_time_decrease(result.K, result.P, cfg.polytope, Qmat=result.Qmat)
    passed = cert.passed and descent.passed and decrease.passed
    return {"passed": passed, "certificate": cert.to_dict(), "descent": descent.to_dict(),
            "finite_time_decrease": decrease.to_dict()}


def cmd_synthesize(cfg: ExperimentConfig, out: Path) -> int:
    t0 = time.perf_counter()
    try:
        result = _synthesize(cfg)
    except Infeasible as exc:
        write_json(out / "synthesis.json", {"status": "infeasible", "detail": str(exc)})
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except ToleranceViolation as exc:
        payload = {"status": "verifier rejected", "detail": str(exc)}
        if exc.report is not None:
            payload["certificate"] = exc.report.to_dict()
        write_json(out / "synthesis.json", payload)
        log.error("verifier rejected the solver output: %s", exc)
        return EXIT_DISAGREE
    report = {"status": "feasible", "synthesis": result.to_dict()}
    write_json(out / "synthesis.json", report, {"synthesize": time.perf_counter() - t0})
    write_json(out / "gain.json", {"K": result.K})
    log.info("rho = %.6g, K = %s", result.rho, result.K.tolist())
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, gain_path, out: Path) -> int:
    gain = load_gain(gain_path, cfg.polytope.dim)
    if "X" in gain:
        result = _result_from_gain(gain, cfg)
        source = "given certificate"
    else:
        try:
            result = certify_gain(cfg.polytope, cfg.mu, gain["K"])
        except (Infeasible, ToleranceViolation) as exc:
            write_json(out / "verify.json",
                       {"passed": False, "source": "certificate search", "detail": str(exc)})
            log.error("no certificate for the given gain: %s", exc)
            return EXIT_VERIFY_FAIL
        source = "certificate search"
    report = {"source": source, **_full_report(result, cfg)}
    write_json(out / "verify.json", report)
    log.info("verification %s", "passed" if report["passed"] else "FAILED")
    return EXIT_OK if report["passed"] else EXIT_VERIFY_FAIL


def _resolve_gain(cfg: ExperimentConfig, gain_path):
    """Gain and, when available, its certificate (``P``, ``Q``)."""
    if gain_path is not None:
        gain = load_gain(gain_path, cfg.polytope.dim)
        if "X" in gain:
            return gain["K"], _result_from_gain(gain, cfg)
        return gain["K"], None
    if cfg.gain is not None:
        return cfg.gain, None
    result = _synthesize(cfg)
    return result.K, result


def cmd_simulate(cfg: ExperimentConfig, mode: str, out: Path, gain_path=None) -> int:
    t0 = time.perf_counter()
    K, result = _resolve_gain(cfg, gain_path)
    H, alpha = cfg.map_hessian()
    mp = cfg.map_spec()
    summary = {"mode": mode, "K": K, "H": H, "alpha": alpha,
               "base_frequency": cfg.dither.base_frequency}
    if mode == "full":
        trace = simulate_full(cfg.sim_config(K))
        summary["dt"] = trace.meta["dt"]
        summary["demodulation"] = cfg.demodulation
    else:
        g0 = H @ (cfg.theta0 - cfg.thetastar)
        if not np.any(g0):
            raise ConfigError("theta0 equals thetastar; the average loop starts at rest")
        raw, reach = simulate_average(K, H, g0, dt=cfg.average_dt, t_end=cfg.t_end,
                                      uv_epsilon=cfg.uv_epsilon, record_stride=cfg.record_stride)
        trace = average_in_theta(raw, mp)
        summary["reach_time"] = reach
        summary["dt"] = cfg.average_dt
        if result is not None:
            V0, bound = reaching_time_bound(result.P, result.Qmat, g0)
            summary.update({"V0": V0, "bound": bound, "rho": result.rho,
                            "bound_respected": reach is not None and reach <= bound + cfg.average_dt})
        else:
            summary.update({"bound": None, "bound_respected": None})
    if not (np.all(np.isfinite(trace.theta_hat)) and np.all(np.isfinite(trace.y))):
        raise NumericalError("non-finite values in the trace")
    err = np.linalg.norm(trace.theta_hat - cfg.thetastar, axis=1)
    yerr = np.abs(trace.y - cfg.Qstar)
    tail = trace.times >= (1.0 - TAIL_FRACTION) * cfg.t_end - 1e-12
    # the average loop stops inside the eps ball; its last sample stands for the rest
    tail[-1] = True
    summary.update({
        "t_end": cfg.t_end,
        "samples": len(trace),
        "final_theta_error": float(err[-1]),
        "final_y_error": float(yerr[-1]),
        "tail_max_theta_error": float(err[tail].max()),
        "tail_max_y_error": float(yerr[tail].max()),
        "settle_band": cfg.settle_band,
        "settling_time": measure_settling(trace, cfg.thetastar, cfg.settle_band),
    })
    write_trace(out / f"trace_{mode}.csv", trace)
    write_json(out / f"summary_{mode}.json", summary, {"simulate": time.perf_counter() - t0})
    log.info("final |theta_hat - theta*| = %.4g, |y - Q*| = %.4g",
             summary["final_theta_error"], summary["final_y_error"])
    return EXIT_OK


def cmd_reproduce_paper(out: Path) -> int:
    from . import experiments as ex

    t0 = time.perf_counter()
    keep = {}
    crit = ex.run_all(progress=lambda name: log.info("running %s", name), keep=keep)
    cfg = ex.example_config()
    result = keep.get("result")
    code = EXIT_OK
    if result is None:
        code = EXIT_INFEASIBLE
    else:
        write_json(out / "synthesis.json", {"status": "feasible", "synthesis": result.to_dict()})
        report = _full_report(result, cfg)
        write_json(out / "certificate.json", report)
        if not report["passed"]:
            code = EXIT_VERIFY_FAIL
        for seed, trace in sorted(keep["traces"].items()):
            write_trace(out / f"trace_full_seed{seed}.csv", trace)
    product = ex.H0 @ ex.REFERENCE_GAIN
    write_json(out / "reference_gain_diagnostic.json", {
        "K_reference": ex.REFERENCE_GAIN, "H0_times_K_reference": product,
        "target": -ex.REFERENCE_GAIN_SCALE * np.eye(2),
        "residual_inf_norm": ex.reference_gain_residual(), "tolerance": ex.REFERENCE_GAIN_TOL})
    timings = _pop_runtimes(crit)
    timings["total"] = time.perf_counter() - t0
    matrix = {name: bool(c["passed"]) for name, c in crit.items()}
    write_json(out / "acceptance.json", {"passed": matrix, "details": crit}, timings)
    for name, ok in matrix.items():
        log.info("%-40s %s", name, "PASS" if ok else "FAIL")
    if code == EXIT_OK and not all(matrix.values()):
        code = EXIT_VERIFY_FAIL
    return code


# entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uvesc", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, metavar="PATH", help="experiment JSON")
        p.add_argument("--out", metavar="DIR", help="output directory (default: config output.dir)")

    common(sub.add_parser("synthesize", help="solve the min-rho LMI program"))
    p = sub.add_parser("verify", help="check a gain or a synthesis report")
    common(p)
    p.add_argument("--gain", required=True, metavar="FILE", help="gain or synthesis JSON")
    p = sub.add_parser("simulate", help="simulate the full or the average loop")
    common(p)
    p.add_argument("--mode", choices=("full", "average"), default="full")
    p.add_argument("--seed", type=int, metavar="N", help="sample the map Hessian with this seed")
    p.add_argument("--omega-scale", type=float, metavar="X", help="multiply the base frequency")
    p.add_argument("--gain", metavar="FILE", help="use this gain instead of synthesizing")
    common(sub.add_parser("reproduce-paper", help="run the two-input example end to end"),
           config=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "reproduce-paper":
            return cmd_reproduce_paper(Path(args.out or "reproduction_bundle"))
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg = cfg.with_seed(args.seed)
        if getattr(args, "omega_scale", None) is not None:
            cfg = cfg.with_omega_scale(args.omega_scale)
        out = Path(args.out or cfg.out_dir)
        if args.command == "synthesize":
            return cmd_synthesize(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, args.gain, out)
        return cmd_simulate(cfg, args.mode, out, args.gain)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except Infeasible as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except ToleranceViolation as exc:
        log.error("verifier rejected the solver output: %s", exc)
        return EXIT_DISAGREE
    except DomainError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (NumericalError, SolverFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERICAL
    except UvescError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
