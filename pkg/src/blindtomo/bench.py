"""Experiment harness: seeded trial orchestration, sweeps over m, CSV output.

Configs are plain dicts validated against a schema; every experiment kind
ships defaults mirroring the numerical-study recipes.  Trials are
independent and fan out to a process pool; per-trial randomness is derived
from the master seed with stable hashing, so the output is byte-identical
for a fixed config regardless of worker count (wall-clock timing can be
suppressed with record_wall_time=false for golden-file comparisons).
"""

from __future__ import annotations

import concurrent.futures
import copy
import json
import math
import time

import numpy as np

from . import __version__
from . import diagnostics as diag
from . import measurements as meas
from . import recovery
from . import signals
from .projections import project_omega_hat, project_rank

CSV_HEADER = ("experiment,m,trial,solver,frob_error,trace_norm_error,"
              "calib_l2_error,success,iterations,termination,wall_ms")

EXPERIMENTS = ("gue-phase", "pauli-blind", "coherent-als", "rip-probe",
               "unit-oracles")


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


_BASE_DEFAULTS = {
    "experiment": None,
    "n": 10, "d": 16, "s": 3, "r": 1,
    "xi_model": "gaussian-unit", "xi_scale": 0.1,
    "xi_mean": 0.2, "xi_std": 0.05,
    "ensemble": "gue",
    "m_values": [100, 200, 300],
    "trials_per_m": 50,
    "noise_kind": "none", "noise_samples": 10**8,
    "solvers": ["sdt"],
    "sdt": {
        "max_iters": 600, "gamma_break": 1e-5,
        "rank_mode": "signed-psd", "use_tangent_projection": True,
        "step_mode": "adaptive-per-block",
    },
    "als": {
        "max_iters": 1000, "gamma_break": 1e-5,
        "reinit_period": 50, "max_reinits": 10,
        "xi_inner_iters": 200, "rho_inner_iters": 150,
    },
    "success_threshold": 1e-3,
    "rip_samples": 100,
    "master_seed": 0,
    "record_wall_time": True,
    "workers": 1,
}

_EXPERIMENT_DEFAULTS = {
    "gue-phase": {
        "ensemble": "gue", "n": 10, "d": 16, "s": 3, "r": 1,
        "xi_model": "gaussian-unit",
        "m_values": [80, 120, 160, 200, 240, 320, 420, 520, 640, 800],
        "trials_per_m": 50,
        "solvers": ["sdt", "dt", "informed-dt"],
        "sdt": {
            "max_iters": 2500, "gamma_break": 1e-5,
            "rank_mode": "signed-psd", "use_tangent_projection": True,
            "step_mode": "adaptive-per-block",
        },
    },
    "pauli-blind": {
        "ensemble": "pauli", "n": 10, "d": 8, "s": 3, "r": 1,
        "xi_model": "leading-one-scaled", "xi_scale": 0.1,
        "noise_kind": "shot", "noise_samples": 10**8,
        "m_values": [60, 120, 180, 240],
        "trials_per_m": 30,
        "solvers": ["sdt", "standard"],
    },
    "coherent-als": {
        "ensemble": "coherent-pauli", "n": 7, "d": 16, "s": 2, "r": 1,
        "xi_model": "shifted-normal", "xi_mean": 0.2, "xi_std": 0.05,
        "m_values": [100, 200, 300],
        "trials_per_m": 50,
        "solvers": ["als", "standard"],
    },
    "rip-probe": {
        "ensemble": "gue", "n": 4, "d": 4, "s": 2, "r": 1,
        "m_values": [100, 200, 400],
        "trials_per_m": 20,
        "solvers": ["rip-probe"],
    },
    "unit-oracles": {
        "n": 4, "d": 4, "s": 2, "r": 1,
        "m_values": [8],
        "trials_per_m": 1,
        "solvers": ["oracle"],
    },
}

_SOLVERS = ("sdt", "dt", "informed-dt", "standard", "als", "rip-probe",
            "oracle")


def default_config(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {experiment!r}")
    cfg = copy.deepcopy(_BASE_DEFAULTS)
    cfg.update(copy.deepcopy(_EXPERIMENT_DEFAULTS[experiment]))
    cfg["experiment"] = experiment
    return cfg


def merge_config(base: dict, overrides: dict, path: str = "") -> dict:
    """Recursive merge with unknown-key detection (path in the error)."""
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        full = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{full}: unknown configuration field")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{full}: expected an object")
            out[key] = merge_config(base[key], value, path=full + ".")
        else:
            out[key] = value
    return out


def validate_config(cfg: dict) -> dict:
    def fail(field, msg):
        raise ConfigError(f"{field}: {msg}")

    if cfg["experiment"] not in EXPERIMENTS:
        fail("experiment", f"unknown experiment {cfg['experiment']!r}")
    ms = cfg["m_values"]
    if not ms or list(ms) != sorted(ms) or len(set(ms)) != len(ms):
        fail("m_values", "must be non-empty and strictly ascending")
    if any(int(m) < 1 for m in ms):
        fail("m_values", "entries must be >= 1")
    if int(cfg["trials_per_m"]) < 1:
        fail("trials_per_m", "must be >= 1")
    if not 1 <= int(cfg["s"]) <= int(cfg["n"]):
        fail("s", "need 1 <= s <= n")
    if not 1 <= int(cfg["r"]) <= int(cfg["d"]):
        fail("r", "need 1 <= r <= d")
    for solver in cfg["solvers"]:
        if solver not in _SOLVERS:
            fail("solvers", f"unknown solver {solver!r}")
    if cfg["ensemble"] in ("pauli", "coherent-pauli"):
        q = int(cfg["d"]).bit_length() - 1
        if 2 ** q != int(cfg["d"]):
            fail("d", "Pauli ensembles need d = 2^q")
    if cfg["xi_model"] not in signals.XI_MODELS:
        fail("xi_model", f"unknown xi model {cfg['xi_model']!r}")
    if cfg["noise_kind"] not in ("none", "shot"):
        fail("noise_kind", "must be 'none' or 'shot'")
    try:
        _sdt_config(cfg)
        _als_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"sdt/als: {exc}") from exc
    return cfg


def _sdt_config(cfg, **over) -> recovery.SdtConfig:
    c = cfg["sdt"]
    kw = dict(s=int(cfg["s"]), r=int(cfg["r"]),
              max_iters=int(c["max_iters"]),
              gamma_break=float(c["gamma_break"]),
              rank_mode=c["rank_mode"],
              use_tangent_projection=bool(c["use_tangent_projection"]),
              step_mode=c["step_mode"])
    kw.update(over)
    return recovery.SdtConfig(**kw)


def _als_config(cfg) -> recovery.AlsConfig:
    c = cfg["als"]
    return recovery.AlsConfig(
        s=int(cfg["s"]), r=int(cfg["r"]),
        max_iters=int(c["max_iters"]), gamma_break=float(c["gamma_break"]),
        reinit_period=int(c["reinit_period"]),
        max_reinits=int(c["max_reinits"]),
        xi_inner_iters=int(c["xi_inner_iters"]),
        rho_inner_iters=int(c["rho_inner_iters"]))


def _instance_spec(cfg, m, trial) -> signals.InstanceSpec:
    return signals.InstanceSpec(
        n=int(cfg["n"]), d=int(cfg["d"]), s=int(cfg["s"]), r=int(cfg["r"]),
        xi_model=cfg["xi_model"], xi_scale=float(cfg["xi_scale"]),
        xi_mean=float(cfg["xi_mean"]), xi_std=float(cfg["xi_std"]),
        seed=signals.derive_seed(int(cfg["master_seed"]),
                                 cfg["experiment"], m, trial, "instance"))


def _make_ensemble(cfg, m, rng):
    kind = cfg["ensemble"]
    n, d = int(cfg["n"]), int(cfg["d"])
    if kind == "gue":
        return meas.gue_ensemble(n, m, d, rng)
    if kind == "gaussian":
        return meas.gaussian_ensemble(n, m, d, rng)
    q = d.bit_length() - 1
    if kind == "pauli":
        return meas.subsampled_pauli_ensemble(n, m, q, rng)
    if kind == "coherent-pauli":
        return meas.coherent_error_pauli_ensemble(m, q, rng)
    raise ConfigError(f"ensemble: unknown kind {kind!r}")


def _row(cfg, m, trial, solver, *, frob=math.nan, trace=math.nan,
         calib=math.nan, success=False, iterations=0, termination="n/a",
         wall_ms=0.0):
    return {
        "experiment": cfg["experiment"], "m": m, "trial": trial,
        "solver": solver, "frob_error": frob, "trace_norm_error": trace,
        "calib_l2_error": calib, "success": bool(success),
        "iterations": int(iterations), "termination": termination,
        "wall_ms": wall_ms if cfg["record_wall_time"] else 0.0,
    }


def _extraction_metrics(estimate, xi, rho, reference):
    """(trace_norm, calib) of a block-signal estimate; nan when degenerate."""
    try:
        rho_hat, xi_hat = signals.extract_estimate(estimate, reference)
    except signals.DegenerateEstimateError:
        return math.nan, math.nan
    return (diag.trace_norm_error(rho_hat, rho),
            diag.calibration_l2_error(xi_hat, xi))


def run_trial(cfg: dict, m: int, trial: int) -> list[dict]:
    """All solver rows for one (m, trial) cell. Pure given (cfg, m, trial)."""
    experiment = cfg["experiment"]
    if experiment == "rip-probe":
        return _run_rip_trial(cfg, m, trial)
    if experiment == "unit-oracles":
        return _run_oracle_trial(cfg, m, trial)

    spec = _instance_spec(cfg, m, trial)
    rng = np.random.default_rng(spec.seed)
    ens = _make_ensemble(cfg, m, rng)
    xi, rho, x_true = signals.random_instance(spec, rng)
    y = meas.apply(ens, x_true)
    if cfg["noise_kind"] == "shot":
        noise = meas.NoiseModel("shot", int(cfg["noise_samples"]))
        y = meas.add_shot_noise(y, ens, noise, rng)

    threshold = float(cfg["success_threshold"])
    reference = int(np.argmax(np.abs(xi)))
    rows = []
    for solver in cfg["solvers"]:
        start = time.perf_counter()
        if solver == "sdt":
            report = recovery.sdt(y, ens, _sdt_config(cfg))
            frob = float(np.linalg.norm(report.estimate - x_true))
            trace, calib = _extraction_metrics(report.estimate, xi, rho,
                                               reference)
        elif solver == "dt":
            report = recovery.dt(y, ens, _sdt_config(cfg))
            frob = float(np.linalg.norm(report.estimate - x_true))
            trace, calib = _extraction_metrics(report.estimate, xi, rho,
                                               reference)
        elif solver == "informed-dt":
            support = tuple(int(k) for k in np.nonzero(xi)[0])
            report = recovery.sdt(y, ens, _sdt_config(
                cfg, s=len(support), rank_mode="plain-rank",
                support_restriction=support))
            frob = float(np.linalg.norm(report.estimate - x_true))
            trace, calib = _extraction_metrics(report.estimate, xi, rho,
                                               reference)
        elif solver == "standard":
            report = recovery.standard_tomography(
                y, ens.block(0), _sdt_config(cfg, rank_mode="psd"))
            block = report.estimate[0]
            frob = float(np.linalg.norm(block - rho))
            try:
                t = float(np.real(np.trace(block)))
                state = signals.project_to_state(block / t) if abs(t) > 1e-12 \
                    else None
            except signals.DegenerateEstimateError:
                state = None
            trace = diag.trace_norm_error(state, rho) if state is not None \
                else math.nan
            calib = math.nan
        elif solver == "als":
            solver_rng = signals.spawn_rng(int(cfg["master_seed"]),
                                           experiment, m, trial, solver)
            report = recovery.als_bt(y, ens, _als_config(cfg), solver_rng)
            rho_hat, xi_hat = report.estimate
            frob = float(np.linalg.norm(signals.assemble_signal(xi_hat, rho_hat)
                                        - x_true))
            trace = diag.trace_norm_error(rho_hat, rho)
            calib = diag.calibration_l2_error(xi_hat, xi)
        else:
            raise ConfigError(f"solvers: solver {solver!r} not valid for "
                              f"experiment {experiment!r}")
        wall_ms = 1e3 * (time.perf_counter() - start)
        rows.append(_row(cfg, m, trial, solver, frob=frob, trace=trace,
                         calib=calib, success=frob < threshold,
                         iterations=report.iterations,
                         termination=report.termination, wall_ms=wall_ms))
    return rows


def _run_rip_trial(cfg, m, trial):
    seed = signals.derive_seed(int(cfg["master_seed"]), "rip-probe", m, trial,
                               "instance")
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    ens = _make_ensemble(cfg, m, rng)
    delta = diag.rip_delta_lower_bound(ens, int(cfg["rip_samples"]),
                                       int(cfg["s"]), int(cfg["r"]), rng)
    wall_ms = 1e3 * (time.perf_counter() - start)
    return [_row(cfg, m, trial, "rip-probe", frob=delta,
                 success=delta < 0.5, iterations=int(cfg["rip_samples"]),
                 termination="converged", wall_ms=wall_ms)]


def _run_oracle_trial(cfg, m, trial):
    """Compact self-check battery: projection oracles and adjoint identity."""
    seed = signals.derive_seed(int(cfg["master_seed"]), "unit-oracles", m,
                               trial, "instance")
    rng = np.random.default_rng(seed)
    n, d, s, r = (int(cfg[k]) for k in "ndsr")
    rows = []

    start = time.perf_counter()
    ok = True
    for _ in range(50):
        x = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
        x = 0.5 * (x + x.conj().transpose(0, 2, 1))
        proj = project_omega_hat(x, s, r, "psd")
        dist = np.linalg.norm(x - proj)
        ok &= abs(dist - _brute_force_omega_hat_distance(x, s, r, "psd")) < 1e-10
    rows.append(_row(cfg, m, trial, "oracle:projection", frob=0.0,
                     success=ok, termination="converged",
                     wall_ms=1e3 * (time.perf_counter() - start)))

    start = time.perf_counter()
    ok = True
    for _ in range(10):
        ens = meas.gue_ensemble(n, m, d, rng)
        xs = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
        xs = 0.5 * (xs + xs.conj().transpose(0, 2, 1))
        yv = rng.standard_normal(m)
        lhs = float(meas.apply(ens, xs) @ yv)
        rhs = float(np.real(np.sum(np.conj(xs) * meas.adjoint(ens, yv))))
        ok &= abs(lhs - rhs) < 1e-8 * max(1.0, abs(lhs))
    rows.append(_row(cfg, m, trial, "oracle:adjoint", frob=0.0,
                     success=ok, termination="converged",
                     wall_ms=1e3 * (time.perf_counter() - start)))
    return rows


def _brute_force_omega_hat_distance(x, s, r, mode):
    """Exhaustive-support oracle distance to the sparse de-mixing set."""
    import itertools
    n = x.shape[0]
    projected = np.stack([project_rank(x[k], r, mode) for k in range(n)])
    best = np.inf
    for support in itertools.combinations(range(n), min(s, n)):
        cand = np.zeros_like(x)
        for k in support:
            cand[k] = projected[k]
        best = min(best, float(np.linalg.norm(x - cand)))
    return best


def run_experiment(cfg: dict) -> list[dict]:
    """Execute the full sweep; rows sorted by (m, trial, solver)."""
    cfg = validate_config(cfg)
    cells = [(m, t) for m in cfg["m_values"]
             for t in range(int(cfg["trials_per_m"]))]
    workers = int(cfg.get("workers", 1))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_trial_star,
                                   [(cfg, m, t) for m, t in cells]))
    else:
        chunks = [run_trial(cfg, m, t) for m, t in cells]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["m"], r["trial"], r["solver"]))
    return rows


def _run_trial_star(args):
    return run_trial(*args)


def aggregate(rows: list[dict]) -> list[dict]:
    """Per (solver, m): recovery rate and error medians."""
    if not rows:
        raise ValueError("cannot aggregate an empty result table")
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["solver"], row["m"]), []).append(row)
    summary = []
    for (solver, m), grp in sorted(groups.items()):
        summary.append({
            "experiment": grp[0]["experiment"], "solver": solver, "m": m,
            "trials": len(grp),
            "recovery_rate": float(np.mean([r["success"] for r in grp])),
            "median_frob_error": _nanmedian([r["frob_error"] for r in grp]),
            "median_trace_norm_error":
                _nanmedian([r["trace_norm_error"] for r in grp]),
            "median_calib_l2_error":
                _nanmedian([r["calib_l2_error"] for r in grp]),
        })
    return summary


def _nanmedian(values):
    arr = np.asarray(values, dtype=float)
    if np.all(np.isnan(arr)):
        return math.nan
    return float(np.nanmedian(arr))


def m50(summary: list[dict], solver: str) -> float:
    """First m where the solver's recovery rate crosses 0.5 (interpolated)."""
    pts = sorted((s["m"], s["recovery_rate"]) for s in summary
                 if s["solver"] == solver)
    if not pts:
        raise ValueError(f"no summary rows for solver {solver!r}")
    prev_m, prev_rate = pts[0]
    if prev_rate >= 0.5:
        return float(prev_m)
    for m, rate in pts[1:]:
        if rate >= 0.5:
            frac = (0.5 - prev_rate) / (rate - prev_rate)
            return float(prev_m + frac * (m - prev_m))
        prev_m, prev_rate = m, rate
    return math.inf


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".10g")
    return str(value)


def rows_to_csv(rows: list[dict]) -> str:
    header = CSV_HEADER.split(",")
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join(_fmt(row[col]) for col in header))
    return "\n".join(lines) + "\n"


def summary_to_csv(summary: list[dict]) -> str:
    cols = ["experiment", "solver", "m", "trials", "recovery_rate",
            "median_frob_error", "median_trace_norm_error",
            "median_calib_l2_error"]
    lines = [",".join(cols)]
    for row in summary:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def sidecar_json(cfg: dict) -> str:
    """Resolved-config sidecar so a run is exactly reconstructible."""
    return json.dumps({"version": __version__, "config": cfg},
                      indent=2, sort_keys=True) + "\n"
