"""Seeded Monte-Carlo trials, parameter sweeps and phase-transition grids."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from risaccess import amp
from risaccess.channels import default_lambda_s, default_tau_s, make_scene
from risaccess.config import ConfigError, SystemConfig
from risaccess.metrics import (
    REPORT_COLUMNS, MetricReport, avg_nmse_h_db, detection_rates, genie_mmse_s, genie_mmse_x,
    is_success, nmse_db, roc_sweep,
)
from risaccess.model import SceneRealization, derive_rng, derive_seed


def code_version() -> str:
    try:
        from importlib.metadata import version

        return version("risaccess")
    except Exception:  # pragma: no cover - not installed
        return "0+unknown"


def estimator_priors(config: SystemConfig, scene: SceneRealization) -> amp.Priors:
    lam = default_lambda_s(config)
    tau_s = config.priors.tau_s if config.priors.tau_s is not None else default_tau_s(config, lam)
    return amp.Priors(lam, tau_s, config.lambda_alpha, scene.tau_h, scene.tau_n)


def amp_options(config: SystemConfig) -> amp.AmpOptions:
    a = config.amp
    return amp.AmpOptions(
        I_max=a.I_max, damping=a.damping, tol=a.tol, variance_floor=a.variance_floor,
        epsilon_threshold=a.epsilon_threshold, record_trajectory=a.record_trajectory,
        safeguard=a.safeguard, max_restarts=a.max_restarts,
    )


@dataclass
class TrialOutcome:
    report: MetricReport
    scene: SceneRealization | None = None
    result: amp.EstimationResult | None = None


def simulate_trial(config: SystemConfig, trial_index: int, genie: bool = False,
                   point: str = "") -> TrialOutcome:
    """Scene, estimate and metrics of one trial; the scene and the AMP
    initialization draw from independent streams derived from the root seed."""
    t0 = time.perf_counter()
    scene = make_scene(config, derive_rng(config.seed, trial_index, "scene"))
    priors = estimator_priors(config, scene)
    result = amp.run(scene.Y, scene.Q, scene.dictionaries, priors, amp_options(config),
                     rng=derive_rng(config.seed, trial_index, "amp"))
    support = scene.activity.support
    rep = MetricReport(point=point, trial=trial_index, seed=derive_seed(config.seed, trial_index, "scene"),
                       n_active=int(support.size), snr_db=scene.snr_db)
    rep.iterations, rep.converged, rep.diverged = result.iterations_run, result.converged, result.diverged
    rep.epsilon = result.epsilon
    if np.any(scene.G != 0):
        rep.nmse_g_db = nmse_db(scene.G, result.g_hat, True)
        rep.nmse_g_raw_db = nmse_db(scene.G, result.g_hat, False)
    if support.size:
        rep.avg_nmse_h_db = avg_nmse_h_db(scene.H, result.x_hat, support, True)
        rep.avg_nmse_h_raw_db = avg_nmse_h_db(scene.H, result.x_hat, support, False)
    rep.p_f, rep.p_m = detection_rates(scene.activity.alpha, result.activity_scores, result.epsilon)
    if 0 < support.size < config.K:
        rep.auc = roc_sweep(scene.activity.alpha, result.activity_scores).auc()
    rep.success = is_success(rep.nmse_g_db, rep.avg_nmse_h_db)
    if genie:
        _genie_metrics(config, scene, priors, rep)
    rep.scores = np.asarray(result.activity_scores)
    rep.alpha_true = np.asarray(scene.activity.alpha)
    rep.runtime_s = time.perf_counter() - t0
    return TrialOutcome(rep, scene, result)


def _genie_metrics(config, scene, priors, rep: MetricReport) -> None:
    d = scene.dictionaries
    support = scene.activity.support
    if support.size == 0 or not np.any(scene.G != 0):
        return
    mask = scene.s_true != 0 if scene.s_true is not None else None
    S = genie_mmse_s(scene.Y, scene.Q, scene.X, d.A_B, d.A_R, priors.tau_s, scene.tau_n, mask)
    rep.genie_nmse_g_db = nmse_db(scene.G, d.synthesize(S), True)
    X = genie_mmse_x(scene.Y, scene.Q, scene.G, support, scene.tau_h, scene.tau_n)
    rep.genie_avg_nmse_h_db = avg_nmse_h_db(scene.H, X, support, True)


def run_trial(config: SystemConfig, trial_index: int, genie: bool = False, point: str = "") -> MetricReport:
    return simulate_trial(config, trial_index, genie, point).report


def _safe_trial(args) -> MetricReport:
    config, trial_index, genie, point = args
    try:
        return run_trial(config, trial_index, genie, point)
    except Exception as exc:  # a failed trial is recorded, not fatal
        return MetricReport(point=point, trial=trial_index, seed=derive_seed(config.seed, trial_index, "scene"),
                            failed=True, error=f"{type(exc).__name__}: {exc}")


def _run_items(items: list, workers: int) -> list[MetricReport]:
    """Evaluate trials in order; results never depend on the worker count."""
    if workers <= 1 or len(items) <= 1:
        return [_safe_trial(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_safe_trial, items, chunksize=max(1, len(items) // (4 * workers))))


# ---------------------------------------------------------------------------
# sweeps


def apply_point(config: SystemConfig, parameter: str, value: Any) -> SystemConfig:
    """Config at one sweep point. ``N`` sets a square RIS (N1 = N2 = sqrt(N))."""
    if parameter == "N":
        side = math.isqrt(int(value))
        if side * side != int(value):
            raise ConfigError(f"N={value} is not a perfect square")
        return config.with_overrides(N1=side, N2=side)
    return config.with_overrides(**{parameter: value})


def point_label(parameter: str, value: Any) -> str:
    return f"{parameter}={value}"


@dataclass
class SweepSpec:
    parameter: str  # L, snr_db, M, N, K, lambda_alpha, or any config key
    values: Sequence[Any]
    trials_per_point: int = 20
    overrides: dict[str, Any] = field(default_factory=dict)
    target_pf: float = 0.1
    genie: bool = True

    def __post_init__(self):
        if len(self.values) == 0:
            raise ConfigError("sweep values must be nonempty")
        if self.trials_per_point < 1:
            raise ConfigError("trials_per_point must be >= 1")
        if not 0.0 < self.target_pf < 1.0:
            raise ConfigError("target_pf must lie in (0, 1)")

    def configs(self, base: SystemConfig) -> list[SystemConfig]:
        base = base.with_overrides(**self.overrides) if self.overrides else base
        return [apply_point(base, self.parameter, v) for v in self.values]


def calibrated_rates(reports: Sequence[MetricReport], target_pf: float) -> dict[str, float]:
    """Threshold set on the first half of the trials for ``p_f ~ target``,
    then p_f/p_m measured on the second half (pooled over devices)."""
    good = [r for r in reports if not r.failed and r.scores is not None]
    nan = float("nan")
    if not good:
        return {"threshold": nan, "p_f_cal": nan, "p_m_cal": nan}
    half = len(good) // 2
    cal, ev = (good[:half], good[half:]) if half else (good, good)
    s_cal = np.concatenate([r.scores for r in cal])
    a_cal = np.concatenate([r.alpha_true for r in cal])
    thr = roc_sweep(a_cal, s_cal, target_pf=target_pf).operating_threshold
    s_ev = np.concatenate([r.scores for r in ev])
    a_ev = np.concatenate([r.alpha_true for r in ev])
    p_f, p_m = detection_rates(a_ev, s_ev, thr)
    return {"threshold": thr, "p_f_cal": p_f, "p_m_cal": p_m}


NUMERIC_COLUMNS = (
    "n_active", "nmse_g_db", "nmse_g_raw_db", "avg_nmse_h_db", "avg_nmse_h_raw_db", "p_f", "p_m",
    "auc", "genie_nmse_g_db", "genie_avg_nmse_h_db", "iterations", "snr_db",
)


def aggregate(point: str, reports: Sequence[MetricReport], target_pf: float) -> dict[str, Any]:
    ok = [r for r in reports if not r.failed]
    out: dict[str, Any] = {"point": point, "trials": len(reports), "failed": len(reports) - len(ok),
                           "valid": bool(ok)}
    for col in NUMERIC_COLUMNS:
        vals = np.array([getattr(r, col) for r in ok], dtype=float)
        vals = vals[np.isfinite(vals)]
        out[f"{col}_mean"] = float(vals.mean()) if vals.size else float("nan")
        out[f"{col}_std"] = float(vals.std()) if vals.size else float("nan")
    out["diverged"] = int(sum(r.diverged for r in ok))
    out["success_rate"] = float(np.mean([r.success for r in ok])) if ok else float("nan")
    out.update(calibrated_rates(ok, target_pf))
    return out


@dataclass
class ExperimentReport:
    rows: list[MetricReport]
    aggregates: list[dict[str, Any]]
    provenance: dict[str, Any]
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(r.failed for r in self.rows)

    def aggregate_for(self, point: str) -> dict[str, Any]:
        for a in self.aggregates:
            if a["point"] == point:
                return a
        raise KeyError(point)

    def write_csv(self, path: str | Path) -> None:
        write_report_csv(self.rows, path)

    def write_json(self, path: str | Path) -> None:
        doc = {"provenance": self.provenance, "aggregates": self.aggregates, **self.extra}
        Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def write_report_csv(rows: Sequence[MetricReport], path: str | Path) -> None:
    """One row per trial; columns as in :data:`risaccess.metrics.REPORT_COLUMNS`."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REPORT_COLUMNS)
        for r in rows:
            row = r.to_row()
            wr.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    return obj


def provenance(config: SystemConfig, **extra) -> dict[str, Any]:
    return {"config_hash": config.config_hash(), "root_seed": config.seed,
            "code_version": code_version(), **extra}


def run_sweep(spec: SweepSpec, base: SystemConfig, workers: int = 1) -> ExperimentReport:
    configs = spec.configs(base)
    labels = [point_label(spec.parameter, v) for v in spec.values]
    items = [(cfg, t, spec.genie, lab) for cfg, lab in zip(configs, labels)
             for t in range(spec.trials_per_point)]
    rows = _run_items(items, workers)
    T = spec.trials_per_point
    aggs = [aggregate(lab, rows[i * T:(i + 1) * T], spec.target_pf) for i, lab in enumerate(labels)]
    prov = provenance(base, parameter=spec.parameter, values=list(spec.values), trials_per_point=T,
                      overrides=spec.overrides, target_pf=spec.target_pf)
    return ExperimentReport(rows, aggs, prov)


def phase_transition_grid(base: SystemConfig, x_param: str, x_values: Sequence[Any],
                          y_param: str, y_values: Sequence[Any], trials_per_cell: int = 30,
                          workers: int = 1) -> ExperimentReport:
    """Success fraction (both NMSEs at or below -30 dB) per (y, x) cell.

    ``report.extra["success"]`` is a ``len(y_values) x len(x_values)`` matrix.
    """
    if trials_per_cell < 1 or not x_values or not y_values:
        raise ConfigError("phase transition needs nonempty axes and >= 1 trial per cell")
    items, labels = [], []
    for yv in y_values:
        for xv in x_values:
            cfg = apply_point(apply_point(base, y_param, yv), x_param, xv)
            lab = f"{point_label(y_param, yv)};{point_label(x_param, xv)}"
            labels.append(lab)
            items += [(cfg, t, False, lab) for t in range(trials_per_cell)]
    rows = _run_items(items, workers)
    T = trials_per_cell
    aggs = [aggregate(lab, rows[i * T:(i + 1) * T], 0.1) for i, lab in enumerate(labels)]
    success = np.array([a["success_rate"] for a in aggs]).reshape(len(y_values), len(x_values))
    prov = provenance(base, x_param=x_param, x_values=list(x_values), y_param=y_param,
                      y_values=list(y_values), trials_per_cell=T)
    return ExperimentReport(rows, aggs, prov, extra={"success": success.tolist()})
