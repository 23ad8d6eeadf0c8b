"""Command-line front end: ``risaccess {simulate,sweep,phase-transition,selftest}``.

Exit codes: 0 success, 2 configuration error, 3 every trial failed
(``selftest`` returns 1 when a check fails).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from risaccess import amp
from risaccess.channels import dump_dictionaries
from risaccess.config import ConfigError, load_config, load_sweep_section
from risaccess.experiments import (
    ExperimentReport, SweepSpec, _jsonable, phase_transition_grid, provenance, run_sweep,
    simulate_trial, write_report_csv,
)

log = logging.getLogger("risaccess")

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED = 0, 2, 3


def _parse_value(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    return text


def _parse_list(text: str) -> list:
    return [_parse_value(t) for t in text.split(",") if t.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML file with flat dotted keys")
    p.add_argument("--profile", choices=("desk", "paper"), help="base profile (default: file's, else desk)")
    p.add_argument("--seed", type=int, help="64-bit root seed (overrides the config)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="extra config override, repeatable (e.g. amp.I_max=100)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="risaccess", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one trial with full dumps")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--genie", action="store_true", help="also compute the genie-aided bounds")
    p.add_argument("--trajectory", action="store_true", help="write trajectory.csv")

    p = sub.add_parser("sweep", help="Monte-Carlo sweep over one parameter")
    _common(p)
    p.add_argument("--param", help="swept parameter (L, snr_db, M, N, K, lambda_alpha, ...)")
    p.add_argument("--values", type=_parse_list, help="comma-separated values")
    p.add_argument("--trials", type=int, help="trials per point (default: config trials)")
    p.add_argument("--target-pf", type=float, help="false-alarm target for the calibrated threshold")
    p.add_argument("--no-genie", action="store_true")

    p = sub.add_parser("phase-transition", help="success-rate grid over two parameters")
    _common(p)
    p.add_argument("--x-param", default="L")
    p.add_argument("--x-values", type=_parse_list, required=False)
    p.add_argument("--y-param", default="N")
    p.add_argument("--y-values", type=_parse_list, required=False)
    p.add_argument("--trials", type=int, default=30, help="trials per cell")

    sub.add_parser("selftest", help="oracle and transcription checks")
    return ap


def _config(args):
    cfg = load_config(args.config, args.profile, fallback="desk")
    overrides = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = _parse_value(val)
    if args.seed is not None:
        overrides["seed"] = args.seed
    return cfg.with_overrides(**overrides) if overrides else cfg


def _finish(report: ExperimentReport, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    if report.all_failed:
        log.error("all trials failed; see the error column of %s", out / "report.csv")
        return EXIT_ALL_FAILED
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.trajectory:
        cfg = cfg.with_overrides(**{"amp.record_trajectory": True})
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        outcome = simulate_trial(cfg, args.trial, genie=args.genie)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("trial failed: %s", exc)
        return EXIT_ALL_FAILED
    rep, scene, res = outcome.report, outcome.scene, outcome.result
    write_report_csv([rep], out / "report.csv")
    doc = {"provenance": provenance(cfg, trial=args.trial), "metrics": rep.to_row(),
           "config": cfg.to_flat_dict()}
    (out / "report.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    if cfg.amp.record_trajectory:
        amp.write_trajectory(res, out / "trajectory.csv")
    dump_dictionaries(scene.dictionaries, out / "dictionaries.bin")
    np.savez_compressed(
        out / "estimates.npz", s_hat=res.s_hat, x_hat=res.x_hat, g_hat=res.g_hat,
        activity_scores=res.activity_scores, alpha_hat=res.alpha_hat, G=scene.G, H=scene.H,
        alpha=scene.activity.alpha, Y=scene.Y, Q=scene.Q,
    )
    print(f"nmse_g_db={rep.nmse_g_db:.2f} avg_nmse_h_db={rep.avg_nmse_h_db:.2f} "
          f"p_f={rep.p_f:.3f} p_m={rep.p_m:.3f} iterations={rep.iterations} diverged={rep.diverged}")
    return EXIT_ALL_FAILED if rep.failed else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    section = load_sweep_section(args.config)
    param = args.param or section.get("parameter")
    values = args.values if args.values is not None else section.get("values")
    if not param or not values:
        raise ConfigError("sweep needs --param/--values or sweep.parameter/sweep.values in the config")
    if isinstance(values, str):
        values = _parse_list(values)
    trials = args.trials or section.get("trials") or cfg.trials
    target = args.target_pf or section.get("target_pf", 0.1)
    spec = SweepSpec(param, list(values), int(trials), target_pf=float(target), genie=not args.no_genie)
    report = run_sweep(spec, cfg, workers=args.workers)
    for a in report.aggregates:
        print(f"{a['point']}: nmse_g={a['nmse_g_db_mean']:.2f} dB  avg_nmse_h={a['avg_nmse_h_db_mean']:.2f} dB  "
              f"p_f={a['p_f_cal']:.3f} p_m={a['p_m_cal']:.3f}  failed={a['failed']}")
    return _finish(report, args.out)


def cmd_phase_transition(args) -> int:
    cfg = _config(args)
    section = load_sweep_section(args.config)
    xv = args.x_values or section.get("x_values") or [20, 40, 60]
    yv = args.y_values or section.get("y_values") or [4, 9, 16]
    report = phase_transition_grid(cfg, args.x_param, xv, args.y_param, yv, args.trials, args.workers)
    print(f"success rate (rows {args.y_param}={yv}, cols {args.x_param}={xv}):")
    for y, row in zip(yv, report.extra["success"]):
        print(f"  {y}: " + " ".join(f"{v:.2f}" for v in row))
    return _finish(report, args.out)


def cmd_selftest(args) -> int:
    from risaccess.selftest import run_all

    ok = True
    for name, passed, detail in run_all():
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else 1


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep,
            "phase-transition": cmd_phase_transition, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
