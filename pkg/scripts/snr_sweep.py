"""Channel and activity error against SNR.

    python scripts/snr_sweep.py --trials 20 --out runs/snr
"""
import argparse
from pathlib import Path

from risaccess.config import load_config
from risaccess.experiments import SweepSpec, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="desk", choices=["desk", "paper"])
    ap.add_argument("--config")
    ap.add_argument("--snr", default="0,5,10,15,20,25,30")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="runs/snr")
    args = ap.parse_args()

    cfg = load_config(args.config, args.profile)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    values = [float(v) for v in args.snr.split(",")]
    rep = run_sweep(SweepSpec("snr_db", values, args.trials, genie=True), cfg, workers=args.workers)

    print(f"{'SNR':>6} {'NMSE(G)':>9} {'genie':>9} {'NMSE(h)':>9} {'genie':>9}")
    for v, a in zip(values, rep.aggregates):
        print(f"{v:6.1f} {a['nmse_g_db_mean']:9.2f} {a['genie_nmse_g_db_mean']:9.2f} "
              f"{a['avg_nmse_h_db_mean']:9.2f} {a['genie_avg_nmse_h_db_mean']:9.2f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out / "report.csv")
    rep.write_json(out / "report.json")


if __name__ == "__main__":
    main()
