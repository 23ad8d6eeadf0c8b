"""Missed detection at a fixed false-alarm rate as the pilot length grows."""
import argparse
from pathlib import Path

from risaccess.config import load_config
from risaccess.experiments import SweepSpec, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profile", default="desk", choices=["desk", "paper"])
    ap.add_argument("--config")
    ap.add_argument("--lengths", default="30,45,60")
    ap.add_argument("--trials", type=int, default=40)
    ap.add_argument("--target-pf", type=float, default=0.1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/pilot")
    args = ap.parse_args()

    cfg = load_config(args.config, args.profile)
    lengths = [int(v) for v in args.lengths.split(",")]
    spec = SweepSpec("L", lengths, args.trials, genie=False, target_pf=args.target_pf)
    rep = run_sweep(spec, cfg, workers=args.workers)

    print("   L   p_F(cal)  p_M(cal)   AUC")
    for L, a in zip(lengths, rep.aggregates):
        print(f"{L:4d}   {a['p_f_cal']:8.3f}  {a['p_m_cal']:8.3f}  {a['auc_mean']:.4f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out / "report.csv")
    rep.write_json(out / "report.json")


if __name__ == "__main__":
    main()
