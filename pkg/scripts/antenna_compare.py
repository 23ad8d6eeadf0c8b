"""Compare receive array sizes at a fixed SNR and pilot length."""
import argparse
from pathlib import Path

from risaccess.config import load_config
from risaccess.experiments import SweepSpec, run_sweep

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--profile", default="desk", choices=["desk", "paper"])
parser.add_argument("--antennas", default="8,16")
parser.add_argument("--snr", type=float, default=20.0)
parser.add_argument("--trials", type=int, default=40)
parser.add_argument("--workers", type=int, default=1)
parser.add_argument("--out", default="runs/antennas")

if __name__ == "__main__":
    args = parser.parse_args()
    cfg = load_config(None, args.profile).with_overrides(snr_db=args.snr)
    Ms = [int(m) for m in args.antennas.split(",")]
    rep = run_sweep(SweepSpec("M", Ms, args.trials, genie=False), cfg, workers=args.workers)
    for M, a in zip(Ms, rep.aggregates):
        print(f"M={M:3d}  p_M(cal)={a['p_m_cal']:.3f}  p_F(cal)={a['p_f_cal']:.3f}  "
              f"NMSE(G)={a['nmse_g_db_mean']:.2f} dB  NMSE(h)={a['avg_nmse_h_db_mean']:.2f} dB")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out / "report.csv")
    rep.write_json(out / "report.json")
