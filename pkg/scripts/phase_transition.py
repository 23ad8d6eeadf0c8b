"""Empirical recovery probability over a (pilot length, RIS size) grid.

Prints the success matrix, rows indexed by RIS size.
"""
import argparse
from pathlib import Path

import numpy as np

from risaccess.config import load_config
from risaccess.experiments import phase_transition_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="desk", choices=["desk", "paper"])
    ap.add_argument("--lengths", default="20,40,60")
    ap.add_argument("--ris-sizes", default="4,9,16")
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/phase")
    args = ap.parse_args()

    Ls = [int(v) for v in args.lengths.split(",")]
    Ns = [int(v) for v in args.ris_sizes.split(",")]
    rep = phase_transition_grid(load_config(None, args.profile), "L", Ls, "N", Ns,
                                trials_per_cell=args.trials, workers=args.workers)
    success = np.array(rep.extra["success"])
    print("N \\ L " + "".join(f"{L:7d}" for L in Ls))
    for N, row in zip(Ns, success):
        print(f"{N:5d} " + "".join(f"{p:7.2f}" for p in row))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out / "report.csv")
    rep.write_json(out / "report.json")


if __name__ == "__main__":
    main()
