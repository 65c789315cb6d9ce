"""Run a participation sweep config and print the communication table.

Default config is configs/desk_sweep.yaml (private logistic task, a grid
over p and beta). Outputs go under --output or $FEDNORMEC_OUTPUT_ROOT.
"""

import argparse
import os
from pathlib import Path

from fednormec.config import load_config
from fednormec.experiment import OUTPUT_ENV, read_metrics, run_sweep

DEFAULT = Path(__file__).resolve().parent.parent / "configs" / "desk_sweep.yaml"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?", default=str(DEFAULT))
    ap.add_argument("--output", default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    if args.output:
        os.environ[OUTPUT_ENV] = args.output

    root = run_sweep(load_config(args.config), seed=args.seed)
    rows = read_metrics(root / "communication.csv")
    last = {}
    for r in rows:
        last[r["cell"]] = r
    print(f"{'cell':24s} {'transmissions':>14s} {'min grad norm':>14s}")
    for cell, r in sorted(last.items(), key=lambda kv: float(kv[1]["min_grad_norm_mean"])):
        print(f"{cell:24s} {float(r['transmissions']):14.0f} {float(r['min_grad_norm_mean']):14.4g}")
    print(f"best cell: {min(last, key=lambda c: float(last[c]['min_grad_norm_mean']))}; "
          f"outputs in {root}")


if __name__ == "__main__":
    main()
