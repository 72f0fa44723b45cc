"""Desk-scale single-circle experiment: data, topological prior, MAP, Laplace samples, report.

Usage::

    python scripts/run_single_circle.py --out runs/single_circle [--mcmc] [--seed 1]

The MCMC stage (64 walkers x 900 sweeps) takes several hours on one core
and is skipped unless ``--mcmc`` is given.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from elastobayes.cli import main as cli
from elastobayes.shapes import read_shapes_csv

ROOT = Path(__file__).resolve().parents[1]


def stage(name, out, config, seed, *extra):
    t0 = time.perf_counter()
    code = cli(["--config", str(config), "--out", str(out), "--seed", str(seed), "-v", name, *extra])
    print(f"{name:8s} exit={code} {time.perf_counter() - t0:8.1f} s", flush=True)
    if code:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/single_circle"))
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "single_circle.ini")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--mcmc", action="store_true")
    args = ap.parse_args()

    for name in ("synth", "topo", "map", "laplace"):
        stage(name, args.out, args.config, args.seed)
    stage("report", args.out, args.config, args.seed, "--source", "laplace")
    if args.mcmc:
        stage("mcmc", args.out, args.config, args.seed)
        stage("report", args.out, args.config, args.seed, "--source", "chain")

    truth = read_shapes_csv(args.out / "truth_shapes.csv").blocks[0]
    nu = read_shapes_csv(args.out / "map_shapes.csv").blocks[0]
    meta = json.loads((args.out / "map_meta.json").read_text())
    print(f"truth  center=({truth[0]:.3f}, {truth[1]:.3f}) a0={truth[2]:.3f} mu={truth[-1]:.2f}")
    print(f"MAP    center=({nu[0]:.3f}, {nu[1]:.3f}) a0={nu[2]:.3f} mu={nu[-1]:.2f}")
    print(f"center error {np.hypot(*(nu[:2] - truth[:2])):.3f}, converged={meta['converged']}, "
          f"PDE solves {meta['n_solves']}")


if __name__ == "__main__":
    main()
