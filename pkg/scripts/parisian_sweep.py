#!/usr/bin/env python3
"""Sweep the Parisian grace period and watch ruin deflate toward the limit.

For a grid of grace periods zeta the script solves the Parisian fixed point
and tabulates the ruin probability from each starting state at a few initial
capitals, together with the classical (zeta = 0) value and the kernel
spectral radius.  Small zeta must reproduce the classical probabilities;
large zeta forgives longer excursions and the probability drops.

Usage:
    python3 scripts/parisian_sweep.py --model models/model_b.json --x 0,1,2
"""

from __future__ import annotations

import argparse
import csv
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from mmruin.cli import parse_model_file
from mmruin.parisian import parisian_solution
from mmruin.ruin import ruin_probability


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", default="models/model_b.json")
    parser.add_argument("--x", default="0,1,2", help="comma-separated capitals")
    parser.add_argument("--zetas", default="0.01,0.05,0.1,0.25,0.5,1,2,4")
    parser.add_argument("--out", default="results/parisian_sweep.csv")
    args = parser.parse_args(argv)

    model = parse_model_file(args.model)
    xs = [float(tok) for tok in args.x.split(",")]
    zetas = [float(tok) for tok in args.zetas.split(",")]

    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    header = ["zeta", "x", "kernel_radius"]
    header += [f"parisian_{i + 1}" for i in range(model.n_states)]
    header += [f"classical_{i + 1}" for i in range(model.n_states)]

    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for zeta in zetas:
            sol = parisian_solution(model, zeta)
            radius = sol.diagnostics["spectral_radius"]
            for x in xs:
                par = 1.0 - sol.evaluate(x)
                cls = ruin_probability(model, x)
                writer.writerow([zeta, x, f"{radius:.6f}"]
                                + [f"{v:.10f}" for v in par]
                                + [f"{v:.10f}" for v in cls])
            print(f"zeta={zeta:<6g} radius={radius:.4f} "
                  f"ruin(x={xs[0]:g})={1.0 - sol.evaluate(xs[0])}")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
