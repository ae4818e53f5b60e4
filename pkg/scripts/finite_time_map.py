#!/usr/bin/env python3
"""Map which finite-time estimator the dispatcher picks across (x, t).

The auto rule routes each (capital, horizon) pair to the diffusion-corrected
central regime, the large-deviations regime for steep velocities, or plain
simulation near the boundary.  The script grids (x, t), records the chosen
method and value, and prints a compact character map: S = central
refinement, H = large deviations, M = simulation.

Usage:
    python3 scripts/finite_time_map.py --model models/model_a.json
"""

from __future__ import annotations

import argparse
import csv
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from mmruin.asymptotics import finite_time_ruin
from mmruin.cli import parse_model_file

GLYPH = {"segerdahl": "S", "hoglund": "H", "mc": "M"}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", default="models/model_a.json")
    parser.add_argument("--out", default="results/finite_time_map.csv")
    parser.add_argument("--n", type=int, default=20_000,
                        help="paths per simulated cell")
    args = parser.parse_args(argv)

    model = parse_model_file(args.model)
    xs = [1.0, 2.0, 5.0, 10.0, 20.0, 40.0]
    ts = [0.5, 2.0, 8.0, 32.0, 128.0]

    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    grid = {}
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "t", "method"]
                        + [f"value_{i + 1}" for i in range(model.n_states)])
        for x in xs:
            for t in ts:
                res = finite_time_ruin(model, x, t, n=args.n)
                grid[(x, t)] = res.method
                writer.writerow([x, t, res.method]
                                + [f"{v:.6e}" for v in np.atleast_1d(res.values)])
                print(f"x={x:<5g} t={t:<6g} {res.method:<10s} "
                      f"value={np.atleast_1d(res.values)[0]:.4e}")

    print("\nmethod map (rows x, columns t):")
    print("        " + "".join(f"{t:>8g}" for t in ts))
    for x in xs:
        print(f"x={x:<6g}" + "".join(f"{GLYPH[grid[(x, t)]]:>8s}" for t in ts))
    print(f"\nwrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
