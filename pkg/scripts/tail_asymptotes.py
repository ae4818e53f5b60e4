#!/usr/bin/env python3
"""Compare exact ruin probabilities against their tail asymptotes.

For each light-tailed model the script tabulates the exact ruin probability
(scale-function route) next to the exponential asymptote C e^{-gamma x} and
their ratio; convergence of the ratio to 1 is the whole story.  For a
heavy-tailed model the same table is built against the integrated-tail
asymptote.  Output is one CSV per model.

Usage:
    python3 scripts/tail_asymptotes.py --out-dir results/
"""

from __future__ import annotations

import argparse
import csv
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from mmruin.asymptotics import cramer_constant, subexp_data
from mmruin.cli import parse_model_file
from mmruin.ruin import pollaczek_khintchine, ruin_probability

MODEL_DIR = pathlib.Path(__file__).resolve().parent.parent / "models"


def light_table(model, xs):
    data = cramer_constant(model)
    rows = []
    for x in xs:
        exact = ruin_probability(model, x)
        approx = data.approx(x)
        for i in range(model.n_states):
            rows.append({
                "x": x,
                "state": i + 1,
                "exact": exact[i],
                "asymptote": approx[i],
                "ratio": exact[i] / approx[i] if approx[i] > 0 else np.nan,
            })
    return rows


def heavy_table(model, xs):
    data = subexp_data(model)
    rows = []
    for x in xs:
        bracket = pollaczek_khintchine(model, x)
        # the bracket encloses survival; ruin is the complement
        ruin = np.atleast_1d(1.0 - 0.5 * (bracket.lower + bracket.upper))
        approx = np.atleast_1d(data.approx(x))
        for i in range(model.n_states):
            rows.append({
                "x": x,
                "state": i + 1,
                "exact": ruin[i],
                "asymptote": approx[i],
                "ratio": ruin[i] / approx[i] if approx[i] > 0 else np.nan,
            })
    return rows


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results", help="output directory")
    args = parser.parse_args(argv)
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    light_xs = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0]
    heavy_xs = [1.0, 5.0, 20.0, 50.0, 150.0, 400.0]

    for name in ("model_a", "model_b"):
        model = parse_model_file(MODEL_DIR / f"{name}.json")
        rows = light_table(model, light_xs)
        write_csv(out / f"tail_{name}.csv", rows)
        worst = max(abs(r["ratio"] - 1.0) for r in rows if r["x"] >= 10)
        print(f"{name}: exponential asymptote, worst |ratio-1| for x>=10: {worst:.3e}")

    model = parse_model_file(MODEL_DIR / "model_pareto.json")
    rows = heavy_table(model, heavy_xs)
    write_csv(out / "tail_model_pareto.csv", rows)
    tail = [r["ratio"] for r in rows if r["x"] >= 150]
    print(f"model_pareto: integrated-tail asymptote, ratios deep in the tail: "
          + ", ".join(f"{r:.4f}" for r in tail))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
