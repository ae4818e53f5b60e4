"""Batch front door: model files in, tables out.

Commands operate on a JSON model file and emit CSV (default) or JSON-lines
to --out (stdout when omitted).  Exit codes: 0 success, 1 computational
failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import sys

import numpy as np

from .claims import (
    Degenerate,
    Erlang,
    Exponential,
    HyperExponential,
    LogNormal,
    Pareto,
    PhaseType,
    TransformDomainError,
    Weibull,
)
from .model import ModelValidationError, RegimeModel, drift_report, validate_model
from .parisian import ParisianError, parisian_solution, upcross_cdf
from .ruin import (
    RuinError,
    deficit_kernel,
    gerber_shiu,
    penalty_deficit_band,
    penalty_exp_deficit,
    penalty_one,
    ruin_probability,
    survival,
)
from .scale import build_scale_set, w_matrix
from .simulate import (
    SimulationError,
    mc_discounted,
    mc_gerber_shiu,
    mc_parisian,
    mc_ruin,
)
from .spectral import SpectralError, adjustment_coefficient, k_derivatives, perron_triple

FAMILIES = {
    "degenerate": Degenerate,
    "exponential": Exponential,
    "erlang": Erlang,
    "hyperexponential": HyperExponential,
    "phase-type": PhaseType,
    "pareto": Pareto,
    "weibull": Weibull,
    "lognormal": LogNormal,
}

_COMPUTE_ERRORS = (
    SpectralError,
    RuinError,
    ParisianError,
    SimulationError,
    TransformDomainError,
    ModelValidationError,
    np.linalg.LinAlgError,
)


class InputError(Exception):
    """Invalid model file or command parameters; carries every finding."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def _law_from_table(table, where, problems):
    if not isinstance(table, dict) or "family" not in table:
        problems.append(f"{where}: expected an object with keys 'family' and 'params'")
        return None
    family = table["family"]
    ctor = FAMILIES.get(family)
    if ctor is None:
        problems.append(
            f"{where}: unknown family {family!r}; supported families: "
            + ", ".join(sorted(FAMILIES))
        )
        return None
    params = table.get("params", {})
    if not isinstance(params, dict):
        problems.append(f"{where}: 'params' must be an object")
        return None
    names = [f.name for f in dataclasses.fields(ctor)]
    extra = set(params) - set(names)
    if extra:
        problems.append(f"{where}: unknown parameter(s) {sorted(extra)}; {family} takes {names}")
        return None
    try:
        return ctor(**params)
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc} ({family} takes {names})")
        return None


def parse_model_file(path) -> RegimeModel:
    """Load and validate a model description; all findings reported at once."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError([f"cannot read model file: {exc}"])
    except json.JSONDecodeError as exc:
        raise InputError([f"{path}:{exc.lineno}: {exc.msg}"])

    problems = []
    if not isinstance(raw, dict):
        raise InputError([f"{path}: top level must be an object"])
    for key in ("states", "q_matrix", "premiums", "arrival_rates", "state_claims"):
        if key not in raw:
            problems.append(f"missing key {key!r}")
    if problems:
        raise InputError(problems)

    n = raw["states"]
    if not isinstance(n, int) or n < 1:
        raise InputError(["'states' must be a positive integer"])
    for key in ("q_matrix", "premiums", "arrival_rates", "state_claims"):
        if not isinstance(raw[key], list):
            problems.append(f"{key!r} must be an array")
    if problems:
        raise InputError(problems)
    if len(raw["state_claims"]) != n:
        problems.append(f"'state_claims' has {len(raw['state_claims'])} entries, need {n}")

    laws = []
    for i, table in enumerate(raw["state_claims"]):
        laws.append(_law_from_table(table, f"state_claims[{i}]", problems))

    transition = {}
    for key, table in (raw.get("transition_claims") or {}).items():
        parts = str(key).split("->")
        try:
            i, j = (int(p) for p in parts)
        except ValueError:
            problems.append(f"transition_claims key {key!r} must look like 'i->j'")
            continue
        law = _law_from_table(table, f"transition_claims[{key}]", problems)
        if law is not None:
            transition[(i, j)] = law

    if problems:
        raise InputError(problems)

    model = RegimeModel(
        q_matrix=raw["q_matrix"],
        premiums=raw["premiums"],
        arrival_rates=raw["arrival_rates"],
        state_claims=laws,
        transition_claims=transition,
    )
    structural = validate_model(model)
    # name the offending row for the most common slip
    q = model.q()
    for i in range(model.n_states):
        if abs(q[i].sum()) > 1e-10:
            structural.append(f"q_matrix row {i} sums to {q[i].sum():.6g}, not 0")
    if structural:
        raise InputError(structural)
    return model


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _emit(header, rows, fmt, out):
    close = False
    if out in (None, "-"):
        fh = sys.stdout
    else:
        fh = open(out, "w", newline="")
        close = True
    try:
        if fmt == "json-lines":
            for row in rows:
                fh.write(json.dumps(dict(zip(header, row))) + "\n")
        else:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    finally:
        if close:
            fh.close()


def _float_list(text):
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ruin(model, args):
    xs = args.x
    phi = np.atleast_2d(ruin_probability(model, np.asarray(xs, dtype=float)))
    header = ["x"] + [f"phi_{i + 1}" for i in range(model.n_states)]
    return header, [[x] + list(map(float, phi[k])) for k, x in enumerate(xs)]


def cmd_finite_ruin(model, args):
    from .asymptotics import finite_time_ruin

    header = ["x", "t", "method"] + [f"value_{i + 1}" for i in range(model.n_states)]
    rows = []
    for x, t in itertools.product(args.x, args.t):
        res = finite_time_ruin(model, x, t, method=args.method or "auto",
                               n=args.n, seed=args.seed)
        rows.append([x, t, res.method] + list(map(float, res.values)))
    return header, rows


def _penalty_from_spec(spec):
    if spec in (None, "one"):
        return penalty_one()
    kind, _, rest = spec.partition(":")
    if kind == "exp":
        return penalty_exp_deficit(float(rest))
    if kind == "band":
        a, b = (float(tok) for tok in rest.split(","))
        return penalty_deficit_band(a, b)
    raise InputError([f"unknown penalty {spec!r}; use one, exp:ALPHA or band:A,B"])


def cmd_gerber_shiu(model, args):
    penalty = _penalty_from_spec(args.method)
    header = ["x"] + [f"phi_w_{i + 1}" for i in range(model.n_states)]
    rows = []
    for x in args.x:
        vals = gerber_shiu(model, args.q, x, penalty)
        rows.append([x] + list(map(float, np.atleast_1d(vals))))
    return header, rows


def cmd_deficit(model, args):
    kern = deficit_kernel(model, args.x[0], args.state, q=args.q)
    n = model.n_states
    header = ["kind", "z"] + [f"state_{j + 1}" for j in range(n)]
    rows = [["density", float(z)] + list(map(float, kern.densities[:, k]))
            for k, z in enumerate(kern.grid)]
    rows.append(["mass", 0.0] + list(map(float, kern.masses)))
    return header, rows


def cmd_parisian(model, args):
    sol = parisian_solution(model, args.zeta)
    header = ["zeta", "x"] + [f"ruin_{i + 1}" for i in range(model.n_states)] + ["kernel_radius"]
    rows = []
    for x in args.x:
        vals = 1.0 - sol.evaluate(float(x))
        rows.append([args.zeta, x] + list(map(float, vals))
                    + [float(sol.diagnostics["spectral_radius"])])
    return header, rows


def cmd_asymptotics(model, args):
    from .asymptotics import cramer_constant, rate_function, segerdahl_data, subexp_data

    header = ["quantity", "state", "value"]
    rows = []
    if not model.heavy_tailed:
        cram = cramer_constant(model, n=args.n, seed=args.seed)
        rows.append(["gamma", "", float(cram.gamma)])
        for i, c in enumerate(cram.constants):
            rows.append(["cramer_constant", i + 1, float(c)])
        seg = segerdahl_data(model, cram)
        rows.append(["segerdahl_m", "", float(seg.m)])
        rows.append(["segerdahl_c2", "", float(seg.c2)])
        vs = args.x if args.x else [round(seg.m * f, 12) for f in (1.25, 1.5, 2.0, 3.0)]
        for v in vs:
            rate, gam_v = rate_function(model, v)
            rows.append([f"loss_rate(v={_fmt(float(v))})", "", float(rate)])
            rows.append([f"loss_maximizer(v={_fmt(float(v))})", "", float(gam_v)])
    else:
        sub = subexp_data(model)
        for i, c in enumerate(sub.c):
            rows.append(["subexp_c", i + 1, float(c)])
        rows.append(["subexp_big_c", "", float(sub.big_c)])
        rows.append(["mean_descent", "", float(sub.abar)])
        rows.append(["reference_law", "", sub.reference.label()])
    return header, rows


def cmd_scale(model, args):
    sset = build_scale_set(model, args.q, step=args.step, extent=args.extent,
                           method=args.method or "auto")
    n = model.n_states
    header = (["x"]
              + [f"w_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
              + [f"z_{i + 1}{j + 1}" for i in range(n) for j in range(n)])
    rows = []
    for k, x in enumerate(sset.xs):
        rows.append([float(x)] + list(map(float, sset.w_values[k].ravel()))
                    + list(map(float, sset.z_values[k].ravel())))
    return header, rows


def cmd_simulate(model, args):
    oracle = args.method or "ruin"
    header = ["oracle", "state", "x", "t", "q", "zeta",
              "value", "se", "ci_lo", "ci_hi", "n", "seed", "method"]
    x = args.x[0]
    rows = []

    def add(est, state, t="", q="", zeta=""):
        rows.append([oracle, state, x, t, q, zeta, float(est.value), float(est.se),
                     float(est.ci_lo), float(est.ci_hi), est.n, est.seed, est.method])

    if oracle == "ruin":
        for i, est in enumerate(mc_ruin(model, x, t=args.t[0] if args.t else None,
                                        n=args.n, seed=args.seed)):
            add(est, i + 1, t=args.t[0] if args.t else "inf")
    elif oracle == "parisian":
        for i in range(model.n_states):
            add(mc_parisian(model, x, args.zeta, n=args.n, seed=args.seed, i0=i),
                i + 1, zeta=args.zeta)
    elif oracle == "discounted":
        for i, est in enumerate(mc_discounted(model, x, args.q, n=args.n, seed=args.seed)):
            add(est, i + 1, q=args.q)
    elif oracle == "gerber-shiu":
        for i, est in enumerate(mc_gerber_shiu(model, x, penalty_one(), q=args.q,
                                               n=args.n, seed=args.seed)):
            add(est, i + 1, q=args.q)
    else:
        raise InputError([f"unknown oracle {oracle!r}; use ruin, parisian, discounted "
                          "or gerber-shiu"])
    return header, rows


def cmd_validate(model, args):
    header = ["check", "status", "detail"]
    rows = []
    failures = []

    def record(name, ok, detail):
        rows.append([name, "pass" if ok else "FAIL", detail])
        if not ok:
            failures.append(f"{name}: {detail}")

    rep = drift_report(model)
    record("net_profit", rep.stationary_drift > 0,
           f"stationary drift {rep.stationary_drift:.6g}"
           + ("" if rep.stationary_drift > 0 else " (net profit violated)"))

    if rep.stationary_drift > 0:
        try:
            k1, _ = k_derivatives(model, 0.0)
            record("drift_identity", abs(k1 - rep.stationary_drift) <= 1e-8,
                   f"k'(0) = {k1:.10g} vs stationary drift {rep.stationary_drift:.10g}")
        except (SpectralError, TransformDomainError):
            # heavy tails leave no room for the two-sided derivative at 0
            rows.append(["drift_identity", "skipped", "transform boundary at 0"])

        if not model.heavy_tailed:
            try:
                gamma = adjustment_coefficient(model)
                kg = perron_triple(model, -gamma).k
                record("adjustment_coefficient", abs(kg) <= 1e-8,
                       f"gamma = {gamma:.10g}, k(-gamma) = {kg:.3g}")
            except SpectralError as exc:
                record("adjustment_coefficient", False, str(exc))
        else:
            rows.append(["adjustment_coefficient", "skipped", "heavy-tailed claims"])

        if model.rational:
            w0 = np.atleast_2d(w_matrix(model, 0.0, 0.0))
            err = float(np.max(np.abs(w0 - np.diag(1.0 / model.p()))))
            record("scale_at_zero", err <= 1e-8, f"max|W(0) - diag(1/p)| = {err:.3g}")
            phi = np.atleast_2d(ruin_probability(model, np.array([0.0, 1.0, 2.0, 4.0])))
            ok = bool(np.all(phi >= -1e-12) and np.all(phi <= 1 + 1e-12)
                      and np.all(np.diff(phi, axis=0) <= 1e-9))
            record("ruin_curve", ok, "within [0,1] and nonincreasing on {0,1,2,4}")
            if args.zeta and args.zeta > 0:
                try:
                    sol = parisian_solution(model, args.zeta)
                    record("parisian_contraction",
                           sol.diagnostics["spectral_radius"] < 1.0,
                           f"kernel spectral radius {sol.diagnostics['spectral_radius']:.6g}")
                except (ParisianError, SpectralError) as exc:
                    record("parisian_contraction", False, str(exc))
        else:
            rows.append(["scale_at_zero", "skipped", "no rational claim transform"])
    return header, rows, failures


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmruin",
        description="Ruin quantities for Markov-modulated risk processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text, **need):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", required=True, help="JSON model file")
        p.add_argument("--out", default="-", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json-lines"), default="csv")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--n", type=int, default=100_000, help="MC replications")
        p.add_argument("--x", type=_float_list, default=None,
                       help="comma-separated surplus grid", **(
                           {"required": True} if need.get("x") else {}))
        p.add_argument("--t", type=_float_list, default=None,
                       help="comma-separated horizons", **(
                           {"required": True} if need.get("t") else {}))
        p.add_argument("--q", type=float, default=0.0, help="discount rate")
        p.add_argument("--zeta", type=float, default=0.0, help="Parisian delay")
        p.add_argument("--method", default=None)
        p.add_argument("--state", type=int, default=0, help="initial state (0-based)")
        p.add_argument("--step", type=float, default=0.01, help="grid step")
        p.add_argument("--extent", type=float, default=None, help="grid extent")
        return p

    command("ruin", "classical ruin probability on an x grid", x=True)
    command("finite-ruin", "finite-horizon ruin over an x-by-t table", x=True, t=True)
    command("gerber-shiu", "discounted penalty values (--method one|exp:A|band:A,B)", x=True)
    command("deficit", "deficit-at-ruin density and masses at one x", x=True)
    p = command("parisian", "Parisian ruin on an x grid for one delay", x=True)
    command("asymptotics", "tail constants and large-deviations table")
    command("scale", "W and Z matrices on a regular grid")
    command("simulate", "Monte Carlo oracles (--method ruin|parisian|discounted|gerber-shiu)",
            x=True)
    command("validate", "run the model invariant suite")
    return parser


_DISPATCH = {
    "ruin": cmd_ruin,
    "finite-ruin": cmd_finite_ruin,
    "gerber-shiu": cmd_gerber_shiu,
    "deficit": cmd_deficit,
    "parisian": cmd_parisian,
    "asymptotics": cmd_asymptotics,
    "scale": cmd_scale,
    "simulate": cmd_simulate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        model = parse_model_file(args.model)
    except InputError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=sys.stderr)
        return 2

    try:
        if args.command == "validate":
            zeta = args.zeta if args.zeta else 1.0
            args.zeta = zeta
            header, rows, failures = cmd_validate(model, args)
            _emit(header, rows, args.format, args.out)
            for msg in failures:
                print(f"error: {msg}", file=sys.stderr)
            return 1 if failures else 0
        if args.command == "parisian" and not args.zeta > 0:
            raise InputError(["parisian needs --zeta > 0"])
        if args.command == "simulate" and args.method == "parisian" and not args.zeta > 0:
            raise InputError(["simulate --method parisian needs --zeta > 0"])
        header, rows = _DISPATCH[args.command](model, args)
        _emit(header, rows, args.format, args.out)
        return 0
    except InputError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=sys.stderr)
        return 2
    except _COMPUTE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
