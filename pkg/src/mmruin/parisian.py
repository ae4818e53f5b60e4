"""Parisian ruin: ruin is declared only after an excursion below zero
survives a fixed delay.

The survival probability solves a small linear system over the environment
states: a path either never goes below zero, or it dips, recovers to zero
within the delay, and restarts from level zero in the recovery state.  The
recovery kernel couples the deficit law at ruin with the distribution of the
upward passage time, whose Laplace transform in the delay variable is
explicit and is inverted numerically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .laplace import euler_inversion
from .model import RegimeModel
from .ruin import RuinError, deficit_kernel, ruin_probability, survival
from .simulate import (
    _UP, _accumulate, _batch_rng, _batch_sizes, _n_workers, _reduce_mean,
    _run_batch, _Arrays,
)
from .spectral import SpectralError, adjustment_coefficient, exponent_roots
from .asymptotics import SubexpData, subexp_asymptote

__all__ = [
    "ParisianError",
    "upcross_cdf",
    "ParisianSolution",
    "parisian_solution",
    "parisian_survival",
    "parisian_ruin",
    "ParisianCramer",
    "parisian_cramer",
    "parisian_subexp",
    "parisian_curve_csv",
]

_GL64 = leggauss(64)
_GL32 = leggauss(32)


class ParisianError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# upward-passage time distribution
# ---------------------------------------------------------------------------

def _upcross_spectral(model, zs, zeta, n_terms=120, m_avg=30):
    """Invert theta -> (1/theta) e^{G(theta) z} jointly for a z grid.

    Every Bromwich node theta depends only on zeta, so the exponent roots
    are computed once per node and reused across the whole grid.  The
    passage law has an atom at the fluid crossing time z/p (the no-event
    path); it is split off and handled exactly, the Euler series only sees
    the smooth remainder.  The term counts are set by validation against
    the MC oracle.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    n = model.n_states
    rates = model.lam() - np.diag(model.q())
    t_atom = zs[:, None] / model.p()[None, :]  # (M, n) fluid crossing times
    mass = np.exp(-rates[None, :] * t_atom)
    diag = np.arange(n)

    def fhat(theta):
        rr = exponent_roots(model, theta)
        lam = rr.roots[rr.right]
        hmat = rr.h[rr.right].T
        hinv = np.linalg.inv(hmat)
        decays = np.exp(-np.multiply.outer(zs, lam))  # (M, n)
        mats = np.einsum("ir,mr,rj->mij", hmat, decays, hinv)
        mats[:, diag, diag] -= mass * np.exp(-theta * t_atom)
        return mats / theta

    out = euler_inversion(fhat, zeta, n_terms=n_terms, m_avg=m_avg)
    if not np.all(np.isfinite(out)):
        raise SpectralError("passage-time inversion produced non-finite entries")
    out = np.real(out)
    out[:, diag, diag] += np.where(t_atom <= zeta, mass, 0.0)
    if float(np.min(out)) < -1e-3 or float(np.max(out.sum(axis=2))) > 1.0 + 1e-3:
        raise SpectralError("passage-time inversion left the probability range")
    return np.clip(out, 0.0, 1.0)


def _upcross_mc(model, z, zeta, n, seed):
    arr = _Arrays(model)
    workers = _n_workers()
    sizes = _batch_sizes(n)
    nst = model.n_states
    mat = np.zeros((nst, nst))
    se = np.zeros((nst, nst))
    for st in range(nst):
        def fn(b, m, st=st):
            rng = _batch_rng(seed, b, phase=1200 + st)
            res = _run_batch(arr, rng, m, 0.0, st, up=z, horizon=zeta, down=False)
            hit = res["reason"] == _UP
            ends = res["j_end"]
            rows = np.zeros((nst, 3))
            for j in range(nst):
                c = float(np.sum(hit & (ends == j)))
                rows[j] = (c, c, m)
            return rows
        acc = _accumulate(fn, sizes, workers)
        for j in range(nst):
            est = _reduce_mean([r[j] for r in acc], seed, "crude")
            mat[st, j] = est.value
            se[st, j] = est.se
    return mat, se


def upcross_cdf(model: RegimeModel, z, zeta, method="auto", n=100_000, seed=0,
                info=None):
    """Matrix P_k(pass from 0 up to level z within zeta, arriving in state j).

    Spectral route inverts the explicit Laplace transform in the delay;
    non-rational models and inversion failures fall back to Monte Carlo.
    An info dict, when given, receives the method tag (and MC errors).
    """
    model = model.validated()
    z, zeta = float(z), float(zeta)
    if z < 0 or zeta <= 0:
        raise ValueError("need z >= 0 and zeta > 0")
    nst = model.n_states
    if z == 0.0:
        # positive premiums cross instantly
        if info is not None:
            info["method"] = "exact"
        return np.eye(nst)
    if z > float(np.max(model.p())) * zeta:
        # the fluid bound: no path can climb z in time zeta
        if info is not None:
            info["method"] = "exact"
        return np.zeros((nst, nst))
    if method not in ("auto", "spectral", "mc"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "spectral") and model.rational:
        try:
            out = _upcross_spectral(model, z, zeta)[0]
            if info is not None:
                info["method"] = "spectral"
            return out
        except (SpectralError, np.linalg.LinAlgError):
            if method == "spectral":
                raise
    mat, se = _upcross_mc(model, z, zeta, n, seed)
    if info is not None:
        info["method"] = "mc"
        info["se"] = se
    return mat


# ---------------------------------------------------------------------------
# the recovery fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParisianSolution:
    """Fixed point of the dip-and-recover decomposition at level zero.

    s solves (I - A) s = survival(0): a surviving path either never ruins or
    dips, climbs back to zero within the delay (kernel A), and survives anew.
    """

    model: RegimeModel = field(repr=False)
    delay: float
    s: np.ndarray  # per-state Parisian survival from level 0
    kernel: np.ndarray  # (N, N) recovery operator A
    survival0: np.ndarray
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    upcross: np.ndarray = field(repr=False)  # (len(nodes), N, N)
    diagnostics: dict = field(default_factory=dict)

    def _recovery(self, x):
        """B(x)_{ij}: dip from x, recover to 0 within the delay, state j."""
        nst = self.model.n_states
        dens = np.empty((nst, nst, len(self.nodes)))
        for i in range(nst):
            dens[i] = deficit_kernel(self.model, x, i, grid=self.nodes).densities
        return np.einsum("n,ikn,nkj->ij", self.weights, dens, self.upcross)

    def evaluate(self, x):
        """Parisian survival started from level x, one entry per state."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        base = np.atleast_2d(survival(self.model, xs))
        out = np.empty_like(base)
        for k, xx in enumerate(xs):
            out[k] = base[k] + self._recovery(float(xx)) @ self.s
        out = np.clip(out, base, 1.0)
        return out[0] if np.ndim(x) == 0 else out.reshape(np.shape(x) + (self.model.n_states,))


def parisian_solution(model: RegimeModel, zeta, n_nodes=64) -> ParisianSolution:
    model = model.validated()
    zeta = float(zeta)
    if zeta <= 0:
        raise ValueError("the fixed point needs a positive delay")
    surv0 = survival(model, 0.0)
    hi = float(np.max(model.p())) * zeta

    def assemble(order):
        gn, gw = leggauss(order)
        nodes = 0.5 * hi * (gn + 1.0)
        weights = 0.5 * hi * gw
        if model.rational:
            ups = _upcross_spectral(model, nodes, zeta)
        else:
            ups = np.stack([upcross_cdf(model, zz, zeta) for zz in nodes])
        nst = model.n_states
        dens = np.empty((nst, nst, order))
        for i in range(nst):
            dens[i] = deficit_kernel(model, 0.0, i, grid=nodes).densities
        return nodes, weights, ups, np.einsum("n,ikn,nkj->ij", weights, dens, ups)

    nodes, weights, ups, kernel = assemble(n_nodes)
    _, _, _, coarse = assemble(max(8, n_nodes // 2))
    quad_err = float(np.max(np.abs(kernel - coarse)))

    radius = float(np.max(np.abs(np.linalg.eigvals(kernel))))
    if radius >= 1.0:
        raise ParisianError(
            f"recovery kernel is not a contraction (spectral radius {radius:.4f}); "
            f"kernel = {kernel!r}"
        )
    s = np.linalg.solve(np.eye(model.n_states) - kernel, surv0)
    s = np.clip(s, surv0, 1.0)
    return ParisianSolution(
        model=model, delay=zeta, s=s, kernel=kernel, survival0=surv0,
        nodes=nodes, weights=weights, upcross=ups,
        diagnostics={"spectral_radius": radius, "quadrature_error": quad_err},
    )


def parisian_survival(model: RegimeModel, zeta, x, solution: ParisianSolution | None = None):
    """P(no excursion below zero ever reaches length zeta | start x, state i)."""
    if zeta <= 0:
        return survival(model, x)
    if solution is None:
        solution = parisian_solution(model, zeta)
    return solution.evaluate(x)


def parisian_ruin(model: RegimeModel, zeta, x, solution: ParisianSolution | None = None):
    return 1.0 - parisian_survival(model, zeta, x, solution)


# ---------------------------------------------------------------------------
# Parisian asymptotics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParisianCramer:
    zeta: float
    gamma: float
    constants: np.ndarray  # per-state tail constants of the Parisian ruin
    fit_drift: float  # relative change under doubling of the fit window


def _tail_fit(fn, gamma, x0):
    xs = np.array([x0, 1.5 * x0, 2.0 * x0])
    scaled = np.exp(gamma * xs)[:, None] * np.stack([fn(xx) for xx in xs])
    out = np.empty(scaled.shape[1])
    for i in range(scaled.shape[1]):
        f0, f1, f2 = scaled[:, i]
        den = (f2 - f1) - (f1 - f0)
        out[i] = f2 if abs(den) < 1e-12 * max(1.0, abs(f2)) else f2 - (f2 - f1) ** 2 / den
    return out


def parisian_cramer(model: RegimeModel, zeta) -> ParisianCramer:
    """Constant of the exponential Parisian-ruin asymptote, by tail fit.

    The delayed ruin keeps the classical decay rate; its constant is smaller
    (recovered excursions are discounted away).  The fit is repeated with a
    doubled window as a stabilization check.
    """
    model = model.validated()
    gamma = adjustment_coefficient(model)
    sol = parisian_solution(model, float(zeta))
    x0 = max(8.0 / gamma, 4.0 * model.largest_claim_mean())

    def ruin_vec(xx):
        return 1.0 - sol.evaluate(xx)

    fit = _tail_fit(ruin_vec, gamma, x0)
    fit2 = _tail_fit(ruin_vec, gamma, 2.0 * x0)
    drift = float(np.max(np.abs(fit2 - fit) / np.maximum(np.abs(fit), 1e-300)))
    if not np.all(np.isfinite(fit)) or np.any(fit <= 0) or drift > 0.05:
        raise ParisianError(f"Parisian tail fit did not stabilize (drift {drift:.2e})")
    return ParisianCramer(zeta=float(zeta), gamma=gamma, constants=fit2, fit_drift=drift)


def parisian_subexp(model: RegimeModel, x, zeta, data: SubexpData | None = None):
    """Heavy-tail Parisian asymptote; the delay drops out of the limit."""
    if zeta <= 0:
        raise ValueError("the Parisian asymptote needs a positive delay")
    return subexp_asymptote(model, x, data=data)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def parisian_curve_csv(model: RegimeModel, zeta, xs, path):
    """Rows (zeta, x, Parisian ruin per state, spectral-radius diagnostic)."""
    sol = parisian_solution(model, float(zeta))
    nst = model.n_states
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["zeta", "x"] + [f"ruin_{i + 1}" for i in range(nst)]
                        + ["kernel_radius"])
        for x in xs:
            vals = 1.0 - sol.evaluate(float(x))
            writer.writerow([f"{zeta:.10g}", f"{float(x):.10g}"]
                            + [f"{v:.12g}" for v in vals]
                            + [f"{sol.diagnostics['spectral_radius']:.6g}"])
