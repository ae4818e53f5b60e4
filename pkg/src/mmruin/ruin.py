"""Exact ruin quantities built on the scale matrices.

Survival and (discounted) ruin probabilities come from the decaying part of
the exponent-root expansion, so no growing exponential is ever evaluated.
Penalty functionals at ruin use the occupation-density compensation formula:
the expected discounted penalty is the occupation density at level z,
integrated against the overshoot part of the jump measure.  The module also
carries the single-state geometric-compound (Pollaczek-Khintchine) bracket,
the embedded random-walk view, and an integro-differential residual check
that the computed penalty functions actually satisfy the generator equation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .claims import ClaimLaw, Degenerate
from .model import RegimeModel, stationary_distribution, _instantaneous_drifts
from .scale import scale_operator
from .spectral import SpectralError, adjustment_coefficient

__all__ = [
    "RuinError",
    "PenaltyFunction",
    "penalty_one",
    "penalty_deficit_band",
    "penalty_exp_deficit",
    "penalty_tabulated",
    "JumpMeasure",
    "jump_measure",
    "survival",
    "ruin_probability",
    "discounted_ruin",
    "gerber_shiu",
    "DeficitKernel",
    "deficit_kernel",
    "PKBracket",
    "pollaczek_khintchine",
    "ode_residual",
    "EmbeddedWalk",
    "embedded_walk",
    "ruin_curve_csv",
]

_GL32 = leggauss(32)
_GL64 = leggauss(64)


class RuinError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# survival / ruin / discounted ruin
# ---------------------------------------------------------------------------

def _stationary_drift(model):
    pi = stationary_distribution(model.q())
    return float(pi @ _instantaneous_drifts(model))


def _discounted_matrix(model, q, x):
    """Killed-ruin matrix Phi(x), vectorized over x, by the stable expansion."""
    op = scale_operator(model, q)
    xa = np.asarray(x, dtype=float)
    if op.method == "spectral":
        rates, coeffs = op.ruin_coefficients()
        ex = np.exp(np.multiply.outer(xa, rates))
        out = -np.real(np.einsum("...r,rij->...ij", ex, coeffs))
    else:
        cinf = op.c_infinity()
        xs = np.atleast_1d(xa).ravel()
        stack = np.stack([op.z(float(xx)) - op.w(float(xx)) @ cinf for xx in xs])
        out = np.real(stack).reshape(xa.shape + cinf.shape)
    return np.clip(out, 0.0, 1.0)


def survival(model: RegimeModel, x):
    """P(no ruin ever | start x, state i), one entry per initial state."""
    model = model.validated()
    if _stationary_drift(model) <= 0:
        raise RuinError("ruin certain; survival identically 0 (stationary drift <= 0)")
    phi = _discounted_matrix(model, 0.0, x) @ np.ones(model.n_states)
    return np.clip(1.0 - phi, 0.0, 1.0)


def ruin_probability(model: RegimeModel, x):
    """P(ruin | start x, state i); complement of survival."""
    return 1.0 - survival(model, x)


def discounted_ruin(model: RegimeModel, q, x):
    """Matrix E_x[e^{-q tau}; ruin, J_tau = j | J_0 = i]."""
    model = model.validated()
    if q < 0:
        raise ValueError("q must be nonnegative")
    return _discounted_matrix(model, float(q), x)


# ---------------------------------------------------------------------------
# penalty functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyFunction:
    """Bounded nonnegative penalty w(surplus_before_ruin, deficit).

    closed_tail, when set, evaluates int_z^inf w(z, c - z) dF(c) in closed
    form for a claim law; otherwise a quadrature against the claim density is
    used.
    """

    label: str
    bound: float
    fn: object  # vectorized callable (z, y) -> weights
    closed_tail: object = None  # optional callable (law, z)

    def __call__(self, z, y):
        return self.fn(z, y)

    def claim_integral(self, law: ClaimLaw, z):
        """int over claims c > z of w(z, c - z) dF(c)."""
        if self.closed_tail is not None:
            return self.closed_tail(law, z)
        return _tail_quadrature(self, law, float(z))


def _tail_quadrature(penalty, law, z, rel=1e-10):
    hi = float(law.quantile(1.0 - 1e-10))
    if hi <= z:
        return 0.0
    nodes, wts = _GL32
    panels = 4
    prev = None
    for _ in range(9):
        edges = np.linspace(z, hi, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        cs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        ws = (half[:, None] * wts[None, :]).ravel()
        val = float(np.sum(ws * penalty.fn(z, cs - z) * law.pdf(cs)))
        if prev is not None and abs(val - prev) <= rel * max(1.0, abs(val)):
            return val
        prev = val
        panels *= 2
    return val


def penalty_one() -> PenaltyFunction:
    return PenaltyFunction(
        label="one", bound=1.0,
        fn=lambda z, y: np.ones(np.broadcast(z, y).shape),
        closed_tail=lambda law, z: law.sf(z),
    )


def penalty_deficit_band(a, b) -> PenaltyFunction:
    """Indicator that the deficit falls in [a, b]."""
    if not 0 <= a < b:
        raise ValueError("need 0 <= a < b")
    return PenaltyFunction(
        label=f"deficit-band[{a:g},{b:g}]", bound=1.0,
        fn=lambda z, y: ((y >= a) & (y <= b)).astype(float),
        closed_tail=lambda law, z: law.sf(z + a) - law.sf(z + b),
    )


def penalty_exp_deficit(alpha) -> PenaltyFunction:
    """w(z, y) = exp(-alpha y); the deficit transform."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return PenaltyFunction(
        label=f"exp-deficit({alpha:g})", bound=1.0,
        fn=lambda z, y: np.exp(-alpha * np.asarray(y, dtype=float)),
    )


def penalty_tabulated(z_knots, y_knots, table) -> PenaltyFunction:
    """Bilinear interpolation of a user table; constant beyond the knots."""
    from scipy.interpolate import RegularGridInterpolator

    table = np.asarray(table, dtype=float)
    if np.any(table < 0):
        raise ValueError("penalty table must be nonnegative")
    interp = RegularGridInterpolator(
        (np.asarray(z_knots, float), np.asarray(y_knots, float)),
        table, bounds_error=False, fill_value=None,
    )

    def fn(z, y):
        zz, yy = np.broadcast_arrays(np.asarray(z, float), np.asarray(y, float))
        pts = np.stack([
            np.clip(zz, z_knots[0], z_knots[-1]),
            np.clip(yy, y_knots[0], y_knots[-1]),
        ], axis=-1)
        return np.maximum(interp(pts), 0.0)

    return PenaltyFunction(label="tabulated", bound=float(table.max()), fn=fn)


# ---------------------------------------------------------------------------
# jump measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JumpMeasure:
    """Claim arrival measure per state pair: (origin, target, rate, law)."""

    entries: tuple

    def components_from(self, j):
        """All jumps occurring while the chain sits in state j."""
        return [(k, w, law) for (a, k, w, law) in self.entries if a == j]

    def mass(self, i, j):
        return sum(w for (a, b, w, _) in self.entries if a == i and b == j)


def jump_measure(model: RegimeModel) -> JumpMeasure:
    entries = []
    lam = model.lam()
    q = model.q()
    for i in range(model.n_states):
        if lam[i] > 0:
            entries.append((i, i, float(lam[i]), model.state_claims[i]))
        for j in range(model.n_states):
            if i != j and q[i, j] > 0:
                law = model.switch_claim(i, j)
                if law.mean > 0:
                    entries.append((i, j, float(q[i, j]), law))
    return JumpMeasure(entries=tuple(entries))


# ---------------------------------------------------------------------------
# compensation quadrature
# ---------------------------------------------------------------------------

def _z_cutoff(model):
    laws = model.all_claims()
    if not laws:
        return 0.0
    return max(float(law.quantile(1.0 - 1e-10)) for law in laws)


def _adaptive_vector_quad(f, a, b, rel=1e-9, max_doublings=8):
    """Integrate a smooth vector-valued f over [a, b] by panel doubling."""
    if b <= a:
        return 0.0
    nodes, wts = _GL32
    panels = max(2, int(np.ceil((b - a) / 2.0)))
    prev = None
    for _ in range(max_doublings):
        edges = np.linspace(a, b, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        zs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        ws = (half[:, None] * wts[None, :]).ravel()
        val = np.tensordot(ws, f(zs), axes=(0, 0))
        if prev is not None and np.max(np.abs(val - prev)) <= rel * max(1.0, float(np.max(np.abs(val)))):
            return val
        prev = val
        panels *= 2
    raise RuinError("compensation quadrature did not converge")


def gerber_shiu(model: RegimeModel, q, x, penalty: PenaltyFunction | None = None):
    """Expected discounted penalty at ruin, one entry per initial state.

    Computed as the occupation density u(x, z) integrated against the
    overshoot integral of the jump measure at level z.
    """
    model = model.validated()
    if penalty is None:
        penalty = penalty_one()
    if x < 0:
        raise ValueError("x must be nonnegative")
    op = scale_operator(model, float(q))
    nu = jump_measure(model)
    n = model.n_states

    def mvec(zs):
        out = np.zeros((len(zs), n))
        for j in range(n):
            for _, w, law in nu.components_from(j):
                out[:, j] += w * np.array([penalty.claim_integral(law, z) for z in zs])
        return out

    def integrand(zs):
        u = op.potential_density(x, zs)  # (M, n, n)
        return np.einsum("mij,mj->mi", u, mvec(zs))

    z_hi = _z_cutoff(model)
    if z_hi <= 0:
        return np.zeros(n)
    total = np.zeros(n)
    cut = min(float(x), z_hi)
    if cut > 0:
        total = total + _adaptive_vector_quad(integrand, 0.0, cut)
    if z_hi > cut:
        total = total + _adaptive_vector_quad(integrand, cut, z_hi)
    return total


# ---------------------------------------------------------------------------
# deficit kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeficitKernel:
    """Deficit-at-ruin densities per arrival state, from one initial state."""

    initial_state: int
    x: float
    grid: np.ndarray  # deficit values
    densities: np.ndarray  # (N, len(grid)); row j = density of (deficit, J_tau = j)
    masses: np.ndarray  # (N,) exact masses per arrival state

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def to_csv(self, path):
        n = self.densities.shape[0]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["z"] + [f"density_state_{j + 1}" for j in range(n)])
            for k, z in enumerate(self.grid):
                writer.writerow([f"{z:.10g}"] + [f"{v:.12g}" for v in self.densities[:, k]])


def deficit_kernel(model: RegimeModel, x, i, grid=None, q=0.0) -> DeficitKernel:
    """Joint law of (deficit, state at ruin) from initial state i, surplus x."""
    model = model.validated()
    i = int(i)
    op = scale_operator(model, float(q))
    nu = jump_measure(model)
    n = model.n_states
    z_hi = _z_cutoff(model)
    if grid is None:
        grid = np.linspace(0.0, z_hi, 400)
    grid = np.asarray(grid, dtype=float)

    # fixed composite quadrature along occupation levels, split at the x kink
    nodes, wts = _GL32
    segs = []
    cut = min(float(x), z_hi)
    if cut > 0:
        segs.append((0.0, cut))
    if z_hi > cut:
        segs.append((cut, z_hi))
    zs_all, ws_all = [], []
    for a, b in segs:
        panels = max(8, int(np.ceil((b - a) / 0.5)))
        edges = np.linspace(a, b, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        zs_all.append((mid[:, None] + half[:, None] * nodes[None, :]).ravel())
        ws_all.append((half[:, None] * wts[None, :]).ravel())
    zs = np.concatenate(zs_all) if zs_all else np.zeros(0)
    ws = np.concatenate(ws_all) if ws_all else np.zeros(0)
    urow = op.potential_density(x, zs)[:, i, :] if zs.size else np.zeros((0, n))  # (K, n)

    densities = np.zeros((n, len(grid)))
    for (a, b, w, law) in nu.entries:
        # jumps from occupation state a landing the path in state b
        contrib = w * law.pdf(zs[:, None] + grid[None, :]) * urow[:, a][:, None]
        densities[b] += np.einsum("k,kg->g", ws, contrib)

    # exact masses: integrate the survival-function tail instead of the grid
    masses = np.zeros(n)
    for (a, b, w, law) in nu.entries:
        masses[b] += float(np.sum(ws * w * law.sf(zs) * urow[:, a]))
    return DeficitKernel(initial_state=i, x=float(x), grid=grid,
                         densities=densities, masses=masses)


# ---------------------------------------------------------------------------
# Pollaczek-Khintchine bracket (single state)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PKBracket:
    x: float
    lower: float
    upper: float
    rho: float
    step: float
    k_max: int

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, value):
        return self.lower - 1e-12 <= value <= self.upper + 1e-12


def pollaczek_khintchine(model: RegimeModel, x, step=1e-3, k_max=None) -> PKBracket:
    """Survival probability bracket for a single-state model.

    The geometric compound of the integrated-tail law is evaluated on a grid;
    rounding claim mass up/down one grid cell gives certified lower/upper
    bounds, and the geometric tail truncation is added to the upper bound.
    """
    model = model.validated()
    if model.n_states != 1:
        raise RuinError("the geometric-compound route needs a single-state model")
    lam = float(model.lam()[0])
    p = float(model.p()[0])
    law = model.state_claims[0]
    rho = lam * law.mean / p
    if rho >= 1:
        raise RuinError(f"claim load rho = {rho:.4g} >= 1; no geometric representation")
    x = float(x)
    if x < 0:
        return PKBracket(x, 0.0, 0.0, rho, step, 0)
    if k_max is None:
        k_max = int(np.ceil(np.log(1e-10 * (1.0 - rho)) / np.log(rho))) if rho > 0 else 0
    m = int(np.floor(x / step))  # largest grid index with value <= x
    edges = np.arange(m + 2) * step
    cdf = law.equilibrium_cdf(edges)
    pmf = np.diff(cdf)  # mass of the k-th cell [k step, (k+1) step)

    # rounding the claim mass to the right cell edge makes claims larger
    # (compound larger, survival smaller): certified lower bound; left edge
    # rounding gives the upper bound.  Mass rounded past index m leaves the
    # arrays, which is exactly the > x event.
    pmf_up = np.concatenate([[0.0], pmf])[: m + 1]
    pmf_dn = pmf[: m + 1]

    out = {}
    for tag, pmf_k in (("lower", pmf_up), ("upper", pmf_dn)):
        acc = (1.0 - rho)  # k = 0 point mass at zero: CDF at x is 1
        cur = np.zeros(m + 1)
        cur[0] = 1.0
        coef = 1.0 - rho
        for k in range(1, k_max + 1):
            cur = fftconvolve(cur, pmf_k)[: m + 1]
            coef *= rho
            acc += coef * float(cur.sum())  # CDF of the k-fold sum at x
        out[tag] = acc
    tail = rho ** (k_max + 1) / (1.0 - rho)
    return PKBracket(x=x, lower=float(out["lower"]), upper=float(min(out["upper"] + tail, 1.0)),
                     rho=rho, step=step, k_max=k_max)


# ---------------------------------------------------------------------------
# integro-differential residual
# ---------------------------------------------------------------------------

def _check_smooth(law, where):
    if isinstance(law, Degenerate):
        raise RuinError(f"{where}: the residual check needs an absolutely continuous claim law")
    if float(law.cdf(0.0)) > 0:
        raise RuinError(f"{where}: claim law has an atom at zero; density route unavailable")


def ode_residual(model: RegimeModel, q, penalty: PenaltyFunction | None, x_grid):
    """Max residual of the generator equation for the penalty function.

    The computed penalty function is differentiated (4th-order central) and
    inserted into p_i phi_i' + sum_k nu-terms - q phi_i; the result should
    vanish up to O(grid step^2) plus quadrature error.  Only interior grid
    points at least two steps from the ends are evaluated.
    """
    model = model.validated()
    if penalty is None:
        penalty = penalty_one()
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.size < 5:
        raise ValueError("need at least 5 grid points")
    h = float(x_grid[1] - x_grid[0])
    if not np.allclose(np.diff(x_grid), h, rtol=1e-8):
        raise ValueError("x_grid must be uniform")
    lam = model.lam()
    qmat = model.q()
    n = model.n_states
    for i in range(n):
        if lam[i] > 0:
            _check_smooth(model.state_claims[i], f"state {i}")
    for (i, j), law in model.transition_claims.items():
        if qmat[i, j] > 0 and law.mean > 0:
            _check_smooth(law, f"transition {i}->{j}")

    # dense evaluation + spline so the convolution sees a smooth function
    if penalty.label == "one":
        def phi_dense(xs):
            return _discounted_matrix(model, float(q), xs) @ np.ones(n)
    else:
        def phi_dense(xs):
            return np.array([gerber_shiu(model, q, float(xx), penalty) for xx in xs])
    x_hi = float(x_grid[-1])
    dense = np.arange(0.0, x_hi + 0.05, min(h, 0.05))
    vals = phi_dense(dense)
    splines = [CubicSpline(dense, vals[:, i]) for i in range(n)]

    phi_grid = phi_dense(x_grid)
    dphi = np.empty_like(phi_grid)
    dphi[2:-2] = (phi_grid[:-4] - 8 * phi_grid[1:-3] + 8 * phi_grid[3:-1] - phi_grid[4:]) / (12 * h)

    nodes, wts = _GL64

    def conv(spline_k, law, xx):
        """int_0^x phi_k(x - y) f(y) dy."""
        if xx <= 0:
            return 0.0
        panels = max(2, int(np.ceil(xx / 0.5)))
        edges = np.linspace(0.0, xx, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        ys = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        ws = (half[:, None] * wts[None, :]).ravel()
        return float(np.sum(ws * spline_k(xx - ys) * law.pdf(ys)))

    worst = 0.0
    for idx in range(2, len(x_grid) - 2):
        xx = float(x_grid[idx])
        for i in range(n):
            r = model.p()[i] * dphi[idx, i] - (q + lam[i]) * phi_grid[idx, i] \
                + qmat[i, i] * phi_grid[idx, i]
            if lam[i] > 0:
                law = model.state_claims[i]
                r += lam[i] * (conv(splines[i], law, xx) + penalty.claim_integral(law, xx))
            for k in range(n):
                if k == i or qmat[i, k] <= 0:
                    continue
                law = model.switch_claim(i, k)
                if law.mean > 0:
                    r += qmat[i, k] * (conv(splines[k], law, xx) + penalty.claim_integral(law, xx))
                else:
                    r += qmat[i, k] * phi_grid[idx, k]
            worst = max(worst, abs(r))
    return worst


# ---------------------------------------------------------------------------
# embedded random walk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddedWalk:
    """The risk process seen only at event times, as a Markov random walk.

    From state i the next event comes after Exp(rate_i) with upward drift
    p_i per unit time; the event keeps the state (probability lam_i/rate_i,
    claim from the state law) or switches it.  Losses minus gains give the
    walk increments; ruin equals the walk maximum exceeding x.
    """

    transition: np.ndarray
    rates: np.ndarray
    premiums: np.ndarray
    claim_table: tuple  # (i, j) -> law or None, flattened dict
    increment_means: np.ndarray  # a_i = E[xi | from state i]
    stationary: np.ndarray
    mean_descent: float  # abar = -sum pi_i a_i
    model: RegimeModel = field(repr=False, default=None)

    def sample_steps(self, rng, states):
        """One increment of the loss walk per path; returns (xi, next_state)."""
        states = np.asarray(states)
        m = states.size
        hold = rng.exponential(size=m) / self.rates[states]
        gain = self.premiums[states] * hold
        u = rng.random(m)
        claims = np.zeros(m)
        nxt = np.empty(m, dtype=np.int64)
        table = dict(self.claim_table)
        n = len(self.rates)
        for s in np.unique(states):
            mask = states == s
            row = self.transition[s]
            cum = np.cumsum(row)
            pick = np.minimum(np.searchsorted(cum, u[mask], side="right"), n - 1)
            nxt[mask] = pick
            for t in np.unique(pick):
                law = table.get((int(s), int(t)))
                if law is not None:
                    sel = np.nonzero(mask)[0][pick == t]
                    claims[sel] = law.sample(rng, sel.size)
        return claims - gain, nxt

    def maximum_exceeds_mc(self, x, n=100_000, seed=0, i0=0):
        """MC estimate of P_i0(max_k S_k > x); equals the ruin probability."""
        from .simulate import Estimate, _batch_rng, _batch_sizes

        gamma = adjustment_coefficient(self.model)
        margin = max(25.0 / gamma, 10.0 * self.model.largest_claim_mean())
        sizes = _batch_sizes(n)
        total = total_sq = count = 0.0
        for b, m in enumerate(sizes):
            rng = _batch_rng(seed, b, phase=1000 + i0)
            s = np.zeros(m)
            peak = np.zeros(m)
            st = np.full(m, i0, dtype=np.int64)
            act = np.ones(m, dtype=bool)
            for _ in range(10_000_000):
                ai = np.nonzero(act)[0]
                if ai.size == 0:
                    break
                xi, nxt = self.sample_steps(rng, st[ai])
                s[ai] += xi
                st[ai] = nxt
                peak[ai] = np.maximum(peak[ai], s[ai])
                act[ai] &= (peak[ai] <= x) & (s[ai] > x - margin)
            else:
                raise RuinError("walk maximum did not resolve")
            hit = (peak > x).astype(float)
            total += hit.sum()
            total_sq += hit.sum()
            count += m
        mean = total / count
        se = np.sqrt(max(total_sq / count - mean * mean, 0.0) / count)
        return Estimate(value=float(mean), se=float(se), n=int(count), seed=int(seed),
                        method="crude")


def embedded_walk(model: RegimeModel) -> EmbeddedWalk:
    model = model.validated()
    lam = model.lam()
    qmat = model.q()
    n = model.n_states
    rates = lam - np.diag(qmat)
    if np.any(rates <= 0):
        bad = int(np.argmin(rates))
        raise RuinError(f"state {bad} has no events (lam - q_ii = 0); the walk is stuck")
    trans = np.zeros((n, n))
    table = {}
    for i in range(n):
        trans[i, i] = lam[i] / rates[i]
        if lam[i] > 0:
            table[(i, i)] = model.state_claims[i]
        for j in range(n):
            if j != i and qmat[i, j] > 0:
                trans[i, j] = qmat[i, j] / rates[i]
                law = model.switch_claim(i, j)
                if law.mean > 0:
                    table[(i, j)] = law
    means = np.zeros(n)
    for i in range(n):
        claim_mean = sum(trans[i, j] * law.mean for (a, j), law in table.items() if a == i)
        means[i] = claim_mean - model.p()[i] / rates[i]
    pi_walk = stationary_distribution(_walk_generator(trans))
    abar = float(-(pi_walk @ means))
    return EmbeddedWalk(transition=trans, rates=rates, premiums=model.p(),
                        claim_table=tuple(table.items()), increment_means=means,
                        stationary=pi_walk, mean_descent=abar, model=model)


def _walk_generator(trans):
    """Stationary law of a stochastic matrix via the generator P - I."""
    return trans - np.eye(trans.shape[0])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def ruin_curve_csv(model: RegimeModel, xs, path):
    """Write x, phi_1 .. phi_N rows for the classical ruin probability."""
    xs = np.asarray(xs, dtype=float)
    phi = np.atleast_2d(ruin_probability(model, xs))
    n = model.n_states
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x"] + [f"phi_{i + 1}" for i in range(n)])
        for k, x in enumerate(xs):
            writer.writerow([f"{x:.10g}"] + [f"{v:.12g}" for v in phi[k]])
