"""Event-driven Monte Carlo for the regime-switching risk process.

Paths are simulated exactly: in state i events arrive at rate lam_i - q_ii,
an event is a claim with probability lam_i/(lam_i - q_ii) and otherwise a
regime switch (with its own claim when the model attaches one), and between
events the surplus drifts up linearly at the state premium rate.  Ruin,
level up-crossings and excursion clocks are resolved in continuous time from
the linear drift, never on a grid.

Replications run in fixed-size batches of 4096 paths in lockstep.  Batch b of
a run with seed s draws from Philox(key=s, counter=[0, phase, b, 0]), so the
estimate for a given (seed, n) is bit-identical no matter how many worker
threads participate.  Set MMRUIN_WORKERS to parallelize over batches.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import RegimeModel
from .spectral import adjustment_coefficient, tilt_model

__all__ = [
    "Estimate",
    "PathEvent",
    "SimulationError",
    "simulate_path",
    "mc_ruin",
    "mc_exit",
    "mc_parisian",
    "mc_deficit",
    "mc_discounted",
    "mc_gerber_shiu",
    "mc_upcross_time",
    "mc_occupation",
    "mc_mean_surplus",
    "mc_likelihood_ratio_mean",
]

BATCH = 4096


class SimulationError(RuntimeError):
    pass


@dataclass
class Estimate:
    """Monte Carlo estimate with its sampling uncertainty."""

    value: float
    se: float
    n: int
    seed: int
    method: str
    ci_level: float = 0.95
    lr_max: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def _zq(self):
        return float(stats.norm.ppf(0.5 * (1.0 + self.ci_level)))

    @property
    def ci_lo(self):
        return self.value - self._zq * self.se

    @property
    def ci_hi(self):
        return self.value + self._zq * self.se

    def within(self, target, k=3.0):
        """True when target lies inside k standard errors of the estimate."""
        return abs(self.value - target) <= k * max(self.se, 1e-300)

    def to_record(self):
        return {
            "value": self.value,
            "se": self.se,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "n": self.n,
            "seed": self.seed,
            "method": self.method,
        }


@dataclass(frozen=True)
class PathEvent:
    time: float
    kind: str  # "claim" | "regime-switch" | "level-crossing"
    x_before: float
    x_after: float
    j_before: int
    j_after: int


# ---------------------------------------------------------------------------
# model arrays shared by all kernels
# ---------------------------------------------------------------------------

class _Arrays:
    def __init__(self, model: RegimeModel):
        self.model = model
        self.p = model.p()
        self.lam = model.lam()
        q = model.q()
        self.exit_rate = -np.diag(q)
        self.total_rate = self.lam + self.exit_rate
        self.claim_frac = np.divide(
            self.lam, self.total_rate, out=np.zeros_like(self.lam), where=self.total_rate > 0
        )
        n = model.n_states
        self.switch_targets = []
        self.switch_cum = []
        for i in range(n):
            targets = np.array([j for j in range(n) if j != i and q[i, j] > 0], dtype=np.int64)
            probs = (np.array([q[i, j] for j in targets]) / self.exit_rate[i]) if targets.size else np.array([])
            self.switch_targets.append(targets)
            self.switch_cum.append(np.cumsum(probs))
        self.state_laws = list(model.state_claims)
        self.switch_laws = {}
        for i in range(n):
            for j in self.switch_targets[i]:
                law = model.transition_claims.get((i, int(j)))
                if law is not None and law.mean > 0:
                    self.switch_laws[(i, int(j))] = law


def _batch_rng(seed, batch, phase=0):
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, phase, batch, 0]))


def _n_workers():
    raw = os.environ.get("MMRUIN_WORKERS", "")
    if not raw:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _batch_sizes(n):
    sizes = [BATCH] * (n // BATCH)
    if n % BATCH:
        sizes.append(n % BATCH)
    return sizes


# ---------------------------------------------------------------------------
# the lockstep path kernel
# ---------------------------------------------------------------------------

# deactivation reasons
_DOWN, _UP, _HORIZON, _CLOCK, _CAP, _STUCK = 1, 2, 3, 4, 5, 6


def _run_batch(arr: _Arrays, rng, m, x0, j0, *, horizon=None, up=None, up_reason=_UP,
               down=True, zeta=None, band=None, max_steps=2_000_000):
    """Advance m lockstep paths until every one of them stops.

    down=True stops a path the instant its surplus jumps strictly below 0
    (classical ruin).  zeta switches to the excursion-clock rule: paths stop
    only when one negative excursion lasts zeta.  up stops at the exact
    drift-crossing of that level (used for exits and regeneration caps).
    band=(lo, hi) accumulates the time spent with the surplus in the band.
    """
    x = np.full(m, float(x0))
    j = np.full(m, int(j0), dtype=np.int64)
    t = np.zeros(m)
    exc = np.zeros(m)  # running negative-excursion clock
    band_time = np.zeros(m)
    active = np.ones(m, dtype=bool)
    reason = np.zeros(m, dtype=np.int8)
    tau = np.full(m, np.nan)
    deficit = np.full(m, np.nan)
    x_pre = np.full(m, np.nan)
    x_end = np.full(m, np.nan)
    j_end = np.full(m, -1, dtype=np.int64)

    if zeta is not None and zeta <= 0:
        # a zero clock collapses to classical ruin
        zeta = None
        down = True

    def finish(idx, why, times, xs_final):
        reason[idx] = why
        tau[idx] = times
        x_end[idx] = xs_final
        j_end[idx] = j[idx]
        active[idx] = False

    def settle_down(idx, x_before):
        below = x[idx] < 0
        if not np.any(below):
            return
        bi = idx[below]
        if down:
            x_pre[bi] = x_before[below]
            deficit[bi] = -x[bi]
            finish(bi, _DOWN, t[bi], x[bi])
        elif zeta is not None:
            fresh = x_before[below] >= 0
            exc[bi[fresh]] = 0.0  # excursion clock starts at this jump

    for _ in range(max_steps):
        ai = np.nonzero(active)[0]
        if ai.size == 0:
            break
        js = j[ai]
        rates = arr.total_rate[js]
        draws = rng.exponential(size=ai.size)
        with np.errstate(divide="ignore"):
            dt = np.where(rates > 0, draws / np.where(rates > 0, rates, 1.0), np.inf)

        px = arr.p[js]
        xs = x[ai]
        ts = t[ai]

        # exact first-crossing times within the drift segment
        t_up = np.full(ai.size, np.inf)
        if up is not None:
            below_up = xs < up
            t_up[below_up] = (up - xs[below_up]) / px[below_up]
            t_up[~below_up] = 0.0
        t_hor = np.full(ai.size, np.inf) if horizon is None else np.maximum(horizon - ts, 0.0)
        t_clock = np.full(ai.size, np.inf)
        if zeta is not None:
            neg = xs < 0
            t_zero = np.where(neg, -xs / px, np.inf)  # drift-crossing back to 0
            budget = np.maximum(zeta - exc[ai], 0.0)
            fires = neg & (budget < t_zero)
            t_clock[fires] = budget[fires]

        t_stop = np.minimum(np.minimum(t_up, t_hor), t_clock)
        interrupted = t_stop <= dt
        dt_eff = np.where(interrupted, t_stop, dt)

        if band is not None:
            lo, hi = band
            seg_hi = xs + px * dt_eff
            overlap = np.maximum(0.0, np.minimum(seg_hi, hi) - np.maximum(xs, lo))
            band_time[ai] += overlap / px

        if zeta is not None:
            neg = xs < 0
            t_zero = np.where(neg, -xs / px, np.inf)
            exc[ai] += np.where(neg, np.minimum(dt_eff, t_zero), 0.0)
            crossed = neg & (t_zero < dt_eff)
            exc[ai[crossed]] = 0.0

        if np.any(interrupted):
            ii = np.nonzero(interrupted)[0]
            kinds = np.where(
                t_clock[ii] <= dt_eff[ii], _CLOCK,
                np.where(t_up[ii] <= dt_eff[ii], up_reason, _HORIZON),
            )
            finish(ai[ii], kinds, ts[ii] + dt_eff[ii], xs[ii] + px[ii] * dt_eff[ii])

        gi = ai[~interrupted]
        if gi.size == 0:
            continue
        dtg = dt[~interrupted]
        stuck = np.isinf(dtg)
        if np.any(stuck):
            # no events and nothing to interrupt: the path just drifts forever
            finish(gi[stuck], _STUCK, t[gi[stuck]], x[gi[stuck]])
            gi = gi[~stuck]
            dtg = dtg[~stuck]
        if gi.size == 0:
            continue

        x[gi] += arr.p[j[gi]] * dtg
        t[gi] += dtg

        # event type
        u = rng.random(gi.size)
        is_claim = u < arr.claim_frac[j[gi]]

        ci = gi[is_claim]
        if ci.size:
            sizes = np.empty(ci.size)
            cjs = j[ci]
            for s in np.unique(cjs):
                mask = cjs == s
                sizes[mask] = arr.state_laws[s].sample(rng, int(mask.sum()))
            x_before = x[ci].copy()
            x[ci] -= sizes
            settle_down(ci, x_before)

        si = gi[~is_claim]
        if si.size:
            usw = rng.random(si.size)
            sjs = j[si]
            new_states = np.empty(si.size, dtype=np.int64)
            for s in np.unique(sjs):
                mask = sjs == s
                cum = arr.switch_cum[s]
                if cum.size == 0:
                    raise SimulationError(f"state {s} has exit rate but no switch targets")
                pick = np.minimum(np.searchsorted(cum, usw[mask], side="right"), len(cum) - 1)
                new_states[mask] = arr.switch_targets[s][pick]
            sizes = np.zeros(si.size)
            for (a, b), law in sorted(arr.switch_laws.items()):
                mask = (sjs == a) & (new_states == b)
                if np.any(mask):
                    sizes[mask] = law.sample(rng, int(mask.sum()))
            x_before = x[si].copy()
            j[si] = new_states
            x[si] -= sizes
            settle_down(si, x_before)
    else:
        raise SimulationError("path kernel exceeded its step budget")

    if np.any(active):
        raise SimulationError("paths left running after the kernel loop")
    return {
        "reason": reason,
        "tau": tau,
        "deficit": deficit,
        "x_pre": x_pre,
        "x_end": x_end,
        "j_end": j_end,
        "band_time": band_time,
    }


# ---------------------------------------------------------------------------
# single-path event list
# ---------------------------------------------------------------------------

def simulate_path(model: RegimeModel, x0, i0, horizon, seed, stop_on_ruin=True, up_level=None):
    """One exact path as a list of PathEvent records.

    horizon may be None when a stopping rule (ruin or up_level) bounds the
    run.  Level crossings are emitted as events of kind "level-crossing".
    """
    if horizon is None and not stop_on_ruin and up_level is None:
        raise ValueError("need a horizon or a stopping rule")
    arr = _Arrays(model.validated())
    rng = _batch_rng(int(seed), 0, phase=9)
    x = float(x0)
    j = int(i0)
    t = 0.0
    events = []
    for _ in range(10_000_000):
        rate = arr.total_rate[j]
        dt = rng.exponential() / rate if rate > 0 else np.inf
        t_up = np.inf
        if up_level is not None:
            t_up = (up_level - x) / arr.p[j] if x < up_level else 0.0
        t_hor = horizon - t if horizon is not None else np.inf
        t_stop = min(t_up, t_hor)
        if t_stop <= dt:
            if t_stop == t_up and up_level is not None:
                events.append(PathEvent(t + t_up, "level-crossing", up_level, up_level, j, j))
            break
        if np.isinf(dt):
            break
        x_new = x + arr.p[j] * dt
        t += dt
        if rng.random() < arr.claim_frac[j]:
            size = float(arr.state_laws[j].sample(rng, 1)[0])
            events.append(PathEvent(t, "claim", x_new, x_new - size, j, j))
            x = x_new - size
        else:
            cum = arr.switch_cum[j]
            pick = min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)
            k = int(arr.switch_targets[j][pick])
            law = arr.switch_laws.get((j, k))
            size = float(law.sample(rng, 1)[0]) if law is not None else 0.0
            events.append(PathEvent(t, "regime-switch", x_new, x_new - size, j, k))
            x = x_new - size
            j = k
        if x < 0:
            events.append(PathEvent(t, "level-crossing", x, x, j, j))
            if stop_on_ruin:
                break
    return events


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _accumulate(fn, sizes, workers):
    """Run fn(batch_index, batch_size) for every batch, results in batch order."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(len(sizes)), sizes))
    return [fn(b, s) for b, s in zip(range(len(sizes)), sizes)]


def _reduce_mean(per_batch, seed, method):
    total = sum(p[0] for p in per_batch)
    total_sq = sum(p[1] for p in per_batch)
    count = sum(p[2] for p in per_batch)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    est = Estimate(value=float(mean), se=float(np.sqrt(var / count)), n=int(count),
                   seed=int(seed), method=method)
    if per_batch and len(per_batch[0]) > 3:
        est.lr_max = float(max(p[3] for p in per_batch))
    return est


def _tilted_setup(model):
    gamma = adjustment_coefficient(model)
    return gamma, tilt_model(model, gamma)


def mc_ruin(model: RegimeModel, x, t=None, n=100_000, seed=0, mode="auto"):
    """Ruin probability estimates, one per initial state.

    t=None asks for the infinite-horizon probability and needs the tilted
    estimator; crude simulation would never stop on surviving paths.
    """
    model = model.validated()
    if mode == "auto":
        mode = "tilted" if t is None else "crude"
    if t is None and mode == "crude":
        raise SimulationError("infinite-horizon ruin needs mode='tilted'; "
                              "crude paths would never terminate")
    workers = _n_workers()
    sizes = _batch_sizes(n)
    out = []
    if mode == "crude":
        arr = _Arrays(model)
        for i0 in range(model.n_states):
            def fn(b, m, i0=i0):
                rng = _batch_rng(seed, b, phase=i0)
                res = _run_batch(arr, rng, m, x, i0, horizon=t)
                hit = (res["reason"] == _DOWN).astype(float)
                return hit.sum(), hit.sum(), m
            out.append(_reduce_mean(_accumulate(fn, sizes, workers), seed, "crude"))
        return out
    _, tilted = _tilted_setup(model)
    arr = _Arrays(tilted.model)
    for i0 in range(model.n_states):
        def fn(b, m, i0=i0):
            rng = _batch_rng(seed, b, phase=i0)
            res = _run_batch(arr, rng, m, x, i0, horizon=None)
            if not np.all(res["reason"] == _DOWN):
                raise SimulationError("a tilted path survived; the tilt should make ruin certain")
            w = np.exp(tilted.log_weight(i0, res["j_end"], res["x_end"] - x, res["tau"]))
            if t is not None:
                w = w * (res["tau"] <= t)
            return w.sum(), (w * w).sum(), m, w.max()
        out.append(_reduce_mean(_accumulate(fn, sizes, workers), seed, "importance-tilted"))
    return out


def mc_exit(model: RegimeModel, x, a, q=0.0, alpha=0.0, n=100_000, seed=0):
    """Two-sided exit functionals as (N, N) matrices with standard errors.

    up[i, j] estimates E_x[e^{-q T_a}; level a reached before ruin, end state j]
    started in state i; down[i, j] the analogue at ruin, weighted by
    e^{alpha * X(tau)}.
    """
    model = model.validated()
    if not 0 <= x <= a:
        raise ValueError("need 0 <= x <= a")
    arr = _Arrays(model)
    workers = _n_workers()
    sizes = _batch_sizes(n)
    nstates = model.n_states
    up_v = np.zeros((nstates, nstates))
    up_s = np.zeros((nstates, nstates))
    dn_v = np.zeros((nstates, nstates))
    dn_s = np.zeros((nstates, nstates))
    for i0 in range(nstates):
        def fn(b, m, i0=i0):
            rng = _batch_rng(seed, b, phase=i0)
            res = _run_batch(arr, rng, m, x, i0, up=a)
            disc = np.exp(-q * res["tau"]) if q else np.ones(m)
            uw = np.where(res["reason"] == _UP, disc, 0.0)
            dw = np.where(res["reason"] == _DOWN, disc * np.exp(alpha * res["x_end"]), 0.0)
            su = np.zeros((nstates, 2))
            sd = np.zeros((nstates, 2))
            for jj in range(nstates):
                mask = res["j_end"] == jj
                su[jj] = [(uw * mask).sum(), ((uw * mask) ** 2).sum()]
                sd[jj] = [(dw * mask).sum(), ((dw * mask) ** 2).sum()]
            return su, sd, m
        per = _accumulate(fn, sizes, workers)
        count = sum(p[2] for p in per)
        for jj in range(nstates):
            for block, vmat, smat in ((0, up_v, up_s), (1, dn_v, dn_s)):
                s1 = sum(p[block][jj, 0] for p in per)
                s2 = sum(p[block][jj, 1] for p in per)
                mean = s1 / count
                vmat[i0, jj] = mean
                smat[i0, jj] = np.sqrt(max(s2 / count - mean * mean, 0.0) / count)
    return {"up": (up_v, up_s), "down": (dn_v, dn_s), "n": n, "seed": seed}


def _survival_cap(model, floor):
    """Surplus level whose classical ruin probability is below floor."""
    from .ruin import ruin_probability  # deferred: ruin imports scale, not simulate

    level = max(4.0 * model.largest_claim_mean(), 4.0)
    for _ in range(60):
        if float(np.max(ruin_probability(model, level))) < floor:
            return level
        level *= 1.5
    raise SimulationError("could not find a regeneration cap; ruin decays too slowly")


def mc_parisian(model: RegimeModel, x, zeta, n=100_000, seed=0, i0=None):
    """Parisian ruin probability: some negative excursion outlasting zeta.

    Paths stop at Parisian ruin or at a regeneration cap chosen so the
    classical ruin probability from the cap (an upper bound on the missed
    mass) stays below 1e-4 of the estimate; a pilot run sizes the cap.
    """
    from .ruin import ruin_probability

    model = model.validated()
    states = range(model.n_states) if i0 is None else [int(i0)]
    arr = _Arrays(model)
    workers = _n_workers()
    cap0 = _survival_cap(model, 1e-6)
    sizes = _batch_sizes(n)
    out = []
    for st in states:
        pilot_sizes = _batch_sizes(max(BATCH, n // 10))

        def pilot_fn(b, m, st=st):
            rng = _batch_rng(seed, b, phase=100 + st)
            res = _run_batch(arr, rng, m, x, st, up=cap0, up_reason=_CAP, down=False, zeta=zeta)
            # a zero clock degenerates to classical ruin (_DOWN)
            hit = np.isin(res["reason"], (_CLOCK, _DOWN)).astype(float)
            return hit.sum(), hit.sum(), m

        pilot = _reduce_mean(_accumulate(pilot_fn, pilot_sizes, workers), seed, "pilot")
        target = max(pilot.value, 1e-3)
        cap = cap0
        while float(np.max(ruin_probability(model, cap))) >= 1e-4 * target:
            cap *= 1.5

        def fn(b, m, st=st, cap=cap):
            rng = _batch_rng(seed, b, phase=200 + st)
            res = _run_batch(arr, rng, m, x, st, up=cap, up_reason=_CAP, down=False, zeta=zeta)
            hit = np.isin(res["reason"], (_CLOCK, _DOWN)).astype(float)
            return hit.sum(), hit.sum(), m

        est = _reduce_mean(_accumulate(fn, sizes, workers), seed, "crude")
        est.diagnostics["regeneration_cap"] = cap
        est.diagnostics["truncation_bias_bound"] = float(np.max(ruin_probability(model, cap)))
        out.append(est)
    return out[0] if i0 is not None else out


def mc_deficit(model: RegimeModel, x, n=100_000, seed=0, i0=0, bins=60):
    """Deficit-at-ruin sample, tilted so that ruin happens on every path.

    The importance weights turn the sample into the original-measure deficit
    law conditional on ruin; the result carries samples, normalized weights
    and a weighted histogram.
    """
    model = model.validated()
    _, tilted = _tilted_setup(model)
    arr = _Arrays(tilted.model)
    workers = _n_workers()
    sizes = _batch_sizes(n)

    def fn(b, m):
        rng = _batch_rng(seed, b, phase=300 + i0)
        res = _run_batch(arr, rng, m, x, i0, horizon=None)
        logw = tilted.log_weight(i0, res["j_end"], res["x_end"] - x, res["tau"])
        return res["deficit"], np.exp(logw)

    per = _accumulate(fn, sizes, workers)
    deficits = np.concatenate([p[0] for p in per])
    weights = np.concatenate([p[1] for p in per])
    weights = weights / weights.sum()
    edges = np.linspace(0.0, float(np.quantile(deficits, 0.999)), bins + 1)
    hist, _ = np.histogram(deficits, bins=edges, weights=weights, density=True)
    return {"samples": deficits, "weights": weights, "edges": edges, "density": hist,
            "n": len(deficits), "seed": seed}


def mc_discounted(model: RegimeModel, x, q, n=100_000, seed=0):
    """E[e^{-q tau}; ruin] per initial state via the tilted estimator."""
    model = model.validated()
    _, tilted = _tilted_setup(model)
    arr = _Arrays(tilted.model)
    workers = _n_workers()
    sizes = _batch_sizes(n)
    out = []
    for i0 in range(model.n_states):
        def fn(b, m, i0=i0):
            rng = _batch_rng(seed, b, phase=400 + i0)
            res = _run_batch(arr, rng, m, x, i0, horizon=None)
            lr = np.exp(tilted.log_weight(i0, res["j_end"], res["x_end"] - x, res["tau"]))
            w = lr * np.exp(-q * res["tau"])
            return w.sum(), (w * w).sum(), m, lr.max()
        out.append(_reduce_mean(_accumulate(fn, sizes, workers), seed, "importance-tilted"))
    return out


def mc_gerber_shiu(model: RegimeModel, x, penalty, q=0.0, n=100_000, seed=0):
    """E[e^{-q tau} w(X_{tau-}, |X_tau|); ruin] per initial state.

    penalty is a vectorized callable w(surplus_before, deficit).
    """
    model = model.validated()
    _, tilted = _tilted_setup(model)
    arr = _Arrays(tilted.model)
    workers = _n_workers()
    sizes = _batch_sizes(n)
    out = []
    for i0 in range(model.n_states):
        def fn(b, m, i0=i0):
            rng = _batch_rng(seed, b, phase=500 + i0)
            res = _run_batch(arr, rng, m, x, i0, horizon=None)
            lr = np.exp(tilted.log_weight(i0, res["j_end"], res["x_end"] - x, res["tau"]))
            w = lr * np.exp(-q * res["tau"]) * np.asarray(penalty(res["x_pre"], res["deficit"]), dtype=float)
            return w.sum(), (w * w).sum(), m, lr.max()
        out.append(_reduce_mean(_accumulate(fn, sizes, workers), seed, "importance-tilted"))
    return out


def mc_upcross_time(model: RegimeModel, x, z, n=100_000, seed=0, i0=0):
    """Samples of the first passage time to level z, with the arrival state."""
    model = model.validated()
    arr = _Arrays(model)
    workers = _n_workers()
    sizes = _batch_sizes(n)

    def fn(b, m):
        rng = _batch_rng(seed, b, phase=600 + i0)
        res = _run_batch(arr, rng, m, x, i0, up=z, down=False)
        if not np.all(res["reason"] == _UP):
            raise SimulationError("some paths never reached the level; is the drift positive?")
        return res["tau"], res["j_end"]

    per = _accumulate(fn, sizes, workers)
    times = np.concatenate([p[0] for p in per])
    states = np.concatenate([p[1] for p in per])
    return {"times": times, "states": states, "n": len(times), "seed": seed}


def mc_occupation(model: RegimeModel, x, band, n=100_000, seed=0, i0=0):
    """Expected time the surplus spends inside band before ruin."""
    model = model.validated()
    arr = _Arrays(model)
    workers = _n_workers()
    cap = max(_survival_cap(model, 1e-8), band[1] + 4.0 * model.largest_claim_mean())
    sizes = _batch_sizes(n)

    def fn(b, m):
        rng = _batch_rng(seed, b, phase=700 + i0)
        res = _run_batch(arr, rng, m, x, i0, up=cap, up_reason=_CAP, band=band)
        bt = res["band_time"]
        return bt.sum(), (bt * bt).sum(), m

    est = _reduce_mean(_accumulate(fn, sizes, workers), seed, "crude")
    est.diagnostics["regeneration_cap"] = cap
    return est


def mc_mean_surplus(model: RegimeModel, x, t, n=100_000, seed=0, i0=0):
    """E[X_t] from crude paths (drift sanity checks)."""
    model = model.validated()
    arr = _Arrays(model)
    workers = _n_workers()
    sizes = _batch_sizes(n)

    def fn(b, m):
        rng = _batch_rng(seed, b, phase=800 + i0)
        res = _run_batch(arr, rng, m, x, i0, horizon=t, down=False)
        xe = res["x_end"]
        return xe.sum(), (xe * xe).sum(), m

    return _reduce_mean(_accumulate(fn, sizes, workers), seed, "crude")


def mc_likelihood_ratio_mean(model: RegimeModel, x, t, n=100_000, seed=0, i0=0):
    """Mean likelihood ratio at a fixed horizon under the tilted measure.

    Exactly 1 for every t; the martingale sanity check of the measure change.
    """
    model = model.validated()
    _, tilted = _tilted_setup(model)
    arr = _Arrays(tilted.model)
    workers = _n_workers()
    sizes = _batch_sizes(n)

    def fn(b, m):
        rng = _batch_rng(seed, b, phase=900 + i0)
        res = _run_batch(arr, rng, m, x, i0, horizon=t, down=False)
        w = np.exp(tilted.log_weight(i0, res["j_end"], res["x_end"] - x, res["tau"]))
        return w.sum(), (w * w).sum(), m, w.max()

    return _reduce_mean(_accumulate(fn, sizes, workers), seed, "importance-tilted")
