"""Regime-switching risk model.

The surplus grows at a state-dependent premium rate, pays claims from a
state-dependent Poisson stream, and pays an extra claim when the modulating
chain switches states.  ``RegimeModel`` is a frozen container; everything
derived from it (stationary law, drifts, spectral data) lives in functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

from .claims import ClaimLaw, Degenerate

__all__ = [
    "RegimeModel",
    "DriftReport",
    "ModelValidationError",
    "validate_model",
    "stationary_distribution",
    "drift_report",
    "claim_transform",
    "integrated_tail",
]

_DEGENERATE = Degenerate()


class ModelValidationError(ValueError):
    """Carries every violated model invariant, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class RegimeModel:
    """Markov-modulated risk process specification.

    Attributes
    ----------
    q_matrix : (N, N) intensity matrix of the modulating chain.
    premiums : per-state premium rates, all > 0.
    arrival_rates : per-state Poisson claim rates, >= 0.
    state_claims : per-state claim laws (index i).
    transition_claims : dict mapping (i, j), i != j, to the claim paid on a
        switch i -> j; absent pairs mean no switching claim.
    """

    q_matrix: tuple
    premiums: tuple
    arrival_rates: tuple
    state_claims: tuple
    transition_claims: dict = None

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q_matrix, dtype=float))
        object.__setattr__(self, "q_matrix", tuple(map(tuple, q)))
        object.__setattr__(self, "premiums", tuple(float(p) for p in np.atleast_1d(self.premiums)))
        object.__setattr__(self, "arrival_rates", tuple(float(l) for l in np.atleast_1d(self.arrival_rates)))
        object.__setattr__(self, "state_claims", tuple(self.state_claims))
        object.__setattr__(self, "transition_claims", dict(self.transition_claims or {}))

    @property
    def n_states(self) -> int:
        return len(self.premiums)

    def q(self) -> np.ndarray:
        return np.asarray(self.q_matrix, dtype=float)

    def p(self) -> np.ndarray:
        return np.asarray(self.premiums, dtype=float)

    def lam(self) -> np.ndarray:
        return np.asarray(self.arrival_rates, dtype=float)

    def switch_claim(self, i: int, j: int) -> ClaimLaw:
        return self.transition_claims.get((i, j), _DEGENERATE)

    def all_claims(self):
        """Every law that actually enters the dynamics (rate > 0 pairs)."""
        out = [law for law, lam in zip(self.state_claims, self.lam()) if lam > 0]
        q = self.q()
        for (i, j), law in self.transition_claims.items():
            if q[i, j] > 0:
                out.append(law)
        return out

    @property
    def mgf_abscissa(self) -> float:
        """Joint convergence bound for all active claim transforms."""
        laws = self.all_claims()
        return min((law.mgf_abscissa for law in laws), default=math.inf)

    @property
    def heavy_tailed(self) -> bool:
        return any(not law.has_mgf for law in self.all_claims())

    @property
    def rational(self) -> bool:
        """True when every active claim transform is a ratio of polynomials."""
        return all(law.transform_fraction() is not None for law in self.all_claims())

    def cache_key(self):
        """Hashable identity of the model (fields are tuples and frozen laws)."""
        return (
            self.q_matrix,
            self.premiums,
            self.arrival_rates,
            self.state_claims,
            tuple(sorted(self.transition_claims.items())),
        )

    def largest_claim_mean(self) -> float:
        return max((law.mean for law in self.all_claims()), default=1.0)

    def validated(self) -> "RegimeModel":
        problems = validate_model(self)
        if problems:
            raise ModelValidationError(problems)
        return self


def validate_model(model: RegimeModel) -> list:
    """Return every violated structural invariant (empty list when valid)."""
    problems = []
    q = model.q()
    n = model.n_states
    if q.shape != (n, n):
        problems.append(f"q_matrix shape {q.shape} does not match {n} states")
        return problems
    if len(model.arrival_rates) != n or len(model.state_claims) != n:
        problems.append("premiums, arrival_rates and state_claims must all have length N")
        return problems
    off = q - np.diag(np.diag(q))
    if np.any(off < -1e-12):
        problems.append("q_matrix off-diagonal entries must be nonnegative")
    if np.any(np.abs(q.sum(axis=1)) > 1e-10):
        problems.append("q_matrix rows must sum to zero")
    if n > 1:
        ncomp, _ = connected_components(csgraph=(off > 0).astype(int), directed=True, connection="strong")
        if ncomp != 1:
            problems.append("modulating chain must be irreducible")
    if np.any(model.p() <= 0):
        problems.append("premium rates must be positive")
    if np.any(model.lam() < 0):
        problems.append("arrival rates must be nonnegative")
    for i, law in enumerate(model.state_claims):
        if not isinstance(law, ClaimLaw):
            problems.append(f"state claim {i} is not a ClaimLaw")
        elif model.lam()[i] > 0 and not law.mean < math.inf:
            problems.append(f"state claim {i} ({law.label()}) has infinite mean")
    for (i, j), law in model.transition_claims.items():
        if not (0 <= i < n and 0 <= j < n and i != j):
            problems.append(f"transition claim key {(i, j)} is not an off-diagonal pair")
        elif not isinstance(law, ClaimLaw):
            problems.append(f"transition claim {(i, j)} is not a ClaimLaw")
        elif q[i, j] > 0 and not law.mean < math.inf:
            problems.append(f"transition claim {(i, j)} ({law.label()}) has infinite mean")
    return problems


def stationary_distribution(q_matrix) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 for an irreducible intensity matrix."""
    q = np.atleast_2d(np.asarray(q_matrix, dtype=float))
    n = q.shape[0]
    if n == 1:
        return np.ones(1)
    a = np.vstack([q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = float(np.max(np.abs(pi @ q)))
    if resid > 1e-10 or np.any(pi < -1e-12):
        raise ValueError(f"stationary distribution solve failed (residual {resid:.2e})")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _instantaneous_drifts(model: RegimeModel) -> np.ndarray:
    """d_i = p_i - lambda_i E C^(i) - sum_j q_ij E C^(ij)."""
    q = model.q()
    d = model.p() - model.lam() * np.array([law.mean for law in model.state_claims])
    for (i, j), law in model.transition_claims.items():
        d[i] -= q[i, j] * law.mean
    return d


@dataclass(frozen=True)
class DriftReport:
    per_state_means: tuple  # E_i X_1 over one time unit, phase path averaged
    instantaneous: tuple  # d_i, the local drift rate in state i
    stationary_pi: tuple
    stationary_drift: float  # pi . d = long-run growth rate

    @property
    def net_profit_per_state(self) -> bool:
        return all(m > 0 for m in self.per_state_means)

    @property
    def net_profit_stationary(self) -> bool:
        return self.stationary_drift > 0


def drift_report(model: RegimeModel) -> DriftReport:
    """Per-state one-step means and the stationary drift.

    E_i X_1 integrates the local drifts d over the phase path:
    E_i X_1 = (int_0^1 exp(Q s) ds . d)_i, with the integral read off the
    upper-right block of expm([[Q, I], [0, 0]]).
    """
    n = model.n_states
    d = _instantaneous_drifts(model)
    q = model.q()
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = q
    block[:n, n:] = np.eye(n)
    m1 = expm(block)[:n, n:]
    per_state = m1 @ d
    pi = stationary_distribution(q)
    return DriftReport(
        per_state_means=tuple(per_state),
        instantaneous=tuple(d),
        stationary_pi=tuple(pi),
        stationary_drift=float(pi @ d),
    )


def claim_transform(law: ClaimLaw, s):
    """E exp(-s C) with domain checking delegated to the law."""
    return law.transform(s)


def integrated_tail(law: ClaimLaw, x):
    """Capped integrated tail min(1, int_x^inf sf(z) dz)."""
    return law.integrated_tail(x)
