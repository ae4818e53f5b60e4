"""Scale matrices and first-passage functionals for regime-switching risk paths.

The central object is :class:`ScaleOperator`, which caches the spectral data of
one (model, q) pair and evaluates

* the scale matrix W (spectral sum over exponent roots, or Laplace inversion
  when a claim transform is not rational),
* the second scale matrix Z (quadrature against W),
* the first-passage generator G and its dual R built from the right-half roots,
* the limit matrix C_inf = lim_a W(a)^{-1} Z(a) by a-doubling,
* two-sided exit matrices and the potential (occupation) density.

The a-doubling limit is numerically brutal: W(a) grows like exp(l_max a) while
the ratio converges like exp(-gamma a), so double precision bottoms out around
1e-3 for typical two-state models.  The doubling loop therefore re-polishes the
exponent roots and residues in mpmath at a precision scaled to l_max * a and
forms the ratio there.  Everything else runs in ordinary double precision.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from numpy.polynomial.legendre import leggauss

from .laplace import euler_inversion
from .model import RegimeModel
from .spectral import SpectralError, _mexp, exponent_roots, matrix_exponent, rightmost_root

__all__ = [
    "ScaleOperator",
    "ScaleSet",
    "scale_operator",
    "w_matrix",
    "z_matrix",
    "c_infinity",
    "g_matrix",
    "r_matrix",
    "potential_density",
    "exit_upward",
    "exit_downward",
    "build_scale_set",
]

_GL16 = leggauss(16)


class ScaleOperator:
    """Evaluator for the scale objects of a fixed (model, q) pair.

    method : "spectral" (exact sum over exponent roots; needs rational claim
        transforms), "inversion" (Bromwich-Euler inversion of (F(s)-qI)^{-1}),
        or "auto" which picks spectral whenever it is available.
    """

    def __init__(self, model: RegimeModel, q: float, method: str = "auto"):
        q = float(q)
        if q < 0:
            raise ValueError("discount rate q must be nonnegative")
        if method not in ("auto", "spectral", "inversion"):
            raise ValueError(f"unknown method {method!r}")
        if method == "auto":
            method = "spectral" if model.rational else "inversion"
        if method == "spectral" and not model.rational:
            raise ValueError("spectral scale evaluation needs rational claim transforms")
        self.model = model.validated()
        self.q = q
        self.method = method
        self._roots = exponent_roots(model, q) if method == "spectral" else None
        self._c_inf = None
        self._shift = None
        self._ruin_coeffs = None

    # ------------------------------------------------------------------ W
    def w(self, x):
        """Scale matrix W(x); zero for x < 0, diag(1/p) at x = 0."""
        model = self.model
        n = model.n_states
        xa = np.asarray(x, dtype=float)
        shape = xa.shape
        xs = np.atleast_1d(xa).ravel()
        out = np.zeros((xs.size, n, n))
        zero = xs == 0.0
        pos = xs > 0.0
        if np.any(zero):
            out[zero] = np.diag(1.0 / model.p())
        if np.any(pos):
            if self.method == "spectral":
                r = self._roots
                with np.errstate(over="ignore"):
                    ex = np.exp(np.multiply.outer(xs[pos], r.roots))
                    out[pos] = np.real(np.einsum("mr,rij->mij", ex, r.residues))
            else:
                shift = self._inversion_shift()
                qeye = self.q * np.eye(n)

                def fhat(s):
                    return np.linalg.inv(_mexp(model, s, continued=True) - qeye)

                for idx in np.nonzero(pos)[0]:
                    out[idx] = euler_inversion(fhat, xs[idx], shift=shift)
        return out.reshape(shape + (n, n))

    def _inversion_shift(self):
        if self._shift is None:
            s_star = rightmost_root(self.model, self.q)
            self._shift = 0.0 if s_star <= 0 else s_star + max(0.5, 0.1 * s_star)
        return self._shift

    # ------------------------------------------------------------------ Z
    def _int_exp_w(self, alpha, x, rel=1e-10):
        """int_0^x exp(-alpha y) W(y) dy by composite Gauss-Legendre doubling."""
        n = self.model.n_states
        dtype = complex if np.iscomplexobj(np.asarray(alpha)) else float
        if x == 0.0:
            return np.zeros((n, n), dtype=dtype)
        nodes, wts = _GL16
        panels = max(4, int(math.ceil(x / 0.5)))
        prev = None
        for _ in range(8):
            edges = np.linspace(0.0, x, panels + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * np.diff(edges)
            ys = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
            wy = (half[:, None] * wts[None, :]).ravel()
            weight = wy * np.exp(-np.asarray(alpha) * ys) if np.any(alpha) else wy
            val = np.einsum("m,mij->ij", weight, self.w(ys))
            if prev is not None and np.max(np.abs(val - prev)) <= rel * max(1.0, np.max(np.abs(val))):
                return val
            prev = val
            panels *= 2
        raise SpectralError("quadrature for int exp(-a y) W(y) dy did not settle")

    def z(self, x, alpha=0.0):
        """Second scale matrix Z(alpha, x); identity for x <= 0."""
        n = self.model.n_states
        if x <= 0.0:
            return np.eye(n)
        f_alpha = matrix_exponent(self.model, alpha)
        integral = self._int_exp_w(alpha, float(x))
        out = np.exp(np.asarray(alpha) * x) * (np.eye(n) - integral @ (f_alpha - self.q * np.eye(n)))
        if not np.iscomplexobj(np.asarray(alpha)):
            out = np.real_if_close(out, tol=1000)
        return out

    # ---------------------------------------------------------- C_infinity
    def c_infinity(self, tol=1e-8):
        """Limit matrix lim_{a->inf} W(a)^{-1} Z(a) via a-doubling."""
        if self._c_inf is None:
            if self.method == "spectral":
                self._c_inf = self._c_infinity_mp(tol)
            else:
                self._c_inf = self._c_infinity_double(tol)
        return self._c_inf

    def _doubling_start(self):
        if self._roots is not None:
            decay = self._roots.roots[self._roots.decaying]
            rate = float(np.min(-decay.real)) if decay.size else 1.0
        else:
            rate = 1.0
        return max(1.0, 2.0 / rate)

    def _c_infinity_mp(self, tol):
        r = self._roots
        n = self.model.n_states
        lam_max = max(float(np.max(r.roots.real)), 0.0)
        mmat = self.model.q() - self.q * np.eye(n)
        a = self._doubling_start()
        prev = None
        for _ in range(24):
            dps = int(lam_max * a / math.log(10.0)) + 40
            cur = _mp_ratio(self.model, self.q, r.roots, a, dps, mmat)
            if prev is not None and np.max(np.abs(cur - prev)) <= tol * max(1.0, float(np.max(np.abs(cur)))):
                return cur
            prev = cur
            a *= 2.0
        raise SpectralError("C_infinity doubling did not meet the Cauchy tolerance")

    def _c_infinity_double(self, tol):
        n = self.model.n_states
        a = self._doubling_start()
        prev = None
        for _ in range(18):
            wa = self.w(a)
            if np.linalg.cond(wa) > 1e12:
                raise SpectralError(
                    "W(a) became numerically singular before the C_infinity "
                    "doubling converged; this model needs the spectral method"
                )
            cur = np.linalg.solve(wa, self.z(a))
            if prev is not None and np.max(np.abs(cur - prev)) <= tol * max(1.0, float(np.max(np.abs(cur)))):
                return cur
            prev = cur
            a *= 2.0
        raise SpectralError("C_infinity doubling did not meet the Cauchy tolerance")

    # ------------------------------------------------- first-passage data
    def g_matrix(self):
        """Generator-like matrix of the upward first-passage state process."""
        return self._passage_pair()[0]

    def r_matrix(self):
        """Dual of G built from the left null vectors of the right roots."""
        return self._passage_pair()[1]

    def _passage_pair(self):
        r = self._roots
        if r is None:
            raise SpectralError("first-passage matrices need the spectral method")
        lam = r.right_roots
        hmat = r.h[r.right].T  # columns are right null vectors
        vmat = r.v[r.right]  # rows are left null vectors
        if np.linalg.cond(hmat) > 1e10 or np.linalg.cond(vmat) > 1e10:
            raise SpectralError("right-root eigenbasis is nearly defective")
        g = hmat @ np.diag(-lam) @ np.linalg.inv(hmat)
        rd = np.linalg.inv(vmat) @ np.diag(-lam) @ vmat
        for name, m in (("G", g), ("R", rd)):
            if np.max(np.abs(m.imag)) > 1e-7 * (1.0 + np.max(np.abs(m.real))):
                raise SpectralError(f"{name} matrix has non-negligible imaginary part")
        return np.real(g), np.real(rd)

    def exp_r(self, z):
        """exp(R z) for z >= 0, vectorized over z, via the right-root basis."""
        r = self._roots
        if r is None:
            raise SpectralError("exp(R z) needs the spectral method")
        lam = r.right_roots
        vmat = r.v[r.right]
        vinv = np.linalg.inv(vmat)
        za = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
        ez = np.exp(-np.multiply.outer(za, lam))  # (M, n)
        out = np.real(np.einsum("ij,mj,jk->mik", vinv, ez, vmat))
        return out.reshape(np.shape(z) + out.shape[1:]) if np.ndim(z) else out[0]

    # --------------------------------------------------------------- exits
    def exit_upward(self, x, a):
        """E_x[e^{-q T_a}; up-crossing of a before ruin, tracking the regime]."""
        if not 0 <= x <= a:
            raise ValueError("need 0 <= x <= a")
        wa = self.w(a)
        if np.linalg.cond(wa) > 1e12:
            raise SpectralError(
                f"W({a:g}) is too ill-conditioned for the exit solve; use a smaller a"
            )
        return np.linalg.solve(wa.T, self.w(x).T).T

    def exit_downward(self, x, a, alpha=0.0):
        """E_x[e^{-q T_0^- + alpha X(T_0^-)}; ruin before reaching a]."""
        if not 0 <= x <= a:
            raise ValueError("need 0 <= x <= a")
        return self.z(x, alpha) - self.exit_upward(x, a) @ self.z(a, alpha)

    def potential_density(self, x, z):
        """Occupation density u(x, z) of level z before ruin, started at x.

        Written as W(x) e^{Rz} - W(x - z), the two terms grow like the
        leading root and cancel; here only decaying roots enter explicitly
        (right-root terms obey R_j e^{Rz} = e^{-l_j z} R_j and drop out), so
        the evaluation stays accurate for arbitrarily large x.
        """
        r = self._roots
        if r is None:
            raise SpectralError("the potential density needs the spectral method")
        x = float(x)
        scalar = not np.ndim(z)
        za = np.atleast_1d(np.asarray(z, dtype=float))
        decay = r.decaying
        lam_d, res_d = r.roots[decay], r.residues[decay]
        lam_r, res_r = r.right_roots, r.residues[r.right]
        head = np.einsum("r,rij->ij", np.exp(lam_d * x), res_d)
        out = np.einsum("ij,mjk->mik", head, self.exp_r(za))
        below = za <= x
        if np.any(below):
            out[below] -= np.einsum("mr,rij->mij",
                                    np.exp(np.multiply.outer(x - za[below], lam_d)), res_d)
        if np.any(~below):
            out[~below] += np.einsum("mr,rij->mij",
                                     np.exp(np.multiply.outer(x - za[~below], lam_r)), res_r)
        out = np.real(out)
        return out[0] if scalar else out.reshape(np.shape(z) + head.shape)

    # --------------------------------------------- ruin expansion support
    def ruin_coefficients(self):
        """Decaying-root expansion data for the (discounted) ruin transform.

        Returns (rates, coeffs) with rates the decaying roots l_j and coeffs
        B_j = R_j [(Q - qI)/l_j + C_inf], so that the killed-ruin matrix is
        -sum_j exp(l_j x) B_j.  The growing-root coefficients vanish
        identically; their residual size is checked here.
        """
        if self._roots is None:
            raise SpectralError("the ruin expansion needs the spectral method")
        if self._ruin_coeffs is None:
            r = self._roots
            n = self.model.n_states
            cinf = self.c_infinity()
            mmat = self.model.q() - self.q * np.eye(n)
            scale = max(1.0, float(np.max(np.abs(cinf))))
            for j in r.right:
                lam = r.roots[j]
                if lam == 0:
                    continue
                gap = np.max(np.abs(r.residues[j] @ (mmat / lam + cinf)))
                # cancellation happens between terms of size |R||Q|/|lam|,
                # which blows up as q -> 0; tolerate roundoff at that scale
                term = float(np.max(np.abs(r.residues[j]))) * (
                    float(np.max(np.abs(mmat))) / abs(lam) + float(np.max(np.abs(cinf))))
                tol = 1e-6 * scale * max(1.0, float(np.max(np.abs(r.residues[j])))) + 1e-10 * term
                if gap > tol:
                    raise SpectralError(
                        f"growing-root coefficient at root {lam:.6g} did not cancel "
                        f"(residual {gap:.2e}); spectral data is inconsistent"
                    )
            decay = r.decaying
            rates = r.roots[decay]
            coeffs = np.array([r.residues[j] @ (mmat / r.roots[j] + cinf) for j in decay])
            self._ruin_coeffs = (rates, coeffs)
        return self._ruin_coeffs


# ---------------------------------------------------------------------------
# mpmath kernel for the doubling limit
# ---------------------------------------------------------------------------

def _mp_transform_fraction(law):
    num, den = law.transform_fraction()
    return list(num.coef), list(den.coef)


def _mp_polyval(coef, s):
    acc = mp.mpc(0)
    for c in reversed(coef):
        acc = acc * s + c
    return acc


def _mp_polyder(coef):
    return [c * k for k, c in enumerate(coef)][1:] or [0.0]


class _MpExponent:
    """Matrix exponent F and F' evaluated in mpmath arithmetic."""

    def __init__(self, model: RegimeModel, q):
        self.n = model.n_states
        self.q = mp.mpf(q) if np.isrealobj(np.asarray(q)) else mp.mpc(q)
        self.p = [mp.mpf(v) for v in model.p()]
        self.lam = [mp.mpf(v) for v in model.lam()]
        self.qm = [[mp.mpf(v) for v in row] for row in model.q()]
        # inactive states (rate 0) may carry laws without a rational transform
        self.state_frac = [
            _mp_transform_fraction(law) if rate > 0 else None
            for law, rate in zip(model.state_claims, model.lam())
        ]
        self.switch_frac = {}
        qarr = model.q()
        for i in range(self.n):
            for j in range(self.n):
                if i != j and qarr[i, j] > 0:
                    self.switch_frac[(i, j)] = _mp_transform_fraction(model.switch_claim(i, j))

    def _t(self, frac, s):
        num, den = frac
        return _mp_polyval(num, s) / _mp_polyval(den, s)

    def _t_prime(self, frac, s):
        num, den = frac
        nv, dv = _mp_polyval(num, s), _mp_polyval(den, s)
        npv, dpv = _mp_polyval(_mp_polyder(num), s), _mp_polyval(_mp_polyder(den), s)
        return (npv * dv - nv * dpv) / (dv * dv)

    def matrix(self, s):
        f = mp.zeros(self.n)
        for i in range(self.n):
            for j in range(self.n):
                if i == j:
                    f[i, i] = self.p[i] * s + self.qm[i][i]
                    if self.state_frac[i] is not None:
                        f[i, i] += self.lam[i] * (self._t(self.state_frac[i], s) - 1)
                elif (i, j) in self.switch_frac:
                    f[i, j] = self.qm[i][j] * self._t(self.switch_frac[(i, j)], s)
                else:
                    f[i, j] = self.qm[i][j]
        return f

    def matrix_prime(self, s):
        f = mp.zeros(self.n)
        for i in range(self.n):
            for j in range(self.n):
                if i == j:
                    f[i, i] = self.p[i]
                    if self.state_frac[i] is not None:
                        f[i, i] += self.lam[i] * self._t_prime(self.state_frac[i], s)
                elif (i, j) in self.switch_frac:
                    f[i, j] = self.qm[i][j] * self._t_prime(self.switch_frac[(i, j)], s)
        return f

def _mp_adjugate(a):
    n = a.rows
    if n == 1:
        return mp.matrix([[mp.mpf(1)]])
    adj = mp.zeros(n)
    for i in range(n):
        for j in range(n):
            minor = mp.zeros(n - 1)
            rr = [r for r in range(n) if r != j]
            cc = [c for c in range(n) if c != i]
            for a_i, r in enumerate(rr):
                for a_j, c in enumerate(cc):
                    minor[a_i, a_j] = a[r, c]
            adj[i, j] = (-1) ** (i + j) * mp.det(minor)
    return adj


def _mp_shifted(mx, lam):
    f = mx.matrix(lam)
    for i in range(mx.n):
        f[i, i] -= mx.q
    return f


def _mp_polish(mx, lam0, dps, guard):
    """Newton-polish one exponent root in mp arithmetic, without root jumping."""
    start = mp.mpc(complex(lam0))
    lam = start
    tol = mp.mpf(10) ** (-dps + 6)
    for _ in range(80):
        f = _mp_shifted(mx, lam)
        adj = _mp_adjugate(f)
        det = sum(f[0, k] * adj[k, 0] for k in range(mx.n))
        fp = mx.matrix_prime(lam)
        dprime = sum(adj[i, j] * fp[j, i] for i in range(mx.n) for j in range(mx.n))
        if abs(dprime) == 0:
            raise SpectralError(f"defective exponent root near {complex(lam0):.6g}")
        step = det / dprime
        lam = lam - step
        if abs(step) <= tol * (1 + abs(lam)):
            break
    else:
        raise SpectralError(f"mp root polish stalled near {complex(lam0):.6g}")
    if abs(lam - start) > guard:
        raise SpectralError(f"mp root polish drifted away from {complex(lam0):.6g}")
    return lam


def _mp_ratio(model, q, roots, a, dps, mmat):
    """W(a)^{-1} Z(a) with roots re-polished and residues rebuilt at dps digits."""
    n = model.n_states
    with mp.workdps(dps):
        mx = _MpExponent(model, q)
        a_mp = mp.mpf(a)
        w = mp.zeros(n)
        intw = mp.zeros(n)
        for idx, lam0 in enumerate(roots):
            others = np.delete(np.asarray(roots), idx)
            sep = float(np.min(np.abs(others - lam0))) if others.size else 1.0
            guard = min(0.45 * sep, 0.05 * (1.0 + abs(complex(lam0))))
            lam = _mp_polish(mx, lam0, dps, guard)
            adj = _mp_adjugate(_mp_shifted(mx, lam))
            denom = mp.mpf(0)
            fp = mx.matrix_prime(lam)
            for i in range(n):
                for j in range(n):
                    denom += adj[i, j] * fp[j, i]
            if abs(denom) == 0:
                raise SpectralError(f"defective exponent root near {complex(lam0):.6g}")
            e = mp.exp(lam * a_mp)
            if abs(lam) < mp.mpf(10) ** (-dps // 2):
                ifac = a_mp  # the drift root at q = 0: int_0^a e^{0 y} dy = a
            else:
                ifac = (e - 1) / lam
            for i in range(n):
                for j in range(n):
                    w[i, j] += e * adj[i, j] / denom
                    intw[i, j] += ifac * adj[i, j] / denom
        mmp = mp.matrix([[mp.mpf(v) for v in row] for row in np.asarray(mmat)])
        z = mp.eye(n) - intw * mmp
        cols = [mp.lu_solve(w, z[:, j]) for j in range(n)]
        out = np.empty((n, n), dtype=float)
        max_imag = 0.0
        for j, col in enumerate(cols):
            for i in range(n):
                val = col[i]
                out[i, j] = float(mp.re(val))
                max_imag = max(max_imag, abs(float(mp.im(val))))
        if max_imag > 1e-8 * (1.0 + float(np.max(np.abs(out)))):
            raise SpectralError("C_infinity doubling produced a complex ratio")
        return out


# ---------------------------------------------------------------------------
# module-level convenience wrappers
# ---------------------------------------------------------------------------

_OPERATOR_CACHE: dict = {}


def scale_operator(model, q, method="auto"):
    """ScaleOperator for (model, q), memoized across calls."""
    key = (model.cache_key(), float(q), method)
    op = _OPERATOR_CACHE.get(key)
    if op is None:
        op = ScaleOperator(model, q, method)
        if len(_OPERATOR_CACHE) > 64:
            _OPERATOR_CACHE.pop(next(iter(_OPERATOR_CACHE)))
        _OPERATOR_CACHE[key] = op
    return op


def w_matrix(model, q, x, method="auto"):
    return ScaleOperator(model, q, method).w(x)


def z_matrix(model, q, x, alpha=0.0, method="auto"):
    return ScaleOperator(model, q, method).z(x, alpha)


def c_infinity(model, q, method="auto"):
    return ScaleOperator(model, q, method).c_infinity()


def g_matrix(model, q):
    return ScaleOperator(model, q, "spectral").g_matrix()


def r_matrix(model, q):
    return ScaleOperator(model, q, "spectral").r_matrix()


def potential_density(model, q, x, z):
    return ScaleOperator(model, q).potential_density(x, z)


def exit_upward(model, q, x, a):
    return ScaleOperator(model, q).exit_upward(x, a)


def exit_downward(model, q, x, a, alpha=0.0):
    return ScaleOperator(model, q).exit_downward(x, a, alpha)


# ---------------------------------------------------------------------------
# tabulated scale sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleSet:
    """W and Z tabulated on a regular grid, ready for CSV export."""

    q: float
    alpha: float
    xs: np.ndarray
    w_values: np.ndarray  # (M, n, n)
    z_values: np.ndarray  # (M, n, n)

    def to_csv(self, path):
        n = self.w_values.shape[-1]
        cols = ["x"]
        cols += [f"w_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        cols += [f"z_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for k, x in enumerate(self.xs):
                row = [f"{x:.10g}"]
                row += [f"{v:.12g}" for v in self.w_values[k].ravel()]
                row += [f"{v:.12g}" for v in self.z_values[k].ravel()]
                writer.writerow(row)


def build_scale_set(model, q, step=0.01, extent=None, alpha=0.0, method="auto"):
    """Tabulate W and Z on {0, step, 2 step, ...} up to extent.

    extent defaults to ten times the largest mean claim in the model.
    """
    op = ScaleOperator(model, q, method)
    if extent is None:
        extent = 10.0 * model.largest_claim_mean()
    xs = np.arange(0.0, extent + 0.5 * step, step)
    w_vals = op.w(xs)
    # cumulative Z: per-segment 8-node Gauss-Legendre, then a running sum
    n = model.n_states
    nodes, wts = leggauss(8)
    mids = 0.5 * (xs[:-1] + xs[1:])
    halves = 0.5 * np.diff(xs)
    ys = (mids[:, None] + halves[:, None] * nodes[None, :])
    weights = halves[:, None] * wts[None, :]
    if alpha:
        weights = weights * np.exp(-alpha * ys)
    wv = op.w(ys.ravel()).reshape(ys.shape + (n, n))
    seg = np.einsum("mk,mkij->mij", weights, wv)
    intw = np.concatenate([np.zeros((1, n, n)), np.cumsum(seg, axis=0)])
    f_alpha = matrix_exponent(model, alpha)
    z_vals = np.exp(alpha * xs)[:, None, None] * (np.eye(n) - intw @ (f_alpha - q * np.eye(n)))
    return ScaleSet(q=float(q), alpha=float(alpha), xs=xs, w_values=w_vals, z_values=np.real(z_vals))
