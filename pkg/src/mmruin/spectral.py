"""Spectral layer: matrix exponent, Perron triple, tilting, exponent roots.

The matrix exponent F(a) satisfies E[exp(a X_t); J_t = j | J_0 = i] =
(exp(F(a) t))_ij.  Its Perron eigenvalue k(a) plays the role of the scalar
Laplace exponent: k(0) = 0, k'(0) is the stationary drift, and the
adjustment coefficient is the positive root of k(-g) = 0.

Exponent roots are the zeros of det(F(l) - q I).  For rational claim
transforms the determinant clears to a polynomial; its zeros split into N
roots with Re >= 0 (first-passage data) plus decaying roots that carry the
scale-matrix expansion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize

from .model import RegimeModel, _instantaneous_drifts, stationary_distribution

__all__ = [
    "SpectralError",
    "PerronTriple",
    "TiltedProcess",
    "ExponentRoots",
    "matrix_exponent",
    "matrix_exponent_derivative",
    "perron_triple",
    "k_derivatives",
    "adjustment_coefficient",
    "exponential_change_of_measure",
    "tilt_model",
    "exponent_roots",
    "rightmost_root",
    "count_roots_argument_principle",
]


class SpectralError(RuntimeError):
    pass


def _active_entry_laws(model: RegimeModel):
    """Yield (i, j, weight, law) for every transform entering F."""
    q = model.q()
    lam = model.lam()
    for i in range(model.n_states):
        if lam[i] > 0:
            yield i, i, lam[i], model.state_claims[i]
    for (i, j), law in model.transition_claims.items():
        if q[i, j] > 0:
            yield i, j, q[i, j], law


def _mexp(model: RegimeModel, alpha, continued: bool) -> np.ndarray:
    n = model.n_states
    cplx = np.iscomplexobj(np.asarray(alpha))
    f = np.array(model.q(), dtype=complex if cplx else float)
    p, lam = model.p(), model.lam()
    for i in range(n):
        f[i, i] += p[i] * alpha
        if lam[i] > 0:
            law = model.state_claims[i]
            t = law.transform_continued(alpha) if continued else law.transform(alpha)
            f[i, i] += lam[i] * (t - 1.0)
    q = model.q()
    for (i, j), law in model.transition_claims.items():
        if q[i, j] > 0:
            t = law.transform_continued(alpha) if continued else law.transform(alpha)
            f[i, j] = q[i, j] * t
    return f


def matrix_exponent(model: RegimeModel, alpha) -> np.ndarray:
    """F(alpha), complex entries when alpha is complex."""
    return _mexp(model, alpha, continued=False)


def _mexp_derivative(model: RegimeModel, alpha, continued: bool) -> np.ndarray:
    n = model.n_states
    cplx = np.iscomplexobj(np.asarray(alpha))
    f = np.zeros((n, n), dtype=complex if cplx else float)
    p, lam = model.p(), model.lam()
    for i in range(n):
        f[i, i] = p[i]
        if lam[i] > 0:
            law = model.state_claims[i]
            d = law.transform_derivative_continued(alpha) if continued else law.transform_derivative(alpha)
            f[i, i] += lam[i] * d
    q = model.q()
    for (i, j), law in model.transition_claims.items():
        if q[i, j] > 0:
            d = law.transform_derivative_continued(alpha) if continued else law.transform_derivative(alpha)
            f[i, j] = q[i, j] * d
    return f


def matrix_exponent_derivative(model: RegimeModel, alpha) -> np.ndarray:
    return _mexp_derivative(model, alpha, continued=False)


@dataclass(frozen=True)
class PerronTriple:
    alpha: float
    k: float
    h: np.ndarray  # right eigenvector, pi . h = 1, entrywise positive
    v: np.ndarray  # left eigenvector, v . h = 1, entrywise positive


def _positive_eigvec(vec, what):
    big = np.argmax(np.abs(vec))
    vec = np.real(vec * np.exp(-1j * np.angle(vec[big]))) if np.iscomplexobj(vec) else vec.copy()
    if vec[big] < 0:
        vec = -vec
    if np.any(vec <= 0):
        raise SpectralError(f"{what} Perron eigenvector is not strictly positive")
    return vec


def perron_triple(model: RegimeModel, alpha: float) -> PerronTriple:
    f = matrix_exponent(model, float(alpha))
    w, vr = np.linalg.eig(f)
    idx = int(np.argmax(w.real))
    k = w[idx]
    if abs(k.imag) > 1e-8 * (1.0 + abs(k.real)):
        raise SpectralError("leading eigenvalue of F is not real")
    others = np.delete(w, idx)
    if others.size and np.min(np.abs(others - k)) < 1e-10 * (1.0 + abs(k)):
        raise SpectralError("leading eigenvalue of F is not simple")
    h = _positive_eigvec(vr[:, idx], "right")
    wl, vl = np.linalg.eig(f.T)
    v = _positive_eigvec(vl[:, int(np.argmin(np.abs(wl - k)))], "left")
    pi = stationary_distribution(model.q())
    h = h / float(pi @ h)
    v = v / float(v @ h)
    return PerronTriple(alpha=float(alpha), k=float(k.real), h=h, v=v)


def _k(model, alpha):
    return perron_triple(model, alpha).k


def _k_prime(model, alpha):
    t = perron_triple(model, alpha)
    return float(np.real(t.v @ matrix_exponent_derivative(model, alpha) @ t.h))


def k_derivatives(model: RegimeModel, alpha: float):
    """(k'(alpha), k''(alpha)); k' by eigenvector perturbation, k'' by
    Richardson-extrapolated central differences of k'."""
    k1 = _k_prime(model, alpha)
    step = 1e-5 * max(1.0, abs(alpha))
    bound = model.mgf_abscissa
    if math.isfinite(bound):
        room = alpha + bound  # distance to the transform boundary at -bound
        if room <= 0:
            raise SpectralError("alpha outside the transform domain")
        step = min(step, 0.25 * room)
    d_full = (_k_prime(model, alpha + step) - _k_prime(model, alpha - step)) / (2 * step)
    d_half = (_k_prime(model, alpha + step / 2) - _k_prime(model, alpha - step / 2)) / step
    return k1, (4.0 * d_half - d_full) / 3.0


def adjustment_coefficient(model: RegimeModel) -> float:
    """Positive root g of k(-g) = 0 (Cramer/Lundberg exponent)."""
    laws = model.all_claims()
    if not laws:
        raise SpectralError("model has no claims; ruin is impossible")
    if any(not law.has_mgf for law in laws):
        heavy = ", ".join(sorted({law.label() for law in laws if not law.has_mgf}))
        raise SpectralError(
            f"heavy-tailed claims ({heavy}) admit no adjustment coefficient; "
            "use the subexponential asymptotics"
        )
    bound = model.mgf_abscissa
    if not math.isfinite(bound):
        raise SpectralError("all claims are degenerate at zero; ruin is impossible")
    pi = stationary_distribution(model.q())
    drift = float(pi @ _instantaneous_drifts(model))
    if drift <= 0:
        raise SpectralError(f"net profit violated (stationary drift {drift:g} <= 0)")

    def g(gam):
        return _k(model, -gam)

    lo, hi = None, None
    for j in range(1, 60):
        gam = bound * (1.0 - 2.0**-j)
        val = g(gam)
        if val > 0:
            hi = gam
            break
        lo = gam
    if hi is None:
        raise SpectralError("no adjustment coefficient below the transform abscissa")
    if lo is None:
        gam = hi
        for _ in range(80):
            gam *= 0.5
            if g(gam) < 0:
                lo = gam
                break
        if lo is None:
            raise SpectralError("could not bracket the adjustment coefficient")
    gamma = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16)
    if abs(g(gamma)) > 1e-10:
        raise SpectralError(f"adjustment root residual {g(gamma):.2e} too large")
    return float(gamma)


@dataclass(frozen=True)
class TiltedProcess:
    """Exponentially tilted model (Esscher change of measure).

    Under the theta-measure the exponent becomes
    D_h^{-1} F(a + theta) D_h - k(theta) I with D_h = diag(h(theta)); paths
    are reweighted back by exp(-theta dX + k(theta) dt) h_{J_0}/h_{J_t}.
    """

    base: RegimeModel
    model: RegimeModel
    theta: float
    h: np.ndarray
    k_theta: float

    def log_weight(self, j_start, j_end, dx, dt):
        """log dP/dP_theta along a path segment (vectorized)."""
        logh = np.log(self.h)
        return -self.theta * np.asarray(dx) + self.k_theta * np.asarray(dt) \
            + logh[np.asarray(j_start)] - logh[np.asarray(j_end)]


def exponential_change_of_measure(model: RegimeModel, theta: float) -> TiltedProcess:
    trip = perron_triple(model, theta)
    h = trip.h
    n = model.n_states
    q = model.q()
    lam = model.lam()
    lam_t = np.array([
        lam[i] * float(np.real(model.state_claims[i].transform(theta))) if lam[i] > 0 else 0.0
        for i in range(n)
    ])
    claims_t = tuple(
        model.state_claims[i].tilt(-theta) if lam[i] > 0 else model.state_claims[i]
        for i in range(n)
    )
    q_t = np.zeros((n, n))
    trans_t = {}
    for i in range(n):
        for j in range(n):
            if i == j or q[i, j] <= 0:
                continue
            law = model.switch_claim(i, j)
            q_t[i, j] = q[i, j] * float(np.real(law.transform(theta))) * h[j] / h[i]
            if (i, j) in model.transition_claims:
                trans_t[(i, j)] = law.tilt(-theta)
    np.fill_diagonal(q_t, -q_t.sum(axis=1))
    tilted = RegimeModel(
        q_matrix=tuple(map(tuple, q_t)),
        premiums=model.premiums,
        arrival_rates=tuple(lam_t),
        state_claims=claims_t,
        transition_claims=trans_t,
    ).validated()
    return TiltedProcess(base=model, model=tilted, theta=float(theta), h=h, k_theta=trip.k)


def tilt_model(model: RegimeModel, gamma: float) -> TiltedProcess:
    """Cramer tilt at the adjustment coefficient (theta = -gamma)."""
    proc = exponential_change_of_measure(model, -float(gamma))
    if abs(proc.k_theta) > 1e-8:
        raise SpectralError(f"k(-gamma) = {proc.k_theta:.2e} is not zero; gamma is not the adjustment root")
    return proc


# ---------------------------------------------------------------------------
# exponent roots via the cleared determinant polynomial


def _row_entry_polynomials(model: RegimeModel, q):
    """Polynomial matrix equal to rows of F(l) - q I scaled by denominators."""
    n = model.n_states
    qm = model.q()
    p, lam = model.p(), model.lam()
    fracs = {}
    for i, j, _, law in _active_entry_laws(model):
        frac = law.transform_fraction()
        if frac is None:
            raise SpectralError(
                f"claim law {law.label()} at ({i},{j}) has no rational transform; "
                "spectral root finding unavailable"
            )
        if frac[1].degree() > 0:  # constant denominators add nothing
            fracs[(i, j)] = frac
    entries = np.empty((n, n), dtype=object)
    pole_scale = 1.0
    for i in range(n):
        row_fracs = {j: fr for (ii, j), fr in fracs.items() if ii == i}
        d_i = Polynomial([1.0])
        for num, den in row_fracs.values():
            d_i = d_i * den
            pole_scale = max(pole_scale, np.max(np.abs(den.roots())) if den.degree() else 1.0)

        def cofactor(j):
            out = Polynomial([1.0])
            for jj, (num, den) in row_fracs.items():
                out = out * (num if jj == j else den)
            return out

        for j in range(n):
            base = qm[i, j] - (q if i == j else 0.0)
            if i == j:
                poly = Polynomial([base - lam[i], p[i]]) * d_i
                if i in row_fracs:
                    poly = poly + lam[i] * cofactor(i)
                elif lam[i] > 0:  # degenerate claim, transform = 1
                    poly = poly + lam[i] * d_i
            else:
                if qm[i, j] <= 0:
                    poly = Polynomial([0.0])
                elif j in row_fracs:
                    poly = qm[i, j] * cofactor(j)
                else:
                    poly = base * d_i
            entries[i, j] = poly
    return entries, pole_scale


def _polymat_det(entries, radius):
    """Determinant of a Polynomial matrix via FFT interpolation on a circle."""
    n = entries.shape[0]
    deg = int(sum(max(e.degree() for e in entries[i]) for i in range(n)))
    m = deg + 1
    nodes = radius * np.exp(2j * np.pi * np.arange(m) / m)
    vals = np.empty(m, dtype=complex)
    mat = np.empty((n, n), dtype=complex)
    for k, lam in enumerate(nodes):
        for i in range(n):
            for j in range(n):
                mat[i, j] = entries[i, j](lam)
        vals[k] = np.linalg.det(mat)
    # vals_k = sum_j (c_j R^j) e^{+2 pi i jk/m}, so the forward DFT recovers c_j R^j
    coeffs = np.fft.fft(vals) / m / radius ** np.arange(m)
    return Polynomial(coeffs)


@dataclass(frozen=True)
class ExponentRoots:
    """Zeros of det(F(l) - q I) with null-vector and residue data.

    ``roots`` holds every determinant zero; ``right`` indexes the N roots
    with Re >= 0 (first-passage spectrum).  ``residues[j]`` is the residue
    matrix of (F(a) - q I)^{-1} at ``roots[j]``.
    """

    q: complex
    roots: np.ndarray
    right: np.ndarray  # indices into roots
    h: np.ndarray  # (n_roots, N) right null vectors
    v: np.ndarray  # (n_roots, N) left null vectors
    residues: np.ndarray  # (n_roots, N, N)

    @property
    def right_roots(self):
        return self.roots[self.right]

    @property
    def decaying(self):
        mask = np.ones(len(self.roots), dtype=bool)
        mask[self.right] = False
        return np.where(mask)[0]


def exponent_roots(model: RegimeModel, q, check_count: bool = True) -> ExponentRoots:
    """All zeros of det(F(l) - q I) for a rational-transform model."""
    n = model.n_states
    entries, pole_scale = _row_entry_polynomials(model, q)
    p = model.p()
    lam = model.lam()
    base_scale = max(1.0, pole_scale, float(np.max(lam + np.abs(np.diag(model.q()))) / np.min(p)))
    scale = max(base_scale, float((np.max(lam + np.abs(np.diag(model.q()))) + abs(q)) / np.min(p)))
    # one interpolation circle cannot resolve roots spread over orders of
    # magnitude (coefficients span radius^degree), so candidates come from a
    # circle per scale plus the large-|q| asymptotes; polish sorts them out
    radii = [2.0 * scale]
    if scale > 4.0 * base_scale:
        radii.append(2.0 * base_scale)
    cands = []
    for radius in radii:
        poly = _polymat_det(entries, radius=radius)
        coeffs = poly.coef.copy()
        top = np.max(np.abs(coeffs))
        keep = np.nonzero(np.abs(coeffs) > 1e-12 * top)[0]
        poly = Polynomial(coeffs[: keep[-1] + 1])
        roots = poly.roots()
        dpoly = poly.deriv()
        for _ in range(3):  # Newton polish against interpolation noise
            dv = dpoly(roots)
            step = np.where(np.abs(dv) > 0, poly(roots) / np.where(dv == 0, 1.0, dv), 0.0)
            roots = roots - step
        cands.append(roots)
    cands.append((complex(q) + lam - np.diag(model.q())) / p)
    roots = np.concatenate(cands)
    # interpolation noise grows with the contour radius (large |q|); Newton on
    # det(F(l) - q I) itself is scale-free: step = 1 / tr(M^-1 M')
    qeye = complex(q) * np.eye(n)
    for idx, lam_r in enumerate(roots):
        cur = complex(lam_r)
        for _ in range(12):
            m0 = _mexp(model, cur, continued=True) - qeye
            try:
                tr = np.trace(np.linalg.solve(m0, _mexp_derivative(model, cur, continued=True)))
            except np.linalg.LinAlgError:
                break
            if not np.isfinite(tr) or tr == 0:
                break
            step = 1.0 / tr
            cur = cur - step
            if abs(step) < 1e-14 * (1.0 + abs(cur)):
                break
        roots[idx] = cur

    # keep genuine exponent roots: F(l) - q I must actually be singular
    genuine = []
    for lam_r in roots:
        f = _mexp(model, complex(lam_r), continued=True) - complex(q) * np.eye(n)
        s = np.linalg.svd(f, compute_uv=False)
        # polished roots reach ~1e-15 relative; stalled strays stay above 1e-9
        if s[-1] <= 1e-9 * max(1.0, s[0]):
            genuine.append(complex(lam_r))
    genuine = np.array(sorted(genuine, key=lambda z: (-z.real, z.imag)))
    if genuine.size:
        # spurious interpolation roots can polish onto a genuine one; dedupe
        # (the count check below still catches anything truly missing)
        kept = []
        for lam_r in genuine:
            if all(abs(lam_r - other) > 1e-8 * (1.0 + abs(other)) for other in kept):
                kept.append(lam_r)
        genuine = np.array(kept)
    if complex(q) == 0:  # snap the drift root exactly to zero
        near0 = np.argmin(np.abs(genuine)) if genuine.size else None
        if near0 is not None and abs(genuine[near0]) < 1e-7:
            genuine[near0] = 0.0
    if complex(q).imag == 0.0 and genuine.size:
        # real q: spectrum is conjugate-symmetric, so strip interpolation-noise imag parts
        nearly_real = np.abs(genuine.imag) < 1e-7 * (1.0 + np.abs(genuine.real))
        genuine = np.where(nearly_real, genuine.real + 0.0j, genuine)

    right = np.where(genuine.real > -1e-9)[0]
    if check_count and len(right) != n:
        ap = count_roots_argument_principle(model, q, genuine)
        raise SpectralError(
            f"found {len(right)} right-half-plane exponent roots, expected {n} "
            f"(argument principle count: {ap}; coincident roots merge, perturbing q "
            "separates them)"
        )

    hs = np.empty((len(genuine), n), dtype=complex)
    vs = np.empty((len(genuine), n), dtype=complex)
    res = np.empty((len(genuine), n, n), dtype=complex)
    for j, lam_r in enumerate(genuine):
        f = _mexp(model, complex(lam_r), continued=True) - complex(q) * np.eye(n)
        u, s, vh = np.linalg.svd(f)
        h = vh[-1].conj()
        v = u[:, -1].conj()
        denom = v @ _mexp_derivative(model, complex(lam_r), continued=True) @ h
        if abs(denom) < 1e-12:
            raise SpectralError(f"defective exponent root at {lam_r:.6g}")
        hs[j], vs[j] = h, v
        res[j] = np.outer(h, v) / denom
    return ExponentRoots(q=complex(q), roots=genuine, right=right, h=hs, v=vs, residues=res)


def count_roots_argument_principle(model: RegimeModel, q, found_roots, margin=1e-6):
    """Winding number of det(F(l) - q I) around a right-half-plane rectangle."""
    rr = np.asarray(found_roots)
    re_max = float(np.max(rr.real)) if rr.size else 1.0
    im_max = float(np.max(np.abs(rr.imag))) if rr.size else 1.0
    x_hi = abs(re_max) * 1.5 + 1.0
    y_hi = abs(im_max) * 1.5 + 1.0
    corners = [
        -margin - 1j * y_hi, x_hi - 1j * y_hi, x_hi + 1j * y_hi, -margin + 1j * y_hi,
        -margin - 1j * y_hi,
    ]

    def f(z):
        return np.linalg.det(_mexp(model, z, continued=True) - complex(q) * np.eye(model.n_states))

    total = 0.0
    for a, b in zip(corners[:-1], corners[1:]):
        ts = np.linspace(0.0, 1.0, 64)
        pts = [a + (b - a) * t for t in ts]
        vals = [f(z) for z in pts]
        k = 0
        while k < len(pts) - 1:
            d = np.angle(vals[k + 1] / vals[k])
            if abs(d) > 0.5 * np.pi and abs(pts[k + 1] - pts[k]) > 1e-12:
                mid = 0.5 * (pts[k] + pts[k + 1])
                pts.insert(k + 1, mid)
                vals.insert(k + 1, f(mid))
                continue
            total += d
            k += 1
    return int(round(total / (2 * np.pi)))


def perron_right_root(model: RegimeModel, q: float) -> float:
    """Real point Phi(q) >= 0 on the Perron branch with k(Phi(q)) = q."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    pi = stationary_distribution(model.q())
    drift = float(pi @ _instantaneous_drifts(model))
    if q == 0 and drift > 0:
        return 0.0

    def g(lam):
        return _k(model, lam) - q

    hi = 1.0
    for _ in range(200):
        if g(hi) > 0:
            break
        hi *= 1.6
    else:
        raise SpectralError("could not bracket the rightmost root")
    lo = 0.0
    if g(lo) >= 0:  # only when q = 0 without net profit: k dips negative right of 0
        lo = None
        eps = hi
        for _ in range(200):
            eps *= 0.5
            if g(eps) < 0:
                lo = eps
                break
        if lo is None:
            raise SpectralError("could not bracket the rightmost root from the left")
    return float(optimize.brentq(g, lo, hi, xtol=1e-14))


def rightmost_root(model: RegimeModel, q: float) -> float:
    """Largest real part over every right-half singularity of (F(.) - q I)^{-1}.

    This is the abscissa a Bromwich contour has to clear.  The Perron branch
    point k(Phi(q)) = q is only one of the N right roots for N >= 2; secondary
    eigenvalue branches cross level q further right.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    if model.rational:
        rr = exponent_roots(model, q)
        return float(np.max(rr.roots.real))
    # non-rational transforms: no polynomial machinery.  All det zeros lie left
    # of the Gershgorin-style bound below (|p_i l| outgrows every bounded term),
    # so scan the real axis there and refine each sign change.
    p = model.p()
    lam = model.lam()
    qd = np.abs(np.diag(model.q()))
    bound = float((q + np.max(2.0 * lam + 2.0 * qd)) / np.min(p)) + 1.0

    def g(x):
        f = _mexp(model, complex(x), continued=True)
        return float(np.real(np.linalg.det(f - q * np.eye(model.n_states))))

    xs = np.linspace(0.0, bound, 400)
    vals = np.array([g(x) for x in xs])
    best = perron_right_root(model, q)
    for a, b, va, vb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if va == 0.0:
            best = max(best, float(a))
        elif va * vb < 0:
            best = max(best, float(optimize.brentq(g, a, b, xtol=1e-12)))
    return best
