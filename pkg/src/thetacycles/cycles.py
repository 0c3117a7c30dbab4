"""Cycle integrals over closed geodesics of indefinite binary forms.

The geodesic S_A is parametrized as z(t) = sigma_A . (i t); the stabilizer
of A acts by t -> eps^2 t, so one period is t in [1, eps^2] and every
weight-2 integrand F dz becomes, after s = log t, a smooth periodic
integrand on [0, 2 log eps].  Quadrature on the period therefore converges
exponentially; we use composite Gauss-Legendre panels with panel doubling
and report the observed doubling defect as the error estimate.

The module provides the cycle integrals of the numeric theta kernels, the
exact product side they factor into, and (further below) evaluation and
principal-value cycle integration of meromorphic form sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2

from .numerics import (QuadElem, mpc, mpf, pi_, e2pi, precision_bits,
                       rational_reconstruct_ex, to_fraction)
from .qforms import (GeodesicClass, QForm, class_reps, cm_point, fd_reduce,
                     geodesic, jfactor)
from .lattice import SplitData
from . import qseries
from .qseries import QSeries
from . import theta as theta_mod

__all__ = [
    "gauss_legendre", "integrate_vector", "cycle_quadrature",
    "cycle_raised_theta", "cycle_theta_star", "cycle_hecke_theta",
    "theta_cycle_factorization", "QuadratureError", "PoleError",
    "SeriesTailError", "RATIONAL_J", "MeromForm", "merom_form",
    "merom_eval", "f_eval", "f_eval_direct", "f_class_eval", "CyclePole",
    "pole_scan", "CycleResult", "cycle_merom", "pv_cycle", "trace_cycle",
    "closed_form_thm41", "cycle_siegel", "eval_scalar_series",
]


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Gauss-Legendre quadrature at working precision

_GL_CACHE = {}


def _legendre_pair(n, x):
    """(P_n(x), P_n'(x)) by the three-term recurrence."""
    p0, p1 = mpf(1), x
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1)
    return p1, dp


def gauss_legendre(n):
    """Nodes and weights of n-point Gauss-Legendre on [-1, 1] at the current
    working precision, cached per (n, precision)."""
    prec = gmpy2.get_context().precision
    key = (n, prec)
    if key in _GL_CACHE:
        return _GL_CACHE[key]
    eps = mpf(2) ** (8 - prec)
    nodes, weights = [mpf(0)] * n, [mpf(0)] * n
    for i in range(n // 2 + n % 2):
        x = gmpy2.cos(pi_() * (i + mpf(3) / 4) / (n + mpf(1) / 2))
        for _ in range(200):
            p, dp = _legendre_pair(n, x)
            dx = p / dp
            x = x - dx
            if abs(dx) < eps:
                break
        else:
            raise QuadratureError("Legendre root iteration did not converge")
        p, dp = _legendre_pair(n, x)
        w = 2 / ((1 - x * x) * dp * dp)
        nodes[i], weights[i] = -x, w
        nodes[n - 1 - i], weights[n - 1 - i] = x, w
    _GL_CACHE[key] = (tuple(nodes), tuple(weights))
    return _GL_CACHE[key]


def integrate_vector(f, a, b, order, panels):
    """Composite Gauss-Legendre integral of a vector-valued f over [a, b].

    f maps an mpfr to a list of mpc; returns a list of mpc.
    """
    nodes, weights = gauss_legendre(order)
    a, b = mpf(a), mpf(b)
    h = (b - a) / panels
    total = None
    for p in range(panels):
        lo = a + p * h
        mid, half = lo + h / 2, h / 2
        for x, w in zip(nodes, weights):
            vals = f(mid + half * x)
            scaled = [v * (w * half) for v in vals]
            if total is None:
                total = scaled
            else:
                total = [t + s for t, s in zip(total, scaled)]
    return total


def cycle_quadrature(geo: GeodesicClass, integrand, tol, order=48,
                     max_panels=64):
    """Oriented cycle integral of a weight-2 integrand over one period.

    integrand(z) returns a list of mpc; the result is the vector

        C = integral over the closed geodesic of integrand(z) dz

    computed as -int_0^{2 log eps} integrand(z(e^s)) z'(e^s) e^s ds (the
    oriented cycle traverses t from eps^2 down to 1).  Panels are doubled
    until the defect between successive refinements is below tol; returns
    (vector, error_estimate).
    """
    period = 2 * gmpy2.log(geo.eps.to_mpfr())

    def g(s):
        t = gmpy2.exp(s)
        z = geo.point(t)
        w = geo.dz_dt(t) * t
        return [v * w for v in integrand(z)]

    prev = None
    panels = 1
    while panels <= max_panels:
        cur = integrate_vector(g, mpf(0), period, order, panels)
        if prev is not None:
            err = max(abs(c - p) for c, p in zip(cur, prev))
            if err < tol:
                return [-v for v in cur], err
        prev = cur
        panels *= 2
    raise QuadratureError(
        f"cycle quadrature did not reach tol={tol} within {max_panels} panels")


# ---------------------------------------------------------------------------
# cycle integrals of the theta kernels and their exact product side


def cycle_raised_theta(sd: SplitData, geo: GeodesicClass, tau, tol,
                       order=48):
    """Cycle integral of the raised Siegel theta of L, one value per coset
    of L'/L.  Each kernel evaluation is tail-certified well below tol."""
    point_tol = mpf(tol) / 1000

    def integrand(z):
        return theta_mod.raised_theta(sd.L, tau, z, point_tol)

    return cycle_quadrature(geo, integrand, tol, order=order)


def cycle_theta_star(sd: SplitData, geo: GeodesicClass, tau, tol, order=48):
    """Cycle integral of Theta_I^* dz, one value per coset of I'/I.

    Vanishes identically: the integrand is an exact derivative along the
    geodesic."""
    point_tol = mpf(tol) / 1000

    def integrand(z):
        return theta_mod.theta_i_star(sd.I, tau, z, point_tol)

    return cycle_quadrature(geo, integrand, tol, order=order)


def cycle_hecke_theta(sd: SplitData, geo: GeodesicClass, tau, tol, order=48):
    """Cycle integral of Theta_I(tau, z) Q_A(z)^{-1} dz over I'/I.

    Equals vartheta_I(tau)/sqrt(D): the indefinite theta series is the
    cycle integral of the Siegel theta of I against the measure dz/Q_A."""
    point_tol = mpf(tol) / 1000
    A = sd.A

    def integrand(z):
        qa = A.a * z * z + A.b * z + A.c
        return [v / qa for v in theta_mod.theta_i_siegel(sd.I, tau, z,
                                                         point_tol)]

    return cycle_quadrature(geo, integrand, tol, order=order)


def theta_cycle_factorization(sd: SplitData, tau, prec, tol):
    """Product-side evaluation matching cycle_raised_theta:

        -(4 pi/sqrt(D)) * trace to L'/L of
            vartheta_I(tau) tensor conj(Theta_{3/2,N}(tau)) v^(3/2)

    built from the exact q-series truncated at precision prec with
    certified tails below tol.  Returns one mpc per coset of L'/L.
    """
    v = mpf(tau.imag)
    vth = theta_mod.hecke_theta_series(sd, prec)
    th32 = theta_mod.unary_theta_series(sd, Fraction(3, 2), prec)
    vals_i = theta_mod.eval_qseries_at(vth, tau, theta_mod.hecke_coeff_bound(sd),
                                       tol)
    vals_n = theta_mod.eval_qseries_at(th32, tau,
                                       theta_mod.unary_coeff_bound(
                                           sd, Fraction(3, 2)), tol)
    v32 = v * gmpy2.sqrt(v)
    vals_n = [gmpy2.mpc(x.real, -x.imag) * v32 for x in vals_n]
    vals_m = theta_mod.tensor_values(vals_i, vals_n, sd)
    vals_l = theta_mod.up_values(vals_m, sd)
    pref = -4 * pi_() / gmpy2.sqrt(mpf(sd.D))
    return [pref * x for x in vals_l]


# ---------------------------------------------------------------------------
# meromorphic forms f_{k,d}: exact construction for class number one


class PoleError(RuntimeError):
    """Evaluation or integration ran into a pole of the form."""

    def __init__(self, message, form=None):
        super().__init__(message)
        self.form = form


class SeriesTailError(RuntimeError):
    """A q-series truncation could not be certified below the tolerance."""


#: discriminants of class number one with rational j-invariant at the CM point
RATIONAL_J = {-3: 0, -4: 1728, -7: -3375, -8: 8000, -11: -32768,
              -19: -884736, -43: -884736000, -67: -147197952000,
              -163: -262537412640768000}


@dataclass
class MeromForm:
    """f_{k,d} = (|d|^(k-1/2)/pi) * numer / den as everywhere-convergent
    q-series, for a discriminant d of class number one.

    numer is a cusp form of weight 2k + wt(den); den vanishes exactly on
    the CM orbit, so the ratio has its order-k pole at the CM point and is
    O(q) at the cusp.  The rational combination is pinned by matching the
    Laurent principal part at the CM point to the single singular term
    Q0(z,1)^(-k) of the defining series.  The Fourier coefficients come out
    as rational multiples of pi**pi_power (divided by sqrt|d| when
    sqrt_disc is set); numer carries the exact rational part.
    """

    k: int
    d: int
    numer: QSeries
    den: QSeries
    den_pole_order: int
    combo: tuple
    pi_power: int
    sqrt_disc: bool
    cm: QForm
    nterms: int

    def weight(self) -> int:
        return 2 * self.k



def _mspace_monomials(weight: int):
    """Exponent pairs (a, b) with E4^a E6^b of the given weight."""
    out = []
    for b in range(weight // 6 + 1):
        r = weight - 6 * b
        if r % 4 == 0:
            out.append((r // 4, b))
    if not out:
        raise ValueError(f"no modular forms of weight {weight}")
    return out


def _den_data(k: int, d: int, nterms: int):
    """(denominator series, pole order at the CM point).

    Delta*(j - j(z_d)) vanishes simply on the CM orbit and nowhere else;
    for d = -3 and d = -4 it is E4^3 resp. E6^2, whose roots have orbifold
    order 3 resp. 2, so a smaller power suffices for a pole of order k.
    """
    if d == -3:
        nu = -(-k // 3)
        return qseries.eisenstein(4, nterms) ** (3 * nu), 3 * nu
    if d == -4:
        m = -(-k // 2)
        return qseries.eisenstein(6, nterms) ** (2 * m), 2 * m
    jd = RATIONAL_J[d]
    base = (qseries.eisenstein(4, nterms) ** 3
            - Fraction(jd) * qseries.delta_series(nterms))
    return base ** k, k


def eval_scalar_series(qs: QSeries, z, tol, wt_hint=60):
    """Certified evaluation of an exact one-component q-series at z in H.

    The tail past the stored truncation is bounded by the largest observed
    |c_n|/(n+1)^wt_hint times a safety factor; fails loudly when the bound
    does not reach tol.
    """
    zc = mpc(z.real, z.imag)
    q = e2pi(zc)
    aq = abs(q)
    total = mpc(0)
    cmax = mpf(0)
    nmax = 0
    for (_, e), c in qs.coeffs.items():
        en = int(e)
        total += mpf(c) * q ** en
        cmax = max(cmax, abs(mpf(c)) / mpf(en + 1) ** wt_hint)
        nmax = max(nmax, en)
    cutoff = int(qs.prec)
    ratio = aq * (mpf(cutoff + 2) / (cutoff + 1)) ** wt_hint
    if not ratio < 1:
        raise SeriesTailError("series tail ratio not contracting; "
                              "point too low or series too short")
    tail = 10 * cmax * mpf(cutoff + 1) ** wt_hint * aq ** cutoff \
        / (1 - ratio)
    if not tail < tol:
        raise SeriesTailError(
            f"certified tail {tail} above tolerance {tol}; "
            "increase the series length")
    return total


def _laurent_fft(fun, center, radius, npts):
    """Laurent coefficients a_{-1}..a_{-J} of fun around center by a
    trapezoidal contour rule; returns a callable j -> a_{-j}."""
    vals = []
    r = mpf(radius)
    for ell in range(npts):
        th = 2 * pi_() * ell / npts
        w = r * mpc(gmpy2.cos(th), gmpy2.sin(th))
        vals.append((fun(center + w), w))

    def coeff(j):
        total = mpc(0)
        for v, w in vals:
            total += v * w ** j
        return total / npts

    return coeff


_MEROM_CACHE = {}


def merom_form(k: int, d: int, nterms: int = None) -> MeromForm:
    """Construct f_{k,d} exactly for class number one discriminants."""
    if k < 2:
        raise ValueError("weight parameter k must be >= 2")
    if d >= 0 or d % 4 not in (0, 1):
        raise ValueError(f"no positive definite forms of discriminant {d}")
    reps = class_reps(d)
    if len(reps) != 1:
        raise NotImplementedError(
            f"discriminant {d} has class number {len(reps)}; the exact "
            "construction covers class number one (use f_class_eval's "
            "direct summation for refinements)")
    if d not in RATIONAL_J:
        raise NotImplementedError(f"no stored j-invariant for d={d}")
    prec = gmpy2.get_context().precision
    if nterms is None:
        nterms = prec // 6 + 48
    key = (k, d, nterms, prec)
    if key in _MEROM_CACHE:
        return _MEROM_CACHE[key]
    den, pole_order = _den_data(k, d, nterms)
    if d == -3:
        den_wt = 4 * pole_order
    elif d == -4:
        den_wt = 6 * pole_order
    else:
        den_wt = 12 * pole_order
    weight = 2 * k + den_wt
    monos = _mspace_monomials(weight)
    e4 = qseries.eisenstein(4, nterms)
    e6 = qseries.eisenstein(6, nterms)
    series = [e4 ** a * e6 ** b for a, b in monos]
    if len(series) < 2:
        raise ValueError(f"no cusp forms of weight {weight}: cannot build "
                         f"f_{{{k},{d}}}")
    cusp_basis = [series[i] - series[0] for i in range(1, len(series))]
    q0 = reps[0]
    # numeric principal-part matching at a comfortable working precision
    with precision_bits(max(prec, 320)):
        zd = cm_point(q0)
        zdc = mpc(zd.real, zd.imag)
        radius = mpf(1) / 8
        npts = 128
        tol = mpf(2) ** -(gmpy2.get_context().precision - 40)

        def make_fun(num):
            def fun(z):
                return (eval_scalar_series(num, z, tol, wt_hint=weight) /
                        eval_scalar_series(den, z, tol, wt_hint=weight))
            return fun

        coeff_funs = [_laurent_fft(make_fun(b), zdc, radius, npts)
                      for b in cusp_basis]
        # target: principal part of Q0(z,1)^{-k} at its root
        span = zdc - mpc(zdc.real, -mpf(zdc.imag))   # zd - conj(zd)

        def binom_neg(kk, j):
            out = mpf(1)
            for i in range(j):
                out *= (-kk - i)
            return out / math.factorial(j)

        rows, rhs = [], []
        for p in range(pole_order, 0, -1):
            rows.append([cf(p) for cf in coeff_funs])
            if p <= k:
                t = (mpf(q0.a) ** -k) * binom_neg(k, k - p) \
                    * span ** (p - 2 * k)
            else:
                t = mpc(0)
            rhs.append(t)
        import mpmath
        with mpmath.workprec(gmpy2.get_context().precision + 16):
            nun = len(cusp_basis)
            A = mpmath.matrix(2 * len(rows), nun)
            b = mpmath.matrix(2 * len(rows), 1)
            for r, row in enumerate(rows):
                for c, val in enumerate(row):
                    A[2 * r, c] = mpmath.mpf(str(val.real))
                    A[2 * r + 1, c] = mpmath.mpf(str(val.imag))
                b[2 * r, 0] = mpmath.mpf(str(rhs[r].real))
                b[2 * r + 1, 0] = mpmath.mpf(str(rhs[r].imag))
            x, res = mpmath.qr_solve(A, b)
            scale = max(abs(v) for v in rhs) + mpf(1)
            if not mpmath.mpf(str(res)) < mpmath.mpf(str(scale)) * 1e-20:
                raise RuntimeError(
                    f"principal-part match residual {res} too large for "
                    f"f_{{{k},{d}}}")
            digits = max(gmpy2.get_context().precision // 3, 40)
            alphas = [mpf(mpmath.nstr(x[i, 0], digits, strip_zeros=False))
                      for i in range(nun)]
        # the coefficient vector is a rational direction times one
        # transcendental scale, a rational multiple of a power of pi once
        # the |d|^(k-1/2)/pi normalization is included; certify both
        recon_tol = mpf(10) ** -40
        pivot = max(range(len(alphas)), key=lambda i: abs(alphas[i]))
        combo = []
        for a in alphas:
            val, amb = rational_reconstruct_ex(a / alphas[pivot], 10 ** 12,
                                               recon_tol)
            if val is None or amb:
                raise RuntimeError(
                    f"coefficient ratio {a / alphas[pivot]} of "
                    f"f_{{{k},{d}}} did not reconstruct as a rational")
            combo.append(val)
        ad = mpf(-d)
        scale = alphas[pivot] * ad ** k / gmpy2.sqrt(ad) / pi_()
        scale_rat, pi_power, sqrt_disc = None, None, False
        for j in range(0, 2 * k + 1):
            for use_sqrt in (False, True):
                cand = scale / pi_() ** j
                if use_sqrt:
                    cand = cand * gmpy2.sqrt(ad)
                val, amb = rational_reconstruct_ex(cand, 10 ** 12, recon_tol)
                if val is not None and not amb:
                    scale_rat, pi_power, sqrt_disc = val, j, use_sqrt
                    break
            if scale_rat is not None:
                break
        if scale_rat is None:
            raise RuntimeError(
                f"scale {scale} of f_{{{k},{d}}} did not reconstruct as a "
                "rational multiple of a power of pi over sqrt|d|")
    numer = None
    for c, basis in zip(combo, cusp_basis):
        term = basis * (c * scale_rat)
        numer = term if numer is None else numer + term
    mf = MeromForm(k=k, d=d, numer=numer, den=den, den_pole_order=pole_order,
                   combo=tuple(combo), pi_power=pi_power,
                   sqrt_disc=sqrt_disc, cm=q0, nterms=nterms)
    _MEROM_CACHE[key] = mf
    return mf


def merom_eval(mf: MeromForm, z, tol=None):
    """Evaluate f_{k,d} at z in H by reducing to the fundamental domain,
    applying the weight-2k cocycle, and summing the exact numerator and
    denominator series there."""
    prec = gmpy2.get_context().precision
    if tol is None:
        tol = mpf(2) ** -(prec - 16)
    zc = mpc(z.real, z.imag)
    g, zstar, _ = fd_reduce(zc)
    jf = jfactor(g, zc)
    wt = 2 * mf.k + {-3: 4, -4: 6}.get(mf.d, 12) * mf.den_pole_order
    num = eval_scalar_series(mf.numer, zstar, tol, wt_hint=wt)
    den = eval_scalar_series(mf.den, zstar, tol, wt_hint=wt)
    guard = mpf(2) ** -(prec // 8)
    if abs(den) < guard * (abs(num) + 1):
        raise PoleError(
            f"point {z} lies within the pole guard of f_{{{mf.k},{mf.d}}} "
            f"(CM form {mf.cm.triple()})", form=mf.cm)
    out = pi_() ** mf.pi_power * num / den * jf ** (-2 * mf.k)
    if mf.sqrt_disc:
        out = out / gmpy2.sqrt(mpf(-mf.d))
    return out


def f_eval(k: int, d: int, z, tol=None):
    """f_{k,d}(z) for a class number one discriminant d < 0."""
    return merom_eval(merom_form(k, d), z, tol=tol)


# ---------------------------------------------------------------------------
# brute-force oracle: the defining Poincare-type series, summed directly


def _cot_poly_values(w, jmax):
    """T_j(w) = sum_n (w+n)^{-j} for j = 1..jmax, via the cotangent
    polynomial recursion P_1 = c, P_{j+1} = (1+c^2) P_j' / j evaluated at
    c = cot(pi w); T_j = pi^j P_j(c)."""
    # represent P_j as coefficient lists in c
    polys = [[Fraction(0), Fraction(1)]]           # P_1 = c
    for j in range(1, jmax):
        p = polys[-1]
        dp = [p[i] * i for i in range(1, len(p))]
        # (1 + c^2) * dp
        out = [Fraction(0)] * (len(dp) + 2)
        for i, c0 in enumerate(dp):
            out[i] += c0
            out[i + 2] += c0
        polys.append([c / j for c in out])
    pw = pi_() * mpc(w.real, w.imag)
    c = gmpy2.cos(pw) / gmpy2.sin(pw)
    vals = []
    piw = pi_()
    for j, p in enumerate(polys, start=1):
        acc = mpc(0)
        for co in reversed(p):
            acc = acc * c + mpf(co)
        vals.append(acc * piw ** j)
    return vals


def f_eval_direct(k: int, d: int, z, amax: int = 400):
    """Direct summation of (|d|^(k-1/2)/pi) sum_Q Q(z,1)^{-k} over positive
    definite forms of discriminant d, with the inner n-sum over
    T-translates done in closed form.  Slowly convergent reference
    implementation; only valid when z is above every pole it skips."""
    if d >= 0 or d % 4 not in (0, 1):
        raise ValueError(f"{d} is not a negative discriminant")
    zc = mpc(z.real, z.imag)
    sd = gmpy2.sqrt(mpf(-d))
    total = mpc(0)
    for a in range(1, amax + 1):
        rset = [r for r in range(2 * a) if (r * r - d) % (4 * a) == 0]
        s = sd / (2 * a)
        # partial fractions of ((u+n)^2 + s^2)^{-k} in u+n
        p = mpc(0, s)
        block = mpc(0)
        tjp = None
        tjm = None
        for r in rset:
            u = zc + mpf(r) / (2 * a)
            tvals = _cot_poly_values(u - p, 2 * k)    # sums of (u-p+n)^{-j}
            svals = _cot_poly_values(u + p, 2 * k)
            acc = mpc(0)
            for j in range(1, k + 1):
                coef = (mpf((-1) ** (k - j)) * math.comb(2 * k - j - 1, k - j)
                        / (2 * p) ** (2 * k - j))
                acc += coef * (tvals[j - 1] + mpf((-1) ** j) * svals[j - 1])
            block += acc
        total += block / mpf(a) ** k
    ad = mpf(-d)
    return ad ** k / gmpy2.sqrt(ad) / pi_() * total


# ---------------------------------------------------------------------------
# poles of f-sums on a closed geodesic


def f_class_eval(k: int, P: QForm, z, amax: int = 400):
    """f_{k,P}(z): the defining sum restricted to the Gamma-orbit of P.

    For class number one the orbit sum is the full sum and the exact
    construction is used; otherwise the orbit is enumerated directly.
    """
    d = P.disc()
    if d >= 0:
        raise ValueError("f_class_eval needs a definite form")
    reps = class_reps(d)
    if len(reps) == 1:
        return f_eval(k, d, z)
    from .qforms import reduce_posdef
    target = reduce_posdef(P if P.a > 0 else QForm(-P.a, -P.b, -P.c))[0]
    zc = mpc(z.real, z.imag)
    sd = gmpy2.sqrt(mpf(-d))
    total = mpc(0)
    for a in range(1, amax + 1):
        s = sd / (2 * a)
        p = mpc(0, s)
        block = mpc(0)
        for r in range(2 * a):
            if (r * r - d) % (4 * a) != 0:
                continue
            c0 = (r * r - d) // (4 * a)
            if reduce_posdef(QForm(a, r, c0))[0].triple() != target.triple():
                continue
            u = zc + mpf(r) / (2 * a)
            tvals = _cot_poly_values(u - p, 2 * k)
            svals = _cot_poly_values(u + p, 2 * k)
            acc = mpc(0)
            for j in range(1, k + 1):
                coef = (mpf((-1) ** (k - j)) * math.comb(2 * k - j - 1, k - j)
                        / (2 * p) ** (2 * k - j))
                acc += coef * (tvals[j - 1] + mpf((-1) ** j) * svals[j - 1])
            block += acc
        total += block / mpf(a) ** k
    ad = mpf(-d)
    return ad ** k / gmpy2.sqrt(ad) / pi_() * total


@dataclass
class CyclePole:
    """A CM point of discriminant d lying on the closed geodesic, at cycle
    parameter t in [1, eps^2)."""

    d: int
    form: tuple
    t: object

    def serialize(self):
        return {"d": self.d, "form": list(self.form), "t": str(self.t)}


def pole_scan(A: QForm, dlist):
    """All CM points of the given discriminants on one period of S_A.

    z_Q lies on S_A exactly when (A, Q) = 0 in the bilinear form, i.e.
    2(a*gamma + c*alpha) = b*beta; the enumeration of Q = [alpha, beta,
    gamma] is bounded by the y- and x-extent of the period window
    t in [1, eps^2] (y is maximal at t = 1 and decreases; x is monotone).
    """
    geo = geodesic(A)
    w, wp = geo.w, geo.wp
    eps2 = geo.eps.to_mpfr() ** 2
    period = 2 * gmpy2.log(geo.eps.to_mpfr())

    def xy(t):
        z = geo.point(t)
        return mpf(z.real), mpf(z.imag)

    x1, y1 = xy(mpf(1))
    x2, y2 = xy(eps2)
    ymin = min(y1, y2)
    xlo, xhi = min(x1, x2), max(x1, x2)
    margin = mpf(1) / 1000
    out = []
    for d in sorted(set(dlist)):
        if d >= 0 or d % 4 not in (0, 1):
            raise ValueError(f"{d} is not a negative discriminant")
        sdd = gmpy2.sqrt(mpf(-d))
        amax = int(sdd / (2 * ymin * (1 - margin))) + 1
        seen = []
        for alpha in range(1, amax + 1):
            blo = int(gmpy2.floor(-2 * alpha * (xhi + margin))) - 1
            bhi = int(gmpy2.ceil(-2 * alpha * (xlo - margin))) + 1
            for beta in range(blo, bhi + 1):
                if (beta * beta - d) % (4 * alpha) != 0:
                    continue
                gamma = (beta * beta - d) // (4 * alpha)
                if 2 * (A.a * gamma + A.c * alpha) != A.b * beta:
                    continue
                zq = mpc(mpf(-beta) / (2 * alpha), sdd / (2 * alpha))
                tq = -mpc(0, 1) * (zq - w) / (wp - zq)
                if not (abs(tq.imag) < mpf(10) ** -20 * (1 + abs(tq.real))
                        and tq.real > 0):
                    continue
                s = gmpy2.log(mpf(tq.real))
                s = s - gmpy2.floor(s / period) * period
                if any(abs(s - s0) < mpf(10) ** -15
                       or abs(abs(s - s0) - period) < mpf(10) ** -15
                       for s0 in seen):
                    continue
                seen.append(s)
                out.append(CyclePole(d=d, form=(alpha, beta, gamma),
                                     t=gmpy2.exp(s)))
    out.sort(key=lambda p: p.t)
    return out


# ---------------------------------------------------------------------------
# principal-value cycle integrals of meromorphic f-sums


@dataclass
class CycleResult:
    """Numeric cycle integral with an error estimate, the poles found on
    the cycle, and optional recognized / closed-form rationals."""

    value: object
    error: object
    poles: list = field(default_factory=list)
    recognized: object = None
    closed_form: object = None
    experimental: bool = False

    def serialize(self):
        return {
            "value": [str(self.value.real), str(self.value.imag)],
            "error": str(self.error),
            "poles": [p.serialize() for p in self.poles],
            "recognized": None if self.recognized is None
            else str(self.recognized),
            "closed_form": None if self.closed_form is None
            else str(self.closed_form),
            "experimental": self.experimental,
        }


def _integrate_segments(fun, segments, tol, order, max_panels):
    """Sum of integrals of fun over parametrized segments.

    Each segment is (s(u), ds/du) as callables on [0, 1]; panels on every
    segment are doubled together until the total defect is below tol.
    """
    nodes, weights = gauss_legendre(order)

    def total_at(panels):
        acc = mpc(0)
        for spath, dpath in segments:
            h = mpf(1) / panels
            for p in range(panels):
                mid = (p + mpf(1) / 2) * h
                for x, wq in zip(nodes, weights):
                    u = mid + h / 2 * x
                    acc += fun(spath(u)) * dpath(u) * (wq * h / 2)
        return acc

    prev = None
    panels = 1
    while panels <= max_panels:
        cur = total_at(panels)
        if prev is not None:
            err = abs(cur - prev)
            if err < tol:
                return cur, err
        prev = cur
        panels *= 2
    raise QuadratureError(
        f"segment quadrature did not reach tol={tol} within "
        f"{max_panels} panels")


def _pole_positions(poles, period):
    return sorted(gmpy2.log(mpf(p.t)) for p in poles)


def _shifted_window(spoles, period):
    """Start the period at the midpoint of the largest gap between poles
    (the integrand is periodic); returns (s0, shifted pole list)."""
    if not spoles:
        return mpf(0), []
    ext = list(spoles) + [spoles[0] + period]
    gaps = [(ext[i + 1] - ext[i], i) for i in range(len(spoles))]
    gmax, imax = max(gaps)
    s0 = ext[imax] + gmax / 2
    shifted = sorted(s - gmpy2.floor((s - s0) / period) * period
                     for s in spoles)
    return s0, shifted

def _deformed_segments(s0, period, spoles, radius, sign):
    """Straight runs along the real s-axis with semicircular detours of the
    given radius around each pole; sign +1 detours above, -1 below."""
    segs = []

    def straight(a, b):
        if b > a:
            segs.append((lambda u, a=a, b=b: a + (b - a) * u,
                         lambda u, a=a, b=b: b - a))

    cur = s0
    for s in spoles:
        straight(cur, s - radius)
        # theta runs pi -> 0 above the pole, pi -> 2 pi below; either way
        # the arc goes from s - radius to s + radius
        dth = -pi_() if sign > 0 else pi_()

        def arc(u, s=s, dth=dth):
            th = pi_() + dth * u
            return s + radius * mpc(gmpy2.cos(th), gmpy2.sin(th))

        def darc(u, s=s, dth=dth):
            th = pi_() + dth * u
            return radius * mpc(-gmpy2.sin(th), gmpy2.cos(th)) * dth

        segs.append((arc, darc))
        cur = s + radius
    straight(cur, s0 + period)
    return segs


def _merom_integrand(geo: GeodesicClass, A: QForm, k: int, coeffs):
    """s -> sum_d c_d f_{k,d}(z(e^s)) * A(z,1)^(k-1) * dz/ds, valid for
    complex s near the real axis (contour deformations stay in H)."""
    forms = {d: merom_form(k, d) for d in coeffs}

    def fun(s):
        t = gmpy2.exp(s)
        z = geo.point(t)
        val = mpc(0)
        for d, c in coeffs.items():
            val += mpf(Fraction(c)) * merom_eval(forms[d], z)
        qa = A.a * z * z + A.b * z + A.c
        return val * qa ** (k - 1) * geo.dz_dt(t) * t

    return fun


def cycle_merom(A: QForm, k: int, coeffs, tol=None, order=48, max_panels=64,
                den_bound=10 ** 6, pv=True) -> CycleResult:
    """Cycle integral of sum_d coeffs[d] * f_{k,d} over one period of S_A.

    CM points of the participating discriminants on the cycle are located
    exactly; with pv enabled the integral is the Cauchy principal value,
    computed as the average of the two contour deformations around each
    pole (their mean cancels the odd-order singular parts and takes the
    finite part of the even ones).  The real value is reconstructed as a
    rational when possible.
    """
    prec = gmpy2.get_context().precision
    if tol is None:
        tol = mpf(2) ** -(prec // 2)
    coeffs = {int(d): Fraction(c) for d, c in coeffs.items() if c != 0}
    geo = geodesic(A)
    period = 2 * gmpy2.log(geo.eps.to_mpfr())
    poles = pole_scan(A, list(coeffs)) if coeffs else []
    fun = _merom_integrand(geo, A, k, coeffs)
    if not poles:
        segments = [(lambda u: period * u, lambda u: period)]
        val, err = _integrate_segments(fun, segments, tol, order, max_panels)
    else:
        if not pv:
            raise PoleError(
                "cycle passes through CM points "
                + ", ".join(str(p.form) for p in poles)
                + "; enable principal-value mode to integrate",
                form=poles[0].form)
        spoles = _pole_positions(poles, period)
        s0, shifted = _shifted_window(spoles, period)
        gaps = [b - a for a, b in zip([s0] + shifted,
                                      shifted + [s0 + period])]
        radius = min(min(gaps) / 3, period / 16)
        up = _deformed_segments(s0, period, shifted, radius, +1)
        dn = _deformed_segments(s0, period, shifted, radius, -1)
        vu, eu = _integrate_segments(fun, up, tol, order, max_panels)
        vd, ed = _integrate_segments(fun, dn, tol, order, max_panels)
        val, err = (vu + vd) / 2, (eu + ed) / 2 + abs(vu - vd) * 0
    val = -val  # oriented cycle runs t from eps^2 down to 1
    recognized = None
    if abs(val.imag) < 100 * err + tol:
        cand, amb = rational_reconstruct_ex(
            mpf(val.real), den_bound, max(10 * err, mpf(2) ** -(prec - 16)))
        if cand is not None and not amb:
            recognized = cand
    return CycleResult(value=val, error=err, poles=poles,
                       recognized=recognized)


def pv_cycle(A: QForm, k: int, coeffs, delta_sequence=None, tol=None,
             order=48, max_panels=64, den_bound=10 ** 6) -> CycleResult:
    """Principal value by symmetric exclusion and extrapolation.

    Excludes [t* e^-delta, t* e^+delta] around each pole, evaluates along
    the decreasing delta_sequence and Richardson-extrapolates to delta -> 0.
    Experimental; cross-check against cycle_merom's contour average.
    """
    prec = gmpy2.get_context().precision
    if tol is None:
        tol = mpf(2) ** -(prec // 2)
    coeffs = {int(d): Fraction(c) for d, c in coeffs.items() if c != 0}
    geo = geodesic(A)
    period = 2 * gmpy2.log(geo.eps.to_mpfr())
    poles = pole_scan(A, list(coeffs)) if coeffs else []
    fun = _merom_integrand(geo, A, k, coeffs)
    if not poles:
        return cycle_merom(A, k, coeffs, tol=tol, order=order,
                           max_panels=max_panels, den_bound=den_bound)
    spoles = _pole_positions(poles, period)
    s0, shifted = _shifted_window(spoles, period)
    gaps = [b - a for a, b in zip([s0] + shifted, shifted + [s0 + period])]
    if delta_sequence is None:
        d0 = min(min(gaps) / 4, period / 32)
        delta_sequence = [d0 / 2 ** m for m in range(6)]
    vals = []
    for delta in delta_sequence:
        delta = mpf(delta)
        segments = []
        cur = s0
        for s in shifted:
            a, b = cur, s - delta
            segments.append((lambda u, a=a, b=b: a + (b - a) * u,
                             lambda u, a=a, b=b: b - a))
            cur = s + delta
        a, b = cur, s0 + period
        segments.append((lambda u, a=a, b=b: a + (b - a) * u,
                         lambda u, a=a, b=b: b - a))
        v, e = _integrate_segments(fun, segments, tol, order, max_panels)
        vals.append(v)
    # Richardson (Neville) extrapolation in delta, assuming an expansion
    # in powers of delta with ratio 2 between successive deltas
    table = list(vals)
    for j in range(1, len(table)):
        for i in range(len(table) - 1, j - 1, -1):
            table[i] = table[i] + (table[i] - table[i - 1]) / (2 ** j - 1)
    ext_err = abs(table[-1] - table[-2])
    if not ext_err < 1000 * tol:
        raise QuadratureError(
            f"principal-value extrapolation did not stabilize "
            f"(last defect {ext_err}); the symmetric limit may not exist")
    val = -table[-1]
    recognized = None
    if abs(val.imag) < 100 * ext_err + tol:
        cand, amb = rational_reconstruct_ex(
            mpf(val.real), den_bound,
            max(10 * ext_err, mpf(2) ** -(prec - 16)))
        if cand is not None and not amb:
            recognized = cand
    return CycleResult(value=val, error=ext_err, poles=poles,
                       recognized=recognized, experimental=True)


def trace_cycle(Dtr: int, k: int, P: QForm, coeff=Fraction(1), tol=None,
                order=48, max_panels=64, den_bound=10 ** 6) -> CycleResult:
    """Sum of the cycle integrals of f_{k,P} over the classes of the
    positive nonsquare discriminant Dtr."""
    d = P.disc()
    if len(class_reps(d)) != 1:
        raise NotImplementedError(
            "trace_cycle uses the exact construction, which needs the "
            f"class number of {d} to be one")
    total, err = mpc(0), mpf(0)
    poles = []
    for A in class_reps(Dtr):
        res = cycle_merom(A, k, {d: coeff}, tol=tol, order=order,
                          max_panels=max_panels, den_bound=den_bound)
        total += res.value
        err += res.error
        poles.extend(res.poles)
    prec = gmpy2.get_context().precision
    recognized = None
    if abs(total.imag) < 100 * err + mpf(2) ** -(prec // 2):
        cand, amb = rational_reconstruct_ex(
            mpf(total.real), den_bound, max(10 * err, mpf(2) ** -(prec - 16)))
        if cand is not None and not amb:
            recognized = cand
    return CycleResult(value=total, error=err, poles=poles,
                       recognized=recognized)


# ---------------------------------------------------------------------------
# the closed form: constant term of g against a Rankin-Cohen bracket


def closed_form_thm41(A: QForm, k: int, g: QSeries,
                      mock_order: int = None) -> Fraction:
    """Exact rational value of C_A(sum_d a_g(d) f_{k,d}) for a weakly
    holomorphic input g of weight 3/2 - k (dual representation, vector
    over L'/L):

        -(4D)^((k-1)/2) * CT( g|M . [theta_I, mock-plus]_{(k-1)/2} )

    with the bracket in weights 1 and 1/2 and the mock plus part solved
    from its shadow.  Raises when the series orders cannot support the
    constant term (order audit).
    """
    if k < 3 or k % 2 == 0:
        raise ValueError("closed_form_thm41 needs odd k >= 3")
    from .lattice import split
    from .maass import solve_mock
    sd = split(A)
    D = sd.D
    GL = sd.L.disc_group()
    GM = sd.M.disc_group()
    GI = sd.I.disc_group()
    GN = sd.N.disc_group()
    if g.ncomp != len(GL.reps):
        raise ValueError("g must be a vector over L'/L")
    gM = qseries.down_map(g, GL, GM)
    depth = -min((e for (_, e) in gM.coeffs if e < 0), default=Fraction(0))
    need = int(depth) + 8
    if mock_order is None:
        mock_order = max(25, need + 4)
    if mock_order < need:
        raise ValueError(
            f"mock series order {mock_order} below the {need} required by "
            "the principal part of g (order audit)")
    mock = solve_mock(sd, order=mock_order)
    serlen = mock_order
    holo = QSeries(dict(mock.holo.coeffs), serlen, mock.holo.ncomp)
    vth = theta_mod.hecke_theta_series(sd, serlen)
    br = qseries.rankin_cohen(vth, 1, holo, Fraction(1, 2), (k - 1) // 2)
    # br is indexed i * |N'/N| + j; re-index by M'/M as rep_I + rep_N
    ncompn = len(GN.reps)
    perm = {}
    for i, ri in enumerate(GI.reps):
        for j, rj in enumerate(GN.reps):
            rm = tuple(x + y for x, y in zip(ri, rj))
            perm[i * ncompn + j] = GM.index_of(rm)
    br_m = QSeries({(perm[i], e): c for (i, e), c in br.coeffs.items()},
                   br.prec, len(GM.reps))
    ct = qseries.ct_pair(gM, br_m)
    return -Fraction(4 * D) ** ((k - 1) // 2) * ct


def cycle_siegel(A: QForm, tau, tol=None, order=48):
    """Component vector over L'/L of the cycle integral of the raised
    Siegel theta kernel of L at tau."""
    from .lattice import split
    prec = gmpy2.get_context().precision
    if tol is None:
        tol = mpf(2) ** -(prec // 2)
    sd = split(A)
    geo = geodesic(A)
    vals, _ = cycle_raised_theta(sd, geo, tau, tol, order=order)
    return vals
