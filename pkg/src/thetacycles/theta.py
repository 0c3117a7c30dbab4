"""Theta functions: certified numeric Siegel-type sums and exact q-series.

Numeric evaluators sum over lattice points inside an ellipsoid of the
majorant form and certify the discarded tail with a Gaussian product bound.
Exact series (unary thetas of the definite line N, the indefinite Hecke
theta of I) are built over the corresponding discriminant groups with
Fraction coefficients.
"""

from __future__ import annotations

import math
from fractions import Fraction

import gmpy2

from .numerics import QuadElem, e2pi, mpc, mpf, pi_
from .lattice import (Lattice, SplitData, bilinear, majorant, poly_p, poly_q,
                      qval)

__all__ = [
    "siegel_theta", "raised_theta", "theta_i_siegel", "theta_i_star",
    "unary_theta_series", "hecke_theta_series", "eval_qseries_at",
    "unary_coeff_bound", "hecke_coeff_bound",
    "tensor_values", "up_values", "ThetaTruncationError",
]


class ThetaTruncationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# ellipsoid enumeration with certified Gaussian tails


def _cholesky(M):
    """M = R^T diag(d) R with R unit upper triangular; M positive definite
    mpfr matrix.  Returns (d, R)."""
    n = len(M)
    d = [mpf(0)] * n
    R = [[mpf(int(i == j)) for j in range(n)] for i in range(n)]
    A = [[mpf(M[i][j]) for j in range(n)] for i in range(n)]
    for i in range(n):
        d[i] = A[i][i]
        if d[i] <= 0:
            raise ValueError("matrix is not positive definite")
        for j in range(i + 1, n):
            R[i][j] = A[i][j] / d[i]
        for j in range(i + 1, n):
            for k in range(j, n):
                A[j][k] = A[j][k] - R[i][j] * d[i] * R[i][k]
    return d, R


def _enum_ellipsoid(d, R, center, R2):
    """Integer points x with sum_i d_i (x_i - c_i + sum_{j>i} R_ij (x_j - c_j))^2 <= R2.

    Recursion from the last coordinate; yields tuples.
    """
    n = len(d)

    def rec(i, partial, rem):
        # coordinates x_{i+1..n-1} fixed; rem = remaining budget
        if i < 0:
            yield tuple(partial)
            return
        # u_i = x_i - c_i + sum_{j>i} R_ij (x_j - c_j); partial holds
        # x_{n-1}, ..., x_{i+1} in that order
        shift = -center[i]
        for j in range(i + 1, n):
            xj = partial[n - 1 - j]
            shift += R[i][j] * (xj - center[j])
        bound = gmpy2.sqrt(rem / d[i])
        lo = int(gmpy2.ceil(-bound - shift))
        hi = int(gmpy2.floor(bound - shift))
        for x in range(lo, hi + 1):
            u = x + shift
            used = d[i] * u * u
            if used <= rem:
                yield from rec(i - 1, partial + [x], rem - used)

    yield from rec(n - 1, [], mpf(R2))


def _tail_bound_factor(d, s):
    """Bound on sum over all shifted-integer points of exp(-s * m(x)),
    by the 1D product bound 1 + 2 exp(-a/4)/(1 - exp(-a)) per coordinate."""
    total = mpf(1)
    for di in d:
        a = s * di
        if a <= 0:
            raise ValueError("nonpositive Gaussian parameter")
        total *= 1 + 2 * gmpy2.exp(-a / 4) / (1 - gmpy2.exp(-a))
    return total


def _choose_radius(d, twopiv, K, tol):
    """Smallest R2 with K * m * exp(-2 pi v m) summed over m(X) > R2 certified
    below tol, using exp(-2 pi v m) <= C exp(-pi v m) with polynomial
    absorbed.  Returns (R2, certified tail bound)."""
    s_half = twopiv / 2
    prod = _tail_bound_factor(d, s_half)
    # sum_{m > R2} K m e^{-2 pi v m} <= K R2 e^{-s_half R2} * prod  for
    # R2 >= 2/s_half (where m e^{-s_half m} is decreasing)
    R2 = max(mpf(4) / s_half, mpf(1))
    for _ in range(20000):
        bound = K * R2 * gmpy2.exp(-s_half * R2) * prod
        if bound < tol:
            return R2, bound
        R2 = R2 * gmpy2.mpfr("1.25")
    raise ThetaTruncationError("could not certify theta tail")


def _theta_sum(lat: Lattice, tau, z, term_fn, K_fn, tol):
    """Generic Siegel-type theta: per disc-group component gamma,

        sum_{X in gamma + lat} term_fn(X) * e(q(X) u) * exp(-2 pi v m(X))

    where |term_fn(X)| <= K_fn * max(1, m(X)).  Returns a list of mpc, one
    per component of lat.disc_group(), certified to absolute accuracy tol.
    """
    group = lat.disc_group()
    u, v = mpf(tau.real), mpf(tau.imag)
    if v <= 0:
        raise ValueError("tau must be in the upper half-plane")
    n = lat.rank
    basis = lat.basis
    # majorant Gram matrix in basis coordinates, via polarization
    zc = mpc(z.real, z.imag)

    def maj_bil(a, b):
        pa, pb = poly_p(a, zc), poly_p(b, zc)
        Qa, Qb = poly_q(a, zc), poly_q(b, zc)
        y = mpf(zc.imag)
        return pa * pb / 4 + (Qa.real * Qb.real + Qa.imag * Qb.imag) / (4 * y * y)

    M = [[maj_bil(basis[i], basis[j]) * 2 for j in range(n)] for i in range(n)]
    # m(sum x_i b_i) = (1/2) x^T M x; fold the 1/2 into the form
    M = [[M[i][j] / 2 for j in range(n)] for i in range(n)]
    d, Rm = _cholesky(M)
    twopiv = 2 * pi_() * v
    K = K_fn
    R2, tail = _choose_radius(d, twopiv, K * group.order, tol)
    out = []
    for gi in range(group.order):
        gamma = group.reps[gi]
        # coordinates of gamma in the basis (rational)
        gc = lat.coords(gamma)
        assert gc is not None
        center = [-mpf(c) for c in gc]
        total = mpc(0)
        for x in _enum_ellipsoid(d, Rm, center, R2):
            # coordinates come back in reversed order from the recursion
            coords = [Fraction(x[n - 1 - j]) + gc[j] for j in range(n)]
            X = tuple(sum(coords[j] * basis[j][t] for j in range(n))
                      for t in range(3))
            qX = qval(X)
            m = majorant(X, zc)
            phase = e2pi(mpf(qX) * u) * gmpy2.exp(-twopiv * m)
            total += term_fn(X) * phase
        out.append(total)
    return out


def siegel_theta(lat: Lattice, tau, z, tol):
    """Theta_lat(tau, z) = v sum e(q(X_z) tau + q(X_z-perp) conj(tau)) e_X."""
    v = mpf(tau.imag)
    return _theta_sum(lat, tau, z, lambda X: v, float(v) + 1, tol)


def raised_theta(lat: Lattice, tau, z, tol):
    """R_0 Theta_lat = 2 pi v^2 sum p_X conj(Q_X) y^-2 e(...) e_X."""
    v = mpf(tau.imag)
    y = mpf(z.imag)
    zc = mpc(z.real, z.imag)
    pref = 2 * pi_() * v * v

    def term(X):
        Q = poly_q(X, zc)
        return pref * poly_p(X, zc) * gmpy2.mpc(Q.real, -Q.imag) / (y * y)

    # |p Q/y^2| = 2 sqrt(q(X_z)) * 2 sqrt(-q(X_zperp)) / y <= 2 m / y
    K = float(pref * 2 / y) + 1
    return _theta_sum(lat, tau, z, term, K, tol)


def theta_i_siegel(I: Lattice, tau, z, tol):
    """Theta_I(tau, z) = v^(1/2) sum p_Y(z) e(...) e_Y."""
    v = mpf(tau.imag)
    zc = mpc(z.real, z.imag)
    pref = gmpy2.sqrt(v)
    # |p_Y| = 2 sqrt(q(Y_z)) <= 2 sqrt(m) <= 1 + m
    return _theta_sum(I, tau, z, lambda Y: pref * poly_p(Y, zc),
                      float(pref * 2) + 1, tol)


def theta_i_star(I: Lattice, tau, z, tol):
    """Theta_I^*(tau, z) = v^(3/2) sum p_Y(z) y^-2 conj(Q_Y(z)) e(...) e_Y."""
    v = mpf(tau.imag)
    y = mpf(z.imag)
    zc = mpc(z.real, z.imag)
    pref = v * gmpy2.sqrt(v)

    def term(Y):
        Q = poly_q(Y, zc)
        return pref * poly_p(Y, zc) * gmpy2.mpc(Q.real, -Q.imag) / (y * y)

    K = float(pref * 2 / y) + 1
    return _theta_sum(I, tau, z, term, K, tol)


# ---------------------------------------------------------------------------
# exact q-series: unary thetas and the Hecke theta


def unary_theta_series(sd: SplitData, weight: Fraction, prec):
    """Theta_{w,N} = sum_{W in N'} coeff(W) e(-q(W) tau) e_W, a form of
    weight w for the dual Weil representation of N.  coeff is (W, A) for
    w = 3/2 and 1 for w = 1/2; exponents -q(W) are nonnegative.
    """
    from .qseries import QSeries
    weight = Fraction(weight)
    if weight not in (Fraction(1, 2), Fraction(3, 2)):
        raise ValueError("weight must be 1/2 or 3/2")
    group = sd.N.disc_group()
    two_q0 = -2 * Fraction(sd.q0)          # = 2|q0|
    assert two_q0 == group.order
    out = {}
    A = sd.A.triple()
    j = 0
    while True:
        exps = Fraction(j * j, 2 * int(two_q0))
        if exps >= prec:
            break
        for jj in (j, -j) if j else (0,):
            W = tuple(Fraction(jj) * c / two_q0 for c in sd.n0)
            e = -qval(W)
            assert e == Fraction(jj * jj, 2 * int(two_q0))
            c = bilinear(W, A) if weight == Fraction(3, 2) else Fraction(1)
            if c == 0 and weight == Fraction(3, 2):
                continue
            gi = group.index_of(W)
            key = (gi, e)
            out[key] = out.get(key, Fraction(0)) + c
        j += 1
    return QSeries(out, prec, group.order)


def hecke_theta_series(sd: SplitData, prec, window_shift: int = 0):
    """vartheta_I = sum over Gamma_I-orbits of Y in I' with q(Y) > 0 of
    sgn(Y, Y_0) e(q(Y) tau) e_Y, with exact orbit representatives chosen in
    the window eps^(4s) <= |lambda/lambda'| < eps^(4s+4), s = window_shift.

    The result is independent of window_shift: shifting by one window
    multiplies the representatives by eps^2, which preserves q, the coset
    in I'/I, and the sign of lambda."""
    from .qseries import QSeries
    from .qforms import automorph
    group = sd.I.disc_group()
    D = sd.D
    _, eps = automorph(sd.A)
    s = int(window_shift)
    eps_lo = eps ** (8 * s)
    eps_hi = eps ** (8 * s + 8)
    # lambda values of the dual basis vectors (exact)
    dual = sd.I.dual_basis()
    lam1, lam2 = sd.lam(dual[0]), sd.lam(dual[1])
    # bounding box: |lambda| < eps^(2s+2) sqrt(prec),
    # |lambda'| <= eps^(-2s) sqrt(prec); invert the (lambda, lambda')
    # embedding numerically with margin
    e2 = (eps * eps).embed()[0]
    sp = gmpy2.sqrt(mpf(prec))
    bl, blp = (e2 ** (s + 1)) * sp, (e2 ** (-s)) * sp
    a11, a12 = lam1.embed()[0], lam2.embed()[0]
    b11, b12 = lam1.embed()[1], lam2.embed()[1]
    det = a11 * b12 - a12 * b11
    # coords (x1, x2): lambda = a11 x1 + a12 x2, lambda' = b11 x1 + b12 x2
    B1 = (abs(b12) * bl + abs(a12) * blp) / abs(det)
    B2 = (abs(b11) * bl + abs(a11) * blp) / abs(det)
    N1 = int(gmpy2.floor(B1 * gmpy2.mpfr("1.1"))) + 2
    N2 = int(gmpy2.floor(B2 * gmpy2.mpfr("1.1"))) + 2
    # float prescreen constants; exact tests decide near the boundaries
    a11f, a12f = float(a11), float(a12)
    b11f, b12f = float(b11), float(b12)
    out = {}
    for x1 in range(-N1, N1 + 1):
        for x2 in range(-N2, N2 + 1):
            if x1 == 0 and x2 == 0:
                continue
            lf = a11f * x1 + a12f * x2
            lpf = b11f * x1 + b12f * x2
            nf = -lf * lpf
            if nf <= -0.5 or nf >= float(prec) + 0.5:
                continue
            lam = lam1 * x1 + lam2 * x2
            n = -lam.norm()          # = q(Y)
            if n <= 0 or n >= prec:
                continue
            lamp = lam.conj()
            l2 = lam * lam
            lp2 = lamp * lamp
            # window eps^(4s) <= |lam/lam'| < eps^(4s+4), i.e.
            # eps^(8s) lam'^2 <= lam^2 < eps^(8s+8) lam'^2
            if (l2 - eps_lo * lp2).sign() < 0:
                continue
            if (eps_hi * lp2 - l2).sign() <= 0:
                continue
            Y = tuple(Fraction(x1) * a + Fraction(x2) * b
                      for a, b in zip(dual[0], dual[1]))
            gi = group.index_of(Y)
            key = (gi, n)
            out[key] = out.get(key, Fraction(0)) + lam.sign()
    return QSeries(out, prec, group.order)


def unary_coeff_bound(sd: SplitData, weight: Fraction):
    """(K0, K1) with: sum of |coefficients| of the weight-w unary theta at
    any exponent m is at most K0 + K1*m.

    At exponent m = j^2/(2*ord) there are at most two lattice points +-j;
    the weight-3/2 coefficient is |(W, A)| = (j/ord)|(n0, A)| with
    j = sqrt(2*ord*m) <= sqrt(ord/2)*(1 + m)."""
    ord_ = sd.N.disc_group().order
    if Fraction(weight) == Fraction(1, 2):
        return (2, 0)
    nA = abs(bilinear(tuple(Fraction(c) for c in sd.n0),
                      tuple(Fraction(c) for c in sd.A.triple())))
    K = int(nA * 2 / ord_ * math.isqrt(2 * ord_)) + 2
    return (K, K)


def hecke_coeff_bound(sd: SplitData):
    """(K0, K1) bounding the sum of |coefficients| of the Hecke theta at any
    exponent n: the contributing points lie in a box of side ~ sqrt(n), so
    the count is at most (2 b1 sqrt(n) + 3)(2 b2 sqrt(n) + 3) with the box
    constants b1, b2 of the lambda-embedding at n = 1."""
    from .qforms import automorph
    _, eps = automorph(sd.A)
    dual = sd.I.dual_basis()
    lam1, lam2 = sd.lam(dual[0]), sd.lam(dual[1])
    e2 = (eps * eps).embed()[0]
    a11, a12 = lam1.embed()[0], lam2.embed()[0]
    b11, b12 = lam1.embed()[1], lam2.embed()[1]
    det = abs(a11 * b12 - a12 * b11)
    b1 = float((abs(b12) * e2 + abs(a12)) / det) + 1
    b2 = float((abs(b11) * e2 + abs(a11)) / det) + 1
    # (2 b1 s + 3)(2 b2 s + 3) with s = sqrt(n) <= (1 + n)/2
    K0 = math.ceil(9 + 3 * (b1 + b2))
    K1 = math.ceil(4 * b1 * b2 + 3 * (b1 + b2))
    return (K0, K1)


# ---------------------------------------------------------------------------
# numeric evaluation of exact series, tensors, and the trace map


def eval_qseries_at(qs, tau, coeff_bound, tol):
    """Evaluate each component of a q-series at tau, certifying that the
    truncated tail is below tol.  coeff_bound = (K0, K1) asserts that the
    sum of |coefficients| at exponent e is at most K0 + K1*e for e beyond
    the series precision."""
    u, v = mpf(tau.real), mpf(tau.imag)
    out = [mpc(0)] * qs.ncomp
    for (i, e), c in qs.coeffs.items():
        out[i] += mpf(c) * e2pi(mpf(e) * u) * gmpy2.exp(-2 * pi_() * v * mpf(e))
    K0, K1 = (mpf(b) for b in coeff_bound)
    x = gmpy2.exp(-2 * pi_() * v)
    P = mpf(qs.prec)
    tail = (x ** P) * ((K0 + K1 * P) / (1 - x) + K1 * x / (1 - x) ** 2)
    tail *= qs.ncomp
    if not tail < tol:
        raise ThetaTruncationError(
            f"series tail {tail} exceeds tolerance {tol}; increase precision")
    return out


def tensor_values(vals_i, vals_n, sd: SplitData):
    """Combine component values over I'/I and N'/N into values over M'/M
    via gamma_M = gamma_I + gamma_N; cosets of M'/M not of this shape (there
    are none, since M = I + N is an orthogonal direct sum) are covered."""
    GI = sd.I.disc_group()
    GN = sd.N.disc_group()
    GM = sd.M.disc_group()
    assert GI.order * GN.order == GM.order
    out = [None] * GM.order
    for i in range(GI.order):
        for j in range(GN.order):
            rep = tuple(a + b for a, b in zip(GI.reps[i], GN.reps[j]))
            k = GM.index_of(rep)
            assert out[k] is None
            out[k] = vals_i[i] * vals_n[j]
    return out


def up_values(vals_m, sd: SplitData):
    """Numeric trace map C[M'/M] -> C[L'/L]: gamma collects the values at
    beta + gamma for beta in L/M."""
    GM = sd.M.disc_group()
    GL = sd.L.disc_group()
    lcosets = [j for j in range(GM.order) if GL.lat.contains(GM.reps[j])]
    assert len(lcosets) == sd.index
    out = []
    for i in range(GL.order):
        rep = GL.reps[i]
        total = mpc(0)
        for j in lcosets:
            lift = tuple(a + b for a, b in zip(rep, GM.reps[j]))
            total += vals_m[GM.index_of(lift)]
        out.append(total)
    return out
