"""End-to-end acceptance suite.

Every check here is two-pipeline: the same quantity is computed by two
independent code paths (quadrature vs. exact series, floating solve vs.
rational re-verification, direct cycle integral vs. closed form) and the
results are compared at pinned tolerances.  The tolerances are part of the
contract; do not loosen them.

Test-basis tags:
  [DERIVED] - expected value or identity derived independently of the
              implementation (the second pipeline is the oracle).
  [TRIVIAL] - guard/plumbing behaviour evident from the definition.
"""

import math
import random
import warnings
from fractions import Fraction

import gmpy2
import pytest

from thetacycles.numerics import (
    mpc, mpf, precision_bits, rational_reconstruct_ex,
)
from thetacycles.qforms import QForm, act, class_reps, geodesic, jfactor, moebius
from thetacycles.lattice import (
    bilinear, form_lattice, frame_vectors, majorant, poly_p, poly_q, qval,
    split,
)
from thetacycles.qseries import (
    QSeries, ct_pair, delta_series, deriv, down_map, eisenstein,
    plus_to_vector, rankin_cohen, theta_scalar, up_map,
)
from thetacycles.theta import (
    eval_qseries_at, hecke_coeff_bound, hecke_theta_series, unary_coeff_bound,
)
from thetacycles.maass import solve_mock, xi_image
from thetacycles.cycles import (
    closed_form_thm41, cycle_merom, cycle_siegel, cycle_theta_star, f_eval,
    theta_cycle_factorization, trace_cycle,
)

D_GRID = (5, 8, 13)
TAU_GRID = ("i", "1/5+i/2", "-1/3+2i")


def _tau(label):
    return {
        "i": mpc(0, 1),
        "1/5+i/2": mpc(mpf(1) / 5, mpf(1) / 2),
        "-1/3+2i": mpc(mpf(-1) / 3, 2),
    }[label]


def _rep(D):
    A = class_reps(D)[0]
    assert A.a > 0
    return A


def _scale4(s):
    return QSeries({(0, 4 * e): c for (_, e), c in s.coeffs.items()},
                   4 * s.prec, 1)


def _g_recipe(k, prec):
    """theta * (E4 E6 / Delta)(4 tau) for k = 3 (principal part
    2 q^-3 + q^-4, so the combination is 2 f_{k,-3} + f_{k,-4}), and
    theta * (E4^2 / Delta)(4 tau) for k = 5 (same principal support)."""
    a4, a6 = {3: (1, 1), 5: (2, 0)}[k]
    s = theta_scalar(4 * prec) * _scale4(eisenstein(4, prec) ** a4)
    if a6:
        s = s * _scale4(eisenstein(6, prec) ** a6)
    s = s * _scale4(delta_series(prec)).inverse()
    return plus_to_vector(s, form_lattice().disc_group(), sign=-1)


# ---------------------------------------------------------------------------
# AC-1: the cycle integral of the raised Siegel theta kernel equals
# -(4 pi / sqrt(D)) (vartheta_I tensor conj(Theta_{3/2,N}) v^{3/2})^L,
# componentwise over L'/L.  Quadrature on the left, exact q-series with
# certified tails on the right.  [DERIVED: two-pipeline]
@pytest.mark.parametrize("D", D_GRID)
@pytest.mark.parametrize("tau_label", TAU_GRID)
def test_ac1_theta_splitting_identity(D, tau_label):
    with precision_bits(256):
        tau = _tau(tau_label)
        A = _rep(D)
        # point tails inside the quadrature kernel run at tol/1000 = 1e-30
        lhs = cycle_siegel(A, tau, tol=mpf(10) ** -27, order=48)
        rhs = theta_cycle_factorization(split(A), tau, 40, mpf(10) ** -30)
        dev = max(abs(a - b) for a, b in zip(lhs, rhs))
        assert dev < mpf(10) ** -20


# ---------------------------------------------------------------------------
# AC-2: the cycle integral of Theta_I^* dz vanishes (the integrand is an
# exact derivative along the closed geodesic).  [DERIVED]
@pytest.mark.parametrize("D", D_GRID)
@pytest.mark.parametrize("tau_label", TAU_GRID)
def test_ac2_theta_star_cycle_vanishes(D, tau_label):
    with precision_bits(256):
        tau = _tau(tau_label)
        A = _rep(D)
        vals, _ = cycle_theta_star(split(A), geodesic(A), tau,
                                   mpf(10) ** -27, order=48)
        assert max(abs(v) for v in vals) < mpf(10) ** -18


# ---------------------------------------------------------------------------
# AC-3: rationality of the cycle integrals of f = 2 f_{k,-3} + f_{k,-4}
# (the principal part of the weight 3/2 - k input g), and agreement with
# the closed form
#     C_A(f) = -(4D)^{(k-1)/2} CT(g_M . [vartheta_I, mock Theta]_{(k-1)/2}).
# Both sides are computed independently.  [DERIVED: two-pipeline]
@pytest.mark.parametrize("k", (3, 5))
@pytest.mark.parametrize("D", (5, 8))
def test_ac3_rationality_and_closed_form(k, D):
    with precision_bits(256):
        A = _rep(D)
        res = cycle_merom(A, k, {-3: Fraction(2), -4: Fraction(1)},
                          den_bound=10 ** 6)
        assert res.recognized is not None
        assert res.recognized.denominator <= 10 ** 6
        scale = max(abs(mpf(res.recognized.numerator)
                        / res.recognized.denominator), mpf(1))
        assert abs(res.value - mpf(res.recognized.numerator)
                   / res.recognized.denominator) < mpf(10) ** -12 * scale
        cf = closed_form_thm41(A, k, _g_recipe(k, 40))
        cf_scale = max(abs(mpf(cf.numerator) / cf.denominator), mpf(1))
        assert abs(res.value - mpf(cf.numerator) / cf.denominator) \
            < mpf(10) ** -10 * cf_scale
        assert res.recognized == cf


# ---------------------------------------------------------------------------
# AC-4: validity of the mock-theta solve.  Residual certificate, xi-image
# against the exact shadow by central finite differences, and agreement of
# the rationalized coefficients with the floating solve.  [DERIVED]
@pytest.mark.parametrize("D", (5, 8))
def test_ac4_mock_solver_validity(D):
    with precision_bits(256):
        sd = split(_rep(D))
        part = solve_mock(sd)
        assert part.residual < mpf(2) ** -64
        # the rational re-verification and the floating least-squares solve
        # satisfy the transformation law equally well: the reconstruction
        # reproduced the floating solution to within its residual
        assert part.float_residual < mpf(2) ** -64
        assert abs(part.residual - part.float_residual) < mpf(2) ** -64
        tau = mpc(0, 1)
        xi = xi_image(part.holo, part.shadow, sd.D, tau)
        bound = unary_coeff_bound(sd, Fraction(3, 2))
        target = eval_qseries_at(part.shadow, tau, bound, mpf(10) ** -40)
        sq = gmpy2.sqrt(mpf(sd.D))
        assert max(abs(x - t / sq)
                   for x, t in zip(xi, target)) < mpf(10) ** -15


# ---------------------------------------------------------------------------
# AC-5: seed-pinned invariance suite, 100 random trials per property,
# numeric tolerance 2^(-P/2+16), exact equality for rational checks.

P_BITS = 256
NUM_TOL_EXP = -(P_BITS // 2) + 16   # 2^-112
TRIALS = 100


def _rand_z(rng):
    x = Fraction(rng.randint(-200, 200), 100)
    y = Fraction(rng.randint(20, 300), 100)
    return mpc(mpf(x.numerator) / x.denominator,
               mpf(y.numerator) / y.denominator)


def _rand_gamma(rng, nsteps=6):
    # random word in T and S keeps the entries small and the matrix exact
    g = ((1, 0), (0, 1))
    for _ in range(nsteps):
        if rng.random() < 0.5:
            n = rng.randint(-2, 2)
            h = ((1, n), (0, 1))
        else:
            h = ((0, -1), (1, 0))
        g = ((g[0][0] * h[0][0] + g[0][1] * h[1][0],
              g[0][0] * h[0][1] + g[0][1] * h[1][1]),
             (g[1][0] * h[0][0] + g[1][1] * h[1][0],
              g[1][0] * h[0][1] + g[1][1] * h[1][1]))
    return g


def test_ac5_frame_norms_and_relations():
    # [DERIVED] q(X(z)) = 1/2, q(U_i) = -1/2, mutual orthogonality,
    # q = p^2/4 - |Q|^2/(4y^2), and the majorant flips the negative part
    rng = random.Random(501)
    tol = mpf(2) ** NUM_TOL_EXP
    with precision_bits(P_BITS):
        for _ in range(TRIALS):
            z = _rand_z(rng)
            X, U1, U2 = frame_vectors(z)
            assert abs(qval(X) - mpf(1) / 2) < tol
            assert abs(qval(U1) + mpf(1) / 2) < tol
            assert abs(qval(U2) + mpf(1) / 2) < tol
            for a, b in ((X, U1), (X, U2), (U1, U2)):
                assert abs(bilinear(a, b)) < tol
            # Q_{X(z)}(z) = 0 and p_{U_i}(z)... the positive line is the
            # kernel of z -> Q_X(z); U2 has vanishing p at z
            assert abs(poly_q(X, z)) < tol
            assert abs(poly_p(U2, z)) < tol
            v = tuple(rng.randint(-9, 9) for _ in range(3))
            p, Q = poly_p(v, z), poly_q(v, z)
            y = z.imag
            qq = p * p / 4 - (Q.real ** 2 + Q.imag ** 2) / (4 * y * y)
            assert abs(qq - mpf(qval(v))) < tol
            m = majorant(v, z)
            assert abs(m - qq - (Q.real ** 2 + Q.imag ** 2)
                       / (2 * y * y)) < tol


def test_ac5_weight_covariance_of_f():
    # [DERIVED] f_{k,d}(gamma z) = j(gamma, z)^{2k} f_{k,d}(z)
    rng = random.Random(502)
    tol = mpf(2) ** NUM_TOL_EXP
    with precision_bits(P_BITS):
        for _ in range(TRIALS):
            k, d = rng.choice(((2, -4), (3, -3), (3, -4)))
            z = _rand_z(rng)
            g = _rand_gamma(rng)
            lhs = f_eval(k, d, moebius(g, z))
            rhs = jfactor(g, z) ** (2 * k) * f_eval(k, d, z)
            assert abs(lhs - rhs) < tol * max(abs(rhs), mpf(1))


def test_ac5_down_up_adjointness():
    # [DERIVED, exact] CT(down(g) . h) = CT(g . up(h)) on random rational
    # vectors over L'/L and M'/M
    rng = random.Random(503)
    S = split(QForm(1, 1, -1))
    GL, GM = S.L.disc_group(), S.M.disc_group()
    for _ in range(TRIALS):
        g = QSeries({(i, Fraction(e)): Fraction(rng.randint(-9, 9),
                                                rng.randint(1, 9))
                     for i in range(GL.order) for e in range(-2, 3)},
                    3, GL.order)
        h = QSeries({(j, Fraction(e)): Fraction(rng.randint(-9, 9),
                                                rng.randint(1, 9))
                     for j in range(GM.order) for e in range(-2, 3)},
                    3, GM.order)
        assert ct_pair(down_map(g, GL, GM), h) == ct_pair(g, up_map(h, GM, GL))


def test_ac5_rankin_cohen_product_and_monomials():
    # [DERIVED, exact] [f,g]_0 = f g, and on monomials q^a, q^b the n-th
    # bracket (in the convention with the sign on the derivatives of g) is
    # sum_{r+s=n} (-1)^s C(kf+n-1,s) C(kg+n-1,r) a^r b^s q^{a+b}
    rng = random.Random(504)
    for _ in range(TRIALS):
        kf = Fraction(rng.randint(1, 9), rng.choice((1, 2)))
        kg = Fraction(rng.randint(1, 9), rng.choice((1, 2)))
        f = QSeries.scalar({Fraction(e): Fraction(rng.randint(-5, 5))
                            for e in range(0, 4)}, 8)
        g = QSeries.scalar({Fraction(e): Fraction(rng.randint(-5, 5))
                            for e in range(0, 4)}, 8)
        assert rankin_cohen(f, kf, g, kg, 0).coeffs == (f * g).coeffs
        n = rng.randint(1, 3)
        a, b = Fraction(rng.randint(0, 6)), Fraction(rng.randint(0, 6))
        mono_f = QSeries.scalar({a: Fraction(1)}, a + 8)
        mono_g = QSeries.scalar({b: Fraction(1)}, b + 8)
        br = rankin_cohen(mono_f, kf, mono_g, kg, n)
        want = sum(Fraction((-1) ** s)
                   * _frac_binom(kf + n - 1, s)
                   * _frac_binom(kg + n - 1, n - s)
                   * a ** (n - s) * b ** s
                   for s in range(n + 1))
        assert br[(0, a + b)] == want


def _frac_binom(top, j):
    out = Fraction(1)
    for i in range(j):
        out *= (top - i) / Fraction(j - i)
    return out


def test_ac5_cycle_class_invariance():
    # [DERIVED] C_A(f) is a class invariant: one random conjugate per D
    rng = random.Random(505)
    coeffs = {-3: Fraction(2), -4: Fraction(1)}
    tol = mpf(2) ** NUM_TOL_EXP
    with precision_bits(P_BITS):
        for D in D_GRID:
            A = _rep(D)
            base = cycle_merom(A, 3, coeffs).value
            g = _rand_gamma(rng)
            conj = cycle_merom(act(g, A), 3, coeffs).value
            assert abs(base - conj) < tol * max(abs(base), mpf(1))


# ---------------------------------------------------------------------------
# AC-6: Hecke indefinite theta well-formedness.
@pytest.mark.parametrize("D", D_GRID)
def test_ac6_window_independence(D):
    # [DERIVED, exact] the orbit-window used to enumerate automorph orbits
    # does not change the series
    sd = split(_rep(D))
    assert hecke_theta_series(sd, 30).coeffs == \
        hecke_theta_series(sd, 30, window_shift=1).coeffs


# D = 12 is included alongside the contract grid because vartheta_I is
# identically zero for D in {5, 8, 13} (no vectors of positive norm in the
# relevant orbit space), which would make the transformation check vacuous.
@pytest.mark.parametrize("D", (5, 8, 12, 13))
def test_ac6_weight_one_s_transformation(D):
    # [DERIVED] vartheta_I(-1/tau) = tau rho_I(S) vartheta_I(tau) at tau = i
    with precision_bits(256):
        sd = split(_rep(D))
        series = hecke_theta_series(sd, 30)
        group = sd.I.disc_group()
        tau = mpc(0, 1)
        bound = hecke_coeff_bound(sd)
        vals = eval_qseries_at(series, tau, bound, mpf(10) ** -30)
        vals_s = eval_qseries_at(series, -1 / tau, bound, mpf(10) ** -30)
        S = group.weil_S(dual=False)
        res = max(abs(vs - tau * sum(S[d][g] * vals[g]
                                     for g in range(group.order)))
                  for d, vs in enumerate(vals_s))
        assert res < mpf(10) ** -15
        if D == 12:
            assert max(abs(v) for v in vals) > mpf(1) / 2  # non-vacuous


# ---------------------------------------------------------------------------
# AC-7 (stretch, even k): Theorem 1.1 spot check at k = 2, P = [1,0,1].
# A weakly holomorphic weight -1/2 plus form with rational principal part
# supported on exponents {-5, -8} (square coefficients zero) is built by
# exact linear algebra over products theta^a (E4^alpha E6^beta / Delta^m)(4
# tau); the combined trace sum_D a_g(-D) C_D(f_{2,P}) must be rational.
# Recognition failure at den_bound 10^6 is reported, not fatal.

_POOL = ((3, 1, 1, 1), (7, 2, 0, 1), (11, 0, 1, 1), (15, 1, 0, 1),
         (23, 0, 0, 1), (3, 4, 1, 2), (3, 1, 3, 2), (7, 5, 0, 2),
         (7, 2, 2, 2), (11, 3, 1, 2), (11, 0, 3, 2), (15, 4, 0, 2),
         (15, 1, 2, 2), (19, 2, 1, 2), (23, 3, 0, 2), (23, 0, 2, 2),
         (27, 1, 1, 2), (31, 2, 0, 2), (35, 0, 1, 2), (47, 0, 0, 2))


def _pool_series(prec):
    e4, e6 = eisenstein(4, prec), eisenstein(6, prec)
    dlt = delta_series(prec)
    th = theta_scalar(4 * prec)
    out = []
    for a, al, be, m in _POOL:
        s = th ** a
        if al:
            s = s * _scale4(e4 ** al)
        if be:
            s = s * _scale4(e6 ** be)
        s = s * _scale4(dlt ** m).inverse()
        out.append(s)
    return out


def _solve_exact(rows, rhs, ncols):
    M = [list(r) + [b] for r, b in zip(rows, rhs)]
    piv, r = [], 0
    for c in range(ncols):
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        M[r] = [x / M[r][c] for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                fac = M[i][c]
                M[i] = [x - fac * y for x, y in zip(M[i], M[r])]
        piv.append(c)
        r += 1
    if any(M[i][ncols] != 0 for i in range(r, len(M))):
        return None
    sol = [Fraction(0)] * ncols
    for i, c in enumerate(piv):
        sol[c] = M[i][ncols]
    return sol


def _input_form_5_8():
    """The unique plus form in the pool span with principal part supported
    on {-5, -8}, normalized to integral a(-5), a(-8)."""
    cands = _pool_series(56)
    bound = 40
    rows, rhs = [], []
    # plus-space and support conditions: kill every exponent in 1, 2 mod 4
    # up to the Sturm-type bound, and the square exponents -1, -4
    targets = [n for n in range(-8, bound + 1) if n % 4 in (1, 2)]
    for n in targets + [-4, -1]:
        rows.append([c[(0, Fraction(n))] for c in cands])
        rhs.append(Fraction(0))
    rows.append([c[(0, Fraction(-5))] for c in cands])
    rhs.append(Fraction(1))
    sol = _solve_exact(rows, rhs, len(cands))
    assert sol is not None, "input form solve is inconsistent"
    g = None
    for co, s in zip(sol, cands):
        if co:
            g = s * co if g is None else g + s * co
    # clear denominators so a_g(-D) are integers
    mult = math.lcm(*(c.denominator for c in g.coeffs.values()))
    g = g * Fraction(mult)
    assert all((0, Fraction(n)) not in g.coeffs or g[(0, Fraction(n))] == 0
               for n in range(-8, 0) if n not in (-5, -8))
    return g


def test_ac7_even_weight_trace_spot_check():
    # [DERIVED] Theorem 1.1 at k = 2: traces over class representatives,
    # contour-average finite part through the order-2 pole at z = i
    with precision_bits(256):
        g = _input_form_5_8()
        a5 = g[(0, Fraction(-5))]
        a8 = g[(0, Fraction(-8))]
        assert a5 != 0 and a5.denominator == 1 and a8.denominator == 1
        P = QForm(1, 0, 1)
        combined = mpc(0, 0)
        err = mpf(0)
        for D, a in ((5, a5), (8, a8)):
            res = trace_cycle(D, 2, P)
            combined += mpf(a.numerator) * res.value
            err += mpf(abs(a.numerator)) * mpf(res.error)
        assert abs(combined.imag) < mpf(10) ** -30
        tol = max(10 * err, mpf(2) ** -200)
        cand, ambiguous = rational_reconstruct_ex(combined.real, 10 ** 6, tol)
        if cand is None or ambiguous:
            warnings.warn("combined trace %s not recognized at den_bound "
                          "10^6 (reported, not fatal)" % combined.real)
            return
        assert cand.denominator <= 10 ** 6
        assert abs(combined.real - mpf(cand.numerator) / cand.denominator) \
            < tol
