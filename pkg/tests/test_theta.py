from fractions import Fraction

import gmpy2
import pytest

from thetacycles.numerics import mpc, mpf, precision_bits
from thetacycles.qforms import QForm
from thetacycles.lattice import form_lattice, split
from thetacycles.qseries import QSeries
from thetacycles.theta import (
    ThetaTruncationError, eval_qseries_at, hecke_coeff_bound,
    hecke_theta_series, siegel_theta, unary_coeff_bound, unary_theta_series,
    up_values,
)


def sd5():
    return split(QForm(1, 1, -1))


def sd12():
    return split(QForm(1, 2, -2))


def s_residual(series, group, weight, dual, tau, bound):
    """max deviation of F(-1/tau) - tau^weight rho(S) F(tau), principal
    branch of tau^weight."""
    vals = eval_qseries_at(series, tau, bound, mpf(10) ** -30)
    taum = mpc(tau.real, tau.imag)
    stau = -1 / taum
    vals_s = eval_qseries_at(series, stau, bound, mpf(10) ** -30)
    S = group.weil_S(dual=dual)
    pref = taum ** mpf(weight)
    res = mpf(0)
    for d in range(group.order):
        rhs = pref * sum(S[d][g] * vals[g] for g in range(group.order))
        res = max(res, abs(vals_s[d] - rhs))
    return res


def test_unary_theta_first_coefficients():
    # [DERIVED] D=5: n0 = (2,2,-2), q0 = -5, ord = 10; W_j = j*n0/10 has
    # -q(W_j) = j^2/20 and (W_j, A) = j*(n0,A)/10 = -j/2 since
    # (n0, A) = 2*(A,A) = 4 q(A) = -5.
    sd = sd5()
    G = sd.N.disc_group()
    assert G.order == 10
    th32 = unary_theta_series(sd, Fraction(3, 2), 4)
    th12 = unary_theta_series(sd, Fraction(1, 2), 4)
    ip = G.index_of(tuple(Fraction(c, 10) for c in sd.n0))
    im = G.index_of(tuple(Fraction(-c, 10) for c in sd.n0))
    assert th32[(ip, Fraction(1, 20))] == Fraction(-1, 2)
    assert th32[(im, Fraction(1, 20))] == Fraction(1, 2)
    assert th12[(ip, Fraction(1, 20))] == 1
    assert th12[(G.index_of((0, 0, 0)), Fraction(0))] == 1
    # the fixed points gamma = -gamma carry no weight-3/2 terms
    for (i, e), c in th32.coeffs.items():
        assert th32[(G.neg(i), e)] == -c


def test_unary_theta_transformation():
    # [DERIVED] Theta_{w,N} is modular of weight w for the dual Weil
    # representation of N: check the S-functional equation numerically.
    with precision_bits(128):
        sd = sd5()
        G = sd.N.disc_group()
        tau = mpc(mpf(3) / 10, mpf(4) / 5)
        for w in (Fraction(1, 2), Fraction(3, 2)):
            series = unary_theta_series(sd, w, 30)
            res = s_residual(series, G, w, True, tau, unary_coeff_bound(sd, w))
            assert res < mpf(10) ** -18


def test_hecke_theta_vanishes_norm_minus_one():
    # [DERIVED] when the fundamental unit of Q(sqrt(D)) has norm -1 (as for
    # D = 5, 8, 13), multiplication by -eps0^(-1) pairs up the window
    # representatives with opposite signs: vartheta_I is identically zero.
    for A in (QForm(1, 1, -1), QForm(1, 2, -1), QForm(1, 3, -1)):
        sd = split(A)
        assert hecke_theta_series(sd, 30).is_zero()


def test_hecke_theta_d12_is_eta_squared():
    # [DERIVED] for D = 12 the nonzero components are +-eta(tau)^2 =
    # +-q^(1/12) prod (1-q^n)^2 (Hecke's classical example).
    sd = sd12()
    G = sd.I.disc_group()
    prec = 10
    eta2 = QSeries.scalar({Fraction(0): Fraction(1)}, prec)
    n = 1
    while n < prec:
        fac = QSeries.scalar({Fraction(0): Fraction(1),
                              Fraction(n): Fraction(-1)}, prec)
        eta2 = eta2 * fac * fac
        n += 1
    vth = hecke_theta_series(sd, prec + 1)
    comps = sorted({i for (i, _) in vth.coeffs})
    assert len(comps) == 4
    assert sorted(G.neg(i) for i in comps) == comps
    for i0 in comps:
        sign = vth[(i0, Fraction(1, 12))]
        assert sign in (1, -1)
        assert vth[(G.neg(i0), Fraction(1, 12))] == -sign
        for m in range(prec):
            c = eta2[Fraction(m)]
            e = Fraction(m) + Fraction(1, 12)
            assert vth.coeffs.get((i0, e), Fraction(0)) == sign * c


def test_hecke_theta_window_invariance():
    # [DERIVED] the orbit window may be shifted by the automorph square;
    # representatives change but the series does not.
    sd = sd12()
    base = hecke_theta_series(sd, 10)
    for s in (-1, 1):
        assert hecke_theta_series(sd, 10, window_shift=s).coeffs == base.coeffs


def test_hecke_theta_transformation_weight1():
    # [DERIVED] vartheta_I is modular of weight 1 for the (plain) Weil
    # representation of I.
    with precision_bits(128):
        sd = sd12()
        series = hecke_theta_series(sd, 30)
        tau = mpc(mpf(3) / 10, mpf(4) / 5)
        res = s_residual(series, sd.I.disc_group(), 1, False, tau,
                         hecke_coeff_bound(sd))
        assert res < mpf(10) ** -18


def test_siegel_theta_trace_from_sublattice():
    # [DERIVED] Theta_M^L = Theta_L: summing the Siegel theta of the finite
    # index sublattice M over L/M-cosets reproduces the theta of L.
    with precision_bits(96):
        sd = sd5()
        tau = mpc(mpf(1) / 7, mpf(2) / 3)
        z = mpc(mpf(1) / 3, mpf(6) / 5)
        tol = mpf(10) ** -20
        vals_m = siegel_theta(sd.M, tau, z, tol)
        vals_l = siegel_theta(sd.L, tau, z, tol)
        traced = up_values(vals_m, sd)
        for a, b in zip(traced, vals_l):
            assert abs(a - b) < mpf(10) ** -18


def test_eval_tail_certificate_guard():
    # [TRIVIAL] a truncation the bound cannot certify must raise, not return
    with precision_bits(96):
        sd = sd5()
        series = unary_theta_series(sd, Fraction(1, 2), 2)
        tau = mpc(0, mpf(1) / 100)
        with pytest.raises(ThetaTruncationError):
            eval_qseries_at(series, tau, (2, 0), mpf(10) ** -30)
