import random
from fractions import Fraction

import pytest

from thetacycles.lattice import form_lattice, split
from thetacycles.qforms import QForm
from thetacycles.qseries import (
    QSeries, bernoulli, ct_pair, delta_series, deriv, down_map, eisenstein,
    jfunc, plus_to_vector, rankin_cohen, tensor, theta_scalar, up_map,
)


def rand_scalar(rng, prec=12, vmin=-2, density=0.7):
    coeffs = {}
    for e in range(vmin, prec):
        if rng.random() < density:
            coeffs[Fraction(e)] = Fraction(rng.randint(-9, 9), rng.randint(1, 4))
    return QSeries.scalar(coeffs, prec)


def naive_product(f, g, prec):
    """Oracle: direct double-loop convolution of two scalar series."""
    out = {}
    for (_, e1), c1 in f.coeffs.items():
        for (_, e2), c2 in g.coeffs.items():
            if e1 + e2 < prec:
                out[e1 + e2] = out.get(e1 + e2, Fraction(0)) + c1 * c2
    return out


def test_bernoulli():
    # [DERIVED] classical table
    vals = {0: Fraction(1), 1: Fraction(-1, 2), 2: Fraction(1, 6),
            4: Fraction(-1, 30), 6: Fraction(1, 42), 8: Fraction(-1, 30),
            10: Fraction(5, 66), 12: Fraction(-691, 2730)}
    for n, v in vals.items():
        assert bernoulli(n) == v
    assert bernoulli(7) == 0


def test_eisenstein_coefficients():
    # [DERIVED] E4 = 1 + 240 sum sigma_3(n) q^n, E6 = 1 - 504 sum sigma_5(n) q^n
    E4 = eisenstein(4, 6)
    assert [E4[n] for n in range(5)] == [1, 240, 2160, 6720, 17520]
    E6 = eisenstein(6, 6)
    assert [E6[n] for n in range(4)] == [1, -504, -16632, -122976]


def test_delta_is_ramanujan_tau():
    # [DERIVED] tau(1..6) = 1, -24, 252, -1472, 4830, -6048
    D = delta_series(8)
    assert [D[n] for n in range(1, 7)] == [1, -24, 252, -1472, 4830, -6048]
    assert D[0] == 0


def test_jfunc():
    # [DERIVED] j = q^-1 + 744 + 196884 q + 21493760 q^2
    j = jfunc(3)
    assert j[Fraction(-1)] == 1
    assert j[0] == 744
    assert j[1] == 196884
    assert j[2] == 21493760


def test_theta_scalar():
    t = theta_scalar(17)
    assert t[0] == 1 and t[1] == 2 and t[4] == 2 and t[16] == 2
    assert t[2] == 0 and t[3] == 0


def test_mul_matches_naive_convolution():
    rng = random.Random(11)
    for _ in range(10):
        f, g = rand_scalar(rng), rand_scalar(rng)
        h = f * g
        oracle = naive_product(f, g, h.prec)
        for e, c in oracle.items():
            assert h[(0, e)] == c
        for (_, e), c in h.coeffs.items():
            assert oracle.get(e, Fraction(0)) == c


def test_inverse_and_pow():
    D = delta_series(10)
    Dinv = D.inverse()
    one = D * Dinv
    assert one[0] == 1
    assert all(c == 0 for (_, e), c in one.coeffs.items() if e != 0)
    assert Dinv.valuation() == -1
    E4 = eisenstein(4, 8)
    assert (E4 ** 3)[1] == 720  # [DERIVED] E4^3 = E12-ish: 1 + 720q + ...
    assert (E4 ** 0)[0] == 1


def test_deriv_product_rule():
    rng = random.Random(5)
    f, g = rand_scalar(rng), rand_scalar(rng)
    lhs = deriv(f * g)
    rhs = deriv(f) * g + f * deriv(g)
    prec = min(lhs.prec, rhs.prec)
    diff = (lhs - rhs).truncate(prec)
    assert diff.is_zero()


def test_rankin_cohen_first_bracket_formula():
    # [f, g]_1 = kg * Df * g - kf * f * Dg, including half-integral weights
    rng = random.Random(9)
    for kf, kg in ((4, 6), (Fraction(1, 2), Fraction(3, 2)), (Fraction(5, 2), 3)):
        f, g = rand_scalar(rng, vmin=0), rand_scalar(rng, vmin=0)
        br = rankin_cohen(f, kf, g, kg, 1)
        direct = deriv(f) * g * Fraction(kg) - f * deriv(g) * Fraction(kf)
        diff = (br - direct).truncate(min(br.prec, direct.prec))
        assert diff.is_zero()


def test_rankin_cohen_e4_e6_is_delta_multiple():
    # [E4, E6]_1 is a weight-12 cusp form, hence a multiple of Delta
    br = rankin_cohen(eisenstein(4, 8), 4, eisenstein(6, 8), 6, 1)
    D = delta_series(8)
    assert br[(0, Fraction(0))] == 0
    ratio = br[(0, Fraction(1))]
    assert ratio == 3456
    for n in range(1, 7):
        assert br[(0, Fraction(n))] == ratio * D[n]


def test_rankin_cohen_zeroth_is_product():
    f = eisenstein(4, 6)
    g = eisenstein(6, 6)
    br = rankin_cohen(f, 4, g, 6, 0)
    diff = (br - f * g).truncate(min(br.prec, (f * g).prec))
    assert diff.is_zero()


def test_tensor_components():
    f = QSeries({(0, Fraction(1, 5)): Fraction(2), (1, Fraction(0)): Fraction(3)},
                5, ncomp=2)
    g = QSeries({(0, Fraction(1, 2)): Fraction(7)}, 5, ncomp=1)
    t = tensor(f, g)
    assert t.ncomp == 2
    assert t[(0, Fraction(7, 10))] == 14
    assert t[(1, Fraction(1, 2))] == 21


def test_ct_pair():
    f = QSeries.scalar({Fraction(-2): Fraction(3), Fraction(0): Fraction(5)}, 10)
    g = QSeries.scalar({Fraction(2): Fraction(7), Fraction(0): Fraction(1)}, 10)
    assert ct_pair(f, g) == 3 * 7 + 5 * 1
    with pytest.raises(ValueError):
        ct_pair(f, g.truncate(1))


def test_down_up_adjoint():
    # CT(down(g) . h) = CT(g . up(h)) for the coefficient pairing
    S = split(QForm(1, 1, -1))
    GL = S.L.disc_group()
    GM = S.M.disc_group()
    rng = random.Random(21)
    g = QSeries({(i, Fraction(e)): Fraction(rng.randint(-5, 5))
                 for i in range(GL.order) for e in range(-2, 3)}, 3, GL.order)
    h = QSeries({(j, Fraction(e)): Fraction(rng.randint(-5, 5))
                 for j in range(GM.order) for e in range(-2, 3)}, 3, GM.order)
    lhs = ct_pair(down_map(g, GL, GM), h)
    rhs = ct_pair(g, up_map(h, GM, GL))
    assert lhs == rhs


def test_up_map_counts_l_cosets():
    # the trace over L/M hits [L:M] summands per component
    S = split(QForm(1, 1, -1))
    GM = S.M.disc_group()
    GL = S.L.disc_group()
    lcosets = [j for j in range(GM.order) if GL.lat.contains(GM.reps[j])]
    assert len(lcosets) == S.index


def test_plus_to_vector_residues():
    G = form_lattice().disc_group()
    t = theta_scalar(10)
    v = plus_to_vector(t, G)
    # component with q=0 collects n = 0 mod 4; q=3/4 collects n = 1 mod 4
    i0 = next(i for i in range(2) if G.q_frac(i) == 0)
    i1 = 1 - i0
    assert v[(i0, Fraction(0))] == 1
    assert v[(i0, Fraction(1))] == 2       # n = 4
    assert v[(i1, Fraction(1, 4))] == 2    # n = 1
    assert v[(i1, Fraction(9, 4))] == 2    # n = 9
    assert v[(i0, Fraction(1, 2))] == 0


def test_serialize_roundtrip():
    f = QSeries({(0, Fraction(-1, 4)): Fraction(2, 3), (1, Fraction(2)): Fraction(5)},
                7, ncomp=2)
    g = QSeries.deserialize(f.serialize())
    assert g.coeffs == f.coeffs and g.prec == f.prec and g.ncomp == f.ncomp
