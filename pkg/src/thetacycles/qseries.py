"""Exact q-series with rational exponents and coefficients.

A QSeries has one or more components (vector-valued forms over a finite
quadratic module are stored componentwise); coefficients are Fractions and
exponents are Fractions, with all exponents below `prec` known exactly.
Everything here is exact arithmetic -- no floating point.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .lattice import DiscGroup

__all__ = [
    "QSeries", "eisenstein", "delta_series", "jfunc", "theta_scalar",
    "deriv", "rankin_cohen", "tensor", "ct_pair", "down_map", "up_map",
    "plus_to_vector", "bernoulli",
]

INF = Fraction(10 ** 9)


class QSeries:
    """coeffs: dict mapping (component, Fraction exponent) -> Fraction."""

    def __init__(self, coeffs, prec, ncomp=1):
        self.ncomp = ncomp
        self.prec = Fraction(prec)
        self.coeffs = {}
        for (i, e), c in coeffs.items():
            e, c = Fraction(e), Fraction(c)
            if c != 0 and e < self.prec:
                if not 0 <= i < ncomp:
                    raise ValueError(f"component {i} out of range")
                self.coeffs[(i, e)] = c

    @classmethod
    def scalar(cls, coeffs, prec):
        """Build a one-component series from {exponent: coefficient}."""
        return cls({(0, e): c for e, c in coeffs.items()}, prec)

    def __getitem__(self, key):
        if self.ncomp == 1 and not isinstance(key, tuple):
            key = (0, key)
        i, e = key
        e = Fraction(e)
        if e >= self.prec:
            raise KeyError(f"exponent {e} beyond precision {self.prec}")
        return self.coeffs.get((i, e), Fraction(0))

    def valuation(self):
        if not self.coeffs:
            return self.prec
        return min(e for (_, e) in self.coeffs)

    def component(self, i) -> "QSeries":
        return QSeries({(0, e): c for (j, e), c in self.coeffs.items() if j == i},
                       self.prec)

    def __add__(self, other):
        other = self._coerce(other)
        if other.ncomp != self.ncomp:
            raise ValueError("component mismatch")
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) + c
        return QSeries(out, min(self.prec, other.prec), self.ncomp)

    def __neg__(self):
        return QSeries({k: -c for k, c in self.coeffs.items()}, self.prec, self.ncomp)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def _coerce(self, other):
        if isinstance(other, QSeries):
            return other
        if isinstance(other, (int, Fraction)):
            return QSeries({(i, Fraction(0)): Fraction(other)
                            for i in range(self.ncomp)}, INF, self.ncomp)
        raise TypeError(f"cannot coerce {other!r}")

    def __rmul__(self, other):
        return self * other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return QSeries({k: c * other for k, c in self.coeffs.items()},
                           self.prec, self.ncomp)
        if not isinstance(other, QSeries):
            raise TypeError(f"cannot multiply by {other!r}")
        # scalar x vector acts componentwise; vector x vector needs tensor()
        if self.ncomp != 1 and other.ncomp != 1:
            raise ValueError("use tensor() for two vector-valued series")
        f, g = (self, other) if other.ncomp == 1 else (other, self)
        # f is the vector (or both scalar), g is scalar
        prec = min(f.prec + g.valuation(), g.prec + f.valuation())
        out = {}
        for (i, e1), c1 in f.coeffs.items():
            for (_, e2), c2 in g.coeffs.items():
                e = e1 + e2
                if e < prec:
                    k = (i, e)
                    out[k] = out.get(k, Fraction(0)) + c1 * c2
        return QSeries(out, prec, f.ncomp)

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = QSeries.scalar({Fraction(0): Fraction(1)}, INF)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def inverse(self) -> "QSeries":
        """1/f for a one-component series with invertible leading term."""
        if self.ncomp != 1:
            raise ValueError("inverse requires a scalar series")
        v = self.valuation()
        lead = self.coeffs.get((0, v))
        if lead is None:
            raise ValueError("cannot invert zero series")
        # write f = lead * q^v * (1 + h), h with positive valuation
        h = {}
        for (_, e), c in self.coeffs.items():
            if e != v:
                h[e - v] = c / lead
        hprec = self.prec - v
        # geometric series: (1+h)^{-1} = sum (-h)^m, m < hprec / val(h)
        inv = {Fraction(0): Fraction(1)}
        if h:
            hv = min(h)
            power = {Fraction(0): Fraction(1)}
            m = 1
            while m * hv < hprec:
                nxt = {}
                for e1, c1 in power.items():
                    for e2, c2 in h.items():
                        e = e1 + e2
                        if e < hprec:
                            nxt[e] = nxt.get(e, Fraction(0)) - c1 * c2
                power = nxt
                for e, c in power.items():
                    inv[e] = inv.get(e, Fraction(0)) + c
                m += 1
        return QSeries.scalar({e - v: c / lead for e, c in inv.items()},
                              hprec - v)

    def truncate(self, prec) -> "QSeries":
        return QSeries(self.coeffs, min(self.prec, Fraction(prec)), self.ncomp)

    def support(self):
        return sorted(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def serialize(self):
        return {
            "ncomp": self.ncomp,
            "prec": str(self.prec),
            "coeffs": [[i, str(e), str(c)] for (i, e), c in sorted(self.coeffs.items())],
        }

    @classmethod
    def deserialize(cls, d):
        coeffs = {(i, Fraction(e)): Fraction(c) for i, e, c in d["coeffs"]}
        return cls(coeffs, Fraction(d["prec"]), d["ncomp"])

    def __repr__(self):
        items = sorted(self.coeffs.items())[:6]
        body = " + ".join(f"{c}*q^{e}[{i}]" for (i, e), c in items)
        more = "..." if len(self.coeffs) > 6 else ""
        return f"QSeries({body}{more}; prec={self.prec}, ncomp={self.ncomp})"


def scale_exponents(f: QSeries, c) -> QSeries:
    """Substitute q -> q^c (e.g. c = 4 turns F(tau) into F(4 tau))."""
    c = Fraction(c)
    if c <= 0:
        raise ValueError("scale factor must be positive")
    return QSeries({(i, e * c): v for (i, e), v in f.coeffs.items()},
                   f.prec * c, f.ncomp)


def deriv(f: QSeries, s: int = 1) -> QSeries:
    """(q d/dq)^s: multiplies the q^e coefficient by e^s."""
    return QSeries({k: c * (k[1] ** s) for k, c in f.coeffs.items()},
                   f.prec, f.ncomp)


def bernoulli(n: int) -> Fraction:
    """Bernoulli number B_n (B_1 = -1/2)."""
    B = [Fraction(0)] * (n + 1)
    for m in range(n + 1):
        B[m] = Fraction(int(m == 0))
        if m > 0:
            s = Fraction(0)
            for j in range(m):
                s += Fraction(math.comb(m + 1, j)) * B[j]
            B[m] = -s / (m + 1)
    return B[n]


def eisenstein(k: int, prec: int) -> QSeries:
    """E_k = 1 - (2k/B_k) sum sigma_{k-1}(n) q^n (k >= 2 even)."""
    if k < 2 or k % 2 != 0:
        raise ValueError("k must be even and >= 2")
    sig = {}
    for d in range(1, prec):
        dk = d ** (k - 1)
        for n in range(d, prec, d):
            sig[n] = sig.get(n, 0) + dk
    factor = Fraction(-2 * k) / bernoulli(k)
    coeffs = {Fraction(0): Fraction(1)}
    for n, s in sig.items():
        coeffs[Fraction(n)] = factor * s
    return QSeries.scalar(coeffs, prec)


def delta_series(prec: int) -> QSeries:
    """The discriminant cusp form Delta = (E4^3 - E6^2)/1728."""
    E4 = eisenstein(4, prec)
    E6 = eisenstein(6, prec)
    return (E4 ** 3 - E6 ** 2) * Fraction(1, 1728)


def jfunc(prec: int) -> QSeries:
    """The modular j-invariant E4^3/Delta."""
    # 1/Delta loses 2*val(Delta) = 2 exponents of precision
    p = prec + 2
    return (eisenstein(4, p) ** 3 * delta_series(p).inverse()).truncate(prec)


def theta_scalar(prec: int) -> QSeries:
    """theta = sum_{n in Z} q^{n^2} = 1 + 2q + 2q^4 + ..."""
    coeffs = {Fraction(0): Fraction(1)}
    n = 1
    while n * n < prec:
        coeffs[Fraction(n * n)] = Fraction(2)
        n += 1
    return QSeries.scalar(coeffs, prec)


def tensor(f: QSeries, g: QSeries) -> QSeries:
    """Componentwise tensor product: component i*g.ncomp + j is f_i * g_j."""
    prec = min(f.prec + g.valuation(), g.prec + f.valuation())
    out = {}
    for (i, e1), c1 in f.coeffs.items():
        for (j, e2), c2 in g.coeffs.items():
            e = e1 + e2
            if e < prec:
                k = (i * g.ncomp + j, e)
                out[k] = out.get(k, Fraction(0)) + c1 * c2
    return QSeries(out, prec, f.ncomp * g.ncomp)


def rankin_cohen(f: QSeries, kf, g: QSeries, kg, n: int) -> QSeries:
    """n-th Rankin-Cohen bracket, tensoring components:

    [f, g]_n = sum_s (-1)^s C(kf+n-1, s) C(kg+n-1, n-s) D^{n-s}f x D^s g

    with D = q d/dq and generalized binomials for half-integral weights.
    """
    kf, kg = Fraction(kf), Fraction(kg)

    def binom(a: Fraction, m: int) -> Fraction:
        out = Fraction(1)
        for i in range(m):
            out *= (a - i)
        return out / math.factorial(m)

    total = None
    for s in range(n + 1):
        c = Fraction((-1) ** s) * binom(kf + n - 1, s) * binom(kg + n - 1, n - s)
        term = tensor(deriv(f, n - s), deriv(g, s)) * c
        total = term if total is None else total + term
    return total


def ct_pair(f: QSeries, g: QSeries) -> Fraction:
    """Constant-term pairing sum_i (q^0 coefficient of f_i * g_i).

    Requires matching component counts and enough precision on each factor
    to see all contributions from the other's principal part.
    """
    if f.ncomp != g.ncomp:
        raise ValueError("component mismatch")
    if f.valuation() + g.prec <= 0 or g.valuation() + f.prec <= 0:
        raise ValueError("insufficient precision for the constant term")
    total = Fraction(0)
    for (i, e), c in f.coeffs.items():
        total += c * g[(i, -e)] if -e < g.prec else 0
    return total


def down_map(g: QSeries, big: DiscGroup, small: DiscGroup) -> QSeries:
    """Restriction C[L'/L] -> C[M'/M] for M a finite-index sublattice of L:
    component delta gets g_{delta mod L} if delta lies in L', else 0."""
    if g.ncomp != big.order:
        raise ValueError("g must live on the bigger quotient")
    out = {}
    for j in range(small.order):
        rep = small.reps[j]
        if not big.lat.dual_contains(rep):
            continue
        i = big.index_of(rep)
        for (ii, e), c in g.coeffs.items():
            if ii == i:
                out[(j, e)] = c
    return QSeries(out, g.prec, small.order)


def up_map(h: QSeries, small: DiscGroup, big: DiscGroup) -> QSeries:
    """Trace C[M'/M] -> C[L'/L]: (h^L)_gamma = sum_{beta in L/M} h_{beta+gamma}."""
    if h.ncomp != small.order:
        raise ValueError("h must live on the smaller quotient")
    # cosets of L/M are the classes of M'/M represented inside L
    lcosets = [j for j in range(small.order) if big.lat.contains(small.reps[j])]
    out = {}
    for i in range(big.order):
        rep = big.reps[i]
        for j in lcosets:
            lift = tuple(a + b for a, b in zip(rep, small.reps[j]))
            jj = small.index_of(lift)
            for (ii, e), c in h.coeffs.items():
                if ii == jj:
                    k = (i, e)
                    out[k] = out.get(k, Fraction(0)) + c
    return QSeries(out, h.prec, big.order)


def plus_to_vector(g: QSeries, group: DiscGroup, sign: int = -1) -> QSeries:
    """Lift a plus-space scalar form sum c(n) q^n to the quotient L'/L of the
    reference lattice: component gamma collects the n with n/4 = sign*q(gamma)
    mod 1, with exponents n/4.
    """
    if g.ncomp != 1:
        raise ValueError("plus_to_vector expects a scalar series")
    out = {}
    targets = {i: (sign * group.q_frac(i)) % 1 for i in range(group.order)}
    for (_, e), c in g.coeffs.items():
        if e.denominator != 1:
            raise ValueError("plus-space input must have integer exponents")
        r = Fraction(e, 4) % 1
        for i, t in targets.items():
            if r == t:
                out[(i, Fraction(e, 4))] = c
    return QSeries(out, Fraction(g.prec, 4), group.order)
