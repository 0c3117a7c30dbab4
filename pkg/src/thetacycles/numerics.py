"""Arithmetic foundation: precision control, rationals, Q(sqrt(D)) elements.

Approximate arithmetic uses gmpy2 (MPFR/MPC) at a configurable binary
precision.  Exact arithmetic uses fractions.Fraction throughout; elements of
a real quadratic field are QuadElem pairs (x, y) meaning x + y*sqrt(D), with
exact sign tests so lattice enumeration never depends on floating point.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction

import gmpy2

DEFAULT_PRECISION = 256

gmpy2.get_context().precision = DEFAULT_PRECISION


def set_precision(bits: int) -> None:
    """Set the working binary precision of the gmpy2 context."""
    if bits < 16:
        raise ValueError("precision must be at least 16 bits")
    gmpy2.get_context().precision = bits


def get_precision() -> int:
    return gmpy2.get_context().precision


@contextmanager
def precision_bits(bits: int):
    """Temporarily run at a different binary precision."""
    old = get_precision()
    set_precision(bits)
    try:
        yield
    finally:
        set_precision(old)


# ---------------------------------------------------------------------------
# mpfr / mpc helpers


def mpf(x) -> gmpy2.mpfr:
    if isinstance(x, Fraction):
        return gmpy2.mpfr(x.numerator) / gmpy2.mpfr(x.denominator)
    return gmpy2.mpfr(x)


def mpc(re, im=0) -> gmpy2.mpc:
    return gmpy2.mpc(mpf(re), mpf(im))


def pi_() -> gmpy2.mpfr:
    return gmpy2.const_pi()


def e2pi(x) -> gmpy2.mpc:
    """e(x) = exp(2 pi i x) for real or complex x (mpfr/mpc/Fraction/float)."""
    if isinstance(x, Fraction):
        x = mpf(x)
    return gmpy2.exp(2j * gmpy2.const_pi() * gmpy2.mpc(x))


def to_fraction(x) -> Fraction:
    """Exact value of an mpfr (every finite mpfr is a dyadic rational)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    m, e = x.as_mantissa_exp()
    return Fraction(int(m)) * (Fraction(2) ** int(e))


def eps_tol(shift: int = 0) -> gmpy2.mpfr:
    """2^(-P + shift) at the current working precision."""
    return mpf(2) ** (-get_precision() + shift)


# ---------------------------------------------------------------------------
# special functions


def upper_incomplete_gamma_half(x) -> gmpy2.mpfr:
    """Gamma(1/2, x) = sqrt(pi) * erfc(sqrt(x)) for x >= 0."""
    x = mpf(x)
    if x < 0:
        raise ValueError("x must be >= 0")
    return gmpy2.gamma_inc(mpf(Fraction(1, 2)), x)


# ---------------------------------------------------------------------------
# rational reconstruction


def _simplest_in_interval(lo: Fraction, hi: Fraction) -> Fraction:
    """The rational with smallest denominator in the closed interval [lo, hi].

    Ties (several candidates with the same denominator) resolve to the one
    closest to zero, then the smaller one.
    """
    if lo > hi:
        raise ValueError("empty interval")
    if lo <= 0 <= hi:
        return Fraction(0)
    if hi < 0:
        return -_simplest_in_interval(-hi, -lo)
    # now 0 < lo <= hi
    flo = lo.numerator // lo.denominator
    if flo + 1 <= hi:
        # at least one integer in the interval; smallest is flo + 1 unless
        # lo is itself an integer
        return Fraction(flo if lo == flo else flo + 1)
    if lo == flo:
        return Fraction(flo)
    # recurse on the fractional part via the continued-fraction step
    inner = _simplest_in_interval(1 / (hi - flo), 1 / (lo - flo))
    return flo + 1 / inner


def rational_reconstruct_ex(x, den_bound: int, tol):
    """Find p/q with q <= den_bound and |x - p/q| <= tol.

    Returns (candidate, ambiguous).  candidate is None when no such rational
    exists.  ambiguous is True when a second rational with denominator
    <= den_bound also lies within tol; the returned candidate is then the one
    with the smallest denominator.
    """
    if den_bound < 1:
        raise ValueError("den_bound must be >= 1")
    xf = to_fraction(x)
    tf = to_fraction(tol)
    if tf <= 0:
        raise ValueError("tol must be > 0")
    lo, hi = xf - tf, xf + tf
    best = _simplest_in_interval(lo, hi)
    if best.denominator > den_bound:
        return None, False
    # ambiguity check: smallest-denominator rationals strictly left/right
    ambiguous = False
    for sub in ((lo, best - Fraction(1, best.denominator * den_bound + 1)),
                (best + Fraction(1, best.denominator * den_bound + 1), hi)):
        a, b = sub
        # any rational r != best with den <= den_bound within tol satisfies
        # |r - best| >= 1/(den(best)*den(r)), hence lies in one of these
        if a > b:
            continue
        other = _simplest_in_interval(a, b)
        if other.denominator <= den_bound:
            ambiguous = True
    return best, ambiguous


def rational_reconstruct(x, den_bound: int, tol):
    """Smallest-denominator rational within tol of x, or None."""
    cand, _ = rational_reconstruct_ex(x, den_bound, tol)
    return cand


# ---------------------------------------------------------------------------
# real quadratic field elements


def _isqrt_exact(n: int):
    r = math.isqrt(n)
    return r if r * r == n else None


@dataclass(frozen=True)
class QuadElem:
    """x + y*sqrt(D) with x, y rational and D a positive nonsquare integer."""

    x: Fraction
    y: Fraction
    D: int

    def __post_init__(self):
        if self.D <= 0 or _isqrt_exact(self.D) is not None:
            raise ValueError("D must be a positive nonsquare integer")
        object.__setattr__(self, "x", Fraction(self.x))
        object.__setattr__(self, "y", Fraction(self.y))

    def _check(self, other: "QuadElem"):
        if self.D != other.D:
            raise ValueError("mixed fields Q(sqrt(%d)) and Q(sqrt(%d))" % (self.D, other.D))

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            return QuadElem(self.x + other, self.y, self.D)
        self._check(other)
        return QuadElem(self.x + other.x, self.y + other.y, self.D)

    __radd__ = __add__

    def __neg__(self):
        return QuadElem(-self.x, -self.y, self.D)

    def __sub__(self, other):
        return self + (-other if isinstance(other, QuadElem) else QuadElem(Fraction(-other), 0, self.D))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return QuadElem(self.x * other, self.y * other, self.D)
        self._check(other)
        return QuadElem(self.x * other.x + self.D * self.y * other.y,
                        self.x * other.y + self.y * other.x, self.D)

    __rmul__ = __mul__

    def inverse(self):
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("zero element of Q(sqrt(D))")
        return QuadElem(self.x / n, -self.y / n, self.D)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return QuadElem(self.x / other, self.y / other, self.D)
        return self * other.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = QuadElem(Fraction(1), Fraction(0), self.D)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def conj(self) -> "QuadElem":
        return QuadElem(self.x, -self.y, self.D)

    def norm(self) -> Fraction:
        return self.x * self.x - self.D * self.y * self.y

    def trace(self) -> Fraction:
        return 2 * self.x

    def sign(self) -> int:
        """Exact sign of x + y*sqrt(D) under the embedding sqrt(D) > 0."""
        if self.y == 0:
            return (self.x > 0) - (self.x < 0)
        if self.x == 0:
            return 1 if self.y > 0 else -1
        if self.x > 0 and self.y > 0:
            return 1
        if self.x < 0 and self.y < 0:
            return -1
        # opposite signs: compare x^2 with D y^2
        lhs, rhs = self.x * self.x, self.D * self.y * self.y
        if lhs == rhs:
            return 0
        if self.x > 0:
            return 1 if lhs > rhs else -1
        return -1 if lhs > rhs else 1

    def __lt__(self, other):
        diff = self - (other if isinstance(other, QuadElem) else QuadElem(Fraction(other), 0, self.D))
        return diff.sign() < 0

    def __le__(self, other):
        diff = self - (other if isinstance(other, QuadElem) else QuadElem(Fraction(other), 0, self.D))
        return diff.sign() <= 0

    def is_zero(self) -> bool:
        return self.x == 0 and self.y == 0

    def embed(self):
        """The two real embeddings (value, conjugate value) as mpfr."""
        sq = gmpy2.sqrt(mpf(self.D))
        return (mpf(self.x) + mpf(self.y) * sq, mpf(self.x) - mpf(self.y) * sq)

    def to_mpfr(self) -> gmpy2.mpfr:
        return self.embed()[0]

    def __repr__(self):
        return f"({self.x} + {self.y}*sqrt({self.D}))"

    def serialize(self):
        return {"x": str(self.x), "y": str(self.y), "D": self.D}


def quad_conj(lam: QuadElem) -> QuadElem:
    return lam.conj()


def quad_embed(lam: QuadElem):
    return lam.embed()


def frac_str(q: Fraction) -> str:
    return str(Fraction(q))


def parse_frac(s: str) -> Fraction:
    return Fraction(s)
