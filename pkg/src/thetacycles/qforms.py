"""Integral binary quadratic forms, reduction, class sets, automorphs, geodesics.

A form [a, b, c] means a*x^2 + b*x*y + c*y^2.  The PSL2(Z) action is matrix
conjugation g.X = g X g^{-1} on X = [[b/2, c], [-a, -b/2]]; it preserves the
discriminant b^2 - 4ac.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2

from .numerics import QuadElem, mpf, mpc

__all__ = [
    "QForm", "GeodesicClass", "act", "reduce_posdef", "class_reps",
    "automorph", "geodesic", "cm_point", "form_action", "moebius",
    "jfactor", "pell_minimal", "is_square", "fd_reduce",
]


def is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


@dataclass(frozen=True)
class QForm:
    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.disc() % 4 not in (0, 1):
            raise ValueError(f"{self.triple()} has discriminant {self.disc()} != 0,1 mod 4")

    def disc(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def triple(self):
        return (self.a, self.b, self.c)

    def content(self) -> int:
        return math.gcd(math.gcd(abs(self.a), abs(self.b)), abs(self.c))

    def is_posdef(self) -> bool:
        return self.disc() < 0 and self.a > 0

    def __call__(self, z, w=1):
        """Evaluate a*z^2 + b*z*w + c*w^2."""
        return self.a * z * z + self.b * z * w + self.c * w * w

    def __neg__(self):
        return QForm(-self.a, -self.b, -self.c)

    def __repr__(self):
        return f"[{self.a},{self.b},{self.c}]"


def form_action(g, triple):
    """Conjugation action of an invertible 2x2 matrix on a form triple.

    Entries may be ints, Fractions or QuadElems; scalar multiples of g act
    identically, so no det-1 normalization is required.  Returns the triple
    of the transformed form (same coefficient ring, division by det(g)).
    """
    (p, q), (r, s) = g
    a, b, c = triple
    det = p * s - q * r
    if isinstance(det, QuadElem):
        if det.is_zero():
            raise ValueError("singular matrix")
    elif det == 0:
        raise ValueError("singular matrix")
    # X = [[b/2, c], [-a, -b/2]]; X' = g X g^{-1} = g X adj(g)/det
    # work with 2X to stay in the coefficient ring, halve at the end
    m00, m01, m10, m11 = b, 2 * c, -2 * a, -b
    # g * M
    n00 = p * m00 + q * m10
    n01 = p * m01 + q * m11
    n10 = r * m00 + s * m10
    n11 = r * m01 + s * m11
    # (g M) * adj(g),  adj(g) = [[s, -q], [-r, p]]
    k00 = n00 * s + n01 * (-r)
    k01 = n00 * (-q) + n01 * p
    k10 = n10 * s + n11 * (-r)
    a2, b2, c2 = -k10, k00, k01
    if isinstance(det, int) and isinstance(a2, int):
        return (a2 // (2 * det) if a2 % (2 * det) == 0 else Fraction(a2, 2 * det),
                b2 // det if b2 % det == 0 else Fraction(b2, det),
                c2 // (2 * det) if c2 % (2 * det) == 0 else Fraction(c2, 2 * det))
    half = Fraction(1, 2)
    return (a2 / det * half, b2 / det, c2 / det * half)


def act(g, Q: QForm) -> QForm:
    """g.Q for integer g with det 1; discriminant is preserved."""
    (p, q), (r, s) = g
    if p * s - q * r != 1:
        raise ValueError("matrix must have determinant 1")
    a, b, c = form_action(g, Q.triple())
    return QForm(int(a), int(b), int(c))


def moebius(g, z):
    (p, q), (r, s) = g
    return (p * z + q) / (r * z + s)


def jfactor(g, z):
    (_, _), (r, s) = g
    return r * z + s


def _mat_mul(g, h):
    return ((g[0][0] * h[0][0] + g[0][1] * h[1][0], g[0][0] * h[0][1] + g[0][1] * h[1][1]),
            (g[1][0] * h[0][0] + g[1][1] * h[1][0], g[1][0] * h[0][1] + g[1][1] * h[1][1]))


IDENTITY = ((1, 0), (0, 1))


def fd_reduce(z, max_steps=10000):
    """Move z into the standard fundamental domain |Re z| <= 1/2, |z| >= 1.

    Returns (g, z*, word) with z* = g.z and word the list of reduction
    steps, each ("T", k) for a translation by k or ("S",) for an inversion.
    The word lets callers accumulate automorphy factors step by step.
    """
    cur = mpc(z.real, z.imag)
    g = IDENTITY
    word = []
    for _ in range(max_steps):
        k = int(gmpy2.floor(cur.real + mpf(1) / 2))
        if k != 0:
            cur = cur - k
            g = _mat_mul(((1, -k), (0, 1)), g)
            word.append(("T", -k))
        if abs(cur) < 1:
            cur = -1 / cur
            g = _mat_mul(((0, -1), (1, 0)), g)
            word.append(("S",))
        else:
            return g, cur, word
    raise RuntimeError("fundamental domain reduction did not terminate")


def reduce_posdef(Q: QForm):
    """Gauss reduction of a positive definite form.

    Returns (reduced form, g) with g.Q = reduced, det g = 1.  Reduced means
    |b| <= a <= c with b >= 0 if |b| == a or a == c.
    """
    if Q.disc() >= 0 or Q.a <= 0:
        raise ValueError("form must be positive definite")
    cur = Q
    g = IDENTITY
    S = ((0, -1), (1, 0))
    while True:
        a, b, c = cur.triple()
        # act(((1,-k),(0,1)), [a,b,c]) = [a, b+2ka, ak^2+bk+c]
        if not (-a < b <= a):
            k = (a - b) // (2 * a)  # puts b + 2ka in (-a, a]
            step = ((1, -k), (0, 1))
        elif a > c:
            step = S  # [a,b,c] -> [c,-b,a]
        elif b < 0 and a == -b:
            step = ((1, 1), (0, 1))  # b -> b + 2a = -b, c unchanged
        elif b < 0 and a == c:
            step = S
        else:
            break
        cur = act(step, cur)
        g = _mat_mul(step, g)
    assert act(g, Q) == cur
    return cur, g


def _reduced_posdef_list(d: int):
    out = []
    bmax = math.isqrt(abs(d) // 3)
    for b in range(-bmax, bmax + 1):
        if (b - d) % 2 != 0:
            continue
        ac4 = b * b - d
        if ac4 % 4 != 0:
            continue
        ac = ac4 // 4
        for a in range(max(abs(b), 1), math.isqrt(ac) + 1):
            if ac % a != 0:
                continue
            c = ac // a
            if a > c:
                continue
            if abs(b) > a:
                continue
            if b < 0 and (abs(b) == a or a == c):
                continue
            out.append(QForm(a, b, c))
    return out


def _rho_step(Q: QForm) -> QForm:
    """One reduction step for indefinite forms: [a,b,c] -> [c, b', *]."""
    D = Q.disc()
    r = math.isqrt(D)
    a, b, c = Q.triple()
    # choose b' = -b mod 2|c| with b' maximal below sqrt(D) if |c| < sqrt(D),
    # else |b'| minimal (standard rho operator)
    ac = abs(c)
    if ac > r:
        # -|c| < b' <= |c|
        bp = ((-b + ac) % (2 * ac)) - ac
        if bp == -ac:
            bp = ac
    else:
        # sqrt(D) - 2|c| < b' < sqrt(D)
        bp = r - ((r + b) % (2 * ac))
        if bp <= r - 2 * ac:
            bp += 2 * ac
    cp = (bp * bp - D) // (4 * c)
    return QForm(c, bp, cp)


def class_reps(d: int):
    """One representative per PSL2(Z)-class of forms of discriminant d.

    d < 0: positive definite classes (reduced forms).  d > 0 nonsquare:
    cycles of reduced indefinite forms, representative chosen with a > 0.
    """
    if d % 4 not in (0, 1):
        raise ValueError(f"no forms of discriminant {d} (d = 2,3 mod 4)")
    if d == 0:
        raise ValueError("d must be nonzero")
    if d < 0:
        return _reduced_posdef_list(d)
    if is_square(d):
        raise ValueError("square discriminants are unsupported (infinite geodesics)")
    # collect all reduced indefinite forms, then group into rho-cycles
    r = math.isqrt(d)
    reduced = []
    for b in range(1, r + 1):
        if (b * b - d) % 2 != 0:
            continue
        for a in range(-(r + b) // 2, (r + b) // 2 + 1):
            if a == 0:
                continue
            a2 = 2 * abs(a)
            # sqrt(d) - b < 2|a| < sqrt(d) + b
            if (a2 + b) ** 2 <= d:
                continue
            if a2 >= b and (a2 - b) ** 2 >= d:
                continue
            if (b * b - d) % (4 * a) != 0:
                continue
            c = (b * b - d) // (4 * a)
            reduced.append(QForm(a, b, c))
    seen = set()
    reps = []
    for Q in reduced:
        if Q.triple() in seen:
            continue
        cycle = [Q]
        seen.add(Q.triple())
        cur = _rho_step(Q)
        guard = 0
        while cur.triple() != Q.triple():
            cycle.append(cur)
            seen.add(cur.triple())
            cur = _rho_step(cur)
            guard += 1
            if guard > 10000:
                raise RuntimeError(f"reduction cycle of {Q} did not close")
        rep = next((F for F in cycle if F.a > 0), cycle[0])
        reps.append(rep)
    return reps


def pell_minimal(D: int):
    """Minimal (t, u), t, u > 0, with t^2 - D u^2 = 4, by direct search.

    Fine at desk scale (fundamental units of the discriminants we use are
    small); raises rather than looping forever on pathological D.
    """
    for u in range(1, 100001):
        tt = D * u * u + 4
        s = math.isqrt(tt)
        if s * s == tt:
            return s, u
    raise RuntimeError(f"Pell search exhausted for D={D}")


def automorph(A: QForm):
    """Generator (M_A, eps) of the stabilizer of A in PSL2(Z).

    M_A = [[(t - b u)/2, -c u], [a u, (t + b u)/2]] built from the primitive
    part's minimal solution of t^2 - D0 u^2 = 4; eps = (t + u*sqrt(D0))/2
    expressed in Q(sqrt(D)).
    """
    D = A.disc()
    if D <= 0 or is_square(D):
        raise ValueError("automorph requires positive nonsquare discriminant")
    m = A.content()
    a0, b0, c0 = A.a // m, A.b // m, A.c // m
    D0 = D // (m * m)
    t, u = pell_minimal(D0)
    M = ((
        (t - b0 * u) // 2, -c0 * u),
        (a0 * u, (t + b0 * u) // 2))
    eps = QuadElem(Fraction(t, 2), Fraction(u, 2 * m), D)
    # sanity: M fixes A and has det 1
    det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
    assert det == 1
    assert act(M, A) == A
    return M, eps


@dataclass
class GeodesicClass:
    """Geodesic data of an indefinite form A with a > 0 and D nonsquare."""

    A: QForm
    w_exact: QuadElem     # (-b - sqrt(D))/(2a)
    wp_exact: QuadElem    # (-b + sqrt(D))/(2a)
    M: tuple              # integer automorph matrix
    eps: QuadElem         # fundamental automorph unit (t + u sqrt(D0))/2
    t: int
    u: int

    @property
    def D(self) -> int:
        return self.A.disc()

    @property
    def w(self):
        return self.w_exact.to_mpfr()

    @property
    def wp(self):
        return self.wp_exact.to_mpfr()

    def sigma(self):
        """sigma = a^(1/2)/D^(1/4) * [[w', w], [1, 1]], det 1, as mpfr."""
        s = gmpy2.sqrt(mpf(self.A.a)) / gmpy2.sqrt(gmpy2.sqrt(mpf(self.D)))
        return ((s * self.wp, s * self.w), (s, s))

    def point(self, t):
        """z(t) = sigma.(i t) on S_A; t may be mpfr or complex mpc."""
        it = mpc(0, 1) * t
        w, wp = self.w, self.wp
        return (wp * it + w) / (it + 1)

    def dz_dt(self, t):
        """d/dt of sigma.(i t) = i (w' - w)/(i t + 1)^2."""
        it = mpc(0, 1) * t
        return mpc(0, 1) * (self.wp - self.w) / ((it + 1) * (it + 1))

    def period_end(self):
        """t-period of the closed geodesic: t in [1, eps_sigma^2], where the
        automorph acts as t -> eps_sigma^2 t in the sigma parametrization."""
        e = self.eps.to_mpfr()
        return e * e

    def serialize(self):
        return {
            "A": self.A.triple(),
            "w": str(self.w),
            "w_prime": str(self.wp),
            "M": [list(r) for r in self.M],
            "t": self.t,
            "u": self.u,
            "eps": self.eps.serialize(),
        }


def geodesic(A: QForm) -> GeodesicClass:
    D = A.disc()
    if D <= 0 or is_square(D):
        raise ValueError("geodesic requires positive nonsquare discriminant")
    if A.a <= 0:
        raise ValueError("negate A first: only a > 0 is supported "
                         "(A -> -A flips the sign of cycle integrals)")
    M, eps = automorph(A)
    t = int(2 * eps.x)
    sq = QuadElem(Fraction(0), Fraction(1), D)
    a, b = A.a, A.b
    w = (QuadElem(Fraction(-b), Fraction(0), D) - sq) / (2 * a)
    wp = (QuadElem(Fraction(-b), Fraction(0), D) + sq) / (2 * a)
    u_int = int(eps.y * 2 * A.content())
    return GeodesicClass(A=A, w_exact=w, wp_exact=wp, M=M, eps=eps, t=t, u=u_int)


def cm_point(Q: QForm):
    """Upper half-plane root (-b + i sqrt(|d|))/(2a) of a definite form."""
    if Q.disc() >= 0:
        raise ValueError("cm_point requires negative discriminant")
    if Q.a <= 0:
        raise ValueError("cm_point requires a > 0")
    d = Q.disc()
    return (mpc(-Q.b) + mpc(0, 1) * gmpy2.sqrt(mpf(-d))) / (2 * Q.a)
