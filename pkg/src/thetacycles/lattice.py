"""Lattices in the signature (1,2) space of binary quadratic forms.

Vectors are coefficient triples X = (x1, x2, x3) standing for the form
x1*u^2 + x2*u*v + x3*v^2, with quadratic form q(X) = x1*x3 - x2^2/4 and
bilinear form (X, Y) = q(X+Y) - q(X) - q(Y) = x1*y3 + x3*y1 - x2*y2/2.

The reference even lattice is L = {(a, b, c) : b even} with dual L' = Z^3,
so L'/L has order two.  A positively oriented form A of positive nonsquare
discriminant splits L rationally into the rank-two part I = L cap A^perp
(signature (1,1)) and the negative definite line N = L cap Q*A.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import gmpy2

from .numerics import QuadElem, e2pi, mpf, mpc
from .qforms import QForm

__all__ = [
    "qval", "bilinear", "Lattice", "DiscGroup", "SplitData",
    "form_lattice", "split", "smith_normal_form", "frame_vectors",
    "poly_q", "poly_p", "majorant",
]


def qval(X):
    """q(X) = x1*x3 - x2^2/4."""
    x1, x2, x3 = X
    return x1 * x3 - x2 * x2 * Fraction(1, 4) if isinstance(x2, (int, Fraction)) \
        else x1 * x3 - x2 * x2 / 4


def bilinear(X, Y):
    """(X, Y) = x1*y3 + x3*y1 - x2*y2/2."""
    x1, x2, x3 = X
    y1, y2, y3 = Y
    if isinstance(x2, (int, Fraction)) and isinstance(y2, (int, Fraction)):
        return x1 * y3 + x3 * y1 - x2 * y2 * Fraction(1, 2)
    return x1 * y3 + x3 * y1 - x2 * y2 / 2


# ---------------------------------------------------------------------------
# integer linear algebra


def smith_normal_form(A):
    """Smith normal form with transforms: returns (U, S, V) with U*A*V = S,
    U, V unimodular, S diagonal with s_i | s_{i+1}.  A is a list of lists of
    ints; inputs are not modified."""
    m, n = len(A), len(A[0])
    S = [list(map(int, row)) for row in A]
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        S[i], S[j] = S[j], S[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in S:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(i, j, k):  # row_i += k * row_j
        S[i] = [a + k * b for a, b in zip(S[i], S[j])]
        U[i] = [a + k * b for a, b in zip(U[i], U[j])]

    def add_col(i, j, k):  # col_i += k * col_j
        for row in S:
            row[i] += k * row[j]
        for row in V:
            row[i] += k * row[j]

    def negate_row(i):
        S[i] = [-a for a in S[i]]
        U[i] = [-a for a in U[i]]

    t = 0
    while t < min(m, n):
        # find a pivot
        piv = None
        for i in range(t, m):
            for j in range(t, n):
                if S[i][j] != 0:
                    if piv is None or abs(S[i][j]) < abs(S[piv[0]][piv[1]]):
                        piv = (i, j)
        if piv is None:
            break
        swap_rows(t, piv[0])
        swap_cols(t, piv[1])
        while True:
            # clear column t
            done = True
            for i in range(t + 1, m):
                if S[i][t] != 0:
                    k = S[i][t] // S[t][t]
                    add_row(i, t, -k)
                    if S[i][t] != 0:
                        swap_rows(i, t)
                        done = False
            for j in range(t + 1, n):
                if S[t][j] != 0:
                    k = S[t][j] // S[t][t]
                    add_col(j, t, -k)
                    if S[t][j] != 0:
                        swap_cols(j, t)
                        done = False
            if done:
                break
        if S[t][t] < 0:
            negate_row(t)
        t += 1
    # enforce divisibility s_i | s_{i+1}
    r = t
    changed = True
    while changed:
        changed = False
        for i in range(r - 1):
            if S[i + 1][i + 1] % S[i][i] != 0:
                add_col(i, i + 1, 1)
                # re-clear the 2x2 block
                while S[i + 1][i] != 0 or S[i][i + 1] != 0:
                    if S[i][i] != 0 and S[i + 1][i] != 0:
                        k = S[i + 1][i] // S[i][i]
                        add_row(i + 1, i, -k)
                        if S[i + 1][i] != 0:
                            swap_rows(i, i + 1)
                    if S[i][i + 1] != 0:
                        k = S[i][i + 1] // S[i][i]
                        add_col(i + 1, i, -k)
                        if S[i][i + 1] != 0:
                            swap_cols(i, i + 1)
                if S[i][i] < 0:
                    negate_row(i)
                if S[i + 1][i + 1] < 0:
                    negate_row(i + 1)
                changed = True
    return U, S, V


def _mat_vec(M, v):
    return tuple(sum(M[i][j] * v[j] for j in range(len(v))) for i in range(len(M)))


def _solve_rational(A, b):
    """Solve A x = b over Q (A square, lists of Fractions); None if singular
    or inconsistent."""
    n = len(A)
    M = [[Fraction(A[i][j]) for j in range(n)] + [Fraction(b[i])] for i in range(n)]
    row = 0
    pivots = []
    for col in range(n):
        piv = next((r for r in range(row, n) if M[r][col] != 0), None)
        if piv is None:
            continue
        M[row], M[piv] = M[piv], M[row]
        M[row] = [x / M[row][col] for x in M[row]]
        for r in range(n):
            if r != row and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[row])]
        pivots.append(col)
        row += 1
    x = [Fraction(0)] * n
    for r, col in enumerate(pivots):
        x[col] = M[r][n]
    # verify (handles singular/inconsistent cases)
    for i in range(n):
        if sum(A[i][j] * x[j] for j in range(n)) != b[i]:
            return None
    return x


# ---------------------------------------------------------------------------
# lattices


class Lattice:
    """A lattice given by a basis of rational triples in the form space.

    The basis need not span the ambient space (sublattices of lower rank are
    the common case), but must be linearly independent.
    """

    def __init__(self, basis, name=""):
        self.basis = tuple(tuple(Fraction(x) for x in v) for v in basis)
        self.name = name
        self._gram = None
        self._disc = None
        if len(self.basis) == 0:
            raise ValueError("empty basis")

    @property
    def rank(self):
        return len(self.basis)

    def gram(self):
        if self._gram is None:
            self._gram = [[bilinear(v, w) for w in self.basis] for v in self.basis]
            for row in self._gram:
                for x in row:
                    if x.denominator != 1:
                        raise ValueError(f"basis is not integral: Gram entry {x}")
        return self._gram

    def det(self) -> int:
        G = [[Fraction(x) for x in row] for row in self.gram()]
        n = self.rank
        det = Fraction(1)
        for col in range(n):
            piv = next((r for r in range(col, n) if G[r][col] != 0), None)
            if piv is None:
                return 0
            if piv != col:
                G[col], G[piv] = G[piv], G[col]
                det = -det
            det *= G[col][col]
            for r in range(col + 1, n):
                f = G[r][col] / G[col][col]
                G[r] = [x - f * y for x, y in zip(G[r], G[col])]
        assert det.denominator == 1
        return int(det)

    def dual_basis(self):
        """Vectors d_i in the rational span with (d_i, basis_j) = delta_ij."""
        G = self.gram()
        n = self.rank
        cols = []
        for j in range(n):
            e = [Fraction(int(i == j)) for i in range(n)]
            x = _solve_rational(G, e)
            if x is None:
                raise ValueError("degenerate lattice")
            cols.append(x)
        return tuple(
            tuple(sum(cols[i][k] * self.basis[k][t] for k in range(n))
                  for t in range(3))
            for i in range(n))

    def coords(self, v):
        """Coordinates of v in the basis, or None if v is outside the span."""
        v = tuple(Fraction(x) for x in v)
        # solve via the Gram matrix: G x = (v, basis_j) works only if v is in
        # the span; verify by reconstructing
        rhs = [bilinear(v, b) for b in self.basis]
        x = _solve_rational(self.gram(), rhs)
        if x is None:
            return None
        rec = tuple(sum(x[k] * self.basis[k][t] for k in range(self.rank))
                    for t in range(3))
        return x if rec == v else None

    def contains(self, v) -> bool:
        x = self.coords(v)
        return x is not None and all(c.denominator == 1 for c in x)

    def dual_contains(self, v) -> bool:
        x = self.coords(v)
        if x is None:
            return False
        return all(bilinear(v, b).denominator == 1 for b in self.basis)

    def disc_group(self) -> "DiscGroup":
        if self._disc is None:
            self._disc = DiscGroup(self)
        return self._disc

    def __repr__(self):
        return f"Lattice({self.name or self.basis})"


class DiscGroup:
    """The finite quadratic module L'/L of an even lattice L.

    Cosets are indexed 0..order-1 with index 0 the zero coset; reps are
    ambient triples of Fractions.  q_frac and b_frac return values mod 1.
    """

    def __init__(self, lat: Lattice):
        self.lat = lat
        G = [[int(x) for x in row] for row in lat.gram()]
        n = lat.rank
        U, S, V = smith_normal_form(G)
        self.invariants = tuple(S[i][i] for i in range(n))
        dual = lat.dual_basis()
        # L'/L = Z^n / G Z^n in dual-basis coordinates; x ~ y iff
        # U x = U y mod diag(S).  Reps: x = U^{-1} r for r in prod Z/s_i.
        Uinv = _solve_int_inverse(U)
        self._U = U
        reps = []
        self._lookup = {}
        for r in itertools.product(*(range(s) for s in self.invariants)):
            x = _mat_vec(Uinv, r)
            vec = tuple(sum(Fraction(x[k]) * dual[k][t] for k in range(n))
                        for t in range(3))
            self._lookup[r] = len(reps)
            reps.append(vec)
        self.reps = tuple(reps)
        self.order = len(reps)
        self._dual = dual

    def index_of(self, v) -> int:
        """Coset index of an ambient vector v in L'."""
        vv = tuple(Fraction(t) for t in v)
        if self.lat.coords(vv) is None:
            raise ValueError(f"{v} is not in the rational span")
        # coordinates of v w.r.t. dual basis are (v, basis_j)
        y = [bilinear(vv, b) for b in self.lat.basis]
        if any(c.denominator != 1 for c in y):
            raise ValueError(f"{v} is not in the dual lattice")
        r = _mat_vec(self._U, [int(c) for c in y])
        key = tuple(int(r[i]) % self.invariants[i] for i in range(len(r)))
        return self._lookup[key]

    def neg(self, i: int) -> int:
        return self.index_of(tuple(-x for x in self.reps[i]))

    def add(self, i: int, j: int) -> int:
        return self.index_of(tuple(a + b for a, b in zip(self.reps[i], self.reps[j])))

    def q_frac(self, i: int) -> Fraction:
        return qval(self.reps[i]) % 1

    def b_frac(self, i: int, j: int) -> Fraction:
        return bilinear(self.reps[i], self.reps[j]) % 1

    def gauss_sum(self):
        """sum_gamma e(q(gamma)); equals sqrt(order) * e(signature/8)."""
        total = mpc(0)
        for i in range(self.order):
            total += e2pi(self.q_frac(i))
        return total

    def weil_T(self, dual=False):
        """Diagonal of rho(T): e(q(gamma)), conjugated for the dual action."""
        sign = -1 if dual else 1
        return [e2pi(sign * self.q_frac(i)) for i in range(self.order)]

    def weil_S(self, dual=False):
        """Matrix of rho(S): rho(S)[d][g] = conj(gauss_sum)/order * e(-(g,d)),
        conjugated entrywise for the dual action."""
        gs = self.gauss_sum()
        pref = gmpy2.mpc(gs.real, -gs.imag) / self.order
        sign = -1 if dual else 1
        M = []
        for d in range(self.order):
            row = []
            for g in range(self.order):
                val = pref * e2pi(-self.b_frac(g, d))
                row.append(gmpy2.mpc(val.real, sign * val.imag)
                           if dual else val)
            M.append(row)
        return M


def _solve_int_inverse(U):
    """Inverse of a unimodular integer matrix, as integer matrix."""
    n = len(U)
    A = [[Fraction(U[i][j]) for j in range(n)] for i in range(n)]
    inv = []
    for j in range(n):
        e = [Fraction(int(i == j)) for i in range(n)]
        x = _solve_rational(A, e)
        assert x is not None and all(c.denominator == 1 for c in x)
        inv.append([int(c) for c in x])
    # transpose: columns are solutions
    return [[inv[j][i] for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------------------
# the reference lattice and its splitting along a form


def form_lattice() -> Lattice:
    """L = {(a, b, c) integral, b even}; dual L' = Z^3, |L'/L| = 2."""
    return Lattice([(1, 0, 0), (0, 2, 0), (0, 0, 1)], name="L")


def _kernel_basis_functional(f):
    """Basis of the kernel of the functional x -> sum f_i x_i on Z^n."""
    n = len(f)
    U, S, V = smith_normal_form([list(f)])
    # f V = (g, 0, ..., 0); kernel basis = columns 1..n-1 of V
    return [tuple(V[i][j] for i in range(n)) for j in range(1, n)]


@dataclass
class SplitData:
    """Rational splitting of L along an indefinite form A (a > 0)."""

    A: QForm
    L: Lattice
    I: Lattice          # L cap A^perp, signature (1, 1)
    N: Lattice          # L cap Q*A, negative definite line
    M: Lattice          # I + N, finite index in L
    n0: tuple           # generator of N, = m*A
    m: int              # 1 if A.b even else 2
    index: int          # [L : M]
    w_exact: QuadElem   # root (-b + sqrt(D))/(2a), fixes the orientation

    @property
    def D(self) -> int:
        return self.A.disc()

    @property
    def q0(self) -> Fraction:
        return qval(self.n0)

    def lam(self, Y) -> QuadElem:
        """Y in I' maps to lambda = a*(y1*w^2 + y2*w + y3)/sqrt(D) in
        Q(sqrt D); then q(Y) = -lambda*lambda' and the automorph acts by
        lambda -> eps^2 * lambda."""
        y1, y2, y3 = (Fraction(t) for t in Y)
        w = self.w_exact
        a = self.A.a
        val = (w * w * y1 + w * y2 + y3) * a
        sqD = QuadElem(Fraction(0), Fraction(1), self.D)
        return val / sqD

    def serialize(self):
        return {
            "A": self.A.triple(),
            "I_basis": [[str(x) for x in v] for v in self.I.basis],
            "n0": [str(x) for x in self.n0],
            "m": self.m,
            "index": self.index,
        }


def split(A: QForm) -> SplitData:
    if A.disc() <= 0 or A.a <= 0:
        raise ValueError("split requires an indefinite form with a > 0")
    L = form_lattice()
    m = 1 if A.b % 2 == 0 else 2
    n0 = (m * A.a, m * A.b, m * A.c)
    N = Lattice([n0], name=f"N({A})")
    # I = kernel of X -> (X, A) on L; in L-coordinates (x1, x2, x3) for
    # X = (x1, 2*x2, x3) the functional is c*x1 - b*x2 + a*x3
    ker = _kernel_basis_functional((A.c, -A.b, A.a))
    ibasis = [(v[0], 2 * v[1], v[2]) for v in ker]
    I = Lattice(ibasis, name=f"I({A})")
    M = Lattice(list(ibasis) + [n0], name=f"M({A})")
    dL = abs(L.det())
    dM = abs(M.det())
    assert dM % dL == 0
    idx2 = dM // dL
    from math import isqrt
    index = isqrt(idx2)
    assert index * index == idx2, "index must be a perfect square"
    D = A.disc()
    w = (QuadElem(Fraction(-A.b), Fraction(0), D)
         + QuadElem(Fraction(0), Fraction(1), D)) / (2 * A.a)
    return SplitData(A=A, L=L, I=I, N=N, M=M, n0=n0, m=m, index=index,
                     w_exact=w)


# ---------------------------------------------------------------------------
# the Grassmannian frame at a point z of the upper half-plane


def frame_vectors(z):
    """Orthogonal frame (X(z), U1(z), U2(z)) at z = x + iy, as mpfr triples.

    q(X(z)) = 1/2 spans the positive line; U1, U2 with q = -1/2 span the
    negative plane.
    """
    x, y = mpf(z.real), mpf(z.imag)
    if y <= 0:
        raise ValueError("z must be in the upper half-plane")
    s = 1 / (gmpy2.sqrt(mpf(2)) * y)
    Xv = (s, -2 * x * s, (x * x + y * y) * s)
    U1 = (-s, 2 * x * s, (y * y - x * x) * s)
    U2 = (mpf(0), 2 * y * s, -2 * x * y * s)
    return Xv, U1, U2


def poly_q(X, z):
    """Q_X(z) = x1 z^2 + x2 z + x3 (complex)."""
    x1, x2, x3 = (mpf(t) if isinstance(t, (int, Fraction)) else t for t in X)
    return x1 * z * z + x2 * z + x3


def poly_p(X, z):
    """p_X(z) = (x1 |z|^2 + x2 Re z + x3)/Im z (real)."""
    x1, x2, x3 = (mpf(t) if isinstance(t, (int, Fraction)) else t for t in X)
    x, y = z.real, z.imag
    return (x1 * (x * x + y * y) + x2 * x + x3) / y


def majorant(X, z):
    """The positive definite majorant p_X(z)^2/4 + |Q_X(z)|^2/(4 y^2);
    equals q on the positive line and -q on the negative plane."""
    p = poly_p(X, z)
    Q = poly_q(X, mpc(z.real, z.imag) if not isinstance(z, gmpy2.mpc) else z)
    y = mpf(z.imag)
    return p * p / 4 + (Q.real * Q.real + Q.imag * Q.imag) / (4 * y * y)
