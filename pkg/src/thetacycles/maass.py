"""Weight-1/2 harmonic completion solver.

Determines the holomorphic part of a weight-1/2 harmonic form for the Weil
representation of the definite line N whose xi-image is D^(-1/2) times the
weight-3/2 unary theta of N.  The nonholomorphic part is forced termwise by
the shadow:

    xi_{1/2}( c * Gamma(1/2, 4 pi m v) q^(-m) ) = -conj(c) (4 pi m)^(1/2) q^m,

so matching D^(-1/2) * shadow fixes c(m) = -b(m) / (sqrt(D) sqrt(4 pi m)).
The holomorphic coefficients are the unknowns of a least-squares
collocation: sample points on a low horocycle are pulled back to the
fundamental domain and the transformation law along the reduction word is
enforced.  This grades the conditioning like a q-expansion fit, so the
low coefficients come out accurate enough for rational reconstruction;
the reconstructed series is re-verified at fresh points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import mpmath

from .numerics import (mpc, mpf, pi_, e2pi, rational_reconstruct_ex,
                       upper_incomplete_gamma_half)
from .lattice import SplitData
from .qforms import fd_reduce
from .qseries import QSeries
from .theta import unary_theta_series

__all__ = ["MockPart", "completion_eval", "solve_mock", "pullback_defect",
           "xi_image", "MockSolverError"]


class MockSolverError(RuntimeError):
    pass


@dataclass
class MockPart:
    holo: QSeries            # rational coefficients, plain representation
    shadow: QSeries          # exact weight-3/2 unary theta (dual rep)
    D: int
    residual: object         # mpfr certificate from the exact re-verification
    den_bound_used: int
    float_residual: object   # residual of the floating least-squares solve
    order: int
    ambiguous: list = field(default_factory=list)

    def serialize(self):
        return {
            "holo": self.holo.serialize(),
            "shadow": self.shadow.serialize(),
            "D": self.D,
            "order": self.order,
            "residual": str(self.residual),
            "float_residual": str(self.float_residual),
            "den_bound": self.den_bound_used,
            "ambiguous": [[int(i), str(e)] for i, e in self.ambiguous],
        }


def _nonholo_terms(shadow: QSeries, D: int):
    """(component, m, c(m)) for F^- = sum c(m) Gamma(1/2, 4 pi m v) q^(-m)."""
    out = []
    for (i, m), b in shadow.coeffs.items():
        if m <= 0:
            raise ValueError("shadow must have positive exponents only")
        c = -mpf(b) / (gmpy2.sqrt(mpf(D)) * gmpy2.sqrt(4 * pi_() * mpf(m)))
        out.append((i, m, c))
    return out


def nonholo_eval(shadow: QSeries, D: int, tau):
    """F^-(tau) as a component vector."""
    v = mpf(tau.imag)
    out = [mpc(0)] * shadow.ncomp
    for i, m, c in _nonholo_terms(shadow, D):
        g = upper_incomplete_gamma_half(4 * pi_() * mpf(m) * v)
        out[i] += c * g * e2pi(-mpf(m) * mpf(tau.real)) * gmpy2.exp(
            2 * pi_() * mpf(m) * v)
    return out


def holo_eval(coeffs, ncomp, tau):
    out = [mpc(0)] * ncomp
    u, v = mpf(tau.real), mpf(tau.imag)
    for (i, e), c in coeffs.items():
        out[i] += mpf(c) * e2pi(mpf(e) * u) * gmpy2.exp(-2 * pi_() * v * mpf(e))
    return out


def completion_eval(holo: QSeries, shadow: QSeries, D: int, tau):
    """F(tau) = holo(tau) + F^-(tau), the harmonic completion."""
    h = holo_eval(holo.coeffs, holo.ncomp, tau)
    n = nonholo_eval(shadow, D, tau)
    return [a + b for a, b in zip(h, n)]


def xi_image(holo: QSeries, shadow: QSeries, D: int, tau, step=None):
    """xi_{1/2} F at tau by central differences, componentwise.

    xi_k f = 2 i v^k conj(d f / d tau-bar); the derivative is taken
    numerically, so the result carries an O(step^2) error.
    """
    if step is None:
        step = mpf(2) ** -(gmpy2.get_context().precision // 5)
    h = mpf(step)

    def ev(t):
        return completion_eval(holo, shadow, D, t)

    u, v = mpf(tau.real), mpf(tau.imag)
    fu_p, fu_m = ev(mpc(u + h, v)), ev(mpc(u - h, v))
    fv_p, fv_m = ev(mpc(u, v + h)), ev(mpc(u, v - h))
    out = []
    for k in range(holo.ncomp):
        dbar = ((fu_p[k] - fu_m[k]) + mpc(0, 1) * (fv_p[k] - fv_m[k])) / (4 * h)
        out.append(2 * mpc(0, 1) * gmpy2.sqrt(v) *
                   mpc(dbar.real, -dbar.imag))
    return out


def _pullback(group, tau):
    """(tau*, sigma, R) with F(tau*) = sigma * R * F(tau) for weight-1/2
    forms under the plain Weil representation of group.

    Built step by step along the reduction word: a translation by m
    multiplies by rho(T)^m, an inversion by cur^(1/2) rho(S) (principal
    branch), evaluated at the current point.
    """
    _, tau_star, word = fd_reduce(tau)
    n = group.order
    tdiag = group.weil_T(dual=False)
    smat = group.weil_S(dual=False)
    R = [[mpc(int(i == j)) for j in range(n)] for i in range(n)]
    sigma = mpc(1)
    cur = mpc(tau.real, tau.imag)
    for step in word:
        if step[0] == "T":
            m = step[1]
            cur = cur + m
            ph = [t ** m if m >= 0 else (1 / t) ** (-m) for t in tdiag]
            R = [[ph[i] * R[i][j] for j in range(n)] for i in range(n)]
        else:
            sigma = sigma * cur ** mpf("0.5")
            R = [[sum(smat[i][k] * R[k][j] for k in range(n))
                  for j in range(n)] for i in range(n)]
            cur = -1 / cur
    return tau_star, sigma, R


def pullback_defect(coeffs, shadow: QSeries, D: int, group, tau):
    """max_d |F(tau*) - sigma (R F)(tau)_d| for the completion built from
    the holomorphic coefficients coeffs."""
    tau_star, sigma, R = _pullback(group, tau)

    def ev(t):
        h = holo_eval(coeffs, group.order, t)
        fm = nonholo_eval(shadow, D, t)
        return [a + b for a, b in zip(h, fm)]

    F, Fstar = ev(tau), ev(tau_star)
    return max(abs(Fstar[d] - sigma * sum(R[d][g] * F[g]
                                          for g in range(group.order)))
               for d in range(group.order))


def _orbit_reps(group):
    """Component orbit representatives under gamma -> -gamma, excluding the
    fixed components (forced to zero by antisymmetry)."""
    return [i for i in range(group.order)
            if group.neg(i) != i and i < group.neg(i)]


def _unknown_slots(group, reps, order, principal_depth):
    """(component, exponent) slots for the holomorphic unknowns."""
    slots = []
    for i in reps:
        qf = group.q_frac(i)          # exponents n = qf + Z
        ell = -int(principal_depth)
        while qf + ell < order:
            slots.append((i, qf + ell))
            ell += 1
    return slots


def _assemble(sd: SplitData, shadow, group, reps, slots, oversample, y0):
    """Collocation rows A x = b in mpmath form (real/imag rows split).

    One row pair per (sample point, component representative): the
    transformation defect of the completion along the reduction word of
    the sample point, linear in the holomorphic unknowns.
    """
    npts = max((oversample * len(slots) + 2 * len(reps) - 1)
               // (2 * len(reps)), 8)
    n = group.order
    rows, rhs = [], []
    for j in range(npts):
        x = (mpf(2 * j + 1)) / (2 * npts) - mpf(1) / 2
        tau = mpc(x, y0)
        tau_star, sigma, R = _pullback(group, tau)

        def col(e, t):
            return e2pi(mpf(e) * mpf(t.real)) * gmpy2.exp(
                -2 * pi_() * mpf(t.imag) * mpf(e))

        fm = nonholo_eval(shadow, sd.D, tau)
        fm_star = nonholo_eval(shadow, sd.D, tau_star)
        for d in reps:
            row = []
            for (i, e) in slots:
                ineg = group.neg(i)
                val = mpc(0)
                if i == d:
                    val += col(e, tau_star)
                elif ineg == d:
                    val -= col(e, tau_star)
                val -= sigma * (R[d][i] - R[d][ineg]) * col(e, tau)
                row.append(val)
            rows.append(row)
            rhs.append(-(fm_star[d] - sigma * sum(R[d][g] * fm[g]
                                                  for g in range(n))))
    A = mpmath.matrix(2 * len(rows), len(slots))
    b = mpmath.matrix(2 * len(rows), 1)
    for r, row in enumerate(rows):
        for c, val in enumerate(row):
            A[2 * r, c] = mpmath.mpf(str(val.real))
            A[2 * r + 1, c] = mpmath.mpf(str(val.imag))
        b[2 * r, 0] = mpmath.mpf(str(rhs[r].real))
        b[2 * r + 1, 0] = mpmath.mpf(str(rhs[r].imag))
    return A, b


def _lstsq(A, b, slots, active, extra=None):
    """Least squares over the columns in active, optionally with appended
    constraint rows [(slot, value), ...].  Returns (values, residual)."""
    cols = [k for k, s in enumerate(slots) if s in active]
    nextra = len(extra) if extra else 0
    Asub = mpmath.matrix(A.rows + nextra, len(cols))
    bsub = mpmath.matrix(A.rows + nextra, 1)
    for r in range(A.rows):
        for kk, c in enumerate(cols):
            Asub[r, kk] = A[r, c]
        bsub[r, 0] = b[r, 0]
    if extra:
        pos = {s: kk for kk, s in enumerate(active)}
        for t, (slot, value) in enumerate(extra):
            Asub[A.rows + t, pos[slot]] = mpmath.mpf(1)
            bsub[A.rows + t, 0] = mpmath.mpf(value)
    x, res = mpmath.qr_solve(Asub, bsub)
    return [x[k, 0] for k in range(len(cols))], res


def _negative_slots(shadow, slots):
    """Principal-part slots ordered so that obstruction carriers come
    first: shallow before deep, and slots where the shadow has a nonzero
    coefficient (which can absorb the pairing obstruction) before the
    rest.

    The solution is unique up to weakly holomorphic weight-1/2 forms,
    and every such form is supported on poles (weight 1/2 has no odd
    holomorphic forms).  Pairing against the shadow obstructs one
    principal-part combination per cusp form in the dual weight 3/2, so
    the gauge is fixed by pinning all but a few carrier slots to zero;
    the number left free is found by demanding a consistent solve.
    """
    negatives = [s for s in slots if s[1] < 0]
    return sorted(negatives,
                  key=lambda s: (shadow.coeffs.get((s[0], -s[1]), 0) == 0,
                                 -s[1], s[0]))


def _solve_float(A, b, slots, pins):
    """Solve the pinned least-squares system; pinned slots map to 0."""
    prec = gmpy2.get_context().precision
    active = [s for s in slots if s not in pins]
    x, res = _lstsq(A, b, slots, active)
    digits = max(prec // 3, 40)
    out = {s: mpf(mpmath.nstr(v, digits, strip_zeros=False))
           for s, v in zip(active, x)}
    for u in pins:
        out[u] = mpf(0)
    return out, res


_MOCK_CACHE = {}


def solve_mock(sd: SplitData, order: int = 25, principal_depth: int = 2,
               den_bound: int = 10 ** 6, oversample: int = 3,
               residual_bound=None) -> MockPart:
    """Solve for the holomorphic part by pullback collocation.

    Antisymmetry under gamma -> -gamma (inherited from the shadow) halves
    the unknowns; T-invariance is built into the exponent grid.  The
    solution is only determined up to weakly holomorphic forms of weight
    1/2; that gauge is fixed by pinning one principal-part coefficient to
    zero per homogeneous direction.  The pinned solve is run at two
    truncation orders; only coefficients stable between the two runs are
    rationally reconstructed, the rest are truncation buffer.
    """
    prec = gmpy2.get_context().precision
    key = (sd.A.triple(), order, principal_depth, den_bound, prec)
    if key in _MOCK_CACHE:
        return _MOCK_CACHE[key]
    group = sd.N.disc_group()
    shadow = unary_theta_series(sd, Fraction(3, 2), order)
    reps = _orbit_reps(group)
    if not reps:
        raise MockSolverError("shadow is identically zero: nothing to solve")
    slots = _unknown_slots(group, reps, order, principal_depth)
    order_lo = max(order - 4, 6)
    slots_lo = _unknown_slots(group, reps, order_lo, principal_depth)
    y0 = mpf("0.55")
    with mpmath.workprec(prec + 16):
        A_hi, b_hi = _assemble(sd, shadow, group, reps, slots, oversample, y0)
        negatives = _negative_slots(shadow, slots)
        consistency = mpmath.mpf(10) ** -8
        sol_hi = None
        for nfree in range(1, min(len(negatives), 4) + 1):
            pins = negatives[nfree:]
            cand, res = _solve_float(A_hi, b_hi, slots, pins)
            if res < consistency:
                sol_hi = cand
                break
        if sol_hi is None:
            raise MockSolverError(
                "gauge fixing failed: no consistent pinning of the "
                "principal part")
        A_lo, b_lo = _assemble(sd, shadow, group, reps, slots_lo,
                               oversample, y0)
        lo_map, _ = _solve_float(A_lo, b_lo, slots_lo,
                                 [u for u in pins if u in slots_lo])

    # keep slots whose value is stable between the two truncation orders
    stable_tol = mpf(10) ** -13
    trusted_cut = Fraction(order)
    for (i, e), c in sol_hi.items():
        if (i, e) not in lo_map or \
                not abs(c - lo_map[(i, e)]) < stable_tol * (1 + abs(c)):
            trusted_cut = min(trusted_cut, Fraction(e))
    if trusted_cut <= 0:
        raise MockSolverError("no stable coefficients: increase order")
    coeffs = {}
    ambiguous = []
    for (i, e), c in sol_hi.items():
        if Fraction(e) >= trusted_cut:
            continue
        err = abs(c - lo_map[(i, e)])
        tol = max(err * 16, mpf(10) ** -14)
        val, amb = rational_reconstruct_ex(c, den_bound, tol)
        if val is None or amb:
            ambiguous.append((i, e))
            continue
        if val == 0:
            continue
        coeffs[(i, e)] = val
        coeffs[(group.neg(i), e)] = -val
    holo = QSeries(coeffs, trusted_cut, group.order)

    check_pts = [mpc(mpf(x) / 100, mpf(y) / 100)
                 for x, y in ((17, 71), (-31, 83), (43, 63))]
    float_coeffs = {}
    for (i, e), c in sol_hi.items():
        float_coeffs[(i, e)] = c
        float_coeffs[(group.neg(i), e)] = -c
    float_res = max(pullback_defect(float_coeffs, shadow, sd.D, group, t)
                    for t in check_pts)
    res = max(pullback_defect(holo.coeffs, shadow, sd.D, group, t)
              for t in check_pts)
    bound = residual_bound if residual_bound is not None \
        else mpf(2) ** -(prec // 4)
    if not res < bound:
        raise MockSolverError(
            f"solver residual {res} above bound {bound}; "
            "increase order or principal_depth")
    part = MockPart(holo=holo, shadow=shadow, D=sd.D, residual=res,
                    den_bound_used=den_bound, float_residual=float_res,
                    order=order, ambiguous=ambiguous)
    _MOCK_CACHE[key] = part
    return part
