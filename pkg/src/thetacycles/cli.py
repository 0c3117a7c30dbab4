"""Command-line drivers: verification reports, object dumps, and the
expansion cache.

Exit codes: 0 all checks pass, 2 verification failure, 3 invalid input,
4 precision or series order insufficient.

Only exact artifacts are cached (q-series expansions and mock-theta
solves, keyed by a content hash of kind, form, order and precision);
quadrature values are cheap relative to the expansions and depend on too
much configuration to be worth persisting.
"""

import csv
import hashlib
import io
import json
import os
import re
import sys
import tempfile
import time
from dataclasses import asdict, dataclass
from fractions import Fraction

import click
import gmpy2

from .numerics import mpc, mpf
from .qforms import QForm, automorph, class_reps, geodesic, is_square, \
    reduce_posdef
from .lattice import form_lattice, split
from .qseries import QSeries, delta_series, eisenstein, jfunc, \
    plus_to_vector, theta_scalar
from .theta import ThetaTruncationError, hecke_theta_series, siegel_theta, \
    unary_theta_series
from .maass import MockSolverError, solve_mock
from .cycles import PoleError, QuadratureError, SeriesTailError, \
    closed_form_thm41, cycle_merom, cycle_siegel, cycle_theta_star, f_eval, \
    theta_cycle_factorization

EXIT_PASS = 0
EXIT_VERIFY = 2
EXIT_INVALID = 3
EXIT_PRECISION = 4

TAU_DEFAULTS = ("i", "1/5+i/2", "-1/3+2i")


@dataclass
class RunConfig:
    """Full configuration of a run; embedded verbatim in every report."""

    precision: int = 256          # working precision in bits
    order: int = 40               # series truncation, exponent units
    quad_order: int = 48          # Gauss-Legendre nodes per panel
    den_bound: int = 10 ** 6      # rational reconstruction denominator cap
    tol: str = ""                 # override tolerance ("" = mode default)
    cache_dir: str = ""           # "" disables the cache
    fmt: str = "json"
    threads: int = 1              # reserved; cells run sequentially
    seed: int = 0                 # seed for randomized spot checks
    pv: bool = True               # principal-value mode for on-cycle poles

    def serialize(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# parsing helpers

_IM_RE = re.compile(r"^([+-]?)(\d*)i(/(\d+))?$")


def _eat_eq(ctx, param, value):
    """Accept '-d=-20' style: click hands us '=-20', strip the '='."""
    if isinstance(value, str):
        return value.lstrip("=")
    if isinstance(value, tuple):
        return tuple(v.lstrip("=") if isinstance(v, str) else v
                     for v in value)
    return value


def _eat_eq_int(ctx, param, value):
    value = _eat_eq(ctx, param, value)
    try:
        if isinstance(value, tuple):
            return tuple(int(v) for v in value)
        return int(value) if value is not None else None
    except ValueError:
        raise click.BadParameter(f"{value!r} is not an integer")


def _parse_rational(s):
    s = s.strip()
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    if "." in s:
        return Fraction(s)
    return Fraction(int(s))


def parse_point(s):
    """Parse 'i', '2i', 'i/2', 'x+yi', 'x-i/3', with rational x, y."""
    s = s.replace(" ", "")
    if "i" not in s:
        raise ValueError(f"point {s!r} has no imaginary part")
    # the real/imaginary boundary is the last +/- that is not leading
    cut = max(s.rfind("+", 1), s.rfind("-", 1))
    if cut > 0 and "i" in s[cut:]:
        real_tok, imtok = s[:cut], s[cut:]
    else:
        real_tok, imtok = "", s
    x = _parse_rational(real_tok) if real_tok else Fraction(0)
    mi = _IM_RE.match(imtok)
    if not mi:
        raise ValueError(f"cannot parse imaginary part {imtok!r}")
    y = Fraction(int(mi.group(2)) if mi.group(2) else 1,
                 int(mi.group(4)) if mi.group(4) else 1)
    if mi.group(1) == "-":
        y = -y
    return mpc(mpf(x.numerator) / x.denominator,
               mpf(y.numerator) / y.denominator)


def parse_form(s) -> QForm:
    try:
        a, b, c = (int(t) for t in s.replace(" ", "").split(","))
    except Exception:
        raise ValueError(f"form {s!r} must be three comma-separated integers")
    return QForm(a, b, c)


_RECIPE_NAMES = {"E4": (eisenstein, 4), "E6": (eisenstein, 6),
                 "Delta": (delta_series,), "j": (jfunc,)}


def _scale4(s: QSeries) -> QSeries:
    return QSeries({(0, 4 * e): c for (_, e), c in s.coeffs.items()},
                   4 * s.prec, 1)


def parse_recipe(spec, order):
    """Build the plus-space form named by a product recipe such as
    'theta*E4*E6/Delta' or 'theta*E4^2/Delta': the theta factor is taken at
    tau, every level-one factor at 4*tau.  Returns (vector series, weight,
    scalar principal part {d: a_g(d)}).
    """
    spec = spec.replace(" ", "")
    num, _, den = spec.partition("/")
    weight = Fraction(0)
    series = None
    theta_pow = 0

    def one(token, inverted):
        nonlocal series, weight, theta_pow
        name, _, pw = token.partition("^")
        pw = int(pw) if pw else 1
        if inverted:
            pw = -pw
        if name == "theta":
            if pw < 0:
                raise ValueError("cannot invert theta in a recipe")
            theta_pow += pw
            weight += Fraction(pw, 2)
            return
        if name not in _RECIPE_NAMES:
            raise ValueError(f"unknown recipe factor {name!r}")
        fn, *args = _RECIPE_NAMES[name]
        base = fn(*args, order) if args else fn(order)
        wt = {"E4": 4, "E6": 6, "Delta": 12, "j": 0}[name]
        weight += wt * pw
        fac = _scale4(base ** abs(pw))
        if pw < 0:
            fac = fac.inverse()
        series = fac if series is None else series * fac

    for tok in filter(None, num.split("*")):
        one(tok, False)
    for tok in filter(None, den.split("*")):
        one(tok, True)
    if theta_pow == 0:
        raise ValueError("recipe needs a theta factor to land in the "
                         "half-integral plus space")
    th = theta_scalar(4 * order) ** theta_pow
    series = th if series is None else th * series
    principal = {int(e): c for (_, e), c in series.coeffs.items() if e < 0}
    vec = plus_to_vector(series, form_lattice().disc_group(), sign=-1)
    return vec, weight, principal


# ---------------------------------------------------------------------------
# cache

def _cache_key(kind, params, order, precision):
    blob = json.dumps([kind, params, order, precision], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def cache_get(cfg: RunConfig, kind, params, order):
    if not cfg.cache_dir:
        return None
    path = os.path.join(cfg.cache_dir,
                        _cache_key(kind, params, order, cfg.precision)
                        + ".json")
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return json.load(fh)["payload"]


def cache_put(cfg: RunConfig, kind, params, order, payload):
    if not cfg.cache_dir:
        return
    os.makedirs(cfg.cache_dir, exist_ok=True)
    key = _cache_key(kind, params, order, cfg.precision)
    doc = {"kind": kind, "params": params, "order": order,
           "precision": cfg.precision, "payload": payload}
    fd, tmp = tempfile.mkstemp(dir=cfg.cache_dir, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
    os.replace(tmp, os.path.join(cfg.cache_dir, key + ".json"))


# ---------------------------------------------------------------------------
# report output

def emit(cfg: RunConfig, report):
    report = dict(report)
    report["config"] = cfg.serialize()
    report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    if cfg.fmt == "json":
        click.echo(json.dumps(report, sort_keys=True, indent=2))
    elif cfg.fmt == "csv":
        rows = report.get("rows", [])
        out = io.StringIO()
        if rows:
            writer = csv.DictWriter(out, fieldnames=sorted(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        click.echo(out.getvalue().rstrip("\n"))
    else:
        for key in sorted(report):
            if key == "rows":
                for row in report["rows"]:
                    click.echo("  " + "  ".join(f"{k}={row[k]}"
                                                for k in sorted(row)))
            else:
                click.echo(f"{key}: {report[key]}")


def _run(fn):
    """Run a command body with the error-to-exit-code contract."""
    try:
        return fn()
    except (MockSolverError, ThetaTruncationError, SeriesTailError,
            QuadratureError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PRECISION)
    except (ValueError, PoleError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)


# ---------------------------------------------------------------------------
# the command tree

@click.group()
@click.option("--prec", default=256, show_default=True,
              help="working precision in bits")
@click.option("--order", default=40, show_default=True,
              help="series truncation order, exponent units")
@click.option("--quad-order", default=48, show_default=True,
              help="Gauss-Legendre nodes per quadrature panel")
@click.option("--den-bound", default=10 ** 6, show_default=True,
              help="denominator cap for rational reconstruction")
@click.option("--tol", default="", help="override tolerance, e.g. 1e-20")
@click.option("--format", "fmt", default="json", show_default=True,
              type=click.Choice(["json", "csv", "text"]),
              help="report format (csv prints the row table only)")
@click.option("--cache-dir", default="", help="expansion cache directory")
@click.option("--threads", default=1, show_default=True,
              help="reserved; cells currently run sequentially")
@click.option("--seed", default=0, show_default=True,
              help="seed for randomized spot checks")
@click.option("--pv/--no-pv", default=True, show_default=True,
              help="principal-value mode for poles on the cycle "
                   "(experimental)")
@click.pass_context
def main(ctx, prec, order, quad_order, den_bound, tol, fmt, cache_dir,
         threads, seed, pv):
    """Cycle integrals of meromorphic modular forms: verification drivers
    and object inspection."""
    ctx.obj = RunConfig(precision=prec, order=order, quad_order=quad_order,
                        den_bound=den_bound, tol=tol, cache_dir=cache_dir,
                        fmt=fmt, threads=threads, seed=seed, pv=pv)
    gmpy2.get_context().precision = prec


def _check_disc(D):
    if D <= 0 or is_square(D):
        raise ValueError(f"D = {D} must be positive and nonsquare")


@main.command("verify-thm32")
@click.option("-D", "dlist", multiple=True, required=True,
              callback=_eat_eq_int,
              help="positive nonsquare discriminant (repeatable)")
@click.option("--tau", "taus", multiple=True, default=TAU_DEFAULTS,
              show_default=True, help="evaluation point (repeatable)")
@click.pass_obj
def verify_thm32(cfg: RunConfig, dlist, taus):
    """Check the theta splitting identity

        C_A(Theta_L) = -(4 pi/sqrt(D)) (vartheta_I (x) conj(Theta_{3/2,N})
                       v^{3/2})^L

    componentwise per (D, tau), and the vanishing of C_A(Theta_I^* dz)."""
    def body():
        for D in dlist:
            _check_disc(D)
        points = [t for t in taus if t]
        tol = mpf(cfg.tol) if cfg.tol else mpf(10) ** -20
        rows = []
        worst = mpf(0)
        for D in dlist:
            A = class_reps(D)[0]
            sd, geo = split(A), geodesic(A)
            for tau_s in points:
                tau = parse_point(tau_s)
                lhs = cycle_siegel(A, tau, tol=tol / 1000,
                                   order=cfg.quad_order)
                rhs = theta_cycle_factorization(sd, tau, cfg.order,
                                                tol / 10 ** 10)
                dev = max(abs(x - y) for x, y in zip(lhs, rhs))
                star, _ = cycle_theta_star(sd, geo, tau, tol / 1000,
                                           order=cfg.quad_order)
                star_max = max(abs(v) for v in star)
                worst = max(worst, dev, star_max / 100)
                rows.append({
                    "D": D, "A": str(A.triple()), "tau": tau_s,
                    "lhs_0": str(lhs[0]), "rhs_0": str(rhs[0]),
                    "deviation": str(dev), "theta_star_max": str(star_max),
                    "pass": bool(dev < tol and star_max < 100 * tol),
                })
        report = {
            "identity": "C_A(Theta_L) = -(4 pi/sqrt(D)) "
                        "(vartheta_I x conj(Theta_{3/2,N}) v^(3/2))^L",
            "tolerance": str(tol),
            "rows": rows,
            "max_deviation": str(worst),
            "pass": all(r["pass"] for r in rows),
        }
        emit(cfg, report)
        sys.exit(EXIT_PASS if report["pass"] else EXIT_VERIFY)

    _run(body)


@main.command("verify-rationality")
@click.option("-k", required=True, callback=_eat_eq_int,
              help="odd weight parameter >= 3")
@click.option("-D", "dlist", multiple=True, required=True,
              callback=_eat_eq_int)
@click.option("-g", "gspec", default="theta*E4*E6/Delta", show_default=True,
              callback=_eat_eq,
              help="input form as a product recipe (theta at tau, level-one "
                   "factors at 4 tau)")
@click.option("--coeff", "synthetic", multiple=True,
              help="synthetic principal-part override 'd=value' "
                   "(skips the closed form)")
@click.pass_obj
def verify_rationality(cfg: RunConfig, k, dlist, gspec, synthetic):
    """Check that the cycle integrals C_A(f) attached to the principal part
    of g are rational and match the Rankin-Cohen closed form."""
    def body():
        if k % 2 == 0 or k < 3:
            raise ValueError("rationality verification needs odd k >= 3")
        for D in dlist:
            _check_disc(D)
        if synthetic:
            coeffs = {}
            for item in synthetic:
                d_s, _, v = item.partition("=")
                coeffs[int(d_s)] = Fraction(v)
            gvec = None
        else:
            gvec, weight, coeffs = parse_recipe(gspec, cfg.order)
            if weight != Fraction(3, 2) - k:
                raise ValueError(
                    f"recipe {gspec!r} has weight {weight}, "
                    f"need {Fraction(3, 2) - k} for k = {k}")
        rows = []
        ok = True
        for D in dlist:
            A = class_reps(D)[0]
            res = cycle_merom(A, k, coeffs, den_bound=cfg.den_bound,
                              order=cfg.quad_order, pv=cfg.pv)
            row = {"D": D, "A": str(A.triple()), "value": str(res.value),
                   "error": str(res.error),
                   "poles": len(res.poles),
                   "prefactor": f"-(4*{D})^{(k - 1) // 2}"}
            if res.recognized is None:
                row["recognized"] = "no rational found"
                row["pass"] = False
            else:
                row["recognized"] = str(res.recognized)
                row["pass"] = True
            if gvec is not None:
                cf = closed_form_thm41(A, k, gvec)
                row["closed_form"] = str(cf)
                row["pass"] = bool(row["pass"] and res.recognized == cf)
            rows.append(row)
            ok = ok and row["pass"]
        emit(cfg, {"k": k, "g": gspec if gvec is not None else "synthetic",
                   "rows": rows, "pass": ok})
        sys.exit(EXIT_PASS if ok else EXIT_VERIFY)

    _run(body)


@main.group()
def objects():
    """Inspect the underlying objects (forms, geodesics, lattices,
    series, evaluations)."""


@objects.group()
def forms():
    """Binary quadratic form utilities."""


@forms.command("reduce")
@click.option("-Q", "q_s", required=True, callback=_eat_eq,
              help="form a,b,c (posdef)")
@click.pass_obj
def forms_reduce(cfg, q_s):
    def body():
        Q = parse_form(q_s)
        R, g = reduce_posdef(Q)
        emit(cfg, {"reduced": list(R.triple()), "transform": [list(r) for r in g]})

    _run(body)


@forms.command("classes")
@click.option("-d", required=True, callback=_eat_eq_int,
              help="discriminant (negative: positive definite classes)")
@click.pass_obj
def forms_classes(cfg, d):
    def body():
        emit(cfg, {"d": d,
                   "classes": [list(Q.triple()) for Q in class_reps(d)]})

    _run(body)


@forms.command("automorph")
@click.option("-A", "a_s", required=True, callback=_eat_eq,
              help="indefinite form a,b,c")
@click.pass_obj
def forms_automorph(cfg, a_s):
    def body():
        M = automorph(parse_form(a_s))
        emit(cfg, {"automorph": [list(r) for r in M]})

    _run(body)


@objects.group("geodesic")
def geodesic_group():
    """Closed geodesic data."""


@geodesic_group.command("info")
@click.option("-A", "a_s", required=True, callback=_eat_eq)
@click.pass_obj
def geodesic_info(cfg, a_s):
    def body():
        emit(cfg, geodesic(parse_form(a_s)).serialize())

    _run(body)


@objects.group("lattice")
def lattice_group():
    """Signature (1,2) lattice data."""


@lattice_group.command("split")
@click.option("-A", "a_s", required=True, callback=_eat_eq)
@click.pass_obj
def lattice_split(cfg, a_s):
    def body():
        emit(cfg, split(parse_form(a_s)).serialize())

    _run(body)


@objects.group("series")
def series_group():
    """Exact q-series expansions (cached when --cache-dir is set)."""


@series_group.command("hecke")
@click.option("-A", "a_s", required=True, callback=_eat_eq)
@click.pass_obj
def series_hecke(cfg, a_s):
    def body():
        A = parse_form(a_s)
        payload = cache_get(cfg, "hecke", list(A.triple()), cfg.order)
        if payload is None:
            payload = hecke_theta_series(split(A), cfg.order).serialize()
            cache_put(cfg, "hecke", list(A.triple()), cfg.order, payload)
        emit(cfg, {"series": payload})

    _run(body)


@series_group.command("unary")
@click.option("-A", "a_s", required=True, callback=_eat_eq)
@click.option("--weight", default="3/2", show_default=True)
@click.pass_obj
def series_unary(cfg, a_s, weight):
    def body():
        A = parse_form(a_s)
        wt = _parse_rational(weight)
        params = [list(A.triple()), str(wt)]
        payload = cache_get(cfg, "unary", params, cfg.order)
        if payload is None:
            payload = unary_theta_series(split(A), wt, cfg.order).serialize()
            cache_put(cfg, "unary", params, cfg.order, payload)
        emit(cfg, {"series": payload})

    _run(body)


@series_group.command("plus-basis")
@click.option("-g", "gspec", default="theta*E4*E6/Delta", show_default=True,
              help="product recipe for the plus-space form")
@click.pass_obj
def series_plus_basis(cfg, gspec):
    def body():
        payload = cache_get(cfg, "plus-basis", gspec, cfg.order)
        if payload is None:
            vec, weight, _ = parse_recipe(gspec, cfg.order)
            payload = {"weight": str(weight), "series": vec.serialize()}
            cache_put(cfg, "plus-basis", gspec, cfg.order, payload)
        emit(cfg, payload)

    _run(body)


@series_group.command("mock")
@click.option("-A", "a_s", required=True, callback=_eat_eq)
@click.option("--order", "morder", default=25, show_default=True)
@click.pass_obj
def series_mock(cfg, a_s, morder):
    def body():
        A = parse_form(a_s)
        payload = cache_get(cfg, "mock", list(A.triple()), morder)
        if payload is None:
            payload = solve_mock(split(A), order=morder,
                                 den_bound=cfg.den_bound).serialize()
            cache_put(cfg, "mock", list(A.triple()), morder, payload)
        emit(cfg, payload)

    _run(body)


@objects.group("eval")
def eval_group():
    """Pointwise evaluations."""


@eval_group.command("f")
@click.option("-k", required=True, callback=_eat_eq_int)
@click.option("-d", required=True, callback=_eat_eq_int)
@click.option("-z", "z_s", required=True, callback=_eat_eq,
              help="point, e.g. 1/5+2i")
@click.pass_obj
def eval_f(cfg, k, d, z_s):
    def body():
        val = f_eval(k, d, parse_point(z_s))
        emit(cfg, {"k": k, "d": d, "z": z_s, "value": str(val)})

    _run(body)


@eval_group.command("siegel")
@click.option("--tau", "tau_s", required=True)
@click.option("-z", "z_s", required=True, callback=_eat_eq)
@click.pass_obj
def eval_siegel(cfg, tau_s, z_s):
    def body():
        tol = mpf(cfg.tol) if cfg.tol else mpf(10) ** -30
        vals = siegel_theta(form_lattice(), parse_point(tau_s),
                            parse_point(z_s), tol)
        emit(cfg, {"tau": tau_s, "z": z_s,
                   "components": [str(v) for v in vals]})

    _run(body)


if __name__ == "__main__":
    main()
