"""Command-line front end.

    deforma <command> --spec chart.json [--order K] [--degree D] [--json out.json]

Exit status is 0 when every check passes, 1 on a verification failure and 2 on
bad input (parse errors, degenerate or too-shallow charts).
"""

from __future__ import annotations

import ast
import hashlib
import json
import sys
import time

import click

from .core.diffops import DiffOp
from .core.jets import Jet, VarSet
from .core.nu import NuObject
from .core.scalar import GaussianRational, I, parse_rational, scalar_str
from .errors import DegenerateChartError, DeformaError, TruncationError
from .geometry import ChartGeometry, base_potential, build_chart, build_tm_potentials
from .star import apply_series, berezin, berezin_inverse, build_sov_star, canonical_trace_density, derive_star, \
    primed_direct, tm_star
from .symbols import Symbol, symbol_mul
from .toeplitz import build_toeplitz

SCHEMA = 1

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad user input; ``locus`` names the offending field or line."""

    def __init__(self, message, locus=None):
        super().__init__(message)
        self.locus = locus


# chart files ---------------------------------------------------------------------------

class ChartSpec:
    __slots__ = ("m", "potential", "jet_degree", "nu_order", "exact", "raw")

    def __init__(self, m, potential, jet_degree, nu_order, exact=False, raw=None):
        self.m = m
        self.potential = potential
        self.jet_degree = jet_degree
        self.nu_order = nu_order
        self.exact = exact
        self.raw = raw

    @classmethod
    def parse(cls, text: str) -> "ChartSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON: {e.msg}", f"line {e.lineno}, column {e.colno}") from None
        if not isinstance(doc, dict):
            raise InputError("chart spec must be a JSON object", "$")
        m = _int_field(doc, "m", minimum=1)
        jet_degree = _int_field(doc, "jet_degree", minimum=0)
        nu_order = _int_field(doc, "nu_order", minimum=0)
        exact = doc.get("exact", False)
        if not isinstance(exact, bool):
            raise InputError("must be true or false", "exact")
        pot = doc.get("potential")
        if not isinstance(pot, list) or not pot:
            raise InputError("must be a non-empty list", "potential")
        terms = []
        for n, t in enumerate(pot):
            where = f"potential[{n}]"
            if not isinstance(t, dict):
                raise InputError("must be an object", where)
            powers = t.get("powers")
            if (not isinstance(powers, list) or len(powers) != 2 * m
                    or not all(isinstance(p, int) and not isinstance(p, bool) and p >= 0 for p in powers)):
                raise InputError(f"must be a list of {2 * m} non-negative integers", where + ".powers")
            re = _rational_field(t, "re", where)
            im = _rational_field(t, "im", where)
            terms.append((tuple(powers), re, im))
        return cls(m, terms, jet_degree, nu_order, exact, doc)

    def with_overrides(self, order=None, degree=None) -> "ChartSpec":
        return ChartSpec(self.m, self.potential, self.jet_degree if degree is None else degree,
                         self.nu_order if order is None else order, self.exact, self.raw)

    def canonical(self) -> dict:
        return {
            "m": self.m,
            "potential": [{"powers": list(p), "re": str(re), "im": str(im)} for p, re, im in self.potential],
            "jet_degree": self.jet_degree,
            "nu_order": self.nu_order,
            "exact": self.exact,
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self):
        need = self.nu_order + 2
        if self.jet_degree < need:
            raise TruncationError(f"jet_degree {self.jet_degree} is too shallow for nu_order {self.nu_order}",
                                  required=need)

    def build(self) -> ChartGeometry:
        self.validate()
        vs = VarSet("base", self.m)
        phi = Jet.zero(vs)
        for powers, re, im in self.potential:
            c = GaussianRational(re, im) if im else re
            phi = phi + Jet.monomial(vs, powers, c)
        if not self.exact:
            phi = phi.truncate(self.jet_degree).with_valid(self.jet_degree)
        return build_chart(phi, self.m, self.jet_degree)


def _int_field(doc, name, minimum=None):
    if name not in doc:
        raise InputError("missing field", name)
    v = doc[name]
    if not isinstance(v, int) or isinstance(v, bool):
        raise InputError("must be an integer", name)
    if minimum is not None and v < minimum:
        raise InputError(f"must be >= {minimum}", name)
    return v


def _rational_field(t, name, where):
    v = t.get(name, "0")
    if not isinstance(v, str):
        raise InputError('must be a rational string such as "3/4"', f"{where}.{name}")
    try:
        return parse_rational(v)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"not an exact rational: {v!r}", f"{where}.{name}") from None


# operand expressions ------------------------------------------------------------------

_ALIASES = {"z̄": "zb", "η̄": "etab", "η": "eta"}


def parse_operand(text: str, vs: VarSet, what: str = "operand") -> Jet:
    """Polynomial in the chart variables: ``z*zb + 1/2*z^2``, ``z̄``, ``i*eta``."""
    src = text
    for a, b in _ALIASES.items():
        src = src.replace(a, b)
    src = src.replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as e:
        raise InputError(f"cannot parse {text!r}", f"{what}, column {e.offset}") from None
    names = {n: i for i, n in enumerate(vs.names)}

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return Jet.const(vs, node.value)
        if isinstance(node, ast.Name):
            if node.id == "i":
                return Jet.const(vs, I)
            if node.id in names:
                return Jet.var(vs, names[node.id])
            raise InputError(f"unknown variable {node.id!r}; expected one of {', '.join(vs.names)}",
                             f"{what}, column {node.col_offset + 1}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div) and b.degree() <= 0 and b:
                return a.scale(1 / b.const_term())
            if isinstance(node.op, ast.Pow) and b.degree() <= 0:
                e = b.const_term()
                if isinstance(e, GaussianRational) or e.denominator != 1 or e < 0:
                    raise InputError("exponent must be a non-negative integer",
                                     f"{what}, column {node.col_offset + 1}")
                return a ** int(e)
        raise InputError("unsupported expression", f"{what}, column {getattr(node, 'col_offset', 0) + 1}")

    return ev(tree)


# serialization -----------------------------------------------------------------------

def payload_json(p):
    if isinstance(p, Jet):
        return p.to_json()
    if isinstance(p, Symbol):
        return [{"eta": list(u), "etab": list(v), "coeff": f.to_json()} for (u, v), f in sorted(p.terms.items())]
    if isinstance(p, DiffOp):
        return [{"d": list(p.vars.unpack(k)), "coeff": c.to_json()} for k, c in sorted(p.terms.items())]
    return scalar_str(p)


def series_json(x: NuObject) -> dict:
    return {
        "param": x.name,
        "log": x.log,
        "truncated_after": None if x.cap >= 2 ** 20 else x.cap,
        "terms": [{"power": n, "value": payload_json(x.terms[n])} for n in sorted(x.terms)],
    }


def _dump(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# command plumbing ---------------------------------------------------------------------

def _common(f):
    f = click.option("--spec", "spec_path", required=True, type=click.Path(dir_okay=False),
                     help="JSON chart description.")(f)
    f = click.option("--order", "order", type=click.IntRange(0), default=None, help="Override nu_order.")(f)
    f = click.option("--degree", "degree", type=click.IntRange(0), default=None, help="Override jet_degree.")(f)
    f = click.option("--json", "json_out", type=click.Path(dir_okay=False, allow_dash=True), default=None,
                     help="Write the JSON report here ('-' for stdout).")(f)
    f = click.option("--timing", is_flag=True, help="Include wall-clock timing (breaks byte-determinism).")(f)
    return f


def _load_spec(path, order, degree) -> ChartSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(f"cannot read spec: {e.strerror}", path) from None
    return ChartSpec.parse(text).with_overrides(order, degree)


def _run(command, spec_path, order, degree, json_out, timing, args: dict, body):
    t0 = time.perf_counter()
    report = {"schema": SCHEMA, "command": command, "arguments": args}
    try:
        spec = _load_spec(spec_path, order, degree)
        report["inputs"] = {"spec_sha256": spec.digest(), "spec": spec.canonical()}
        chart = spec.build()
        text, outputs, checks = body(spec, chart)
    except InputError as e:
        return _finish_error(report, "input", str(e), e.locus, json_out)
    except DegenerateChartError as e:
        return _finish_error(report, "degenerate-chart", str(e), "potential", json_out)
    except TruncationError as e:
        locus = "jet_degree" + (f" (required >= {e.required})" if e.required is not None else "")
        return _finish_error(report, "depth", str(e), locus, json_out)
    except DeformaError as e:
        # the engine itself gave up: a failed computation, not bad input
        _finish_error(report, type(e).__name__, str(e), None, json_out)
        return EXIT_FAIL
    report["outputs"] = outputs
    report["verification"] = checks
    ok = all(c["passed"] for c in checks)
    report["passed"] = ok
    if timing:
        report["timing_seconds"] = round(time.perf_counter() - t0, 3)
    # with --json - the machine block owns stdout
    err = json_out == "-"
    click.echo(text, err=err)
    for c in checks:
        click.echo(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} ({c['cases']} cases)", err=err)
        if c.get("first_failure"):
            click.echo(f"  first failure: {c['first_failure']['case']}: {c['first_failure']['detail']}", err=err)
    _write(report, json_out)
    return EXIT_OK if ok else EXIT_FAIL


def _finish_error(report, kind, message, locus, json_out):
    report["error"] = {"kind": kind, "message": message, "locus": locus}
    click.echo(f"error ({kind}): {message}" + (f" [at {locus}]" if locus else ""), err=True)
    _write(report, json_out)
    return EXIT_INPUT


def _write(report, json_out):
    if json_out is None:
        return
    blob = _dump(report)
    if json_out == "-":
        click.echo(blob, nl=False)
    else:
        with open(json_out, "w", encoding="utf-8") as fh:
            fh.write(blob)


def _check_json(rep) -> dict:
    out = {"name": rep.name, "passed": rep.passed, "cases": rep.cases}
    if rep.failures:
        out["first_failure"] = {"case": rep.failures[0]["case"], "detail": rep.failures[0]["detail"]}
    if rep.witnesses:
        out["witnesses"] = rep.witnesses
    return out


def _product(chart, which, K):
    if which == "tm":
        return tm_star(chart, K)
    S = build_sov_star(base_potential(chart), K, D=chart.D, label="M")
    if which == "m":
        return S
    return derive_star(S, {"dual": "dual", "prime": "conjugate_by_B"}[which])


# commands ------------------------------------------------------------------------------

@click.group()
@click.version_option(package_name="artifact")
def main():
    """Exact formal deformation quantization on Kahler charts."""


@main.command("star-mul")
@click.argument("phi")
@click.argument("psi")
@click.option("--star", "which", type=click.Choice(["m", "tm", "dual", "prime"]), default="m", show_default=True)
@_common
def star_mul_cmd(phi, psi, which, spec_path, order, degree, json_out, timing):
    """Star product of two polynomial operands."""

    def body(spec, chart):
        vs = chart.tangent if which == "tm" else chart.base
        a, b = parse_operand(phi, vs, "phi"), parse_operand(psi, vs, "psi")
        prod = _product(chart, which, spec.nu_order).mul(a, b)
        return prod.to_text(), {"product": series_json(prod)}, []

    sys.exit(_run("star-mul", spec_path, order, degree, json_out, timing,
                  {"phi": phi, "psi": psi, "star": which}, body))


@main.command("berezin")
@click.argument("f")
@click.option("--inverse", is_flag=True, help="Apply B^-1 instead of B.")
@_common
def berezin_cmd(f, inverse, spec_path, order, degree, json_out, timing):
    """Berezin transform of the product on M applied to F."""

    def body(spec, chart):
        a = parse_operand(f, chart.base, "f")
        B = berezin(_product(chart, "m", spec.nu_order))
        out = apply_series(berezin_inverse(B) if inverse else B, a)
        return out.to_text(), {"result": series_json(out)}, []

    sys.exit(_run("berezin", spec_path, order, degree, json_out, timing, {"f": f, "inverse": inverse}, body))


@main.command("symbol-product")
@click.argument("p")
@click.argument("q")
@click.option("-N", "--N", "N", type=click.IntRange(1), default=None, help="Evaluate at h = 1/N (default: formal h).")
@_common
def symbol_product_cmd(p, q, N, spec_path, order, degree, json_out, timing):
    """Normal-ordered symbol product P *_h Q of fibrewise polynomials."""

    def body(spec, chart):
        ts = chart.tangent
        P = Symbol.from_tangent(parse_operand(p, ts, "p"), chart.base)
        Q = Symbol.from_tangent(parse_operand(q, ts, "q"), chart.base)
        out = symbol_mul(P, Q, chart, N)
        return out.to_text(), {"product": series_json(out)}, []

    sys.exit(_run("symbol-product", spec_path, order, degree, json_out, timing, {"p": p, "q": q, "N": N}, body))


@main.command("trace-density")
@click.option("--star", "which", type=click.Choice(["m", "tm"]), default="m", show_default=True)
@_common
def trace_density_cmd(which, spec_path, order, degree, json_out, timing):
    """Canonical dual potential and trace density."""

    def body(spec, chart):
        if which == "tm":
            td = canonical_trace_density(tm_star(chart, spec.nu_order), build_tm_potentials(chart, "xi"))
        else:
            td = canonical_trace_density(_product(chart, "m", spec.nu_order), base_potential(chart))
        text = f"Psi = {td.Psi.value.to_text()}\nmu = {td.mu.to_text()}"
        return text, {"Psi": series_json(td.Psi.value), "mu": series_json(td.mu)}, []

    sys.exit(_run("trace-density", spec_path, order, degree, json_out, timing, {"star": which}, body))


@main.command("toeplitz")
@click.argument("phi")
@click.argument("psi")
@click.option("--kind", type=click.Choice(["q", "t"]), default="q", show_default=True,
              help="q: Q_phi . Q_psi against Q_(phi*psi); t: T_phi . T_psi against T_(phi*'psi).")
@_common
def toeplitz_cmd(phi, psi, kind, spec_path, order, degree, json_out, timing):
    """Bullet product of two Q or T elements, checked against the star side."""

    def body(spec, chart):
        from .toeplitz import CheckReport

        M = build_toeplitz(chart, spec.nu_order)
        a, b = parse_operand(phi, chart.base, "phi"), parse_operand(psi, chart.base, "psi")
        if kind == "q":
            lhs = M.bullet(M.q_element(a), M.q_element(b))
            rhs = M.q_element(M.star.mul(a, b))
        else:
            lhs = M.bullet(M.toeplitz_element(a), M.toeplitz_element(b))
            rhs = M.toeplitz_element(primed_direct(M.star, a, b))
        rep = CheckReport(f"toeplitz-{kind}")
        rep.record(lhs.agrees(rhs), f"{kind.upper()}_phi . {kind.upper()}_psi", lhs.first_difference(rhs))
        return lhs.F.value.to_text(), {"bullet": series_json(lhs.F.value)}, [_check_json(rep)]

    sys.exit(_run("toeplitz", spec_path, order, degree, json_out, timing,
                  {"phi": phi, "psi": psi, "kind": kind}, body))


def _suite_choice():
    from .verify import SUITE_NAMES
    return click.Choice(list(SUITE_NAMES))


@main.command("verify")
@click.argument("suite", type=_suite_choice())
@click.option("--seed", type=int, default=0, show_default=True)
@_common
def verify_cmd(suite, seed, spec_path, order, degree, json_out, timing):
    """Run a named verification suite ('all' runs every suite)."""
    from .verify import SUITES, run_suite

    def body(spec, chart):
        names = list(SUITES) if suite == "all" else [suite]
        checks = [_check_json(run_suite(n, chart, spec.nu_order, seed)) for n in names]
        return f"verify {suite}: {sum(c['passed'] for c in checks)}/{len(checks)} suites pass", {}, checks

    sys.exit(_run("verify", spec_path, order, degree, json_out, timing, {"suite": suite, "seed": seed}, body))


if __name__ == "__main__":
    main()
