"""Normal-ordered symbols on the tangent bundle and their quantization.

The quantization parameter h = 1/N is kept formal: operators are h-series
of differential operators on the base, and a numeric N is applied only by
evaluation.  ``Symbol`` payloads are fibrewise polynomials with base-jet
coefficients.
"""

from __future__ import annotations

from math import factorial

from gmpy2 import mpq

from .core.diffops import DiffOp, diffop_compose
from .core.jets import Jet, VarSet
from .core.nu import POLY, NuObject
from .errors import NotASymbolError, StructuralError
from .geometry import ChartGeometry

__all__ = [
    "Symbol", "QuantizedOp", "quantize", "dequantize", "symbol_mul", "jk_conjugation",
    "formalize", "hseries", "to_h",
]


class Symbol:
    """sum over (u, v) of eta^u * f_{u,v}(z, zb) * etab^v."""

    __slots__ = ("base", "terms")

    def __init__(self, base: VarSet, terms: dict | None = None):
        self.base = base
        # zero coefficients known only to finite degree are kept
        self.terms = {k: f for k, f in (terms or {}).items() if f or not f.is_exact}

    @classmethod
    def from_jet(cls, f: Jet) -> "Symbol":
        z = tuple([0] * f.vars.m)
        return cls(f.vars, {(z, z): f})

    @classmethod
    def monomial(cls, base: VarSet, u, v, f=None) -> "Symbol":
        return cls(base, {(tuple(u), tuple(v)): f if f is not None else Jet.const(base, 1)})

    @classmethod
    def eta(cls, base, p):
        u = [0] * base.m
        u[p] = 1
        return cls.monomial(base, u, [0] * base.m)

    @classmethod
    def etab(cls, base, q):
        v = [0] * base.m
        v[q] = 1
        return cls.monomial(base, [0] * base.m, v)

    @classmethod
    def from_tangent(cls, F: Jet, base: VarSet | None = None, max_fibre: int | None = None,
                     min_fibre: int = 0) -> "Symbol":
        """Read a tangent jet as a symbol.

        When the symbol is known to live in fibre degrees ``min_fibre`` to
        ``max_fibre``, the groups there that a truncated jet pins to zero are
        kept as inexact zeros; without ``max_fibre``, absent groups count as
        exact zeros.
        """
        ts = F.vars
        base = base or VarSet("base", ts.m)
        fib = ts.fibre_indices
        out = {}
        m = ts.m
        groups = F.split(fib)
        if max_fibre is not None and not F.is_exact:
            for d in range(min_fibre, max_fibre + 1):
                for exps in _exps(2 * m, d):
                    if exps not in groups:
                        # a group beyond the jet's validity is wholly unknown
                        groups[exps] = Jet.zero(ts, max(F.valid - d, -1))
        for exps, part in groups.items():
            out[(exps[:m], exps[m:])] = part.project(base)
        return cls(base, out)

    def to_tangent(self, ts: VarSet | None = None) -> Jet:
        ts = ts or VarSet("tangent", self.base.m)
        out = Jet.zero(ts)
        for (u, v), f in sorted(self.terms.items()):
            exps = [0] * (2 * ts.m) + list(u) + list(v)
            out = out + f.lift(ts) * Jet.monomial(ts, exps)
        return out

    def fibre_degree(self) -> int:
        return max((sum(u) + sum(v) for (u, v), f in self.terms.items() if f), default=-1)

    def zero_section(self) -> Jet:
        z = tuple([0] * self.base.m)
        return self.terms.get((z, z), Jet.zero(self.base))

    # linear structure ------------------------------------------------------
    def __bool__(self):
        return any(self.terms.values())

    @property
    def is_exact(self) -> bool:
        return all(f.is_exact for f in self.terms.values())

    def __add__(self, other):
        if not isinstance(other, Symbol):
            other = Symbol.from_jet(other if isinstance(other, Jet) else Jet.const(self.base, other))
        out = dict(self.terms)
        for k, f in other.terms.items():
            out[k] = out[k] + f if k in out else f
        return Symbol(self.base, out)

    __radd__ = __add__

    def __neg__(self):
        return Symbol(self.base, {k: -f for k, f in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        """Scaling by a scalar or pointwise by a base jet (the commutative product)."""
        if isinstance(s, Symbol):
            return Symbol.from_tangent(self.to_tangent() * s.to_tangent(), self.base)
        return Symbol(self.base, {k: f * s for k, f in self.terms.items()})

    __rmul__ = __mul__

    def agrees(self, other, upto=None) -> bool:
        if not isinstance(other, Symbol):
            other = Symbol(self.base) if not other else Symbol.from_jet(other)
        for k in set(self.terms) | set(other.terms):
            a = self.terms.get(k)
            b = other.terms.get(k)
            if a is None:
                a = Jet.zero(self.base, b.valid)
            if b is None:
                b = Jet.zero(self.base, a.valid)
            if not a.agrees(b, upto):
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, Symbol) and self.base == other.base and self.terms == other.terms

    __hash__ = None

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (u, v), f in sorted(self.terms.items(), key=lambda kv: (sum(kv[0][0]) + sum(kv[0][1]), kv[0])):
            mono = _fibre_str(self.base, u, v)
            parts.append(f"[{f.to_text()}]" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def __repr__(self):
        return f"Symbol({self.to_text()})"


def _exps(n, d):
    if n == 1:
        yield (d,)
        return
    for k in range(d + 1):
        for rest in _exps(n - 1, d - k):
            yield (k,) + rest


def _fibre_str(base, u, v):
    out = []
    for stem, e in (("eta", u), ("etab", v)):
        for k, x in enumerate(e):
            if x:
                name = stem if base.m == 1 else f"{stem}{k + 1}"
                out.append(name if x == 1 else f"{name}^{x}")
    return "*".join(out)


def hseries(x, n=0) -> NuObject:
    return x if isinstance(x, NuObject) else NuObject.single(x, n, POLY, "h")


def to_h(x) -> NuObject:
    """Wrap a Symbol (or jet) as an h-series of symbols."""
    if isinstance(x, NuObject):
        return x
    if isinstance(x, Jet):
        x = Symbol.from_jet(x)
    return hseries(x)


class QuantizedOp:
    """A quantized operator: an h-series of base operators, optionally at h = 1/N."""

    __slots__ = ("series", "N")

    def __init__(self, series: NuObject, N: int | None = None):
        self.series = series
        self.N = N

    @property
    def op(self) -> DiffOp:
        if self.N is None:
            raise StructuralError("a formal quantization has no single numeric operator")
        return self.series.evaluate(mpq(1, self.N))

    def __matmul__(self, other: "QuantizedOp") -> "QuantizedOp":
        if self.N != other.N:
            raise StructuralError("operators quantized at different N")
        return QuantizedOp(self.series.combine(other.series, diffop_compose), self.N)

    def agrees(self, other) -> bool:
        if isinstance(other, QuantizedOp):
            if self.N is None and other.N is None:
                return self.series.agrees(other.series)
            return self.op.agrees(other.op)
        return self.op.agrees(other)


# generators -----------------------------------------------------------------------

def _eta_hat(chart: ChartGeometry, p: int) -> NuObject:
    vs = chart.base
    op = DiffOp.zero(vs)
    for l in range(chart.m):
        op = op + DiffOp.partial(vs, vs.zb(l), coeff=-chart.gu(l, p))
    return NuObject({1: op}, POLY, 0, "h")


def _etab_hat(chart: ChartGeometry, q: int) -> NuObject:
    vs = chart.base
    op = DiffOp.zero(vs)
    mult = Jet.zero(vs)
    phi = chart.Phi_minus1
    for k in range(chart.m):
        op = op + DiffOp.partial(vs, vs.z(k), coeff=chart.gu(q, k))
        mult = mult - chart.gu(q, k) * phi.diff(vs.z(k))
    return NuObject({1: op, 0: DiffOp.mult(mult)}, POLY, 0, "h")


def _power(chart, which, multi) -> NuObject:
    key = ("hat", which, tuple(multi))
    cache = chart._cache
    if key in cache:
        return cache[key]
    vs = chart.base
    if not any(multi):
        res = NuObject.single(DiffOp.identity(vs), 0, POLY, "h")
    else:
        i = next(t for t, e in enumerate(multi) if e)
        rest = list(multi)
        rest[i] -= 1
        gen = _eta_hat(chart, i) if which == "eta" else _etab_hat(chart, i)
        res = gen.combine(_power(chart, which, rest), diffop_compose)
    cache[key] = res
    return res


def _quantize_symbol(P: Symbol, chart: ChartGeometry) -> NuObject:
    total = NuObject({}, POLY, 0, "h")
    for (u, v), f in sorted(P.terms.items()):
        U = _power(chart, "eta", u)
        V = _power(chart, "etab", v)
        mid = U.map(lambda A: diffop_compose(A, DiffOp.mult(f)))
        total = total + mid.combine(V, diffop_compose)
    return total


def quantize(P, chart: ChartGeometry, N: int | None = None) -> QuantizedOp:
    """Normal-ordered quantization; P is a Symbol, a base jet or an h-series of symbols."""
    P = to_h(P)
    total = NuObject({}, POLY, 0, "h")
    for e, sym in P.terms.items():
        total = total + _quantize_symbol(sym, chart).shift(e)
    if N is not None:
        return QuantizedOp(NuObject.single(total.evaluate(mpq(1, N)), 0, POLY, "h"), N)
    return QuantizedOp(total, None)


def _principal(chart: ChartGeometry, alpha, beta, c: Jet) -> Symbol:
    """c * prod_k (g_{k qbar} etab^q)^alpha_k * prod_l (-g_{p lbar} eta^p)^beta_l."""
    ts = chart.tangent
    out = c.lift(ts)
    for k, e in enumerate(alpha):
        if e:
            lin = sum((chart.gl(k, q, ts) * Jet.var(ts, ts.fb(q)) for q in range(chart.m)), Jet.zero(ts))
            out = out * lin ** e
    for l, e in enumerate(beta):
        if e:
            lin = sum((chart.gl(p, l, ts) * Jet.var(ts, ts.f(p)) for p in range(chart.m)), Jet.zero(ts))
            out = out * (-lin) ** e
    o = sum(alpha) + sum(beta)
    return Symbol.from_tangent(out, chart.base, max_fibre=o, min_fibre=o)


def dequantize(D, chart: ChartGeometry, N: int | None = None) -> NuObject:
    """Inverse of ``quantize``: peel off the top-order part, whose symbol is read off
    from the principal symbols of the generators, and recurse on the remainder.

    Returns an h-series of symbols (at h^0 only, when N is numeric).
    """
    if isinstance(D, QuantizedOp):
        N = D.N if N is None else N
        R = D.series
    elif isinstance(D, DiffOp):
        R = hseries(D)
    else:
        R = D
    vs = chart.base
    m = chart.m
    result = NuObject({}, POLY, 0, "h")
    top = max((vs.degree(k) for op in R.terms.values() for k in op.terms), default=-1)
    for o in range(top, -1, -1):
        piece = NuObject({}, POLY, 0, "h")
        for e, op in R.terms.items():
            for k, c in op.terms.items():
                if vs.degree(k) != o:
                    continue
                ex = vs.unpack(k)
                sym = _principal(chart, ex[:m], ex[m:], c)
                if N is None:
                    if e - o < 0 and c:
                        raise NotASymbolError(f"order-{o} term carries h^{e}: not polynomial in h")
                    if e - o >= 0:
                        piece = piece + NuObject({e - o: sym}, POLY, 0, "h")
                else:
                    piece = piece + NuObject({e: sym * (mpq(N) ** o)}, POLY, 0, "h")
        Q = quantize(piece, chart, N).series if N is None else hseries(quantize(piece, chart, N).op)
        result = result + piece
        R = R - Q
        # the order-o part must now vanish (up to the precision it is known to)
        rest = {}
        for e, op in R.terms.items():
            if any(c for k, c in op.terms.items() if vs.degree(k) >= o):
                raise NotASymbolError(f"order-{o} part did not cancel: operator is not a quantized symbol")
            rest[e] = DiffOp(vs, {k: c for k, c in op.terms.items() if vs.degree(k) < o})
        R = NuObject(rest, POLY, 0, "h")
    return result


def symbol_mul(P, Q, chart: ChartGeometry, N: int | None = None) -> NuObject:
    """P *_h Q, defined by quantize(P *_h Q) = quantize(P) quantize(Q)."""
    A = quantize(P, chart, N)
    B = quantize(Q, chart, N)
    return dequantize(A @ B, chart, N)


def jk_conjugation(f: Jet, chart: ChartGeometry, N: int | None = None, side: str = "left",
                   bound: int = 3, param: str = "h") -> NuObject | DiffOp:
    """J f J^-1 (left) or K f K^-1 (right) on the tangent variables, as a series in ``param``.

    Terms with more than ``bound`` fibre derivatives are dropped; the result is
    exact on symbols of fibre degree <= bound.
    """
    ts = chart.tangent
    X = DiffOp.zero(ts)
    for l in range(chart.m):
        for k in range(chart.m):
            if side == "left":
                X = X + DiffOp(ts, {ts.units[ts.f(k)] + ts.units[ts.zb(l)]: chart.gu(l, k, ts)})
            elif side == "right":
                X = X + DiffOp(ts, {ts.units[ts.z(k)] + ts.units[ts.fb(l)]: chart.gu(l, k, ts)})
            else:
                raise ValueError(f"unknown side {side!r}")
    fib = ts.fibre_indices
    A = DiffOp.mult(f.lift(ts))
    terms = {0: A}
    k = 0
    while True:
        k += 1
        A = (diffop_compose(X, A) - diffop_compose(A, X)).truncate_order(fib, bound)
        if not A:
            break
        terms[k] = A.map_coeffs(lambda c, k=k: c.scale(mpq(1, factorial(k))))
    series = NuObject(terms, POLY, 0, param)
    if N is not None:
        return series.evaluate(mpq(1, N), DiffOp.zero(ts))
    return series


def formalize(P) -> NuObject:
    """Replace h by nu; symbols become jets on the tangent variables."""
    P = to_h(P)
    return NuObject({e: s.to_tangent() for e, s in P.terms.items()}, P.cap, P.log, "nu")
