"""Fibrewise Fourier transfer, source/target maps and the diagonal model.

Three pictures of a singular element are used:

* ``DeltaElement``: a nu-series of tangent jets in which the fibre monomial
  eta^A etab^B stands for the stack d_eta^A d_etab^B [delta(eta) delta(etab) / g];
* ``XiElement``: a nu-series of jets in (z, zb, xi, xib);
* ``DiagElement``: a nu-series of jets in (z, zb, tau, taub) with
  tau = w - z, taub = wb - zb near the diagonal of M x Mbar.

Fourier-side objects carry a weight cap: the weight of nu^n xi^A is
n + |A|, and a transferred operator known to nu-order K is exact on every
term of weight <= K.  Terms above the cap are dropped before comparisons.
"""

from __future__ import annotations

from math import comb, factorial

from gmpy2 import mpq

from .core.diffops import DiffOp, diffop_compose
from .core.jets import Jet, VarSet
from .core.nu import POLY, NuObject
from .core.scalar import I
from .errors import FiltrationError, StructuralError
from .geometry import ChartGeometry

__all__ = [
    "DeltaElement", "XiElement", "XiOperator", "DiagElement",
    "fourier", "fourier_inv", "transfer_operator", "act_on_delta", "natural_shift",
    "source_target", "poisson_tstar", "hamiltonian_field", "laplacian",
    "delta_extension", "tensor", "st_apply", "st_invert", "restrict", "extend_bidifferential",
    "tilde_LA", "tilde_generator", "hochschild_C", "hochschild_defect", "derivation_D",
]


def _capsum(*pairs) -> int:
    """min over (cap, valuation) pairs of cap + valuation, unbounded caps staying unbounded."""
    return min((c + v if c < POLY and v < POLY else POLY for c, v in pairs), default=POLY)


def _nu(x, cap=POLY):
    return x if isinstance(x, NuObject) else NuObject.single(x, 0, cap)


def _as_cotangent(j: Jet, chart: ChartGeometry) -> Jet:
    return j.lift(chart.cotangent)


def _fibre_weight(vs: VarSet, key: int) -> int:
    return sum(vs.exp(key, i) for i in vs.fibre_indices)


def _rename(j: Jet, vs: VarSet, coeffs: dict) -> Jet:
    return Jet(vs, coeffs, j.valid)


# elements ---------------------------------------------------------------------

class DeltaElement:
    """sum_n nu^n c_{n,A,B}(z, zb) d_eta^A d_etab^B [delta delta / g]."""

    __slots__ = ("value",)

    def __init__(self, value: NuObject):
        self.value = value

    def filtration_shift(self) -> int:
        """Largest s with every nu^r stack of order <= r - s."""
        out = POLY
        for n, j in self.value.terms.items():
            for k in j.c:
                out = min(out, n - _fibre_weight(j.vars, k))
        return out

    def agrees(self, other) -> bool:
        return self.value.agrees(other.value)


class XiElement:
    """A nu-series of jets on the cotangent variables, exact up to weight ``wcap``."""

    __slots__ = ("value", "wcap")

    def __init__(self, value: NuObject, wcap: int = POLY):
        self.value = value
        self.wcap = wcap

    def weight_valuation(self) -> int:
        return min((n + _fibre_weight(j.vars, k) for n, j in self.value.terms.items() for k in j.c), default=POLY)

    def truncated(self, W: int | None = None) -> NuObject:
        W = self.wcap if W is None else W
        if W >= POLY:
            return self.value
        out = {}
        for n, j in self.value.terms.items():
            vs = j.vars
            out[n] = Jet(vs, {k: v for k, v in j.c.items() if n + _fibre_weight(vs, k) <= W}, j.valid)
        return NuObject(out, self.value.cap, 0)

    def agrees(self, other) -> bool:
        other = other if isinstance(other, XiElement) else XiElement(_nu(other))
        W = min(self.wcap, other.wcap)
        return self.truncated(W).agrees(other.truncated(W))

    def fibre_free(self) -> bool:
        """True when no xi or xib appears (the element lives on M)."""
        for j in self.truncated().terms.values():
            vs = j.vars
            if any(_fibre_weight(vs, k) for k in j.c):
                return False
        return True

    def __mul__(self, other):
        if isinstance(other, XiElement):
            return XiElement(self.value * other.value,
                             _capsum((self.wcap, other.weight_valuation()), (other.wcap, self.weight_valuation())))
        return XiElement(self.value * _nu(other), self.wcap)

    def __add__(self, other):
        return XiElement(self.value + other.value, min(self.wcap, other.wcap))

    def __sub__(self, other):
        return XiElement(self.value - other.value, min(self.wcap, other.wcap))


class XiOperator:
    """A nu-series of operators on the cotangent variables with a weight cap."""

    __slots__ = ("series", "wcap")

    def __init__(self, series: NuObject, wcap: int = POLY):
        self.series = series
        self.wcap = wcap

    @classmethod
    def mult(cls, f):
        return cls(_nu(f).map(DiffOp.mult))

    def weight_valuation(self) -> int:
        best = POLY
        for n, op in self.series.terms.items():
            vs = op.vars
            for k, c in op.terms.items():
                o = _fibre_weight(vs, k)
                for kc in c.c:
                    best = min(best, n + _fibre_weight(vs, kc) - o)
        return best

    def truncated(self, W: int | None = None) -> NuObject:
        W = self.wcap if W is None else W
        if W >= POLY:
            return self.series
        out = {}
        for n, op in self.series.terms.items():
            vs = op.vars
            terms = {}
            for k, c in op.terms.items():
                o = _fibre_weight(vs, k)
                keep = {kc: v for kc, v in c.c.items() if n + _fibre_weight(vs, kc) - o <= W}
                if keep:
                    terms[k] = Jet(vs, keep, c.valid)
            out[n] = DiffOp(vs, terms)
        return NuObject(out, self.series.cap, 0)

    def __add__(self, other):
        return XiOperator(self.series + other.series, min(self.wcap, other.wcap))

    def __sub__(self, other):
        return XiOperator(self.series - other.series, min(self.wcap, other.wcap))

    def shift(self, k: int) -> "XiOperator":
        return XiOperator(self.series.shift(k), self.wcap + k if self.wcap < POLY else POLY)

    def scale(self, s) -> "XiOperator":
        return XiOperator(self.series.scale(s), self.wcap)

    def __matmul__(self, other: "XiOperator") -> "XiOperator":
        cap = _capsum((self.wcap, other.weight_valuation()), (other.wcap, self.weight_valuation()))
        return XiOperator(self.series.combine(other.series, diffop_compose), cap)

    def apply(self, X) -> XiElement:
        X = X if isinstance(X, XiElement) else XiElement(_nu(X))
        cap = _capsum((self.wcap, X.weight_valuation()), (X.wcap, self.weight_valuation()))
        return XiElement(self.series.combine(X.value, lambda D, j: D.apply(j)), cap)

    __call__ = apply

    def agrees(self, other) -> bool:
        W = min(self.wcap, other.wcap)
        return self.truncated(W).agrees(other.truncated(W))

    def first_difference(self, other):
        W = min(self.wcap, other.wcap)
        return self.truncated(W).first_difference(other.truncated(W))


class DiagElement:
    """A nu-series of jets in (z, zb, tau, taub)."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = _nu(value)

    def __add__(self, other):
        return DiagElement(self.value + other.value)

    def __sub__(self, other):
        return DiagElement(self.value - other.value)

    def __mul__(self, other):
        if isinstance(other, DiagElement):
            return DiagElement(self.value * other.value)
        return DiagElement(self.value * _nu(other))

    def scale(self, s) -> "DiagElement":
        return DiagElement(self.value.scale(s))

    def agrees(self, other) -> bool:
        return self.value.agrees(other.value)

    def first_difference(self, other):
        return self.value.first_difference(other.value)


# Fourier dictionary ---------------------------------------------------------------

def fourier(A: DeltaElement, chart: ChartGeometry) -> XiElement:
    """Stacks d_eta^A d_etab^B [delta delta / g] at nu^r go to (-i xi)^A (-i xib)^B at nu^(r-|A|-|B|)."""
    cs = chart.cotangent
    out: dict = {}
    for n, j in A.value.terms.items():
        groups: dict = {}
        for k, v in j.c.items():
            t = _fibre_weight(j.vars, k)
            groups.setdefault(t, {})[k] = v * (-I) ** t
        for t, coeffs in groups.items():
            piece = Jet(cs, coeffs, j.valid)
            out[n - t] = out[n - t] + piece if n - t in out else piece
    return XiElement(NuObject(out, POLY), A.value.cap)


def fourier_inv(X: XiElement, chart: ChartGeometry) -> DeltaElement:
    ts = chart.tangent
    out: dict = {}
    for n, j in X.value.terms.items():
        for t, piece in _by_fibre_degree(j).items():
            piece = Jet(ts, {k: v * I ** t for k, v in piece.c.items()}, piece.valid)
            out[n + t] = out[n + t] + piece if n + t in out else piece
    return DeltaElement(NuObject(out, min(X.wcap, X.value.cap)))


def _by_fibre_degree(j: Jet) -> dict:
    vs = j.vars
    groups: dict = {}
    for k, v in j.c.items():
        groups.setdefault(_fibre_weight(vs, k), {})[k] = v
    return {t: Jet(vs, c, j.valid) for t, c in groups.items()}


def natural_shift(D: NuObject) -> int:
    """Largest k with the nu^n layer of order <= n - k (nu-series of operators)."""
    return min((n - op.order() for n, op in D.terms.items() if op), default=POLY)


def transfer_operator(D, chart: ChartGeometry, shift: int | None = None) -> XiOperator:
    """Transport a nu-series of tangent operators through the fibrewise Fourier transform.

    Each normal-ordered term c(z, zb) eta^a etab^b d_z^al d_zb^be d_eta^A d_etab^B
    goes to c (-i nu d_xi)^a (-i nu d_xib)^b (d_z - dlog g)^al (d_zb - dlog g)^be
    (-i xi / nu)^A (-i xib / nu)^B.  A layer of order r lands in weight r.
    """
    D = _nu(D)
    if shift is not None and natural_shift(D) < shift:
        raise FiltrationError(f"operator is not natural with shift {shift}")
    ts, cs = chart.tangent, chart.cotangent
    m = chart.m
    lg = chart.logg(cs)
    cache: dict = {}

    def dz_power(exps):
        # prod (d_z - dlog g)^al over the base variables
        key = ("dz",) + tuple(exps)
        if key not in cache:
            op = DiffOp.identity(cs)
            for i, e in enumerate(exps):
                one = DiffOp.partial(cs, i) - DiffOp.mult(lg.diff(i))
                for _ in range(e):
                    op = diffop_compose(op, one)
            cache[key] = op
        return cache[key]

    def fibre_block(a, A):
        # d_xi^a ∘ xi^A in normal order, variable by variable
        key = ("fb", a, A)
        if key not in cache:
            terms = {0: Jet.const(cs, 1)}
            op = DiffOp(cs, terms)
            for pos, (x, y) in enumerate(zip(a, A)):
                i = 2 * m + pos
                block = {}
                for j in range(min(x, y) + 1):
                    coef = comb(x, j) * factorial(y) // factorial(y - j)
                    block[cs.units[i] * (x - j)] = Jet.monomial(cs, _unit_exps(cs, i, y - j), coef)
                op = diffop_compose(op, DiffOp(cs, block))
            cache[key] = op
        return cache[key]

    out: dict = {}
    for r, op in D.terms.items():
        if op.vars != ts:
            raise StructuralError("transfer_operator expects operators on the tangent variables")
        for k, c in op.terms.items():
            exps = ts.unpack(k)
            base, A = exps[: 2 * m], exps[2 * m:]
            for a, piece in _fibre_groups(c).items():
                coef = piece.project(chart.base).lift(cs)
                n = r + sum(a) - sum(A)
                phase = (-I) ** (sum(a) + sum(A))
                term = diffop_compose(fibre_block(tuple(a), tuple(A)), dz_power(base))
                term = DiffOp(cs, {kk: coef * v * phase for kk, v in term.terms.items()})
                out[n] = out[n] + term if n in out else term
    return XiOperator(NuObject(out, POLY), D.cap)


def _fibre_groups(c: Jet) -> dict:
    """``Jet.split`` over the fibre variables, with the empty groups a truncated
    coefficient still determines (zero up to its validity)."""
    return c.split(c.vars.fibre_indices, complete=True)


def monomial_exponents(n: int, top: int):
    if n == 0:
        yield ()
        return
    for e in range(top + 1):
        for rest in monomial_exponents(n - 1, top - e):
            yield (e,) + rest


def _unit_exps(vs, i, e):
    exps = [0] * vs.n
    exps[i] = e
    return exps


def act_on_delta(D, A: DeltaElement, chart: ChartGeometry) -> DeltaElement:
    """Action of tangent operators on delta stacks, through the Fourier dictionary."""
    return fourier_inv(transfer_operator(D, chart).apply(fourier(A, chart)), chart)


# source and target maps -------------------------------------------------------------

def _st_field(chart: ChartGeometry, which: str) -> DiffOp:
    cs = chart.cotangent
    X = DiffOp.zero(cs)
    for l in range(chart.m):
        for k in range(chart.m):
            g = chart.gu(l, k, cs)
            if which == "S":
                X = X + DiffOp.partial(cs, cs.zb(l), coeff=g * Jet.var(cs, cs.f(k)) * (-I))
            else:
                X = X + DiffOp.partial(cs, cs.z(k), coeff=g * Jet.var(cs, cs.fb(l)) * (-I))
    return X


def source_target(f: Jet, chart: ChartGeometry, which: str = "S") -> Jet:
    """S f = exp(-i xi_k g^{lk} d_zb^l) f, T f = exp(-i xib_l g^{lk} d_z^k) f."""
    if which not in ("S", "T"):
        raise ValueError(f"unknown map {which!r}")
    key = ("st", which, f)
    if key in chart._cache:
        return chart._cache[key]
    cs = chart.cotangent
    V = _st_field(chart, which)
    term = f.lift(cs)
    total = term
    n = 0
    while True:
        n += 1
        term = V.apply(term).scale(mpq(1, n))
        # each step carries one more fibre variable, so terms of degree > valid vanish
        if not term or term.valuation() > term.valid:
            break
        total = total + term
    chart._cache[key] = total
    return total


def poisson_tstar(A: Jet, B: Jet, chart: ChartGeometry | None = None) -> Jet:
    """{A, B} = dA/dxi_k dB/dz^k - dB/dxi_k dA/dz^k + (same with bars)."""
    vs = A.vars
    out = Jet.zero(vs)
    for k in range(vs.m):
        out = out + A.diff(vs.f(k)) * B.diff(vs.z(k)) - B.diff(vs.f(k)) * A.diff(vs.z(k))
        out = out + A.diff(vs.fb(k)) * B.diff(vs.zb(k)) - B.diff(vs.fb(k)) * A.diff(vs.zb(k))
    return out


def hamiltonian_field(A: Jet) -> DiffOp:
    """H_A with H_A B = {A, B}."""
    vs = A.vars
    out = DiffOp.zero(vs)
    for k in range(vs.m):
        out = out + DiffOp.partial(vs, vs.z(k), coeff=A.diff(vs.f(k)))
        out = out - DiffOp.partial(vs, vs.f(k), coeff=A.diff(vs.z(k)))
        out = out + DiffOp.partial(vs, vs.zb(k), coeff=A.diff(vs.fb(k)))
        out = out - DiffOp.partial(vs, vs.fb(k), coeff=A.diff(vs.zb(k)))
    return out


def laplacian(f: Jet, chart: ChartGeometry) -> Jet:
    vs = f.vars
    out = Jet.zero(vs)
    for l in range(chart.m):
        for k in range(chart.m):
            out = out + chart.gu(l, k, vs) * f.diff(vs.z(k)).diff(vs.zb(l))
    return out


# the diagonal model ---------------------------------------------------------------

def _diag_images(chart: ChartGeometry, zb_shift: bool):
    ds = chart.diagonal
    m = chart.m
    imgs = [Jet.var(ds, i) for i in range(ds.n)]
    if zb_shift:
        for l in range(m):
            imgs[ds.zb(l)] = imgs[ds.zb(l)] + Jet.var(ds, ds.fb(l))
    return imgs


def delta_extension(f: Jet, chart: ChartGeometry) -> DiagElement:
    """delta f = f(z, zb + taub), the formal analytic extension."""
    ds = chart.diagonal
    return DiagElement(f.lift(ds).substitute(ds, _diag_images(chart, True)))


def tensor(phi: Jet, psi: Jet, chart: ChartGeometry) -> DiagElement:
    """phi ⊗ psi = phi(z, zb) psi(z + tau, zb + taub)."""
    ds = chart.diagonal
    m = chart.m
    imgs = [Jet.var(ds, i) for i in range(ds.n)]
    for k in range(m):
        imgs[ds.z(k)] = imgs[ds.z(k)] + Jet.var(ds, ds.f(k))
        imgs[ds.zb(k)] = imgs[ds.zb(k)] + Jet.var(ds, ds.fb(k))
    return DiagElement(phi.lift(ds) * psi.lift(ds).substitute(ds, imgs))


def _st_images(chart: ChartGeometry):
    key = ("st_images",)
    if key not in chart._cache:
        cs = chart.cotangent
        m = chart.m
        imgs = [Jet.var(cs, i) for i in range(2 * m)]
        Sz = [source_target(Jet.var(chart.base, chart.base.zb(l)), chart, "S") for l in range(m)]
        Tz = [source_target(Jet.var(chart.base, chart.base.z(k)), chart, "T") for k in range(m)]
        for l in range(m):
            imgs[m + l] = Sz[l]
        taus = [Tz[k] - Jet.var(cs, cs.z(k)) for k in range(m)]
        taubs = [Jet.var(cs, cs.zb(l)) - Sz[l] for l in range(m)]
        chart._cache[key] = imgs + taus + taubs
    return chart._cache[key]


def st_apply(F: DiagElement, chart: ChartGeometry) -> XiElement:
    """(S ⊗ T) F: the pullback along (z, zb, xi, xib) -> (z, S zb, T z - z, zb - S zb)."""
    cs = chart.cotangent
    imgs = _st_images(chart)
    return XiElement(F.value.map(lambda j: j.substitute(cs, imgs)))


def _inverse_images(chart: ChartGeometry):
    """Jets xi(z, zb, tau, taub), xib(...) inverting the S ⊗ T pullback."""
    key = ("st_inverse",)
    if key in chart._cache:
        return chart._cache[key]
    ds = chart.diagonal
    m = chart.m
    shifted = _diag_images(chart, True)
    Sz = [source_target(Jet.var(chart.base, chart.base.zb(l)), chart, "S") for l in range(m)]
    Tz = [source_target(Jet.var(chart.base, chart.base.z(k)), chart, "T") for k in range(m)]
    g = [[chart.gl(k, l, ds).substitute(ds, shifted) for l in range(m)] for k in range(m)]
    tau = [Jet.var(ds, ds.f(k)) for k in range(m)]
    taub = [Jet.var(ds, ds.fb(l)) for l in range(m)]
    D = chart.D
    xi = [Jet.zero(ds) for _ in range(m)]
    xib = [Jet.zero(ds) for _ in range(m)]
    # each round fixes one more degree of the inverse
    for _ in range(D + 2):
        imgs = shifted[: 2 * m] + xi + xib
        rs = [taub[l] - (shifted[m + l] - Sz[l].substitute(ds, imgs)) for l in range(m)]
        rt = [tau[k] - (Tz[k].substitute(ds, imgs) - Jet.var(ds, ds.z(k))) for k in range(m)]
        xi = [xi[k] + sum((g[k][l] * rs[l] for l in range(m)), Jet.zero(ds)) * (-I) for k in range(m)]
        xib = [xib[l] + sum((g[k][l] * rt[k] for k in range(m)), Jet.zero(ds)) * I for l in range(m)]
    out = shifted[: 2 * m] + xi + xib
    chart._cache[key] = out
    return out


def st_invert(X, chart: ChartGeometry) -> DiagElement:
    """The diagonal-model element F with (S ⊗ T) F = X."""
    X = X if isinstance(X, XiElement) else XiElement(_nu(X))
    ds = chart.diagonal
    imgs = _inverse_images(chart)
    return DiagElement(X.value.map(lambda j: j.lift(chart.cotangent).substitute(ds, imgs)))


def restrict(F: DiagElement, which: str, reexpand: bool = False) -> DiagElement:
    """``w_eq_z`` sets tau = 0, ``zbar_eq_wbar`` sets taub = 0.

    With ``reexpand`` the second one is re-expanded at zb + taub, which turns
    (phi ⊗ psi) into delta(phi)·(1 ⊗ psi)."""
    value = F.value
    vs = next(iter(value.terms.values())).vars if value.terms else None
    if vs is None:
        return F
    m = vs.m
    if which == "w_eq_z":
        idx = [vs.f(k) for k in range(m)]
        return DiagElement(value.map(lambda j: j.set_zero(idx)))
    if which == "zbar_eq_wbar":
        idx = [vs.fb(l) for l in range(m)]
        out = value.map(lambda j: j.set_zero(idx))
        if reexpand:
            imgs = [Jet.var(vs, i) for i in range(vs.n)]
            for l in range(m):
                imgs[vs.zb(l)] = imgs[vs.zb(l)] + Jet.var(vs, vs.fb(l))
            out = out.map(lambda j: j.substitute(vs, imgs))
        return DiagElement(out)
    raise ValueError(f"unknown restriction {which!r}")


def _split_exps(vs, key, m):
    e = vs.unpack(key)
    return e[:m], e[m:2 * m]


def extend_bidifferential(A, F1: DiagElement, F2: DiagElement, chart: ChartGeometry) -> DiagElement:
    """Extension of (phi1⊗psi1, phi2⊗psi2) -> (phi1⊗psi2)·delta(A(psi1 phi2)).

    The bidifferential coefficients of B(phi, psi) = A(phi psi) are read off
    the normal form of A by the Leibniz rule, then
    B(z, wb) (d_w^K d_wb^L F1)|_{w=z} · (d_z^P d_zb^Q F2)|_{zb=wb}.
    """
    A = _nu(A)
    ds = chart.diagonal
    bs = chart.base
    m = chart.m
    shifted = _diag_images(chart, True)
    left_cache: dict = {}
    right_cache: dict = {}
    coef_cache: dict = {}

    def left(j, K, L):
        key = (id(j), K, L)
        if key not in left_cache:
            d = j
            for k, e in enumerate(K):
                d = d.diff(ds.f(k), e) if e else d
            for l, e in enumerate(L):
                d = d.diff(ds.fb(l), e) if e else d
            left_cache[key] = d.set_zero([ds.f(k) for k in range(m)])
        return left_cache[key]

    def right(j, P, Q):
        key = (id(j), P, Q)
        if key not in right_cache:
            d = j
            for pos, e in enumerate(P):
                d = _pow_shifted(d, ds.z(pos), ds.f(pos), e)
            for pos, e in enumerate(Q):
                d = _pow_shifted(d, ds.zb(pos), ds.fb(pos), e)
            d = d.set_zero([ds.fb(l) for l in range(m)]).substitute(ds, shifted)
            right_cache[key] = d
        return right_cache[key]

    def coef(c):
        key = id(c)
        if key not in coef_cache:
            coef_cache[key] = (c, c.lift(ds).substitute(ds, shifted))
        return coef_cache[key][1]

    out: dict = {}
    for r, op in A.terms.items():
        if op.vars != bs:
            raise StructuralError("extend_bidifferential expects an operator on the base variables")
        for k, c in op.terms.items():
            gz, gzb = _split_exps(bs, k, m)
            cd = coef(c)
            for mz in _box(gz):
                for mzb in _box(gzb):
                    w = 1
                    for x, y in zip(gz + gzb, mz + mzb):
                        w *= comb(x, y)
                    P = tuple(x - y for x, y in zip(gz, mz))
                    Q = tuple(x - y for x, y in zip(gzb, mzb))
                    for n1, j1 in F1.value.terms.items():
                        lj = left(j1, mz, mzb)
                        if not lj:
                            continue
                        for n2, j2 in F2.value.terms.items():
                            rj = right(j2, P, Q)
                            if not rj:
                                continue
                            t = (cd * lj * rj).scale(w)
                            e = r + n1 + n2
                            out[e] = out[e] + t if e in out else t
    v1, v2, va = F1.value.valuation(), F2.value.valuation(), A.valuation()
    cap = min(A.cap + v1 + v2, F1.value.cap + va + v2, F2.value.cap + va + v1, POLY)
    return DiagElement(NuObject(out, cap))


def _box(e):
    if not e:
        yield ()
        return
    for x in range(e[0] + 1):
        for rest in _box(e[1:]):
            yield (x,) + rest


def _pow_shifted(j: Jet, zi: int, ti: int, e: int) -> Jet:
    """(d_z - d_tau)^e j."""
    out = Jet.zero(j.vars)
    for s in range(e + 1):
        t = j.diff(zi, e - s).diff(ti, s) if s else j.diff(zi, e)
        out = out + t.scale(comb(e, s) * (-1) ** s)
    return out


# transferred multiplication operators ------------------------------------------------

def tilde_LA(phi: Jet, chart: ChartGeometry, side: str = "left") -> XiOperator:
    """Closed form of the transferred L_{A(phi)} (left) or R_{A(phi)} (right),
    A(phi) = dphi/dz^k eta^k + dphi/dzb^l etab^l.

    i nu e^{-Psi} H e^{Psi} with Psi = Phi_{-1}/nu splits as i nu H + i (H Phi_{-1}).
    """
    cs = chart.cotangent
    phi_b = phi.lift(chart.base) if phi.vars != chart.base else phi
    P = chart.phi(cs)
    bs = chart.base
    lap = laplacian(phi_b, chart)
    if side == "left":
        which = "S"
        cross = sum((chart.gu(l, k) * chart.Phi_minus1.diff(bs.z(k)) * phi_b.diff(bs.zb(l))
                     for l in range(chart.m) for k in range(chart.m)), Jet.zero(bs))
    elif side == "right":
        which = "T"
        cross = sum((chart.gu(l, k) * chart.Phi_minus1.diff(bs.zb(l)) * phi_b.diff(bs.z(k))
                     for l in range(chart.m) for k in range(chart.m)), Jet.zero(bs))
    else:
        raise ValueError(f"unknown side {side!r}")
    Sphi = source_target(phi_b, chart, which)
    H = hamiltonian_field(Sphi)
    one = H.map_coeffs(lambda c: c * I) - DiffOp.mult(source_target(lap, chart, which))
    zero = DiffOp.mult(H.apply(P) * I - source_target(cross, chart, which))
    return XiOperator(NuObject({1: one, 0: zero}))


def tilde_generator(chart: ChartGeometry, family: str, index=0, side: str = "left") -> XiOperator:
    """Exact transferred multiplication operators for the generator families.

    ``family``: ``f`` (index is a base jet), ``eta``, ``etab``, ``dXi`` (d Xi / dz^p)
    or ``dXib`` (d Xi / dzb^q).  The last two use
    dXi/dz^p = dPsi/dz^p + (d^2 Psi/dz^p dz^k) * eta^k + (1/nu) g_{p lbar} * etab^l and
    dXi/dzb^q = dPsi/dzb^q + (1/nu) eta^k * g_{k qbar} + etab^l * d^2 Psi/dzb^l dzb^q,
    together with L_{a*b} = L_a L_b and R_{a*b} = R_b R_a.
    """
    cs, bs = chart.cotangent, chart.base
    m = chart.m
    st = "S" if side == "left" else "T"
    if side not in ("left", "right"):
        raise ValueError(f"unknown side {side!r}")

    def mult(f, n=0):
        return XiOperator(NuObject({n: DiffOp.mult(source_target(f, chart, st))}))

    def d_fibre(i):
        return XiOperator(NuObject({1: DiffOp.partial(cs, i, coeff=Jet.const(cs, -I))}))

    if family == "f":
        return mult(index)
    if family == "eta":
        if side == "left":
            return d_fibre(cs.f(index))
        return tilde_LA(Jet.var(bs, bs.z(index)), chart, "right")
    if family == "etab":
        if side == "right":
            return d_fibre(cs.fb(index))
        return tilde_LA(Jet.var(bs, bs.zb(index)), chart, "left")
    Phi = chart.Phi_minus1
    if family == "dXi":
        p = index
        total = mult(Phi.diff(bs.z(p)), -1)
        for k in range(m):
            a, b = mult(Phi.diff(bs.z(p)).diff(bs.z(k)), -1), tilde_generator(chart, "eta", k, side)
            total = total + (a @ b if side == "left" else b @ a)
        for l in range(m):
            a, b = mult(chart.gl(p, l), -1), tilde_generator(chart, "etab", l, side)
            total = total + (a @ b if side == "left" else b @ a)
        return total
    if family == "dXib":
        q = index
        total = mult(Phi.diff(bs.zb(q)), -1)
        for k in range(m):
            a, b = tilde_generator(chart, "eta", k, side), mult(chart.gl(k, q), -1)
            total = total + (a @ b if side == "left" else b @ a)
        for l in range(m):
            a, b = tilde_generator(chart, "etab", l, side), mult(Phi.diff(bs.zb(l)).diff(bs.zb(q)), -1)
            total = total + (a @ b if side == "left" else b @ a)
        return total
    raise ValueError(f"unknown generator family {family!r}")


# the Hochschild identification -----------------------------------------------------

def hochschild_C(phi: Jet, chart: ChartGeometry) -> NuObject:
    """C(phi) = -nu Delta phi - g^{lk} dPhi_{-1}/dz^k dphi/dzb^l."""
    bs = chart.base
    cross = sum((chart.gu(l, k) * chart.Phi_minus1.diff(bs.z(k)) * phi.diff(bs.zb(l))
                 for l in range(chart.m) for k in range(chart.m)), Jet.zero(bs))
    return NuObject({1: -laplacian(phi, chart), 0: -cross})


def hochschild_defect(phi: Jet, psi: Jet, chart: ChartGeometry) -> NuObject:
    """phi C(psi) - C(phi psi) + C(phi) psi."""
    return hochschild_C(psi, chart) * NuObject.single(phi) - hochschild_C(phi * psi, chart) \
        + hochschild_C(phi, chart) * NuObject.single(psi)


def derivation_D(chart: ChartGeometry) -> NuObject:
    """D = -nu g^{lk} dPsi/dz^k d/dzb^l with Psi = Phi_{-1}/nu."""
    bs = chart.base
    op = DiffOp.zero(bs)
    for l in range(chart.m):
        c = sum((chart.gu(l, k) * chart.Phi_minus1.diff(bs.z(k)) for k in range(chart.m)), Jet.zero(bs))
        op = op + DiffOp.partial(bs, bs.zb(l), coeff=-c)
    return NuObject({0: op})
