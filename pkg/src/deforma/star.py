"""Star products with separation of variables on a chart.

A star product is stored through its bidifferential cochains
``C_r(phi, psi) = sum c[r][(g, d)] * d^g(phi) * d^d(psi)`` with jet
coefficients; ``g`` and ``d`` are packed derivative multi-indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb, factorial

from gmpy2 import mpq

from .core.diffops import DiffOp, diffop_compose
from .core.jets import EXACT, Jet, VarSet
from .core.nu import POLY, NuObject
from .errors import DomainError, InternalConsistencyError, StructuralError, TruncationError
from .geometry import ChartGeometry, FormalPotential, build_tm_potentials, jet_matrix_inverse, top_power_coefficient

__all__ = [
    "StarProduct", "TraceDensity", "build_sov_star", "star_mul", "berezin", "berezin_inverse",
    "derive_star", "canonical_trace_density", "tm_star", "apply_series", "solve_left",
    "berezin_by_polarization", "primed_direct", "trace_defect", "divergence_potentials",
    "compose_series", "multi_indices", "star_from_bilinear",
]


def multi_indices(n: int, max_deg: int, min_deg: int = 0):
    """All length-n exponent tuples with min_deg <= total <= max_deg, graded then lexicographic."""
    out = []
    for d in range(min_deg, max_deg + 1):
        out.extend(e for e in product(range(d + 1), repeat=n) if sum(e) == d)
    return out


def _fact(e):
    f = 1
    for x in e:
        f *= factorial(x)
    return f


def _as_nu(x, name="nu"):
    return x if isinstance(x, NuObject) else NuObject.single(x, 0, POLY, name)


def apply_series(op: NuObject, f) -> NuObject:
    """Apply a nu-series of operators to a jet or nu-series of jets."""
    return op.combine(_as_nu(f), lambda D, j: D.apply(j))


def compose_series(A: NuObject, B: NuObject) -> NuObject:
    return A.combine(B, diffop_compose)


class StarProduct:
    """A formal star product known to nu-order ``K``."""

    def __init__(self, vs: VarSet, K: int, cochains: dict, *, kind="sov", potential=None, D=None, label=""):
        self.vars = vs
        self.K = K
        self.cochains = cochains
        self.kind = kind
        self.potential = potential
        self.D = D
        self.label = label

    # cochains --------------------------------------------------------------
    def C(self, r: int, phi: Jet, psi: Jet) -> Jet:
        if r > self.K:
            raise TruncationError(f"order {r} beyond the star product's cap {self.K}")
        vs = self.vars
        out = Jet.zero(vs)
        dphi: dict = {}
        dpsi: dict = {}
        for (g, d), c in self.cochains.get(r, {}).items():
            a = dphi.get(g)
            if a is None:
                a = dphi[g] = phi.diff_multi(vs.unpack(g))
            if not a and a.is_exact:
                continue
            b = dpsi.get(d)
            if b is None:
                b = dpsi[d] = psi.diff_multi(vs.unpack(d))
            if not b and b.is_exact:
                continue
            out = out + c * a * b
        return out

    def mul(self, phi, psi) -> NuObject:
        phi, psi = _as_nu(phi), _as_nu(psi)
        va, vb = phi.valuation(), psi.valuation()
        cap = min(phi.cap + vb, psi.cap + va, va + vb + self.K, POLY)
        out: dict = {}
        for p, x in phi.terms.items():
            for q, y in psi.terms.items():
                for r in range(0, min(self.K, cap - p - q) + 1):
                    t = self.C(r, x, y)
                    e = p + q + r
                    out[e] = out[e] + t if e in out else t
        return NuObject(out, cap)

    def left(self, phi) -> NuObject:
        """L_phi as a nu-series of operators."""
        phi = _as_nu(phi)
        out = NuObject({}, min(phi.cap, phi.valuation() + self.K))
        for p, x in phi.terms.items():
            out = out + self._left_jet(x).shift(p)
        return out.truncate(min(phi.cap, phi.valuation() + self.K))

    def right(self, psi) -> NuObject:
        psi = _as_nu(psi)
        out = NuObject({}, min(psi.cap, psi.valuation() + self.K))
        for p, x in psi.terms.items():
            out = out + self._right_jet(x).shift(p)
        return out.truncate(min(psi.cap, psi.valuation() + self.K))

    def _left_jet(self, phi: Jet) -> NuObject:
        vs = self.vars
        terms = {}
        for r, table in self.cochains.items():
            ops: dict = {}
            for (g, d), c in table.items():
                a = phi.diff_multi(vs.unpack(g))
                if a:
                    ops[d] = ops[d] + c * a if d in ops else c * a
            terms[r] = DiffOp(vs, ops)
        return NuObject(terms, self.K)

    def _right_jet(self, psi: Jet) -> NuObject:
        vs = self.vars
        terms = {}
        for r, table in self.cochains.items():
            ops: dict = {}
            for (g, d), c in table.items():
                b = psi.diff_multi(vs.unpack(d))
                if b:
                    ops[g] = ops[g] + c * b if g in ops else c * b
            terms[r] = DiffOp(vs, ops)
        return NuObject(terms, self.K)

    def opposite(self) -> "StarProduct":
        swapped = {r: {(d, g): c for (g, d), c in t.items()} for r, t in self.cochains.items()}
        kind = {"sov": "anti-sov", "anti-sov": "sov"}.get(self.kind, self.kind)
        return StarProduct(self.vars, self.K, swapped, kind=kind, D=self.D, label=f"opposite({self.label})")

    def truncate(self, K: int) -> "StarProduct":
        return StarProduct(self.vars, K, {r: t for r, t in self.cochains.items() if r <= K},
                           kind=self.kind, potential=self.potential, D=self.D, label=self.label)

    # structure queries -------------------------------------------------------
    def separation_holds(self) -> bool:
        """First argument differentiated only antiholomorphically, second only holomorphically (r >= 1)."""
        vs = self.vars
        hol, ahol = set(vs.holomorphic), set(vs.antiholomorphic)
        first, second = (ahol, hol) if self.kind != "anti-sov" else (hol, ahol)
        for r, t in self.cochains.items():
            if r == 0:
                continue
            for (g, d), c in t.items():
                if not c:
                    continue
                if any(vs.exp(g, i) for i in range(vs.n) if i not in first):
                    return False
                if any(vs.exp(d, i) for i in range(vs.n) if i not in second):
                    return False
                if g == 0 or d == 0:
                    return False
        return True

    def natural_holds(self) -> bool:
        # entries that are zero to their validity do not count against naturality
        vs = self.vars
        return all(vs.degree(g) <= r and vs.degree(d) <= r
                   for r, t in self.cochains.items() for (g, d), c in t.items() if c)

    def min_valid(self) -> int:
        return min((c.valid for t in self.cochains.values() for c in t.values()), default=EXACT)

    def is_sov_type(self) -> bool:
        return self.kind == "sov"

    def __repr__(self):
        return f"StarProduct({self.label or self.kind}, K={self.K}, vars={self.vars.kind}/{self.vars.m})"


# the separation-of-variables solver ---------------------------------------------

def _leading_inverse(potential: FormalPotential, D):
    lead = potential.value.terms[-1]
    vs = lead.vars
    H = [[lead.diff(a).diff(b) for b in vs.antiholomorphic] for a in vs.holomorphic]
    if D is None and not lead.is_exact:
        D = lead.valid
    inv, _ = jet_matrix_inverse(H, None if D is None else max(D - 2, 0))
    return inv  # inv[j][k]: inverse of H[k][j]


def solve_left(potential: FormalPotential, phi: Jet, K: int, ginv=None, D=None) -> dict:
    """Coefficients a[(r, alpha)] of L_phi = sum nu^r a_{alpha,r} d_x^alpha.

    Solved order by order from [L_phi, d/dxb_j + dPhi/dxb_j] = 0, highest
    derivative order first, with a_{0,0} = phi and a_{0,r} = 0 for r >= 1.
    """
    vs = phi.vars
    hol, ahol = vs.holomorphic, vs.antiholomorphic
    M = len(hol)
    if ginv is None:
        ginv = _leading_inverse(potential, D)
    Phi = potential.value.terms
    PhiX = {s: [p.diff(ahol[j]) for j in range(M)] for s, p in Phi.items()}
    dcache: dict = {}

    def dPhi(s, j, mu):
        key = (s, j, mu)
        v = dcache.get(key)
        if v is None:
            v = PhiX[s][j]
            for pos, e in enumerate(mu):
                if e:
                    v = v.diff(hol[pos], e)
            dcache[key] = v
        return v

    zero = tuple([0] * M)
    a: dict = {(0, zero): phi}
    by_order: dict = {0: {zero: phi}}
    for n in range(K):
        by_order[n + 1] = {}
        for size in range(n + 1, 0, -1):
            for delta in multi_indices(M, size, size):
                k = next(i for i, e in enumerate(delta) if e)
                gamma = list(delta)
                gamma[k] -= 1
                gamma = tuple(gamma)
                gsize = size - 1
                base = by_order[n].get(gamma)
                total = None
                for j in range(M):
                    acc = base.diff(ahol[j]) if base is not None else None
                    # rest: alpha > gamma, order r = n - s
                    for r, table in by_order.items():
                        s = n - r
                        if s not in PhiX:
                            continue
                        for alpha, coef in table.items():
                            if sum(alpha) <= gsize or any(x < y for x, y in zip(alpha, gamma)):
                                continue
                            diff = tuple(x - y for x, y in zip(alpha, gamma))
                            if s == -1 and sum(diff) == 1:
                                continue
                            dp = dPhi(s, j, diff)
                            if not dp and dp.is_exact:
                                continue
                            b = 1
                            for x, y in zip(alpha, diff):
                                b *= comb(x, y)
                            t = coef * dp
                            if b != 1:
                                t = t.scale(b)
                            acc = -t if acc is None else acc - t
                    if acc is None or (not acc and acc.is_exact):
                        continue
                    t = ginv[j][k] * acc
                    total = t if total is None else total + t
                if total is not None and (total or not total.is_exact):
                    val = total.scale(mpq(1, delta[k]))
                    by_order[n + 1][delta] = val
    for r, table in by_order.items():
        for alpha, c in table.items():
            a[(r, alpha)] = c
    return a


def left_from_solution(vs: VarSet, sol: dict, K: int) -> NuObject:
    hol = vs.holomorphic
    terms: dict = {}
    for (r, alpha), c in sol.items():
        exps = [0] * vs.n
        for pos, e in zip(hol, alpha):
            exps[pos] = e
        terms.setdefault(r, {})[vs.pack(exps)] = c
    return NuObject({r: DiffOp(vs, t) for r, t in terms.items()}, K)


def build_sov_star(potential: FormalPotential, K: int, D: int | None = None, label="") -> StarProduct:
    """Star product with separation of variables determined by a formal potential."""
    lead = potential.value.terms.get(-1)
    if lead is None:
        raise StructuralError("the potential needs a nu^-1 term")
    vs = lead.vars
    ginv = _leading_inverse(potential, D)
    hol, ahol = vs.holomorphic, vs.antiholomorphic
    M = len(ahol)
    cochains: dict = {r: {} for r in range(K + 1)}
    betas = multi_indices(M, K)
    for beta in betas:
        exps = [0] * vs.n
        for pos, e in zip(ahol, beta):
            exps[pos] = e
        phi = Jet.monomial(vs, exps)
        sol = solve_left(potential, phi, K, ginv)
        bsize = sum(beta)
        for (r, alpha), val in sol.items():
            if r < bsize and r > 0:
                # naturality forces these to vanish; keep them so tests can see violations
                pass
            # subtract lower polarization terms
            acc = val
            for beta2 in betas:
                if sum(beta2) >= bsize or any(x > y for x, y in zip(beta2, beta)):
                    continue
                gk = _pack_at(vs, ahol, beta2)
                dk = _pack_at(vs, hol, alpha)
                c = cochains[r].get((gk, dk))
                if c is None:
                    continue
                fac = 1
                rest = [0] * vs.n
                for pos, x, y in zip(ahol, beta, beta2):
                    fac *= factorial(x) // factorial(x - y)
                    rest[pos] = x - y
                acc = acc - (c * Jet.monomial(vs, rest)).scale(fac)
            if acc or not acc.is_exact:
                cochains[r][(_pack_at(vs, ahol, beta), _pack_at(vs, hol, alpha))] = acc.scale(mpq(1, _fact(beta)))
    S = StarProduct(vs, K, {r: t for r, t in cochains.items() if t}, kind="sov", potential=potential, D=D, label=label or "sov")
    if S.min_valid() < 0:
        deficit = -S.min_valid()
        raise TruncationError(f"jets too shallow for nu-order {K}", required=(D or lead.valid) + deficit)
    return S


def _pack_at(vs, positions, e):
    exps = [0] * vs.n
    for pos, x in zip(positions, e):
        exps[pos] = x
    return vs.pack(exps)


def star_mul(S: StarProduct, phi, psi) -> NuObject:
    return S.mul(phi, psi)


# Berezin transform -----------------------------------------------------------------

def berezin(S: StarProduct) -> NuObject:
    """Formal Berezin transform, B(a b) = b ★ a for holomorphic a, antiholomorphic b."""
    if not S.is_sov_type():
        raise StructuralError("the Berezin transform is defined for separation-of-variables products")
    vs = S.vars
    terms = {}
    for r, t in S.cochains.items():
        ops: dict = {}
        for (g, d), c in t.items():
            k = g + d  # packed keys add exponents and degrees at once
            ops[k] = ops[k] + c if k in ops else c
        terms[r] = DiffOp(vs, ops)
    return NuObject(terms, S.K)


def berezin_by_polarization(S: StarProduct) -> NuObject:
    """The same operator recovered from its values on monomials x^a xb^b."""
    vs = S.vars
    hol, ahol = vs.holomorphic, vs.antiholomorphic
    M = len(hol)
    coeffs: dict = {}
    idx = [(al, be) for al in multi_indices(M, S.K) for be in multi_indices(M, S.K)]
    idx.sort(key=lambda p: sum(p[0]) + sum(p[1]))
    for al, be in idx:
        a = Jet.monomial(vs, _exps_at(vs, hol, al))
        b = Jet.monomial(vs, _exps_at(vs, ahol, be))
        val = S.mul(b, a)
        full = _exps_at(vs, hol, al, _exps_at(vs, ahol, be))
        for r in range(S.K + 1):
            acc = val.get(r, Jet.zero(vs))
            for (al2, be2), table in coeffs.items():
                if (al2, be2) == (al, be):
                    continue
                if any(x > y for x, y in zip(al2, al)) or any(x > y for x, y in zip(be2, be)):
                    continue
                c = table.get(r)
                if c is None:
                    continue
                sub = _exps_at(vs, hol, al2, _exps_at(vs, ahol, be2))
                fac = 1
                for x, y in zip(full, sub):
                    fac *= factorial(x) // factorial(x - y)
                acc = acc - (c * Jet.monomial(vs, [x - y for x, y in zip(full, sub)])).scale(fac)
            if acc or not acc.is_exact:
                coeffs.setdefault((al, be), {})[r] = acc.scale(mpq(1, _fact(full)))
    terms: dict = {}
    for (al, be), table in coeffs.items():
        key = vs.pack(_exps_at(vs, hol, al, _exps_at(vs, ahol, be)))
        for r, c in table.items():
            terms.setdefault(r, {})[key] = c
    return NuObject({r: DiffOp(vs, t) for r, t in terms.items()}, S.K)


def _exps_at(vs, positions, e, start=None):
    exps = list(start) if start is not None else [0] * vs.n
    for pos, x in zip(positions, e):
        exps[pos] = x
    return exps


def berezin_inverse(B: NuObject) -> NuObject:
    vs = B.terms[0].vars
    one = DiffOp.identity(vs)
    N = B - NuObject.single(one, 0, POLY)
    if N.valuation() < 1:
        raise DomainError("operator does not start with the identity")
    total = NuObject.single(one, 0, B.cap)
    term = NuObject.single(one, 0, B.cap)
    negN = -N
    while True:
        term = compose_series(term, negN).truncate(B.cap)
        if not term.terms:
            break
        total = total + term
    return total


# derived products --------------------------------------------------------------------

def star_from_bilinear(vs: VarSet, K: int, func, kind: str, label: str, D=None) -> StarProduct:
    """Recover natural bidifferential cochains from values on monomial pairs."""
    monos = multi_indices(vs.n, K)
    values = {}
    for ga in monos:
        for de in monos:
            if max(sum(ga), sum(de)) <= K:
                values[(ga, de)] = func(Jet.monomial(vs, ga), Jet.monomial(vs, de))
    cochains: dict = {}
    for r in range(K + 1):
        table: dict = {}
        pairs = [(ga, de) for ga in monos for de in monos if sum(ga) <= r and sum(de) <= r]
        pairs.sort(key=lambda p: (sum(p[0]) + sum(p[1]), p))
        for ga, de in pairs:
            acc = values[(ga, de)].get(r, Jet.zero(vs))
            for (ga2, de2), c in table.items():
                if any(x > y for x, y in zip(ga2, ga)) or any(x > y for x, y in zip(de2, de)):
                    continue
                fac = 1
                for x, y in zip(ga, ga2):
                    fac *= factorial(x) // factorial(x - y)
                for x, y in zip(de, de2):
                    fac *= factorial(x) // factorial(x - y)
                mono = [x - y for x, y in zip(ga, ga2)]
                mono = [u + x - y for u, x, y in zip(mono, de, de2)]
                acc = acc - (c * Jet.monomial(vs, mono)).scale(fac)
            if acc or not acc.is_exact:
                table[(ga, de)] = acc.scale(mpq(1, _fact(ga) * _fact(de)))
        cochains[r] = {(vs.pack(ga), vs.pack(de)): c for (ga, de), c in table.items()}
    return StarProduct(vs, K, {r: t for r, t in cochains.items() if t}, kind=kind, D=D, label=label)


def derive_star(S: StarProduct, mode: str) -> StarProduct:
    """``opposite``, ``conjugate_by_B`` (the primed product) or ``dual``."""
    if mode == "opposite":
        return S.opposite()
    if mode not in ("conjugate_by_B", "dual"):
        raise ValueError(f"unknown mode {mode!r}")
    B = berezin(S)
    Binv = berezin_inverse(B)

    def primed(x, y):
        return apply_series(Binv, S.mul(apply_series(B, x), apply_series(B, y)))

    kind = "anti-sov" if S.kind == "sov" else "sov"
    P = star_from_bilinear(S.vars, S.K, primed, kind, f"prime({S.label})", S.D)
    if mode == "conjugate_by_B":
        return P
    D = P.opposite()
    D.label = f"dual({S.label})"
    return D


def primed_direct(S: StarProduct, phi, psi) -> NuObject:
    """phi ★' psi = B^-1(B phi ★ B psi), evaluated without cochains."""
    B = berezin(S)
    Binv = berezin_inverse(B)
    return apply_series(Binv, S.mul(apply_series(B, phi), apply_series(B, psi)))


# trace densities ---------------------------------------------------------------------

@dataclass(eq=False)
class TraceDensity:
    Psi: FormalPotential
    mu: NuObject
    C_eff: object
    exponent_shift: object  # constant term of (Phi + Psi)_0 kept out of the exponential
    leading_volume: Jet

    @property
    def mu_coefficient(self) -> NuObject:
        return self.mu


def radial_potential(grad) -> Jet:
    """A jet F with dF/dx_i = grad[i], via the radial homotopy; no consistency check."""
    vs = grad[0].vars
    out: dict = {}
    valid = min(g.valid for g in grad)
    for i, g in enumerate(grad):
        u = vs.units[i]
        for k, c in g.c.items():
            d = vs.degree(k)
            key = k + u
            out[key] = out.get(key, 0) + c * mpq(1, d + 1)
    return Jet(vs, out, valid + 1 if valid < EXACT else EXACT)


def canonical_trace_density(S: StarProduct, Phi: FormalPotential, degree: int | None = None) -> TraceDensity:
    """Solve B(dPsi) = -dPhi and the d/dnu equation; return mu = C e^(Phi+Psi)."""
    vs = S.vars
    M = len(vs.holomorphic)
    B = berezin(S)
    K = S.K
    phis = Phi.value.terms
    L_Phi = Phi.value.log
    nvar = vs.n
    grads: dict = {}
    Psi: dict = {}
    top = K - 1
    for n in range(-1, top + 1):
        row = []
        for i in range(nvar):
            p = phis.get(n)
            acc = -p.diff(i) if p is not None else Jet.zero(vs)
            for j in range(1, n + 2):
                Bj = B.terms.get(j)
                prev = grads.get(n - j)
                if Bj is None or prev is None:
                    continue
                acc = acc - Bj.apply(prev[i])
            row.append(acc)
        grads[n] = row
        F = radial_potential(row)
        for i in range(nvar):
            if not F.diff(i).agrees(row[i]):
                raise InternalConsistencyError(f"gradient system at nu^{n} is not integrable (variable {vs.names[i]})")
        Psi[n] = F
    if not (Psi[-1] + phis[-1]).agrees(Jet.zero(vs)):
        raise InternalConsistencyError("leading dual potential is not -Phi_{-1}")

    # d/dnu equation: fixes the log multiple and the constants c_n, n >= 1
    def residual(order, L_Psi):
        """[B(dPsi/dnu) + dPhi/dnu] at nu^order."""
        acc = Jet.zero(vs)
        for k, P in Psi.items():
            if not k:
                continue
            j = order - (k - 1)
            if j < 0:
                continue
            Bj = B.terms.get(j)
            if Bj is None:
                continue
            acc = acc + Bj.apply(P).scale(k)
        if order == -1:
            acc = acc + Jet.const(vs, L_Psi + L_Phi)
        p = phis.get(order + 1)
        if p is not None and order + 1:
            acc = acc + p.scale(order + 1)
        return acc

    r = residual(-2, 0)
    if not r.agrees(Jet.zero(vs)):
        raise InternalConsistencyError("nu^-2 part of the d/dnu equation fails")
    r = residual(-1, 0)
    if r.degree() > 0 or not r.agrees(Jet.const(vs, r.const_term())):
        raise InternalConsistencyError("nu^-1 part of the d/dnu equation is not constant")
    L_Psi = -r.const_term()
    if L_Psi != int(L_Psi):
        raise InternalConsistencyError("log(nu) multiple of the dual potential is not an integer")
    L_Psi = int(L_Psi)
    for n in range(1, top + 1):
        r = residual(n - 1, L_Psi)
        c = r.const_term()
        if not r.agrees(Jet.const(vs, c)):
            raise InternalConsistencyError(f"d/dnu residual at nu^{n - 1} is not a constant")
        if c:
            Psi[n] = Psi[n] + Jet.const(vs, -c / n)
    Psi_obj = NuObject(Psi, top, L_Psi)
    total = Phi.value + Psi_obj
    if total.log != -M:
        raise InternalConsistencyError(f"log(nu) multiple of Phi+Psi is {total.log}, expected {-M}")
    if total.terms.get(-1) is not None and not total.terms[-1].agrees(Jet.zero(vs)):
        raise InternalConsistencyError("singular part of Phi+Psi does not cancel")
    f = {n: p for n, p in total.terms.items() if n >= 0 and n <= top}
    f0 = f.get(0, Jet.zero(vs))
    shift = f0.const_term()
    f0hat = f0 - shift
    if f0hat.is_exact and f0hat:
        if degree is None:
            degree = S.D if S.D is not None else f0hat.degree()
        f0hat = f0hat.truncate(degree)
    lead = f0hat.exp()
    series = NuObject({**f, 0: f0hat}, top)
    E = series.exp(Jet.const(vs, 1), lead=lead)
    lead_obj = S.potential.value.terms[-1] if S.potential is not None else phis[-1]
    H = [[lead_obj.diff(a).diff(b) for b in vs.antiholomorphic] for a in vs.holomorphic]
    W = top_power_coefficient(H)
    C_eff = W.const_term()
    mu = E.scale(C_eff).shift(-M)
    if not mu.terms[-M].agrees(W):
        raise InternalConsistencyError("leading term of the trace density is not the Liouville volume")
    return TraceDensity(FormalPotential(Psi_obj), mu, C_eff, shift, W)


def trace_defect(S: StarProduct, mu: NuObject, phi) -> NuObject:
    """(L_phi - R_phi)^T mu; it vanishes exactly when mu is a trace density."""
    D = S.left(phi) - S.right(phi)
    return D.combine(mu, lambda op, m: op.transpose_apply(m))


def divergence_potentials(S: StarProduct, mu: NuObject, phi, psi):
    """V with (phi★psi - psi★phi)·mu = sum_i d_i V_i + psi·(trace defect).

    Returns (V, remainder) as nu-series; the identity is exact by construction
    and the remainder vanishes for a trace density.
    """
    vs = S.vars
    D = S.left(phi) - S.right(phi)
    psi = _as_nu(psi)
    V = [NuObject({}, POLY) for _ in range(vs.n)]
    rem = NuObject({}, POLY)
    for a, op in D.terms.items():
        for b, w in mu.terms.items():
            for c, y in psi.terms.items():
                e = a + b + c
                vparts, r = _div_form(op, w, y)
                # inexact zeros carry their validity
                for i, v in enumerate(vparts):
                    if v or not v.is_exact:
                        V[i] = V[i] + NuObject({e: v}, POLY)
                if r or not r.is_exact:
                    rem = rem + NuObject({e: r}, POLY)
    cap = min(D.cap + mu.valuation() + psi.valuation(), mu.cap + D.valuation() + psi.valuation(),
              psi.cap + D.valuation() + mu.valuation())
    return [v.truncate(cap) for v in V], rem.truncate(cap)


def _div_form(op: DiffOp, mu: Jet, psi: Jet):
    vs = op.vars
    V = [Jet.zero(vs) for _ in range(vs.n)]
    rem = Jet.zero(vs)
    for k, c in op.terms.items():
        alpha = list(vs.unpack(k))
        w = c * mu
        while any(alpha):
            i = next(t for t, e in enumerate(alpha) if e)
            alpha[i] -= 1
            V[i] = V[i] + w * psi.diff_multi(alpha)
            w = -w.diff(i)
        rem = rem + w * psi
    return V, rem


# the product on the tangent bundle ---------------------------------------------------

def tm_star(chart: ChartGeometry, K: int) -> StarProduct:
    pot = build_tm_potentials(chart, "xi")
    return build_sov_star(pot, K, D=chart.D, label="tm")
