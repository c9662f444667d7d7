"""Chart-level pseudo-Kähler data derived from a potential jet."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import permutations
from math import factorial

from gmpy2 import mpq

from .core.jets import Jet, VarSet
from .core.nu import POLY, NuObject
from .core.scalar import I
from .errors import DegenerateChartError, DomainError, InternalConsistencyError, StructuralError

__all__ = [
    "ChartGeometry", "FormalPotential", "build_chart", "build_tm_potentials",
    "wedge_top", "flat_chart", "fubini_study_chart", "jet_det", "base_potential",
    "jet_matrix_inverse", "lambda_constant", "top_power_coefficient",
]


def _perm_sign(p):
    sign, seen = 1, [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def jet_det(M):
    """Leibniz determinant of a square matrix of jets."""
    n = len(M)
    out = None
    for p in permutations(range(n)):
        t = M[0][p[0]]
        for i in range(1, n):
            t = t * M[i][p[i]]
        if _perm_sign(p) < 0:
            t = -t
        out = t if out is None else out + t
    return out


def _minor(M, i, j):
    return [[M[r][c] for c in range(len(M)) if c != j] for r in range(len(M)) if r != i]


def _const_det(M):
    n = len(M)
    total = mpq(0)
    for p in permutations(range(n)):
        t = mpq(1) if _perm_sign(p) > 0 else mpq(-1)
        for i in range(n):
            t = t * M[i][p[i]]
        total = total + t
    return total


def jet_matrix_inverse(M, degree: int | None = None):
    """Inverse of a square jet matrix with invertible constant part, via cofactors.

    ``degree`` truncates the series inverse of the determinant when the
    entries are exact non-constant polynomials.
    """
    n = len(M)
    vs = M[0][0].vars
    G0 = [[c.const_term() for c in row] for row in M]
    if not _const_det(G0):
        raise DegenerateChartError("matrix is singular at the base point")
    det = jet_det(M)
    if det.is_exact and det.degree() > 0:
        if degree is None:
            raise DomainError("inverting a non-constant exact matrix needs a truncation degree")
        det = det.truncate(degree)
    det_inv = det.inverse()
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            cof = jet_det(_minor(M, j, i)) if n > 1 else Jet.const(vs, 1)
            if (i + j) % 2:
                cof = -cof
            out[i][j] = cof * det_inv
    return out, det


@dataclass(frozen=True, eq=False)
class FormalPotential:
    """A formal potential: a nu-series of jets, possibly with a log(nu) summand."""

    value: NuObject

    @property
    def vars(self) -> VarSet:
        return next(iter(self.value.terms.values())).vars

    def diff(self, i: int) -> NuObject:
        return NuObject({n: p.diff(i) for n, p in self.value.terms.items()}, self.value.cap, 0, self.value.name)

    def leading(self) -> Jet:
        return self.value.terms[min(self.value.terms)]


@dataclass(eq=False)
class ChartGeometry:
    m: int
    D: int
    Phi_minus1: Jet
    g_lower: list
    g_upper: list
    det_g: Jet
    det_g0: object
    log_g: Jet
    log_branch_note: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def base(self) -> VarSet:
        return self.Phi_minus1.vars

    @cached_property
    def tangent(self) -> VarSet:
        return VarSet("tangent", self.m)

    @cached_property
    def cotangent(self) -> VarSet:
        return VarSet("cotangent", self.m)

    @cached_property
    def diagonal(self) -> VarSet:
        return VarSet("diagonal", self.m)

    @property
    def valid(self) -> int:
        return min(min(c.valid for row in self.g_upper for c in row), self.log_g.valid)

    def is_flat(self) -> bool:
        return all(c.degree() <= 0 and c.is_exact for row in self.g_lower for c in row)

    def gu(self, l, k, vs: VarSet | None = None) -> Jet:
        """g^{l̄k} on the requested variable set."""
        return self.lifted("gu", l, k, vs)

    def gl(self, k, l, vs: VarSet | None = None) -> Jet:
        """g_{k l̄} on the requested variable set."""
        return self.lifted("gl", k, l, vs)

    def lifted(self, what, a, b, vs):
        vs = vs or self.base
        key = (what, a, b, vs)
        if key not in self._cache:
            src = self.g_upper if what == "gu" else self.g_lower
            self._cache[key] = src[a][b].lift(vs)
        return self._cache[key]

    def phi(self, vs: VarSet | None = None) -> Jet:
        return self.Phi_minus1.lift(vs or self.base)

    def logg(self, vs: VarSet | None = None) -> Jet:
        return self.log_g.lift(vs or self.base)

    @cached_property
    def Xi_minus1(self) -> Jet:
        """Phi + (dPhi/dz^k) eta^k + (dPhi/dzb^l) etab^l on the tangent set."""
        ts = self.tangent
        P = self.Phi_minus1.lift(ts)
        out = P
        for k in range(self.m):
            out = out + P.diff(ts.z(k)) * Jet.var(ts, ts.f(k))
            out = out + P.diff(ts.zb(k)) * Jet.var(ts, ts.fb(k))
        return out

    @cached_property
    def tm_hessian(self):
        """Mixed Hessian of Xi_{-1} in (z, eta) × (zb, etab)."""
        ts = self.tangent
        X = self.Xi_minus1
        return [[X.diff(a).diff(b) for b in ts.antiholomorphic] for a in ts.holomorphic]

    def kp_holds(self) -> bool:
        m, vs = self.m, self.base
        gu = self.g_upper
        for l in range(m):
            for n in range(m):
                for mm in range(m):
                    lhs = sum((gu[l][k] * gu[n][mm].diff(vs.z(k)) for k in range(m)), Jet.zero(vs))
                    rhs = sum((gu[n][k] * gu[l][mm].diff(vs.z(k)) for k in range(m)), Jet.zero(vs))
                    if not lhs.agrees(rhs):
                        return False
        for n in range(m):
            for k in range(m):
                for mm in range(m):
                    lhs = sum((gu[l][k] * gu[n][mm].diff(vs.zb(l)) for l in range(m)), Jet.zero(vs))
                    rhs = sum((gu[l][mm] * gu[n][k].diff(vs.zb(l)) for l in range(m)), Jet.zero(vs))
                    if not lhs.agrees(rhs):
                        return False
        return True

    def inverse_holds(self) -> bool:
        m, vs = self.m, self.base
        for k in range(m):
            for j in range(m):
                s = sum((self.g_lower[k][l] * self.g_upper[l][j] for l in range(m)), Jet.zero(vs))
                if not s.agrees(Jet.const(vs, 1 if k == j else 0)):
                    return False
        return True


def build_chart(Phi_minus1: Jet, m: int | None = None, D: int | None = None) -> ChartGeometry:
    vs = Phi_minus1.vars
    if vs.kind != "base":
        raise StructuralError("the chart potential must live on the base variable set")
    m = vs.m if m is None else m
    if m != vs.m:
        raise StructuralError("dimension does not match the potential's variable set")
    if D is None:
        D = Phi_minus1.valid if not Phi_minus1.is_exact else max(Phi_minus1.degree(), 2)
    phi = Phi_minus1.truncate(D) if not Phi_minus1.is_exact else Phi_minus1
    g_lower = [[phi.diff(vs.z(k)).diff(vs.zb(l)) for l in range(m)] for k in range(m)]
    G0 = [[c.const_term() for c in row] for row in g_lower]
    det0 = _const_det(G0)
    if not det0:
        raise DegenerateChartError("the mixed Hessian of the potential is singular at the base point")
    series_degree = max(D - 2, 0)
    # g_upper[l][k] = g^{l̄k} is the matrix inverse of g_lower[k][l]
    g_upper, det_trunc = jet_matrix_inverse(g_lower, series_degree)
    flat = all(c.degree() <= 0 for row in g_lower for c in row)
    deg = None if flat else series_degree
    unit = det_trunc.scale(1 / det0)
    log_g = unit.log(deg) if (not unit.is_exact or unit.degree() > 0) else Jet.zero(vs)
    note = "log g = log(det g(0)) + log_g; the constant is never evaluated"
    chart = ChartGeometry(m, D, phi, g_lower, g_upper, det_trunc, det0, log_g, note)
    if not chart.inverse_holds():
        raise InternalConsistencyError("metric inverse failed to verify")
    if not chart.kp_holds():
        raise InternalConsistencyError("Kähler-Poisson identities failed for an inverse Hessian")
    return chart


def flat_chart(m: int = 1) -> ChartGeometry:
    vs = VarSet("base", m)
    phi = sum((Jet.var(vs, vs.z(k)) * Jet.var(vs, vs.zb(k)) for k in range(m)), Jet.zero(vs))
    return build_chart(phi, m, 2)


def fubini_study_chart(D: int = 6) -> ChartGeometry:
    """m = 1 chart with potential log(1 + z zb) expanded to degree D."""
    vs = VarSet("base", 1)
    u = Jet.var(vs, 0) * Jet.var(vs, 1)
    phi = (Jet.const(vs, 1) + u).log(D)
    return build_chart(phi, 1, D)


def build_tm_potentials(chart: ChartGeometry, mode: str, N: int | None = None) -> FormalPotential:
    """TM potentials.

    ``xi``: (1/nu) Xi_{-1} + log g.  ``xi_tilde``: -2m log nu - (1/nu) Xi_{-1} + log g.
    ``xi_h``: the same with h = 1/N; a formal h-series when N is None.
    """
    X = chart.Xi_minus1
    lg = chart.logg(chart.tangent)
    if mode == "xi":
        return FormalPotential(NuObject({-1: X, 0: lg}))
    if mode == "xi_tilde":
        return FormalPotential(NuObject({-1: -X, 0: lg}, POLY, -2 * chart.m))
    if mode == "xi_h":
        if N is None:
            return FormalPotential(NuObject({-1: X, 0: lg}, name="h"))
        return FormalPotential(NuObject({0: X.scale(N) + lg}, name="h"))
    raise ValueError(f"unknown potential mode {mode!r}")


def base_potential(chart: ChartGeometry, extra=None) -> FormalPotential:
    """(1/nu) Phi_{-1} plus optional higher terms {n: jet}."""
    terms = {-1: chart.Phi_minus1}
    terms.update(extra or {})
    return FormalPotential(NuObject(terms))


# exterior algebra ----------------------------------------------------------------

def _wedge(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, ca in a.items():
        sa = set(ka)
        for kb, cb in b.items():
            if sa & set(kb):
                continue
            merged = ka + kb
            # sign of the sorting permutation = parity of inversions
            inv = sum(1 for x in ka for y in kb if x > y)
            key = tuple(sorted(merged))
            t = ca * cb
            if inv % 2:
                t = -t
            out[key] = out[key] + t if key in out else t
    return out


def two_form(H) -> dict:
    """-i sum H[a][b] dZ^a ∧ dZbar^b with interleaved basis order dZ^1, dZbar^1, dZ^2, ..."""
    out: dict = {}
    for a, row in enumerate(H):
        for b, c in enumerate(row):
            if not c:
                continue
            x, y = 2 * a, 2 * b + 1
            t = c * (-I)
            if x > y:
                x, y, t = y, x, -t
            out[(x, y)] = out[(x, y)] + t if (x, y) in out else t
    return out


def top_power_coefficient(H) -> Jet:
    """Coefficient of (1/n!) omega^n against the interleaved coordinate volume."""
    n = len(H)
    w = two_form(H)
    acc = w
    for _ in range(n - 1):
        acc = _wedge(acc, w)
    c = acc.get(tuple(range(2 * n)))
    if c is None:
        return H[0][0].scale(0)
    return c.scale(mpq(1, factorial(n)))


def wedge_top(chart: ChartGeometry, which: str):
    """(density coefficient, kappa) for the top wedge power of the chosen form.

    For ``omega_minus1_on_M`` kappa satisfies (1/m!) omega^m = kappa g dz dzb.
    For ``Omega_minus1_on_TM`` kappa is relative to the TM Hessian determinant.
    """
    if which == "omega_minus1_on_M":
        H = chart.g_lower
        ref = chart.det_g
    elif which == "Omega_minus1_on_TM":
        H = chart.tm_hessian
        ref = jet_det(H)
    else:
        raise ValueError(f"unknown form {which!r}")
    coef = top_power_coefficient(H)
    kappa = coef.const_term() / ref.const_term()
    if not coef.agrees(ref * kappa):
        raise InternalConsistencyError("top wedge power is not a constant multiple of the determinant")
    return coef, kappa


def lambda_constant(chart: ChartGeometry):
    """lambda_m with (1/(2m)!) Omega_{-1}^{2m} = lambda_m g^2 dz dzb deta detab."""
    coef, _ = wedge_top(chart, "Omega_minus1_on_TM")
    g = chart.det_g.lift(chart.tangent)
    g2 = g * g
    lam = coef.const_term() / g2.const_term()
    if not coef.agrees(g2 * lam):
        raise InternalConsistencyError("TM volume is not a constant multiple of g^2")
    return lam
