"""Named verification suites.

Each suite takes a chart, a nu-order and a seeded RNG and returns a
``CheckReport``; ``run_suite`` dispatches by name and ``all`` runs every suite
in a fixed order.
"""

from __future__ import annotations

import random

from gmpy2 import mpq

from .core.diffops import DiffOp
from .core.jets import Jet, VarSet
from .core.nu import NuObject
from .geometry import (ChartGeometry, base_potential, build_chart, build_tm_potentials, jet_det,
                       lambda_constant, top_power_coefficient, wedge_top)
from .groupoid import (DeltaElement, derivation_D, fourier, fourier_inv, hochschild_C, hochschild_defect,
                       laplacian, poisson_tstar, source_target, tilde_generator, tilde_LA, transfer_operator)
from .star import (apply_series, berezin, berezin_by_polarization, berezin_inverse, build_sov_star,
                   canonical_trace_density, derive_star, divergence_potentials, primed_direct, tm_star,
                   trace_defect)
from .symbols import Symbol, jk_conjugation, quantize, symbol_mul
from .toeplitz import (BulletElement, CheckReport, build_toeplitz, circ_check, compatibility_check,
                       pairing_check, random_base_jet)

__all__ = ["SUITES", "SUITE_NAMES", "run_suite", "run_all", "random_chart", "random_symbol",
           "random_tangent_jet"]


def random_chart(rng: random.Random, m: int = 1, D: int = 5) -> ChartGeometry:
    """A polynomial potential sum z^k zb^k plus random terms of degree 3..4."""
    vs = VarSet("base", m)
    phi = sum((Jet.var(vs, vs.z(k)) * Jet.var(vs, vs.zb(k)) for k in range(m)), Jet.zero(vs))
    for _ in range(rng.randint(1, 3)):
        e = [0] * vs.n
        e[rng.choice(vs.holomorphic)] += 1
        e[rng.choice(vs.antiholomorphic)] += 1
        for _ in range(rng.randint(1, 2)):
            e[rng.randrange(vs.n)] += 1
        phi = phi + Jet.monomial(vs, e, mpq(rng.choice([-2, -1, 1, 2]), rng.randint(1, 3)))
    return build_chart(phi.truncate(D).with_valid(D), m, D)


def random_symbol(chart: ChartGeometry, rng: random.Random, fibre: int = 2, terms: int = 3,
                  degree: int = 2) -> Symbol:
    m = chart.m
    out = Symbol(chart.base)
    for _ in range(terms):
        u, v = [0] * m, [0] * m
        for _ in range(rng.randint(0, fibre)):
            (u if rng.random() < 0.5 else v)[rng.randrange(m)] += 1
        out = out + Symbol.monomial(chart.base, u, v, random_base_jet(chart, rng, degree, 2))
    return out


def random_tangent_jet(chart: ChartGeometry, rng: random.Random, degree: int = 3, terms: int = 3) -> Jet:
    ts = chart.tangent
    out = Jet.zero(ts)
    for _ in range(terms):
        e = [0] * ts.n
        for _ in range(rng.randint(0, degree)):
            e[rng.randrange(ts.n)] += 1
        out = out + Jet.monomial(ts, e, mpq(rng.randint(-3, 3) or 1, rng.randint(1, 3)))
    return out


# geometry -----------------------------------------------------------------------------

def suite_kp(chart, K=3, rng=None) -> CheckReport:
    rep = CheckReport("kp")
    rep.record(chart.inverse_holds(), "g_lower g_upper = 1")
    rep.record(chart.kp_holds(), "Kahler-Poisson identities")
    ts = chart.tangent
    H = chart.tm_hessian
    m = chart.m
    fib = list(ts.fibre_indices)
    # the (z, zb) block of the TM Hessian on the zero section is the metric
    for k in range(m):
        for l in range(m):
            blk = H[k][l].set_zero(fib).project(chart.base)
            rep.record(blk.agrees(chart.g_lower[k][l]), f"zero-section block ({k},{l})")
    d = jet_det(H).const_term()
    g0 = chart.det_g.const_term()
    rep.record(d == (-1) ** m * g0 * g0, "det TM Hessian = (-1)^m det(g)^2 at the base point", d)
    return rep


# symbol calculus ------------------------------------------------------------------------

def _N_values(rng):
    return (1, 2, 5)


def _xi_h(chart, N) -> Jet:
    return build_tm_potentials(chart, "xi_h", N).value.terms[0]


def _hat(chart, P, N, fibre=1) -> DiffOp:
    if isinstance(P, Jet):
        P = _sym(chart, P, fibre) if P.vars.kind == "tangent" else Symbol.from_jet(P)
    return quantize(P, chart, N).op


def suite_commrel(chart, K=3, rng=None) -> CheckReport:
    rep = CheckReport("commrel")
    bs, ts = chart.base, chart.tangent
    m = chart.m
    phi = chart.Phi_minus1
    one = DiffOp.identity(bs)
    for N in _N_values(rng):
        X = _xi_h(chart, N)
        eta = [_hat(chart, Symbol.eta(bs, p), N) for p in range(m)]
        etab = [_hat(chart, Symbol.etab(bs, q), N) for q in range(m)]
        d_eta = [_hat(chart, X.diff(ts.f(p)), N, 0) for p in range(m)]
        d_etab = [_hat(chart, X.diff(ts.fb(q)), N, 0) for q in range(m)]
        d_z = [_hat(chart, X.diff(ts.z(p)), N) for p in range(m)]
        d_zb = [_hat(chart, X.diff(ts.zb(q)), N) for q in range(m)]
        for p in range(m):
            rep.record(d_eta[p].agrees(DiffOp.mult(phi.diff(bs.z(p)).scale(N))), f"N={N} hat dXi/deta^{p}")
            rep.record(d_etab[p].agrees(DiffOp.mult(phi.diff(bs.zb(p)).scale(N))), f"N={N} hat dXi/detab^{p}")
            want = DiffOp.partial(bs, bs.z(p))
            for l in range(m):
                c = sum((chart.gu(l, k) * phi.diff(bs.z(k)).diff(bs.z(p)) for k in range(m)), Jet.zero(bs))
                want = want - DiffOp.partial(bs, bs.zb(l), coeff=c)
            rep.record(d_z[p].agrees(want), f"N={N} hat dXi/dz^{p}", d_z[p].first_difference(want))
            want = -DiffOp.partial(bs, bs.zb(p)) + DiffOp.mult(phi.diff(bs.zb(p)).scale(N))
            for k in range(m):
                c = sum((chart.gu(l, k) * phi.diff(bs.zb(l)).diff(bs.zb(p)) for l in range(m)), Jet.zero(bs))
                want = want + DiffOp.partial(bs, bs.z(k), coeff=c) - DiffOp.mult((c * phi.diff(bs.z(k))).scale(N))
            rep.record(d_zb[p].agrees(want), f"N={N} hat dXi/dzb^{p}", d_zb[p].first_difference(want))
        for p in range(m):
            for k in range(m):
                delta = one if p == k else DiffOp.zero(bs)
                pairs = (
                    ("[dXi/deta, eta]", d_eta[p].commutator(eta[k]), delta),
                    ("[dXi/detab, etab]", d_etab[p].commutator(etab[k]), -delta),
                    ("[dXi/dz, eta]", d_z[p].commutator(eta[k]), DiffOp.zero(bs)),
                    ("[dXi/dzb, etab]", d_zb[p].commutator(etab[k]), DiffOp.zero(bs)),
                    # the two commuting families used for normal ordering
                    ("[z, eta]", DiffOp.mult(Jet.var(bs, bs.z(p))).commutator(eta[k]), DiffOp.zero(bs)),
                    ("[eta, eta]", eta[p].commutator(eta[k]), DiffOp.zero(bs)),
                    ("[zb, etab]", DiffOp.mult(Jet.var(bs, bs.zb(p))).commutator(etab[k]), DiffOp.zero(bs)),
                    ("[etab, etab]", etab[p].commutator(etab[k]), DiffOp.zero(bs)),
                )
                for name, got, want in pairs:
                    rep.record(got.agrees(want), f"N={N} {name} p={p} k={k}", got.first_difference(want))
    return rep


def _smul(P, Q, chart, N) -> Jet:
    return symbol_mul(P, Q, chart, N).terms.get(0, Symbol(chart.base)).to_tangent(chart.tangent)


def _sym(chart, F: Jet, fibre: int = 1) -> Symbol:
    # z-derivatives of Xi_h are linear in the fibre, fibre derivatives constant
    return Symbol.from_tangent(F, chart.base, max_fibre=fibre)


def _hol_poly(chart, rng, anti=False):
    bs = chart.base
    idx = bs.antiholomorphic if anti else bs.holomorphic
    out = Jet.const(bs, rng.randint(-2, 2))
    for _ in range(2):
        e = [0] * bs.n
        for _ in range(rng.randint(1, 2)):
            e[rng.choice(idx)] += 1
        out = out + Jet.monomial(bs, e, rng.choice([-1, 1, 2]))
    return out


def suite_leftast(chart, K=3, rng=None, count=3) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("leftast")
    bs, ts = chart.base, chart.tangent
    m = chart.m
    for N in _N_values(rng):
        X = _xi_h(chart, N)
        for t in range(count):
            Q = random_symbol(chart, rng)
            Qt = Q.to_tangent(ts)
            a = _hol_poly(chart, rng)
            b = _hol_poly(chart, rng, anti=True)
            checks = [
                ("L_a", _smul(a, Q, chart, N), a.lift(ts) * Qt),
                ("R_b", _smul(Q, b, chart, N), Qt * b.lift(ts)),
            ]
            for p in range(m):
                e, eb = Jet.var(ts, ts.f(p)), Jet.var(ts, ts.fb(p))
                checks += [
                    (f"L_eta{p}", _smul(Symbol.eta(bs, p), Q, chart, N), e * Qt),
                    (f"R_etab{p}", _smul(Q, Symbol.etab(bs, p), chart, N), Qt * eb),
                ]
                for name, idx, left, fd in (("dXi/deta", ts.f(p), True, 0), ("dXi/detab", ts.fb(p), False, 0),
                                            ("dXi/dz", ts.z(p), True, 1), ("dXi/dzb", ts.zb(p), False, 1)):
                    G = _sym(chart, X.diff(idx), fd)
                    got = _smul(G, Q, chart, N) if left else _smul(Q, G, chart, N)
                    checks.append((f"{'L' if left else 'R'}_{name}{p}", got, Qt.diff(idx) + X.diff(idx) * Qt))
            for name, got, want in checks:
                rep.record(got.agrees(want), f"N={N} #{t} {name}", got.first_difference(want))
    return rep


def _left_fn(chart, f: Jet, N, bound) -> DiffOp:
    return jk_conjugation(f, chart, N, "left", bound)


def suite_lbaretaq(chart, K=3, rng=None, count=3) -> CheckReport:
    """L_{etab^q} from the closed expression built out of J-conjugations
    against left multiplication computed by the symbol product."""
    rng = rng or random.Random(0)
    rep = CheckReport("lbaretaq")
    bs, ts = chart.base, chart.tangent
    m = chart.m
    phi = chart.Phi_minus1
    lg = chart.logg()
    for N in _N_values(rng):
        h = mpq(1, N)
        X = _xi_h(chart, N)
        for t in range(count):
            Q = random_symbol(chart, rng)
            Qt = Q.to_tangent(ts)
            bound = Q.fibre_degree() + 2
            for q in range(m):
                total = Jet.zero(ts)
                for p in range(m):
                    inner = Qt.diff(ts.z(p)) + X.diff(ts.z(p)) * Qt
                    inner = inner - _left_fn(chart, phi.diff(bs.z(p)).scale(N) + lg.diff(bs.z(p)), N, bound).apply(Qt)
                    for k in range(m):
                        c = phi.diff(bs.z(k)).diff(bs.z(p)).scale(N)
                        inner = inner - Jet.var(ts, ts.f(k)) * _left_fn(chart, c, N, bound).apply(Qt)
                    total = total + _left_fn(chart, chart.gu(q, p), N, bound + 1).apply(inner)
                total = total.scale(h)
                got = _smul(Symbol.etab(bs, q), Q, chart, N)
                rep.record(got.agrees(total), f"N={N} #{t} q={q}", got.first_difference(total))
    return rep


def suite_lfrf(chart, K=3, rng=None, count=3) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("lfrf")
    ts = chart.tangent
    for N in _N_values(rng):
        for t in range(count):
            f = random_base_jet(chart, rng, 3, 3)
            Q = random_symbol(chart, rng)
            Qt = Q.to_tangent(ts)
            bound = Q.fibre_degree()
            L = jk_conjugation(f, chart, N, "left", bound)
            R = jk_conjugation(f, chart, N, "right", bound)
            got, want = L.apply(Qt), _smul(f, Q, chart, N)
            rep.record(got.agrees(want), f"N={N} #{t} L_f", got.first_difference(want))
            got, want = R.apply(Qt), _smul(Q, f, chart, N)
            rep.record(got.agrees(want), f"N={N} #{t} R_f", got.first_difference(want))
            psi = DiffOp.mult(random_base_jet(chart, rng, 2, 2).lift(ts))
            for name, op in (("J", L), ("K", R)):
                c = op.commutator(psi).truncate_order(ts.fibre_indices, bound)
                rep.record(c.agrees(DiffOp.zero(ts)), f"N={N} #{t} [{name} f {name}^-1, psi] = 0", c.to_text()[:200])
    return rep


def _vanishes(x: NuObject) -> bool:
    """Zero to the known accuracy of every coefficient."""
    return not x.log and not any(x.terms.values())


# star products ---------------------------------------------------------------------------

def _star_m(chart, K):
    key = ("verify-star", K)
    if key not in chart._cache:
        chart._cache[key] = build_sov_star(base_potential(chart), K, D=chart.D, label="M")
    return chart._cache[key]


def _tm(chart, K):
    key = ("verify-tm", K)
    if key not in chart._cache:
        chart._cache[key] = tm_star(chart, K)
    return chart._cache[key]


def _c1_formula(chart, phi, psi):
    bs = chart.base
    return sum((chart.gu(l, k) * phi.diff(bs.zb(l)) * psi.diff(bs.z(k))
                for l in range(chart.m) for k in range(chart.m)), Jet.zero(bs))


def suite_sov_assoc(chart, K=3, rng=None, count=50) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("sov-assoc")
    S = _star_m(chart, K)
    products = {
        "star": S,
        "tm": _tm(chart, K),
        "dual": derive_star(S, "dual"),
        "prime": derive_star(S, "conjugate_by_B"),
    }
    for name, P in products.items():
        rep.record(P.separation_holds(), f"{name}: separation of variables")
        rep.record(P.natural_holds(), f"{name}: C_r of order <= r")
        draw = random_tangent_jet if name == "tm" else random_base_jet
        for t in range(count):
            a, b, c = (draw(chart, rng, 3, 2) for _ in range(3))
            lhs = P.mul(P.mul(a, b), c)
            rhs = P.mul(a, P.mul(b, c))
            rep.record(lhs.agrees(rhs), f"{name}: associativity #{t}",
                       {"a": a.to_text(), "b": b.to_text(), "c": c.to_text(), "diff": lhs.first_difference(rhs)})
    for t in range(count):
        a, b = random_base_jet(chart, rng, 3, 3), random_base_jet(chart, rng, 3, 3)
        got, want = S.C(1, a, b), _c1_formula(chart, a, b)
        rep.record(got.agrees(want), f"C_1 #{t}", got.first_difference(want))
    return rep


def suite_berezin_id(chart, K=3, rng=None, count=5) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("berezin-id")
    bs = chart.base
    S = _star_m(chart, K)
    B = berezin(S)
    rep.record(B.agrees(berezin_by_polarization(S)), "B from cochains = B by polarization")
    Binv = berezin_inverse(B)
    Bd = berezin(derive_star(S, "dual"))
    rep.record(Bd.agrees(Binv), "B of the dual product = B^-1", Bd.first_difference(Binv))
    for t in range(count):
        a, b = _hol_poly(chart, rng), _hol_poly(chart, rng, anti=True)
        f = random_base_jet(chart, rng, 3, 3)
        rep.record(apply_series(B, a).agrees(NuObject.single(a)), f"B a = a #{t}")
        rep.record(apply_series(B, b).agrees(NuObject.single(b)), f"B b = b #{t}")
        rep.record(apply_series(B, a * b).agrees(S.mul(b, a)), f"B(ab) = b*a #{t}")
        Bf = apply_series(Binv, f)
        got = apply_series(B, Bf * NuObject.single(a))
        rep.record(got.agrees(S.mul(f, a)), f"B a B^-1 = R_a #{t}", got.first_difference(S.mul(f, a)))
        got = apply_series(B, Bf * NuObject.single(b))
        rep.record(got.agrees(S.mul(b, f)), f"B b B^-1 = L_b #{t}", got.first_difference(S.mul(b, f)))
        rep.record(apply_series(Binv, apply_series(B, f)).agrees(NuObject.single(f)), f"B^-1 B f = f #{t}")
    if chart.is_flat() and chart.m == 1:
        z, zb = Jet.var(bs, 0), Jet.var(bs, 1)
        got = apply_series(B, z * zb)
        want = NuObject({0: z * zb, 1: Jet.const(bs, 1)})
        rep.record(got.agrees(want), "flat: B(z zb) = z zb + nu", got.to_text())
        rep.witnesses.append({"B(z*zb)": got.to_text()})
    # on the tangent bundle: B_*(u f) = f * u for monomials u(eta)
    T = _tm(chart, K)
    BT = berezin(T)
    ts = chart.tangent
    for t in range(max(count // 2, 1)):
        f = random_tangent_jet(chart, rng, 2, 2)
        f = f.set_zero(list(ts.fibre_indices))
        for p in range(chart.m):
            u = Jet.var(ts, ts.f(p))
            got, want = apply_series(BT, u * f), T.mul(f, u)
            rep.record(got.agrees(want), f"TM: B(eta^{p} f) = f * eta^{p} #{t}", got.first_difference(want))
    return rep


def suite_norm2(chart, K=3, rng=None) -> CheckReport:
    rep = CheckReport("norm2")
    ts, bs = chart.tangent, chart.base
    T = _tm(chart, K)
    xi = build_tm_potentials(chart, "xi")
    xit = build_tm_potentials(chart, "xi_tilde")
    BT = berezin(T)
    for i in range(ts.n):
        got = apply_series(BT, xit.diff(i))
        want = -xi.diff(i)
        rep.record(got.agrees(want), f"B_*(dXi~/d{ts.names[i]}) = -dXi/d{ts.names[i]}", got.first_difference(want))
    td = canonical_trace_density(T, xi)
    rep.record(td.Psi.value.log == xit.value.log, "log nu multiple of the TM dual potential", td.Psi.value.log)
    rep.record(td.Psi.value.agrees(xit.value), "canonical TM dual potential = Xi~", td.Psi.value.first_difference(xit.value))
    # on M: the canonical dual potential solves the normalization equations
    S = _star_m(chart, K)
    pot = base_potential(chart)
    tdm = canonical_trace_density(S, pot)
    B = berezin(S)
    for i in range(bs.n):
        got, want = apply_series(B, tdm.Psi.diff(i)), -pot.diff(i)
        rep.record(got.agrees(want), f"B(dPsi/d{bs.names[i]}) = -dPhi/d{bs.names[i]}", got.first_difference(want))
    if chart.is_flat() and chart.m == 1:
        z, zb = Jet.var(bs, 0), Jet.var(bs, 1)
        want = NuObject({-1: -(z * zb)}, log=-1)
        rep.record(tdm.Psi.value.agrees(want) and tdm.Psi.value.log == -1, "flat: Psi = -log nu - z zb/nu",
                   tdm.Psi.value.to_text())
        rep.witnesses.append({"Psi": tdm.Psi.value.to_text(), "log_nu": tdm.Psi.value.log})
    return rep


def suite_mustar(chart, K=3, rng=None, count=20) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("mustar")
    m = chart.m
    ts = chart.tangent
    T = _tm(chart, K)
    td = canonical_trace_density(T, build_tm_potentials(chart, "xi"))
    lam = lambda_constant(chart)
    g = chart.det_g.lift(ts)
    want = NuObject.single(g * g * lam, -2 * m)
    rep.record(td.mu.agrees(want), "mu_* = lambda nu^-2m g^2", td.mu.first_difference(want))
    top = top_power_coefficient(chart.tm_hessian)
    wedge = NuObject.single(top, -2 * m)
    rep.record(td.mu.agrees(wedge), "mu_* = Omega^2m / (nu^2m (2m)!)", td.mu.first_difference(wedge))
    rep.witnesses.append({"lambda": str(lam)})
    # trace property at integrand level on M
    S = _star_m(chart, K)
    mu = canonical_trace_density(S, base_potential(chart)).mu
    rep.record(_vanishes(trace_defect(S, mu, random_base_jet(chart, rng, 3, 3))), "trace defect vanishes")
    for t in range(count):
        phi, psi = random_base_jet(chart, rng, 3, 3), random_base_jet(chart, rng, 3, 3)
        V, rem = divergence_potentials(S, mu, phi, psi)
        comm = (S.mul(phi, psi) - S.mul(psi, phi)) * mu
        div = NuObject({})
        for i, v in enumerate(V):
            div = div + v.map(lambda j, i=i: j.diff(i))
        rep.record(_vanishes(rem) and div.agrees(comm), f"(phi*psi - psi*phi) mu is a divergence #{t}",
                   comm.first_difference(div))
    return rep


# groupoid / Fourier --------------------------------------------------------------------------

def _random_delta(chart, rng) -> DeltaElement:
    ts = chart.tangent
    terms = {}
    for n in range(3):
        j = random_base_jet(chart, rng, 2, 2).lift(ts)
        for _ in range(n):
            j = j * Jet.var(ts, rng.choice(ts.fibre_indices))
        terms[n] = j
    return DeltaElement(NuObject(terms))


def suite_fourst(chart, K=3, rng=None, count=3) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("fourst")
    ts = chart.tangent
    T = _tm(chart, K)
    for t in range(count):
        f = random_base_jet(chart, rng, 3, 3)
        for side in ("left", "right"):
            op = T.left(f.lift(ts)) if side == "left" else T.right(f.lift(ts))
            got = transfer_operator(op, chart)
            want = tilde_generator(chart, "f", f, side)
            rep.record(got.agrees(want), f"transfer {side} mult #{t}", got.first_difference(want))
        phi, psi = random_base_jet(chart, rng, 3, 3), random_base_jet(chart, rng, 3, 3)
        br = poisson_tstar(source_target(phi, chart, "S"), source_target(psi, chart, "T"))
        rep.record(not br, f"{{S(phi), T(psi)}} = 0 #{t}", br.to_text()[:200])
        A = _random_delta(chart, rng)
        back = fourier_inv(fourier(A, chart), chart)
        rep.record(back.agrees(A), f"Fourier round trip #{t}")
    return rep


def _A_of(phi: Jet, chart) -> Jet:
    ts, bs = chart.tangent, chart.base
    out = Jet.zero(ts)
    for k in range(chart.m):
        out = out + phi.diff(bs.z(k)).lift(ts) * Jet.var(ts, ts.f(k))
        out = out + phi.diff(bs.zb(k)).lift(ts) * Jet.var(ts, ts.fb(k))
    return out


def suite_lfinal(chart, K=3, rng=None, count=10) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("lfinal")
    T = _tm(chart, K)
    for t in range(count):
        phi = random_base_jet(chart, rng, 3, 3)
        A = _A_of(phi, chart)
        for side in ("left", "right"):
            op = T.left(A) if side == "left" else T.right(A)
            got = transfer_operator(op, chart)
            want = tilde_LA(phi, chart, side)
            rep.record(got.agrees(want), f"{side} A(phi) #{t}", {"phi": phi.to_text(), "diff": got.first_difference(want)})
    return rep


def suite_hochschild(chart, K=3, rng=None, count=5) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("hochschild")
    bs = chart.base
    Dop = derivation_D(chart)
    for t in range(count):
        phi, psi = random_base_jet(chart, rng, 3, 3), random_base_jet(chart, rng, 3, 3)
        got = hochschild_defect(phi, psi, chart)
        want = NuObject({1: _c1_formula(chart, psi, phi) + _c1_formula(chart, phi, psi)})
        rep.record(got.agrees(want), f"d_Hoch C #{t}", got.first_difference(want))
        # C + nu Delta is a derivation
        rest = lambda f: hochschild_C(f, chart) + NuObject({1: laplacian(f, chart)})
        lhs = rest(phi * psi)
        rhs = rest(phi) * NuObject.single(psi) + rest(psi) * NuObject.single(phi)
        rep.record(lhs.agrees(rhs), f"C + nu Delta is a derivation #{t}")
        lhs = apply_series(Dop, phi)
        rep.record(lhs.agrees(rest(phi)), f"C = -nu Delta + D #{t}", lhs.first_difference(rest(phi)))
    for k in range(chart.m):
        got = apply_series(Dop, Jet.var(bs, bs.z(k)))
        rep.record(not got, f"D z^{k} = 0")
        got = apply_series(Dop, Jet.var(bs, bs.zb(k)))
        want = -sum((chart.gu(k, j) * chart.Phi_minus1.diff(bs.z(j)) for j in range(chart.m)), Jet.zero(bs))
        rep.record(got.agrees(NuObject.single(want)), f"D zb^{k} = -g^(lk) dPhi/dz^k", got.first_difference(NuObject.single(want)))
    return rep


# Toeplitz elements -----------------------------------------------------------------------------

def _model(chart, K):
    key = ("verify-toeplitz", K)
    if key not in chart._cache:
        chart._cache[key] = build_toeplitz(chart, K)
    return chart._cache[key]


def _random_element(model, rng) -> BulletElement:
    ch = model.chart
    return model.s_element(random_base_jet(ch, rng, 2, 2), random_base_jet(ch, rng, 2, 2))


def suite_comp(chart, K=3, rng=None, count=2) -> CheckReport:
    rng = rng or random.Random(0)
    M = _model(chart, K)
    pairs = [(_random_element(M, rng), _random_element(M, rng)) for _ in range(count)]
    return compatibility_check(M, pairs, [random_base_jet(chart, rng, 2, 2)])


def suite_bullet_assoc(chart, K=3, rng=None, count=20) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("bullet-assoc")
    M = _model(chart, K)
    bs = chart.base
    eps = M.one()
    ee = M.bullet(eps, eps)
    rep.record(ee.agrees(eps), "eps . eps = eps", ee.first_difference(eps))
    for t in range(count):
        f = random_base_jet(chart, rng, 3, 3)
        Bf = M.toeplitz_element(f)
        x = M.bullet(eps, M.s_element(f))
        rep.record(x.agrees(Bf), f"eps . S(f)eps = B(f) eps #{t}", x.first_difference(Bf))
        y = M.bullet(M.s_element(Jet.const(bs, 1), f), eps)
        rep.record(y.agrees(Bf), f"T(f)eps . eps = B(f) eps #{t}", y.first_difference(Bf))
    gens = [eps]
    for k in range(chart.m):
        z, zb = Jet.var(bs, bs.z(k)), Jet.var(bs, bs.zb(k))
        gens += [M.s_element(z), M.s_element(zb), M.s_element(Jet.const(bs, 1), z),
                 M.s_element(Jet.const(bs, 1), zb)]
    gens = gens[:5]
    triples = [(a, b, c) for a in gens for b in gens for c in gens][: 3 * len(gens)]
    triples += [tuple(_random_element(M, rng) for _ in range(3)) for _ in range(count)]
    for t, (a, b, c) in enumerate(triples):
        lhs = M.bullet(M.bullet(a, b), c)
        rhs = M.bullet(a, M.bullet(b, c))
        rep.record(lhs.agrees(rhs), f"(a.b).c = a.(b.c) #{t}", lhs.first_difference(rhs))
    return rep


def suite_covar(chart, K=3, rng=None, count=30) -> CheckReport:
    rng = rng or random.Random(0)
    rep = CheckReport("covar")
    M = _model(chart, K)
    bs = chart.base
    for t in range(count):
        phi, psi = random_base_jet(chart, rng, 2, 2), random_base_jet(chart, rng, 2, 2)
        lhs = M.bullet(M.q_element(phi), M.q_element(psi))
        rhs = M.q_element(M.star.mul(phi, psi))
        rep.record(lhs.agrees(rhs), f"Q_phi . Q_psi = Q_(phi*psi) #{t}",
                   {"phi": phi.to_text(), "psi": psi.to_text(), "diff": lhs.first_difference(rhs)})
        lhs = M.bullet(M.toeplitz_element(phi), M.toeplitz_element(psi))
        rhs = M.toeplitz_element(primed_direct(M.star, phi, psi))
        rep.record(lhs.agrees(rhs), f"T_phi . T_psi = T_(phi*'psi) #{t}",
                   {"phi": phi.to_text(), "psi": psi.to_text(), "diff": lhs.first_difference(rhs)})
    if chart.is_flat() and chart.m == 1:
        z, zb = Jet.var(bs, 0), Jet.var(bs, 1)
        lhs = M.bullet(M.q_element(zb), M.q_element(z))
        rhs = M.q_element(NuObject({0: z * zb, 1: Jet.const(bs, 1)}))
        rep.record(lhs.agrees(rhs), "flat: Q_zb . Q_z = Q_(z zb + nu)", lhs.first_difference(rhs))
        rep.witnesses.append({"Q_zb.Q_z": lhs.F.value.to_text()})
    return rep


def suite_circ_eq_star(chart, K=3, rng=None) -> CheckReport:
    return circ_check(_model(chart, K))


def suite_pairing(chart, K=3, rng=None, count=10) -> CheckReport:
    rng = rng or random.Random(0)
    M = _model(chart, K)
    rep = pairing_check(M, [random_base_jet(chart, rng, 3, 3) for _ in range(count)])
    m = chart.m
    lam = lambda_constant(chart)
    _, kappa = wedge_top(chart, "omega_minus1_on_M")
    rep.record(M.eps.n == m, "eps has leading exponent m", M.eps.n)
    lead = M.eps.leading
    want = Jet.const(chart.base, kappa / lam)
    rep.record(lead.agrees(want), "eps_m = kappa_m / lambda_m", lead.to_text())
    rep.witnesses.append({"eps_n": M.eps.n, "eps_m": lead.to_text(), "kappa": str(kappa), "lambda": str(lam)})
    return rep


SUITES = {
    "kp": suite_kp,
    "commrel": suite_commrel,
    "lfrf": suite_lfrf,
    "leftast": suite_leftast,
    "lbaretaq": suite_lbaretaq,
    "sov-assoc": suite_sov_assoc,
    "berezin-id": suite_berezin_id,
    "norm2": suite_norm2,
    "mustar": suite_mustar,
    "fourst": suite_fourst,
    "lfinal": suite_lfinal,
    "hochschild": suite_hochschild,
    "comp": suite_comp,
    "bullet-assoc": suite_bullet_assoc,
    "covar": suite_covar,
    "circ-eq-star": suite_circ_eq_star,
    "pairing": suite_pairing,
}
SUITE_NAMES = tuple(SUITES) + ("all",)


def run_suite(name: str, chart: ChartGeometry, K: int = 3, seed: int = 0, **kw) -> CheckReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    return SUITES[name](chart, K, random.Random(f"{name}:{seed}"), **kw)


def run_all(chart: ChartGeometry, K: int = 3, seed: int = 0) -> list:
    return [run_suite(name, chart, K, seed) for name in SUITES]
