import random
from math import factorial

from gmpy2 import mpq
from hypothesis import given, strategies as st

from deforma.core.jets import Jet
from deforma.core.nu import NuObject
from deforma.geometry import base_potential, build_tm_potentials, flat_chart, fubini_study_chart
from deforma.star import (apply_series, berezin, berezin_inverse, build_sov_star, canonical_trace_density,
                          derive_star, star_mul, tm_star, trace_defect)
from deforma.toeplitz import random_base_jet

_FLAT = flat_chart(1)
_FS = fubini_study_chart(6)
_CACHE = {}


def M(chart, K=3):
    key = (id(chart), K)
    if key not in _CACHE:
        _CACHE[key] = build_sov_star(base_potential(chart), K, D=chart.D)
    return _CACHE[key]


def wick(phi, psi, K):
    out = {}
    a, b = phi, psi
    for r in range(K + 1):
        out[r] = a * b * mpq(1, factorial(r))
        a, b = a.diff(1), b.diff(0)
    return NuObject(out)


def test_wick_on_monomials():
    vs = _FLAT.base
    S = M(_FLAT, 4)
    mons = [Jet.monomial(vs, (i, j)) for i in range(4) for j in range(4) if i + j <= 3]
    for a in mons:
        for b in mons:
            assert S.mul(a, b).agrees(wick(a, b, 4))


def test_flat_generators():
    vs = _FLAT.base
    z, zb = Jet.var(vs, 0), Jet.var(vs, 1)
    S = M(_FLAT)
    assert star_mul(S, z, zb).agrees(NuObject({0: z * zb}))
    assert star_mul(S, zb, z).agrees(NuObject({0: z * zb, 1: Jet.const(vs, 1)}))
    f = random_base_jet(_FLAT, random.Random(0), 3, 3)
    assert S.mul(Jet.const(vs, 1), f).agrees(NuObject({0: f}))


def test_c1_matches_metric_formula():
    rng = random.Random(1)
    S = M(_FS)
    for _ in range(5):
        a, b = random_base_jet(_FS, rng, 3, 3), random_base_jet(_FS, rng, 3, 3)
        want = _FS.gu(0, 0) * a.diff(1) * b.diff(0)
        assert S.C(1, a, b).agrees(want)


def test_holomorphic_left_factor_is_pointwise():
    vs = _FS.base
    rng = random.Random(2)
    a = Jet.var(vs, 0) ** 2 + Jet.var(vs, 0)
    b = Jet.var(vs, 1) ** 3
    S = M(_FS)
    for _ in range(3):
        f = random_base_jet(_FS, rng, 3, 3)
        assert S.mul(a, f).agrees(NuObject({0: a * f}))
        assert S.mul(f, b).agrees(NuObject({0: f * b}))


@given(st.integers(0, 10_000))
def test_associativity_fs(seed):
    rng = random.Random(seed)
    S = M(_FS)
    a, b, c = (random_base_jet(_FS, rng, 2, 2) for _ in range(3))
    assert S.mul(S.mul(a, b), c).agrees(S.mul(a, S.mul(b, c)))


def test_structure_flags():
    S = M(_FS, 4)
    assert S.separation_holds() and S.natural_holds()


def test_opposite_involution():
    S = M(_FS)
    O = derive_star(derive_star(S, "opposite"), "opposite")
    rng = random.Random(3)
    a, b = random_base_jet(_FS, rng), random_base_jet(_FS, rng)
    assert O.mul(a, b).agrees(S.mul(a, b))


def test_berezin_flat():
    vs = _FLAT.base
    z, zb = Jet.var(vs, 0), Jet.var(vs, 1)
    B = berezin(M(_FLAT))
    assert apply_series(B, z * zb).agrees(NuObject({0: z * zb, 1: Jet.const(vs, 1)}))
    assert apply_series(B, z ** 3).agrees(NuObject({0: z ** 3}))


def test_berezin_round_trip_and_dual():
    S = M(_FS)
    B = berezin(S)
    Binv = berezin_inverse(B)
    f = random_base_jet(_FS, random.Random(4), 3, 3)
    assert apply_series(Binv, apply_series(B, f)).agrees(NuObject({0: f}))
    assert berezin(derive_star(S, "dual")).agrees(Binv)


def test_flat_canonical_trace_density():
    td = canonical_trace_density(M(_FLAT), base_potential(_FLAT))
    vs = _FLAT.base
    want = NuObject({-1: -(Jet.var(vs, 0) * Jet.var(vs, 1))}, log=-1)
    assert td.Psi.value.agrees(want)
    assert set(td.mu.terms) == {-1}
    assert td.mu.terms[-1].degree() == 0


def test_trace_density_kills_commutators():
    S = M(_FS)
    mu = canonical_trace_density(S, base_potential(_FS)).mu
    f = random_base_jet(_FS, random.Random(5), 3, 3)
    assert not any(trace_defect(S, mu, f).terms.values())


def test_tm_product_relations():
    T = tm_star(_FS, 3)
    ts = _FS.tangent
    rng = random.Random(6)
    eta = Jet.var(ts, ts.f(0))
    g = _FS.gu(0, 0, ts)
    for _ in range(3):
        phi = random_base_jet(_FS, rng, 3, 3).lift(ts)
        psi = random_base_jet(_FS, rng, 3, 3).lift(ts)
        assert T.mul(phi, psi).agrees(NuObject({0: phi * psi}))
        comm = T.mul(eta, phi) - T.mul(phi, eta)
        assert comm.agrees(NuObject({1: -(g * phi.diff(ts.zb(0)))}))


def test_tm_etab_flat():
    T = tm_star(_FLAT, 3)
    ts = _FLAT.tangent
    etab = Jet.var(ts, ts.fb(0))
    phi = random_base_jet(_FLAT, random.Random(7), 3, 3).lift(ts)
    assert T.mul(etab, phi).agrees(NuObject({0: phi * etab, 1: phi.diff(ts.z(0))}))


def test_tm_berezin_on_eta_monomials():
    T = tm_star(_FS, 3)
    ts = _FS.tangent
    BT = berezin(T)
    f = random_base_jet(_FS, random.Random(8), 2, 2).lift(ts)
    u = Jet.var(ts, ts.f(0)) ** 2
    assert apply_series(BT, u * f).agrees(T.mul(f, u))


def test_tm_normalization():
    T = tm_star(_FLAT, 3)
    td = canonical_trace_density(T, build_tm_potentials(_FLAT, "xi"))
    assert td.Psi.value.agrees(build_tm_potentials(_FLAT, "xi_tilde").value)
