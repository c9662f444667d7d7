import random

import pytest
from hypothesis import given, settings, strategies as st

from deforma.core.jets import Jet
from deforma.core.nu import NuObject
from deforma.geometry import flat_chart, fubini_study_chart, lambda_constant, wedge_top
from deforma.star import primed_direct
from deforma.toeplitz import build_toeplitz, circ_check, compatibility_check, pairing_check, random_base_jet

FLAT = flat_chart(1)
FS = fubini_study_chart(6)


@pytest.fixture(scope="module")
def mflat():
    return build_toeplitz(FLAT, 3)


@pytest.fixture(scope="module")
def mfs():
    return build_toeplitz(FS, 3)


def test_flat_epsilon_is_linear_in_nu(mflat):
    _, kappa = wedge_top(FLAT, "omega_minus1_on_M")
    want = NuObject({1: Jet.const(FLAT.base, kappa / lambda_constant(FLAT))})
    assert mflat.eps.value.agrees(want)
    assert mflat.eps.n == 1


def test_epsilon_leading_order_fs(mfs):
    _, kappa = wedge_top(FS, "omega_minus1_on_M")
    assert mfs.eps.n == FS.m
    assert mfs.eps.leading.agrees(Jet.const(FS.base, kappa / lambda_constant(FS)))


@pytest.mark.parametrize("model", ["mflat", "mfs"])
def test_epsilon_idempotent(model, request):
    M = request.getfixturevalue(model)
    eps = M.one()
    assert M.bullet(eps, eps).agrees(eps)
    assert M.toeplitz_element(Jet.const(M.chart.base, 1)).agrees(eps)


def test_epsilon_sandwich(mfs):
    bs = FS.base
    f = random_base_jet(FS, random.Random(1), 3, 3)
    want = mfs.toeplitz_element(f)
    eps = mfs.one()
    assert mfs.bullet(eps, mfs.s_element(f)).agrees(want)
    assert mfs.bullet(mfs.s_element(Jet.const(bs, 1), f), eps).agrees(want)


def test_flat_wick_witnesses(mflat):
    bs = FLAT.base
    z, zb = Jet.var(bs, 0), Jet.var(bs, 1)
    Q = mflat.q_element
    assert mflat.bullet(Q(z), Q(zb)).agrees(Q(z * zb))
    assert mflat.bullet(Q(zb), Q(z)).agrees(Q(NuObject({0: z * zb, 1: Jet.const(bs, 1)})))
    got = mflat.bullet(Q(z * zb), Q(z * zb))
    want = Q(NuObject({0: z * z * zb * zb, 1: z * zb}))
    assert got.agrees(want)


def test_holomorphic_absorption(mfs):
    a = Jet.var(FS.base, 0) ** 2
    psi = random_base_jet(FS, random.Random(2), 3, 3)
    Q = mfs.q_element
    assert mfs.bullet(Q(a), Q(psi)).agrees(Q(a * psi))


@settings(max_examples=8)
@given(st.integers(0, 10_000))
def test_covariance_fs(seed):
    M = _fs_model()
    rng = random.Random(seed)
    phi, psi = random_base_jet(FS, rng, 2, 2), random_base_jet(FS, rng, 2, 2)
    assert M.bullet(M.q_element(phi), M.q_element(psi)).agrees(M.q_element(M.star.mul(phi, psi)))
    lhs = M.bullet(M.toeplitz_element(phi), M.toeplitz_element(psi))
    assert lhs.agrees(M.toeplitz_element(primed_direct(M.star, phi, psi)))


def test_bullet_associative_fs(mfs):
    rng = random.Random(3)
    els = [mfs.s_element(random_base_jet(FS, rng, 2, 2), random_base_jet(FS, rng, 2, 2)) for _ in range(3)]
    a, b, c = els
    assert mfs.bullet(mfs.bullet(a, b), c).agrees(mfs.bullet(a, mfs.bullet(b, c)))


def test_compatibility(mfs):
    rng = random.Random(4)
    pair = (mfs.s_element(random_base_jet(FS, rng, 2, 2)), mfs.s_element(Jet.const(FS.base, 1),
                                                                         random_base_jet(FS, rng, 2, 2)))
    rep = compatibility_check(mfs, [pair])
    assert rep.passed, rep.failures[:1]


def test_circ_equals_star(mflat, mfs):
    for M in (mflat, mfs):
        rep = circ_check(M)
        assert rep.passed, rep.failures[:1]


def test_pairing(mflat, mfs):
    bs = FLAT.base
    rep = pairing_check(mflat, [Jet.const(bs, 1), Jet.var(bs, 0) * Jet.var(bs, 1)])
    assert rep.passed, rep.failures[:1]
    rep = pairing_check(mfs, [random_base_jet(FS, random.Random(5), 3, 3)])
    assert rep.passed, rep.failures[:1]


def _fs_model(_cache={}):
    if "m" not in _cache:
        _cache["m"] = build_toeplitz(FS, 3)
    return _cache["m"]
