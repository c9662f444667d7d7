import random

from hypothesis import given, strategies as st

from deforma.core.diffops import DiffOp
from deforma.core.jets import Jet
from deforma.core.nu import NuObject
from deforma.star import tm_star
from deforma.symbols import Symbol, dequantize, formalize, jk_conjugation, quantize, symbol_mul
from deforma.verify import random_symbol


def H(terms):
    return NuObject(terms, name="h")


def _ops(vs):
    z, zb = Jet.var(vs, 0), Jet.var(vs, 1)
    return z, zb, DiffOp.partial(vs, 0), DiffOp.partial(vs, 1)


def test_function_symbol_is_multiplication(fs6):
    f = Jet.var(fs6.base, 0) * Jet.var(fs6.base, 1)
    got = quantize(Symbol.from_jet(f), fs6).series
    assert got.agrees(H({0: DiffOp.mult(f)}))


def test_flat_eta_hats(flat1):
    vs = flat1.base
    z, zb, dz, dzb = _ops(vs)
    eta = quantize(Symbol.eta(vs, 0), flat1).series
    assert eta.agrees(H({1: -dzb}))
    etab = quantize(Symbol.etab(vs, 0), flat1).series
    assert etab.agrees(H({1: dz, 0: -DiffOp.mult(zb)}))


def test_flat_dequantize(flat1):
    vs = flat1.base
    z, zb, dz, dzb = _ops(vs)
    assert dequantize(H({1: -dzb}), flat1).agrees(H({0: Symbol.eta(vs, 0)}))
    from deforma.core.diffops import diffop_compose
    op = H({2: -diffop_compose(dz, dzb), 1: diffop_compose(DiffOp.mult(zb), dzb)})
    want = H({0: Symbol.eta(vs, 0) * Symbol.etab(vs, 0), 1: -Symbol.from_jet(Jet.const(vs, 1))})
    assert dequantize(op, flat1).agrees(want)


def test_flat_eta_products(flat1):
    vs = flat1.base
    eta, etab = Symbol.eta(vs, 0), Symbol.etab(vs, 0)
    assert symbol_mul(eta, etab, flat1).agrees(H({0: eta * etab}))
    want = H({0: eta * etab, 1: -Symbol.from_jet(Jet.const(vs, 1))})
    assert symbol_mul(etab, eta, flat1).agrees(want)
    nu = formalize(symbol_mul(etab, eta, flat1))
    ts = flat1.tangent
    assert nu.agrees(NuObject({0: Jet.var(ts, 2) * Jet.var(ts, 3), 1: -Jet.const(ts, 1)}))


def test_f_times_eta(fs6):
    vs = fs6.base
    f = Jet.var(vs, 0) ** 2 * Jet.var(vs, 1) + Jet.var(vs, 1) ** 3
    eta = Symbol.eta(vs, 0)
    got = symbol_mul(Symbol.from_jet(f), eta, fs6)
    want = H({0: eta * Symbol.from_jet(f), 1: Symbol.from_jet(fs6.gu(0, 0) * f.diff(1))})
    assert got.agrees(want)


def test_functions_commute_under_product(fs6):
    vs = fs6.base
    a = Jet.var(vs, 0) + Jet.var(vs, 1) ** 2
    b = Jet.var(vs, 0) * Jet.var(vs, 1)
    assert symbol_mul(Symbol.from_jet(a), Symbol.from_jet(b), fs6).agrees(H({0: Symbol.from_jet(a * b)}))


def test_jk_conjugation_flat(flat1):
    ts = flat1.tangent
    z, zb = Jet.var(flat1.base, 0), Jet.var(flat1.base, 1)
    Z, ZB = Jet.var(ts, 0), Jet.var(ts, 1)
    assert jk_conjugation(z, flat1).agrees(NuObject({0: DiffOp.mult(Z)}, name="h"))
    want = NuObject({0: DiffOp.mult(ZB), 1: DiffOp.partial(ts, ts.f(0))}, name="h")
    assert jk_conjugation(zb, flat1).agrees(want)
    want = NuObject({0: DiffOp.mult(Z * ZB), 1: DiffOp.partial(ts, ts.fb(0), coeff=ZB)}, name="h")
    assert jk_conjugation(z * zb, flat1, side="right").agrees(want)


def test_constant_formalizes_to_itself(flat1):
    c = Symbol.from_jet(Jet.const(flat1.base, 7))
    assert formalize(c).agrees(NuObject({0: Jet.const(flat1.tangent, 7)}))


@given(st.integers(0, 10_000), st.sampled_from([1, 2, 5]))
def test_round_trip(seed, N):
    from deforma.geometry import flat_chart
    ch = flat_chart(1)
    P = random_symbol(ch, random.Random(seed), fibre=3, terms=3)
    assert dequantize(quantize(P, ch, N), ch, N).agrees(NuObject({0: P}, name="h"))
    assert dequantize(quantize(P, ch), ch).agrees(NuObject({0: P}, name="h"))


@given(st.integers(0, 10_000))
def test_product_is_associative(seed):
    from deforma.geometry import flat_chart
    ch = flat_chart(1)
    rng = random.Random(seed)
    P, Q, R = (random_symbol(ch, rng, fibre=1, terms=2) for _ in range(3))
    lhs = symbol_mul(symbol_mul(P, Q, ch), R, ch)
    rhs = symbol_mul(P, symbol_mul(Q, R, ch), ch)
    assert lhs.agrees(rhs)


def test_formalization_homomorphism_fs(fs6):
    rng = random.Random(2)
    T = tm_star(fs6, 3)
    for _ in range(4):
        P, Q = random_symbol(fs6, rng, fibre=2, terms=2), random_symbol(fs6, rng, fibre=2, terms=2)
        lhs = formalize(symbol_mul(P, Q, fs6))
        rhs = T.mul(P.to_tangent(), Q.to_tangent())
        assert lhs.agrees(rhs)
