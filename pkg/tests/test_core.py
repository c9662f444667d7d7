from gmpy2 import mpq
from hypothesis import given, strategies as st

from deforma.core.diffops import DiffOp, diffop_compose
from deforma.core.jets import Jet
from deforma.core.nu import NuObject
from deforma.core.scalar import GaussianRational, I, parse_rational, scalar_str
from deforma.errors import StructuralError

from conftest import BASE1, BASE2, polys, small_q

z, zb = Jet.var(BASE1, 0), Jet.var(BASE1, 1)
one = Jet.const(BASE1, 1)


def test_parse_rational_rejects_floats():
    assert parse_rational("3/4") == mpq(3, 4)
    assert parse_rational("-2") == -2
    for bad in ("0.5", "1e3"):
        try:
            parse_rational(bad)
        except ValueError:
            continue
        raise AssertionError(bad)


def test_gaussian_arithmetic():
    assert I * I == -1
    x = GaussianRational(mpq(1, 2), mpq(3, 4))
    assert x * x.inverse() == 1
    assert scalar_str(-I) == "-i"


def test_monomial_product():
    assert (z * zb) * z == Jet.monomial(BASE1, (2, 1))


def test_truncated_product_by_hand():
    a = ((one + z) * (one + zb)).with_valid(2)
    want = one + z.scale(2) + zb.scale(2) + z * z + (z * zb).scale(4) + zb * zb
    assert (a * a).agrees(want.with_valid(2))
    assert (a * a).valid == 2


def test_geometric_series():
    inv = (one - z).with_valid(3).inverse()
    assert inv.agrees((one + z + z * z + z * z * z).with_valid(3))


def test_exp_log_round_trip():
    assert Jet.zero(BASE1).exp(4).agrees(one)
    u = (z * zb).with_valid(4)
    assert u.exp(4).log(4).agrees(u)


def test_mismatched_varsets_raise():
    try:
        z + Jet.var(BASE2, 0)
    except StructuralError:
        return
    raise AssertionError("expected StructuralError")


def test_inexact_zero_is_not_exact():
    j = Jet.zero(BASE1, 3)
    assert not j and not j.is_exact
    assert (j * z).valid == 4


@given(polys(), polys(), polys())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert a + Jet.zero(BASE1) == a


@given(polys(), polys())
def test_leibniz(a, b):
    for i in range(BASE1.n):
        assert (a * b).diff(i) == a.diff(i) * b + a * b.diff(i)


@given(polys(max_deg=2).filter(lambda p: p.const_term() != 0))
def test_inverse(p):
    p = p.with_valid(5)
    assert (p * p.inverse()).agrees(Jet.const(BASE1, 1).with_valid(5))


def test_canonical_commutator():
    dz = DiffOp.partial(BASE1, 0)
    zop = DiffOp.mult(z)
    assert diffop_compose(dz, zop) == diffop_compose(zop, dz) + DiffOp.identity(BASE1)
    dzb = DiffOp.partial(BASE1, 1)
    assert diffop_compose(dzb, dz) == diffop_compose(dz, dzb)


@given(polys(max_deg=2), polys(max_deg=2), polys(max_deg=3))
def test_composition_matches_application(p, q, f):
    P = DiffOp.mult(p) + DiffOp.partial(BASE1, 0, coeff=q)
    Q = DiffOp.partial(BASE1, 1, 2, coeff=p) + DiffOp.mult(q)
    assert diffop_compose(P, Q).apply(f) == P.apply(Q.apply(f))


@given(st.lists(small_q, min_size=1, max_size=4), st.lists(small_q, min_size=1, max_size=4))
def test_nu_series_product(a, b):
    A = NuObject({n: Jet.const(BASE1, c) for n, c in enumerate(a)})
    B = NuObject({n: Jet.const(BASE1, c) for n, c in enumerate(b)})
    prod = A * B
    for n in range(len(a) + len(b) - 1):
        want = sum((a[i] * b[n - i] for i in range(len(a)) if 0 <= n - i < len(b)), mpq(0))
        assert prod.get(n, Jet.zero(BASE1)).const_term() == want


def test_nu_exp_of_zero():
    assert NuObject({}).exp(one).agrees(NuObject.single(one))
