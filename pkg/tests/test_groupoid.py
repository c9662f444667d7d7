import random

from hypothesis import given, strategies as st

from deforma.core.diffops import DiffOp
from deforma.core.jets import Jet
from deforma.core.nu import NuObject
from deforma.core.scalar import I
from deforma.geometry import flat_chart, fubini_study_chart
from deforma.groupoid import (DeltaElement, XiElement, XiOperator, delta_extension, derivation_D,
                              extend_bidifferential, fourier, fourier_inv, hochschild_defect, poisson_tstar,
                              restrict, source_target, st_apply, st_invert, tensor, tilde_LA, transfer_operator)
from deforma.star import tm_star
from deforma.toeplitz import random_base_jet

FLAT = flat_chart(1)
FS = fubini_study_chart(6)


def test_delta_density_transforms_to_one():
    ts, cs = FLAT.tangent, FLAT.cotangent
    X = fourier(DeltaElement(NuObject({0: Jet.const(ts, 1)})), FLAT)
    assert X.agrees(XiElement(NuObject({0: Jet.const(cs, 1)})))


def test_fibre_derivative_transforms_to_momentum():
    ts, cs = FLAT.tangent, FLAT.cotangent
    A = DeltaElement(NuObject({1: Jet.var(ts, ts.f(0))}))
    assert fourier(A, FLAT).agrees(XiElement(NuObject({0: Jet.var(cs, cs.f(0)).scale(-I)})))


@given(st.integers(0, 10_000))
def test_fourier_round_trip(seed):
    rng = random.Random(seed)
    ts = FS.tangent
    terms = {}
    for n in range(3):
        j = random_base_jet(FS, rng, 2, 2).lift(ts)
        for _ in range(n):
            j = j * Jet.var(ts, rng.choice(ts.fibre_indices))
        terms[n] = j
    A = DeltaElement(NuObject(terms))
    assert fourier_inv(fourier(A, FS), FS).agrees(A)


def test_eta_transfers_to_momentum_derivative():
    ts, cs = FLAT.tangent, FLAT.cotangent
    op = transfer_operator(NuObject({0: DiffOp.mult(Jet.var(ts, ts.f(0)))}), FLAT)
    want = XiOperator(NuObject({1: DiffOp.partial(cs, cs.f(0), coeff=Jet.const(cs, -I))}))
    assert op.agrees(want)


def test_transfer_of_tm_multiplication():
    T = tm_star(FS, 3)
    f = random_base_jet(FS, random.Random(1), 3, 3)
    got = transfer_operator(T.left(f.lift(FS.tangent)), FS)
    assert got.agrees(XiOperator.mult(source_target(f, FS, "S")))
    got = transfer_operator(T.right(f.lift(FS.tangent)), FS)
    assert got.agrees(XiOperator.mult(source_target(f, FS, "T")))


def test_source_target_flat():
    cs, bs = FLAT.cotangent, FLAT.base
    z, zb = Jet.var(bs, 0), Jet.var(bs, 1)
    Z, ZB, XI, XIB = (Jet.var(cs, i) for i in range(4))
    assert source_target(zb, FLAT, "S") == ZB - XI.scale(I)
    assert source_target(z, FLAT, "S") == Z
    assert source_target(z, FLAT, "T") == Z - XIB.scale(I)
    assert source_target(zb, FLAT, "T") == ZB


def test_canonical_brackets():
    cs = FLAT.cotangent
    Z, XI = Jet.var(cs, 0), Jet.var(cs, cs.f(0))
    assert poisson_tstar(XI, Z) == Jet.const(cs, 1)
    Szb = source_target(Jet.var(FLAT.base, 1), FLAT, "S")
    assert poisson_tstar(Szb, Z) == Jet.const(cs, -I)


def test_source_is_poisson_flat():
    bs = FLAT.base
    f = random_base_jet(FLAT, random.Random(2), 3, 3)
    S = lambda x: source_target(x, FLAT, "S")
    lhs = poisson_tstar(S(Jet.var(bs, 1)), S(f))
    assert lhs.agrees(S(f.diff(0).scale(-I)))


@given(st.integers(0, 10_000))
def test_source_and_target_commute(seed):
    rng = random.Random(seed)
    phi, psi = random_base_jet(FS, rng, 3, 3), random_base_jet(FS, rng, 3, 3)
    br = poisson_tstar(source_target(phi, FS, "S"), source_target(psi, FS, "T"))
    assert not br


def test_holomorphic_fixed_by_source():
    a = Jet.var(FS.base, 0) ** 2
    assert source_target(a, FS, "S").agrees(a.lift(FS.cotangent))


def test_diagonal_model():
    ds = FLAT.diagonal
    z, zb = Jet.var(FLAT.base, 0), Jet.var(FLAT.base, 1)
    want = Jet.var(ds, 0) * (Jet.var(ds, 1) + Jet.var(ds, ds.fb(0)))
    assert delta_extension(z * zb, FLAT).value.agrees(NuObject({0: want}))
    assert restrict(delta_extension(z * zb, FLAT), "zbar_eq_wbar").agrees(
        DiagElement_of(z * zb, ds))


def DiagElement_of(f, ds):
    from deforma.groupoid import DiagElement
    return DiagElement(NuObject({0: f.lift(ds)}))


def test_st_on_tensors():
    rng = random.Random(3)
    bs = FS.base
    phi, psi = random_base_jet(FS, rng, 3, 3), random_base_jet(FS, rng, 3, 3)
    one = Jet.const(bs, 1)
    assert st_apply(tensor(phi, one, FS), FS).agrees(XiElement(NuObject({0: source_target(phi, FS, "S")})))
    assert st_apply(tensor(one, psi, FS), FS).agrees(XiElement(NuObject({0: source_target(psi, FS, "T")})))
    assert st_apply(delta_extension(phi, FS), FS).agrees(XiElement(NuObject({0: phi.lift(FS.cotangent)})))
    F = tensor(phi, psi, FS)
    assert st_invert(st_apply(F, FS), FS).agrees(F)


def test_extension_with_identity():
    rng = random.Random(4)
    bs = FS.base
    p1, q1, p2, q2 = (random_base_jet(FS, rng, 2, 2) for _ in range(4))
    ident = NuObject({0: DiffOp.identity(bs)})
    got = extend_bidifferential(ident, tensor(p1, q1, FS), tensor(p2, q2, FS), FS)
    want = tensor(p1, q2, FS) * delta_extension(q1 * p2, FS)
    assert got.agrees(want)


def test_tilde_la_on_z_is_momentum_derivative():
    cs = FLAT.cotangent
    got = tilde_LA(Jet.var(FLAT.base, 0), FLAT, "left")
    want = XiOperator(NuObject({1: DiffOp.partial(cs, cs.f(0), coeff=Jet.const(cs, -I))}))
    assert got.agrees(want)


def test_hochschild_identity_fs():
    rng = random.Random(5)
    g = FS.gu(0, 0)
    phi, psi = random_base_jet(FS, rng, 3, 3), random_base_jet(FS, rng, 3, 3)
    want = g * (phi.diff(0) * psi.diff(1) + psi.diff(0) * phi.diff(1))
    assert hochschild_defect(phi, psi, FS).agrees(NuObject({1: want}))


def test_derivation_on_antiholomorphic_coordinate():
    bs = FS.base
    D0 = derivation_D(FS).terms[0]
    want = -(FS.gu(0, 0) * FS.Phi_minus1.diff(0))
    assert D0.apply(Jet.var(bs, 1)).agrees(want)
    assert not D0.apply(Jet.var(bs, 0))
