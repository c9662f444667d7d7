import random

from hypothesis import given, strategies as st

from deforma.core.jets import Jet, VarSet
from deforma.core.scalar import I
from deforma.errors import DegenerateChartError
from deforma.geometry import (build_chart, build_tm_potentials, jet_det, lambda_constant,
                              top_power_coefficient, wedge_top)
from deforma.verify import random_chart


def _fs_metric(vs, D):
    # (1 + u)^-2 = sum (k+1)(-u)^k, u = z zb
    u = Jet.var(vs, 0) * Jet.var(vs, 1)
    out = Jet.zero(vs)
    for k in range(D // 2 + 1):
        out = out + (u ** k).scale((k + 1) * (-1) ** k)
    return out


def test_flat_metric(flat1):
    assert flat1.g_lower[0][0] == Jet.const(flat1.base, 1)
    assert flat1.g_upper[0][0] == Jet.const(flat1.base, 1)
    assert flat1.det_g == Jet.const(flat1.base, 1)
    assert not flat1.log_g
    assert flat1.is_flat()


def test_flat2_inverse_is_identity(flat2):
    for k in range(2):
        for l in range(2):
            assert flat2.gu(l, k) == Jet.const(flat2.base, int(k == l))


def test_fubini_study_metric(fs6):
    want = _fs_metric(fs6.base, 6)
    assert fs6.g_lower[0][0].agrees(want)
    assert fs6.det_g.agrees(want)
    assert (fs6.g_lower[0][0] * fs6.g_upper[0][0]).agrees(Jet.const(fs6.base, 1))


def test_flat_tm_potentials(flat1):
    ts = flat1.tangent
    z, zb, eta, etab = (Jet.var(ts, i) for i in range(4))
    body = z * zb + zb * eta + z * etab
    xi = build_tm_potentials(flat1, "xi").value
    assert xi.log == 0 and xi.agrees(type(xi)({-1: body}))
    xt = build_tm_potentials(flat1, "xi_tilde").value
    assert xt.agrees(type(xt)({-1: -body}, log=-2))


def test_zero_section_restriction(fs6):
    ts = fs6.tangent
    xi = build_tm_potentials(fs6, "xi").value
    fib = list(ts.fibre_indices)
    assert xi.terms[-1].set_zero(fib).agrees(fs6.Phi_minus1.lift(ts))
    assert xi.terms[0].set_zero(fib).agrees(fs6.log_g.lift(ts))


def test_flat_kahler_form_constant(flat1):
    coef, kappa = wedge_top(flat1, "omega_minus1_on_M")
    assert kappa == -I


def test_fs_volume_is_kappa_times_g(fs6):
    coef, kappa = wedge_top(fs6, "omega_minus1_on_M")
    assert kappa == -I
    assert coef.agrees(fs6.det_g.scale(kappa))


def test_flat_tm_hessian(flat1):
    H = flat1.tm_hessian
    assert jet_det(H) == Jet.const(flat1.tangent, -1)
    assert top_power_coefficient(H).const_term() != 0


def test_lambda_is_chart_independent(flat1, flat2, fs6):
    lam1 = lambda_constant(flat1)
    assert lambda_constant(fs6) == lam1
    assert lambda_constant(random_chart(random.Random(5), 1, 6)) == lam1
    assert lambda_constant(flat2) is not None


def test_degenerate_hessian_rejected():
    vs = VarSet("base", 1)
    try:
        build_chart(Jet.monomial(vs, (2, 0)), 1, 6)
    except DegenerateChartError:
        return
    raise AssertionError("expected DegenerateChartError")


@given(st.integers(0, 10_000))
def test_kahler_poisson_identities(seed):
    ch = random_chart(random.Random(seed), 1, 5)
    assert ch.inverse_holds()
    assert ch.kp_holds()
