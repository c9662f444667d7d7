import random

import pytest
from hypothesis import HealthCheck, settings, strategies as st
from gmpy2 import mpq

from deforma.core.jets import Jet, VarSet
from deforma.geometry import flat_chart, fubini_study_chart
from deforma.verify import random_chart

settings.register_profile("deforma", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("deforma")


@pytest.fixture(scope="session")
def flat1():
    return flat_chart(1)


@pytest.fixture(scope="session")
def flat2():
    return flat_chart(2)


@pytest.fixture(scope="session")
def fs6():
    return fubini_study_chart(6)


@pytest.fixture(scope="session")
def rand7():
    return random_chart(random.Random(11), 1, 7)


BASE1 = VarSet("base", 1)
BASE2 = VarSet("base", 2)

small_q = st.builds(mpq, st.integers(-5, 5), st.integers(1, 4))


@st.composite
def polys(draw, vs=BASE1, max_deg=3, max_terms=4):
    out = Jet.zero(vs)
    for _ in range(draw(st.integers(0, max_terms))):
        e = draw(st.lists(st.integers(0, max_deg), min_size=vs.n, max_size=vs.n))
        out = out + Jet.monomial(vs, e, draw(small_q))
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
