from deforma.verify import SUITE_NAMES, SUITES, run_all, run_suite

CLI_SUITES = ["kp", "commrel", "lfrf", "leftast", "lbaretaq", "sov-assoc", "berezin-id", "norm2", "mustar",
              "fourst", "lfinal", "hochschild", "comp", "bullet-assoc", "covar", "circ-eq-star", "pairing"]


def test_registry_names():
    assert list(SUITES) == CLI_SUITES
    assert SUITE_NAMES[-1] == "all"


def test_all_suites_pass_on_flat(flat1):
    reports = run_all(flat1, 3)
    assert [r.name for r in reports] == CLI_SUITES
    bad = [(r.name, r.failures[:1]) for r in reports if not r.passed]
    assert not bad


def test_suites_are_seeded(fs6):
    a = run_suite("covar", fs6, 3, seed=4, count=3).to_json()
    b = run_suite("covar", fs6, 3, seed=4, count=3).to_json()
    assert a == b


def test_unknown_suite(flat1):
    try:
        run_suite("nope", flat1)
    except KeyError:
        return
    raise AssertionError
