"""The nine acceptance criteria, each at zero tolerance.

Every criterion prints one PASS/FAIL line (also repeated in the terminal
summary).  Charts: flat m=1 and m=2, Fubini-Study jets and seeded random
polynomial potentials.  The symbol-calculus criteria use deeper jets (D = 8)
so that the operator identities are compared to a non-trivial degree.
"""

import random
from functools import lru_cache
from math import factorial

from gmpy2 import mpq

from deforma.core.jets import Jet
from deforma.core.nu import NuObject
from deforma.geometry import base_potential, flat_chart, fubini_study_chart
from deforma.star import build_sov_star, canonical_trace_density, tm_star
from deforma.symbols import Symbol, dequantize, formalize, quantize, symbol_mul
from deforma.toeplitz import random_base_jet
from deforma.verify import random_chart, random_symbol, run_suite

RESULTS = {}


@lru_cache(maxsize=None)
def chart(name):
    if name == "flat1":
        return flat_chart(1)
    if name == "flat2":
        return flat_chart(2)
    if name.startswith("fs"):
        return fubini_study_chart(int(name[2:]))
    _, seed, m, D = name.split(":")
    return random_chart(random.Random(int(seed)), int(m), int(D))


STAR_CHARTS = ["flat1", "flat2", "fs6", "rand:21:1:6", "rand:22:1:8"]
SYMBOL_CHARTS = [f"rand:{300 + s}:1:8" for s in range(8)] + ["rand:310:2:6", "rand:311:2:6"]


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.cases = 0
        self.failures = []

    def check(self, ok, label, detail=None):
        self.cases += 1
        if not ok:
            self.failures.append((label, detail))

    def suite(self, name, chart_name, K=3, **kw):
        rep = run_suite(name, chart(chart_name), K, 0, **kw)
        self.cases += rep.cases
        for f in rep.failures:
            self.failures.append((f"{chart_name} {name}: {f['case']}", f["detail"]))

    def finish(self, capsys):
        ok = not self.failures
        line = f"{'PASS' if ok else 'FAIL'} criterion {self.number}: {self.title} ({self.cases} checks)"
        RESULTS[self.number] = line
        with capsys.disabled():
            print("\n" + line)
            for label, detail in self.failures[:3]:
                print(f"    {label}: {str(detail)[:300]}")
        assert ok, self.failures[:3]


def _wick(a, b, K):
    out = {}
    for r in range(K + 1):
        out[r] = a * b * mpq(1, factorial(r))
        a, b = a.diff(1), b.diff(0)
    return NuObject(out)


def test_criterion_1_sov_solver(capsys):
    c = Criterion(1, "SOV solver reproduces Wick; C_1 formula on every chart")
    ch = chart("flat1")
    S = build_sov_star(base_potential(ch), 4, D=ch.D)
    mons = [Jet.monomial(ch.base, (i, j)) for i in range(7) for j in range(7) if i + j <= 6]
    for a in mons:
        for b in mons:
            c.check(S.mul(a, b).agrees(_wick(a, b, 4)), f"{a.to_text()} * {b.to_text()}")
    for name in STAR_CHARTS:
        ch = chart(name)
        S = build_sov_star(base_potential(ch), 3, D=ch.D)
        bs = ch.base
        rng = random.Random(name)
        for _ in range(10):
            a, b = random_base_jet(ch, rng, 3, 3), random_base_jet(ch, rng, 3, 3)
            want = sum((ch.gu(l, k) * a.diff(bs.zb(l)) * b.diff(bs.z(k))
                        for l in range(ch.m) for k in range(ch.m)), Jet.zero(bs))
            c.check(S.C(1, a, b).agrees(want), f"{name} C_1")
    c.finish(capsys)


def test_criterion_2_associativity_and_structure(capsys):
    c = Criterion(2, "associativity of four products, separation and naturality")
    for name in STAR_CHARTS:
        c.suite("sov-assoc", name, 3, count=50)
        if chart(name).D >= 6:
            # structure of the cochains up to r = 4
            c.suite("sov-assoc", name, 4, count=2)
    c.finish(capsys)


def test_criterion_3_symbol_calculus(capsys):
    c = Criterion(3, "symbol calculus: round trip, homomorphism, commutation relations")
    ch = chart("flat1")
    bs = ch.base
    eta, etab = Symbol.eta(bs, 0), Symbol.etab(bs, 0)
    comm = symbol_mul(eta, etab, ch) - symbol_mul(etab, eta, ch)
    c.check(comm.agrees(NuObject({1: Symbol.from_jet(Jet.const(bs, 1))}, name="h")), "flat [eta, etab] = h")
    for name in ["flat1", "fs8"] + SYMBOL_CHARTS[:3]:
        ch = chart(name)
        rng = random.Random(name)
        for _ in range(4):
            P = random_symbol(ch, rng, fibre=3, terms=3)
            Q = random_symbol(ch, rng, fibre=max(0, 3 - P.fibre_degree()), terms=2)
            for N in (None, 1, 2, 5):
                back = dequantize(quantize(P, ch, N), ch, N)
                c.check(back.agrees(NuObject({0: P}, name="h")), f"{name} N={N} round trip")
                lhs = quantize(symbol_mul(P, Q, ch, N), ch, N)
                rhs = quantize(P, ch, N) @ quantize(Q, ch, N)
                c.check(lhs.agrees(rhs), f"{name} N={N} homomorphism")
    for name in SYMBOL_CHARTS + ["fs8"]:
        for suite in ("kp", "commrel", "leftast", "lbaretaq", "lfrf"):
            c.suite(suite, name)
    c.finish(capsys)


def test_criterion_4_formalization(capsys):
    c = Criterion(4, "formalization is a homomorphism onto the TM product")
    for name in ["flat1", "flat2", "fs6", "fs8", "rand:22:1:8"]:
        ch = chart(name)
        T = tm_star(ch, 3)
        rng = random.Random(name)
        for _ in range(6):
            P, Q = random_symbol(ch, rng, fibre=2, terms=3), random_symbol(ch, rng, fibre=2, terms=3)
            lhs = formalize(symbol_mul(P, Q, ch))
            rhs = T.mul(P.to_tangent(), Q.to_tangent())
            c.check(lhs.agrees(rhs), f"{name} F(P*Q) = F(P)*F(Q)", lhs.first_difference(rhs))
    c.finish(capsys)


def test_criterion_5_trace_densities(capsys):
    c = Criterion(5, "canonical trace densities")
    ch = chart("flat1")
    td = canonical_trace_density(build_sov_star(base_potential(ch), 3, D=ch.D), base_potential(ch))
    want = NuObject({-1: -(Jet.var(ch.base, 0) * Jet.var(ch.base, 1))}, log=-1)
    c.check(td.Psi.value.agrees(want), "flat Psi = -log nu - z zb/nu", td.Psi.value.to_text())
    for name in STAR_CHARTS:
        c.suite("norm2", name)
        c.suite("mustar", name, count=20)
    c.finish(capsys)


def test_criterion_6_fourier_groupoid(capsys):
    c = Criterion(6, "Fourier transfer, source/target, Hochschild")
    for name in STAR_CHARTS:
        for suite in ("fourst", "hochschild"):
            c.suite(suite, name)
        c.suite("lfinal", name, count=10)
    c.finish(capsys)


def test_criterion_7_bullet_algebra(capsys):
    c = Criterion(7, "bullet algebra: idempotent, Berezin sandwich, associativity, compatibility")
    for name in STAR_CHARTS:
        c.suite("bullet-assoc", name, count=20)
        c.suite("comp", name)
    c.finish(capsys)


def test_criterion_8_covariance(capsys):
    c = Criterion(8, "Q and T elements realise the star products; circ = star")
    for name in STAR_CHARTS:
        c.suite("covar", name, count=30)
        c.suite("circ-eq-star", name)
    rep = run_suite("covar", chart("flat1"), 3, 0, count=1)
    c.check(bool(rep.witnesses), "flat witness Q_zb . Q_z recorded")
    c.finish(capsys)


def test_criterion_9_normalization(capsys):
    c = Criterion(9, "epsilon leading exponent and coefficient; pairing")
    for name in STAR_CHARTS:
        c.suite("pairing", name, count=10)
    c.finish(capsys)
