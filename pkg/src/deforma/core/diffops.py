"""Differential operators with jet coefficients, written coefficient-first.

A ``DiffOp`` is a finite sum of terms ``c_alpha * d^alpha`` over a variable
set; derivative multi-indices are packed with the same scheme as jet
monomials, so shifting a multi-index is integer addition.
"""

from __future__ import annotations

from itertools import product
from math import comb, factorial

from gmpy2 import mpq

from ..errors import DivergenceError, StructuralError
from .jets import EXACT, Jet, VarSet

__all__ = ["DiffOp", "diffop_compose", "diffop_exp"]


class DiffOp:
    __slots__ = ("vars", "terms")

    def __init__(self, vs: VarSet, terms: dict | None = None):
        self.vars = vs
        # a zero coefficient known only to finite degree still carries information
        self.terms = {k: c for k, c in (terms or {}).items() if c or not c.is_exact}

    # constructors ----------------------------------------------------------
    @classmethod
    def zero(cls, vs):
        return cls(vs, {})

    @classmethod
    def identity(cls, vs):
        return cls(vs, {0: Jet.const(vs, 1)})

    @classmethod
    def mult(cls, f: Jet):
        return cls(f.vars, {0: f})

    @classmethod
    def partial(cls, vs: VarSet, i: int, k: int = 1, coeff=None):
        c = coeff if coeff is not None else Jet.const(vs, 1)
        return cls(vs, {vs.units[i] * k: c})

    @classmethod
    def from_terms(cls, vs, pairs):
        """Build from ``(coefficient jet, derivative exponent tuple)`` pairs."""
        out: dict = {}
        for c, exps in pairs:
            k = vs.pack(tuple(exps))
            out[k] = out[k] + c if k in out else c
        return cls(vs, out)

    # queries -----------------------------------------------------------------
    def __bool__(self):
        return any(self.terms.values())

    @property
    def is_exact(self) -> bool:
        return all(c.is_exact for c in self.terms.values())

    def order(self) -> int:
        return max((k >> self.vars.shift for k, c in self.terms.items() if c), default=-1)

    def order_in(self, indices) -> int:
        vs = self.vars
        return max((sum(vs.exp(k, i) for i in indices) for k, c in self.terms.items() if c), default=-1)

    def coefficient(self, exps) -> Jet:
        return self.terms.get(self.vars.pack(tuple(exps)), Jet.zero(self.vars))

    def items(self):
        """``(derivative exponent tuple, coefficient)`` in canonical order."""
        vs = self.vars
        return [(vs.unpack(k), self.terms[k]) for k in sorted(self.terms)]

    def min_valid(self) -> int:
        return min((c.valid for c in self.terms.values()), default=EXACT)

    def _check(self, other):
        if self.vars != other.vars:
            raise StructuralError(f"operators on different variable sets: {self.vars} vs {other.vars}")

    # linear structure --------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, DiffOp):
            other = DiffOp.mult(Jet.const(self.vars, other) if not isinstance(other, Jet) else other)
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        return DiffOp(self.vars, out)

    __radd__ = __add__

    def __neg__(self):
        return DiffOp(self.vars, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        """Scalar or left-jet scaling (``D * s``); composition is ``@``."""
        if isinstance(other, DiffOp):
            return diffop_compose(self, other)
        return DiffOp(self.vars, {k: c * other for k, c in self.terms.items()})

    def __rmul__(self, other):
        return DiffOp(self.vars, {k: c * other for k, c in self.terms.items()})

    def __matmul__(self, other):
        return diffop_compose(self, other)

    def __call__(self, f: Jet) -> Jet:
        return self.apply(f)

    # action ------------------------------------------------------------------
    def apply(self, f: Jet) -> Jet:
        if f.vars != self.vars:
            raise StructuralError("operator and jet on different variable sets")
        vs = self.vars
        out = Jet.zero(vs)
        for k in sorted(self.terms):
            out = out + self.terms[k] * f.diff_multi(vs.unpack(k))
        return out

    def transpose_apply(self, mu: Jet) -> Jet:
        """Formal adjoint against the coordinate volume: sum (-1)^|a| d^a(c_a mu)."""
        vs = self.vars
        out = Jet.zero(vs)
        for k in sorted(self.terms):
            t = (self.terms[k] * mu).diff_multi(vs.unpack(k))
            out = out + (-t if (k >> vs.shift) % 2 else t)
        return out

    def commutator(self, other: "DiffOp") -> "DiffOp":
        return diffop_compose(self, other) - diffop_compose(other, self)

    def truncate_order(self, indices, bound: int) -> "DiffOp":
        vs = self.vars
        return DiffOp(vs, {k: c for k, c in self.terms.items() if sum(vs.exp(k, i) for i in indices) <= bound})

    def map_coeffs(self, f) -> "DiffOp":
        return DiffOp(self.vars, {k: f(c) for k, c in self.terms.items()})

    def lift(self, target: VarSet) -> "DiffOp":
        vs = self.vars
        out = {}
        for k, c in self.terms.items():
            exps = list(vs.unpack(k)) + [0] * (target.n - vs.n)
            out[target.pack(exps)] = c.lift(target)
        return DiffOp(target, out)

    # comparison --------------------------------------------------------------
    def agrees(self, other, upto: int | None = None) -> bool:
        if isinstance(other, (int, mpq)) or not isinstance(other, DiffOp):
            other = DiffOp.mult(Jet.const(self.vars, other)) if not isinstance(other, Jet) else DiffOp.mult(other)
        self._check(other)
        zero = Jet.zero(self.vars)
        for k in set(self.terms) | set(other.terms):
            a, b = self.terms.get(k), other.terms.get(k)
            if a is None:
                a = zero.with_valid(b.valid)
            if b is None:
                b = zero.with_valid(a.valid)
            if not a.agrees(b, upto):
                return False
        return True

    def first_difference(self, other):
        for k in sorted(set(self.terms) | set(other.terms)):
            a = self.terms.get(k, Jet.zero(self.vars))
            b = other.terms.get(k, Jet.zero(self.vars))
            d = a.first_difference(b)
            if d is not None:
                return self.vars.unpack(k), d
        return None

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    __hash__ = None

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        vs = self.vars
        parts = []
        for k in sorted(self.terms, key=lambda k: (k >> vs.shift, vs.unpack(k)[::-1])):
            d = "*".join(
                (f"d{n}" if e == 1 else f"d{n}^{e}") for n, e in zip(vs.names, vs.unpack(k)) if e
            )
            parts.append(f"[{self.terms[k].to_text()}]" + (f"*{d}" if d else ""))
        return " + ".join(parts)

    def __repr__(self):
        return f"DiffOp({self.to_text()})"


def _sub_indices(exps):
    return product(*(range(e + 1) for e in exps))


def diffop_compose(P: DiffOp, Q: DiffOp) -> DiffOp:
    """Normal form of P∘Q via the Leibniz rule."""
    if not isinstance(Q, DiffOp):
        raise StructuralError("composition needs two operators")
    P._check(Q)
    vs = P.vars
    out: dict = {}
    dcache: dict = {}
    for ka, ca in P.terms.items():
        alpha = vs.unpack(ka)
        for gamma in _sub_indices(alpha):
            coef = 1
            for a, g in zip(alpha, gamma):
                coef *= comb(a, g)
            rest = ka - vs.pack(gamma)
            for kb, qb in Q.terms.items():
                key = (kb, gamma)
                d = dcache.get(key)
                if d is None:
                    d = dcache[key] = qb.diff_multi(gamma)
                if not d and d.is_exact:
                    continue
                t = ca * d
                if coef != 1:
                    t = t.scale(coef)
                k = rest + kb
                out[k] = out[k] + t if k in out else t
    return DiffOp(vs, out)


def diffop_exp(X: DiffOp, consumer_degree: int, graded=None, max_terms: int | None = None) -> DiffOp:
    """exp(X) as a finite sum, keeping terms of derivative order <= consumer_degree in ``graded``.

    ``graded`` lists the variable indices whose derivatives X must raise
    (each power of X must carry strictly more of them).  Terms beyond the
    bound act as zero on every argument of degree <= consumer_degree in those
    variables.
    """
    vs = X.vars
    graded = tuple(range(vs.n)) if graded is None else tuple(graded)
    limit = max_terms if max_terms is not None else consumer_degree + 2
    total = DiffOp.identity(vs)
    term = DiffOp.identity(vs)
    for k in range(1, limit + 2):
        term = diffop_compose(term, X).truncate_order(graded, consumer_degree)
        if not term:
            return total
        if k > limit:
            break
        total = total + term.map_coeffs(lambda c, k=k: c.scale(mpq(1, factorial(k))))
    raise DivergenceError(
        f"exp series did not terminate within {limit} terms: the operator does not raise the grading"
    )
