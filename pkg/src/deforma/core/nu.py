"""Truncated formal Laurent series in a formal parameter (nu, or h).

``terms`` maps integer exponents to payloads (jets, operators, scalars,
symbols...).  Every exponent <= ``cap`` is known; higher ones are not.  An
optional integer ``log`` records a summand ``log * log(nu)``.
"""

from __future__ import annotations

from math import factorial

from gmpy2 import mpq

from ..errors import DomainError, StructuralError
from .jets import EXACT
from .scalar import as_scalar, scalar_str

__all__ = ["NuObject", "POLY"]

POLY = EXACT  # cap of a series known to be a polynomial in the parameter


def _is_scalarish(x):
    return not hasattr(x, "agrees") and not isinstance(x, NuObject)


class NuObject:
    __slots__ = ("terms", "cap", "log", "name")

    def __init__(self, terms=None, cap: int = POLY, log: int = 0, name: str = "nu"):
        cap = min(cap, POLY)
        self.cap = cap
        self.log = log
        self.name = name
        self.terms = {n: p for n, p in (terms or {}).items() if n <= cap and _nonzero(p)}

    @classmethod
    def single(cls, payload, n: int = 0, cap: int = POLY, name: str = "nu"):
        return cls({n: payload}, cap, 0, name)

    # queries -------------------------------------------------------------
    def valuation(self) -> int:
        return min(self.terms) if self.terms else POLY

    def leading(self):
        return self.terms[min(self.terms)] if self.terms else None

    def __getitem__(self, n):
        if n > self.cap:
            raise DomainError(f"{self.name}^{n} coefficient requested beyond cap {self.cap}")
        return self.terms.get(n)

    def get(self, n, default):
        p = self[n]
        return default if p is None else p

    def exponents(self):
        return sorted(self.terms)

    def __bool__(self):
        return bool(self.terms) or bool(self.log)

    def _same(self, other):
        if self.name != other.name:
            raise StructuralError(f"series in {self.name} and {other.name} cannot be combined")

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, NuObject):
            return self + NuObject.single(other, 0, POLY, self.name)
        self._same(other)
        cap = min(self.cap, other.cap)
        out = {n: p for n, p in self.terms.items() if n <= cap}
        for n, p in other.terms.items():
            if n > cap:
                continue
            out[n] = out[n] + p if n in out else p
        return NuObject(out, cap, self.log + other.log, self.name)

    __radd__ = __add__

    def __neg__(self):
        return NuObject({n: -p for n, p in self.terms.items()}, self.cap, -self.log, self.name)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def map(self, f, cap=None) -> "NuObject":
        """Apply ``f`` to every payload (a linear map is assumed)."""
        if self.log:
            raise DomainError("cannot map over a series carrying a log term")
        return NuObject({n: f(p) for n, p in self.terms.items()}, self.cap if cap is None else cap, 0, self.name)

    def scale(self, s) -> "NuObject":
        if self.log and not _int_like(s):
            raise DomainError("log term can only be scaled by an integer")
        return NuObject({n: p * s for n, p in self.terms.items()}, self.cap, int(self.log * s) if self.log else 0, self.name)

    def shift(self, k: int) -> "NuObject":
        """Multiply by the parameter to the power k."""
        if self.log:
            raise DomainError("cannot shift a series carrying a log term")
        return NuObject({n + k: p for n, p in self.terms.items()}, self.cap + k if self.cap < POLY else POLY, 0, self.name)

    def truncate(self, cap: int) -> "NuObject":
        return NuObject(self.terms, min(cap, self.cap), self.log, self.name)

    def combine(self, other: "NuObject", f, cap: int | None = None) -> "NuObject":
        """Cauchy product with payload product ``f``.

        The result is known up to min(cap_a + val_b, cap_b + val_a).
        """
        if not isinstance(other, NuObject):
            return self.map(lambda p: f(p, other))
        self._same(other)
        if self.log or other.log:
            raise DomainError("products of series with log terms are not formal series")
        va, vb = self.valuation(), other.valuation()
        bound = min(self.cap + vb, other.cap + va, POLY)
        if cap is not None:
            bound = min(bound, cap)
        out: dict = {}
        for n, p in self.terms.items():
            for k, q in other.terms.items():
                e = n + k
                if e > bound:
                    continue
                r = f(p, q)
                out[e] = out[e] + r if e in out else r
        return NuObject(out, bound, 0, self.name)

    def __mul__(self, other):
        if isinstance(other, NuObject):
            return self.combine(other, lambda p, q: p * q)
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, NuObject):
            return other.combine(self, lambda p, q: p * q)
        return self.scale(other)

    def d_dparam(self, one=None) -> "NuObject":
        """Derivative in the formal parameter; a log term contributes log / nu."""
        out = {n - 1: p * n for n, p in self.terms.items() if n}
        res = NuObject(out, self.cap - 1 if self.cap < POLY else POLY, 0, self.name)
        if self.log:
            if one is None:
                raise DomainError("a unit payload is needed to differentiate a log term")
            res = res + NuObject({-1: one * self.log}, POLY, 0, self.name)
        return res

    def exp(self, one, mul=None, lead=None) -> "NuObject":
        """exp of a series with no negative powers and no log term.

        ``one`` is the unit payload; the exponent-0 payload must admit ``.exp()``
        unless its exponential is passed as ``lead``.
        """
        if self.log:
            raise DomainError("exponentiate log terms as explicit parameter powers")
        if self.terms and min(self.terms) < 0:
            raise DomainError(f"exp of a series with negative {self.name}-powers")
        if self.cap >= POLY and any(n > 0 for n in self.terms):
            raise DomainError("exp of a non-constant series needs a finite cap")
        mul = mul or (lambda p, q: p * q)
        a0 = self.terms.get(0)
        if lead is None:
            lead = a0.exp() if a0 is not None else one
        X = NuObject({n: p for n, p in self.terms.items() if n > 0}, self.cap, 0, self.name)
        total = NuObject.single(one, 0, self.cap, self.name)
        term = total
        k = 0
        while True:
            k += 1
            term = term.combine(X, mul, cap=self.cap)
            if not term.terms:
                break
            total = total + term.map(lambda p, k=k: p * mpq(1, factorial(k)))
        return total.map(lambda p: mul(lead, p))

    def evaluate(self, value, zero=None):
        """Substitute an exact number for the parameter (polynomial series only);
        ``zero`` is returned for an empty series."""
        if self.log:
            raise DomainError("cannot evaluate a log term exactly")
        if self.cap < POLY:
            raise DomainError("evaluation needs a series that is polynomial in the parameter")
        value = as_scalar(value)
        out = None
        for n, p in sorted(self.terms.items()):
            t = p * (value ** n)
            out = t if out is None else out + t
        return zero if out is None else out

    # comparisons -----------------------------------------------------------
    def agrees(self, other, upto: int | None = None) -> bool:
        if not isinstance(other, NuObject):
            other = NuObject.single(other, 0, POLY, self.name)
        if self.log != other.log:
            return False
        cap = min(self.cap, other.cap)
        if upto is not None:
            cap = min(cap, upto)
        for n in set(self.terms) | set(other.terms):
            if n > cap:
                continue
            p, q = self.terms.get(n), other.terms.get(n)
            if p is None or q is None:
                r = p if q is None else q
                if _nonzero_within(r):
                    return False
            elif hasattr(p, "agrees"):
                if not p.agrees(q):
                    return False
            elif p != q:
                return False
        return True

    def first_difference(self, other):
        """(exponent, mine, theirs) of the lowest disagreeing order, or None."""
        if self.log != other.log:
            return ("log", self.log, other.log)
        cap = min(self.cap, other.cap)
        for n in sorted(set(self.terms) | set(other.terms)):
            if n > cap:
                break
            p, q = self.terms.get(n), other.terms.get(n)
            single = NuObject({n: p} if p is not None else {}, n, 0, self.name)
            if not single.agrees(NuObject({n: q} if q is not None else {}, n, 0, self.name)):
                return n, p, q
        return None

    def __eq__(self, other):
        if not isinstance(other, NuObject):
            return NotImplemented
        return (self.name, self.cap, self.log, self.terms) == (other.name, other.cap, other.log, other.terms)

    __hash__ = None

    def to_text(self, fmt=None) -> str:
        fmt = fmt or (lambda p: p.to_text() if hasattr(p, "to_text") else scalar_str(p))
        parts = []
        if self.log:
            parts.append(f"{self.log}*log({self.name})")
        for n in sorted(self.terms):
            parts.append(f"{self.name}^{n}: [{fmt(self.terms[n])}]")
        if self.cap < POLY:
            parts.append(f"O({self.name}^{self.cap + 1})")
        return "; ".join(parts) or "0"

    def __repr__(self):
        return f"NuObject({self.to_text()})"


def _int_like(s):
    try:
        return s == int(s)
    except (TypeError, ValueError):
        return False


def _nonzero(p):
    return bool(p) or getattr(p, "is_exact", True) is False


def _nonzero_within(p):
    # a one-sided payload only matters if it has content on its own known range
    if hasattr(p, "agrees"):
        zero = p * 0
        return not p.agrees(zero)
    return bool(p)
