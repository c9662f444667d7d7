"""Truncated multivariate power series ("jets") at the chart base point.

A jet stores the coefficients of every monomial of total degree up to
``valid``; all omitted terms have degree > ``valid``.  Exact polynomials carry
``valid == EXACT``.

Monomials are packed into integers: ``B`` bits per variable, with the total
degree in the top field.  Multiplying monomials is then integer addition, and
sorting keys sorts by total degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from math import factorial

from gmpy2 import mpq

from ..errors import DomainError, StructuralError
from .scalar import GaussianRational, as_scalar, scalar_str

__all__ = ["EXACT", "VarSet", "Jet", "jet_arith", "jet_transcend"]

EXACT = 1 << 20
_B = 12
_MASK = (1 << _B) - 1

_FIBRES = {
    "base": None,
    "tangent": ("eta", "etab"),
    "cotangent": ("xi", "xib"),
    "diagonal": ("tau", "taub"),
}


@dataclass(frozen=True)
class VarSet:
    """Ordered coordinates: z^1..z^m, zb^1..zb^m, then an optional fibre pair.

    ``holomorphic`` lists z and the unbarred fibre variable; ``antiholomorphic``
    the barred ones.  For the cotangent set the fibre variables are the
    momenta xi_k, xib_l.
    """

    kind: str
    m: int

    def __post_init__(self):
        if self.kind not in _FIBRES:
            raise StructuralError(f"unknown variable-set kind {self.kind!r}")
        if self.m < 1:
            raise StructuralError("complex dimension must be positive")

    @cached_property
    def names(self) -> tuple[str, ...]:
        def block(stem):
            if self.m == 1:
                return [stem]
            return [f"{stem}{k + 1}" for k in range(self.m)]

        out = block("z") + block("zb")
        fib = _FIBRES[self.kind]
        if fib:
            out += block(fib[0]) + block(fib[1])
        return tuple(out)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def shift(self) -> int:
        return _B * self.n

    def z(self, k: int) -> int:
        return k

    def zb(self, l: int) -> int:
        return self.m + l

    def f(self, k: int) -> int:
        """Index of the unbarred fibre variable (eta, xi or tau)."""
        self._need_fibre()
        return 2 * self.m + k

    def fb(self, l: int) -> int:
        self._need_fibre()
        return 3 * self.m + l

    def _need_fibre(self):
        if self.kind == "base":
            raise StructuralError("base variable set has no fibre coordinates")

    @cached_property
    def holomorphic(self) -> tuple[int, ...]:
        idx = list(range(self.m))
        if self.kind != "base":
            idx += [2 * self.m + k for k in range(self.m)]
        return tuple(idx)

    @cached_property
    def antiholomorphic(self) -> tuple[int, ...]:
        idx = [self.m + l for l in range(self.m)]
        if self.kind != "base":
            idx += [3 * self.m + l for l in range(self.m)]
        return tuple(idx)

    @cached_property
    def base_indices(self) -> tuple[int, ...]:
        return tuple(range(2 * self.m))

    @cached_property
    def fibre_indices(self) -> tuple[int, ...]:
        return tuple(range(2 * self.m, self.n))

    @cached_property
    def units(self) -> tuple[int, ...]:
        top = 1 << self.shift
        return tuple((1 << (_B * i)) + top for i in range(self.n))

    # key packing -------------------------------------------------------
    def pack(self, exps) -> int:
        if len(exps) != self.n:
            raise StructuralError(f"exponent vector of length {len(exps)} for {self.n} variables")
        key = 0
        for i, e in enumerate(exps):
            if e < 0 or e > _MASK:
                raise StructuralError(f"exponent {e} out of range")
            key |= e << (_B * i)
        return key | (sum(exps) << self.shift)

    def unpack(self, key: int) -> tuple[int, ...]:
        return tuple((key >> (_B * i)) & _MASK for i in range(self.n))

    def exp(self, key: int, i: int) -> int:
        return (key >> (_B * i)) & _MASK

    def degree(self, key: int) -> int:
        return key >> self.shift

    def fibre_degree(self, key: int) -> int:
        return sum(self.exp(key, i) for i in self.fibre_indices)

    def monomial_str(self, key: int) -> str:
        parts = []
        for name, e in zip(self.names, self.unpack(key)):
            if e == 1:
                parts.append(name)
            elif e:
                parts.append(f"{name}^{e}")
        return "*".join(parts) or "1"

    def embedding(self, target: "VarSet") -> list[int]:
        """Positions of this set's variables inside ``target`` (same m, superset)."""
        if target.m != self.m:
            raise StructuralError("variable sets of different dimension")
        if self.kind != "base" and self.kind != target.kind:
            raise StructuralError(f"cannot embed {self.kind} variables into {target.kind}")
        return list(range(self.n))

    def base(self) -> "VarSet":
        return VarSet("base", self.m)


class Jet:
    """Truncated power series with exact Gaussian-rational coefficients."""

    __slots__ = ("vars", "c", "valid", "_hash")

    def __init__(self, vs: VarSet, coeffs: dict | None = None, valid: int = EXACT, *, _trusted=False):
        self.vars = vs
        valid = min(valid, EXACT)
        self.valid = valid
        self._hash = None
        if _trusted:
            self.c = coeffs
            return
        lim = (valid + 1) << vs.shift
        self.c = {k: v for k, v in (coeffs or {}).items() if v and k < lim}

    # construction ------------------------------------------------------
    @classmethod
    def zero(cls, vs: VarSet, valid: int = EXACT) -> "Jet":
        return cls(vs, {}, valid, _trusted=True)

    @classmethod
    def const(cls, vs: VarSet, value, valid: int = EXACT) -> "Jet":
        value = as_scalar(value)
        return cls(vs, {0: value} if value else {}, valid, _trusted=True)

    @classmethod
    def var(cls, vs: VarSet, i: int) -> "Jet":
        return cls(vs, {vs.units[i]: mpq(1)}, EXACT, _trusted=True)

    @classmethod
    def monomial(cls, vs: VarSet, exps, coeff=1) -> "Jet":
        return cls(vs, {vs.pack(exps): as_scalar(coeff)}, EXACT)

    @classmethod
    def from_terms(cls, vs: VarSet, terms, valid: int = EXACT) -> "Jet":
        """Build from ``(exponent tuple, coefficient)`` pairs."""
        out: dict = {}
        for exps, coef in terms:
            k = vs.pack(tuple(exps))
            out[k] = out.get(k, 0) + as_scalar(coef)
        return cls(vs, out, valid)

    # basic queries -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.c

    def __bool__(self):
        return bool(self.c)

    def valuation(self) -> int:
        return min(self.c) >> self.vars.shift if self.c else EXACT

    def degree(self) -> int:
        return max(self.c) >> self.vars.shift if self.c else -1

    @property
    def is_exact(self) -> bool:
        return self.valid >= EXACT

    def const_term(self):
        return self.c.get(0, mpq(0))

    def terms(self):
        """``(exponent tuple, coefficient)`` pairs in canonical order."""
        return [(self.vars.unpack(k), self.c[k]) for k in sorted(self.c)]

    def coeff(self, exps):
        return self.c.get(self.vars.pack(tuple(exps)), mpq(0))

    def _check(self, other: "Jet"):
        if self.vars != other.vars:
            raise StructuralError(f"jets on different variable sets: {self.vars} vs {other.vars}")

    # arithmetic ----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return other
        return Jet.const(self.vars, other)

    def __add__(self, other):
        other = self._coerce(other)
        valid = min(self.valid, other.valid)
        lim = (valid + 1) << self.vars.shift
        out = {k: v for k, v in self.c.items() if k < lim}
        for k, v in other.c.items():
            if k < lim:
                s = out.get(k, 0) + v
                if s:
                    out[k] = s
                else:
                    out.pop(k, None)
        return Jet(self.vars, out, valid, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.vars, {k: -v for k, v in self.c.items()}, self.valid, _trusted=True)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> "Jet":
        s = as_scalar(s)
        if not s:
            return Jet.zero(self.vars, EXACT if self.is_exact else self.valid)
        return Jet(self.vars, {k: v * s for k, v in self.c.items()}, self.valid, _trusted=True)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self.scale(other)
        self._check(other)
        valid = min(self.valid + other.valuation(), other.valid + self.valuation(), EXACT)
        if not self.c or not other.c:
            return Jet.zero(self.vars, valid)
        sh = self.vars.shift
        A = sorted(self.c.items())
        B = sorted(other.c.items())
        out: dict = {}
        get = out.get
        top = (valid + 1) << sh
        for ka, ca in A:
            lim = top - ((ka >> sh) << sh)
            for kb, cb in B:
                if kb >= lim:
                    break
                k = ka + kb
                out[k] = get(k, 0) + ca * cb
        out = {k: v for k, v in out.items() if v}
        return Jet(self.vars, out, valid, _trusted=True)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.inverse()
        return self.scale(1 / as_scalar(other))

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = Jet.const(self.vars, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    # calculus ------------------------------------------------------------
    def diff(self, i: int, k: int = 1) -> "Jet":
        """k-th partial derivative in variable i; consumes k degrees of validity."""
        if k == 0:
            return self
        vs = self.vars
        u = vs.units[i] * k
        out = {}
        for key, v in self.c.items():
            e = vs.exp(key, i)
            if e >= k:
                f = e
                for j in range(1, k):
                    f *= e - j
                out[key - u] = v * f
        return Jet(vs, out, self.valid - k if not self.is_exact else EXACT, _trusted=True)

    def diff_multi(self, exps) -> "Jet":
        out = self
        for i, e in enumerate(exps):
            if e:
                out = out.diff(i, e)
        return out

    def truncate(self, degree: int) -> "Jet":
        return Jet(self.vars, self.c, min(self.valid, degree))

    def with_valid(self, valid: int) -> "Jet":
        return Jet(self.vars, self.c, min(valid, self.valid))

    # comparisons ---------------------------------------------------------
    def agrees(self, other, upto: int | None = None) -> bool:
        """True iff coefficients coincide on every degree both jets know."""
        other = self._coerce(other)
        d = min(self.valid, other.valid)
        if upto is not None:
            d = min(d, upto)
        lim = (d + 1) << self.vars.shift
        keys = {k for k in self.c if k < lim} | {k for k in other.c if k < lim}
        return all(self.c.get(k, 0) == other.c.get(k, 0) for k in keys)

    def first_difference(self, other):
        """Lowest monomial (exponents, mine, theirs) where the jets disagree, or None."""
        other = self._coerce(other)
        d = min(self.valid, other.valid)
        lim = (d + 1) << self.vars.shift
        for k in sorted({k for k in self.c if k < lim} | {k for k in other.c if k < lim}):
            a, b = self.c.get(k, mpq(0)), other.c.get(k, mpq(0))
            if a != b:
                return self.vars.unpack(k), a, b
        return None

    def __eq__(self, other):
        if not isinstance(other, Jet):
            if isinstance(other, (int, mpq, GaussianRational)):
                return self.c == ({0: other} if other else {})
            return NotImplemented
        return self.vars == other.vars and self.valid == other.valid and self.c == other.c

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.vars, self.valid, frozenset(self.c.items())))
        return self._hash

    # re-coordinatization ---------------------------------------------------
    def lift(self, target: VarSet) -> "Jet":
        """View a jet on a sub-variable-set (e.g. base) as a jet on ``target``."""
        if target == self.vars:
            return self
        pos = self.vars.embedding(target)
        out = {}
        for key, v in self.c.items():
            exps = [0] * target.n
            for i, e in enumerate(self.vars.unpack(key)):
                exps[pos[i]] = e
            out[target.pack(exps)] = v
        return Jet(target, out, self.valid, _trusted=True)

    def project(self, target: VarSet) -> "Jet":
        """Restrict to the leading variables of ``target`` (other variables set to 0)."""
        if target == self.vars:
            return self
        nt = target.n
        out = {}
        for key, v in self.c.items():
            exps = self.vars.unpack(key)
            if any(exps[nt:]):
                continue
            out[target.pack(exps[:nt])] = v
        return Jet(target, out, self.valid, _trusted=True)

    def set_zero(self, indices) -> "Jet":
        vs = self.vars
        out = {k: v for k, v in self.c.items() if not any(vs.exp(k, i) for i in indices)}
        return Jet(vs, out, self.valid, _trusted=True)

    def split(self, indices, complete: bool = False) -> dict:
        """Group by the exponents of ``indices``: {exps: jet in the remaining variables}.

        With ``complete``, a truncated jet also reports the groups it determines
        to be zero (as zero jets of the appropriate validity).
        """
        vs = self.vars
        groups: dict = {}
        for key, v in self.c.items():
            sub = tuple(vs.exp(key, i) for i in indices)
            strip = key
            for i, e in zip(indices, sub):
                strip -= vs.units[i] * e
            groups.setdefault(sub, {})[strip] = v
        out = {}
        for sub, coeffs in groups.items():
            d = sum(sub)
            out[sub] = Jet(vs, coeffs, self.valid - d if not self.is_exact else EXACT, _trusted=True)
        if complete and not self.is_exact:
            for sub in _exponent_tuples(len(indices), self.valid):
                if sub not in out:
                    out[sub] = Jet.zero(vs, self.valid - sum(sub))
        return out

    def substitute(self, target: VarSet, images) -> "Jet":
        """Compose with the map sending variable i to the jet ``images[i]`` on ``target``.

        Omitted terms (degree > valid) map to series of valuation at least
        (valid + 1) * min valuation of the images, which bounds the result's
        validity.
        """
        images = list(images)
        if len(images) != self.vars.n:
            raise StructuralError("one image per variable is required")
        out = Jet.zero(target)
        powers = [[Jet.const(target, 1)] for _ in images]

        def power(i, e):
            p = powers[i]
            while len(p) <= e:
                p.append(p[-1] * images[i])
            return p[e]

        for key in sorted(self.c):
            term = Jet.const(target, self.c[key])
            for i, e in enumerate(self.vars.unpack(key)):
                if e:
                    term = term * power(i, e)
            out = out + term
        if not self.is_exact:
            vmin = min((img.valuation() for img in images), default=EXACT)
            out = out.with_valid((self.valid + 1) * vmin - 1)
        return out

    # transcendental --------------------------------------------------------
    def _nilpotent_series(self, coeffs, degree):
        """Sum coeffs[k] * N^k for the constant-free part N (coeffs is a function of k)."""
        N = self - self.const_term()
        if degree is not None:
            N = N.truncate(degree)
        if N.is_exact and N:
            raise DomainError("series of a non-constant exact polynomial needs an explicit degree")
        target = N.valid if N else EXACT
        out = Jet.const(self.vars, coeffs(0), valid=target)
        term = Jet.const(self.vars, 1)
        k = 0
        while True:
            k += 1
            term = (term * N).truncate(target)
            if not term:
                break
            out = out + term.scale(coeffs(k))
        return out

    def inverse(self, degree: int | None = None) -> "Jet":
        c0 = self.const_term()
        if not c0:
            raise DomainError("jet with vanishing constant term is not invertible")
        inv0 = 1 / c0
        unit = self.scale(inv0)
        return unit._nilpotent_series(lambda k: -1 if k % 2 else 1, degree).scale(inv0)

    def exp(self, degree: int | None = None) -> "Jet":
        if self.const_term():
            raise DomainError("exp of a jet with nonzero constant term is not exact")
        return self._nilpotent_series(lambda k: mpq(1, factorial(k)), degree)

    def log(self, degree: int | None = None) -> "Jet":
        if self.const_term() != 1:
            raise DomainError("log requires constant term 1; factor the constant out first")
        return self._nilpotent_series(lambda k: mpq(0) if k == 0 else mpq((-1) ** (k + 1), k), degree)

    # text ----------------------------------------------------------------
    def to_text(self) -> str:
        if not self.c:
            body = "0"
        else:
            body = " + ".join(f"({scalar_str(self.c[k])})*{self.vars.monomial_str(k)}" for k in sorted(self.c))
        return body if self.is_exact else f"{body} + O({self.valid + 1})"

    def to_json(self):
        return {
            "valid_degree": None if self.is_exact else self.valid,
            "terms": [[list(self.vars.unpack(k)), scalar_str(self.c[k])] for k in sorted(self.c)],
        }

    def __repr__(self):
        return f"Jet[{self.vars.kind}]({self.to_text()})"


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown jet operation {op!r}")


def jet_transcend(a: Jet, op: str, degree: int | None = None) -> Jet:
    if op == "exp":
        return a.exp(degree)
    if op == "log":
        return a.log(degree)
    if op == "inverse":
        return a.inverse(degree)
    raise ValueError(f"unknown transcendental operation {op!r}")


def _exponent_tuples(n: int, top: int):
    if n == 0:
        yield ()
        return
    for e in range(top + 1):
        for rest in _exponent_tuples(n - 1, top - e):
            yield (e,) + rest


def monomials(vs: VarSet, indices, max_degree: int):
    """Exponent tuples (over ``indices``) of total degree <= max_degree, graded order."""
    out = []
    for d in range(max_degree + 1):
        for combo in product(range(d + 1), repeat=len(indices)):
            if sum(combo) == d:
                out.append(combo)
    return out
