"""Exact Gaussian-rational scalars.

Real values are kept as plain ``gmpy2.mpq`` so the common (real) case runs at
native speed; a :class:`GaussianRational` only appears when the imaginary part
is nonzero, and arithmetic collapses back to ``mpq`` whenever it can.
"""

from __future__ import annotations

from fractions import Fraction

from gmpy2 import mpq

__all__ = ["GaussianRational", "I", "ONE", "ZERO", "as_scalar", "parse_rational", "scalar_str",
           "conj", "re_part", "im_part"]


def _q(x) -> mpq:
    if isinstance(x, mpq):
        return x
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, (int,)):
        return mpq(x)
    if isinstance(x, str):
        return parse_rational(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def parse_rational(text: str) -> mpq:
    """Parse ``"p/q"`` or ``"p"`` into an exact rational. Floats are rejected."""
    text = text.strip()
    if any(c in text for c in ".eE") and not text.lstrip("+-").isdigit():
        raise ValueError(f"not an exact rational: {text!r}")
    num, _, den = text.partition("/")
    if den:
        return mpq(int(num), int(den))
    return mpq(int(num))


class GaussianRational:
    """re + i*im with both parts exact rationals and im != 0."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re = _q(re)
        self.im = _q(im)

    @staticmethod
    def make(re, im):
        im = _q(im)
        if not im:
            return _q(re)
        return GaussianRational(re, im)

    # arithmetic ------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, GaussianRational):
            return GaussianRational.make(self.re + o.re, self.im + o.im)
        if isinstance(o, (mpq, int, Fraction)):
            return GaussianRational(self.re + o, self.im)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, o):
        if isinstance(o, GaussianRational):
            return GaussianRational.make(self.re - o.re, self.im - o.im)
        if isinstance(o, (mpq, int, Fraction)):
            return GaussianRational(self.re - o, self.im)
        return NotImplemented

    def __rsub__(self, o):
        if isinstance(o, (mpq, int, Fraction)):
            return GaussianRational(o - self.re, -self.im)
        return NotImplemented

    def __mul__(self, o):
        if isinstance(o, GaussianRational):
            return GaussianRational.make(self.re * o.re - self.im * o.im,
                                         self.re * o.im + self.im * o.re)
        if isinstance(o, (mpq, int, Fraction)):
            if not o:
                return mpq(0)
            return GaussianRational(self.re * o, self.im * o)
        return NotImplemented

    __rmul__ = __mul__

    def inverse(self):
        n = self.re * self.re + self.im * self.im
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, o):
        if isinstance(o, GaussianRational):
            return self * o.inverse()
        if isinstance(o, (mpq, int, Fraction)):
            return GaussianRational(self.re / o, self.im / o)
        return NotImplemented

    def __rtruediv__(self, o):
        if isinstance(o, (mpq, int, Fraction)):
            return self.inverse() * o
        return NotImplemented

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = mpq(1)
        base = self
        while n:
            if n & 1:
                out = base * out
            base = base * base
            n >>= 1
        return out

    def __eq__(self, o):
        if isinstance(o, GaussianRational):
            return self.re == o.re and self.im == o.im
        return False

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return True

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        return scalar_str(self)


I = GaussianRational(0, 1)
ONE = mpq(1)
ZERO = mpq(0)


def as_scalar(x):
    """Normalize ints/Fractions/strings/complex-rational pairs to engine scalars."""
    if isinstance(x, (mpq, GaussianRational)):
        return x
    if isinstance(x, tuple):
        return GaussianRational.make(x[0], x[1])
    if isinstance(x, float):
        raise TypeError("floating-point values are not accepted by the engine")
    return _q(x)


def re_part(x) -> mpq:
    return x.re if isinstance(x, GaussianRational) else x


def im_part(x) -> mpq:
    return x.im if isinstance(x, GaussianRational) else ZERO


def conj(x):
    if isinstance(x, GaussianRational):
        return GaussianRational(x.re, -x.im)
    return x


def _qstr(q: mpq) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def scalar_str(x) -> str:
    """Deterministic text form: ``3/4``, ``-i``, ``1/2+3/4i``."""
    if not isinstance(x, GaussianRational):
        return _qstr(_q(x))
    re, im = x.re, x.im
    if im == 1:
        ims = "i"
    elif im == -1:
        ims = "-i"
    else:
        ims = _qstr(im) + "i"
    if not re:
        return ims
    sign = "" if ims.startswith("-") else "+"
    return f"{_qstr(re)}{sign}{ims}"
