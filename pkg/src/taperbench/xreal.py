"""Extended-precision reference scalar.

A 128-bit-equivalent software float (MPFR at 113 significand bits) behind a
small wrapper that pins every operation to one explicit context, so results
never depend on gmpy2's thread-local state. 113 bits represent every finite
value of every supported format exactly and keep per-operation relative
error at 2**-113, comfortably below the 2**-105 budget the reference
computations require.
"""

from __future__ import annotations

from fractions import Fraction

import gmpy2

_CTX = gmpy2.context(precision=113)


def _to_mpfr(value):
    if isinstance(value, XReal):
        return value.v
    if isinstance(value, (int, float, str, type(gmpy2.mpfr(0)))):
        return gmpy2.mpfr(value, 113)
    if isinstance(value, Fraction):
        return gmpy2.mpfr(gmpy2.mpq(value.numerator, value.denominator), 113)
    raise TypeError(f"cannot make XReal from {type(value)!r}")


class XReal:
    """Immutable extended-precision real; supports nan and signed inf/zero."""

    __slots__ = ("v",)

    def __init__(self, value=0):
        object.__setattr__(self, "v", _to_mpfr(value))

    @classmethod
    def _wrap(cls, m) -> "XReal":
        out = object.__new__(cls)
        object.__setattr__(out, "v", m)
        return out

    @classmethod
    def from_parts(cls, sign: int, sig: int, exp: int) -> "XReal":
        """Exact (-1)**sign * sig * 2**exp; sig must fit in 113 bits."""
        m = _CTX.mul_2exp(gmpy2.mpfr(sig, 113), exp)
        if sign:
            m = _CTX.minus(m)  # bare -m would round in the global context
        return cls._wrap(m)

    nan = None  # filled in below
    inf = None

    # --- predicates -------------------------------------------------------
    def is_nan(self) -> bool:
        return gmpy2.is_nan(self.v)

    def is_inf(self) -> bool:
        return gmpy2.is_infinite(self.v)

    def is_finite(self) -> bool:
        return gmpy2.is_finite(self.v)

    def is_zero(self) -> bool:
        return gmpy2.is_zero(self.v)

    def sign_bit(self) -> int:
        return 1 if gmpy2.is_signed(self.v) else 0

    # --- exact field access ------------------------------------------------
    def to_parts(self):
        """(sign, sig, exp) with value == (-1)**sign * sig * 2**exp, exact.
        Only valid for finite nonzero values."""
        man, exp = self.v.as_mantissa_exp()
        man = int(man)
        if man < 0:
            return 1, -man, int(exp)
        return 0, man, int(exp)

    def to_fraction(self) -> Fraction:
        s, sig, exp = self.to_parts()
        f = Fraction(sig) * Fraction(2) ** exp
        return -f if s else f

    # --- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return XReal._wrap(_CTX.add(self.v, _to_mpfr(other)))

    def __radd__(self, other):
        return XReal._wrap(_CTX.add(_to_mpfr(other), self.v))

    def __sub__(self, other):
        return XReal._wrap(_CTX.sub(self.v, _to_mpfr(other)))

    def __rsub__(self, other):
        return XReal._wrap(_CTX.sub(_to_mpfr(other), self.v))

    def __mul__(self, other):
        return XReal._wrap(_CTX.mul(self.v, _to_mpfr(other)))

    def __rmul__(self, other):
        return XReal._wrap(_CTX.mul(_to_mpfr(other), self.v))

    def __truediv__(self, other):
        return XReal._wrap(_CTX.div(self.v, _to_mpfr(other)))

    def __rtruediv__(self, other):
        return XReal._wrap(_CTX.div(_to_mpfr(other), self.v))

    def __neg__(self):
        return XReal._wrap(_CTX.minus(self.v))

    def __abs__(self):
        if gmpy2.is_signed(self.v) and not gmpy2.is_nan(self.v):
            return XReal._wrap(_CTX.minus(self.v))
        return XReal._wrap(self.v)

    def sqrt(self) -> "XReal":
        return XReal._wrap(_CTX.sqrt(self.v))

    # --- comparison ----------------------------------------------------------
    def _cmp_other(self, other):
        return _to_mpfr(other)

    def __eq__(self, other):
        return self.v == self._cmp_other(other)

    def __ne__(self, other):
        return self.v != self._cmp_other(other)

    def __lt__(self, other):
        return self.v < self._cmp_other(other)

    def __le__(self, other):
        return self.v <= self._cmp_other(other)

    def __gt__(self, other):
        return self.v > self._cmp_other(other)

    def __ge__(self, other):
        return self.v >= self._cmp_other(other)

    def __hash__(self):
        return hash(self.v)

    def __float__(self):
        return float(self.v)

    def __repr__(self):
        return f"XReal({self.v!r})"


XReal.nan = XReal("nan")
XReal.inf = XReal("inf")
