"""Exact arithmetic over quadratic surds r + s*sqrt(d).

All roots of the two-state rule polynomials live in real quadratic fields
Q(sqrt(d)), so a single radicand per value is enough.  Values are kept in
the canonical form (r, s, d) with r, s rational and d a square-free
nonnegative integer; rationals always carry d = 0.
"""

from __future__ import annotations

from decimal import Decimal, localcontext
from fractions import Fraction
from math import isqrt


def squarefree_split(n: int) -> tuple[int, int]:
    """Return (m, d) with n = m**2 * d and d square-free.  Requires n >= 0."""
    if n < 0:
        raise ValueError("negative radicand")
    m, d = 1, 1
    p = 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            m *= p
        if n % p == 0:
            n //= p
            d *= p
        p += 1
    return m, d * n


class Surd:
    """A real number r + s*sqrt(d), exact."""

    __slots__ = ("r", "s", "d")

    def __init__(self, r, s=0, d: int = 0):
        r = Fraction(r)
        s = Fraction(s)
        if d < 0:
            raise ValueError("negative radicand")
        m, d0 = squarefree_split(d)
        s *= m
        if d0 <= 1:
            if d0 == 1:
                r += s
            s = Fraction(0)
            d0 = 0
        if s == 0:
            d0 = 0
        self.r, self.s, self.d = r, s, d0

    # -- construction helpers -------------------------------------------------

    @classmethod
    def sqrt_of(cls, n: int) -> "Surd":
        return cls(0, 1, n)

    def _coerce(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.d != self.d and other.d != 0 and self.d != 0:
                raise ValueError(f"incompatible radicands {self.d} and {other.d}")
            return other
        if isinstance(other, (int, Fraction)):
            return Surd(other)
        return NotImplemented

    # -- ring operations ------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Surd(self.r + o.r, self.s + o.s, max(self.d, o.d))

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.r, -self.s, self.d)

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        d = max(self.d, o.d)
        return Surd(self.r * o.r + self.s * o.s * d, self.r * o.s + self.s * o.r, d)

    __rmul__ = __mul__

    def conjugate(self) -> "Surd":
        return Surd(self.r, -self.s, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        norm = o.r * o.r - o.s * o.s * max(self.d, o.d)
        if norm == 0:
            raise ZeroDivisionError("division by zero surd")
        return self * Surd(o.r / norm, -o.s / norm, o.d)

    def __rtruediv__(self, other):
        return Surd(other, 0, self.d) / self

    # -- order ----------------------------------------------------------------

    def sign(self) -> int:
        """Exact sign in {-1, 0, 1}."""
        if self.s == 0:
            return (self.r > 0) - (self.r < 0)
        if self.r == 0:
            return 1 if self.s > 0 else -1
        # compare r with -s*sqrt(d): both sides nonzero
        if self.r > 0 and self.s > 0:
            return 1
        if self.r < 0 and self.s < 0:
            return -1
        lhs = self.r * self.r
        rhs = self.s * self.s * self.d
        if lhs == rhs:
            return 0
        if self.r > 0:  # s < 0
            return 1 if lhs > rhs else -1
        return -1 if lhs > rhs else 1

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except ValueError:
            return False
        if o is NotImplemented:
            return NotImplemented
        return (self - o).sign() == 0

    def __lt__(self, other):
        return (self - self._coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - self._coerce(other)).sign() <= 0

    def __gt__(self, other):
        return (self - self._coerce(other)).sign() > 0

    def __ge__(self, other):
        return (self - self._coerce(other)).sign() >= 0

    def __hash__(self):
        if self.s == 0:
            return hash(self.r)
        return hash((self.r, self.s, self.d))

    # -- conversions ----------------------------------------------------------

    def is_rational(self) -> bool:
        return self.s == 0

    def __float__(self) -> float:
        return float(self.r) + float(self.s) * float(self.d) ** 0.5

    def decimal_str(self, digits: int = 50) -> str:
        """Decimal expansion with `digits` significant digits."""
        with localcontext() as ctx:
            ctx.prec = digits + 10
            val = Decimal(self.r.numerator) / Decimal(self.r.denominator)
            if self.s != 0:
                # sqrt(d) to high precision via integer sqrt scaling
                scale = 10 ** (digits + 10)
                root = Decimal(isqrt(self.d * scale * scale)) / Decimal(scale)
                val += (Decimal(self.s.numerator) / Decimal(self.s.denominator)) * root
            ctx.prec = digits
            return str(+val)

    def as_surd_tuple(self) -> tuple[int, int, int, int]:
        """Canonical (u, v, d, w) with value = (u + v*sqrt(d)) / w, w > 0."""
        w = self.r.denominator * self.s.denominator // _gcd(
            self.r.denominator, self.s.denominator
        )
        u = self.r.numerator * (w // self.r.denominator)
        v = self.s.numerator * (w // self.s.denominator)
        g = _gcd(_gcd(abs(u), abs(v)), w)
        if g > 1:
            u, v, w = u // g, v // g, w // g
        return u, v, self.d, w

    def __repr__(self):
        if self.s == 0:
            return f"Surd({self.r})"
        return f"Surd({self.r} + {self.s}*sqrt({self.d}))"


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def quadratic_roots(a: int, b: int, c: int) -> list[Surd]:
    """Real roots of a*X^2 + b*X + c with integer coefficients, exact.

    Returns [] when there is no real root, one Surd for linear/double roots,
    two Surds (ascending) otherwise.
    """
    if a == 0:
        if b == 0:
            raise ValueError("degenerate polynomial")
        return [Surd(Fraction(-c, b))]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    if disc == 0:
        return [Surd(Fraction(-b, 2 * a))]
    m, d = squarefree_split(disc)
    lo = Surd(Fraction(-b, 2 * a), Fraction(-m, 2 * a), d)
    hi = Surd(Fraction(-b, 2 * a), Fraction(m, 2 * a), d)
    return [lo, hi] if lo < hi else [hi, lo]
