"""Exact arithmetic: rationals, the 12th cyclotomic field, Laurent series, intervals.

Everything here is immutable.  Rationals are :class:`fractions.Fraction`;
``BigRational`` is an alias kept for readability at call sites.

The cyclotomic field is Q(zeta) with zeta = exp(i*pi/6), stored in the basis
{1, zeta, zeta^2, zeta^3} modulo the minimal polynomial x^4 - x^2 + 1.  It
contains omega = zeta^4, i = zeta^3 and sqrt(3) = zeta + zeta^-1.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence, Union

BigRational = Fraction

__all__ = [
    "BigRational",
    "rat",
    "rat_to_str",
    "rat_from_str",
    "CycloNum",
    "ZERO",
    "ONE",
    "ZETA",
    "OMEGA",
    "OMEGA2",
    "I",
    "SQRT3",
    "MU",
    "gamma",
    "cyclo_mul",
    "cyclo_inv",
    "cyclo_conj",
    "PiPoly",
    "LaurentSeries",
    "WindowError",
    "series_residue",
    "RatInterval",
    "PI_OVER_SQRT3",
    "pipoly_eval",
    "machin_pi_over_sqrt3",
]


def rat(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return rat_from_str(x)
    return Fraction(x)


def rat_to_str(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rat_from_str(s: str) -> Fraction:
    s = s.strip()
    if "/" in s:
        p, q = s.split("/")
        return Fraction(int(p), int(q))
    return Fraction(int(s))


# --------------------------------------------------------------------------
# Q(zeta_12)
# --------------------------------------------------------------------------

_Scalar = Union[int, Fraction]


def _reduce7(c: Sequence[int]) -> list[int]:
    """Reduce a length-7 coefficient list (powers 0..6) by zeta^4 = zeta^2 - 1."""
    c0, c1, c2, c3, c4, c5, c6 = c
    # zeta^6 = -1, zeta^5 = zeta^3 - zeta, zeta^4 = zeta^2 - 1
    return [c0 - c4 - c6, c1 - c5, c2 + c4, c3 + c5]


def _normalize(nums: Sequence[int], den: int) -> tuple[tuple[int, ...], int]:
    if den == 0:
        raise ZeroDivisionError("zero denominator")
    if den < 0:
        nums = [-n for n in nums]
        den = -den
    g = reduce(math.gcd, nums, den)
    if g > 1:
        nums = [n // g for n in nums]
        den //= g
    return tuple(nums), den


class CycloNum:
    """Element of Q(zeta_12), coefficients over a common positive denominator."""

    __slots__ = ("_n", "_d", "_hash")

    def __init__(self, c0: _Scalar = 0, c1: _Scalar = 0, c2: _Scalar = 0, c3: _Scalar = 0):
        fr = [Fraction(c) for c in (c0, c1, c2, c3)]
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fr), 1)
        self._n, self._d = _normalize([f.numerator * (den // f.denominator) for f in fr], den)
        self._hash = None

    @classmethod
    def _raw(cls, nums, den: int) -> "CycloNum":
        obj = object.__new__(cls)
        obj._n, obj._d = _normalize(nums, den)
        obj._hash = None
        return obj

    @classmethod
    def from_ints(cls, nums: Sequence[int], den: int = 1) -> "CycloNum":
        return cls._raw(list(nums), den)

    @classmethod
    def coerce(cls, x) -> "CycloNum":
        if isinstance(x, CycloNum):
            return x
        if isinstance(x, (int, Fraction)):
            x = Fraction(x)
            return cls._raw([x.numerator, 0, 0, 0], x.denominator)
        raise TypeError(f"cannot coerce {type(x).__name__} to CycloNum")

    # coefficients -------------------------------------------------------
    @property
    def coeffs(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return tuple(Fraction(n, self._d) for n in self._n)  # type: ignore[return-value]

    c0 = property(lambda self: Fraction(self._n[0], self._d))
    c1 = property(lambda self: Fraction(self._n[1], self._d))
    c2 = property(lambda self: Fraction(self._n[2], self._d))
    c3 = property(lambda self: Fraction(self._n[3], self._d))

    @property
    def numerators(self) -> tuple[int, ...]:
        return self._n

    @property
    def denominator(self) -> int:
        return self._d

    def is_zero(self) -> bool:
        return not any(self._n)

    def is_rational(self) -> bool:
        return not (self._n[1] or self._n[2] or self._n[3])

    def to_rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self!r} is not rational")
        return Fraction(self._n[0], self._d)

    def is_real(self) -> bool:
        return self == self.conj()

    def __complex__(self) -> complex:
        z = cmath.exp(1j * math.pi / 6)
        n = self._n
        return (n[0] + n[1] * z + n[2] * z * z + n[3] * z ** 3) / self._d

    def to_complex(self) -> complex:
        return complex(self)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, CycloNum):
            if isinstance(other, (int, Fraction)):
                other = CycloNum.coerce(other)
            else:
                return NotImplemented
        a, b = self._n, other._n
        da, db = self._d, other._d
        if da == db:
            return CycloNum._raw([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]], da)
        return CycloNum._raw(
            [a[0] * db + b[0] * da, a[1] * db + b[1] * da, a[2] * db + b[2] * da, a[3] * db + b[3] * da],
            da * db,
        )

    __radd__ = __add__

    def __neg__(self):
        obj = object.__new__(CycloNum)
        obj._n = tuple(-x for x in self._n)
        obj._d = self._d
        obj._hash = None
        return obj

    def __sub__(self, other):
        if not isinstance(other, CycloNum):
            if isinstance(other, (int, Fraction)):
                other = CycloNum.coerce(other)
            else:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            return CycloNum._raw([x * other.numerator for x in self._n], self._d * other.denominator)
        if not isinstance(other, CycloNum):
            return NotImplemented
        a0, a1, a2, a3 = self._n
        b0, b1, b2, b3 = other._n
        c = (
            a0 * b0,
            a0 * b1 + a1 * b0,
            a0 * b2 + a1 * b1 + a2 * b0,
            a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0,
            a1 * b3 + a2 * b2 + a3 * b1,
            a2 * b3 + a3 * b2,
            a3 * b3,
        )
        return CycloNum._raw(_reduce7(c), self._d * other._d)

    __rmul__ = __mul__

    def galois(self, k: int) -> "CycloNum":
        """Image under zeta -> zeta^k, k a unit mod 12."""
        if math.gcd(k, 12) != 1:
            raise ValueError("k must be coprime to 12")
        out = [0, 0, 0, 0]
        for j, x in enumerate(self._n):
            if x:
                p = _ZETA_POW[(j * k) % 12]
                for t in range(4):
                    out[t] += x * p[t]
        return CycloNum._raw(out, self._d)

    def conj(self) -> "CycloNum":
        return self.galois(11)

    def norm(self) -> Fraction:
        """Field norm down to Q."""
        return (self * self.galois(5) * self.galois(7) * self.galois(11)).to_rational()

    def inv(self) -> "CycloNum":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in Q(zeta_12)")
        if self.is_rational():
            return CycloNum._raw([self._d, 0, 0, 0], self._n[0])
        co = self.galois(5) * self.galois(7) * self.galois(11)
        nrm = (self * co).to_rational()
        return co * (1 / nrm)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            other = Fraction(other)
            return CycloNum._raw([x * other.denominator for x in self._n], self._d * other.numerator)
        if not isinstance(other, CycloNum):
            return NotImplemented
        return self * other.inv()

    def __rtruediv__(self, other):
        return CycloNum.coerce(other) * self.inv()

    def __pow__(self, e: int):
        if e < 0:
            return self.inv() ** (-e)
        result = ONE
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CycloNum.coerce(other)
        if not isinstance(other, CycloNum):
            return NotImplemented
        return self._d == other._d and self._n == other._n

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._n, self._d))
        return self._hash

    def __bool__(self):
        return not self.is_zero()

    def __repr__(self):
        return "CycloNum(" + ", ".join(rat_to_str(c) for c in self.coeffs) + ")"

    def to_json(self) -> list[str]:
        return [rat_to_str(c) for c in self.coeffs]

    @classmethod
    def from_json(cls, data: Sequence[str]) -> "CycloNum":
        if len(data) != 4:
            raise ValueError("CycloNum needs exactly 4 coefficients")
        return cls(*(rat_from_str(str(s)) for s in data))


def _zeta_powers() -> list[tuple[int, int, int, int]]:
    out = []
    cur = [1, 0, 0, 0]
    for _ in range(12):
        out.append(tuple(cur))
        # multiply by zeta: shift then reduce
        cur = _reduce7([0] + cur + [0, 0])
    return out


_ZETA_POW = _zeta_powers()

ZERO = CycloNum(0)
ONE = CycloNum(1)
ZETA = CycloNum(0, 1)
I = CycloNum(0, 0, 0, 1)
OMEGA = CycloNum.from_ints(_ZETA_POW[4])
OMEGA2 = CycloNum.from_ints(_ZETA_POW[8])
SQRT3 = CycloNum(0, 2, 0, -1)
MU = OMEGA2 - OMEGA


def gamma(a: int, b: int) -> CycloNum:
    """gamma_(a,b) = omega^2 a - omega b."""
    return OMEGA2 * a - OMEGA * b


def cyclo_mul(a: CycloNum, b: CycloNum) -> CycloNum:
    return a * b


def cyclo_inv(a: CycloNum) -> CycloNum:
    return a.inv()


def cyclo_conj(a: CycloNum) -> CycloNum:
    return a.conj()


# --------------------------------------------------------------------------
# Polynomials in PI := pi / sqrt(3)
# --------------------------------------------------------------------------


def _is_zero(c) -> bool:
    return c == 0


class PiPoly:
    """Polynomial in the formal transcendental Pi = pi/sqrt(3).

    Coefficients are rationals; cyclotomic coefficients are accepted for
    non-real potentials but cannot be evaluated on an interval.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [c if isinstance(c, CycloNum) else Fraction(c) for c in coeffs]
        while cs and _is_zero(cs[-1]):
            cs.pop()
        self.coeffs = tuple(cs)

    @classmethod
    def pi(cls, q=1) -> "PiPoly":
        return cls([0, q])

    @classmethod
    def const(cls, q) -> "PiPoly":
        return cls([q])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, j: int):
        return self.coeffs[j] if 0 <= j < len(self.coeffs) else Fraction(0)

    def __add__(self, other):
        if not isinstance(other, PiPoly):
            other = PiPoly.const(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return PiPoly(self.coeff(j) + other.coeff(j) for j in range(n))

    __radd__ = __add__

    def __neg__(self):
        return PiPoly(-c for c in self.coeffs)

    def __sub__(self, other):
        if not isinstance(other, PiPoly):
            other = PiPoly.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PiPoly):
            return PiPoly(c * other for c in self.coeffs)
        if not self.coeffs or not other.coeffs:
            return PiPoly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if _is_zero(a):
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = a * b + out[i + j]
        return PiPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return PiPoly(c / scalar for c in self.coeffs)

    def __pow__(self, e: int):
        out = PiPoly.const(1)
        for _ in range(e):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, PiPoly):
            other = PiPoly.const(other)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"PiPoly({list(map(str, self.coeffs))})"

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for j, c in enumerate(self.coeffs):
            if _is_zero(c):
                continue
            cs = rat_to_str(c) if isinstance(c, Fraction) else repr(c)
            parts.append(cs if j == 0 else (f"{cs} * pi/sqrt(3)" if j == 1 else f"{cs} * (pi/sqrt(3))^{j}"))
        return " + ".join(parts)

    def is_rational(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.coeffs)

    def to_json(self) -> list:
        return [rat_to_str(c) if isinstance(c, Fraction) else c.to_json() for c in self.coeffs]

    @classmethod
    def from_json(cls, data) -> "PiPoly":
        return cls(CycloNum.from_json(c) if isinstance(c, list) else rat_from_str(str(c)) for c in data)

    def __float__(self):
        v = math.pi / math.sqrt(3)
        return float(sum(float(c) * v ** j for j, c in enumerate(self.coeffs)))


# --------------------------------------------------------------------------
# Truncated Laurent series
# --------------------------------------------------------------------------


class WindowError(ValueError):
    """A required Laurent order was truncated away."""


class LaurentSeries:
    """Truncated Laurent series sum_{j} coeffs[j] t^(min_order + j).

    Orders above ``max_order`` are not retained; every coefficient with order
    <= max_order is exact.
    """

    __slots__ = ("min_order", "coeffs", "max_order")

    def __init__(self, min_order: int, coeffs: Sequence, max_order: int):
        cs = [CycloNum.coerce(c) for c in coeffs]
        cs = cs[: max(0, max_order - min_order + 1)]
        self.min_order = min_order
        self.coeffs = tuple(cs)
        self.max_order = max_order

    @classmethod
    def simple_pole(cls, a, expansion_point, max_order: int) -> "LaurentSeries":
        """Expansion of 1/(k - a) in t = k - expansion_point."""
        a = CycloNum.coerce(a)
        p = CycloNum.coerce(expansion_point)
        d = p - a  # 1/(t + d)
        if d.is_zero():
            return cls(-1, [ONE], max_order)
        inv = d.inv()
        coeffs = []
        term = inv
        neg_inv = -inv
        for _ in range(0, max_order + 1):
            coeffs.append(term)
            term = term * neg_inv
        return cls(0, coeffs, max_order)

    def coeff(self, order: int) -> CycloNum:
        if order > self.max_order:
            raise WindowError(f"order {order} beyond retained window (max {self.max_order})")
        j = order - self.min_order
        if 0 <= j < len(self.coeffs):
            return self.coeffs[j]
        return ZERO

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            return LaurentSeries(self.min_order, [c * other for c in self.coeffs], self.max_order)
        lo = self.min_order + other.min_order
        # each factor is exact up to its own max order; the product is exact up to
        # min(max_a + lo_b, max_b + lo_a)
        hi = min(self.max_order + other.min_order, other.max_order + self.min_order)
        out = [ZERO] * max(0, hi - lo + 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                k = i + j
                if k >= len(out):
                    break
                out[k] = out[k] + a * b
        return LaurentSeries(lo, out, hi)

    def __add__(self, other: "LaurentSeries"):
        lo = min(self.min_order, other.min_order)
        hi = min(self.max_order, other.max_order)
        out = [self.coeff(o) + other.coeff(o) for o in range(lo, hi + 1)]
        return LaurentSeries(lo, out, hi)

    def residue(self) -> CycloNum:
        return self.coeff(-1)

    def __repr__(self):
        return f"LaurentSeries(min_order={self.min_order}, max_order={self.max_order}, coeffs={list(self.coeffs)})"


def series_residue(s: LaurentSeries) -> CycloNum:
    if s.max_order < -1:
        raise WindowError("order -1 is outside the retained window")
    return s.coeff(-1)


# --------------------------------------------------------------------------
# Rational intervals
# --------------------------------------------------------------------------


class RatInterval:
    """Closed interval [lo, hi] with rational endpoints."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = rat(lo)
        hi = lo if hi is None else rat(hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def point(cls, x) -> "RatInterval":
        return cls(x, x)

    @staticmethod
    def _c(x) -> "RatInterval":
        return x if isinstance(x, RatInterval) else RatInterval.point(x)

    def __add__(self, other):
        o = self._c(other)
        return RatInterval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return RatInterval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-self._c(other))

    def __rsub__(self, other):
        return self._c(other) - self

    def __mul__(self, other):
        o = self._c(other)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return RatInterval(min(ps), max(ps))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._c(other)
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("interval divisor contains zero")
        return self * RatInterval(1 / o.hi, 1 / o.lo)

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative exponent")
        if e % 2 == 1 or self.lo >= 0:
            return RatInterval(min(self.lo ** e, self.hi ** e), max(self.lo ** e, self.hi ** e))
        if self.hi <= 0:
            return RatInterval(self.hi ** e, self.lo ** e)
        return RatInterval(0, max(self.lo ** e, self.hi ** e))

    def contains(self, x) -> bool:
        if isinstance(x, RatInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= rat(x) <= self.hi

    __contains__ = contains

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def hull(self, other: "RatInterval") -> "RatInterval":
        return RatInterval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __eq__(self, other):
        return isinstance(other, RatInterval) and self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __repr__(self):
        return f"RatInterval({rat_to_str(self.lo)}, {rat_to_str(self.hi)})"

    def to_json(self) -> list[str]:
        return [rat_to_str(self.lo), rat_to_str(self.hi)]

    @classmethod
    def from_json(cls, data) -> "RatInterval":
        return cls(rat_from_str(data[0]), rat_from_str(data[1]))


# pi/sqrt(3) to 35 digits, truncated and rounded up
PI_OVER_SQRT3 = RatInterval(
    Fraction("1.81379936423421785059407825764215573"),
    Fraction("1.81379936423421785059407825764215574"),
)


def pipoly_eval(p: PiPoly, pi_enclosure: RatInterval = PI_OVER_SQRT3) -> RatInterval:
    """Enclosure of p with Pi replaced by an interval (Horner, outward)."""
    if not p.is_rational():
        raise TypeError("only rational PiPoly can be evaluated on intervals")
    acc = RatInterval.point(0)
    for c in reversed(p.coeffs):
        acc = acc * pi_enclosure + c
    return acc


def _arctan_inv_enclosure(x: int, terms: int) -> RatInterval:
    # alternating series: partial sums bracket the limit
    s = Fraction(0)
    for k in range(terms):
        s += Fraction((-1) ** k, (2 * k + 1) * x ** (2 * k + 1))
    nxt = Fraction((-1) ** terms, (2 * terms + 1) * x ** (2 * terms + 1))
    return RatInterval(min(s, s + nxt), max(s, s + nxt))


def machin_pi_over_sqrt3(digits: int = 40) -> RatInterval:
    """Independent enclosure of pi/sqrt(3) from Machin's formula and integer sqrt."""
    terms = digits  # 1/5^(2k+1) gains > 1 digit per term
    pi = _arctan_inv_enclosure(5, terms) * 16 - _arctan_inv_enclosure(239, terms) * 4
    scale = 10 ** (digits + 5)
    r = math.isqrt(3 * scale * scale)  # floor(sqrt(3) * scale)
    sqrt3 = RatInterval(Fraction(r, scale), Fraction(r + 1, scale))
    return pi / sqrt3
