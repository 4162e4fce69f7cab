"""Interval arithmetic with outward (directed) rounding.

Every operation returns an enclosure of the exact set result: for all
x in [a], y in [b], x o y lies in [a] o [b].  Endpoints are IEEE-754
doubles; +/-inf endpoints encode saturation, never NaN.

Rounding strategy (scalar path): results are computed in the default
round-to-nearest mode and then adjusted outward *only when inexact*.
Exactness is decided with error-free transformations (two-sum for
add/sub, Dekker two-product for mul/square) and exact integer-ratio
comparisons for div/sqrt.  Endpoints are therefore the tightest
representable directed-rounded values: an exactly representable result
is returned unchanged (e.g. square([-1,1]) == [0,1]), and an inexact
one is off by at most one ulp from the unrepresentable exact endpoint.
Hardware rounding-mode switching is deliberately not used; everything
here is pure and thread-safe.

Three layers of data live here:

* ``Interval``        -- a closed real interval [lo, hi];
* ``ComplexInterval`` -- a rectangle re + i*im, re/im intervals;
* ``BoxRegion``       -- a vector of ComplexIntervals (length 2 for
  maps of C^2, length 1 for maps of C), optionally flagged real-mode,
  in which case imaginary parts are pinned to [0, 0].

Box geometry (widen / intersects / sup_distance) is taken in the
sup norm over all real coordinates: ||x|| = max(|Re x_k|, |Im x_k|).
"""

from __future__ import annotations

import math
import sys
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence, Union

__all__ = [
    "DomainError",
    "UsageError",
    "Interval",
    "ComplexInterval",
    "BoxRegion",
    "BoxPredicates",
    "box_widen",
    "box_predicates",
    "hull",
    "hull_complex",
]


class DomainError(ValueError):
    """A mathematical precondition was violated (e.g. division by an
    interval containing zero)."""


class UsageError(ValueError):
    """The operation was called with structurally invalid arguments
    (wrong dimensionality, wrong map kind, bad configuration)."""


_INF = math.inf
_MAX = sys.float_info.max
_SPLIT = 134217729.0  # 2**27 + 1, Dekker splitting constant
_BIG = 6.696928794914171e299  # ~2**996, Dekker overflow guard
_SMALL = 1e-290  # products below this may have inexact error terms

_nextafter = math.nextafter


def _down_blind(x: float) -> float:
    if x == _INF:
        return _MAX
    if x == -_INF:
        return -_INF
    return _nextafter(x, -_INF)


def _up_blind(x: float) -> float:
    if x == -_INF:
        return -_MAX
    if x == _INF:
        return _INF
    return _nextafter(x, _INF)


def add_down(a: float, b: float) -> float:
    """Largest double <= the exact a + b."""
    s = a + b
    if s != s:  # inf + -inf from saturated endpoints
        return -_INF
    if s == _INF:
        return _MAX
    if s == -_INF:
        return -_INF
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    if err != err:
        return _down_blind(s)
    return s if err >= 0.0 else _nextafter(s, -_INF)


def add_up(a: float, b: float) -> float:
    """Smallest double >= the exact a + b."""
    s = a + b
    if s != s:
        return _INF
    if s == -_INF:
        return -_MAX
    if s == _INF:
        return _INF
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    if err != err:
        return _up_blind(s)
    return s if err <= 0.0 else _nextafter(s, _INF)


def sub_down(a: float, b: float) -> float:
    return add_down(a, -b)


def sub_up(a: float, b: float) -> float:
    return add_up(a, -b)


def _prod_err(a: float, b: float, p: float) -> float:
    # Dekker two-product error term; caller guarantees the guards.
    aa = a * _SPLIT
    ah = aa - (aa - a)
    al = a - ah
    bb = b * _SPLIT
    bh = bb - (bb - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def mul_down(a: float, b: float) -> float:
    """Largest double <= the exact a * b."""
    p = a * b
    if p != p:  # 0 * inf from saturated endpoints
        return -_INF
    if p == _INF:
        return _MAX
    if p == -_INF:
        return -_INF
    if a == 0.0 or b == 0.0:
        return 0.0
    if abs(a) > _BIG or abs(b) > _BIG or abs(p) < _SMALL:
        return _down_blind(p)
    err = _prod_err(a, b, p)
    return p if err >= 0.0 else _nextafter(p, -_INF)


def mul_up(a: float, b: float) -> float:
    """Smallest double >= the exact a * b."""
    p = a * b
    if p != p:
        return _INF
    if p == -_INF:
        return -_MAX
    if p == _INF:
        return _INF
    if a == 0.0 or b == 0.0:
        return 0.0
    if abs(a) > _BIG or abs(b) > _BIG or abs(p) < _SMALL:
        return _up_blind(p)
    err = _prod_err(a, b, p)
    return p if err <= 0.0 else _nextafter(p, _INF)


def _cmp_quot(q: float, a: float, b: float) -> int:
    # sign of q - a/b, all finite, b != 0, decided exactly over Q.
    qn, qd = q.as_integer_ratio()
    an, ad = a.as_integer_ratio()
    bn, bd = b.as_integer_ratio()
    lhs = qn * bn * ad  # sign of q*b - a, then corrected by sign(b)
    rhs = an * qd * bd
    c = (lhs > rhs) - (lhs < rhs)
    return -c if b < 0 else c


def div_down(a: float, b: float) -> float:
    """Largest double <= the exact a / b (b != 0)."""
    q = a / b
    if q != q:
        return -_INF
    if q == _INF:
        return _MAX
    if q == -_INF:
        return -_INF
    if a == 0.0:
        return 0.0
    if abs(a) == _INF or abs(b) == _INF:
        return _down_blind(q)
    c = _cmp_quot(q, a, b)
    return q if c <= 0 else _nextafter(q, -_INF)


def div_up(a: float, b: float) -> float:
    """Smallest double >= the exact a / b (b != 0)."""
    q = a / b
    if q != q:
        return _INF
    if q == -_INF:
        return -_MAX
    if q == _INF:
        return _INF
    if a == 0.0:
        return 0.0
    if abs(a) == _INF or abs(b) == _INF:
        return _up_blind(q)
    c = _cmp_quot(q, a, b)
    return q if c >= 0 else _nextafter(q, _INF)


def sqrt_down(x: float) -> float:
    """Largest double <= the exact sqrt(x) (x >= 0)."""
    if x == 0.0:
        return 0.0
    if x == _INF:
        return _MAX
    s = math.sqrt(x)
    sn, sd = s.as_integer_ratio()
    xn, xd = x.as_integer_ratio()
    lhs = sn * sn * xd  # sign of s^2 - x
    rhs = xn * sd * sd
    return s if lhs <= rhs else _nextafter(s, -_INF)


def sqrt_up(x: float) -> float:
    """Smallest double >= the exact sqrt(x) (x >= 0)."""
    if x == 0.0:
        return 0.0
    if x == _INF:
        return _INF
    s = math.sqrt(x)
    sn, sd = s.as_integer_ratio()
    xn, xd = x.as_integer_ratio()
    lhs = sn * sn * xd
    rhs = xn * sd * sd
    return s if lhs >= rhs else _nextafter(s, _INF)


class Interval:
    """Closed interval [lo, hi] of doubles, lo <= hi.  Immutable."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        lo = float(lo)
        hi = float(hi)
        if not (lo <= hi):  # also rejects NaN endpoints
            raise DomainError(f"invalid interval endpoints [{lo!r}, {hi!r}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    # -- constructors ----------------------------------------------------

    @staticmethod
    def point(x: float) -> "Interval":
        return Interval(x, x)

    @staticmethod
    def hull(value: Union[float, int, str, Fraction]) -> "Interval":
        """Smallest double interval containing the exact value.

        Strings are parsed as exact decimals, so non-dyadic parameters
        like "-1.17" come out as genuine 1-ulp enclosures.
        """
        if isinstance(value, float):
            return Interval(value, value)
        if isinstance(value, int):
            fr = Fraction(value)
        elif isinstance(value, (str, Fraction)):
            fr = Fraction(value)
        else:
            raise UsageError(f"cannot hull {type(value).__name__}")
        f = fr.numerator / fr.denominator  # correctly rounded
        if f == _INF:
            return Interval(_MAX, _INF)
        if f == -_INF:
            return Interval(-_INF, -_MAX)
        exact = Fraction(f)
        if exact == fr:
            return Interval(f, f)
        if exact < fr:
            return Interval(f, _nextafter(f, _INF))
        return Interval(_nextafter(f, -_INF), f)

    # -- basic queries ---------------------------------------------------

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Interval)
            and self.lo == other.lo
            and self.hi == other.hi
        )

    def __hash__(self):
        return hash((self.lo, self.hi))

    def width(self) -> float:
        """Upper bound on hi - lo."""
        return sub_up(self.hi, self.lo)

    def mid(self) -> float:
        m = 0.5 * (self.lo + self.hi)
        if not math.isfinite(m):
            m = 0.5 * self.lo + 0.5 * self.hi
        return m

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def encloses(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def is_disjoint(self, other: "Interval") -> bool:
        return self.hi < other.lo or other.hi < self.lo

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        """Intersection, or None when the closed intervals are disjoint."""
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    # -- arithmetic --------------------------------------------------------

    def add(self, other: "Interval") -> "Interval":
        return Interval(add_down(self.lo, other.lo), add_up(self.hi, other.hi))

    def sub(self, other: "Interval") -> "Interval":
        return Interval(sub_down(self.lo, other.hi), sub_up(self.hi, other.lo))

    def neg(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def mul(self, other: "Interval") -> "Interval":
        al, ah, bl, bh = self.lo, self.hi, other.lo, other.hi
        lo = min(
            mul_down(al, bl), mul_down(al, bh), mul_down(ah, bl), mul_down(ah, bh)
        )
        hi = max(mul_up(al, bl), mul_up(al, bh), mul_up(ah, bl), mul_up(ah, bh))
        return Interval(lo, hi)

    def square(self) -> "Interval":
        """Enclosure of {x^2 : x in self}; never extends below zero."""
        lo, hi = self.lo, self.hi
        if lo >= 0.0:
            return Interval(mul_down(lo, lo), mul_up(hi, hi))
        if hi <= 0.0:
            return Interval(mul_down(hi, hi), mul_up(lo, lo))
        m = max(-lo, hi)
        return Interval(0.0, mul_up(m, m))

    def div(self, other: "Interval") -> "Interval":
        if other.lo <= 0.0 <= other.hi:
            raise DomainError("division by an interval containing zero")
        al, ah, bl, bh = self.lo, self.hi, other.lo, other.hi
        lo = min(
            div_down(al, bl), div_down(al, bh), div_down(ah, bl), div_down(ah, bh)
        )
        hi = max(div_up(al, bl), div_up(al, bh), div_up(ah, bl), div_up(ah, bh))
        return Interval(lo, hi)

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise DomainError("sqrt of an interval extending below zero")
        return Interval(sqrt_down(self.lo), sqrt_up(self.hi))

    def abs(self) -> "Interval":
        """Enclosure of {|x| : x in self}."""
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return self.neg()
        return Interval(0.0, max(-self.lo, self.hi))

    def widen(self, r: float) -> "Interval":
        """Enclosure of the closed r-neighborhood (r >= 0)."""
        if r < 0.0:
            raise UsageError("widen radius must be nonnegative")
        return Interval(sub_down(self.lo, r), add_up(self.hi, r))

    def scale(self, s: float) -> "Interval":
        return self.mul(Interval.point(s))

    __add__ = add
    __sub__ = sub
    __mul__ = mul
    __truediv__ = div
    __neg__ = neg


def arith(op: str, a: Interval, b: Optional[Interval] = None) -> Interval:
    """Dispatch by operation name: add, sub, mul, square, div."""
    if op == "square":
        return a.square()
    if b is None:
        raise UsageError(f"operation {op!r} needs two operands")
    try:
        f = {"add": a.add, "sub": a.sub, "mul": a.mul, "div": a.div}[op]
    except KeyError:
        raise UsageError(f"unknown interval operation {op!r}") from None
    return f(b)


def hull(value) -> Interval:
    return Interval.hull(value)


_ZERO = Interval(0.0, 0.0)


class ComplexInterval:
    """Rectangle {x + iy : x in re, y in im}.  Immutable."""

    __slots__ = ("re", "im")

    def __init__(self, re: Interval, im: Interval):
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    def __setattr__(self, name, value):
        raise AttributeError("ComplexInterval is immutable")

    @staticmethod
    def point(z: complex) -> "ComplexInterval":
        z = complex(z)
        return ComplexInterval(Interval.point(z.real), Interval.point(z.imag))

    def __repr__(self):
        return f"ComplexInterval({self.re!r}, {self.im!r})"

    def __eq__(self, other):
        return (
            isinstance(other, ComplexInterval)
            and self.re == other.re
            and self.im == other.im
        )

    def __hash__(self):
        return hash((self.re, self.im))

    def contains(self, z: complex) -> bool:
        return self.re.contains(z.real) and self.im.contains(z.imag)

    def encloses(self, other: "ComplexInterval") -> bool:
        return self.re.encloses(other.re) and self.im.encloses(other.im)

    def add(self, other: "ComplexInterval") -> "ComplexInterval":
        return ComplexInterval(self.re.add(other.re), self.im.add(other.im))

    def sub(self, other: "ComplexInterval") -> "ComplexInterval":
        return ComplexInterval(self.re.sub(other.re), self.im.sub(other.im))

    def neg(self) -> "ComplexInterval":
        return ComplexInterval(self.re.neg(), self.im.neg())

    def mul(self, other: "ComplexInterval") -> "ComplexInterval":
        # (a+bi)(c+di): re = ac - bd, im = ad + bc, each outward rounded.
        a, b = self.re, self.im
        c, d = other.re, other.im
        return ComplexInterval(
            a.mul(c).sub(b.mul(d)),
            a.mul(d).add(b.mul(c)),
        )

    def square(self) -> "ComplexInterval":
        # re^2 - im^2 via dedicated squares (tighter than self*self).
        return ComplexInterval(
            self.re.square().sub(self.im.square()),
            self.re.mul(self.im).scale(2.0),
        )

    def abs_sq(self) -> Interval:
        """Enclosure of |z|^2."""
        return self.re.square().add(self.im.square())

    def modulus(self) -> Interval:
        """Enclosure of |z|."""
        return self.abs_sq().sqrt()

    def div(self, other: "ComplexInterval") -> "ComplexInterval":
        """Enclosure of {u / v}; requires 0 not in the |v|^2 enclosure."""
        den = other.abs_sq()
        if den.lo <= 0.0:
            raise DomainError("complex division by a rectangle meeting zero")
        num = self.mul(ComplexInterval(other.re, other.im.neg()))
        return ComplexInterval(num.re.div(den), num.im.div(den))

    __add__ = add
    __sub__ = sub
    __mul__ = mul
    __truediv__ = div
    __neg__ = neg


def hull_complex(re, im="0") -> ComplexInterval:
    return ComplexInterval(Interval.hull(re), Interval.hull(im))


def ci_mul(a: ComplexInterval, b: ComplexInterval) -> ComplexInterval:
    return a.mul(b)


class BoxPredicates(NamedTuple):
    intersects: bool
    contains: bool
    sup_distance: float


class BoxRegion:
    """A box in C^n (n = 1 or 2) as a vector of ComplexIntervals.

    With ``real=True`` the box lives in R^n: imaginary parts are pinned
    to [0, 0] and do not count as axes for widening or distances.
    """

    __slots__ = ("coords", "real")

    def __init__(self, coords: Sequence[ComplexInterval], real: bool = False):
        coords = tuple(coords)
        if not coords:
            raise UsageError("BoxRegion needs at least one coordinate")
        if real:
            coords = tuple(ComplexInterval(c.re, _ZERO) for c in coords)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "real", real)

    def __setattr__(self, name, value):
        raise AttributeError("BoxRegion is immutable")

    def __repr__(self):
        return f"BoxRegion({list(self.coords)!r}, real={self.real})"

    def __eq__(self, other):
        return (
            isinstance(other, BoxRegion)
            and self.real == other.real
            and self.coords == other.coords
        )

    def __hash__(self):
        return hash((self.coords, self.real))

    # -- axis view ---------------------------------------------------------

    def axes(self) -> list[Interval]:
        """The real-interval components (Re/Im pairs, Re only in real mode)."""
        out = []
        for c in self.coords:
            out.append(c.re)
            if not self.real:
                out.append(c.im)
        return out

    def _compatible(self, other: "BoxRegion") -> None:
        if len(self.coords) != len(other.coords) or self.real != other.real:
            raise UsageError("box dimensionality mismatch")

    def side_length(self) -> float:
        """max over real-interval components of (hi - lo), upper rounded."""
        return max(iv.width() for iv in self.axes())

    def min_side_length(self) -> float:
        return min(iv.width() for iv in self.axes())

    def contains_point(self, point: Sequence[complex]) -> bool:
        if len(point) != len(self.coords):
            raise UsageError("box dimensionality mismatch")
        return all(c.contains(complex(z)) for c, z in zip(self.coords, point))

    def widen(self, r: float) -> "BoxRegion":
        if r < 0.0:
            raise UsageError("widen radius must be nonnegative")
        if self.real:
            coords = [ComplexInterval(c.re.widen(r), _ZERO) for c in self.coords]
        else:
            coords = [
                ComplexInterval(c.re.widen(r), c.im.widen(r)) for c in self.coords
            ]
        return BoxRegion(coords, real=self.real)

    def intersects(self, other: "BoxRegion") -> bool:
        self._compatible(other)
        return all(
            not a.is_disjoint(b) for a, b in zip(self.axes(), other.axes())
        )

    def encloses(self, other: "BoxRegion") -> bool:
        self._compatible(other)
        return all(a.encloses(b) for a, b in zip(self.axes(), other.axes()))

    def sup_distance(self, other: "BoxRegion") -> float:
        """Rigorous lower bound on the sup-norm distance (0 if they meet)."""
        self._compatible(other)
        d = 0.0
        for a, b in zip(self.axes(), other.axes()):
            gap = max(sub_down(b.lo, a.hi), sub_down(a.lo, b.hi), 0.0)
            if gap > d:
                d = gap
        return d

    def union_hull(self, other: "BoxRegion") -> "BoxRegion":
        self._compatible(other)
        coords = [
            ComplexInterval(
                Interval(min(a.re.lo, b.re.lo), max(a.re.hi, b.re.hi)),
                Interval(min(a.im.lo, b.im.lo), max(a.im.hi, b.im.hi)),
            )
            for a, b in zip(self.coords, other.coords)
        ]
        return BoxRegion(coords, real=self.real)


def box_widen(box: BoxRegion, r: float) -> BoxRegion:
    return box.widen(r)


def box_predicates(a: BoxRegion, b: BoxRegion) -> BoxPredicates:
    """Closed-box intersection, containment (a encloses b) and a rigorous
    lower bound on their sup-norm distance."""
    inter = a.intersects(b)
    return BoxPredicates(
        intersects=inter,
        contains=a.encloses(b),
        sup_distance=0.0 if inter else a.sup_distance(b),
    )
