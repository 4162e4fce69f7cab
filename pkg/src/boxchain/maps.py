"""Dynamical system definitions and their interval extensions.

Supported families:

* ``henon_complex`` -- f(x, y) = (x^2 + c - a*y, x) on C^2, a != 0;
* ``henon_real``    -- the same map restricted to R^2 (a, c real);
* ``quad_poly``     -- P(z) = z^2 + c on C;
* ``cubic_poly``    -- P(z) = z^3 - 3 a^2 z + c on C.

A ``MapModel`` bundles the parameters with the trapping data: the
radius R beyond which orbits provably escape, the chosen box radius
R' > R (snapped up to a 12-fractional-bit dyadic so grid endpoints are
exact doubles), and delta0' = q(R')/2 > 0, where q is the escape
polynomial of the family.  The trapping box V0 = {|x| <= R', |y| <= R'}
(Re/Im componentwise) then contains the delta0'-chain recurrent set.

Parameters arrive as decimal strings and are hulled outward for all
interval evaluation; plain nearest-double values are kept alongside for
the non-rigorous point-orbit helpers.

Two evaluation paths exist for the map action on boxes: the scalar
``image_extension``/``preimage_extension`` (tightest directed rounding
via ia) and the numpy ``batch_forward``/``batch_backward`` used by the
bulk pipeline phases (plain nextafter outward nudging, at most one
extra ulp of slack per endpoint; always a superset of the scalar
result on the same box).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError
from .ia import (
    BoxRegion,
    ComplexInterval,
    DomainError,
    Interval,
    UsageError,
)

__all__ = [
    "KINDS",
    "MapModel",
    "FixedPointInfo",
    "SinkOrbit",
    "image_extension",
    "preimage_extension",
    "trapping_radius",
    "trapping_box",
    "fixed_points",
    "sink_orbits",
    "snap_up_dyadic",
]

KINDS = ("henon_complex", "henon_real", "quad_poly", "cubic_poly")

_ZERO = Interval(0.0, 0.0)
_GRID_BITS = 12  # fractional bits of the dyadic grid radius


def snap_up_dyadic(x: float, bits: int = _GRID_BITS) -> float:
    """Smallest dyadic rational with `bits` fractional bits that is >= x."""
    n = math.ceil(Fraction(float(x)) * (1 << bits))
    return n / (1 << bits)


def _parse_decimal(s) -> Fraction:
    try:
        return Fraction(str(s).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad decimal parameter {s!r}") from exc


def parse_complex_param(value) -> tuple[str, str]:
    """Normalize a parameter to ('re', 'im') decimal strings.

    Accepts "re", "re,im", numbers, or complex; float/complex inputs
    use repr so the decimal string round-trips the double exactly.
    """
    if isinstance(value, str):
        parts = value.split(",")
        if len(parts) == 1:
            re_s, im_s = parts[0].strip(), "0"
        elif len(parts) == 2:
            re_s, im_s = parts[0].strip(), parts[1].strip()
        else:
            raise ParseError(f"bad complex parameter {value!r}")
        _parse_decimal(re_s), _parse_decimal(im_s)  # validate
        return re_s, im_s
    if isinstance(value, complex):
        return repr(value.real), repr(value.imag)
    if isinstance(value, (int, float, Fraction)):
        return repr(float(value)) if isinstance(value, float) else str(value), "0"
    raise ParseError(f"bad complex parameter {value!r}")


def _hull_param(re_s: str, im_s: str) -> ComplexInterval:
    return ComplexInterval(Interval.hull(re_s), Interval.hull(im_s))


def _point_param(re_s: str, im_s: str) -> complex:
    re = _parse_decimal(re_s)
    im = _parse_decimal(im_s)
    return complex(re.numerator / re.denominator, im.numerator / im.denominator)


class MapModel:
    """A map of the supported families with its trapping data.

    Immutable after construction; all operations are pure.
    """

    def __init__(self, kind: str, c, a=None, r_prime: Optional[float] = None):
        if kind not in KINDS:
            raise UsageError(f"unknown map kind {kind!r}")
        self.kind = kind
        self.c_str = parse_complex_param(c)
        self.c = _point_param(*self.c_str)
        self.c_iv = _hull_param(*self.c_str)

        if kind == "quad_poly":
            if a is not None:
                raise UsageError("quad_poly takes no 'a' parameter")
            self.a_str = None
            self.a = None
            self.a_iv = None
        else:
            if a is None:
                raise UsageError(f"{kind} requires an 'a' parameter")
            self.a_str = parse_complex_param(a)
            self.a = _point_param(*self.a_str)
            self.a_iv = _hull_param(*self.a_str)
            if self.is_henon and self.a == 0:
                raise UsageError("Henon maps need a != 0 for invertibility")

        if kind == "henon_real":
            if self.a.imag != 0 or self.c.imag != 0:
                raise UsageError("henon_real requires real parameters")

        self.R = trapping_radius(self)
        if r_prime is None:
            r_prime = 1.05 * self.R
        v0, rp, d0 = trapping_box(self, float(r_prime))
        self.r_prime = rp
        self.delta0_prime = d0
        self._v0 = v0

    # -- structure ---------------------------------------------------------

    @property
    def is_henon(self) -> bool:
        return self.kind in ("henon_complex", "henon_real")

    @property
    def is_one_dim(self) -> bool:
        return self.kind in ("quad_poly", "cubic_poly")

    @property
    def real_mode(self) -> bool:
        return self.kind == "henon_real"

    @property
    def ncoords(self) -> int:
        return 2 if self.is_henon else 1

    @property
    def naxes(self) -> int:
        """Number of real axes of the phase-space boxes."""
        if self.kind == "henon_complex":
            return 4
        return 2  # henon_real (x, y) or 1-D complex (Re z, Im z)

    @property
    def a_mod(self) -> float:
        return abs(self.a) if self.a is not None else 0.0

    @property
    def c_mod(self) -> float:
        return abs(self.c)

    def v0_box(self) -> BoxRegion:
        return self._v0

    def param_text(self) -> str:
        parts = [f"kind={self.kind}"]
        if self.a_str is not None:
            parts.append(f"a={self.a_str[0]},{self.a_str[1]}")
        parts.append(f"c={self.c_str[0]},{self.c_str[1]}")
        return " ".join(parts)

    def __repr__(self):
        return f"MapModel({self.param_text()}, rprime={self.r_prime!r})"

    def _check_box(self, box: BoxRegion) -> None:
        if len(box.coords) != self.ncoords or box.real != self.real_mode:
            raise UsageError("box does not match the map's phase space")

    # -- interval images (scalar path) --------------------------------------

    def _three_a_sq(self) -> ComplexInterval:
        asq = self.a_iv.square()
        three = Interval(3.0, 3.0)
        return ComplexInterval(asq.re.mul(three), asq.im.mul(three))

    def image(self, box: BoxRegion) -> BoxRegion:
        self._check_box(box)
        if self.is_henon:
            x, y = box.coords
            new_x = x.square().add(self.c_iv).sub(self.a_iv.mul(y))
            return BoxRegion([new_x, x], real=box.real)
        z = box.coords[0]
        if self.kind == "quad_poly":
            return BoxRegion([z.square().add(self.c_iv)])
        # cubic, Horner form (z^2 - 3a^2) z + c
        t = z.square().sub(self._three_a_sq())
        return BoxRegion([t.mul(z).add(self.c_iv)])

    def preimage(self, box: BoxRegion) -> BoxRegion:
        if not self.is_henon:
            raise UsageError("preimage is defined for Henon kinds only")
        self._check_box(box)
        x, y = box.coords
        new_y = y.square().add(self.c_iv).sub(x).div(self.a_iv)
        return BoxRegion([y, new_y], real=box.real)

    # -- point arithmetic (non-rigorous helpers) -----------------------------

    def point_forward(self, pt: Sequence[complex]) -> tuple:
        if self.is_henon:
            x, y = pt
            return (x * x + self.c - self.a * y, x)
        z = pt[0]
        if self.kind == "quad_poly":
            return (z * z + self.c,)
        return (z * z * z - 3.0 * self.a * self.a * z + self.c,)

    def point_backward(self, pt: Sequence[complex]) -> tuple:
        if not self.is_henon:
            raise UsageError("inverse is defined for Henon kinds only")
        x, y = pt
        return (y, (y * y + self.c - x) / self.a)

    def point_derivative(self, pt: Sequence[complex]):
        """Jacobian at a point: 2x2 complex matrix (Henon) or scalar (1-D)."""
        if self.is_henon:
            x, _ = pt
            return ((2.0 * x, -self.a), (1.0 + 0j, 0.0 + 0j))
        z = pt[0]
        if self.kind == "quad_poly":
            return 2.0 * z
        return 3.0 * z * z - 3.0 * self.a * self.a


def image_extension(model: MapModel, box: BoxRegion) -> BoxRegion:
    """Interval extension F with F(B) containing the exact image f(B)."""
    return model.image(box)


def preimage_extension(model: MapModel, box: BoxRegion) -> BoxRegion:
    """Interval enclosure of f^{-1}(B) for Henon kinds."""
    return model.preimage(box)


# ---------------------------------------------------------------------------
# trapping data
# ---------------------------------------------------------------------------


def _abs_interval(model: MapModel, which: str) -> Interval:
    civ = model.c_iv if which == "c" else model.a_iv
    if civ is None:
        return _ZERO
    return civ.modulus()


def trapping_radius(model: MapModel) -> float:
    """Upper enclosure of the escape radius R >= 1.

    Quadratic kinds use the closed form
    R = (1 + |a| + sqrt((1+|a|)^2 + 4|c|)) / 2 evaluated in interval
    arithmetic (exact when the inputs are exact, e.g. R = 2 for the
    1-D map with c = 2).  The cubic family has no closed form; its
    escape polynomial q(r) = r^3 - 3|a|^2 r - r - |c| is bisected
    outward to width 2^-40 and the upper endpoint returned.
    """
    one = Interval(1.0, 1.0)
    c_mod = _abs_interval(model, "c")
    if model.kind != "cubic_poly":
        a_mod = _abs_interval(model, "a")
        s = one.add(a_mod)
        disc = s.square().add(c_mod.scale(4.0))
        r = s.add(disc.sqrt()).scale(0.5)
        return max(r.hi, 1.0)

    a_sq3 = model.a_iv.abs_sq().scale(3.0)

    def q(r: float) -> Interval:
        rr = Interval.point(r)
        return rr.square().mul(rr).sub(a_sq3.mul(rr)).sub(c_mod).sub(rr)

    lo = 1.0
    hi = 1.0 + a_sq3.hi + c_mod.hi + 2.0
    while not q(hi).lo > 0.0:
        hi *= 2.0
    target = 2.0 ** -40
    while hi - lo > target:
        mid = 0.5 * (lo + hi)
        qm = q(mid)
        if qm.lo > 0.0:
            hi = mid
        elif qm.hi < 0.0:
            lo = mid
        else:
            break  # sign undecidable at this width; hi stays an upper bound
    return max(hi, 1.0)


def trapping_box(model: MapModel, r_prime: float) -> tuple[BoxRegion, float, float]:
    """Trapping box V0 for a chosen radius R' > R.

    Returns (V0, R'_snapped, delta0') where R' is snapped up to the
    dyadic grid (12 fractional bits) and 2*delta0' = q(R') > 0.  The
    delta0'-chain recurrent set is contained in V0.
    """
    rp = snap_up_dyadic(float(r_prime))
    if not rp > model.R:
        raise UsageError(
            f"r_prime={r_prime} must exceed the trapping radius R={model.R}"
        )
    if model.kind == "cubic_poly":
        q = rp ** 3 - 3.0 * model.a_mod ** 2 * rp - model.c_mod - rp
    else:
        q = rp * rp - (1.0 + model.a_mod) * rp - model.c_mod
    d0 = 0.5 * q
    if not d0 > 0.0:
        raise UsageError("degenerate trapping box: q(R') <= 0")
    side = Interval(-rp, rp)
    if model.kind == "henon_real":
        coords = [ComplexInterval(side, _ZERO), ComplexInterval(side, _ZERO)]
        box = BoxRegion(coords, real=True)
    elif model.kind == "henon_complex":
        cell = ComplexInterval(side, side)
        box = BoxRegion([cell, cell])
    else:
        box = BoxRegion([ComplexInterval(side, side)])
    return box, rp, d0


# ---------------------------------------------------------------------------
# fixed points, eigenvalues, sink orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointInfo:
    location: tuple  # (z, z) for Henon, (z,) for 1-D
    eigenvalues: tuple  # (l1, l2) with |l1| >= |l2|, or (multiplier,)
    classification: str  # sink | saddle | repelling | neutral
    degenerate: bool = False  # repeated root / repeated eigenvalue


def _classify(moduli: Sequence[float]) -> str:
    hi = max(moduli)
    lo = min(moduli)
    if hi < 1.0:
        return "sink"
    if lo > 1.0:
        return "repelling"
    if hi > 1.0 > lo:
        return "saddle"
    return "neutral"


def _newton_polish(z: complex, f, df, steps: int = 3) -> complex:
    for _ in range(steps):
        d = df(z)
        if d == 0:
            break
        z = z - f(z) / d
    return z


def _quadratic_roots(b: complex, c: complex) -> tuple[complex, complex, bool]:
    """Roots of z^2 + b z + c, numerically stable; flag repeated root."""
    disc = b * b - 4.0 * c
    s = cmath.sqrt(disc)
    if (b.conjugate() * s).real > 0.0:
        s = -s
    q = -0.5 * (b - s)  # the larger-magnitude root of the pair
    if q == 0:
        return 0.0 + 0j, 0.0 + 0j, True
    r1 = q
    r2 = c / q
    return r1, r2, disc == 0


def fixed_points(model: MapModel) -> list[FixedPointInfo]:
    """All fixed points with eigenvalue data and classification.

    Point (non-interval) arithmetic with Newton polishing; residuals
    ||f(p) - p|| are at the 1e-14 level for the studied parameters.
    """
    out = []
    if model.is_henon:
        a, c = model.a, model.c
        g = lambda z: z * z - (1.0 + a) * z + c
        dg = lambda z: 2.0 * z - (1.0 + a)
        r1, r2, rep = _quadratic_roots(-(1.0 + a), c)
        roots = [r1] if rep else [r1, r2]
        for z in roots:
            z = _newton_polish(z, g, dg)
            # eigenvalues of [[2z, -a], [1, 0]]: l^2 - 2z l + a = 0
            l1, l2, deg = _quadratic_roots(-2.0 * z, a)
            if abs(l2) > abs(l1):
                l1, l2 = l2, l1
            info = FixedPointInfo(
                location=(z, z),
                eigenvalues=(l1, l2),
                classification=_classify((abs(l1), abs(l2))),
                degenerate=rep or deg,
            )
            out.append(info)
        return out

    if model.kind == "quad_poly":
        c = model.c
        g = lambda z: z * z + c - z
        dg = lambda z: 2.0 * z - 1.0
        r1, r2, rep = _quadratic_roots(-1.0, c)
        roots = [r1] if rep else [r1, r2]
        for z in roots:
            z = _newton_polish(z, g, dg)
            lam = 2.0 * z
            out.append(
                FixedPointInfo(
                    location=(z,),
                    eigenvalues=(lam,),
                    classification=_classify((abs(lam),)),
                    degenerate=rep,
                )
            )
        return out

    # cubic: roots of z^3 - (3a^2 + 1) z + c
    a, c = model.a, model.c
    coeffs = [1.0, 0.0, -(3.0 * a * a + 1.0), c]
    roots = np.roots(coeffs)
    g = lambda z: z * z * z - (3.0 * a * a + 1.0) * z + c
    dg = lambda z: 3.0 * z * z - (3.0 * a * a + 1.0)
    seen = []
    for z in sorted(roots, key=lambda w: (w.real, w.imag)):
        z = _newton_polish(complex(z), g, dg)
        if any(abs(z - w) < 1e-9 for w in seen):
            continue
        seen.append(z)
        lam = 3.0 * z * z - 3.0 * a * a
        out.append(
            FixedPointInfo(
                location=(z,),
                eigenvalues=(lam,),
                classification=_classify((abs(lam),)),
                degenerate=len(roots) != len(set(np.round(roots, 12))),
            )
        )
    return out


@dataclass(frozen=True)
class SinkOrbit:
    """An attracting periodic orbit used to label graph components.

    ``method`` is "exact" for closed-form fixed points / 2-cycles
    (Newton-polished) and "heuristic" for orbits found by the
    non-rigorous forward-orbit sampler.
    """

    points: tuple  # tuple of phase-space points, one per period step
    period: int
    multiplier_max: float  # max eigenvalue modulus of the composed derivative
    method: str


def _cycle_multiplier_max(model: MapModel, points) -> float:
    if model.is_henon:
        m = ((1.0 + 0j, 0.0 + 0j), (0.0 + 0j, 1.0 + 0j))
        for pt in points:
            j = model.point_derivative(pt)
            m = (
                (
                    j[0][0] * m[0][0] + j[0][1] * m[1][0],
                    j[0][0] * m[0][1] + j[0][1] * m[1][1],
                ),
                (
                    j[1][0] * m[0][0] + j[1][1] * m[1][0],
                    j[1][0] * m[0][1] + j[1][1] * m[1][1],
                ),
            )
        tr = m[0][0] + m[1][1]
        det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        l1, l2, _ = _quadratic_roots(-tr, det)
        return max(abs(l1), abs(l2))
    prod = 1.0 + 0j
    for pt in points:
        prod *= model.point_derivative(pt)
    return abs(prod)


def period2_sink_cycle(model: MapModel) -> Optional[SinkOrbit]:
    """Closed-form period-2 cycle for Henon / quadratic kinds, if it is
    attracting; None otherwise."""
    if model.is_henon:
        a, c = model.a, model.c
        # genuine 2-cycles satisfy x + y = -(1+a) and
        # x^2 + (1+a) x + c + (1+a)^2 = 0
        b = 1.0 + a
        x1, x2, rep = _quadratic_roots(b, c + b * b)
        if rep:
            return None
        g = lambda x: x * x + b * x + c + b * b
        dg = lambda x: 2.0 * x + b
        x1 = _newton_polish(x1, g, dg)
        x2 = _newton_polish(x2, g, dg)
        pts = ((x1, x2), (x2, x1))
    elif model.kind == "quad_poly":
        c = model.c
        x1, x2, rep = _quadratic_roots(1.0 + 0j, c + 1.0)
        if rep:
            return None
        pts = ((x1,), (x2,))
    else:
        return None
    # reject the degenerate case where the "cycle" is a fixed point pair
    if abs(pts[0][0] - pts[1][0]) < 1e-12:
        return None
    mult = _cycle_multiplier_max(model, pts)
    if mult >= 1.0:
        return None
    res = max(
        max(abs(u - v) for u, v in zip(model.point_forward(pts[0]), pts[1])),
        max(abs(u - v) for u, v in zip(model.point_forward(pts[1]), pts[0])),
    )
    if res > 1e-9:
        return None
    return SinkOrbit(points=pts, period=2, multiplier_max=mult, method="exact")


def _seed_points(model: MapModel, per_axis: int):
    rp = model.r_prime
    ticks = [(-rp + (2.0 * rp) * (k + 0.5) / per_axis) for k in range(per_axis)]
    if model.kind == "henon_complex":
        for xr in ticks:
            for xi in ticks:
                for yr in ticks:
                    for yi in ticks:
                        yield (complex(xr, xi), complex(yr, yi))
    elif model.kind == "henon_real":
        for xr in ticks:
            for yr in ticks:
                yield (complex(xr, 0.0), complex(yr, 0.0))
    else:
        for zr in ticks:
            for zi in ticks:
                yield (complex(zr, zi),)


def heuristic_sink_cycles(
    model: MapModel, max_period: int = 8, transient: int = 400
) -> list[SinkOrbit]:
    """Attracting cycles found by forward orbits of a deterministic seed
    grid.  Non-rigorous: used only to label components and pick
    refinement targets, never in any rigor claim."""
    escape = 4.0 * model.r_prime
    found = {}
    per_axis = 5 if model.kind == "henon_complex" else 15
    for seed in _seed_points(model, per_axis):
        pt = seed
        ok = True
        for _ in range(transient):
            pt = model.point_forward(pt)
            if any(abs(z) > escape for z in pt):
                ok = False
                break
        if not ok:
            continue
        orbit = [pt]
        for _ in range(max_period):
            orbit.append(model.point_forward(orbit[-1]))
        period = 0
        for p in range(1, max_period + 1):
            if max(abs(u - v) for u, v in zip(orbit[p], orbit[0])) < 1e-7:
                period = p
                break
        if period == 0:
            continue
        pts = tuple(orbit[:period])
        mult = _cycle_multiplier_max(model, pts)
        if mult >= 0.999999:
            continue
        key = (
            period,
            min(
                tuple(
                    (round(w.real, 6), round(w.imag, 6))
                    for point in pts[k:] + pts[:k]
                    for w in point
                )
                for k in range(period)
            ),
        )
        if key not in found:
            found[key] = SinkOrbit(
                points=pts, period=period, multiplier_max=mult, method="heuristic"
            )
    return sorted(found.values(), key=lambda o: (o.period, repr(o.points)))


def sink_orbits(model: MapModel, max_period: int = 8) -> list[SinkOrbit]:
    """Fixed sinks and attracting cycles: exact where closed forms exist
    (fixed points, period 2), heuristic sampling beyond."""
    out = []
    for fp in fixed_points(model):
        if fp.classification == "sink":
            out.append(
                SinkOrbit(
                    points=(fp.location,),
                    period=1,
                    multiplier_max=max(abs(l) for l in fp.eigenvalues),
                    method="exact",
                )
            )
    two = period2_sink_cycle(model)
    if two is not None:
        out.append(two)
    if max_period > 2:
        known = [p for orb in out for p in orb.points]

        def is_known(orbit):
            return any(
                any(
                    max(abs(u - v) for u, v in zip(pt, kp)) < 1e-5
                    for kp in known
                )
                for pt in orbit.points
            )

        for orb in heuristic_sink_cycles(model, max_period=max_period):
            if not is_known(orb):
                out.append(orb)
    return out


# ---------------------------------------------------------------------------
# batch interval evaluation (numpy, blind outward nudge)
# ---------------------------------------------------------------------------


def _bdn(x):
    return np.nextafter(x, -np.inf)


def _bup(x):
    return np.nextafter(x, np.inf)


def _badd(alo, ahi, blo, bhi):
    return _bdn(alo + blo), _bup(ahi + bhi)


def _bsub(alo, ahi, blo, bhi):
    return _bdn(alo - bhi), _bup(ahi - blo)


def _bmul(alo, ahi, blo, bhi):
    p1 = alo * blo
    p2 = alo * bhi
    p3 = ahi * blo
    p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return _bdn(lo), _bup(hi)


def _bsquare(lo, hi):
    m = np.maximum(-lo, hi)
    sq_hi = _bup(m * m)
    pos = lo >= 0.0
    neg = hi <= 0.0
    sq_lo = np.where(pos, _bdn(lo * lo), np.where(neg, _bdn(hi * hi), 0.0))
    return np.maximum(sq_lo, 0.0), sq_hi


def _bdiv_pos(nlo, nhi, dlo, dhi):
    # denominator interval strictly positive
    q1 = nlo / dlo
    q2 = nlo / dhi
    q3 = nhi / dlo
    q4 = nhi / dhi
    lo = np.minimum(np.minimum(q1, q2), np.minimum(q3, q4))
    hi = np.maximum(np.maximum(q1, q2), np.maximum(q3, q4))
    return _bdn(lo), _bup(hi)


def _const_iv(iv: Interval) -> tuple[float, float]:
    return iv.lo, iv.hi


def batch_forward(model: MapModel, lo, hi):
    """One interval image step for N boxes at once.

    lo/hi are float64 arrays of shape [N, naxes]; axis order is
    (Re x, Im x, Re y, Im y) for henon_complex, (x, y) for henon_real,
    (Re z, Im z) for the 1-D kinds.  Outward nudged; rows that blow up
    may contain inf or NaN and must be masked by the caller.
    """
    cre = _const_iv(model.c_iv.re)
    cim = _const_iv(model.c_iv.im) if not model.real_mode else None
    if model.kind == "henon_complex":
        are = _const_iv(model.a_iv.re)
        aim = _const_iv(model.a_iv.im)
        xr = (lo[:, 0], hi[:, 0])
        xi = (lo[:, 1], hi[:, 1])
        yr = (lo[:, 2], hi[:, 2])
        yi = (lo[:, 3], hi[:, 3])
        sq_re = _bsub(*_bsquare(*xr), *_bsquare(*xi))
        prod = _bmul(*xr, *xi)
        sq_im = (2.0 * prod[0], 2.0 * prod[1])  # exact power-of-two scale
        ay_re = _bsub(*_bmul(*yr, *are), *_bmul(*yi, *aim))
        ay_im = _badd(*_bmul(*yi, *are), *_bmul(*yr, *aim))
        nx_re = _bsub(*_badd(*sq_re, *cre), *ay_re)
        nx_im = _bsub(*_badd(*sq_im, *cim), *ay_im)
        out_lo = np.column_stack([nx_re[0], nx_im[0], lo[:, 0], lo[:, 1]])
        out_hi = np.column_stack([nx_re[1], nx_im[1], hi[:, 0], hi[:, 1]])
        return out_lo, out_hi
    if model.kind == "henon_real":
        are = _const_iv(model.a_iv.re)
        x = (lo[:, 0], hi[:, 0])
        y = (lo[:, 1], hi[:, 1])
        ay = _bmul(*y, *are)
        nx = _bsub(*_badd(*_bsquare(*x), *cre), *ay)
        return (
            np.column_stack([nx[0], lo[:, 0]]),
            np.column_stack([nx[1], hi[:, 0]]),
        )
    zr = (lo[:, 0], hi[:, 0])
    zi = (lo[:, 1], hi[:, 1])
    if model.kind == "quad_poly":
        n_re = _badd(*_bsub(*_bsquare(*zr), *_bsquare(*zi)), *cre)
        prod = _bmul(*zr, *zi)
        n_im = _badd(2.0 * prod[0], 2.0 * prod[1], *cim)
        return (
            np.column_stack([n_re[0], n_im[0]]),
            np.column_stack([n_re[1], n_im[1]]),
        )
    # cubic: (z^2 - 3a^2) z + c
    t3 = model._three_a_sq()
    t_re = _bsub(*_bsub(*_bsquare(*zr), *_bsquare(*zi)), *_const_iv(t3.re))
    prod = _bmul(*zr, *zi)
    t_im = _bsub(2.0 * prod[0], 2.0 * prod[1], *_const_iv(t3.im))
    m_re = _bsub(*_bmul(*t_re, *zr), *_bmul(*t_im, *zi))
    m_im = _badd(*_bmul(*t_re, *zi), *_bmul(*t_im, *zr))
    n_re = _badd(*m_re, *cre)
    n_im = _badd(*m_im, *cim)
    return (
        np.column_stack([n_re[0], n_im[0]]),
        np.column_stack([n_re[1], n_im[1]]),
    )


def batch_backward(model: MapModel, lo, hi):
    """One interval preimage step for N boxes (Henon kinds only)."""
    if not model.is_henon:
        raise UsageError("inverse is defined for Henon kinds only")
    cre = _const_iv(model.c_iv.re)
    den = model.a_iv.abs_sq()
    if den.lo <= 0.0:
        raise DomainError("a = 0 has no inverse")
    dl, dh = den.lo, den.hi
    if model.kind == "henon_real":
        x = (lo[:, 0], hi[:, 0])
        y = (lo[:, 1], hi[:, 1])
        w = _bsub(*_badd(*_bsquare(*y), *cre), *x)
        # w * a / |a|^2 for real a
        num = _bmul(*w, *_const_iv(model.a_iv.re))
        ny = _bdiv_pos(*num, dl, dh)
        return (
            np.column_stack([lo[:, 1], ny[0]]),
            np.column_stack([hi[:, 1], ny[1]]),
        )
    cim = _const_iv(model.c_iv.im)
    conj_re = _const_iv(model.a_iv.re)
    conj_im = _const_iv(model.a_iv.im.neg())
    xr = (lo[:, 0], hi[:, 0])
    xi = (lo[:, 1], hi[:, 1])
    yr = (lo[:, 2], hi[:, 2])
    yi = (lo[:, 3], hi[:, 3])
    w_re = _bsub(*_badd(*_bsub(*_bsquare(*yr), *_bsquare(*yi)), *cre), *xr)
    prod = _bmul(*yr, *yi)
    w_im = _bsub(*_badd(2.0 * prod[0], 2.0 * prod[1], *cim), *xi)
    num_re = _bsub(*_bmul(*w_re, *conj_re), *_bmul(*w_im, *conj_im))
    num_im = _badd(*_bmul(*w_re, *conj_im), *_bmul(*w_im, *conj_re))
    ny_re = _bdiv_pos(*num_re, dl, dh)
    ny_im = _bdiv_pos(*num_im, dl, dh)
    return (
        np.column_stack([lo[:, 2], lo[:, 3], ny_re[0], ny_im[0]]),
        np.column_stack([hi[:, 2], hi[:, 3], ny_re[1], ny_im[1]]),
    )
