"""Visualization of box chain recurrent models.

For maps of C^2 the phase space is four-real-dimensional, so the model
is sketched on a dynamically significant slice: the unstable manifold
of a saddle fixed point p, parameterized by the plane through

    gamma_N(z) = f^N(p + (z / l1^N) v1),

where l1 is the unstable eigenvalue and v1 = (l1, 1) its eigenvector.
gamma_N is evaluated in extended-precision point arithmetic (the
forward iteration amplifies roundoff by ~|l1|^N) and satisfies the
conjugation f(gamma(z)) = gamma(l1 z) up to a residual that shrinks
with N.  Everything here is explicitly non-rigorous: pictures guide
the construction, the graph and bounds carry the guarantees.

Pixel coloring: boxes of the recurrent model hit by the pixel's point
are mapped through a palette (one gray per component, sized-ordered,
evenly spaced in [40, 200]; black when several components hit; white
when none), then pixels that look like members of the forward-bounded
set (orbit stays within the escape radius for kplus_iters steps) are
lightened by +40, clamped at 255.

Images are 8-bit and written as binary PPM (P6) always, or PNG via a
built-in encoder over the same pixel buffer; repeated renders of the
same inputs are byte-identical.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .ia import UsageError
from .maps import FixedPointInfo, MapModel, fixed_points
from .chain_graph import ChainGraph

__all__ = [
    "RenderConfig",
    "Image",
    "unstable_parameterization",
    "pick_saddle",
    "render_slice",
    "render_plane",
    "kplus_heuristic",
    "component_palette",
]


@dataclass(frozen=True)
class RenderConfig:
    """Window in the parameter plane (or phase plane) plus knobs."""

    center: complex = 0j
    half_width: float = 1.0
    half_height: Optional[float] = None
    resolution: int = 256
    gamma_depth: int = 20
    kplus_iters: int = 100
    escape_radius: Optional[float] = None  # defaults to 2 R'
    kplus_lighten: bool = True

    def validate(self, model: MapModel) -> "RenderConfig":
        if self.resolution < 1:
            raise UsageError("resolution must be at least 1")
        er = self.escape_radius
        if er is None:
            er = 2.0 * model.r_prime
        if er < model.r_prime:
            raise UsageError("escape radius must be at least R'")
        hh = self.half_height if self.half_height is not None else self.half_width
        return RenderConfig(
            center=self.center,
            half_width=self.half_width,
            half_height=hh,
            resolution=self.resolution,
            gamma_depth=self.gamma_depth,
            kplus_iters=self.kplus_iters,
            escape_radius=er,
            kplus_lighten=self.kplus_lighten,
        )


class Image:
    """8-bit grayscale pixel grid, row-major, top row first."""

    def __init__(self, width: int, height: int, pixels: bytearray):
        if len(pixels) != width * height:
            raise UsageError("pixel buffer size mismatch")
        self.width = width
        self.height = height
        self.pixels = pixels

    def at(self, row: int, col: int) -> int:
        return self.pixels[row * self.width + col]

    def rgb_bytes(self) -> bytes:
        out = bytearray(3 * len(self.pixels))
        out[0::3] = self.pixels
        out[1::3] = self.pixels
        out[2::3] = self.pixels
        return bytes(out)

    def ppm_bytes(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.rgb_bytes()

    def png_bytes(self) -> bytes:
        def chunk(tag: bytes, data: bytes) -> bytes:
            return (
                struct.pack(">I", len(data))
                + tag
                + data
                + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
            )

        ihdr = struct.pack(">IIBBBBB", self.width, self.height, 8, 2, 0, 0, 0)
        rgb = self.rgb_bytes()
        stride = 3 * self.width
        raw = b"".join(
            b"\x00" + rgb[y * stride : (y + 1) * stride] for y in range(self.height)
        )
        return (
            b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(raw, 9))
            + chunk(b"IEND", b"")
        )

    def save(self, path: str) -> None:
        data = self.png_bytes() if str(path).lower().endswith(".png") else self.ppm_bytes()
        with open(path, "wb") as fh:
            fh.write(data)


# ---------------------------------------------------------------------------
# unstable manifold parameterization
# ---------------------------------------------------------------------------


def _longdouble_param(strs: tuple[str, str]):
    re = Fraction(strs[0])
    im = Fraction(strs[1])
    ld = np.longdouble
    return (
        ld(re.numerator) / ld(re.denominator),
        ld(im.numerator) / ld(im.denominator),
    )


def _clongdouble(re, im):
    return np.clongdouble(re) + np.clongdouble(1j) * np.clongdouble(im)


def pick_saddle(model: MapModel) -> FixedPointInfo:
    """Deterministic saddle choice: largest unstable eigenvalue modulus."""
    saddles = [f for f in fixed_points(model) if f.classification == "saddle"]
    if not saddles:
        raise UsageError("map has no saddle fixed point")
    return max(
        saddles,
        key=lambda f: (max(abs(l) for l in f.eigenvalues),
                       (-f.location[0].real, -f.location[0].imag)),
    )


def unstable_parameterization(
    model: MapModel, saddle: FixedPointInfo, depth: int = 20
) -> Callable:
    """Evaluator z -> point in C^2 approximating the natural unstable
    parameterization at the saddle; f(gamma(z)) ~ gamma(l1 z).

    Pure point arithmetic (extended precision internally); vectorized
    over numpy arrays of z.  Non-rigorous by construction.
    """
    if not model.is_henon:
        raise UsageError("unstable slices are defined for Henon kinds only")
    if saddle.classification != "saddle":
        raise UsageError("unstable parameterization needs a saddle fixed point")
    if depth < 1:
        raise UsageError("depth must be at least 1")
    a = _clongdouble(*_longdouble_param(model.a_str))
    c = _clongdouble(*_longdouble_param(model.c_str))
    one = np.clongdouble(1.0)
    # polish the saddle in extended precision
    z = np.clongdouble(complex(saddle.location[0]))
    for _ in range(8):
        z = z - (z * z - (one + a) * z + c) / (2.0 * z - (one + a))
    lam = z + np.sqrt(z * z - a)
    if abs(complex(lam)) <= 1.0:
        lam = z - np.sqrt(z * z - a)
    lam_pow = lam ** np.clongdouble(depth)
    # quadratic manifold correction h: f(p + wv + w^2 h) = gamma(lam w) +
    # O(w^3), i.e. (lam^2 I - Df_p) h = (lam^2, 0); cuts the seed defect
    # from O(w^2) to O(w^3) so the iteration starts on-manifold.
    det = (lam * lam - 2.0 * z) * lam * lam + a
    h_x = lam * lam * lam * lam / det
    h_y = lam * lam / det

    def evaluate(zs):
        # iterate deviations u = (x, y) - p: u' = 2z ux - a uy + ux^2.
        # All terms scale with |u|, so roundoff stays relative instead of
        # being amplified by the unstable eigenvalue, and the polished
        # saddle is an exact fixed point of the deviation form.
        zs = np.asarray(zs, dtype=complex)
        w = zs.astype(np.clongdouble) / lam_pow
        w2 = w * w
        ux = w * lam + w2 * h_x  # (z / l1^N) v1 + (z / l1^N)^2 h
        uy = w + w2 * h_y
        two_z = 2.0 * z
        for _ in range(depth):
            ux, uy = two_z * ux - a * uy + ux * ux, ux
        return (
            np.asarray(z + ux, dtype=complex),
            np.asarray(z + uy, dtype=complex),
        )

    evaluate.unstable_eigenvalue = complex(lam)
    evaluate.saddle_point = complex(z)
    evaluate.depth = depth
    return evaluate


# ---------------------------------------------------------------------------
# K+ membership heuristic
# ---------------------------------------------------------------------------


def _batch_kplus(model: MapModel, points, iters: int, escape_radius: float):
    """Boolean array: orbit stays sup-norm bounded for `iters` steps."""
    with np.errstate(over="ignore", invalid="ignore"):
        if model.is_henon:
            x = np.array([p[0] for p in points], dtype=complex)
            y = np.array([p[1] for p in points], dtype=complex)
            ok = np.ones(len(x), dtype=bool)
            a, c = model.a, model.c
            for _ in range(iters):
                x, y = x * x + c - a * y, x
                sup = np.maximum(
                    np.maximum(np.abs(x.real), np.abs(x.imag)),
                    np.maximum(np.abs(y.real), np.abs(y.imag)),
                )
                ok &= np.isfinite(sup) & (sup <= escape_radius)
                if not ok.any():
                    break
        else:
            zc = np.array([p[0] for p in points], dtype=complex)
            ok = np.ones(len(zc), dtype=bool)
            for _ in range(iters):
                (zc,) = model.point_forward((zc,))
                sup = np.maximum(np.abs(zc.real), np.abs(zc.imag))
                ok &= np.isfinite(sup) & (sup <= escape_radius)
                if not ok.any():
                    break
    return ok


def kplus_heuristic(
    model: MapModel, point: Sequence[complex], iters: int, escape_radius: float
) -> bool:
    """True iff the point orbit stays within escape_radius (sup norm)
    for `iters` steps.  Explicitly non-rigorous."""
    if iters < 1:
        raise UsageError("iters must be at least 1")
    return bool(_batch_kplus(model, [tuple(point)], iters, escape_radius)[0])


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def component_palette(n_components: int) -> list[int]:
    """Evenly spaced gray levels in [40, 200], component 0 darkest slot."""
    if n_components <= 0:
        return []
    if n_components == 1:
        return [40]
    return [40 + round(160 * k / (n_components - 1)) for k in range(n_components)]


def _pixel_grid(config: RenderConfig):
    res = config.resolution
    xs = config.center.real + (2.0 * np.arange(res) + 1.0 - res) / res * config.half_width
    ys = config.center.imag + (res - 2.0 * np.arange(res) - 1.0) / res * config.half_height
    return xs, ys  # ys walks top row -> bottom row


def _paint(gamma: ChainGraph, model: MapModel, config: RenderConfig, points):
    tree = gamma.tree
    n_comp = int(gamma.comp.max()) + 1 if gamma.n_vertices else 0
    palette = component_palette(n_comp)
    id_to_comp = {
        int(v): int(gamma.comp[k]) for k, v in enumerate(gamma.vertex_ids)
    }
    res = config.resolution
    pix = bytearray(res * res)
    for k, pt in enumerate(points):
        vals = tree.point_axis_values(pt) if tree is not None else None
        comps = set()
        if tree is not None and tree.leaf_count:
            inside = all(-tree.r_prime <= v <= tree.r_prime for v in vals)
            if inside:
                for lid in tree.leaves_containing_point(vals):
                    comp = id_to_comp.get(lid)
                    if comp is not None:
                        comps.add(comp)
        if not comps:
            pix[k] = 255
        elif len(comps) > 1:
            pix[k] = 0
        else:
            pix[k] = palette[comps.pop()]
    if config.kplus_lighten:
        bounded = _batch_kplus(model, points, config.kplus_iters, config.escape_radius)
        for k in np.flatnonzero(bounded):
            pix[k] = min(255, pix[k] + 40)
    return Image(res, res, pix)


def render_slice(
    gamma: ChainGraph,
    model: MapModel,
    saddle: FixedPointInfo,
    config: RenderConfig,
) -> Image:
    """Sketch the model on the parameterized unstable manifold of a
    saddle fixed point (Henon kinds)."""
    config = config.validate(model)
    evaluate = unstable_parameterization(model, saddle, config.gamma_depth)
    xs, ys = _pixel_grid(config)
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    px, py = evaluate(zz)
    points = list(zip(px, py))
    return _paint(gamma, model, config, points)


def render_plane(gamma: ChainGraph, model: MapModel, config: RenderConfig) -> Image:
    """Direct phase-plane render: C for the 1-D kinds, R^2 (x, y) for
    the real Henon map."""
    if model.kind == "henon_complex":
        raise UsageError("render_plane needs a 1-D map or the real Henon map")
    config = config.validate(model)
    xs, ys = _pixel_grid(config)
    if model.kind == "henon_real":
        points = [
            (complex(x, 0.0), complex(y, 0.0)) for y in ys for x in xs
        ]
    else:
        points = [(complex(x, y),) for y in ys for x in xs]
    return _paint(gamma, model, config, points)
