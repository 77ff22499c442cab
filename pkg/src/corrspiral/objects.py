"""Object transmission functions T(x, y).

Coordinates are in units of the beam waist.  Every analytic primitive is an
opaque (or partially transmitting) region in an otherwise clear aperture and
is centered on the beam axis unless an ``offset`` is given.

Besides point sampling, each map reports the straight lines and circles that
bound its regions.  The overlap quadrature uses them to split every radial
ray into smooth panels, which keeps Gauss-Legendre integration accurate
across the sharp edges of the masks.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PGMParseError


@dataclass(frozen=True, kw_only=True)
class TransmissionMap:
    """Base class: rotation by ``orientation`` then translation by ``offset``."""

    orientation: float = 0.0
    offset: tuple[float, float] = (0.0, 0.0)

    #: order N of the rotation group about the local origin; 0 means continuous
    fold = 1

    def sample(self, x, y):
        """Complex transmittance at physical points ``(x, y)``."""
        x = np.asarray(x, dtype=float) - self.offset[0]
        y = np.asarray(y, dtype=float) - self.offset[1]
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        out = self._local(c * x + s * y, -s * x + c * y)
        return out if out.ndim else complex(out)

    def _local(self, x, y):
        raise NotImplementedError

    def _lines(self):
        """Boundary lines ``n . x = c`` in local coordinates, as (nx, ny, c)."""
        return []

    def _circles(self):
        """Boundary circles in local coordinates, as (cx, cy, radius)."""
        return []

    @property
    def symmetry_order(self) -> int:
        """Rotational fold order about the beam axis (0: any angle)."""
        if any(float(v) != 0.0 for v in self.offset):
            return 1
        return self.fold

    def _global_lines(self):
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        ox, oy = map(float, self.offset)
        for nx, ny, cc in self._lines():
            gx, gy = c * nx - s * ny, s * nx + c * ny
            yield gx, gy, cc + gx * ox + gy * oy

    def _global_circles(self):
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        ox, oy = map(float, self.offset)
        for cx, cy, rad in self._circles():
            yield c * cx - s * cy + ox, s * cx + c * cy + oy, rad

    def angular_breaks(self, r_max: float):
        """Ray angles in [0, 2 pi) where the radial ray integrals are not smooth.

        These are rays through corners (line-line intersections), rays
        parallel to a boundary line, and rays tangent to a boundary circle,
        restricted to features within ``r_max`` of the axis.  ``None`` means
        no useful break list exists and a uniform angular grid should be used.
        """
        lines = list(self._global_lines())
        out = []
        for gx, gy, cg in lines:
            if abs(cg) < r_max:
                out += [math.atan2(gx, -gy), math.atan2(-gx, gy)]
        for i, (ax, ay, ac) in enumerate(lines):
            for bx, by, bc in lines[i + 1:]:
                det = ax * by - ay * bx
                if abs(det) < 1e-12:
                    continue
                px, py = (ac * by - ay * bc) / det, (ax * bc - ac * bx) / det
                if 0 < math.hypot(px, py) < r_max:
                    out.append(math.atan2(py, px))
        out += self.tangent_angles(r_max).tolist()
        return np.mod(np.array(out, dtype=float), 2 * np.pi)

    def tangent_angles(self, r_max: float) -> np.ndarray:
        """Angles of rays tangent to a boundary circle (square-root edges of the ray integrals)."""
        out = []
        for cx, cy, rad in self._global_circles():
            rho = math.hypot(cx, cy)
            if rho == 0 or rho - rad >= r_max:
                continue
            base = math.atan2(cy, cx)
            if rho > rad:
                half = math.asin(rad / rho)
                out += [base - half, base + half]
            elif rho == rad:
                out += [base - math.pi / 2, base + math.pi / 2]
        return np.mod(np.array(out, dtype=float), 2 * np.pi)

    def radial_breaks(self, phi, r_max: float) -> np.ndarray:
        """Radii in (0, r_max) where the ray at angle ``phi`` crosses a boundary.

        Returns an array of shape ``(len(phi), k)``, sorted along the last axis
        and padded with ``r_max``.
        """
        phi = np.asarray(phi, dtype=float)
        dx, dy = np.cos(phi), np.sin(phi)
        hits = []
        for gx, gy, cg in self._global_lines():
            den = gx * dx + gy * dy
            with np.errstate(divide="ignore", invalid="ignore"):
                hits.append(np.where(np.abs(den) > 1e-15, cg / den, np.inf))
        for gx, gy, rad in self._global_circles():
            b = gx * dx + gy * dy
            disc = b * b - (gx * gx + gy * gy - rad * rad)
            root = np.sqrt(np.maximum(disc, 0.0))
            ok = disc > 0
            hits.append(np.where(ok, b - root, np.inf))
            hits.append(np.where(ok, b + root, np.inf))
        if not hits:
            return np.full(phi.shape + (0,), float(r_max))
        out = np.stack(hits, axis=-1)
        out = np.where((out > 0) & (out < r_max), out, r_max)
        return np.sort(out, axis=-1)


def _check_inside(value):
    if abs(value) > 1.0:
        raise ConfigError(f"transmittance magnitude must be <= 1, got {abs(value)}")


@dataclass(frozen=True, kw_only=True)
class Clear(TransmissionMap):
    """No object: T = 1 everywhere."""

    fold = 0

    def _local(self, x, y):
        return np.ones(np.broadcast(x, y).shape, dtype=complex)


@dataclass(frozen=True)
class Strip(TransmissionMap):
    """Band ``|x| <= width/2`` (local frame) with transmittance ``inside``."""

    width: float
    inside: complex = 0.0
    fold = 2

    def __post_init__(self):
        if self.width < 0:
            raise ConfigError("strip width must be >= 0")
        _check_inside(self.inside)

    def _local(self, x, y):
        return np.where(np.abs(x) <= self.width / 2, complex(self.inside), 1.0 + 0j) + 0 * y

    def _lines(self):
        h = self.width / 2
        return [(1.0, 0.0, h), (1.0, 0.0, -h)]


@dataclass(frozen=True)
class Square(TransmissionMap):
    """Square of side ``side`` centered at the local origin."""

    side: float
    inside: complex = 0.0
    fold = 4

    def __post_init__(self):
        if self.side < 0:
            raise ConfigError("square side must be >= 0")
        _check_inside(self.inside)

    def _local(self, x, y):
        h = self.side / 2
        return np.where((np.abs(x) <= h) & (np.abs(y) <= h), complex(self.inside), 1.0 + 0j)

    def _lines(self):
        h = self.side / 2
        return [(1.0, 0.0, h), (1.0, 0.0, -h), (0.0, 1.0, h), (0.0, 1.0, -h)]


@dataclass(frozen=True)
class Disk(TransmissionMap):
    radius: float
    inside: complex = 0.0
    fold = 0

    def __post_init__(self):
        if self.radius < 0:
            raise ConfigError("disk radius must be >= 0")
        _check_inside(self.inside)

    def _local(self, x, y):
        return np.where(x * x + y * y <= self.radius**2, complex(self.inside), 1.0 + 0j)

    def _circles(self):
        return [(0.0, 0.0, self.radius)]


@dataclass(frozen=True)
class Annulus(TransmissionMap):
    """Ring ``r_in <= r <= r_out`` with transmittance ``inside``."""

    r_in: float
    r_out: float
    inside: complex = 0.0
    fold = 0

    def __post_init__(self):
        if not 0 <= self.r_in <= self.r_out:
            raise ConfigError("annulus needs 0 <= r_in <= r_out")
        _check_inside(self.inside)

    def _local(self, x, y):
        rr = x * x + y * y
        return np.where((rr >= self.r_in**2) & (rr <= self.r_out**2), complex(self.inside), 1.0 + 0j)

    def _circles(self):
        return [(0.0, 0.0, self.r_in), (0.0, 0.0, self.r_out)]


@dataclass(frozen=True)
class Polygon(TransmissionMap):
    """Regular ``n``-gon with circumradius ``radius``; a vertex lies on the +x axis."""

    n: int
    radius: float
    inside: complex = 0.0

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError("polygon needs n >= 3")
        if self.radius < 0:
            raise ConfigError("polygon radius must be >= 0")
        _check_inside(self.inside)

    @property
    def fold(self):
        return self.n

    def _edges(self):
        apothem = self.radius * math.cos(math.pi / self.n)
        angs = [math.pi / self.n + 2 * math.pi * k / self.n for k in range(self.n)]
        return [(math.cos(a), math.sin(a), apothem) for a in angs]

    def _local(self, x, y):
        inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
        for nx, ny, c in self._edges():
            inside &= nx * x + ny * y <= c
        return np.where(inside, complex(self.inside), 1.0 + 0j)

    def _lines(self):
        return self._edges()


@dataclass(frozen=True)
class Spokes(TransmissionMap):
    """``n`` bars of width ``width`` radiating from the axis (a 1-spoke bar is a half strip)."""

    n: int
    width: float
    inside: complex = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("spokes needs n >= 1")
        if self.width < 0:
            raise ConfigError("spoke width must be >= 0")
        _check_inside(self.inside)

    @property
    def fold(self):
        return self.n

    def _arms(self):
        return [2 * math.pi * k / self.n for k in range(self.n)]

    def _local(self, x, y):
        hit = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for a in self._arms():
            along = math.cos(a) * x + math.sin(a) * y
            across = -math.sin(a) * x + math.cos(a) * y
            hit |= (along >= 0) & (np.abs(across) <= self.width / 2)
        return np.where(hit, complex(self.inside), 1.0 + 0j)

    def _lines(self):
        h = self.width / 2
        out = []
        for a in self._arms():
            c, s = math.cos(a), math.sin(a)
            out += [(-s, c, h), (-s, c, -h), (c, s, 0.0)]
        return out


@dataclass(frozen=True)
class Raster(TransmissionMap):
    """Pixel mask with bilinear interpolation between pixel centers.

    Row 0 is the top of the image.  The image center sits at ``offset``;
    outside the pixel footprint the map is clear (T = 1).
    """

    values: np.ndarray = field(repr=False)
    pitch: float = 1.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.ndim != 2 or vals.size == 0:
            raise ConfigError("raster values must be a non-empty 2-D array")
        if self.pitch <= 0:
            raise ConfigError("raster pitch must be > 0")
        if np.max(np.abs(vals)) > 1.0 + 1e-12:
            raise ConfigError("raster transmittance magnitude must be <= 1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        return (type(other) is Raster and self.pitch == other.pitch
                and self.orientation == other.orientation and self.offset == other.offset
                and np.array_equal(self.values, other.values))

    @property
    def shape(self):
        return self.values.shape

    def _local(self, x, y):
        h, w = self.values.shape
        x, y = np.broadcast_arrays(x, y)
        col = x / self.pitch + (w - 1) / 2
        row = (h - 1) / 2 - y / self.pitch
        inside = (np.abs(x) <= w * self.pitch / 2) & (np.abs(y) <= h * self.pitch / 2)
        col = np.clip(col, 0, w - 1)
        row = np.clip(row, 0, h - 1)
        c0 = np.minimum(np.floor(col).astype(int), max(w - 2, 0))
        r0 = np.minimum(np.floor(row).astype(int), max(h - 2, 0))
        c1 = np.minimum(c0 + 1, w - 1)
        r1 = np.minimum(r0 + 1, h - 1)
        fc, fr = col - c0, row - r0
        v = self.values
        val = ((1 - fr) * ((1 - fc) * v[r0, c0] + fc * v[r0, c1])
               + fr * ((1 - fc) * v[r1, c0] + fc * v[r1, c1]))
        return np.where(inside, val, 1.0 + 0j)

    def angular_breaks(self, r_max: float):
        # pixel-grid vertices are too many to resolve individually
        return None

    def _lines(self):
        h, w = self.values.shape
        xs = (np.arange(w) - (w - 1) / 2) * self.pitch
        ys = ((h - 1) / 2 - np.arange(h)) * self.pitch
        out = [(1.0, 0.0, float(v)) for v in xs] + [(0.0, 1.0, float(v)) for v in ys]
        out += [(1.0, 0.0, sgn * w * self.pitch / 2) for sgn in (1, -1)]
        out += [(0.0, 1.0, sgn * h * self.pitch / 2) for sgn in (1, -1)]
        return out


# --- PGM I/O -----------------------------------------------------------------

def _pgm_token(data: bytes, pos: int):
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PGMParseError("unexpected end of header", start)
    return data[start:pos], start, pos


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode a binary 8-bit PGM (P5) image into a uint8 array of shape (rows, cols)."""
    magic, start, pos = _pgm_token(data, 0)
    if magic != b"P5":
        raise PGMParseError(f"expected magic 'P5', found {magic[:8]!r}", start)
    header = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _pgm_token(data, pos)
        if not tok.isdigit():
            raise PGMParseError(f"invalid {name} {tok[:16]!r}", start)
        header.append(int(tok))
    width, height, maxval = header
    if width <= 0 or height <= 0:
        raise PGMParseError("image dimensions must be positive", start)
    if not 0 < maxval <= 255:
        raise PGMParseError(f"maxval {maxval} is not 8-bit", start)
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PGMParseError("missing whitespace after header", pos)
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise PGMParseError(f"truncated pixel data: need {need} bytes, have {len(data) - pos}", len(data))
    pix = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(height, width)
    if maxval != 255:
        pix = np.round(pix.astype(float) * 255 / maxval).astype(np.uint8)
    return pix


def encode_pgm(pixels) -> bytes:
    pix = np.asarray(pixels, dtype=np.uint8)
    h, w = pix.shape
    return b"P5\n%d %d\n255\n" % (w, h) + pix.tobytes()


def load_raster(data: bytes, pitch: float, *, offset=(0.0, 0.0), orientation=0.0,
                threshold: int | None = None, invert: bool = False) -> Raster:
    """Build a :class:`Raster` from PGM bytes; T = pixel / 255.

    With ``threshold`` the mask is binarized (pixel >= threshold transmits);
    ``invert`` swaps opaque and clear.
    """
    pix = parse_pgm(data).astype(float)
    if threshold is not None:
        vals = (pix >= threshold).astype(float)
    else:
        vals = pix / 255.0
    if invert:
        vals = 1.0 - vals
    return Raster(vals, pitch, offset=tuple(offset), orientation=orientation)


# --- object spec strings -------------------------------------------------------

_SPEC = re.compile(r"^\s*(?P<kind>[a-z]+)\s*(?::\s*(?P<args>[^@]*))?(?:@\s*(?P<rot>[-+0-9.eE]+))?\s*$")


def parse_object(spec: str, *, offset=(0.0, 0.0)) -> TransmissionMap:
    """Parse ``kind:args[@angle]``, e.g. ``strip:0.9``, ``annulus:0.3,0.6``,
    ``square:1.0@0.3``, ``spokes:3,0.4``, ``raster:mask.pgm,0.05`` or ``none``."""
    m = _SPEC.match(spec)
    if not m:
        raise ConfigError(f"cannot parse object spec {spec!r}")
    kind = m.group("kind")
    raw = [a.strip() for a in (m.group("args") or "").split(",") if a.strip()]
    rot = float(m.group("rot")) if m.group("rot") else 0.0
    kw = {"orientation": rot, "offset": tuple(map(float, offset))}

    def nums(count, ints=()):
        if len(raw) != count:
            raise ConfigError(f"object {kind!r} takes {count} argument(s), got {len(raw)}")
        try:
            return [int(v) if i in ints else float(v) for i, v in enumerate(raw)]
        except ValueError as exc:
            raise ConfigError(f"bad numeric argument in {spec!r}") from exc

    if kind in ("none", "clear"):
        nums(0)
        return Clear(**kw)
    if kind == "strip":
        return Strip(*nums(1), **kw)
    if kind == "square":
        return Square(*nums(1), **kw)
    if kind == "disk":
        return Disk(*nums(1), **kw)
    if kind == "annulus":
        return Annulus(*nums(2), **kw)
    if kind == "polygon":
        return Polygon(*nums(2, ints=(0,)), **kw)
    if kind == "spokes":
        return Spokes(*nums(2, ints=(0,)), **kw)
    if kind == "raster":
        if len(raw) != 2:
            raise ConfigError("raster takes path,pitch")
        try:
            with open(raw[0], "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read raster {raw[0]!r}: {exc}") from exc
        return load_raster(data, float(raw[1]), **kw)
    raise ConfigError(f"unknown object kind {kind!r}")
