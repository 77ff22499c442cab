"""Coherent and incoherent image synthesis from Laguerre-Gauss coefficients.

A coherent sum keeps the relative phases and therefore the azimuthal structure
of the object; the incoherent sum of |u_lp|^2 rings is rotationally symmetric
whatever the coefficients are.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import ConfigError, UndefinedMetricError
from .modes import BeamGeometry, ModeIndex, eval_mode
from .objects import encode_pgm
from .overlap import OverlapTable

FLAT_TOL = 1e-12  # ring fluctuations below this fraction of the mean count as flat


@dataclass(frozen=True)
class GridSpec:
    """Square pixel grid centered on the beam axis; ``pitch`` in units of w0."""

    n: int = 256
    pitch: float = 4.0 / 256

    def __post_init__(self):
        if self.n < 2 or self.pitch <= 0:
            raise ConfigError("grid needs n >= 2 and pitch > 0")

    def coords(self):
        c = (np.arange(self.n) - (self.n - 1) / 2) * self.pitch
        x, y = np.meshgrid(c, -c)
        return x, y


@dataclass(frozen=True)
class RasterImage:
    values: np.ndarray = field(repr=False)
    pitch: float

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ConfigError("image values must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def to_pgm(self) -> bytes:
        """8-bit PGM with the peak mapped to 255."""
        peak = self.values.max()
        scaled = self.values / peak * 255 if peak > 0 else self.values
        return encode_pgm(np.round(scaled).astype(np.uint8))

    def to_csv(self) -> str:
        return "\n".join(",".join(repr(float(v)) for v in row) for row in self.values) + "\n"


def _fields(coeffs: Mapping, g: BeamGeometry, grid: GridSpec):
    if not coeffs:
        raise ConfigError("coefficient set is empty")
    x, y = grid.coords()
    r, phi = np.hypot(x, y), np.arctan2(y, x)
    for key, c in coeffs.items():
        m = key if isinstance(key, ModeIndex) else ModeIndex(*key)
        yield c, eval_mode(m, g, r, phi)


def render_coherent(coeffs: Mapping, g: BeamGeometry = BeamGeometry(0.0), grid: GridSpec = GridSpec()) -> RasterImage:
    """|sum_lp c_lp u_lp|^2 on the grid; ``coeffs`` maps (l, p) to complex values."""
    total = 0
    for c, u in _fields(coeffs, g, grid):
        total = total + c * u
    return RasterImage(np.abs(total) ** 2, grid.pitch)


def render_incoherent(weights: Mapping, g: BeamGeometry = BeamGeometry(0.0), grid: GridSpec = GridSpec()) -> RasterImage:
    """sum_lp w_lp |u_lp|^2; ``weights`` maps (l, p) to |c_lp|^2 (complex values are squared)."""
    total = 0
    for w, u in _fields(weights, g, grid):
        w = abs(w) ** 2 if np.iscomplexobj(w) else w
        total = total + w * np.abs(u) ** 2
    return RasterImage(total, grid.pitch)


def polar_samples(img: RasterImage, n_radii: int = 64, n_angles: int = 256) -> np.ndarray:
    """Bilinear samples ``s[radius, angle]`` on circles inside the image."""
    n = img.values.shape[0]
    r_max = (n - 1) / 2 * img.pitch
    radii = r_max * (np.arange(1, n_radii + 1) / n_radii)
    ang = 2 * np.pi * np.arange(n_angles) / n_angles
    x = radii[:, None] * np.cos(ang)[None, :]
    y = radii[:, None] * np.sin(ang)[None, :]
    col = x / img.pitch + (n - 1) / 2
    row = (n - 1) / 2 - y / img.pitch
    return map_coordinates(img.values, [row, col], order=1, mode="nearest")


def azimuthal_variance(img: RasterImage, n_radii: int = 64, n_angles: int = 256) -> float:
    """Mean over radii of the angular variance, divided by the squared mean intensity."""
    s = polar_samples(img, n_radii, n_angles)
    mean = s.mean()
    if mean <= 0:
        raise UndefinedMetricError("azimuthal variance is undefined for an all-zero image")
    return float(s.var(axis=1).mean() / mean**2)


def rotational_correlation(img: RasterImage, fold: int, n_radii: int = 64, n_angles: int = 360) -> float:
    """Correlation of the image's azimuthal fluctuations with their copy rotated by 2 pi / ``fold``.

    Each ring's mean is removed first so radial structure does not count as
    rotational symmetry.
    """
    if fold < 1 or n_angles % fold:
        raise ConfigError(f"n_angles={n_angles} must be divisible by fold={fold}")
    s = polar_samples(img, n_radii, n_angles)
    a = s - s.mean(axis=1, keepdims=True)
    b = np.roll(a, n_angles // fold, axis=1)
    den = np.sqrt((a * a).sum() * (b * b).sum())
    if den <= (FLAT_TOL * np.abs(s).mean()) ** 2 * a.size:
        raise UndefinedMetricError("rotational correlation is undefined for an azimuthally flat image")
    return float((a * b).sum() / den)


def object_coefficients(table: OverlapTable, l_in: int = 0, p_in: int = 0) -> dict:
    """Expansion of the object-modulated input mode: {(l, p): a[l_in, p_in; l, p]}."""
    w = table.window
    return {(int(l), p): table.get(l_in, p_in, int(l), p)
            for l in w.l_values for p in range(w.p_max + 1)}


def integrated_power(img: RasterImage) -> float:
    return float(img.values.sum() * img.pitch**2)
