"""Laguerre-Gauss modes in natural units.

Radial coordinates are measured in units of the waist ``w0`` and propagation
distance in units of the Rayleigh range ``z_R``.  Because ``k w0**2 = 2 z_R``
the wavelength drops out and the wavefront-curvature phase becomes
``r**2 z / (1 + z**2)``.  The constant ``1/w0`` prefactor is omitted
everywhere; all downstream quantities are normalized probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True, order=True)
class ModeIndex:
    """Laguerre-Gauss label: OAM number ``l`` and radial node count ``p``."""

    l: int
    p: int = 0

    def __post_init__(self):
        if self.p < 0:
            raise DomainError(f"radial index p must be >= 0, got {self.p}")


@dataclass(frozen=True)
class BeamGeometry:
    """Beam parameters at distance ``z`` (units of the Rayleigh range)."""

    z: float = 0.0

    @property
    def width(self) -> float:
        """Beam radius ratio w(z)/w0."""
        return math.sqrt(1.0 + self.z * self.z)

    @property
    def gouy(self) -> float:
        return math.atan(self.z)

    @property
    def curvature(self) -> float:
        """Coefficient c of the wavefront phase exp(-i c r**2)."""
        return self.z / (1.0 + self.z * self.z)


@dataclass(frozen=True)
class ModeWindow:
    """Detection window: ``l_min <= l <= l_max`` and ``0 <= p <= p_max``."""

    l_min: int = -10
    l_max: int = 10
    p_max: int = 0

    def __post_init__(self):
        if self.l_min > self.l_max:
            raise ConfigError(f"empty l range [{self.l_min}, {self.l_max}]")
        if self.p_max < 0:
            raise ConfigError(f"p_max must be >= 0, got {self.p_max}")

    @property
    def l_values(self) -> np.ndarray:
        return np.arange(self.l_min, self.l_max + 1)

    @property
    def n_l(self) -> int:
        return self.l_max - self.l_min + 1

    @property
    def n_p(self) -> int:
        return self.p_max + 1

    def l_index(self, l: int) -> int:
        if not self.l_min <= l <= self.l_max:
            raise ConfigError(f"l={l} outside window [{self.l_min}, {self.l_max}]")
        return l - self.l_min

    def modes(self) -> list[ModeIndex]:
        return [ModeIndex(l, p) for l in self.l_values.tolist() for p in range(self.n_p)]

    @property
    def symmetric(self) -> bool:
        return self.l_min == -self.l_max


def laguerre(p: int, alpha: int, x):
    """Associated Laguerre polynomial L_p^alpha(x) by upward recurrence.

    Uses ``(k+1) L_{k+1} = (2k + 1 + alpha - x) L_k - (k + alpha) L_{k-1}``,
    which is stable for x >= 0.  ``x`` may be a scalar or an array.
    """
    if p < 0 or alpha < 0:
        raise DomainError(f"laguerre requires p >= 0 and alpha >= 0, got p={p}, alpha={alpha}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def laguerre_all(p_max: int, alpha: int, x) -> np.ndarray:
    """Stack of L_0^alpha(x) ... L_{p_max}^alpha(x) along a new leading axis."""
    if p_max < 0 or alpha < 0:
        raise DomainError(f"laguerre requires p >= 0 and alpha >= 0, got p={p_max}, alpha={alpha}")
    x = np.asarray(x, dtype=float)
    out = np.empty((p_max + 1,) + x.shape)
    out[0] = 1.0
    if p_max >= 1:
        out[1] = 1.0 + alpha - x
    for k in range(1, p_max):
        out[k + 1] = ((2 * k + 1 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def norm_const(m: ModeIndex) -> float:
    """Normalization sqrt(2 p! / (pi (p + |l|)!))."""
    al = abs(m.l)
    return math.exp(0.5 * (math.log(2.0 / math.pi) + math.lgamma(m.p + 1) - math.lgamma(m.p + al + 1)))


def _envelope(al: int, r: np.ndarray, w: float) -> np.ndarray:
    # (sqrt(2) r / w)**al * exp(-r**2/w**2) / w, in log space so large al cannot overflow
    s = np.sqrt(2.0) * r / w
    with np.errstate(divide="ignore"):
        logs = np.where(s > 0, np.log(np.where(s > 0, s, 1.0)), -np.inf)
    expo = -(r / w) ** 2 - math.log(w)
    if al == 0:
        return np.exp(expo)
    return np.exp(al * logs + expo)


def radial_profiles(al: int, p_max: int, g: BeamGeometry, r) -> np.ndarray:
    """Real radial factors of modes (|l| = al, p = 0..p_max), curvature phase excluded.

    Shape ``(p_max + 1,) + r.shape``.
    """
    r = np.asarray(r, dtype=float)
    w = g.width
    env = _envelope(al, r, w)
    lag = laguerre_all(p_max, al, 2.0 * (r / w) ** 2)
    norms = np.array([norm_const(ModeIndex(al, p)) for p in range(p_max + 1)])
    return norms.reshape((-1,) + (1,) * r.ndim) * env * lag


def eval_mode(m: ModeIndex, g: BeamGeometry, r, phi):
    """Complex mode amplitude u_lp(r, z, phi); broadcasts over ``r`` and ``phi``."""
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    al = abs(m.l)
    radial = radial_profiles(al, m.p, g, r)[m.p]
    phase = -g.curvature * r**2 - m.l * phi + (2 * m.p + al + 1) * g.gouy
    out = radial * np.exp(1j * phase)
    return out if out.ndim else complex(out)
