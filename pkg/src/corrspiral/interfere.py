"""Beam-splitter mixing of signal and idler and phase retrieval from singles rates.

Mixing erases which-path information, so the two detector banks see

    R+ = |1 + i a~|^2 = 1 + |a|^2 - 2 Im a~
    R- = |i + a~|^2   = 1 + |a|^2 + 2 Im a~,     a~ = exp(i theta) a,

normalized so the empty object arm gives unit rate.  A single reference
phase only fixes Im(a); measuring at theta = 0 and theta = pi/2 recovers both
quadratures.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataIntegrityError
from .modes import BeamGeometry
from .overlap import OverlapTable, OverlapWindow

THETAS = (0.0, math.pi / 2)
CONSISTENCY_TOL = 1e-6


def rates(a, theta: float = 0.0):
    """(R+, R-) for complex coefficient(s) ``a`` at reference phase ``theta``."""
    at = np.exp(1j * theta) * np.asarray(a, dtype=complex)
    mod2 = np.abs(at) ** 2
    return 1.0 + mod2 - 2.0 * at.imag, 1.0 + mod2 + 2.0 * at.imag


@dataclass(frozen=True)
class InterferenceRecord:
    """Singles rates ``rates[t, 0|1, l1 - l_min, l2 - l_min]`` for R+ and R-.

    ``thetas[t]`` is the reference phase of slice ``t``; ``l0`` is the pump OAM.
    """

    l_min: int
    l_max: int
    thetas: tuple
    rates: np.ndarray = field(repr=False)
    z: float = float("nan")
    l0: int = 0

    def __post_init__(self):
        arr = np.array(self.rates, dtype=float)
        n = self.l_max - self.l_min + 1
        if arr.shape != (len(self.thetas), 2, n, n):
            raise ConfigError(f"rate array shape {arr.shape} does not match record layout")
        if np.any(arr < 0):
            raise ConfigError("rates must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "rates", arr)
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))

    @property
    def l_values(self):
        return np.arange(self.l_min, self.l_max + 1)

    def slice(self, theta: float):
        for t, th in enumerate(self.thetas):
            if math.isclose(th, theta, abs_tol=1e-12):
                return self.rates[t, 0], self.rates[t, 1]
        raise ConfigError(f"record has no slice at theta={theta}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["l1", "l2", "theta", "R_plus", "R_minus"])
        ls = self.l_values.tolist()
        for t, th in enumerate(self.thetas):
            for i, l1 in enumerate(ls):
                for k, l2 in enumerate(ls):
                    wr.writerow([l1, l2, repr(th), repr(float(self.rates[t, 0, i, k])),
                                 repr(float(self.rates[t, 1, i, k]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, z: float = float("nan"), l0: int = 0) -> "InterferenceRecord":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ConfigError("empty interference CSV")
        try:
            l1s = [int(r["l1"]) for r in rows]
            l2s = [int(r["l2"]) for r in rows]
            ths = sorted({float(r["theta"]) for r in rows})
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed interference CSV: {exc}") from exc
        lo, hi = min(l1s + l2s), max(l1s + l2s)
        n = hi - lo + 1
        arr = np.full((len(ths), 2, n, n), np.nan)
        for r, l1, l2 in zip(rows, l1s, l2s):
            t = ths.index(float(r["theta"]))
            arr[t, 0, l1 - lo, l2 - lo] = float(r["R_plus"])
            arr[t, 1, l1 - lo, l2 - lo] = float(r["R_minus"])
        if np.isnan(arr).any():
            raise ConfigError("interference CSV does not cover a full (l1, l2, theta) grid")
        return cls(lo, hi, tuple(ths), arr, z, l0)


def _coefficient_matrix(a: OverlapTable, l0: int) -> np.ndarray:
    """m[l1, l2] = a[l0 - l2, 0; l1, 0] over the table's l range."""
    w = a.window
    ls = w.l_values
    need = [int(l0 - l2) for l2 in ls if not a.covers(int(l0 - l2))]
    if need:
        raise ConfigError(f"overlap table does not cover l' = {need[:4]} (pump l0={l0})")
    p0 = a.p0_matrix()  # [l', l]
    return p0[(l0 - ls) - w.l_min][:, ls - w.l_min].T


def simulate_rates(a: OverlapTable, theta=THETAS, l0: int = 0) -> InterferenceRecord:
    """Noiseless singles rates for every (l1, l2) at the given reference phase(s)."""
    thetas = (float(theta),) if np.isscalar(theta) else tuple(float(t) for t in theta)
    m = _coefficient_matrix(a, l0)
    arr = np.stack([np.stack(rates(m, th)) for th in thetas])
    w = a.window
    return InterferenceRecord(w.l_min, w.l_max, thetas, arr, a.z, l0)


def add_poisson_noise(rec: InterferenceRecord, counts: float, rng: np.random.Generator) -> InterferenceRecord:
    """Replace each rate R by Poisson(counts * R) / counts."""
    noisy = rng.poisson(counts * rec.rates) / counts
    return InterferenceRecord(rec.l_min, rec.l_max, rec.thetas, noisy, rec.z, rec.l0)


def retrieve_matrix(rec: InterferenceRecord, tol: float | None = CONSISTENCY_TOL) -> np.ndarray:
    """Complex ``m[l1, l2] = a[l0 - l2, 0; l1, 0]`` from the theta = 0 and pi/2 slices.

    The modulus implied by R+ + R- is checked against Re^2 + Im^2; pass
    ``tol=None`` to skip the check for noisy data.
    """
    p0, m0 = rec.slice(0.0)
    p1, m1 = rec.slice(math.pi / 2)
    im = (m0 - p0) / 4.0
    re = (m1 - p1) / 4.0
    if tol is not None:
        for plus, minus in ((p0, m0), (p1, m1)):
            mod2 = (plus + minus) / 2.0 - 1.0
            err = float(np.max(np.abs(mod2 - (re**2 + im**2))))
            if err > tol:
                raise DataIntegrityError(f"rates inconsistent: |a|^2 from R+ + R- differs by {err:.3g}")
    return re + 1j * im


def retrieve_coefficients(rec: InterferenceRecord, tol: float | None = CONSISTENCY_TOL) -> OverlapTable:
    """Recover the p' = p = 0 slice of the overlap table from an interference record."""
    m = retrieve_matrix(rec, tol)
    ls = rec.l_values
    lps = rec.l0 - ls
    if lps.min() < rec.l_min or lps.max() > rec.l_max:
        raise ConfigError("retrieved l' range is not covered by the record window; use a window symmetric about l0/2")
    n = len(ls)
    entries = np.zeros((n, 1, n, 1), dtype=complex)
    for k in range(n):
        entries[lps[k] - rec.l_min, 0, :, 0] = m[:, k]
    return OverlapTable(rec.z, OverlapWindow(rec.l_min, rec.l_max, 0, 0), entries)


def parity_deviation(z: float) -> float:
    """|exp(-2i psi(z)) + 1| = 2 / sqrt(1 + z^2): distance of the Gouy factor from -1."""
    return abs(np.exp(-2j * BeamGeometry(z).gouy) + 1.0)


def gouy_parity_phase(amplitude, moduli, z: float):
    """Assign phases to a[p', 0] coefficients from the coincidence amplitude phase.

    Even p' inherit ``arg(amplitude)``; odd p' get ``arg(amplitude) + pi``.
    ``moduli`` has shape ``(n_p',) + amplitude.shape``.  The rule relies on
    the far-field Gouy phase, so a warning is issued for ``z < 5``.
    """
    if z < 5:
        warnings.warn(f"z={z} is not far from the waist; Gouy parity bookkeeping is approximate",
                      RuntimeWarning, stacklevel=2)
    amplitude = np.asarray(amplitude, dtype=complex)
    moduli = np.asarray(moduli, dtype=float)
    base = np.angle(amplitude)
    parity = (np.arange(moduli.shape[0]) % 2).reshape((-1,) + (1,) * amplitude.ndim)
    return moduli * np.exp(1j * (base + np.pi * parity))
