"""Downconversion coupling coefficients and coincidence amplitudes.

For a Gaussian pump (l0 = p0 = 0) with a thin crystal at the waist the pair
amplitude into signal (l, p1) and idler (-l, p2) has the closed form

    C[l; p1, p2] = sqrt(p1! p2! (l+p1)! (l+p2)!)
                   * sum_{m<=p1, n<=p2} (2/3)^(m+n+l) (-1)^(m+n) (l+m+n)!
                     / ((p1-m)! (p2-n)! (l+m)! (l+n)! m! n!)

The double sum is evaluated in exact rational arithmetic, so there is no
cancellation or overflow at large indices.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NoTransmissionError
from .modes import BeamGeometry, ModeIndex, ModeWindow, eval_mode
from .overlap import DEFAULT_NPHI, DEFAULT_NR, OverlapTable, integrate_polar

DEFAULT_PPRIME_MAX = 8


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


@lru_cache(maxsize=4096)
def coupling(l: int, p1: int, p2: int) -> float:
    """Pair amplitude C[l, -l; p1, p2] for a Gaussian pump."""
    if l < 0 or p1 < 0 or p2 < 0:
        raise ConfigError(f"coupling needs l, p1, p2 >= 0, got ({l}, {p1}, {p2})")
    two_thirds = Fraction(2, 3)
    total = Fraction(0)
    for m in range(p1 + 1):
        for n in range(p2 + 1):
            num = _fact(l + m + n)
            den = _fact(p1 - m) * _fact(p2 - n) * _fact(l + m) * _fact(l + n) * _fact(m) * _fact(n)
            term = two_thirds ** (m + n + l) * Fraction(num, den)
            total += -term if (m + n) % 2 else term
    root = _fact(p1) * _fact(p2) * _fact(l + p1) * _fact(l + p2)
    # value = total * sqrt(root); square exactly, then take one rounded sqrt
    mag = math.sqrt(float(total * total * root))
    return math.copysign(mag, float(total)) if total else 0.0


def coupling_oracle(l: int, p1: int, p2: int, pump: ModeIndex = ModeIndex(0, 0),
                    n_r: int = DEFAULT_NR, n_phi: int = 64) -> float:
    """Direct quadrature of the pump / pair-mode overlap at the waist.

    Integrates ``Phi(r) * conj(u_{l,p1}(r) u_{l0-l,p2}(r))`` over the plane.  It
    agrees with :func:`coupling` up to a common factor (the value at
    ``(0, 0, 0)``), which is how it is used as a cross-check.
    """
    g = BeamGeometry(0.0)
    sig, idl = ModeIndex(l, p1), ModeIndex(pump.l - l, p2)

    def integrand(r, phi):
        return eval_mode(pump, g, r, phi) * np.conj(eval_mode(sig, g, r, phi) * eval_mode(idl, g, r, phi))

    val = integrate_polar(integrand, 8.0, n_r, n_phi)
    return val.real


@dataclass(frozen=True)
class CouplingTable:
    """``entries[l, p1, p2]`` for ``0 <= l <= l_max``; negative l reuse |l|."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def l_max(self):
        return self.entries.shape[0] - 1

    def value(self, l: int, p1: int, p2: int) -> float:
        return float(self.entries[abs(l), p1, p2])


def coupling_table(l_max: int, p1_max: int, p2_max: int) -> CouplingTable:
    """Tabulate :func:`coupling`; warns (never clamps) on non-positive entries."""
    arr = np.array([[[coupling(l, a, b) for b in range(p2_max + 1)]
                     for a in range(p1_max + 1)] for l in range(l_max + 1)])
    bad = np.argwhere(arr <= 0)
    if len(bad):
        warnings.warn(f"non-positive coupling coefficients at (l, p1, p2) = {bad[:5].tolist()}",
                      RuntimeWarning, stacklevel=2)
    return CouplingTable(arr)


@dataclass(frozen=True)
class AmplitudeTable:
    """Normalized coincidence amplitudes ``values[l1, p1, l2, p2]`` over ``window``.

    ``c0`` is the normalization constant that makes the total probability 1.
    """

    window: ModeWindow
    values: np.ndarray = field(repr=False)
    c0: float = 1.0

    def __post_init__(self):
        arr = np.array(self.values, dtype=complex)
        w = self.window
        if arr.shape != (w.n_l, w.n_p, w.n_l, w.n_p):
            raise ConfigError(f"amplitude shape {arr.shape} does not match window")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def get(self, l1: int, p1: int, l2: int, p2: int) -> complex:
        w = self.window
        return complex(self.values[w.l_index(l1), p1, w.l_index(l2), p2])

    def rows(self):
        w = self.window
        for i, l1 in enumerate(w.l_values.tolist()):
            for p1 in range(w.n_p):
                for k, l2 in enumerate(w.l_values.tolist()):
                    for p2 in range(w.n_p):
                        v = self.values[i, p1, k, p2]
                        yield l1, p1, l2, p2, float(v.real), float(v.imag)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["l1", "p1", "l2", "p2", "re", "im"])
        for l1, p1, l2, p2, re, im in self.rows():
            wr.writerow([l1, p1, l2, p2, repr(re), repr(im)])
        return buf.getvalue()

    def to_json(self) -> str:
        w = self.window
        doc = {"window": {"l_min": w.l_min, "l_max": w.l_max, "p_max": w.p_max}, "c0": self.c0,
               "entries": [list(r) for r in self.rows()]}
        return json.dumps(doc, indent=1)


def joint_amplitudes(c: CouplingTable, a: OverlapTable, window: ModeWindow | None = None,
                     p_prime_max: int = DEFAULT_PPRIME_MAX) -> AmplitudeTable:
    """Coincidence amplitudes A[l1, p1; l2, p2] with the object in the signal arm.

    A = C0 * sum_{p'=0}^{p_prime_max} C[-l2, l2; p', p2] * a[-l2, p'; l1, p1]
    """
    window = window or ModeWindow()
    aw = a.window
    ls = window.l_values
    missing = [int(l) for l in ls if not (a.covers(int(l)) and a.covers(-int(l)))]
    if missing:
        raise ConfigError(f"overlap table l range [{aw.l_min}, {aw.l_max}] does not cover l = {missing[:4]}")
    if aw.pp_max < p_prime_max or aw.p_max < window.p_max:
        raise ConfigError(f"overlap table radial window (p' <= {aw.pp_max}, p <= {aw.p_max}) is smaller "
                          f"than requested (p' <= {p_prime_max}, p <= {window.p_max})")
    if c.l_max < int(np.max(np.abs(ls))) or c.entries.shape[1] <= p_prime_max or c.entries.shape[2] <= window.p_max:
        raise ConfigError("coupling table does not cover the detection window")

    i1 = ls - aw.l_min           # a index for l1
    i2 = -ls - aw.l_min          # a index for l' = -l2
    npp, npr = p_prime_max + 1, window.p_max + 1
    # sub[l2, p', l1, p1] = a[-l2, p'; l1, p1]
    sub = a.entries[i2][:, :npp][:, :, i1][:, :, :, :npr]
    # cc[l2, p', p2] = C[|l2|; p', p2]
    cc = c.entries[np.abs(ls)][:, :npp, :npr]
    raw = np.einsum("kqp,kqiu->iukp", cc, sub)
    total = float(np.sum(np.abs(raw) ** 2))
    if total == 0.0:
        raise NoTransmissionError("no transmitted amplitude inside the detection window")
    c0 = 1.0 / math.sqrt(total)
    return AmplitudeTable(window, raw * c0, c0)
