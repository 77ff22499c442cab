"""Classically correlated spiral imaging with sequential OAM illumination.

The object arm is fed one OAM value l1' at a time while the reference arm
records a correlated label l2 = sign * l1'.  Each setting contributes a row
weight(l1') * |a[l1', 0; l1, 0]|^2 to the joint spectrum.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnsupportedModeError
from .modes import ModeWindow
from .overlap import OverlapTable
from .spectra import JointSpectrum

SEQUENTIAL = "sequential-scan"
BROAD = "broad-simultaneous"


@dataclass(frozen=True)
class InputSpectrum:
    """Normalized illumination weights over l1' in ``[l_min, l_max]``."""

    l_min: int
    weights: np.ndarray = field(repr=False)
    mode: str = SEQUENTIAL

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("input weights must be a non-empty, non-negative vector with positive sum")
        if self.mode not in (SEQUENTIAL, BROAD):
            raise ConfigError(f"unknown input mode {self.mode!r}")
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def l_values(self):
        return np.arange(self.l_min, self.l_min + len(self.weights))

    def weight(self, l: int) -> float:
        i = l - self.l_min
        return float(self.weights[i]) if 0 <= i < len(self.weights) else 0.0

    @classmethod
    def uniform(cls, window: ModeWindow, mode: str = SEQUENTIAL) -> "InputSpectrum":
        return cls(window.l_min, np.ones(window.n_l), mode)

    @classmethod
    def spdc_profile(cls, window: ModeWindow, mode: str = SEQUENTIAL) -> "InputSpectrum":
        """Weights proportional to (2/3)^(2|l|), the downconversion pair spectrum."""
        return cls(window.l_min, (2.0 / 3.0) ** (2 * np.abs(window.l_values)), mode)


def _require_sequential(inp: InputSpectrum):
    if inp.mode != SEQUENTIAL:
        raise UnsupportedModeError(
            "broad-simultaneous illumination cannot build a joint spectrum: the reference-arm "
            "label l2 carries no per-shot correlation with the OAM value l1' reaching the object, "
            "so l1' and the object's OAM shift are unknown; use sequential-scan")


def _settings(inp: InputSpectrum, a: OverlapTable, window: ModeWindow, sign: int):
    if sign not in (1, -1):
        raise ConfigError("reference correlation sign must be +1 or -1")
    if window.p_max != 0:
        raise ConfigError("the classical scan detects p = 0 only; use a window with p_max = 0")
    for l2 in window.l_values.tolist():
        l_in = sign * l2
        wgt = inp.weight(l_in)
        if wgt and not a.covers(l_in):
            raise ConfigError(f"overlap table does not cover scanned l1' = {l_in}")
        yield l_in, l2, wgt


def sequential_scan(inp: InputSpectrum, a: OverlapTable, window: ModeWindow | None = None,
                    sign: int = 1) -> JointSpectrum:
    """Joint spectrum P(l1, l2) assembled one illumination setting at a time.

    ``sign`` fixes the reference-arm convention l2 = sign * l1'.
    """
    _require_sequential(inp)
    window = window or ModeWindow()
    ls = window.l_values
    if not all(a.covers(int(l)) for l in ls):
        raise ConfigError("overlap table does not cover the detection window")
    aw = a.window
    P = np.zeros((window.n_l, window.n_l))
    for l_in, l2, wgt in _settings(inp, a, window, sign):
        if wgt == 0:
            continue
        row = a.entries[l_in - aw.l_min, 0, ls - aw.l_min, 0]
        P[:, l2 - window.l_min] = wgt * np.abs(row) ** 2
    return JointSpectrum.from_matrix(P, window.l_min)


def scan_cost(window: ModeWindow) -> int:
    """Number of sequential filter settings needed to cover the window."""
    return window.n_l


def scan_transcript(inp: InputSpectrum, a: OverlapTable, window: ModeWindow | None = None,
                    sign: int = 1) -> str:
    """CSV with one record per illumination setting (unnormalized transmitted power)."""
    _require_sequential(inp)
    window = window or ModeWindow()
    ls = window.l_values
    aw = a.window
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["setting", "l_in", "l2", "weight", "transmitted"])
    for k, (l_in, l2, wgt) in enumerate(_settings(inp, a, window, sign)):
        power = 0.0
        if a.covers(l_in):
            row = a.entries[l_in - aw.l_min, 0, ls - aw.l_min, 0]
            power = float(wgt * np.sum(np.abs(row) ** 2))
        wr.writerow([k, l_in, l2, repr(wgt), repr(power)])
    return buf.getvalue()
