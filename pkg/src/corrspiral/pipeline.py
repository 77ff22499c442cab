"""End-to-end helpers: object -> overlaps -> amplitudes -> spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import ModeWindow
from .objects import Strip, TransmissionMap
from .overlap import DEFAULT_NPHI, DEFAULT_NR, OverlapTable, OverlapWindow, compute_overlaps
from .spdc import DEFAULT_PPRIME_MAX, AmplitudeTable, coupling_table, joint_amplitudes
from .spectra import InfoReport, JointSpectrum, count_peaks, mutual_information, to_spectrum

# Object in the crystal (waist) plane; this is where the strip-width study is run.
WAIST_Z = 0.0


@dataclass(frozen=True)
class EntangledRun:
    overlaps: OverlapTable
    amplitudes: AmplitudeTable
    spectrum: JointSpectrum

    @property
    def info(self) -> InfoReport:
        return mutual_information(self.spectrum)


def overlap_window_for(window: ModeWindow, pprime_max: int) -> OverlapWindow:
    """Smallest symmetric overlap window covering l1 and l' = -l2 for ``window``."""
    lmax = max(abs(window.l_min), abs(window.l_max))
    return OverlapWindow(-lmax, lmax, pprime_max, window.p_max)


def entangled_spectrum(obj: TransmissionMap, window: ModeWindow | None = None, z: float = WAIST_Z,
                       pprime_max: int = DEFAULT_PPRIME_MAX, n_r: int = DEFAULT_NR,
                       n_phi: int = DEFAULT_NPHI, check: bool = True) -> EntangledRun:
    window = window or ModeWindow()
    ow = overlap_window_for(window, pprime_max)
    table = compute_overlaps(obj, z, ow, n_r=n_r, n_phi=n_phi, check=check)
    lmax = max(abs(window.l_min), abs(window.l_max))
    coup = coupling_table(lmax, pprime_max, window.p_max)
    amps = joint_amplitudes(coup, table, window, pprime_max)
    return EntangledRun(table, amps, to_spectrum(amps))


def strip_widths(start: float = 0.1, stop: float = 2.5, step: float = 0.05) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)


def strip_scan(widths=None, window: ModeWindow | None = None, z: float = WAIST_Z,
               pprime_max: int = DEFAULT_PPRIME_MAX, n_r: int = DEFAULT_NR, n_phi: int = DEFAULT_NPHI,
               check: bool = True, orientation: float = 0.0):
    """Mutual information versus opaque strip width.

    Returns a list of dicts with keys ``d``, ``I``, ``S1``, ``mu``, ``peaks``.
    """
    widths = strip_widths() if widths is None else widths
    out = []
    for d in widths:
        run = entangled_spectrum(Strip(float(d), orientation=orientation), window, z,
                                 pprime_max, n_r, n_phi, check)
        info = run.info
        out.append({"d": float(d), "I": info.I, "S1": info.S1, "mu": info.mu,
                    "peaks": count_peaks(run.spectrum)})
    return out
