"""Joint OAM spectra and their information-theoretic diagnostics.

All entropies use base-2 logarithms, and 0 log 0 is taken as 0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, NoTransmissionError
from .modes import ModeWindow
from .spdc import AmplitudeTable

SUM_TOL = 1e-12


@dataclass(frozen=True)
class JointSpectrum:
    """Probabilities ``probs[l1, p1, l2, p2]`` over a :class:`ModeWindow`.

    The first index pair is the signal (object) arm, the second the idler.
    """

    window: ModeWindow
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        w = self.window
        if arr.shape != (w.n_l, w.n_p, w.n_l, w.n_p):
            raise ConfigError(f"probability array shape {arr.shape} does not match window")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ConfigError("probabilities must be finite and non-negative")
        total = arr.sum()
        if total == 0:
            raise NoTransmissionError("spectrum carries no probability")
        if abs(total - 1.0) > SUM_TOL:
            raise ConfigError(f"probabilities sum to {total!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @classmethod
    def from_matrix(cls, matrix, l_min: int | None = None) -> "JointSpectrum":
        """Normalize a (possibly unnormalized) p = 0 matrix ``m[l1, l2]`` into a spectrum."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("matrix must be square")
        n = m.shape[0]
        if l_min is None:
            l_min = -(n // 2)
        total = m.sum()
        if total <= 0:
            raise NoTransmissionError("spectrum carries no probability")
        w = ModeWindow(l_min, l_min + n - 1, 0)
        return cls(w, (m / total)[:, None, :, None])

    def matrix(self, p1: int = 0, p2: int = 0) -> np.ndarray:
        """The ``P[l1, l2]`` slice at fixed radial indices."""
        return np.array(self.probs[:, p1, :, p2])

    def matrix_csv(self, p1: int = 0, p2: int = 0) -> str:
        """CSV heat map: header row of l2 values, one row per l1."""
        ls = self.window.l_values.tolist()
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["l1\\l2"] + ls)
        for l1, row in zip(ls, self.matrix(p1, p2)):
            wr.writerow([l1] + [repr(float(v)) for v in row])
        return buf.getvalue()


def to_spectrum(a: AmplitudeTable) -> JointSpectrum:
    probs = np.abs(a.values) ** 2
    total = probs.sum()
    if total == 0:
        raise NoTransmissionError("no transmitted amplitude inside the detection window")
    # re-normalize away rounding drift so the sum is 1 to machine precision
    return JointSpectrum(a.window, probs / total)


def marginals(s: JointSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Signal distribution over (l1, p1) and idler distribution over (l2, p2)."""
    return s.probs.sum(axis=(2, 3)), s.probs.sum(axis=(0, 1))


def bucket_marginal(s: JointSpectrum) -> np.ndarray:
    """Idler distribution with the signal arm summed out (a bucket detector on the object arm)."""
    return s.probs.sum(axis=(0, 1))


def entropy(dist) -> float:
    """Shannon entropy in bits."""
    q = np.asarray(dist, dtype=float).ravel()
    q = q[q > 0]
    return float(-np.sum(q * np.log2(q)))


@dataclass(frozen=True)
class InfoReport:
    """Mutual information ``I``, arm entropies ``S1``/``S2`` and ``mu = |I - S1|``, in bits."""

    I: float
    S1: float
    S2: float
    mu: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def mutual_information(s: JointSpectrum) -> InfoReport:
    pj = s.probs.reshape(s.window.n_l * s.window.n_p, -1)
    f, g = pj.sum(axis=1), pj.sum(axis=0)
    nz = pj > 0
    ratio = pj[nz] / np.outer(f, g)[nz]
    info = float(np.sum(pj[nz] * np.log2(ratio)))
    # clip tiny negative rounding; I is non-negative by Gibbs' inequality
    info = max(info, 0.0)
    s1, s2 = entropy(f), entropy(g)
    return InfoReport(info, s1, s2, abs(info - s1))


def anti_diagonal_mass(s: JointSpectrum) -> float:
    """Probability on l1 = -l2 (the no-object support), summed over radial indices."""
    w = s.window
    total = 0.0
    for i, l1 in enumerate(w.l_values.tolist()):
        if w.l_min <= -l1 <= w.l_max:
            total += float(s.probs[i, :, w.l_index(-l1), :].sum())
    return total


def parity_mass(s: JointSpectrum, modulus: int = 2) -> float:
    """Probability on entries with (l1 + l2) not divisible by ``modulus``."""
    ls = s.window.l_values
    mask = ((ls[:, None] + ls[None, :]) % modulus) != 0
    return float(s.probs.sum(axis=(1, 3))[mask].sum())


def count_peaks(s: JointSpectrum, rel_height: float = 0.1) -> int:
    """Count local maxima of the p = 0 spectrum on the (l1, l2) grid.

    A cell is a peak when it is >= all eight neighbours, strictly above at
    least one, and at least ``rel_height`` times the global maximum.  The
    height floor discards the low ripple of the spectral tails.
    """
    m = s.matrix()
    padded = np.pad(m, 1, constant_values=-np.inf)
    n = m.shape[0]
    neigh = np.stack([padded[1 + di:1 + di + n, 1 + dj:1 + dj + m.shape[1]]
                      for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj])
    is_max = (m >= neigh.max(axis=0)) & (m > neigh.min(axis=0))
    return int(np.sum(is_max & (m >= rel_height * m.max())))


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ConfigError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())
