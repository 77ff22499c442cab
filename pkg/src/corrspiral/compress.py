"""Compressive recovery of joint OAM amplitude tables.

The sensing model samples a random subset of the angular-position (discrete
Fourier) representation of the amplitude table; the OAM representation is
then recovered with orthogonal matching pursuit.  The Laguerre-Gauss
dictionary and its position-basis coherence quantify how well LG modes and
pixels suit each other as sensing and reconstruction bases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalRankError
from .modes import BeamGeometry, ModeIndex, ModeWindow, eval_mode
from .reconstruct import GridSpec

DICTIONARY_GRID = GridSpec(256, 12.0 / 256)


@dataclass(frozen=True)
class Dictionary:
    """Unit-norm LG atoms as columns of ``atoms`` (pixels x modes)."""

    atoms: np.ndarray = field(repr=False)
    index: tuple
    grid: GridSpec

    @property
    def n_pixels(self):
        return self.atoms.shape[0]


def build_dictionary(modes, grid: GridSpec = DICTIONARY_GRID, n_measurements: int | None = None) -> Dictionary:
    """Sample the given modes (a :class:`ModeWindow` or iterable of (l, p)) at z = 0."""
    if isinstance(modes, ModeWindow):
        modes = modes.modes()
    index = tuple(m if isinstance(m, ModeIndex) else ModeIndex(*m) for m in modes)
    if not index:
        raise ConfigError("dictionary window is empty")
    if n_measurements is not None and grid.n**2 < n_measurements:
        warnings.warn(f"grid has {grid.n ** 2} pixels but {n_measurements} measurements were requested",
                      RuntimeWarning, stacklevel=2)
    x, y = grid.coords()
    r, phi = np.hypot(x, y).ravel(), np.arctan2(y, x).ravel()
    g = BeamGeometry(0.0)
    cols = np.stack([eval_mode(m, g, r, phi) for m in index], axis=1)
    cols /= np.linalg.norm(cols, axis=0)
    cols.setflags(write=False)
    return Dictionary(cols, index, grid)


def mutual_coherence(d: Dictionary) -> float:
    """Largest |<r|lp>| over atoms and pixels (coherence with the position basis)."""
    return float(np.max(np.abs(d.atoms)))


def gram_offdiag(d: Dictionary) -> float:
    """Largest |<atom_i, atom_j>| for i != j."""
    g = np.abs(d.atoms.conj().T @ d.atoms)
    np.fill_diagonal(g, 0.0)
    return float(g.max()) if g.size > 1 else 0.0


def fourier_sensing(shape) -> np.ndarray:
    """Unitary DFT over a table of ``shape`` acting on the row-major flattened vector."""
    mats = [np.fft.fft(np.eye(n)) / math.sqrt(n) for n in shape]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


@dataclass(frozen=True)
class MeasurementSet:
    indices: np.ndarray
    values: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if len(np.unique(idx)) != len(idx):
            raise ConfigError("measurement indices must be unique")


def measure(x, sensing: np.ndarray, count: int, seed: int) -> MeasurementSet:
    """Take ``count`` distinct rows of ``sensing`` chosen with ``seed``."""
    if not 0 < count <= sensing.shape[0]:
        raise ConfigError(f"measurement count must be in [1, {sensing.shape[0]}], got {count}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(sensing.shape[0], size=count, replace=False))
    return MeasurementSet(idx, sensing[idx] @ np.asarray(x, dtype=complex), seed)


def omp_recover(y, sensing, k: int, tol: float = 0.0, return_residuals: bool = False):
    """Orthogonal matching pursuit.

    Each iteration adds the column with the largest normalized correlation to
    the residual and re-solves least squares on the selected support.  Stops
    after ``k`` atoms or once ``|residual| <= tol * |y|``.
    """
    y = np.asarray(y, dtype=complex)
    phi = np.asarray(sensing, dtype=complex)
    m, n = phi.shape
    if k < 1:
        raise ConfigError("sparsity k must be >= 1")
    if m < k:
        raise ConfigError(f"need at least k={k} measurements, got {m}")
    norms = np.linalg.norm(phi, axis=0)
    norms[norms == 0] = np.inf
    x = np.zeros(n, dtype=complex)
    residual = y.copy()
    history = [float(np.linalg.norm(residual))]
    ynorm = history[0]
    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    while len(support) < k and history[-1] > tol * ynorm and history[-1] > 0:
        corr = np.abs(phi.conj().T @ residual) / norms
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = phi[:, support]
        coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        if rank < len(support):
            raise NumericalRankError(f"selected support of size {len(support)} has rank {rank}")
        residual = y - sub @ coef
        history.append(float(np.linalg.norm(residual)))
    x[support] = coef
    return (x, history) if return_residuals else x


def sparsity_fraction(values, rel: float = 0.01) -> float:
    """Fraction of entries whose |v|^2 is at least ``rel`` times the largest."""
    p = np.abs(np.asarray(values)) ** 2
    return float(np.mean(p >= rel * p.max()))


def relative_error(estimate, truth) -> float:
    truth = np.asarray(truth)
    return float(np.linalg.norm(np.asarray(estimate) - truth) / np.linalg.norm(truth))


def recover_table(values, fraction: float = 0.5, seed: int = 0, k: int | None = None, tol: float = 1e-12):
    """Subsample the Fourier representation of ``values`` and recover it with OMP.

    Returns ``(estimate, measurements, residual history)``; ``k`` defaults to
    half the number of measurements.
    """
    values = np.asarray(values, dtype=complex)
    x = values.ravel()
    sensing = fourier_sensing(values.shape)
    count = max(1, int(round(fraction * x.size)))
    ms = measure(x, sensing, count, seed)
    k = k or max(1, count // 2)
    est, hist = omp_recover(ms.values, sensing[ms.indices], k, tol, return_residuals=True)
    return est.reshape(values.shape), ms, hist
