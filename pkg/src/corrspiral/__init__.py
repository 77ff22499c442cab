"""Correlated spiral imaging: joint OAM spectra of photon pairs probing an object.

Modules: ``modes`` (Laguerre-Gauss beams), ``objects`` (transmission masks),
``overlap`` (modal transfer coefficients), ``spdc`` (pair amplitudes),
``spectra`` (joint spectra and mutual information), ``interfere`` (phase
retrieval), ``reconstruct`` (images), ``classical`` (sequential-scan variant),
``compress`` (sparse recovery) and ``cli``.
"""

from .errors import ConfigError, CorrSpiralError, NumericError
from .modes import BeamGeometry, ModeIndex, ModeWindow, eval_mode
from .objects import Annulus, Clear, Disk, Polygon, Raster, Spokes, Square, Strip, parse_object
from .overlap import OverlapTable, OverlapWindow, compute_overlaps
from .pipeline import entangled_spectrum, strip_scan
from .spectra import JointSpectrum, mutual_information

__version__ = "0.1.0"
