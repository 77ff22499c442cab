"""Modal transfer coefficients of an object.

For every pair of Laguerre-Gauss modes the object imprints an overlap

    a[l', p'; l, p](z) = integral of u_{l'p'}(x, z) conj(u_{lp}(x, z)) T(x) d^2x,

evaluated with both modes at the object plane.  The integral runs on a polar
tensor grid: Gauss-Legendre panels in r (split wherever a ray crosses an edge
of the mask) and the uniform trapezoid rule in phi.  Because the azimuthal
factor of the integrand is exp(-i (l' - l) phi), one FFT over the phi samples
yields every azimuthal harmonic at once.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NonFiniteError, ResolutionError
from .modes import BeamGeometry, radial_profiles
from .objects import TransmissionMap

DEFAULT_Z = 10.0
DEFAULT_NR = 96
DEFAULT_NPHI = 512
R_CUTOFF = 6.0  # radial cutoff in units of w(z)
ZERO_FLOOR = 1e-10
CONVERGENCE_TOL = 1e-6
MAX_PHI_DOUBLINGS = 5
ANG_NODES = 16  # Gauss nodes per angular panel
MAX_BISECTIONS = 40
RADIAL_STEP = 4.0  # allowed crossing shift per angular panel, in w(z)/sqrt(1 + mode order)
GRADE_RATIO = 0.15  # geometric refinement toward tangent rays
GRADE_LEVELS = 12
MIN_PANEL = 1e-9  # smallest angular panel (radians)


@lru_cache(maxsize=32)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class PolarGrid:
    """Quadrature nodes: ``r`` and ``weight`` have shape (n_phi, nodes per ray).

    ``weight`` already includes the Jacobian r dr and the angular step.
    """

    phi: np.ndarray
    r: np.ndarray
    weight: np.ndarray

    @property
    def x(self):
        return self.r * np.cos(self.phi)[:, None]

    @property
    def y(self):
        return self.r * np.sin(self.phi)[:, None]


def angular_nodes(t: TransmissionMap, r_max: float, n_phi: int, radial_scale: float = 1.0):
    """Ray angles and weights ``(phi, w)`` adapted to the object ``t``.

    Without usable angular breaks this is the uniform trapezoid rule.
    Otherwise the circle (or one symmetry sector of it, replicated) is cut at
    the breaks into Gauss-Legendre panels no wider than ``ANG_NODES`` uniform
    steps.  Panels are then bisected until no radial crossing moves by more
    than ``radial_scale`` (scaled by ``DEFAULT_NPHI / n_phi``) across a panel,
    which resolves edges that sweep quickly through the beam, corners and
    tangent rays.
    """
    breaks = t.angular_breaks(r_max)
    fold = t.symmetry_order
    if breaks is None or len(breaks) == 0 or fold == 0:
        return 2 * np.pi * np.arange(n_phi) / n_phi, np.full(n_phi, 2 * np.pi / n_phi)
    sector = 2 * np.pi / fold
    b = np.sort(np.mod(breaks, sector))
    b = b[np.concatenate([[True], np.diff(b) > 1e-12])]
    if len(b) > 1 and b[-1] > sector - 1e-12 + b[0]:
        b = b[:-1]
    ends = np.append(b, b[0] + sector)
    max_width = 2 * np.pi * ANG_NODES / n_phi
    edges = [np.linspace(a, e, max(1, math.ceil((e - a) / max_width)) + 1)[:-1]
             for a, e in zip(ends[:-1], ends[1:])]
    edges = np.append(np.concatenate(edges), ends[-1])
    lo, hi = edges[:-1], edges[1:]
    ds = radial_scale * DEFAULT_NPHI / n_phi
    tangents = np.mod(t.tangent_angles(r_max), sector)
    done_lo, done_hi = [], []
    for _ in range(MAX_BISECTIONS):
        mid = (lo + hi) / 2
        rl, rm, rh = (t.radial_breaks(v, r_max) for v in (lo, mid, hi))
        # crossings that appear or vanish (padded to r_max) sit on a panel end; only moving ones count
        # a circle crossing pair that first appears on a tangent ray is a sqrt edge, not a sweep
        appear_lo = _near(lo, tangents, sector)[:, None] & (rl < r_max) & (rm >= r_max)
        appear_hi = _near(hi, tangents, sector)[:, None] & (rh < r_max) & (rm >= r_max)
        left = np.where(appear_lo, 0.0, np.abs(rm - rl))
        right = np.where(appear_hi, 0.0, np.abs(rh - rm))
        jump = np.maximum(left, right).max(axis=-1, initial=0.0)
        split = (jump > ds) & (hi - lo > MIN_PANEL)
        done_lo.append(lo[~split])
        done_hi.append(hi[~split])
        if not split.any():
            break
        lo, hi = np.concatenate([lo[split], mid[split]]), np.concatenate([mid[split], hi[split]])
    else:
        done_lo.append(lo)
        done_hi.append(hi)
    lo, hi = np.concatenate(done_lo), np.concatenate(done_hi)
    lo, hi = _grade_toward(lo, hi, tangents, sector)
    order = np.argsort(lo)
    lo, hi = lo[order, None], hi[order, None]
    xg, wg = _gauss_legendre(ANG_NODES)
    half = (hi - lo) / 2
    phi = (lo + half * (xg + 1)).ravel()
    w = (half * wg).ravel()
    phi = (phi[None, :] + sector * np.arange(fold)[:, None]).ravel()
    return np.mod(phi, 2 * np.pi), np.tile(w, fold)


def _near(x, points, period, tol=1e-12):
    """Elementwise: is ``x`` within ``tol`` of any of ``points`` modulo ``period``."""
    if len(points) == 0:
        return np.zeros(np.shape(x), dtype=bool)
    d = np.mod(np.asarray(x)[:, None] - points[None, :] + period / 2, period) - period / 2
    return np.any(np.abs(d) < tol, axis=1)


def _grade_toward(lo, hi, points, period):
    """Split panels touching ``points`` (mod ``period``) geometrically toward them."""
    if len(points) == 0:
        return lo, hi
    points = np.concatenate([points, points + period])
    tol = 1e-12
    extra_lo, extra_hi, keep = [], [], np.ones(len(lo), dtype=bool)
    for i, (a, b) in enumerate(zip(lo, hi)):
        at_lo = np.any(np.abs(points - a) < tol)
        at_hi = np.any(np.abs(points - b) < tol)
        if not (at_lo or at_hi):
            continue
        keep[i] = False
        h = (b - a) / (2 if at_lo and at_hi else 1)
        cuts = h * GRADE_RATIO ** np.arange(1, GRADE_LEVELS + 1)
        pts = [a, b]
        if at_lo:
            pts += (a + cuts).tolist()
        if at_hi:
            pts += (b - cuts).tolist()
        if at_lo and at_hi:
            pts.append(a + h)
        pts = np.unique(pts)
        extra_lo.append(pts[:-1])
        extra_hi.append(pts[1:])
    return np.concatenate([lo[keep]] + extra_lo), np.concatenate([hi[keep]] + extra_hi)


def polar_grid(r_max: float, n_r: int, n_phi: int, breaks=None, angles=None) -> PolarGrid:
    """Build quadrature nodes on the disk of radius ``r_max``.

    ``breaks`` is an optional callable ``(phi, r_max) -> (n_phi, k)`` giving
    radial breakpoints per ray; each resulting panel gets ``n_r`` nodes.
    ``angles`` optionally replaces the uniform ``n_phi``-point angular rule
    with explicit ``(phi, weights)``.
    """
    if n_r < 4 or (angles is None and n_phi < 4):
        raise ConfigError(f"need n_r >= 4 and n_phi >= 4, got {n_r}, {n_phi}")
    if not r_max > 0:
        raise ConfigError(f"r_max must be > 0, got {r_max}")
    if angles is None:
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        wphi = np.full(n_phi, 2 * np.pi / n_phi)
    else:
        phi, wphi = (np.asarray(v, dtype=float) for v in angles)
        n_phi = len(phi)
    xg, wg = _gauss_legendre(n_r)
    if breaks is None:
        edges = np.tile([0.0, r_max], (n_phi, 1))
    else:
        b = np.asarray(breaks(phi, r_max), dtype=float).reshape(n_phi, -1)
        zeros = np.zeros((n_phi, 1))
        edges = np.concatenate([zeros, b, np.full((n_phi, 1), r_max)], axis=1)
    # drop trailing panels that are empty on every ray (padding from fewer crossings)
    used = np.flatnonzero(np.any(np.diff(edges, axis=1) > 0, axis=0))
    edges = edges[:, :(used[-1] + 2 if len(used) else 2)]
    lo, hi = edges[:, :-1, None], edges[:, 1:, None]
    half = (hi - lo) / 2
    r = (lo + half * (xg + 1)).reshape(n_phi, -1)
    w = (half * wg).reshape(n_phi, -1) * r * wphi[:, None]
    return PolarGrid(phi, r, w)


def _check_finite(values, grid: PolarGrid):
    bad = ~np.isfinite(values)
    if bad.any():
        j, k = np.argwhere(bad)[0]
        raise NonFiniteError(f"non-finite integrand at r={grid.r[j, k]:.6g}, phi={grid.phi[j]:.6g}")


def integrate_polar(f, r_max: float, n_r: int = DEFAULT_NR, n_phi: int = DEFAULT_NPHI, breaks=None) -> complex:
    """Integrate ``f(r, phi)`` over the disk of radius ``r_max`` (area element r dr dphi).

    Gauss-Legendre in r, trapezoid in phi; the latter is exact for
    trigonometric polynomials of degree below ``n_phi``.
    """
    grid = polar_grid(r_max, n_r, n_phi, breaks)
    phi = np.broadcast_to(grid.phi[:, None], grid.r.shape)
    vals = np.asarray(f(grid.r, phi), dtype=complex)
    vals = np.broadcast_to(vals, grid.r.shape)
    _check_finite(vals, grid)
    return complex(np.sum(vals * grid.weight))


@dataclass(frozen=True)
class OverlapWindow:
    """Index ranges: l', l in [l_min, l_max]; p' in [0, pp_max]; p in [0, p_max]."""

    l_min: int = -10
    l_max: int = 10
    pp_max: int = 8
    p_max: int = 0

    def __post_init__(self):
        if self.l_min > self.l_max:
            raise ConfigError(f"empty l range [{self.l_min}, {self.l_max}]")
        if self.pp_max < 0 or self.p_max < 0:
            raise ConfigError("radial index ranges must be non-negative")

    @property
    def l_values(self):
        return np.arange(self.l_min, self.l_max + 1)

    @property
    def shape(self):
        n = self.l_max - self.l_min + 1
        return (n, self.pp_max + 1, n, self.p_max + 1)


@dataclass(frozen=True)
class OverlapTable:
    """Complex coefficients ``entries[l' - l_min, p', l - l_min, p]`` at distance ``z``."""

    z: float
    window: OverlapWindow
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        if arr.shape != self.window.shape:
            raise ConfigError(f"entries shape {arr.shape} does not match window {self.window.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def covers(self, l: int) -> bool:
        return self.window.l_min <= l <= self.window.l_max

    def get(self, lp: int, pp: int, l: int, p: int) -> complex:
        w = self.window
        if not (self.covers(lp) and self.covers(l) and 0 <= pp <= w.pp_max and 0 <= p <= w.p_max):
            raise ConfigError(f"index ({lp}, {pp}, {l}, {p}) outside overlap window")
        return complex(self.entries[lp - w.l_min, pp, l - w.l_min, p])

    def p0_matrix(self) -> np.ndarray:
        """``m[l' - l_min, l - l_min] = a[l', 0; l, 0]``."""
        return np.array(self.entries[:, 0, :, 0])

    def rows(self):
        w = self.window
        for i, lp in enumerate(w.l_values.tolist()):
            for pp in range(w.pp_max + 1):
                for k, l in enumerate(w.l_values.tolist()):
                    for p in range(w.p_max + 1):
                        v = self.entries[i, pp, k, p]
                        yield lp, pp, l, p, float(v.real), float(v.imag)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["l_prime", "p_prime", "l", "p", "re", "im"])
        for lp, pp, l, p, re, im in self.rows():
            wr.writerow([lp, pp, l, p, repr(re), repr(im)])
        return buf.getvalue()

    def to_json(self) -> str:
        w = self.window
        doc = {
            "z": self.z,
            "window": {"l_min": w.l_min, "l_max": w.l_max, "pp_max": w.pp_max, "p_max": w.p_max},
            "entries": [list(row) for row in self.rows()],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_csv(cls, text: str, z: float) -> "OverlapTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ConfigError("empty overlap CSV")
        ls = [int(r["l"]) for r in rows] + [int(r["l_prime"]) for r in rows]
        win = OverlapWindow(min(ls), max(ls), max(int(r["p_prime"]) for r in rows),
                            max(int(r["p"]) for r in rows))
        arr = np.full(win.shape, np.nan, dtype=complex)
        for r in rows:
            arr[int(r["l_prime"]) - win.l_min, int(r["p_prime"]),
                int(r["l"]) - win.l_min, int(r["p"])] = complex(float(r["re"]), float(r["im"]))
        if np.isnan(arr.real).any():
            raise ConfigError("overlap CSV does not cover its window completely")
        return cls(z, win, arr)


def _overlaps_at(t: TransmissionMap, g: BeamGeometry, window: OverlapWindow, n_r: int, n_phi: int):
    r_max = R_CUTOFF * g.width
    ls = window.l_values
    top_order = 2 * max(window.pp_max, window.p_max) + int(np.max(np.abs(ls)))
    phi_all, wphi_all = angular_nodes(t, r_max, n_phi, RADIAL_STEP * g.width / math.sqrt(1 + top_order))
    n_rays = len(phi_all)

    abs_l = sorted(set(np.abs(ls).tolist()))
    n_al, npp, npr = len(abs_l), window.pp_max + 1, window.p_max + 1
    pmax = max(npp, npr) - 1
    span = int(ls[-1] - ls[0])
    harmonics = np.arange(-span, span + 1)
    # harm[m, a, b] = sum_j exp(-i m phi_j) sum_k left[a](r_jk) wt[j, k] right[b](r_jk)
    harm = np.zeros((len(harmonics), n_al * npp * n_al * npr), dtype=complex)
    n_max = n_r * (1 + np.asarray(t.radial_breaks(phi_all[:1], r_max)).size)
    step = max(1, int(4e6 // (n_al * (pmax + 1) * n_max)))
    for j0 in range(0, n_rays, step):
        sl = slice(j0, j0 + step)
        grid = polar_grid(r_max, n_r, n_phi, t.radial_breaks, (phi_all[sl], wphi_all[sl]))
        n_nodes = grid.r.shape[1]
        tval = np.asarray(t.sample(grid.x, grid.y), dtype=complex)
        _check_finite(tval, grid)
        w = (grid.weight * tval)[:, :, None]
        rr = grid.r
        prof = np.stack([radial_profiles(al, pmax, g, rr) for al in abs_l])  # (al, p, j, k)
        left = np.transpose(prof[:, :npp], (2, 0, 1, 3)).reshape(len(rr), n_al * npp, n_nodes)
        right = np.transpose(prof[:, :npr], (2, 3, 0, 1)).reshape(len(rr), n_nodes, n_al * npr)
        gmat = np.matmul(left, right * w.real) + 1j * np.matmul(left, right * w.imag)
        phase = np.exp(-1j * np.outer(harmonics, grid.phi))
        harm += phase @ gmat.reshape(len(rr), -1)
    harm = harm.reshape(len(harmonics), n_al, npp, n_al, npr)

    pos = {al: i for i, al in enumerate(abs_l)}
    ia = np.array([pos[abs(v)] for v in ls.tolist()])
    dl = ls[:, None] - ls[None, :] + span
    # out[l', p', l, p]
    out = harm[dl[:, None, :, None], ia[:, None, None, None], np.arange(npp)[None, :, None, None],
               ia[None, None, :, None], np.arange(npr)[None, None, None, :]]
    order_p = 2 * np.arange(npp)[None, :, None, None] + np.abs(ls)[:, None, None, None]
    order = 2 * np.arange(npr)[None, None, None, :] + np.abs(ls)[None, None, :, None]
    return out * np.exp(1j * (order_p - order) * g.gouy)


def compute_overlaps(t: TransmissionMap, z: float = DEFAULT_Z, window: OverlapWindow | None = None,
                     n_r: int = DEFAULT_NR, n_phi: int = DEFAULT_NPHI, check: bool = True) -> OverlapTable:
    """Tabulate the object's transfer coefficients over ``window``.

    ``n_phi`` is rounded up to a multiple of the object's fold order so the
    angular grid shares its symmetry.  With ``check`` the radial resolution
    is doubled once and the angular resolution is doubled until the table
    changes by at most ``CONVERGENCE_TOL`` (at most ``MAX_PHI_DOUBLINGS``
    times); failure raises :class:`ResolutionError`.  The finest table is
    returned.  Entries below ``ZERO_FLOOR`` in modulus are stored as exact
    zeros.
    """
    window = window or OverlapWindow()
    g = BeamGeometry(z)
    fold = t.symmetry_order
    if fold > 1:
        n_phi = -(-n_phi // fold) * fold
    vals = _overlaps_at(t, g, window, n_r, n_phi)
    if check:
        fine = _overlaps_at(t, g, window, 2 * n_r, n_phi)
        delta = float(np.max(np.abs(fine - vals)))
        if delta > CONVERGENCE_TOL:
            raise ResolutionError(
                f"overlap quadrature not converged: doubling n_r={n_r} changed an entry by {delta:.3g}")
        vals, n_r = fine, 2 * n_r
        # with continuous symmetry the uniform angular rule is already exact
        if t.symmetry_order != 0:
            for _ in range(MAX_PHI_DOUBLINGS):
                fine = _overlaps_at(t, g, window, n_r, 2 * n_phi)
                delta = float(np.max(np.abs(fine - vals)))
                vals, n_phi = fine, 2 * n_phi
                if delta <= CONVERGENCE_TOL:
                    break
            else:
                raise ResolutionError(f"overlap quadrature not converged in phi: n_phi={n_phi} "
                                      f"still changed an entry by {delta:.3g}")
    vals = np.where(np.abs(vals) < ZERO_FLOOR, 0.0, vals)
    return OverlapTable(float(z), window, vals)
