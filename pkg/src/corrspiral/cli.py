"""Command-line front end.

Each subcommand builds an object, runs one pipeline and writes CSV/JSON/PGM
files into ``--out-dir`` together with the ``run_config.json`` that produced
them.  A short JSON summary goes to stdout.  Exit codes: 0 success, 2 bad
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .classical import BROAD, SEQUENTIAL, InputSpectrum, scan_cost, scan_transcript, sequential_scan
from .compress import (DICTIONARY_GRID, build_dictionary, mutual_coherence, recover_table,
                       relative_error, sparsity_fraction)
from .errors import ConfigError, CorrSpiralError, NumericError
from .interfere import THETAS, add_poisson_noise, retrieve_coefficients, simulate_rates
from .modes import BeamGeometry, ModeWindow
from .objects import parse_object
from .overlap import DEFAULT_NPHI, DEFAULT_NR, DEFAULT_Z, OverlapWindow, compute_overlaps
from .pipeline import WAIST_Z, entangled_spectrum, strip_scan, strip_widths
from .reconstruct import (GridSpec, azimuthal_variance, object_coefficients, render_coherent,
                          render_incoherent, rotational_correlation)
from .spdc import AmplitudeTable
from .spectra import count_peaks, mutual_information

COMMANDS = ("spectrum", "scan", "info", "reconstruct", "interfere", "classical", "compress")

# Default object and object-plane position per subcommand.  The spectrum family
# places the object at the waist; interference retrieval uses the far field.
DEFAULT_OBJECT = {"spectrum": "strip:0.9", "scan": "strip", "info": "strip:0.9",
                  "reconstruct": "square:1.0", "interfere": "square:1.0",
                  "classical": "strip:0.9", "compress": "square:1.0"}
DEFAULT_ZS = {c: WAIST_Z for c in COMMANDS} | {"interfere": DEFAULT_Z}
DEFAULT_LMAX = {c: 10 for c in COMMANDS} | {"reconstruct": 15}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run's outputs."""

    subcommand: str
    object: str
    l_max: int = 10
    p_max: int = 0
    pprime_max: int = 8
    z: float = 0.0
    n_r: int = DEFAULT_NR
    n_phi: int = DEFAULT_NPHI
    seed: int = 0
    out_dir: str = "."
    format: str = "csv"
    offset: tuple = (0.0, 0.0)
    rotate: float = 0.0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in COMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.l_max < 0 or self.p_max < 0 or self.pprime_max < 0:
            raise ConfigError("--lmax, --pmax and --pprime-max must be non-negative")
        if self.n_r < 2 or self.n_phi < 8:
            raise ConfigError("--nr must be >= 2 and --nphi >= 8")
        if not math.isfinite(self.z):
            raise ConfigError("--z must be finite")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {self.format!r}")
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))
        object.__setattr__(self, "options", dict(sorted(self.options.items())))

    @property
    def window(self) -> ModeWindow:
        return ModeWindow(-self.l_max, self.l_max, self.p_max)

    def build_object(self):
        obj = parse_object(self.object, offset=self.offset)
        if self.rotate:
            obj = replace(obj, orientation=obj.orientation + self.rotate)
        return obj

    def to_json(self) -> str:
        d = asdict(self)
        d["offset"] = list(self.offset)
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
            d["offset"] = tuple(d.get("offset", (0.0, 0.0)))
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid run config: {exc}") from exc


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


class _Writer:
    """Collects output files; written in name order after the run succeeds."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: dict[str, bytes] = {}

    def add(self, name: str, payload):
        self.files[name] = payload.encode() if isinstance(payload, str) else bytes(payload)

    def flush(self):
        os.makedirs(self.out_dir, exist_ok=True)
        for name in sorted(self.files):
            with open(os.path.join(self.out_dir, name), "wb") as fh:
                fh.write(self.files[name])
        return sorted(self.files)


def _spectrum_json(s) -> str:
    m = s.matrix()
    return _json({"l_values": s.window.l_values.tolist(), "probabilities": m.tolist()})


def _run(cfg: RunConfig, obj, **kw):
    return entangled_spectrum(obj, cfg.window, cfg.z, cfg.pprime_max, cfg.n_r, cfg.n_phi, **kw)


def cmd_spectrum(cfg: RunConfig, out: _Writer) -> dict:
    run = _run(cfg, cfg.build_object())
    info = run.info
    if cfg.format == "csv":
        out.add("spectrum.csv", run.spectrum.matrix_csv())
    else:
        out.add("spectrum.json", _spectrum_json(run.spectrum))
    out.add("info.json", info.to_json() + "\n")
    return asdict(info) | {"peaks": count_peaks(run.spectrum)}


def cmd_info(cfg: RunConfig, out: _Writer) -> dict:
    info = _run(cfg, cfg.build_object()).info
    out.add("info.json", info.to_json() + "\n")
    return asdict(info)


def cmd_scan(cfg: RunConfig, out: _Writer) -> dict:
    o = cfg.options
    widths = strip_widths(o.get("start", 0.1), o.get("stop", 2.5), o.get("step", 0.05))
    if len(widths) < 1 or widths[0] <= 0 or o.get("step", 0.05) <= 0:
        raise ConfigError("sweep needs 0 < start <= stop and step > 0")
    rows = strip_scan(widths, cfg.window, cfg.z, cfg.pprime_max, cfg.n_r, cfg.n_phi,
                      orientation=cfg.rotate)
    if cfg.format == "csv":
        lines = ["d,I,S1,mu,peaks"] + [f"{r['d']!r},{r['I']!r},{r['S1']!r},{r['mu']!r},{r['peaks']}"
                                       for r in rows]
        out.add("scan.csv", "\n".join(lines) + "\n")
    else:
        out.add("scan.json", _json(rows))
    best = min(rows, key=lambda r: r["I"])
    return {"points": len(rows), "argmin_d": best["d"], "min_I": best["I"]}


def _coefficients(cfg: RunConfig, obj):
    ow = OverlapWindow(-cfg.l_max, cfg.l_max, cfg.p_max, cfg.p_max)
    return compute_overlaps(obj, cfg.z, ow, cfg.n_r, cfg.n_phi)


def cmd_reconstruct(cfg: RunConfig, out: _Writer) -> dict:
    o = cfg.options
    grid = GridSpec(int(o.get("grid_n", 256)), float(o.get("grid_pitch", 4.0 / 256)))
    table = _coefficients(cfg, cfg.build_object())
    if o.get("via_interference"):
        if cfg.p_max != 0:
            raise ConfigError("the interference path retrieves p = 0 coefficients only; use --pmax 0")
        table = retrieve_coefficients(simulate_rates(table, THETAS))
    coeffs = object_coefficients(table)
    g = BeamGeometry(0.0)
    coh = render_coherent(coeffs, g, grid)
    inc = render_incoherent({k: abs(v) ** 2 for k, v in coeffs.items()}, g, grid)
    report = {"coherent_azimuthal_variance": azimuthal_variance(coh),
              "incoherent_azimuthal_variance": azimuthal_variance(inc),
              "coherent_rotational_correlation": {str(n): rotational_correlation(coh, n) for n in (2, 3, 4)},
              "via_interference": bool(o.get("via_interference", False))}
    out.add("coherent.pgm", coh.to_pgm())
    out.add("incoherent.pgm", inc.to_pgm())
    out.add("reconstruct.json", _json(report))
    return report


def cmd_interfere(cfg: RunConfig, out: _Writer) -> dict:
    table = _coefficients(replace(cfg, p_max=0), cfg.build_object())
    rec = simulate_rates(table, THETAS)
    counts = cfg.options.get("counts")
    if counts:
        rec = add_poisson_noise(rec, float(counts), np.random.default_rng(cfg.seed))
    got = retrieve_coefficients(rec, tol=None if counts else 1e-6)
    err = float(np.max(np.abs(got.p0_matrix() - table.p0_matrix())))
    out.add("rates.csv", rec.to_csv())
    out.add("retrieved.csv" if cfg.format == "csv" else "retrieved.json",
            got.to_csv() if cfg.format == "csv" else got.to_json())
    report = {"max_abs_error": err, "counts": counts, "z": cfg.z}
    out.add("interfere.json", _json(report))
    return report


def cmd_classical(cfg: RunConfig, out: _Writer) -> dict:
    o = cfg.options
    if cfg.p_max != 0:
        raise ConfigError("the classical scan detects p = 0 only; use --pmax 0")
    window = cfg.window
    mode = BROAD if o.get("broad") else SEQUENTIAL
    preset = o.get("preset", "uniform")
    if preset == "uniform":
        inp = InputSpectrum.uniform(window, mode)
    elif preset == "spdc":
        inp = InputSpectrum.spdc_profile(window, mode)
    else:
        raise ConfigError(f"unknown preset {preset!r}; use uniform or spdc")
    sign = int(o.get("correlation", 1))
    table = _coefficients(cfg, cfg.build_object())
    spec = sequential_scan(inp, table, window, sign)
    info = mutual_information(spec)
    out.add("classical_spectrum.csv", spec.matrix_csv())
    out.add("transcript.csv", scan_transcript(inp, table, window, sign))
    out.add("info.json", info.to_json() + "\n")
    return asdict(info) | {"scan_cost": scan_cost(window)}


def cmd_compress(cfg: RunConfig, out: _Writer) -> dict:
    o = cfg.options
    run = _run(cfg, cfg.build_object())
    values = run.amplitudes.values
    fraction = float(o.get("fraction", 0.5))
    if not 0 < fraction <= 1:
        raise ConfigError("--fraction must be in (0, 1]")
    est, ms, hist = recover_table(values, fraction, cfg.seed, o.get("k"))
    dictionary = build_dictionary(cfg.window, DICTIONARY_GRID, len(ms.indices))
    report = {"coefficients": int(values.size), "measurements": int(len(ms.indices)),
              "iterations": len(hist) - 1, "relative_error": relative_error(est, values),
              "sparsity_fraction": sparsity_fraction(values), "seed": cfg.seed,
              "dictionary_coherence": mutual_coherence(dictionary)}
    out.add("recovered.csv", AmplitudeTable(cfg.window, est).to_csv())
    out.add("compress.json", _json(report))
    return report


HANDLERS = {"spectrum": cmd_spectrum, "scan": cmd_scan, "info": cmd_info,
            "reconstruct": cmd_reconstruct, "interfere": cmd_interfere,
            "classical": cmd_classical, "compress": cmd_compress}


def _parse_offset(text: str):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"offset must be 'x,y', got {text!r}") from None
    return (x, y)


def _correlation(text: str) -> int:
    if text not in ("+1", "1", "-1"):
        raise argparse.ArgumentTypeError("correlation must be +1 or -1")
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corrspiral", description="Correlated OAM spiral imaging toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--object", default=DEFAULT_OBJECT[name],
                       help="none | strip:d | square:s | disk:R | annulus:a,b | polygon:N,R | "
                            "spokes:N,w | raster:path,pitch (append @angle to rotate)")
        p.add_argument("--lmax", type=int, default=DEFAULT_LMAX[name])
        p.add_argument("--pmax", type=int, default=0)
        p.add_argument("--pprime-max", type=int, default=8)
        p.add_argument("--z", type=float, default=DEFAULT_ZS[name], help="object plane in units of z_R")
        p.add_argument("--nr", type=int, default=DEFAULT_NR)
        p.add_argument("--nphi", type=int, default=DEFAULT_NPHI)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default=".")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--offset", type=_parse_offset, default=(0.0, 0.0), help="object offset 'x,y' in w0")
        p.add_argument("--rotate", type=float, default=0.0, help="extra object rotation in radians")
        p.add_argument("--config", help="load a run_config.json instead of the flags above")
        p.add_argument("--dry-run", action="store_true", help="validate the configuration and exit")
        if name == "scan":
            p.add_argument("--start", type=float, default=0.1)
            p.add_argument("--stop", type=float, default=2.5)
            p.add_argument("--step", type=float, default=0.05)
        if name == "reconstruct":
            p.add_argument("--via-interference", action="store_true")
            p.add_argument("--grid-n", type=int, default=256)
            p.add_argument("--grid-pitch", type=float, default=4.0 / 256)
        if name == "interfere":
            p.add_argument("--counts", type=float, default=None, help="Poisson counts per entry")
        if name == "classical":
            p.add_argument("--preset", choices=("uniform", "spdc"), default="uniform")
            p.add_argument("--correlation", type=_correlation, default=1, help="+1: l2 = l1', -1: l2 = -l1'")
            p.add_argument("--broad", action="store_true", help="broad simultaneous illumination")
        if name == "compress":
            p.add_argument("--fraction", type=float, default=0.5)
            p.add_argument("--k", type=int, default=None)
    return parser


_OPTION_KEYS = {"scan": ("start", "stop", "step"),
                "reconstruct": ("via_interference", "grid_n", "grid_pitch"),
                "interfere": ("counts",), "classical": ("preset", "correlation", "broad"),
                "compress": ("fraction", "k")}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if ns.config:
        try:
            with open(ns.config) as fh:
                cfg = RunConfig.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {ns.config!r}: {exc}") from exc
        if cfg.subcommand != ns.subcommand:
            raise ConfigError(f"config is for {cfg.subcommand!r}, not {ns.subcommand!r}")
        return cfg
    opts = {k: getattr(ns, k) for k in _OPTION_KEYS.get(ns.subcommand, ())}
    return RunConfig(ns.subcommand, ns.object, ns.lmax, ns.pmax, ns.pprime_max, ns.z, ns.nr,
                     ns.nphi, ns.seed, ns.out_dir, ns.format, ns.offset, ns.rotate, opts)


def run(cfg: RunConfig, dry_run: bool = False) -> dict:
    """Validate ``cfg``; unless ``dry_run``, execute it and write its outputs."""
    cfg.window
    if cfg.subcommand != "scan":
        cfg.build_object()
    if dry_run:
        return {"dry_run": True, "config": json.loads(cfg.to_json())}
    out = _Writer(cfg.out_dir)
    summary = HANDLERS[cfg.subcommand](cfg, out)
    out.add("run_config.json", cfg.to_json())
    summary = dict(summary) | {"files": out.flush()}
    return summary


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        summary = run(cfg, ns.dry_run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except CorrSpiralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(_json(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
