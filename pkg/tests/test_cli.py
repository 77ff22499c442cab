import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from corrspiral.cli import RunConfig, main
from corrspiral.errors import ConfigError
from corrspiral.objects import parse_pgm


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 and out.out else None), out.err


def _matrix(path):
    rows = list(csv.reader(open(path)))
    ls = [int(v) for v in rows[0][1:]]
    return ls, np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def test_spectrum_strip(tmp_path, capsys):
    code, summary, _ = _run(capsys, "spectrum", "--object", "strip:0.9", "--out-dir", str(tmp_path))
    assert code == 0
    assert set(summary["files"]) == {"info.json", "run_config.json", "spectrum.csv"}
    ls, m = _matrix(tmp_path / "spectrum.csv")
    odd = (np.add.outer(ls, ls) % 2) == 1
    assert np.max(m[odd]) < 1e-10
    info = json.loads((tmp_path / "info.json").read_text())
    assert info["mu"] > 0.1


def test_spectrum_none_antidiagonal(tmp_path, capsys):
    code, _, _ = _run(capsys, "spectrum", "--object", "none", "--out-dir", str(tmp_path))
    assert code == 0
    ls, m = _matrix(tmp_path / "spectrum.csv")
    off = np.add.outer(ls, ls) != 0
    assert m[off].max() < 1e-12
    assert m.sum() == pytest.approx(1.0, abs=1e-12)


def test_spectrum_disk_mu(tmp_path, capsys):
    code, summary, _ = _run(capsys, "info", "--object", "disk:0.5", "--out-dir", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "info.json").read_text())["mu"] < 1e-9


def test_spectrum_json_format(tmp_path, capsys):
    code, _, _ = _run(capsys, "spectrum", "--object", "disk:0.5", "--lmax", "3", "--format", "json",
                      "--out-dir", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "spectrum.json").read_text())
    assert doc["l_values"] == [-3, -2, -1, 0, 1, 2, 3]


def test_scan_short(tmp_path, capsys):
    code, summary, _ = _run(capsys, "scan", "--start", "0.5", "--stop", "1.5", "--step", "0.5",
                            "--out-dir", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "scan.csv")))
    assert [float(r["d"]) for r in rows] == [0.5, 1.0, 1.5]
    assert list(rows[0]) == ["d", "I", "S1", "mu", "peaks"]
    I = [float(r["I"]) for r in rows]
    assert I[1] < I[0] and I[1] < I[2]


def test_reconstruct_square(tmp_path, capsys):
    code, summary, _ = _run(capsys, "reconstruct", "--out-dir", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "reconstruct.json").read_text())
    assert rep["incoherent_azimuthal_variance"] < 1e-6
    assert rep["coherent_azimuthal_variance"] > 100 * rep["incoherent_azimuthal_variance"]
    img = parse_pgm((tmp_path / "coherent.pgm").read_bytes())
    assert img.shape == (256, 256) and img.max() == 255


def test_reconstruct_via_interference(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(capsys, "reconstruct", "--lmax", "10", "--grid-n", "64", "--out-dir", str(a))[0] == 0
    assert _run(capsys, "reconstruct", "--lmax", "10", "--grid-n", "64", "--via-interference",
                "--out-dir", str(b))[0] == 0
    ia = parse_pgm((a / "coherent.pgm").read_bytes()).astype(int)
    ib = parse_pgm((b / "coherent.pgm").read_bytes()).astype(int)
    assert np.max(np.abs(ia - ib)) <= 1
    ra = json.loads((a / "reconstruct.json").read_text())
    rb = json.loads((b / "reconstruct.json").read_text())
    assert rb["coherent_azimuthal_variance"] == pytest.approx(ra["coherent_azimuthal_variance"], rel=1e-6)


def test_interfere(tmp_path, capsys):
    code, summary, _ = _run(capsys, "interfere", "--lmax", "5", "--out-dir", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "interfere.json").read_text())["max_abs_error"] < 1e-9
    assert (tmp_path / "rates.csv").read_text().startswith("l1,l2,theta,R_plus,R_minus\n")


def test_classical(tmp_path, capsys):
    code, summary, _ = _run(capsys, "classical", "--preset", "spdc", "--correlation", "-1",
                            "--out-dir", str(tmp_path))
    assert code == 0
    assert summary["scan_cost"] == 21
    code, _, err = _run(capsys, "classical", "--broad", "--out-dir", str(tmp_path / "x"))
    assert code == 2 and "per-shot correlation" in err
    assert not (tmp_path / "x").exists()


def test_compress(tmp_path, capsys):
    code, summary, _ = _run(capsys, "compress", "--out-dir", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "compress.json").read_text())
    assert rep["measurements"] < rep["coefficients"]
    assert rep["relative_error"] < 1e-3


def test_dry_run_writes_nothing(tmp_path, capsys):
    for cmd in ("spectrum", "scan", "info", "reconstruct", "interfere", "classical", "compress"):
        out = tmp_path / cmd
        code, summary, _ = _run(capsys, cmd, "--dry-run", "--out-dir", str(out))
        assert code == 0 and summary["dry_run"] is True
        assert not out.exists()


def test_exit_codes(tmp_path, capsys):
    assert _run(capsys, "spectrum", "--object", "bogus:1", "--dry-run")[0] == 2
    assert _run(capsys, "spectrum", "--lmax", "-1", "--dry-run")[0] == 2
    assert _run(capsys, "spectrum", "--object", "square:20", "--out-dir", str(tmp_path))[0] == 3
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--format", "xml"])
    assert exc.value.code == 2


def test_runconfig_roundtrip():
    cfg = RunConfig("scan", "strip", z=0.5, offset=(0.1, -0.2), options={"step": 0.1, "start": 0.2})
    text = cfg.to_json()
    assert RunConfig.from_json(text) == cfg
    assert RunConfig.from_json(text).to_json() == text
    with pytest.raises(ConfigError):
        RunConfig.from_json('{"subcommand": "spectrum"}')
    with pytest.raises(ConfigError):
        RunConfig("nope", "none")


def test_config_reload_reproduces(tmp_path, capsys):
    a = tmp_path / "a"
    assert _run(capsys, "spectrum", "--object", "annulus:0.2,0.6", "--lmax", "4", "--out-dir", str(a))[0] == 0
    assert _run(capsys, "spectrum", "--config", str(a / "run_config.json"))[0] == 0
    assert _run(capsys, "info", "--config", str(a / "run_config.json"))[0] == 2


def test_byte_identical_reruns(tmp_path, capsys):
    out = tmp_path / "o"
    args = ("compress", "--object", "strip:0.9", "--seed", "7", "--out-dir", str(out))
    assert _run(capsys, *args)[0] == 0
    first = {f: (out / f).read_bytes() for f in os.listdir(out)}
    assert _run(capsys, *args)[0] == 0
    assert {f: (out / f).read_bytes() for f in os.listdir(out)} == first


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "corrspiral", "info", "--object", "disk:0.5", "--dry-run"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["dry_run"] is True
