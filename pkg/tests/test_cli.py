import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import trapezoid

from isospec.cli import FAMILY_HEADER, run


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_family_csv(tmp_path):
    out = tmp_path / "fam.csv"
    assert run(["family", "--preset", "harmonic", "--gamma", "-4,-3,-2,2,3,4", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == FAMILY_HEADER
    assert len(rows) == 1 + 6 * 2001
    # gamma-major ordering
    gammas = [float(r[3]) for r in rows[1:]]
    assert gammas[:2001] == [-4.0] * 2001 and gammas[-1] == 4.0
    # 12 significant digits at most
    assert all(len(v.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) <= 12 for v in rows[500])
    block = np.array([[float(v) for v in r] for r in rows[1 + 5 * 2001:]])
    x, psi_sq = block[:, 0], block[:, 6]
    assert trapezoid(psi_sq, x) == pytest.approx(1.0, abs=1e-4)
    mid = np.argmin(np.abs(x))
    assert block[mid, 4] == pytest.approx(-0.875, abs=1e-12)


def test_family_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["family", "--preset", "quartic", "--gamma", "-49,-37,-28.33,-26"]
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_custom_matches_preset(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["family", "--F", "sqrt(u)", "--f", "x^2+1", "--gamma", "-5", "--out", str(a)]) == 0
    assert run(["family", "--preset", "case1a", "--gamma", "-5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_regular_range_json(tmp_path):
    out = tmp_path / "r.json"
    assert run(["regular-range", "--preset", "quartic", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["preset"] == "quartic"
    right = [g for g in data["gamma_s"] if g["side"] == "right"][0]
    assert right["tail"] == "finite" and abs(right["value"] + 19.3694) <= 1e-2
    left = [g for g in data["gamma_s"] if g["side"] == "left"][0]
    assert left == {"value": None, "side": "left", "tail": "divergent"}
    assert data["regular_intervals"][0][0] is None


def test_exit_codes(capsys):
    assert run(["family", "--preset", "harmonic", "--gamma", "0.3"]) == 2
    err = capsys.readouterr().err
    assert "gamma=0.3" in err and "x=" in err
    assert run(["family", "--preset", "harmonic"]) == 1
    assert run(["family"]) == 1
    assert run(["family", "--preset", "nope", "--gamma", "1"]) == 1
    assert run(["family", "--preset", "harmonic", "--F", "u", "--f", "x", "--gamma", "1"]) == 1
    assert run(["family", "--F", "sqrt(u)", "--gamma", "1"]) == 1
    assert run(["family", "--preset", "harmonic", "--gamma", "a,b"]) == 1
    assert run(["bogus"]) == 1
    assert run(["family", "--F", "sqrt(u", "--f", "x", "--gamma", "1"]) == 2
    assert run(["regular-range", "--preset", "harmonic", "--format", "csv"]) == 1
    assert run(["family", "--preset", "harmonic", "--gamma", "1", "--xmin", "1"]) == 1


def test_allow_singular(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["family", "--preset", "constant", "--gamma", "1", "--allow-singular",
                "--out", str(out)]) == 0
    rows = read_csv(out)[1:]
    assert all(r[6] == "nan" for r in rows)
    assert any(float(r[4]) > 1e3 for r in rows if r[4] != "nan")


def test_partners_and_gamma_star(tmp_path):
    out = tmp_path / "p.csv"
    assert run(["partners", "--preset", "harmonic", "--n", "13", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["x", "phi_p", "V1", "V2", "mu", "Gamma"]
    assert len(rows) == 14
    out = tmp_path / "g.csv"
    assert run(["gamma-star", "--preset", "harmonic", "--n", "13", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["x", "gamma_star"]
    assert rows[7][1] == "nan"  # phi_p(0) = 0


def test_zeromode_reports_normalized_seed_constant(tmp_path):
    out = tmp_path / "z.csv"
    assert run(["zeromode", "--preset", "harmonic", "--gamma", "4", "--n", "11", "--out", str(out)]) == 0
    rows = read_csv(out)
    g_a, n_a = float(rows[1][4]), float(rows[1][5])
    assert n_a == pytest.approx(np.sqrt(g_a * (g_a + 1)), rel=1e-11)


def test_peaks_gamma_c_spectrum(tmp_path):
    out = tmp_path / "gc.json"
    assert run(["gamma-c", "--preset", "quartic", "--gamma", "-49,-20", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert abs(data["gamma_c"] + 28.33) <= 0.5
    assert run(["gamma-c", "--preset", "quartic", "--gamma", "-49"]) == 1
    out = tmp_path / "pk.json"
    assert run(["peaks", "--preset", "quartic", "--gamma", "-26", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["members"][0]["peaks"]) == 2
    out = tmp_path / "sp.json"
    assert run(["spectrum", "--preset", "harmonic", "--gamma", "4", "--xmin", "-8", "--xmax", "8",
                "--k", "3", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())["reports"][0]
    assert max(rep["family"]["pairwise_diffs"]) < 1e-2


def test_list_presets(capsys):
    assert run(["list-presets"]) == 0
    text = capsys.readouterr().out
    for name in ("case1a", "harmonic", "fresnel", "quartic", "constant"):
        assert name in text
    assert "0.886227" in text and "-1/(2c)" in text
    assert run(["list-presets", "--format", "json"]) == 0
    items = json.loads(capsys.readouterr().out)
    assert {i["name"] for i in items} == {"case1a", "harmonic", "fresnel", "quartic", "constant"}


def test_constant_c_flag(tmp_path):
    out = tmp_path / "c.json"
    assert run(["regular-range", "--preset", "constant", "--c", "2", "--out", str(out)]) == 0
    right = [g for g in json.loads(out.read_text())["gamma_s"] if g["side"] == "right"][0]
    assert right["value"] == pytest.approx(-0.25, abs=1e-9)
    assert run(["regular-range", "--preset", "harmonic", "--c", "2"]) == 1


def test_verify_single_preset(capsys):
    assert run(["verify", "--preset", "harmonic"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "isospec.cli", "list-presets"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "quartic" in proc.stdout
