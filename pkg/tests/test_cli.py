import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from inversive_flow import InversiveError
from inversive_flow import csvio, svg
from inversive_flow.cli import main
from inversive_flow.config import Settings, load_config, parse_config_text, parse_overrides
from inversive_flow.flow import constant_state, noisy_state

RUN_FAST = ["--n-grid", "32", "--t-end", "0.05", "--max_mode", "4", "--amplitude", "0.2"]


# ------------------------------------------------------------------ config


def test_config_sections_and_types(tmp_path):
    text = "rtol = 1e-9\n[grid]\nn-grid = 0x40\n[run]\nscheme = erk\nsvg = yes\na = 0.1, 0.2\n"
    flat = parse_config_text(text)
    assert flat == {"rtol": "1e-9", "n_grid": "0x40", "scheme": "erk", "svg": "yes", "a": "0.1, 0.2"}
    cfg = Settings(flat)
    assert cfg.float("rtol") == 1e-9 and cfg.int("n_grid") == 64
    assert cfg.bool("svg") is True and cfg.floats("a") == [0.1, 0.2]
    assert cfg.float("missing", 2.5) == 2.5
    assert cfg.unused() == ["scheme"]
    with pytest.raises(InversiveError) as exc:
        Settings({"x": "abc"}).float("x")
    assert exc.value.code == "CONFIG"
    path = tmp_path / "c.ini"
    path.write_text(text)
    assert load_config(path) == flat
    with pytest.raises(InversiveError) as exc:
        load_config(tmp_path / "nope.ini")
    assert exc.value.code == "FILE_NOT_FOUND"


def test_config_rejects_duplicates_and_garbage():
    with pytest.raises(InversiveError):
        parse_config_text("[a]\nx = 1\n[b]\nx = 2\n")
    with pytest.raises(InversiveError):
        parse_config_text("this line has no equals sign\n")


def test_parse_overrides():
    assert parse_overrides(["--rtol", "1e-9", "--scheme=ERK", "--max-mode", "3"]) == {
        "rtol": "1e-9", "scheme": "ERK", "max_mode": "3"}
    for bad in (["stray"], ["--flag"], ["--"]):
        with pytest.raises(InversiveError):
            parse_overrides(bad)


# ------------------------------------------------------------------- files


def test_csv_round_trips(tmp_path):
    u = np.linspace(0, 1, 7)
    z = np.exp(1j * u) * 1.1
    csvio.write_curve(tmp_path / "c.csv", u, z)
    u2, z2 = csvio.read_curve(tmp_path / "c.csv")
    assert np.array_equal(u, u2) and np.array_equal(z, z2)
    states = [noisy_state(0.375, 4.0, N=16, amplitude=0.1, max_mode=3, seed=1),
              constant_state(0.2, 3.0, 16)]
    csvio.write_snapshots(tmp_path / "s.csv", states)
    back = csvio.read_snapshots(tmp_path / "s.csv")
    assert len(back) == 1  # both states have t = 0, so they share one time block
    object.__setattr__(states[1], "t", 1.0)
    csvio.write_snapshots(tmp_path / "s.csv", states)
    back = csvio.read_snapshots(tmp_path / "s.csv")
    assert [b.t for b in back] == [0.0, 1.0]
    assert np.array_equal(back[0].Q, states[0].Q) and np.array_equal(back[1].rho, states[1].rho)


def test_csv_errors(tmp_path):
    with pytest.raises(InversiveError) as exc:
        csvio.read_curve(tmp_path / "missing.csv")
    assert exc.value.code == "FILE_NOT_FOUND"
    bad = tmp_path / "bad.csv"
    bad.write_text("u,re,im\n0,1,2\n0,1\n")
    with pytest.raises(InversiveError) as exc:
        csvio.read_curve(bad)
    assert exc.value.code == "BAD_CSV"
    bad.write_text("u,re,im\n0,1,x\n")
    with pytest.raises(InversiveError) as exc:
        csvio.read_curve(bad)
    assert exc.value.code == "BAD_CSV"


def test_svg_is_well_formed():
    t = np.linspace(0, 1, 50)
    for text in (svg.line_plot([(t, np.exp(-t), "a"), (t, np.exp(-2 * t), "b")], "x", logy=True),
                 svg.curve_plot([(np.exp((0.1 + 1j) * 6 * t), "spiral")], "s", marks=[np.array([1.0])]),
                 svg.sphere_plot([(np.exp((0.1 + 1j) * 20 * t), "a"), (2 * np.exp(1j * 6 * t), "b")])):
        root = ET.fromstring(text)
        assert root.tag.endswith("svg")
        assert len(root.findall(".//{http://www.w3.org/2000/svg}polyline")) >= 1


def test_inverse_stereographic_on_sphere():
    z = np.array([0, 1, 1j, 10 + 3j])
    x, y, h = svg.inverse_stereographic(z)
    assert np.allclose(x**2 + y**2 + h**2, 1.0)
    assert h[0] == -1.0 and abs(h[1]) < 1e-15


# ---------------------------------------------------------------- commands


def test_run_writes_outputs_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--out", str(a), "--seed", "7", "--svg", *RUN_FAST]) == 0
    assert main(["run", "--out", str(b), "--seed", "7", *RUN_FAST]) == 0
    for name in ("snapshots.csv", "summary.csv", "report.txt"):
        assert (a / name).exists()
    for name in ("length.svg", "normQ.svg", "normQs.svg"):
        ET.parse(a / name)
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    assert (a / "snapshots.csv").read_bytes() == (b / "snapshots.csv").read_bytes()
    report = (a / "report.txt").read_text()
    assert "predicted Q_inf:" in report and "monodromy class:" in report
    c = tmp_path / "c"
    assert main(["run", "--out", str(c), "--seed", "8", *RUN_FAST]) == 0
    assert (a / "summary.csv").read_bytes() != (c / "summary.csv").read_bytes()


def test_run_constant_reports_loxodrome(tmp_path):
    out = tmp_path / "lox"
    assert main(["run", "--out", str(out), "--init", "constant", "--n-grid", "32",
                 "--t-end", "1"]) == 0
    assert "already loxodromic" in (out / "report.txt").read_text()


def test_run_with_class(tmp_path):
    out = tmp_path / "cls"
    r = math.exp(-math.pi / 2)
    assert main(["run", "--out", str(out), "--r", repr(r), "--theta", "0", "--n", "1",
                 *RUN_FAST]) == 0
    assert "predicted Q_inf: 0.375" in (out / "report.txt").read_text()


def test_loxodrome_command(tmp_path):
    out = tmp_path / "lox"
    assert main(["loxodrome", "--out", str(out), "--svg"]) == 0
    for a in ("0.05", "0.15", "0.45"):
        assert (out / f"spiral_a{a}.csv").exists()
    for n in (0, 1, 2):
        ET.parse(out / f"winding_n{n}.svg")
    ET.parse(out / "spirals.svg")
    ET.parse(out / "spirals_sphere.svg")
    report = (out / "loxodrome_report.txt").read_text()
    assert "FAIL" not in report


def test_analyze_and_roundtrip_winding_curve(tmp_path):
    lox = tmp_path / "lox"
    assert main(["loxodrome", "--out", str(lox), "--windings", "1", "--a", "0.15"]) == 0
    out = tmp_path / "an"
    assert main(["analyze", "--out", str(out), "--curve", str(lox / "winding_n1.csv")]) == 0
    text = (out / "analysis.txt").read_text()
    assert "verdict: ADMISSIBLE" in text and "Q constant:" in text
    rt = tmp_path / "rt"
    assert main(["roundtrip", "--out", str(rt), "--curve", str(lox / "winding_n1.csv"),
                 "--tolerance", "1e-8"]) == 0
    assert "pass" in (rt / "roundtrip.txt").read_text()


def test_analyze_inadmissible_circle(tmp_path):
    u = np.linspace(0, 1.5 * math.pi, 300)
    csvio.write_curve(tmp_path / "circle.csv", u, np.exp(1j * u))
    out = tmp_path / "an"
    assert main(["analyze", "--out", str(out), "--curve", str(tmp_path / "circle.csv")]) == 0
    assert "verdict: INADMISSIBLE" in (out / "analysis.txt").read_text()


def test_roundtrip_from_profile(tmp_path):
    s = np.linspace(0, 6, 200)
    csvio.write_rows(tmp_path / "q.csv", ("s", "Q"), zip(s, 0.3 + 0.2 * np.sin(s)))
    out = tmp_path / "rt"
    assert main(["roundtrip", "--out", str(out), "--q_profile", str(tmp_path / "q.csv"),
                 "--tolerance", "1e-3"]) == 0


def test_roundtrip_inconsistent_class(tmp_path, capsys):
    s = np.linspace(0, 2 * math.pi / math.sqrt(2), 65)
    csvio.write_rows(tmp_path / "q.csv", ("s", "Q"), zip(s, np.full(65, 0.375)))
    code = main(["roundtrip", "--out", str(tmp_path / "rt"), "--q_profile", str(tmp_path / "q.csv"),
                 "--r", "0.5", "--theta", "0", "--n", "1"])
    assert code == 2
    assert "INCONSISTENT" in capsys.readouterr().err


@pytest.mark.parametrize("argv, code", [
    (["fly"], "USAGE"),
    (["run", "--n-grid", "48"], "CONFIG"),
    (["run", "--rtol", "fast"], "CONFIG"),
    (["run", "stray"], "CONFIG"),
    (["run", "--config", "/nonexistent.ini"], "FILE_NOT_FOUND"),
    (["analyze"], "CONFIG"),
    (["analyze", "--curve", "/nonexistent.csv"], "FILE_NOT_FOUND"),
])
def test_error_exit_codes(tmp_path, capsys, argv, code):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert f"error: {code}:" in capsys.readouterr().err


def test_unused_setting_warns(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--seed", "1", "--colour", "red", *RUN_FAST]) == 0
    assert "'colour' was not used" in capsys.readouterr().err
