import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from deltascat.cli import main, parse_box, parse_complex_pair, parse_potential, parse_window

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_resonances_three_point(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, _, _ = run(["resonances", "--geom", CONFIGS / "three_point.json", "--potential",
                      f"matrix:{CONFIGS / 'three_point_potential.txt'}", "--center", "1,0",
                      "--radius", "0.3", "--out", out], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "re,im,multiplicity,residual,method"
    assert lines[1].startswith("1.000000000000,0.000000000000,1,")


def test_resonances_single_point_stdout(capsys):
    code, out, err = run(["resonances", "--potential", "2", "--geom", CONFIGS / "single_point.json",
                          "--center", "0,-1", "--radius", "0.5"], capsys)
    assert code == 0
    assert out.splitlines()[1].startswith("0.000000000000,-1.000000000000,1,")
    assert "1 resonances" in err


def test_resonances_empty_box(capsys):
    code, out, _ = run(["resonances", "--potential", "2", "--geom", CONFIGS / "point.json",
                        "--box", "-1,1,0.1,0.5"], capsys)
    assert code == 0
    assert out.splitlines() == ["re,im,multiplicity,residual,method"]


def test_resonances_free_region(capsys, tmp_path):
    code, out, _ = run(["resonances", "--potential", "2", "--geom", CONFIGS / "two_point.json",
                        "--box", "10,60,-8,0.5", "--check-free-region", "0.1",
                        "--out", tmp_path / "r.csv"], capsys)
    assert code == 0
    assert "0 violations" in out and "PASS" in out


def test_norm_sweep_point_imaginary(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, stdout, _ = run(["norm-sweep", "--geom", CONFIGS / "point.json",
                           "--lambda-imag", "4:64:dyadic", "--out", out], capsys)
    assert code == 0
    assert "alpha = -1.0000" in stdout
    assert len(out.read_text().splitlines()) == 6


def test_norm_sweep_window_miss(tmp_path, capsys):
    code, _, _ = run(["norm-sweep", "--geom", CONFIGS / "point.json", "--lambda-imag",
                      "4:64:dyadic", "--window", "-0.5,-0.4", "--out", tmp_path / "s.csv"], capsys)
    assert code == 2


def test_malformed_geometry(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimension": 2, "shapes": [')
    out = tmp_path / "s.csv"
    code, _, err = run(["norm-sweep", "--geom", bad, "--lambda", "20:80:dyadic", "--out", out], capsys)
    assert code == 1
    assert not out.exists()
    assert "error" in err.lower()


def test_missing_geometry_file(tmp_path, capsys):
    code, _, _ = run(["norm-sweep", "--geom", tmp_path / "nope.json", "--lambda", "1:2:dyadic"], capsys)
    assert code == 1


@pytest.mark.parametrize("argv", [
    ["norm-sweep"],
    ["resonances", "--geom", "x.json"],
    ["frobnicate"],
    ["norm-sweep", "--geom", str(CONFIGS / "point.json"), "--lambda", "1:2:dyadic", "--threads", "0"],
])
def test_usage_errors_exit_one(argv, capsys):
    assert main(argv) == 1


def test_wave_demo_free(tmp_path, capsys):
    code, out, _ = run(["wave-demo", "free", "--out", tmp_path], capsys)
    assert code == 0
    assert "PASS" in out
    for suffix in ("trajectory", "comparison", "poles"):
        assert (tmp_path / f"free_{suffix}.csv").exists()
    head = (tmp_path / "free_comparison.csv").read_text().splitlines()[0]
    assert head == "t,l2_error,expansion_norm"
    assert (tmp_path / "free_trajectory.csv").read_text().startswith("t,x,u\n")


def test_wave_demo_unknown_preset(capsys):
    code, _, err = run(["wave-demo", "double-well"], capsys)
    assert code == 1
    assert "paper-three-point" in err


def test_plot_written(tmp_path, capsys):
    png = tmp_path / "r.png"
    code, _, _ = run(["resonances", "--geom", CONFIGS / "three_point.json", "--potential", "three-point",
                      "--box", "-6,6,-2,0.5", "--out", tmp_path / "r.csv", "--plot", png], capsys)
    assert code == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_deterministic_reruns(tmp_path, capsys):
    outs = []
    for k, threads in enumerate((1, 1, 3)):
        p = tmp_path / f"s{k}.csv"
        assert main(["norm-sweep", "--geom", str(CONFIGS / "segment.json"), "--lambda", "10:80:dyadic",
                     "--threads", str(threads), "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    res = []
    for k in range(2):
        p = tmp_path / f"r{k}.csv"
        assert main(["resonances", "--geom", str(CONFIGS / "three_point.json"), "--potential", "three-point",
                     "--box", "-20,20,-3,0.5", "--out", str(p)]) == 0
        res.append(p.read_bytes())
    assert res[0] == res[1]
    capsys.readouterr()


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "deltascat.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout


@pytest.mark.parametrize("text, value", [("1,0", 1 + 0j), ("0,-1", -1j), (" 2.5 , 3 ", 2.5 + 3j)])
def test_parse_complex_pair(text, value):
    assert parse_complex_pair(text) == value


def test_parsers_reject():
    for f, text in [(parse_complex_pair, "1"), (parse_box, "1,0,0,1"), (parse_box, "a,b,c,d"),
                    (parse_window, "0,-1")]:
        with pytest.raises(Exception):
            f(text)
    b = parse_box("-20,20,-3,0.5")
    assert (b.x0, b.x1, b.y0, b.y1) == (-20, 20, -3, 0.5)


def test_parse_potential(tmp_path):
    d = tmp_path / "d.txt"
    d.write_text("1.0\n2.0\n")
    assert np.array_equal(parse_potential(f"diag:{d}", 2).as_matrix(2), np.diag([1.0, 2.0]))
    assert np.array_equal(parse_potential("three-point", 3).as_matrix(3),
                          np.loadtxt(CONFIGS / "three_point_potential.txt"))
    assert parse_potential("-2", 1).as_matrix(1)[0, 0] == -2
    with pytest.raises(ValueError):
        parse_potential(f"diag:{d}", 3)
    with pytest.raises(ValueError):
        parse_potential("strong", 1)
