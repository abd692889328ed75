import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from cpbounds import cli
from cpbounds.config import UsageError, load_config, merge, parse_grid, parse_values
from cpbounds.errors import NumericalError
from cpbounds.oracle import TrialRecord


def run_cli(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_table(text):
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    data = list(reader)
    return {k: np.array([float(r[k]) for r in data]) for k in reader.fieldnames}


def test_grid_syntax():
    g = parse_grid("1e-2:1e6:25(log)")
    assert g.log and g.count == 25
    v = g.values()
    assert v[0] == pytest.approx(1e-2) and v[-1] == pytest.approx(1e6)
    np.testing.assert_allclose(np.diff(np.log(v)), np.log(10) / 3)
    np.testing.assert_allclose(parse_grid("0:100:41").values(), np.linspace(0, 100, 41))
    np.testing.assert_array_equal(parse_values("0,0.5,2"), [0, 0.5, 2])
    for bad in ("1:2", "2:1:5", "1:2:1", "0:1:5(log)", "a:b:3"):
        with pytest.raises(UsageError):
            parse_grid(bad)


def test_sweep_ratio_is_affine(capsys):
    code, out, _ = run_cli(["sweep-ratio", "--chi0", "1e6", "--ratios", "0:100:41"], capsys)
    assert code == 0
    t = read_table(out)
    assert t["ratio"].size == 41
    coef = np.polyfit(t["ratio"], t["F_minus"], 1)
    resid = np.max(np.abs(np.polyval(coef, t["ratio"]) - t["F_minus"]))
    assert resid < 1e-8 * np.max(np.abs(t["F_minus"]))
    assert np.all(t["F_minus"] <= t["F_planar"]) and np.all(t["F_planar"] <= t["F_plus"])


def test_sweep_chi_tightness(capsys):
    code, out, _ = run_cli(["sweep-chi", "--iso", "--chis", "1e-2:1e6:25(log)"], capsys)
    assert code == 0
    t = read_table(out)
    q = t["F_planar"] / t["F_minus"]
    assert t["chi0"].size == 25
    assert np.all((q > 0.9) & (q <= 1.0))


def test_polarizability_ratio(capsys):
    code, out, _ = run_cli(["polarizability", "--pec", "--axes", "320,20,20"], capsys)
    assert code == 0
    t = read_table(out)
    assert t["ratio"][0] == pytest.approx(51.1, abs=0.5)
    assert t["semi_a_nm"][0] == 160.0
    code, out, _ = run_cli(["polarizability", "--axes", "10,10,10", "--eps", "4", "--semi"], capsys)
    assert read_table(out)["alpha_a_nm3"][0] == pytest.approx(1000 * 3 / 6)


def test_csv_layout_and_metadata(capsys):
    code, out, _ = run_cli(["bounds", "--chi0", "3", "--alpha-par", "10", "--d", "50"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# cpbounds ")
    assert "# chi0 = 3.0" in lines
    header = [ln for ln in lines if not ln.startswith("#")][0].split(",")
    assert header[:7] == ["d_nm", "F_minus", "F_planar", "F_plus",
                          "F_minus_N", "F_planar_N", "F_plus_N"]
    assert header[-1] == "quad_error"
    assert {"minus_x", "planar_z", "plus_y"} <= set(header)
    # normalized-only table when no polarizability units were given
    code, out, _ = run_cli(["bounds", "--chi0", "3"], capsys)
    assert "F_minus_N" not in out


def test_numbers_round_trip(capsys):
    _, out, _ = run_cli(["bounds", "--pec"], capsys)
    row = [ln for ln in out.splitlines() if not ln.startswith("#")][1]
    value = row.split(",")[2]
    assert float(value) == pytest.approx(-12 * math.pi, rel=1e-10)
    assert repr(float(value)) == repr(float(f"{float(value):.17g}"))


def test_output_is_deterministic_across_workers(tmp_path, monkeypatch):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    base = ["sweep-distance", "--distances", "10:1000:6(log)", "--ratio", "2"]
    assert cli.main(base + ["--workers", "1", "-o", str(a)]) == 0
    assert cli.main(base + ["--workers", "4", "-o", str(b)]) == 0
    monkeypatch.setenv("CP_BOUNDS_THREADS", "2")
    assert cli.main(base + ["-o", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_thread_cap(monkeypatch):
    cfg = merge({}, {"command": "bounds", "workers": 16})
    monkeypatch.setenv("CP_BOUNDS_THREADS", "3")
    assert cli.worker_count(cfg) == 3
    monkeypatch.setenv("CP_BOUNDS_THREADS", "x")
    with pytest.raises(UsageError):
        cli.worker_count(cfg)


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ncommand = bounds\n[material]\nchi0 = 5\n")
    assert load_config(cfg)["chi0"] == 5.0
    code, out, _ = run_cli(["--config", str(cfg), "--chi0", "7"], capsys)
    assert code == 0 and "# chi0 = 7.0" in out


def test_empty_config_equals_flags_only(tmp_path, capsys):
    empty = tmp_path / "empty.cfg"
    empty.write_text("")
    flags = ["sweep-chi", "--chis", "1:100:3(log)", "--ratio", "0.5"]
    _, a, _ = run_cli(flags, capsys)
    _, b, _ = run_cli(flags + ["--config", str(empty)], capsys)
    assert a == b


@pytest.mark.parametrize("text, match", [
    ("chi0 = 5\nchi0 = 6\n", "duplicate"),
    ("[material]\nchi0 = 5\n[dipole]\nchi0 = 6\n", "duplicate"),
    ("colour = blue\n", "valid keys"),
    ("[bogus]\nchi0 = 1\n", "unknown section"),
    ("trials = many\n", "invalid value"),
])
def test_config_errors(tmp_path, capsys, text, match):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(UsageError, match=match):
        load_config(path)
    code, _, err = run_cli(["bounds", "--config", str(path)], capsys)
    assert code == 1 and "error" in err


@pytest.mark.parametrize("argv", [
    [],
    ["bounds", "--unknown"],
    ["sweep-ratio", "--ratios", "5:1:4"],
    ["bounds", "--tol", "0.5"],
    ["bounds", "--material", "drude"],
    ["matsubara", "--chi0", "1"],
    ["polarizability"],
    ["polarizability", "--axes", "1,2"],
])
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = run_cli(argv, capsys)
    assert code == 1
    assert err.startswith("cpbounds: error")


def test_numerical_failure_exits_2(monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericalError("did not converge")

    monkeypatch.setattr(cli, "force_bounds", boom)
    code, _, err = run_cli(["bounds", "--chi0", "1"], capsys)
    assert code == 2 and "numerical" in err


def test_oracle_report(tmp_path):
    path = tmp_path / "trials.txt"
    assert cli.main(["oracle", "--trials", "25", "--seed", "7", "-o", str(path)]) == 0
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "trial_id seed N |S| chi A L_minus L_plus pass"
    assert len(lines) == 26
    assert all(ln.endswith(" pass") for ln in lines[1:])


def test_oracle_failure_exits_3(monkeypatch, capsys):
    def fake(n, seed, workers):
        return [TrialRecord(0, seed, 8, 2, 1.0, 5.0, -1.0, 1.0, False)]

    monkeypatch.setattr(cli, "run_trials", fake)
    code, out, err = run_cli(["oracle", "--trials", "1"], capsys)
    assert code == 3 and "FAIL" in out and "failed" in err


def test_matsubara_command(capsys):
    code, out, _ = run_cli(["matsubara", "--temperature", "300", "--d", "100"], capsys)
    assert code == 0
    t = read_table(out)
    assert t["temperature_K"][0] == 300.0
    assert t["F_minus"][0] < t["F_planar"][0] < t["F_plus"][0]


def test_lateral_and_material_options(tmp_path, capsys):
    table = tmp_path / "chi.txt"
    table.write_text("1e13 1e6\n1e15 1e2\n1e17 1e-2\n")
    code, out, _ = run_cli(["bounds", "--table", str(table), "--axis", "x"], capsys)
    assert code == 0
    t = read_table(out)
    assert t["F_planar"][0] == 0.0 and t["F_minus"][0] == pytest.approx(-t["F_plus"][0])
    code, out, _ = run_cli(["bounds", "--omega-p", "1.37e16", "--gamma", "5.32e13"], capsys)
    _, gold, _ = run_cli(["bounds"], capsys)
    assert read_table(out)["F_minus"][0] == read_table(gold)["F_minus"][0]


def test_svg_output(tmp_path):
    svg = tmp_path / "chart.svg"
    code = cli.main(["sweep-chi", "--chis", "1:1e4:4(log)", "-o", str(tmp_path / "c.csv"),
                     "--svg", str(svg)])
    assert code == 0
    text = svg.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "cpbounds", "polarizability", "--pec",
                          "--axes", "320,20,20"], capture_output=True, text=True, check=True)
    assert "51.08" in out.stdout
