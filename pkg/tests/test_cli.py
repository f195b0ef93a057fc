import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hybridspec import __version__
from hybridspec.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from hybridspec.io import read_grid_csv, read_pgm, read_trace_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def load(name):
    return json.loads((CONFIGS / name).read_text())


def run(tmp_path, command, cfg, out="out", seed=None, raw=None):
    path = tmp_path / f"{command}.json"
    path.write_text(raw if raw is not None else json.dumps(cfg))
    args = [command, "--config", str(path), "--out", str(tmp_path / out)]
    if seed is not None:
        args += ["--seed", str(seed)]
    return main(args), tmp_path / out


def error_of(out):
    return json.loads((out / "error.json").read_text())


def data_rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return np.loadtxt(lines[1:], delimiter=",", ndmin=2)


# simulate


def test_simulate_flipchip_has_five_peaks(tmp_path):
    code, out = run(tmp_path, "simulate", load("simulate_flipchip.json"))
    assert code == EXIT_OK
    peaks = json.loads((out / "summary.json").read_text())["peaks_hz"]
    assert sum(2.45e9 <= f <= 2.65e9 for f in peaks) == 5
    assert (out / "trace.csv").read_text().startswith("# config_sha256=")


def test_simulate_bare_microwave_free_cavity_is_one_lorentzian(tmp_path):
    cfg = load("simulate_bare_cavity.json")
    cfg["params"].update(mechanical=[], g_ac_hz=0.0)
    code, out = run(tmp_path, "simulate", cfg)
    assert code == EXIT_OK
    trace = read_trace_csv(out / "trace.csv")
    detune = trace.freqs - 2.923e9
    expected = 100e3 / np.abs(-1j * detune + 0.5 * 444e3)
    # the 2*pi round trip through rad/s costs a few ulps near the wings
    np.testing.assert_allclose(trace.magnitude, expected, rtol=1e-10)
    assert len(json.loads((out / "summary.json").read_text())["peaks_hz"]) == 1


def test_simulate_noise_follows_the_seed(tmp_path):
    cfg = dict(load("simulate_bare_cavity.json"), noise=0.01)
    _, a = run(tmp_path, "simulate", cfg, out="a", seed=1)
    _, b = run(tmp_path, "simulate", cfg, out="b", seed=1)
    _, c = run(tmp_path, "simulate", cfg, out="c", seed=2)
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "trace.csv").read_bytes() != (c / "trace.csv").read_bytes()


def test_malformed_json_is_a_config_error(tmp_path, capsys):
    code, out = run(tmp_path, "simulate", None, raw="{not json")
    assert code == EXIT_CONFIG
    err = error_of(out)
    assert err["exit_code"] == 2 and "malformed JSON" in err["message"]
    assert "malformed JSON" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda c: c.update(extra=1), "Additional properties"),
        (lambda c: c["grid"].update(points=1), "grid"),
        (lambda c: c["params"]["microwave"].update(freq_hz="2.6 parsecs"), "unit"),
        (lambda c: c["grid"].update(start_hz="3GHz"), "stop_hz"),
    ],
)
def test_bad_simulate_configs(tmp_path, mutate, match):
    cfg = load("simulate_bare_cavity.json")
    mutate(cfg)
    code, out = run(tmp_path, "simulate", cfg)
    assert code == EXIT_CONFIG
    assert match.lower() in error_of(out)["message"].lower()


def test_missing_config_file(tmp_path):
    code = main(["tune", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG


def test_stale_error_report_is_removed_on_success(tmp_path):
    run(tmp_path, "simulate", None, raw="{")
    code, out = run(tmp_path, "simulate", load("simulate_bare_cavity.json"))
    assert code == EXIT_OK and not (out / "error.json").exists()


# sweep


def test_single_current_sweep_equals_simulated_trace(tmp_path):
    cfg = load("sweep_fixture.json")
    cfg["currents_ma"] = [120.0]
    code, out = run(tmp_path, "sweep", cfg, out="sweep")
    assert code == EXIT_OK
    grid = read_grid_csv(out / "grid.csv")
    f_mw = json.loads((out / "summary.json").read_text())["microwave_hz"][0]

    sim = {"params": json.loads(json.dumps(cfg["params"])), "grid": cfg["grid"]}
    sim["params"]["microwave"]["freq_hz"] = f_mw
    code, out2 = run(tmp_path, "simulate", sim, out="sim")
    assert code == EXIT_OK
    trace = read_trace_csv(out2 / "trace.csv")
    assert grid.magnitude.shape == (1, len(trace))
    np.testing.assert_allclose(grid.magnitude[0], trace.magnitude, rtol=1e-9)


def test_sweep_writes_heatmap(tmp_path):
    cfg = load("sweep_fixture.json")
    cfg["currents_ma"] = {"start_ma": 0, "stop_ma": 200, "points": 5}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == EXIT_OK
    img = read_pgm(out / "heatmap.pgm")
    assert img.shape == (5, cfg["grid"]["points"]) and img.max() == 65535


def test_empty_current_list_is_a_schema_error(tmp_path):
    cfg = dict(load("sweep_fixture.json"), currents_ma=[])
    code, out = run(tmp_path, "sweep", cfg)
    assert code == EXIT_CONFIG and "currents_ma" in error_of(out)["message"]


# fit


def small_fit_config(tmp_path):
    cfg = load("fit_fixture/fit.json")
    for cut in cfg["cuts"]:
        cut["csv"] = str(CONFIGS / "fit_fixture" / cut["csv"])
    cfg["ga"] = {"population": 12, "generations": 6, "seed": 5}
    cfg["reconstruct"]["grid"]["points"] = 31
    cfg["reconstruct"]["currents_ma"] = {"start_ma": 100, "stop_ma": 140, "points": 3}
    return cfg


def test_fit_writes_result_table_and_reconstruction(tmp_path):
    code, out = run(tmp_path, "fit", small_fit_config(tmp_path))
    assert code == EXIT_OK
    doc = json.loads((out / "fit_result.json").read_text())
    assert doc["provenance"]["seed"] == 5
    assert doc["result"]["generations_run"] == 6
    assert [c["id"] for c in doc["result"]["cuts"]] == ["cut0", "cut1", "cut2"]
    assert "g_ab/2pi (MHz)" in (out / "table.txt").read_text()
    rec = json.loads((out / "reconstruction.json").read_text())
    assert len(rec["mechanical_hz"]) == 5 and rec["currents_mA"] == [100.0, 120.0, 140.0]
    assert read_grid_csv(out / "reconstruction_grid.csv").magnitude.shape == (3, 31)


def test_fit_seed_override_is_recorded(tmp_path):
    code, out = run(tmp_path, "fit", small_fit_config(tmp_path), seed=9)
    assert code == EXIT_OK
    assert json.loads((out / "fit_result.json").read_text())["result"]["seed_used"] == 9


def test_fit_missing_csv_is_a_config_error(tmp_path):
    cfg = small_fit_config(tmp_path)
    cfg["cuts"][1]["csv"] = "does_not_exist.csv"
    code, out = run(tmp_path, "fit", cfg)
    assert code == EXIT_CONFIG and "not found" in error_of(out)["message"]


def test_fit_bound_count_mismatch_is_a_config_error(tmp_path):
    cfg = small_fit_config(tmp_path)
    cfg["bounds"]["omega_a_hz"].pop()
    code, out = run(tmp_path, "fit", cfg)
    assert code == EXIT_CONFIG and "omega_a_hz" in error_of(out)["message"]


# circuit


def test_circuit_single_length_gives_one_row(tmp_path):
    cfg = dict(load("circuit_lengths.json"), lengths_mm=[1.0])
    code, out = run(tmp_path, "circuit", cfg)
    assert code == EXIT_OK
    rows = data_rows(out / "lengths.csv")
    assert rows.shape == (1, 3) and rows[0, 0] == 1.0
    assert rows[0, 1] > 0 and rows[0, 2] > 0


def test_circuit_negative_length_is_a_schema_error(tmp_path):
    cfg = dict(load("circuit_lengths.json"), lengths_mm=[-1.0])
    code, out = run(tmp_path, "circuit", cfg)
    assert code == EXIT_CONFIG and "lengths_mm" in error_of(out)["message"]


def test_circuit_bad_component_unit(tmp_path):
    cfg = load("circuit_lengths.json")
    cfg["wirebond"]["C_p"] = "3nH"
    code, _ = run(tmp_path, "circuit", cfg)
    assert code == EXIT_CONFIG


# tune


def test_tune_symmetric_currents_give_symmetric_output(tmp_path):
    code, out = run(tmp_path, "tune", load("tune_points.json"))
    assert code == EXIT_OK
    rows = data_rows(out / "frequency_vs_current.csv")
    np.testing.assert_array_equal(rows[:, 0], -rows[::-1, 0])
    np.testing.assert_array_equal(rows[:, 2], rows[::-1, 2])
    model = json.loads((out / "tuning.json").read_text())["tuning"]
    assert model["freq0_hz"] == pytest.approx(2.7e9, rel=1e-9)
    assert model["i_star_eff_ma"] == pytest.approx(300.0, rel=1e-6)


def test_tune_zero_points_is_a_schema_error(tmp_path):
    code, out = run(tmp_path, "tune", dict(load("tune_points.json"), points=[]))
    assert code == EXIT_CONFIG and "points" in error_of(out)["message"]


def test_upward_tuning_is_a_numerical_failure(tmp_path):
    cfg = load("tune_points.json")
    cfg["points"] = [{"current_ma": 0, "freq_hz": 2.5e9}, {"current_ma": 100, "freq_hz": 2.6e9}]
    code, out = run(tmp_path, "tune", cfg)
    assert code == EXIT_NUMERIC and error_of(out)["error"] == "CalibrationError"


# output failures and entry points


def test_output_path_that_is_a_file(tmp_path):
    (tmp_path / "taken").write_text("")
    code, _ = run(tmp_path, "tune", load("tune_points.json"), out="taken")
    assert code == EXIT_IO


def test_unwritable_output_file(tmp_path):
    (tmp_path / "out" / "tuning.json").mkdir(parents=True)
    code, out = run(tmp_path, "tune", load("tune_points.json"))
    assert code == EXIT_IO and error_of(out)["exit_code"] == 4


@pytest.mark.parametrize(
    "command, name",
    [
        ("simulate", "simulate_flipchip.json"),
        ("sweep", "sweep_fixture.json"),
        ("tune", "tune_points.json"),
    ],
)
def test_reruns_are_byte_identical(tmp_path, command, name):
    cfg = load(name)
    _, a = run(tmp_path, command, cfg, out="a")
    _, b = run(tmp_path, command, cfg, out="b")
    files = sorted(p.name for p in a.iterdir())
    assert files and files == sorted(p.name for p in b.iterdir())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_module_entry_point(tmp_path):
    done = subprocess.run(
        [sys.executable, "-m", "hybridspec", "--version"], capture_output=True, text=True, check=True
    )
    assert done.stdout.strip() == f"hybridspec {__version__}"
    exe = shutil.which("hybridspec")
    if exe:
        done = subprocess.run([exe, "tune", "--config", str(CONFIGS / "tune_points.json"),
                               "--out", str(tmp_path / "o")], capture_output=True)
        assert done.returncode == 0 and math.isfinite(data_rows(tmp_path / "o" / "frequency_vs_current.csv")[0, 2])
