from __future__ import annotations

import json
from pathlib import Path

import pytest

from cli.config import ExperimentConfig, load_config
from cli.main import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from cli.outputs import OUTPUT_DIR_ENV

BROADBAND = Path(__file__).resolve().parents[1] / "configs" / "broadband.json"


def _small_config(tmp_path: Path, **fit_overrides) -> Path:
    """Broadband configuration with a short Monte-Carlo run and a quick fit."""
    data = json.loads(BROADBAND.read_text(encoding="utf-8"))
    data["montecarlo"].update(n_samples=2**18, dump_raw=True)
    data["fit"].update(starts=2, **fit_overrides)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _run(capsys, *argv: str) -> dict:
    assert main(list(argv)) == EXIT_OK
    return json.loads(capsys.readouterr().out)


def test_cavity_report(capsys, tmp_path: Path) -> None:
    """The bundled configuration reproduces the resonator figures."""
    report = _run(capsys, "cavity", "--config", str(BROADBAND), "--out", str(tmp_path))
    entry = report["cavities"][0]
    assert entry["signal"]["fsr"] == pytest.approx(31.75e9, abs=0.05e9)
    assert entry["signal"]["finesse"] == pytest.approx(14.04, abs=0.02)
    assert entry["signal"]["fwhm"] == pytest.approx(2.26e9, abs=0.01e9)
    assert entry["pump"]["finesse"] == pytest.approx(308.0, abs=1.0)
    assert entry["pump"]["buildup"] == pytest.approx(194.15, abs=0.3)
    assert entry["circulating_pump_power_w"] == pytest.approx(58.2, abs=0.2)
    assert entry["circulating_threshold_power_w"] == pytest.approx(127.2, abs=0.2)
    assert (tmp_path / "cavity.json").exists()
    written = json.loads((tmp_path / "cavity.json").read_text(encoding="utf-8"))
    assert written["config"] == report["config"]
    assert ExperimentConfig.from_dict(report["config"], BROADBAND.parent) == load_config(BROADBAND)


def test_cavity_csv(capsys, tmp_path: Path) -> None:
    assert main(["cavity", "--config", str(BROADBAND), "--out", str(tmp_path), "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "source,wavelength,fsr_hz,finesse,fwhm_hz,hwhm_hz,buildup,escape_efficiency"
    assert len(lines) == 5
    assert (tmp_path / "cavity.csv").read_text(encoding="utf-8").splitlines() == lines


def test_threshold_report(capsys, tmp_path: Path) -> None:
    report = _run(capsys, "threshold", "--config", str(BROADBAND), "--out", str(tmp_path))
    entry = report["thresholds"][0]
    assert entry["p_thr_input_mw"] == pytest.approx(859.0, rel=0.01)
    assert entry["circulating_to_input_ratio"] == pytest.approx(194.15, abs=0.3)
    assert ExperimentConfig.from_dict(report["config"], BROADBAND.parent) == load_config(BROADBAND)
    written = json.loads((tmp_path / "threshold.json").read_text(encoding="utf-8"))
    assert written["config"] == report["config"]


def test_spectrum_is_deterministic(capsys, tmp_path: Path) -> None:
    first, second = tmp_path / "first", tmp_path / "second"
    summary = _run(capsys, "spectrum", "--config", str(BROADBAND), "--out", str(first))
    _run(capsys, "spectrum", "--config", str(BROADBAND), "--out", str(second))
    for name in ("spectrum.csv", "spectrum.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    classification = summary["classification"]
    assert 1.7 < classification["min_duan"]["value"] < 1.8
    assert classification["epr_band_hz"] is not None

    rows = (first / "spectrum.csv").read_text(encoding="utf-8").splitlines()[1:]
    values = {round(float(row.split(",")[0]) / 1e6): float(row.split(",")[3]) for row in rows}
    nearest = min(values, key=lambda frequency: abs(frequency - 300))
    assert values[nearest] == pytest.approx(1.792, abs=0.01)
    document = json.loads((first / "spectrum.json").read_text(encoding="utf-8"))
    assert document["config"]["sweep"]["points"] == 740


def test_output_directory_from_environment(capsys, monkeypatch, tmp_path: Path) -> None:
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    _run(capsys, "spectrum", "--config", str(BROADBAND))
    assert (tmp_path / "spectrum.csv").exists()


def test_synth_then_fit(capsys, tmp_path: Path) -> None:
    """Synthetic traces fed back into the fitter recover the operating point."""
    config = _small_config(tmp_path)
    out = tmp_path / "run"
    summary = _run(capsys, "synth", "--config", str(config), "--out", str(out))
    for name in ("synthetic.csv", "synthetic.json", "empirical.csv", "raw/x_sum.f64", "raw/x_sum.json"):
        assert (out / name).exists(), name
    assert summary["seed"] == 2014
    assert 1.5 < summary["montecarlo"]["empirical_min_duan"] < 2.1

    result = _run(capsys, "fit", "--config", str(config), "--out", str(out), "--data", str(out / "synthetic.csv"))
    assert result["parameters"]["eta_total"] == pytest.approx(0.588, abs=0.03)
    assert result["parameters"]["pump_ratio_x"] == pytest.approx(0.677, abs=0.03)
    assert result["masked_windows_hz"] == [[710e6, 718e6]]
    written = json.loads((out / "fit.json").read_text(encoding="utf-8"))
    assert written["result"] == result


def test_seed_override_changes_synthetic_traces(capsys, tmp_path: Path) -> None:
    data = json.loads(BROADBAND.read_text(encoding="utf-8"))
    del data["montecarlo"]
    config = tmp_path / "experiment.json"
    config.write_text(json.dumps(data), encoding="utf-8")
    _run(capsys, "synth", "--config", str(config), "--out", str(tmp_path / "a"))
    _run(capsys, "synth", "--config", str(config), "--out", str(tmp_path / "b"), "--seed", "5")
    assert (tmp_path / "a" / "synthetic.csv").read_bytes() != (tmp_path / "b" / "synthetic.csv").read_bytes()


def test_usage_errors_exit_with_one(capsys, tmp_path: Path) -> None:
    assert main(["spectrum", "--config", str(tmp_path / "absent.json")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as excinfo:
        main(["spectrum"])
    assert excinfo.value.code == EXIT_USAGE
    data = json.loads(BROADBAND.read_text(encoding="utf-8"))
    data["sources"][0]["pump_power_mw"] = 700
    config = tmp_path / "above.json"
    config.write_text(json.dumps(data), encoding="utf-8")
    assert main(["spectrum", "--config", str(config), "--out", str(tmp_path)]) == EXIT_USAGE


def test_unusable_fit_exits_with_two(capsys, tmp_path: Path) -> None:
    """A parameter range that cannot be evaluated anywhere is a numerical failure."""
    data = json.loads(BROADBAND.read_text(encoding="utf-8"))
    del data["montecarlo"]
    data["fit"]["free"] = {"pump_ratio_x": {"lower": 1.0, "upper": 1.5}}
    data["fit"]["starts"] = 1
    config = tmp_path / "experiment.json"
    config.write_text(json.dumps(data), encoding="utf-8")
    _run(capsys, "synth", "--config", str(config), "--out", str(tmp_path))
    argv = ["fit", "--config", str(config), "--out", str(tmp_path), "--data", str(tmp_path / "synthetic.csv")]
    assert main(argv) == EXIT_NUMERICAL
    assert not (tmp_path / "fit.json").exists()


def test_vanishing_nonlinearity_exits_with_two(capsys, monkeypatch, tmp_path: Path) -> None:
    """Valid inputs that still give no parametric coupling are a numerical failure."""
    monkeypatch.setattr("opa.threshold.nonlinear_efficiency", lambda inputs: 0.0)
    assert main(["threshold", "--config", str(BROADBAND), "--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert not (tmp_path / "threshold.json").exists()
