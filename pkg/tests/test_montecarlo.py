from __future__ import annotations

import json
import math

import numpy as np
import pytest

from analyzer.experiment import Experiment
from channel.curves import ResponseCurve
from channel.detection import DetectionChain
from channel.entangler import EntanglerConfig
from montecarlo.dump import empirical_csv, read_raw_trace, sidecar_path, write_raw_trace
from montecarlo.oracle import (
    OracleCase,
    analytic_binned_duan,
    check_case,
    default_oracle_cases,
    empirical_spectrum,
    oracle_equivalence,
    run_empirical,
)
from montecarlo.stages import BeamSplitter, FieldTraces, Loss, PhaseRotation, simulate_chain, vacuum_calibration
from montecarlo.synthesis import (
    QuadratureTrace,
    SynthesisConfig,
    SynthesisError,
    adjacent_bin_correlation,
    effective_segments,
    synthesize_colored_noise,
    welch_psd,
    white_noise,
)
from opa.spectrum import OpaSpectrumModel

BAND = (1e6, 1480e6)


def _config(seed: int = 2014) -> SynthesisConfig:
    return SynthesisConfig(n_samples=2**18, seed=seed, max_analysis_frequency=BAND[1])


def test_white_noise_has_unit_psd() -> None:
    """Unit-variance white noise is the vacuum level."""
    config = _config()
    trace = white_noise(config, stream_id=5)
    _, psd = welch_psd(trace, config)
    assert np.var(trace.samples) == pytest.approx(1.0, rel=0.02)
    assert np.mean(psd[1:-1]) == pytest.approx(1.0, rel=0.02)


def test_colored_noise_follows_target() -> None:
    config = _config()
    target = lambda f: 1.0 + 3.0 * (f < 1e9)  # noqa: E731
    trace = synthesize_colored_noise(target, config, stream_id=9, label="shaped")
    frequencies, psd = welch_psd(trace, config)
    low = (frequencies > 50e6) & (frequencies < 900e6)
    high = frequencies > 1.1e9
    assert np.mean(psd[low]) == pytest.approx(4.0, rel=0.03)
    assert np.mean(psd[high]) == pytest.approx(1.0, rel=0.03)
    assert trace.label == "shaped"


def test_synthesis_is_deterministic_per_stream() -> None:
    config = _config()
    first = synthesize_colored_noise(0.5, config, stream_id=1)
    again = synthesize_colored_noise(0.5, config, stream_id=1)
    other = synthesize_colored_noise(0.5, config, stream_id=2)
    assert np.array_equal(first.samples, again.samples)
    assert not np.array_equal(first.samples, other.samples)


def test_target_psd_must_be_positive() -> None:
    with pytest.raises(SynthesisError):
        synthesize_colored_noise(0.0, _config())


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_samples": 3000},
        {"n_samples": 2**12, "segment_length": 4096},
        {"sample_rate": 2e9, "max_analysis_frequency": 1.48e9},
        {"overlap_fraction": 0.95},
        {"seed": -1},
    ],
)
def test_synthesis_config_validation(kwargs) -> None:
    with pytest.raises(SynthesisError):
        SynthesisConfig(**kwargs)


def test_hann_bin_statistics() -> None:
    """Adjacent Hann bins correlate at 4/9; 50 % overlap leaves about four fifths of the segments independent."""
    config = _config()
    correlation = adjacent_bin_correlation(config, max_lag=2)
    assert correlation[0] == pytest.approx(0.444, abs=1e-3)
    assert correlation[1] == pytest.approx(1.0 / 36.0, abs=1e-3)
    assert 0.75 * config.segment_count < effective_segments(config) < 0.9 * config.segment_count


def test_stages_act_sample_wise() -> None:
    config = _config()
    samples = [white_noise(config, stream_id).samples for stream_id in range(4)]
    fields = FieldTraces(*samples)
    rotated = PhaseRotation(math.pi / 2.0).apply(fields, config)
    assert np.allclose(rotated.x_b, -fields.y_b)
    assert np.allclose(rotated.y_b, fields.x_b)
    mixed = BeamSplitter(0.5).apply(fields, config)
    assert np.allclose(mixed.x_a**2 + mixed.x_b**2, fields.x_a**2 + fields.x_b**2)
    untouched = Loss(1.0, 1.0).apply(fields, config)
    assert np.array_equal(untouched.x_a, fields.x_a)
    blocked = Loss(0.0, 0.0).apply(fields, config)
    assert np.var(blocked.y_a) == pytest.approx(1.0, rel=0.02)
    assert abs(np.corrcoef(blocked.y_a, fields.y_a)[0, 1]) < 0.01


def test_chain_rejects_length_mismatch() -> None:
    config = _config()
    short = QuadratureTrace(np.zeros(16))
    with pytest.raises(SynthesisError):
        simulate_chain((short, short), (short, short), DetectionChain(), config)


def test_empirical_spectrum_needs_vacuum() -> None:
    config = _config()
    chain = DetectionChain()
    vacuum = vacuum_calibration(chain, config)
    with pytest.raises(SynthesisError):
        empirical_spectrum(vacuum, None, config)


def test_vacuum_against_vacuum_gives_four() -> None:
    config = _config()
    chain = DetectionChain()
    spectrum = empirical_spectrum(vacuum_calibration(chain, config), vacuum_calibration(chain, _config(7)), config)
    assert np.mean(spectrum.duan) == pytest.approx(4.0, rel=0.02)
    assert len(spectrum.grid) == 148


@pytest.mark.parametrize(
    "case",
    [
        OracleCase(0.6768, 0.59, 1.0),
        OracleCase(0.6768, 1.0, math.sqrt(2.0), 13.0),
        OracleCase(0.3, 0.59, math.sqrt(2.0), 13.0),
    ],
)
def test_empirical_matches_analytic(case: OracleCase) -> None:
    """Monte-Carlo Duan spectra agree with the analytic model bin by bin."""
    result = check_case(case, _config(), band=BAND)
    assert result.fraction_within >= 0.95
    assert result.to_dict()["bins"] == 148


def test_empirical_with_dark_noise_subtracted() -> None:
    clearance = ResponseCurve.constant(13.0)
    model = OpaSpectrumModel(1.13e9, 0.6768)
    chain = DetectionChain.with_total_efficiency(
        0.59, clearance_a=clearance, clearance_b=clearance, dark_noise_subtracted=True
    )
    experiment = Experiment(EntanglerConfig(model, model), chain)
    config = _config()
    empirical = run_empirical(experiment, config, band=BAND)
    analytic = analytic_binned_duan(experiment, config, BAND)
    z = (empirical.duan - analytic) / empirical.duan_standard_error
    assert np.mean(np.abs(z) <= 3.0) >= 0.95


def test_empirical_run_is_deterministic() -> None:
    experiment = OracleCase(0.6768, 0.59, 1.0).experiment()
    first = run_empirical(experiment, _config(), band=BAND)
    second = run_empirical(experiment, _config(), band=BAND)
    assert np.array_equal(first.duan, second.duan)
    assert empirical_csv(first) == empirical_csv(second)


def test_oracle_keeps_case_order_with_workers() -> None:
    cases = [OracleCase(0.0, 1.0, 1.0), OracleCase(0.3, 0.59, 1.0)]
    results = oracle_equivalence(_config(), cases=cases, band=BAND, workers=2)
    assert [result.case for result in results] == cases
    assert all(result.fraction_within >= 0.95 for result in results)


def test_default_oracle_grid() -> None:
    cases = default_oracle_cases()
    assert len(cases) == 24
    assert len(set(cases)) == 24
    assert cases[0].to_dict()["clearance_db"] is None


def test_raw_trace_dump(tmp_path) -> None:
    config = _config()
    trace = QuadratureTrace(white_noise(config, 3).samples, label="x_sum", stage="detected")
    path, sidecar = write_raw_trace(trace, config, tmp_path / "raw" / "x_sum.f64")
    assert sidecar == sidecar_path(path)
    assert path.stat().st_size == 8 * config.n_samples
    metadata = json.loads(sidecar.read_text(encoding="utf-8"))
    assert metadata["dtype"] == "<f8"
    assert metadata["seed"] == 2014
    loaded, _ = read_raw_trace(path)
    assert np.array_equal(loaded.samples, trace.samples)
    assert loaded.stage == "detected"


def test_raw_trace_dump_errors(tmp_path) -> None:
    config = _config()
    trace = QuadratureTrace(np.arange(8.0), label="tiny")
    path, sidecar = write_raw_trace(trace, config, tmp_path / "tiny.f64")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(SynthesisError, match="sidecar declares"):
        read_raw_trace(path)
    sidecar.unlink()
    with pytest.raises(SynthesisError, match="Missing sidecar"):
        read_raw_trace(path)
