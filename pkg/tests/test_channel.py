from __future__ import annotations

import math

import numpy as np
import pytest

from channel.curves import (
    CurveCoverageError,
    ResponseCurve,
    gain_from_lo_power,
    normalize_curve_rows,
    measured_clearance_curve,
)
from channel.detection import (
    DetectionChain,
    JointQuadratureSpectra,
    apply_dark_noise,
    dark_noise_level,
    gain_ratio_from_imbalance,
    joint_variances_with_gains,
)
from channel.entangler import (
    ChannelError,
    EntanglerConfig,
    apply_uniform_loss,
    beam_splitter_transform,
    efficiency_budget,
    entangle,
)
from opa.spectrum import OpaSpectrumModel, anti_squeezed_variance, squeezed_variance
from quadrature.covariance import TwoModeCovarianceSpectrum, validate_covariance
from quadrature.decibel import DecibelValue
from quadrature.grid import FrequencyGrid

GAMMA = 1.13e9
X_NOMINAL = math.sqrt(300.0 / 655.0)


def _symmetric_state(vs: float, va: float) -> TwoModeCovarianceSpectrum:
    """Covariance of two equal squeezers mixed in quadrature on a 50/50 splitter."""
    mean, half = (vs + va) / 2.0, (vs - va) / 2.0
    matrix = np.array(
        [
            [mean, 0.0, half, 0.0],
            [0.0, mean, 0.0, -half],
            [half, 0.0, mean, 0.0],
            [0.0, -half, 0.0, mean],
        ]
    )
    return TwoModeCovarianceSpectrum(FrequencyGrid.from_points([1e6, 2e6]), np.array([matrix, matrix]))


def test_beam_splitter_is_orthogonal() -> None:
    transform = beam_splitter_transform(0.3)
    assert np.allclose(transform @ transform.T, np.eye(4))


def test_entangled_state_correlations() -> None:
    """Quadrature mixing puts the squeezing into X_A+X_B and Y_A−Y_B."""
    model = OpaSpectrumModel(GAMMA, X_NOMINAL)
    grid = FrequencyGrid.linear(100e6, 500e6, 5)
    cov = entangle(EntanglerConfig(model, model), grid)
    vs = squeezed_variance(model, grid.points)
    va = anti_squeezed_variance(model, grid.points)
    assert np.allclose(cov.var_xa, (vs + va) / 2.0)
    assert np.allclose(cov.cov_x, (vs - va) / 2.0)
    assert np.allclose(cov.cov_y, (va - vs) / 2.0)
    assert np.allclose(cov.var_xa + cov.var_xb + 2 * cov.cov_x, 2 * vs)
    assert validate_covariance(cov).passed


def test_loss_mixes_in_vacuum() -> None:
    """Full loss leaves vacuum; no loss leaves the state unchanged."""
    model = OpaSpectrumModel(GAMMA, 0.5)
    cov = entangle(EntanglerConfig(model, model), FrequencyGrid.linear(1e6, 1e9, 10))
    assert np.allclose(apply_uniform_loss(cov, 1.0).matrices, cov.matrices)
    assert np.allclose(apply_uniform_loss(cov, 0.0).matrices, np.eye(4))
    lossy = apply_uniform_loss(cov, 0.59)
    assert np.allclose(lossy.cov_x, 0.59 * cov.cov_x)
    assert np.allclose(lossy.var_xa, 0.59 * cov.var_xa + 0.41)
    assert validate_covariance(lossy).passed


def test_asymmetric_loss_and_validation() -> None:
    model = OpaSpectrumModel(GAMMA, 0.5)
    cov = entangle(EntanglerConfig(model, model), FrequencyGrid.linear(1e6, 1e9, 4))
    lossy = apply_uniform_loss(cov, 0.9, 0.5)
    assert np.allclose(lossy.cov_x, math.sqrt(0.45) * cov.cov_x)
    with pytest.raises(ChannelError):
        apply_uniform_loss(cov, 1.2)


def test_efficiency_budget() -> None:
    assert efficiency_budget(0.68, 0.92, 0.94) == pytest.approx(0.588064)
    chain = DetectionChain(propagation_efficiency=0.92, visibility=math.sqrt(0.68), quantum_efficiency=0.94)
    assert chain.total_efficiency == pytest.approx(0.588064)
    with pytest.raises(ChannelError):
        efficiency_budget(1.1, 0.9, 0.9)


def test_entangler_rejects_degenerate_splitter() -> None:
    model = OpaSpectrumModel(GAMMA, 0.5)
    with pytest.raises(ChannelError):
        EntanglerConfig(model, model, beam_splitter_reflectivity=1.0)


def test_balanced_gains_reduce_to_squeezed_variance() -> None:
    joint = joint_variances_with_gains(_symmetric_state(0.5, 4.0), 1.0, 1.0)
    assert np.allclose(joint.var_xsum, 0.5)
    assert np.allclose(joint.var_ydiff, 0.5)


def test_gain_imbalance_leaks_anti_squeezing() -> None:
    """An amplitude ratio of √2 lifts 0.5 to 0.600."""
    joint = joint_variances_with_gains(_symmetric_state(0.5, 4.0), math.sqrt(2.0), 1.0)
    assert joint.var_xsum[0] == pytest.approx(0.6001, abs=1e-4)
    assert joint.var_ydiff[0] == pytest.approx(joint.var_xsum[0])


def test_gains_must_be_positive() -> None:
    with pytest.raises(ChannelError):
        joint_variances_with_gains(_symmetric_state(0.5, 4.0), 0.0, 1.0)


def test_gain_ratio_helpers() -> None:
    assert gain_ratio_from_imbalance(DecibelValue(20.0 * math.log10(math.sqrt(2.0)))) == pytest.approx(math.sqrt(2.0))
    grid = FrequencyGrid.from_points([1e6, 2e6])
    gain_a, gain_b = DetectionChain(gain_a=gain_from_lo_power(6.0), gain_b=gain_from_lo_power(3.0)).gains(grid)
    assert np.allclose(gain_a / gain_b, math.sqrt(2.0))
    gain_a, gain_b = DetectionChain().with_gain_ratio(1.2).gains(grid)
    assert np.allclose(gain_a / gain_b, 1.2)


def test_dark_noise_at_13_db_clearance() -> None:
    """Dark noise adds to signal and vacuum alike: (V + d)/(1 + d)."""
    grid = FrequencyGrid.from_points([1e6, 2e6])
    spectra = JointQuadratureSpectra(grid, np.full(2, 0.5), np.full(2, 0.5), np.ones(2), np.ones(2))
    clearance = ResponseCurve.constant(13.0)
    chain = DetectionChain(clearance_a=clearance, clearance_b=clearance)
    assert np.allclose(dark_noise_level(chain, grid, np.ones(2), np.ones(2)), 0.050119, atol=1e-6)
    noisy = apply_dark_noise(spectra, chain)
    assert np.allclose(noisy.var_xsum, 0.52386, atol=1e-5)
    subtracted = DetectionChain(clearance_a=clearance, clearance_b=clearance, dark_noise_subtracted=True)
    assert np.allclose(apply_dark_noise(spectra, subtracted).var_xsum, 0.5)


def test_dark_noise_weighted_by_gains() -> None:
    grid = FrequencyGrid.from_points([1e6, 2e6])
    chain = DetectionChain(clearance_a=ResponseCurve.constant(10.0), clearance_b=None)
    level = dark_noise_level(chain, grid, np.full(2, 2.0), np.ones(2))
    assert np.allclose(level, 0.1 * 4.0 / 5.0)


def test_clearance_gap_names_frequency() -> None:
    grid = FrequencyGrid.from_points([10e6, 200e6])
    clearance = ResponseCurve.from_points([(1e6, 13.0), (100e6, 10.0)])
    chain = DetectionChain(clearance_a=clearance, clearance_b=clearance)
    with pytest.raises(CurveCoverageError, match="2e\\+08"):
        dark_noise_level(chain, grid, np.ones(2), np.ones(2))


def test_curve_interpolates_in_log_frequency() -> None:
    curve = ResponseCurve.from_points([(100e6, 10.0), (1e6, 0.0)])
    assert curve.frequencies_hz == (1e6, 100e6)
    assert curve.evaluate(np.array([10e6]))[0] == pytest.approx(5.0)
    assert curve.evaluate(np.array([500e6]), extrapolate=True)[0] == pytest.approx(10.0)
    with pytest.raises(CurveCoverageError):
        curve.evaluate(np.array([500e6]))
    assert curve.shifted(-3.0).values_db == (-3.0, 7.0)
    assert np.allclose(ResponseCurve.constant(2.0).amplitude(np.array([1.0, 1e9])), 10 ** 0.1)


def test_curve_validation() -> None:
    with pytest.raises(ValueError):
        ResponseCurve((1e6, 1e6), (0.0, 1.0))
    with pytest.raises(ValueError):
        ResponseCurve((), ())
    with pytest.raises(ValueError):
        gain_from_lo_power(0.0)


def test_measured_clearance_anchors() -> None:
    curve = measured_clearance_curve()
    values = curve.evaluate(np.array([1e6, 300e6, 900e6, 1.2e9, 1.48e9]))
    assert np.allclose(values, [13.0, 13.0, 5.0, 7.0, 7.0])


def test_curve_from_csv(tmp_path) -> None:
    path = tmp_path / "clearance.csv"
    path.write_text("frequency_hz,value_db\n1e9,7\n1e6,13\n", encoding="utf-8")
    curve = ResponseCurve.from_csv(path)
    assert curve.to_points() == [[1e6, 13.0], [1e9, 7.0]]


def test_normalize_curve_rows_rejects_bad_rows() -> None:
    with pytest.raises(ValueError, match="Invalid curve row"):
        normalize_curve_rows([{"frequency_hz": "1e6", "value_db": "n/a"}])


@pytest.mark.parametrize("seed", range(4))
def test_joint_variances_depend_only_on_the_gain_ratio(seed: int) -> None:
    rng = np.random.default_rng(seed)
    model = OpaSpectrumModel(GAMMA, float(rng.uniform(0.1, 0.9)))
    cov = apply_uniform_loss(entangle(EntanglerConfig(model, model), FrequencyGrid.linear(1e6, 2e9, 16)), 0.7)
    gain_a, gain_b = rng.uniform(0.2, 5.0, size=16), rng.uniform(0.2, 5.0, size=16)
    scale = float(rng.uniform(1e-3, 1e3))
    reference = joint_variances_with_gains(cov, gain_a, gain_b)
    scaled = joint_variances_with_gains(cov, scale * gain_a, scale * gain_b)
    np.testing.assert_allclose(scaled.var_xsum, reference.var_xsum, rtol=1e-12)
    np.testing.assert_allclose(scaled.var_ydiff, reference.var_ydiff, rtol=1e-12)


@pytest.mark.parametrize("ratio", [0.25, 0.8, 1.05, 1.2, math.sqrt(2.0), 4.0])
def test_gain_imbalance_never_lowers_the_joint_variance(ratio: float) -> None:
    """Balanced detection is optimal for a symmetric entangled state."""
    rng = np.random.default_rng(7)
    vs = rng.uniform(0.05, 1.0, size=8)
    va = rng.uniform(1.0, 30.0, size=8)
    for index in range(vs.size):
        cov = _symmetric_state(float(vs[index]), float(va[index]))
        balanced = joint_variances_with_gains(cov, 1.0, 1.0)
        imbalanced = joint_variances_with_gains(cov, ratio, 1.0)
        assert np.all(imbalanced.var_xsum >= balanced.var_xsum)
        assert np.all(imbalanced.var_ydiff >= balanced.var_ydiff)


@pytest.mark.parametrize("clearance_db", [0.0, 3.0, 7.0, 13.0, 25.0])
def test_dark_noise_leaves_vacuum_at_one(clearance_db: float) -> None:
    grid = FrequencyGrid.linear(1e6, 1.48e9, 10)
    ones = np.ones(len(grid))
    vacuum = JointQuadratureSpectra(grid, ones, ones, ones, np.full(len(grid), 1.5))
    chain = DetectionChain(
        clearance_a=ResponseCurve.constant(clearance_db), clearance_b=ResponseCurve.constant(clearance_db + 2.0)
    )
    measured = apply_dark_noise(vacuum, chain)
    np.testing.assert_allclose(measured.var_xsum, 1.0, rtol=1e-15)
    np.testing.assert_allclose(measured.var_ydiff, 1.0, rtol=1e-15)
