"""Balanced homodyne detection: gain imbalance and electronic dark noise."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from quadrature.covariance import TwoModeCovarianceSpectrum
from quadrature.decibel import DecibelValue
from quadrature.grid import FrequencyGrid

from .curves import CurveCoverageError, ResponseCurve
from .entangler import ChannelError, efficiency_budget

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionChain:
    """Optical efficiencies and the two detectors' gain and clearance curves.

    ``visibility`` is the mode-overlap amplitude visibility; it enters the
    efficiency budget squared. A clearance of ``None`` means no dark noise.
    """

    propagation_efficiency: float = 1.0
    visibility: float = 1.0
    quantum_efficiency: float = 1.0
    gain_a: ResponseCurve = ResponseCurve.constant(0.0)
    gain_b: ResponseCurve = ResponseCurve.constant(0.0)
    clearance_a: Optional[ResponseCurve] = None
    clearance_b: Optional[ResponseCurve] = None
    dark_noise_subtracted: bool = False

    def __post_init__(self) -> None:
        for name in ("propagation_efficiency", "visibility", "quantum_efficiency"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ChannelError(f"{name} must lie in [0, 1], got {value}")

    @classmethod
    def with_total_efficiency(cls, eta_total: float, **kwargs: object) -> "DetectionChain":
        """Lump every optical loss into the propagation efficiency."""
        return cls(propagation_efficiency=eta_total, visibility=1.0, quantum_efficiency=1.0, **kwargs)

    @property
    def mode_overlap_efficiency(self) -> float:
        return self.visibility**2

    @property
    def total_efficiency(self) -> float:
        return efficiency_budget(self.mode_overlap_efficiency, self.propagation_efficiency, self.quantum_efficiency)

    def gains(self, grid: FrequencyGrid) -> Tuple[np.ndarray, np.ndarray]:
        """Amplitude gains of detectors A and B across the grid."""
        return self.gain_a.amplitude(grid.points), self.gain_b.amplitude(grid.points)

    def with_gain_ratio(self, ratio: float) -> "DetectionChain":
        """Replace both gain curves by a flat amplitude ratio g_A/g_B."""
        if not ratio > 0.0:
            raise ChannelError("Gain ratio must be positive")
        return replace(
            self, gain_a=ResponseCurve.constant(20.0 * np.log10(ratio)), gain_b=ResponseCurve.constant(0.0)
        )


@dataclass(frozen=True)
class JointQuadratureSpectra:
    """Δ²(X_A+X_B) and Δ²(Y_A−Y_B), each normalized so vacuum gives 1.

    The detector gains that produced the combination are kept so dark noise can
    be weighted the same way.
    """

    grid: FrequencyGrid
    var_xsum: np.ndarray
    var_ydiff: np.ndarray
    gain_a: np.ndarray
    gain_b: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.var_xsum <= 0.0) or np.any(self.var_ydiff <= 0.0):
            raise ChannelError("Joint quadrature variances must be positive")


def gain_ratio_from_imbalance(imbalance: DecibelValue) -> float:
    """Amplitude gain ratio g_A/g_B from a vacuum-level imbalance in dB."""
    return 10.0 ** (imbalance.db / 20.0)


def joint_variances_with_gains(
    cov: TwoModeCovarianceSpectrum, gain_a: np.ndarray, gain_b: np.ndarray
) -> JointQuadratureSpectra:
    """Combine the two homodyne outputs with unequal gains, normalized to the combined vacuum."""
    size = len(cov.grid)
    gain_a = np.broadcast_to(np.asarray(gain_a, dtype=float), (size,))
    gain_b = np.broadcast_to(np.asarray(gain_b, dtype=float), (size,))
    if np.any(gain_a <= 0.0) or np.any(gain_b <= 0.0):
        raise ChannelError("Detector gains must be positive")
    ga2, gb2, cross = gain_a**2, gain_b**2, 2.0 * gain_a * gain_b
    norm = ga2 + gb2
    var_xsum = (ga2 * cov.var_xa + gb2 * cov.var_xb + cross * cov.cov_x) / norm
    var_ydiff = (ga2 * cov.var_ya + gb2 * cov.var_yb - cross * cov.cov_y) / norm
    return JointQuadratureSpectra(cov.grid, var_xsum, var_ydiff, np.array(gain_a), np.array(gain_b))


def dark_noise_level(chain: DetectionChain, grid: FrequencyGrid, gain_a: np.ndarray, gain_b: np.ndarray) -> np.ndarray:
    """Combined dark-noise variance in units of the combined vacuum."""
    dark_a = _dark_variance(chain.clearance_a, grid)
    dark_b = _dark_variance(chain.clearance_b, grid)
    ga2, gb2 = np.asarray(gain_a) ** 2, np.asarray(gain_b) ** 2
    return (ga2 * dark_a + gb2 * dark_b) / (ga2 + gb2)


def _dark_variance(clearance: Optional[ResponseCurve], grid: FrequencyGrid) -> np.ndarray:
    if clearance is None:
        return np.zeros(len(grid))
    try:
        return np.power(10.0, -clearance.evaluate(grid.points) / 10.0)
    except CurveCoverageError as exc:
        raise CurveCoverageError(f"Clearance curve gap: {exc}") from exc


def apply_dark_noise(spectra: JointQuadratureSpectra, chain: DetectionChain) -> JointQuadratureSpectra:
    """Add dark noise to signal and vacuum traces alike, unless it is subtracted."""
    if chain.dark_noise_subtracted:
        return spectra
    dark = dark_noise_level(chain, spectra.grid, spectra.gain_a, spectra.gain_b)
    return replace(
        spectra,
        var_xsum=(spectra.var_xsum + dark) / (1.0 + dark),
        var_ydiff=(spectra.var_ydiff + dark) / (1.0 + dark),
    )
