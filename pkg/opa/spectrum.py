"""Below-threshold parametric amplifier quadrature spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from quadrature.covariance import QuadratureVariance

ArrayLike = Union[float, np.ndarray]


class OpaError(ValueError):
    """Raised for pump settings at or above the oscillation threshold."""


@dataclass(frozen=True)
class OpaSpectrumModel:
    """Single squeezer: cavity half linewidth (Hz), pump ratio and escape efficiency."""

    gamma_hwhm: float
    pump_ratio_x: float
    escape_efficiency: float = 1.0

    def __post_init__(self) -> None:
        if not self.gamma_hwhm > 0.0:
            raise OpaError("gamma_hwhm must be positive")
        if not 0.0 <= self.pump_ratio_x < 1.0:
            raise OpaError(f"Pump ratio must satisfy 0 <= x < 1, got {self.pump_ratio_x}")
        if not 0.0 <= self.escape_efficiency <= 1.0:
            raise OpaError("escape_efficiency must lie in [0, 1]")

    def variances_at(self, omega: float) -> Tuple[QuadratureVariance, QuadratureVariance]:
        """Squeezed and anti-squeezed variance at one sideband frequency."""
        return (
            QuadratureVariance(float(squeezed_variance(self, omega))),
            QuadratureVariance(float(anti_squeezed_variance(self, omega))),
        )


def _detuning_squared(model: OpaSpectrumModel, omega: ArrayLike) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0.0):
        raise OpaError("Sideband frequency must be non-negative")
    return (omega / model.gamma_hwhm) ** 2


def squeezed_variance(model: OpaSpectrumModel, omega: ArrayLike) -> ArrayLike:
    x = model.pump_ratio_x
    value = 1.0 - model.escape_efficiency * 4.0 * x / ((1.0 + x) ** 2 + _detuning_squared(model, omega))
    return float(value) if np.ndim(value) == 0 else value


def anti_squeezed_variance(model: OpaSpectrumModel, omega: ArrayLike) -> ArrayLike:
    x = model.pump_ratio_x
    value = 1.0 + model.escape_efficiency * 4.0 * x / ((1.0 - x) ** 2 + _detuning_squared(model, omega))
    return float(value) if np.ndim(value) == 0 else value


def pump_ratio(pump_power: float, threshold_power: float) -> float:
    """Normalized pump amplitude x = sqrt(P/P_thr)."""
    if not threshold_power > 0.0:
        raise OpaError("Threshold power must be positive")
    if pump_power < 0.0:
        raise OpaError("Pump power must be non-negative")
    if pump_power >= threshold_power:
        raise OpaError(
            f"Pump power {pump_power} W is at or above threshold {threshold_power} W"
        )
    return math.sqrt(pump_power / threshold_power)
