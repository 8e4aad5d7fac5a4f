"""Oscillation threshold of a singly focused parametric resonator.

Single-pass parametric gain uses the Gaussian-beam focusing reduction h(ξ) at
zero walk-off with the focus centred in the crystal.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

from scipy import constants, integrate, optimize

logger = logging.getLogger(__name__)


class ThresholdError(ValueError):
    """Raised for threshold inputs that cannot yield a finite threshold."""


class ThresholdFailure(RuntimeError):
    """Raised when valid inputs still evaluate to no usable parametric coupling."""


@dataclass(frozen=True)
class ThresholdInputs:
    """Crystal, focusing and loss parameters in SI units (m, m/V, 1/m, W)."""

    waist_signal: float
    waist_pump: float
    d_eff: float
    crystal_length: float
    n_signal: float
    n_pump: float
    alpha_signal: float
    alpha_pump: float
    output_transmission: float
    extra_loss: float
    pump_buildup: float
    wavelength_signal: float = 1550e-9

    def __post_init__(self) -> None:
        for name in (
            "waist_signal",
            "waist_pump",
            "d_eff",
            "crystal_length",
            "n_signal",
            "n_pump",
            "output_transmission",
            "pump_buildup",
            "wavelength_signal",
        ):
            if not getattr(self, name) > 0.0:
                raise ThresholdError(f"{name} must be positive")
        for name in ("alpha_signal", "alpha_pump", "extra_loss"):
            if getattr(self, name) < 0.0:
                raise ThresholdError(f"{name} must be non-negative")
        if self.output_transmission + self.signal_round_trip_loss >= 1.0:
            raise ThresholdError("Output transmission plus signal losses must stay below 1")

    @property
    def signal_round_trip_loss(self) -> float:
        """Extra signal loss including double-pass absorption."""
        return self.extra_loss + 2.0 * self.crystal_length * self.alpha_signal

    @property
    def wavelength_pump(self) -> float:
        return self.wavelength_signal / 2.0


@dataclass(frozen=True)
class ThresholdResult:
    e_nl: float
    p_thr_circulating: float
    p_thr_input: float
    focusing_xi: float
    focusing_h: float
    rayleigh_range_signal: float
    rayleigh_range_pump: float

    def to_dict(self) -> dict:
        return asdict(self)


def boyd_kleinman_h(xi: float, sigma: float = 0.0) -> float:
    """Focusing function (1/(4ξ))·|∫_{-ξ}^{ξ} e^{iστ}/(1+iτ) dτ|².

    ``sigma`` is the normalized phase mismatch; zero walk-off and a centred
    focus are assumed.
    """
    if not xi > 0.0:
        raise ThresholdError(f"Focusing parameter must be positive, got {xi}")

    def real_part(tau: float) -> float:
        return (math.cos(sigma * tau) + tau * math.sin(sigma * tau)) / (1.0 + tau * tau)

    def imag_part(tau: float) -> float:
        return (math.sin(sigma * tau) - tau * math.cos(sigma * tau)) / (1.0 + tau * tau)

    options = {"epsabs": 0.0, "epsrel": 1e-10, "limit": 200}
    real, _ = integrate.quad(real_part, -xi, xi, **options)
    imag, _ = integrate.quad(imag_part, -xi, xi, **options)
    return (real * real + imag * imag) / (4.0 * xi)


def optimal_phase_mismatch(xi: float) -> float:
    """Phase mismatch maximizing the focusing function at fixed ξ."""
    result = optimize.minimize_scalar(
        lambda sigma: -boyd_kleinman_h(xi, sigma), bounds=(0.0, 3.0), method="bounded"
    )
    return float(result.x)


def rayleigh_range(waist: float, index: float, wavelength: float) -> float:
    return math.pi * waist * waist * index / wavelength


def nonlinear_efficiency(inputs: ThresholdInputs) -> float:
    """Single-pass parametric coupling E_nl in 1/W."""
    wavelength = inputs.wavelength_signal
    omega = 2.0 * math.pi * constants.c / wavelength
    k_signal = 2.0 * math.pi * inputs.n_signal / wavelength
    z_r = rayleigh_range(inputs.waist_signal, inputs.n_signal, wavelength)
    h = boyd_kleinman_h(inputs.crystal_length / (2.0 * z_r))
    numerator = 2.0 * omega**2 * inputs.d_eff**2 * inputs.crystal_length * k_signal * h
    denominator = math.pi * constants.epsilon_0 * constants.c**3 * inputs.n_signal**2 * inputs.n_pump
    return numerator / denominator


def opo_threshold(inputs: ThresholdInputs) -> ThresholdResult:
    """Pump threshold where single-pass amplitude gain equals half the round-trip loss."""
    z_signal = rayleigh_range(inputs.waist_signal, inputs.n_signal, inputs.wavelength_signal)
    z_pump = rayleigh_range(inputs.waist_pump, inputs.n_pump, inputs.wavelength_pump)
    xi = inputs.crystal_length / (2.0 * z_signal)
    e_nl = nonlinear_efficiency(inputs)
    if not (math.isfinite(e_nl) and e_nl > 0.0):
        raise ThresholdFailure(f"Nonlinear efficiency evaluated to {e_nl!r} (xi={xi:.4g})")
    loss = inputs.output_transmission + inputs.signal_round_trip_loss
    circulating = (loss / 2.0) ** 2 / e_nl
    result = ThresholdResult(
        e_nl=e_nl,
        p_thr_circulating=circulating,
        p_thr_input=circulating / inputs.pump_buildup,
        focusing_xi=xi,
        focusing_h=boyd_kleinman_h(xi),
        rayleigh_range_signal=z_signal,
        rayleigh_range_pump=z_pump,
    )
    logger.info(
        "Threshold: %.1f W circulating, %.1f mW input (xi=%.3f, h=%.3f)",
        result.p_thr_circulating,
        result.p_thr_input * 1e3,
        xi,
        result.focusing_h,
    )
    return result
