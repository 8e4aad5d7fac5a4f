"""Figures of merit for a two-mirror standing-wave (monolithic) cavity."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

from scipy import constants

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = constants.c


class CavityError(ValueError):
    """Raised when a cavity geometry cannot produce finite figures of merit."""


@dataclass(frozen=True)
class CavityGeometry:
    """Mirror reflectivities and optical length of the resonator at one wavelength.

    ``r1`` is the input/back face, ``r2`` the output coupler. ``round_trip_loss``
    is the power fraction lost to absorption and scatter per round trip.
    """

    length: float
    refractive_index: float
    r1: float
    r2: float
    round_trip_loss: float = 0.0

    def __post_init__(self) -> None:
        if not self.length > 0.0:
            raise CavityError("Cavity length must be positive")
        if self.refractive_index < 1.0:
            raise CavityError("Refractive index must be at least 1")
        for name in ("r1", "r2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise CavityError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 <= self.round_trip_loss < 1.0:
            raise CavityError("round_trip_loss must lie in [0, 1)")
        if self.r1 * self.r2 * (1.0 - self.round_trip_loss) >= 1.0:
            raise CavityError("Lossless cavity has no finite finesse")


@dataclass(frozen=True)
class CavityFigures:
    fsr: float
    finesse: float
    fwhm: float
    hwhm: float
    buildup: float
    escape_efficiency: float

    def to_dict(self) -> dict:
        return asdict(self)


def absorption_round_trip_loss(length: float, alpha_ppm_per_cm: float) -> float:
    """Double-pass absorption loss for a crystal of ``length`` metres."""
    return 2.0 * (length * 100.0) * alpha_ppm_per_cm * 1e-6


def _round_trip_amplitude(geom: CavityGeometry) -> float:
    rho = math.sqrt(geom.r1 * geom.r2 * (1.0 - geom.round_trip_loss))
    if rho >= 1.0:
        raise CavityError("Round-trip amplitude factor must be below 1")
    return rho


def free_spectral_range(geom: CavityGeometry) -> float:
    """Longitudinal mode spacing c/(2nL) in Hz."""
    return SPEED_OF_LIGHT / (2.0 * geom.refractive_index * geom.length)


def finesse(geom: CavityGeometry) -> float:
    rho = _round_trip_amplitude(geom)
    return math.pi * math.sqrt(rho) / (1.0 - rho)


def linewidth_fwhm(geom: CavityGeometry) -> float:
    value = finesse(geom)
    if value == 0.0:
        raise CavityError("Linewidth undefined for zero finesse")
    return free_spectral_range(geom) / value


def power_buildup(geom: CavityGeometry) -> float:
    """Circulating power over input power through face ``r1`` on resonance."""
    if geom.r1 >= 1.0:
        raise CavityError("Buildup requires a transmitting input coupler (r1 < 1)")
    rho = _round_trip_amplitude(geom)
    return (1.0 - geom.r1) / (1.0 - rho) ** 2


def circulating_power(geom: CavityGeometry, input_power: float) -> float:
    return input_power * power_buildup(geom)


def escape_efficiency(geom: CavityGeometry) -> float:
    """Fraction of the intracavity loss rate leaving through the output coupler ``r2``."""
    t_out = 1.0 - geom.r2
    denominator = t_out + (1.0 - geom.r1) + geom.round_trip_loss
    if denominator == 0.0:
        raise CavityError("Escape efficiency undefined for a lossless cavity")
    return t_out / denominator


def cavity_figures(geom: CavityGeometry) -> CavityFigures:
    """Evaluate every figure of merit for one geometry."""
    fsr = free_spectral_range(geom)
    fwhm = linewidth_fwhm(geom)
    buildup = power_buildup(geom) if geom.r1 < 1.0 else math.nan
    figures = CavityFigures(
        fsr=fsr,
        finesse=finesse(geom),
        fwhm=fwhm,
        hwhm=fwhm / 2.0,
        buildup=buildup,
        escape_efficiency=escape_efficiency(geom),
    )
    logger.debug("Cavity figures for %s: %s", geom, figures)
    return figures
