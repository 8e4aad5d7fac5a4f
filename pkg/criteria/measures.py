"""Entanglement measures: Duan inseparability, two-mode squeezing and Reid EPR."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from channel.detection import JointQuadratureSpectra
from quadrature.covariance import TwoModeCovarianceSpectrum
from quadrature.grid import FrequencyGrid

logger = logging.getLogger(__name__)

INSEPARABILITY_THRESHOLD = 4.0
EPR_DUAN_THRESHOLD = 2.0


class CriteriaError(ValueError):
    """Raised when a measure is undefined for the given input."""


@dataclass(frozen=True)
class CriteriaSpectrum:
    """Duan value, two-mode squeezing and Reid product on one grid.

    ``reid_product`` is NaN where no covariance was available (empirical spectra).
    """

    grid: FrequencyGrid
    duan: np.ndarray
    tms_db: np.ndarray
    reid_product: np.ndarray

    def __post_init__(self) -> None:
        if np.any(~(self.duan > 0.0)):
            raise CriteriaError("Duan values must be positive")

    @property
    def entangled(self) -> np.ndarray:
        return self.duan < INSEPARABILITY_THRESHOLD

    @property
    def epr_by_duan_symmetric(self) -> np.ndarray:
        return self.duan < EPR_DUAN_THRESHOLD

    @property
    def epr_by_reid(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.reid_product < 1.0


@dataclass(frozen=True)
class Band:
    start_hz: float
    stop_hz: float

    @property
    def width_hz(self) -> float:
        return self.stop_hz - self.start_hz

    def to_list(self) -> List[float]:
        return [self.start_hz, self.stop_hz]


@dataclass(frozen=True)
class ClassificationSummary:
    entangled_band: Optional[Band]
    epr_band: Optional[Band]
    min_duan: Tuple[float, float]
    entangled_bands: List[Band] = field(default_factory=list)
    epr_bands: List[Band] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "entangled_band_hz": self.entangled_band.to_list() if self.entangled_band else None,
            "epr_band_hz": self.epr_band.to_list() if self.epr_band else None,
            "min_duan": {"value": self.min_duan[0], "frequency_hz": self.min_duan[1]},
            "entangled_bands_hz": [band.to_list() for band in self.entangled_bands],
            "epr_bands_hz": [band.to_list() for band in self.epr_bands],
        }


def duan_value(spectra: Union[JointQuadratureSpectra, TwoModeCovarianceSpectrum]) -> np.ndarray:
    """Δ²(X_A+X_B) + Δ²(Y_A−Y_B) in vacuum units (vacuum gives 4)."""
    if isinstance(spectra, JointQuadratureSpectra):
        return 2.0 * (spectra.var_xsum + spectra.var_ydiff)
    cov = spectra
    xsum = cov.var_xa + cov.var_xb + 2.0 * cov.cov_x
    ydiff = cov.var_ya + cov.var_yb - 2.0 * cov.cov_y
    return xsum + ydiff


def tms_db(duan: np.ndarray) -> np.ndarray:
    """Two-mode squeezing in dB, −10·log10(D/4)."""
    duan = np.asarray(duan, dtype=float)
    if np.any(~(duan > 0.0)):
        raise CriteriaError("Two-mode squeezing requires positive Duan values")
    result = -10.0 * np.log10(duan / INSEPARABILITY_THRESHOLD)
    return float(result) if result.ndim == 0 else result


def reid_epr_product(cov: TwoModeCovarianceSpectrum) -> np.ndarray:
    """Product of conditional variances V(X_A|X_B)·V(Y_A|Y_B) under optimal linear inference."""
    if np.any(cov.var_xb <= 0.0) or np.any(cov.var_yb <= 0.0):
        raise CriteriaError("Conditioning variances of mode B must be positive")
    conditional_x = cov.var_xa - cov.cov_x**2 / cov.var_xb
    conditional_y = cov.var_ya - cov.cov_y**2 / cov.var_yb
    return conditional_x * conditional_y


def criteria_spectrum(
    joint: Union[JointQuadratureSpectra, TwoModeCovarianceSpectrum],
    cov: Optional[TwoModeCovarianceSpectrum] = None,
) -> CriteriaSpectrum:
    """Assemble all measures; the Reid product needs the optical covariance."""
    duan = duan_value(joint)
    if cov is None and isinstance(joint, TwoModeCovarianceSpectrum):
        cov = joint
    reid = reid_epr_product(cov) if cov is not None else np.full(duan.shape, np.nan)
    return CriteriaSpectrum(joint.grid, duan, tms_db(duan), reid)


def _crossing(f_a: float, f_b: float, d_a: float, d_b: float, threshold: float) -> float:
    if d_b == d_a:
        return f_a
    return f_a + (threshold - d_a) * (f_b - f_a) / (d_b - d_a)


def extract_bands(grid: FrequencyGrid, values: np.ndarray, threshold: float) -> List[Band]:
    """Contiguous runs below ``threshold`` with linearly interpolated edges."""
    frequencies = grid.points
    below = np.asarray(values) < threshold
    bands: List[Band] = []
    index = 0
    last = len(frequencies) - 1
    while index <= last:
        if not below[index]:
            index += 1
            continue
        first = index
        while index < last and below[index + 1]:
            index += 1
        start = frequencies[0] if first == 0 else _crossing(
            frequencies[first - 1], frequencies[first], values[first - 1], values[first], threshold
        )
        stop = frequencies[last] if index == last else _crossing(
            frequencies[index], frequencies[index + 1], values[index], values[index + 1], threshold
        )
        bands.append(Band(float(start), float(stop)))
        index += 1
    return bands


def classify(criteria: CriteriaSpectrum) -> ClassificationSummary:
    """Entangled and EPR bands plus the minimum Duan value."""
    if len(criteria.grid) == 0:
        raise CriteriaError("Cannot classify an empty spectrum")
    entangled = extract_bands(criteria.grid, criteria.duan, INSEPARABILITY_THRESHOLD)
    epr = extract_bands(criteria.grid, criteria.duan, EPR_DUAN_THRESHOLD)
    position = int(np.argmin(criteria.duan))
    summary = ClassificationSummary(
        entangled_band=max(entangled, key=lambda band: band.width_hz) if entangled else None,
        epr_band=max(epr, key=lambda band: band.width_hz) if epr else None,
        min_duan=(float(criteria.duan[position]), float(criteria.grid.points[position])),
        entangled_bands=entangled,
        epr_bands=epr,
    )
    logger.debug("Classification: %s", summary.to_dict())
    return summary
