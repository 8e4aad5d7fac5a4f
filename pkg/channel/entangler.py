"""Two squeezers on a beam splitter, followed by optical loss."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from opa.spectrum import OpaSpectrumModel, anti_squeezed_variance, squeezed_variance
from quadrature.covariance import TwoModeCovarianceSpectrum
from quadrature.grid import FrequencyGrid

logger = logging.getLogger(__name__)


class ChannelError(ValueError):
    """Raised for invalid entangler or detection settings."""


@dataclass(frozen=True)
class EntanglerConfig:
    """Source A is squeezed in X; source B is rotated by ``relative_phase`` before mixing."""

    source_a: OpaSpectrumModel
    source_b: OpaSpectrumModel
    relative_phase: float = math.pi / 2.0
    beam_splitter_reflectivity: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.beam_splitter_reflectivity < 1.0:
            raise ChannelError("Beam splitter reflectivity must lie in (0, 1)")


def _rotation(phase: float) -> np.ndarray:
    c, s = math.cos(phase), math.sin(phase)
    return np.array([[c, -s], [s, c]])


def beam_splitter_transform(reflectivity: float) -> np.ndarray:
    """Map (X1, Y1, X2, Y2) to (X_A, Y_A, X_B, Y_B): A = t·a1 + r·a2, B = r·a1 − t·a2."""
    t = math.sqrt(1.0 - reflectivity)
    r = math.sqrt(reflectivity)
    return np.kron(np.array([[t, r], [r, -t]]), np.eye(2))


def _source_block(model: OpaSpectrumModel, omega: np.ndarray, phase: float) -> np.ndarray:
    blocks = np.zeros((omega.size, 2, 2))
    blocks[:, 0, 0] = squeezed_variance(model, omega)
    blocks[:, 1, 1] = anti_squeezed_variance(model, omega)
    rotation = _rotation(phase)
    return rotation @ blocks @ rotation.T


def entangle(config: EntanglerConfig, grid: FrequencyGrid) -> TwoModeCovarianceSpectrum:
    """Covariance spectrum at the two beam-splitter outputs."""
    omega = grid.points
    inputs = np.zeros((omega.size, 4, 4))
    inputs[:, :2, :2] = _source_block(config.source_a, omega, 0.0)
    inputs[:, 2:, 2:] = _source_block(config.source_b, omega, config.relative_phase)
    transform = beam_splitter_transform(config.beam_splitter_reflectivity)
    outputs = transform @ inputs @ transform.T
    # Remove rounding asymmetry left by the matrix products.
    outputs = 0.5 * (outputs + np.swapaxes(outputs, 1, 2))
    return TwoModeCovarianceSpectrum(grid, outputs)


def apply_uniform_loss(
    cov: TwoModeCovarianceSpectrum, efficiency_a: float, efficiency_b: Optional[float] = None
) -> TwoModeCovarianceSpectrum:
    """Beam-splitter loss per mode: C' = S·C·S + (I − S²), S = diag(√η_A, √η_A, √η_B, √η_B)."""
    efficiency_b = efficiency_a if efficiency_b is None else efficiency_b
    for name, value in (("efficiency_a", efficiency_a), ("efficiency_b", efficiency_b)):
        if not 0.0 <= value <= 1.0:
            raise ChannelError(f"{name} must lie in [0, 1], got {value}")
    scale = np.sqrt(np.array([efficiency_a, efficiency_a, efficiency_b, efficiency_b]))
    matrices = cov.matrices * np.outer(scale, scale) + np.diag(1.0 - scale**2)
    return TwoModeCovarianceSpectrum(cov.grid, matrices)


def efficiency_budget(overlap: float, path: float, quantum_efficiency: float) -> float:
    """Total detection efficiency as the product of its contributions."""
    for name, value in (("overlap", overlap), ("path", path), ("quantum_efficiency", quantum_efficiency)):
        if not 0.0 <= value <= 1.0:
            raise ChannelError(f"{name} must lie in [0, 1], got {value}")
    return overlap * path * quantum_efficiency
