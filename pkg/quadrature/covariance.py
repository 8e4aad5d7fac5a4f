"""Two-mode covariance spectra in the (X_A, Y_A, X_B, Y_B) ordering.

Vacuum has unit variance in every quadrature, so the vacuum covariance is the
4×4 identity and the Duan threshold is 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .grid import FrequencyGrid

SYMMETRY_RTOL = 1e-12
UNCERTAINTY_TOL = 1e-9

# Standard two-mode symplectic form for (X_A, Y_A, X_B, Y_B).
SYMPLECTIC_FORM = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)

_PARTIAL_TRANSPOSE = np.diag([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class QuadratureVariance:
    """Single-quadrature variance in vacuum units."""

    value: float

    def __post_init__(self) -> None:
        if not self.value > 0.0:
            raise ValueError(f"Quadrature variance must be positive, got {self.value!r}")


@dataclass(frozen=True)
class TwoModeCovarianceSpectrum:
    """Per-frequency 4×4 covariance matrices sharing one grid."""

    grid: FrequencyGrid
    matrices: np.ndarray

    def __post_init__(self) -> None:
        matrices = np.array(self.matrices, dtype=float)
        if matrices.shape != (len(self.grid), 4, 4):
            raise ValueError(
                f"Expected matrices of shape ({len(self.grid)}, 4, 4), got {matrices.shape}"
            )
        matrices.setflags(write=False)
        object.__setattr__(self, "matrices", matrices)

    def element(self, row: int, column: int) -> np.ndarray:
        """Return one covariance entry across the whole grid."""
        return self.matrices[:, row, column]

    @property
    def var_xa(self) -> np.ndarray:
        return self.element(0, 0)

    @property
    def var_ya(self) -> np.ndarray:
        return self.element(1, 1)

    @property
    def var_xb(self) -> np.ndarray:
        return self.element(2, 2)

    @property
    def var_yb(self) -> np.ndarray:
        return self.element(3, 3)

    @property
    def cov_x(self) -> np.ndarray:
        return self.element(0, 2)

    @property
    def cov_y(self) -> np.ndarray:
        return self.element(1, 3)


@dataclass(frozen=True)
class CovarianceFailure:
    index: int
    frequency_hz: float
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    failures: List[CovarianceFailure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def vacuum_covariance(grid: FrequencyGrid) -> TwoModeCovarianceSpectrum:
    """Identity covariance at every grid frequency."""
    return TwoModeCovarianceSpectrum(grid, np.broadcast_to(np.eye(4), (len(grid), 4, 4)))


def symplectic_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Return the two symplectic eigenvalues of a 4×4 covariance, ascending."""
    moduli = np.abs(np.linalg.eigvals(SYMPLECTIC_FORM @ matrix).imag)
    moduli.sort()
    # Eigenvalues come in ±iν pairs.
    return moduli[::2]


def partial_transpose(matrix: np.ndarray) -> np.ndarray:
    """Mirror Y_B (time reversal of mode B) on a 4×4 covariance."""
    return _PARTIAL_TRANSPOSE @ matrix @ _PARTIAL_TRANSPOSE


def validate_covariance(cov: TwoModeCovarianceSpectrum) -> ValidationReport:
    """Check symmetry, positive definiteness and the uncertainty bound per frequency."""
    failures: List[CovarianceFailure] = []
    for index, (frequency, matrix) in enumerate(zip(cov.grid.points, cov.matrices)):
        frequency = float(frequency)
        if not np.all(np.isfinite(matrix)):
            failures.append(CovarianceFailure(index, frequency, "non_finite", "matrix has non-finite entries"))
            continue
        scale = float(np.max(np.abs(matrix))) or 1.0
        asymmetry = float(np.max(np.abs(matrix - matrix.T)))
        if asymmetry > SYMMETRY_RTOL * scale:
            failures.append(
                CovarianceFailure(index, frequency, "asymmetric", f"max |C - C^T| = {asymmetry:.3e}")
            )
            continue
        eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
        if eigenvalues[0] <= 0.0:
            failures.append(
                CovarianceFailure(
                    index, frequency, "not_positive_definite", f"smallest eigenvalue {eigenvalues[0]:.3e}"
                )
            )
            continue
        nu = symplectic_eigenvalues(matrix)
        if nu[0] < 1.0 - UNCERTAINTY_TOL:
            failures.append(
                CovarianceFailure(
                    index, frequency, "uncertainty_bound", f"symplectic eigenvalue {nu[0]:.6g} < 1"
                )
            )
    return ValidationReport(failures)
