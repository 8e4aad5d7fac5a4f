"""Sideband frequency grids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


class GridError(ValueError):
    """Raised when a frequency grid violates its invariants."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing, positive sideband frequencies in Hz."""

    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float).ravel()
        if points.size < 2:
            raise GridError("Frequency grid needs at least 2 points")
        if not np.all(np.isfinite(points)) or np.any(points <= 0.0):
            raise GridError("Frequency grid entries must be finite and positive")
        if np.any(np.diff(points) <= 0.0):
            raise GridError("Frequency grid must be strictly increasing")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def linear(cls, start_hz: float, stop_hz: float, points: int) -> "FrequencyGrid":
        """Evenly spaced grid including both end points."""
        if points < 2:
            raise GridError("Frequency grid needs at least 2 points")
        return cls(np.linspace(start_hz, stop_hz, int(points)))

    @classmethod
    def from_points(cls, points: Iterable[float]) -> "FrequencyGrid":
        return cls(np.asarray(list(points), dtype=float))

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def spacing(self) -> float:
        """Largest gap between neighbouring points."""
        return float(np.max(np.diff(self.points)))

    def mask(self, start_hz: float, stop_hz: float) -> np.ndarray:
        """Boolean mask of points inside the closed interval [start_hz, stop_hz]."""
        return (self.points >= start_hz) & (self.points <= stop_hz)

    def to_list(self) -> list:
        return [float(value) for value in self.points]
