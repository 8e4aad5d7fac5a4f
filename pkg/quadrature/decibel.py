"""Decibel conversions for power ratios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class DecibelValue:
    """A power ratio expressed as 10·log10(ratio)."""

    db: float

    @classmethod
    def from_ratio(cls, ratio: float) -> "DecibelValue":
        return cls(float(db_from_ratio(ratio)))

    @property
    def ratio(self) -> float:
        return float(ratio_from_db(self.db))


def db_from_ratio(ratio: ArrayLike) -> ArrayLike:
    """Convert a power ratio to decibels; non-positive ratios are rejected."""
    values = np.asarray(ratio, dtype=float)
    if np.any(~(values > 0.0)):
        raise ValueError(f"Power ratio must be positive, got {ratio!r}")
    result = 10.0 * np.log10(values)
    return float(result) if result.ndim == 0 else result


def ratio_from_db(db: ArrayLike) -> ArrayLike:
    """Convert decibels back to a power ratio."""
    result = np.power(10.0, np.asarray(db, dtype=float) / 10.0)
    return float(result) if result.ndim == 0 else result
