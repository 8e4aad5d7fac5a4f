"""Frequency-dependent detector curves in dB (gains and dark-noise clearances)."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class CurveCoverageError(ValueError):
    """Raised when a curve is evaluated outside its tabulated frequency range."""


@dataclass(frozen=True)
class ResponseCurve:
    """Piecewise-linear curve in (log-frequency, dB).

    A curve with a single point is constant at every frequency.
    """

    frequencies_hz: Tuple[float, ...]
    values_db: Tuple[float, ...]

    def __post_init__(self) -> None:
        frequencies = tuple(float(value) for value in self.frequencies_hz)
        values = tuple(float(value) for value in self.values_db)
        if not frequencies or len(frequencies) != len(values):
            raise ValueError("Curve needs matching, non-empty frequency and value columns")
        if any(value <= 0.0 for value in frequencies):
            raise ValueError("Curve frequencies must be positive")
        if any(b <= a for a, b in zip(frequencies, frequencies[1:])):
            raise ValueError("Curve frequencies must be strictly increasing")
        if not all(np.isfinite(values)):
            raise ValueError("Curve values must be finite")
        object.__setattr__(self, "frequencies_hz", frequencies)
        object.__setattr__(self, "values_db", values)

    @classmethod
    def constant(cls, value_db: float) -> "ResponseCurve":
        return cls((1.0,), (value_db,))

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]]) -> "ResponseCurve":
        rows = sorted((float(f), float(v)) for f, v in points)
        return cls(tuple(f for f, _ in rows), tuple(v for _, v in rows))

    @classmethod
    def from_csv(cls, path: Path) -> "ResponseCurve":
        """Load a curve from a CSV file with ``frequency_hz,value_db`` columns."""
        with Path(path).open("r", encoding="utf-8", newline="") as handle:
            rows = normalize_curve_rows(csv.DictReader(handle))
        logger.debug("Loaded %d curve points from %s", len(rows), path)
        return cls.from_points(rows)

    @property
    def is_constant(self) -> bool:
        return len(self.frequencies_hz) == 1

    def shifted(self, offset_db: float) -> "ResponseCurve":
        return ResponseCurve(self.frequencies_hz, tuple(v + offset_db for v in self.values_db))

    def covers(self, frequencies: np.ndarray) -> bool:
        if self.is_constant:
            return True
        frequencies = np.asarray(frequencies, dtype=float)
        return bool(
            np.all(frequencies >= self.frequencies_hz[0]) and np.all(frequencies <= self.frequencies_hz[-1])
        )

    def evaluate(self, frequencies: np.ndarray, extrapolate: bool = False) -> np.ndarray:
        """Interpolate the curve in dB; outside the table either hold the edge value or raise."""
        frequencies = np.asarray(frequencies, dtype=float)
        if self.is_constant:
            return np.full(frequencies.shape, self.values_db[0])
        if not extrapolate:
            outside = (frequencies < self.frequencies_hz[0]) | (frequencies > self.frequencies_hz[-1])
            if np.any(outside):
                first = float(frequencies[outside].ravel()[0])
                raise CurveCoverageError(
                    f"Curve covers {self.frequencies_hz[0]:.6g}-{self.frequencies_hz[-1]:.6g} Hz "
                    f"but was evaluated at {first:.6g} Hz"
                )
        safe = np.clip(frequencies, self.frequencies_hz[0], self.frequencies_hz[-1])
        return np.interp(np.log(safe), np.log(self.frequencies_hz), self.values_db)

    def amplitude(self, frequencies: np.ndarray, extrapolate: bool = False) -> np.ndarray:
        """Amplitude factor 10^(dB/20), used for detector gains."""
        return np.power(10.0, self.evaluate(frequencies, extrapolate) / 20.0)

    def power(self, frequencies: np.ndarray, extrapolate: bool = False) -> np.ndarray:
        return np.power(10.0, self.evaluate(frequencies, extrapolate) / 10.0)

    def to_points(self) -> List[List[float]]:
        return [[f, v] for f, v in zip(self.frequencies_hz, self.values_db)]


def normalize_curve_rows(rows: Iterable[Mapping[str, object]]) -> List[Tuple[float, float]]:
    """Coerce raw CSV rows into sorted ``(frequency_hz, value_db)`` pairs."""
    normalized = []
    for row in rows:
        try:
            normalized.append((float(row["frequency_hz"]), float(row["value_db"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"Invalid curve row: {dict(row)}") from exc
    normalized.sort(key=lambda item: item[0])
    return normalized


def gain_from_lo_power(lo_power_mw: float, reference_mw: float = 1.0) -> ResponseCurve:
    """Homodyne amplitude gain scales with the square root of the LO power."""
    if not lo_power_mw > 0.0:
        raise ValueError("LO power must be positive")
    return ResponseCurve.constant(10.0 * np.log10(lo_power_mw / reference_mw))


def measured_clearance_curve(start_hz: float = 0.3e6, stop_hz: float = 1.5e9) -> ResponseCurve:
    """Combined dark-noise clearance read off the detector characterization.

    About 13 dB up to 300 MHz, 5 dB at 900 MHz and 7 dB from 1 to 1.5 GHz.
    """
    anchors: List[Tuple[float, float]] = [
        (start_hz, 13.0),
        (300e6, 13.0),
        (900e6, 5.0),
        (1.0e9, 7.0),
        (stop_hz, 7.0),
    ]
    return ResponseCurve.from_points(anchors)


def optional_shift(curve: Optional[ResponseCurve], offset_db: float) -> Optional[ResponseCurve]:
    return None if curve is None else curve.shifted(offset_db)
