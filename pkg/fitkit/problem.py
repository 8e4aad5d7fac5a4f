"""Fit problems: observed spectra, free parameters with bounds, and weighted residuals."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from analyzer.experiment import Experiment
from analyzer.sweep import BandSplit, SweepConfig, TraceSet, sweep
from quadrature.grid import FrequencyGrid

logger = logging.getLogger(__name__)

FREE_PARAMETER_NAMES = ("eta_total", "pump_ratio_x", "gamma_hwhm", "gain_ratio", "clearance_offset_db")
RESIDUAL_DOMAINS = ("db", "linear")
QUANTITIES = ("variances", "duan")
MIN_POINTS_PER_PARAMETER = 5
DB_PER_NEPER = 10.0 / math.log(10.0)


class FitProblemError(ValueError):
    """Raised for an ill-posed fit problem."""


class FitError(RuntimeError):
    """Raised when the model cannot be evaluated or the optimizer fails outright."""


@dataclass(frozen=True)
class ParameterBound:
    lower: float
    upper: float
    initial: Optional[float] = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise FitProblemError("Parameter bounds must be finite")
        if not self.lower < self.upper:
            raise FitProblemError(f"Lower bound {self.lower} must be below upper bound {self.upper}")
        if self.initial is not None and not self.lower < self.initial < self.upper:
            raise FitProblemError(f"Initial value {self.initial} lies outside ({self.lower}, {self.upper})")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def start(self) -> float:
        return 0.5 * (self.lower + self.upper) if self.initial is None else self.initial

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "initial": self.initial}


@dataclass(frozen=True)
class FitData:
    """Observed per-quadrature spectra in dB over the combined vacuum, with per-point σ in dB."""

    grid: FrequencyGrid
    var_xsum_db: np.ndarray
    var_ydiff_db: np.ndarray
    sigma_db: np.ndarray

    def __post_init__(self) -> None:
        size = len(self.grid)
        for name in ("var_xsum_db", "var_ydiff_db", "sigma_db"):
            values = np.array(np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (size,)))
            if not np.all(np.isfinite(values)):
                raise FitProblemError(f"{name} must be finite at every grid point")
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if np.any(self.sigma_db <= 0.0):
            raise FitProblemError("Per-point sigma must be positive")

    @classmethod
    def from_traces(cls, traces: TraceSet, sigma_db: float) -> "FitData":
        return cls(traces.grid, traces["var_xsum_db"], traces["var_ydiff_db"], sigma_db)

    @property
    def duan_db(self) -> np.ndarray:
        return _duan_db(self.var_xsum_db, self.var_ydiff_db)

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.sigma_db**2


def _duan_db(var_xsum_db: np.ndarray, var_ydiff_db: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(2.0 * (np.power(10.0, var_xsum_db / 10.0) + np.power(10.0, var_ydiff_db / 10.0)))


@dataclass(frozen=True)
class FitProblem:
    """Everything a fit needs; ``experiment`` carries the fixed part of the model.

    ``exclusion_windows`` are closed frequency ranges removed from the
    residuals, typically around pickup spurs.
    """

    data: FitData
    experiment: Experiment
    free_parameters: Mapping[str, ParameterBound]
    exclusion_windows: Tuple[Tuple[float, float], ...] = ()
    band_splits: Tuple[BandSplit, ...] = ()
    residual_domain: str = "db"
    quantity: str = "variances"
    starts: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        free = dict(self.free_parameters)
        if not free:
            raise FitProblemError("At least one free parameter is required")
        unknown = sorted(set(free) - set(FREE_PARAMETER_NAMES))
        if unknown:
            raise FitProblemError(f"Unknown free parameters {unknown}; choose from {list(FREE_PARAMETER_NAMES)}")
        ordered = {name: free[name] for name in FREE_PARAMETER_NAMES if name in free}
        object.__setattr__(self, "free_parameters", ordered)
        windows = tuple((float(low), float(high)) for low, high in self.exclusion_windows)
        for low, high in windows:
            if not high >= low:
                raise FitProblemError(f"Exclusion window ({low}, {high}) is reversed")
        object.__setattr__(self, "exclusion_windows", windows)
        object.__setattr__(self, "band_splits", tuple(self.band_splits))
        if self.residual_domain not in RESIDUAL_DOMAINS:
            raise FitProblemError(f"residual_domain must be one of {RESIDUAL_DOMAINS}")
        if self.quantity not in QUANTITIES:
            raise FitProblemError(f"quantity must be one of {QUANTITIES}")
        if self.starts < 1:
            raise FitProblemError("At least one start is required")
        needed = MIN_POINTS_PER_PARAMETER * len(ordered)
        available = int(np.count_nonzero(self.mask))
        if available < max(needed, 2):
            raise FitProblemError(
                f"insufficient unmasked points: {available} available, {needed} needed for {len(ordered)} parameters"
            )

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return tuple(self.free_parameters)

    @property
    def lower_bounds(self) -> np.ndarray:
        return np.array([bound.lower for bound in self.free_parameters.values()])

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.array([bound.upper for bound in self.free_parameters.values()])

    @property
    def mask(self) -> np.ndarray:
        """True for points that take part in the fit."""
        keep = np.ones(len(self.data.grid), dtype=bool)
        for low, high in self.exclusion_windows:
            keep &= ~self.data.grid.mask(low, high)
        return keep

    @property
    def fit_grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.data.grid.points[self.mask])

    def parameters_from_vector(self, theta: Sequence[float]) -> Dict[str, float]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(self.free_parameters),):
            raise FitProblemError(f"Expected {len(self.free_parameters)} parameters, got {theta.shape}")
        return {name: float(value) for name, value in zip(self.parameter_names, theta)}

    def model_experiment(self, parameters: Mapping[str, float]) -> Experiment:
        return self.experiment.with_parameters(**parameters)

    def sweep_config(self) -> SweepConfig:
        # A uniform gain ratio replaces every split-band LO setting.
        splits = () if "gain_ratio" in self.free_parameters else self.band_splits
        return SweepConfig(grid=self.fit_grid, band_splits=splits)

    def model_traces(self, parameters: Mapping[str, float]) -> TraceSet:
        try:
            return sweep(self.model_experiment(parameters), self.sweep_config())
        except (ValueError, ArithmeticError) as exc:
            raise FitError(f"Model evaluation failed at {dict(parameters)}: {exc}") from exc

    def db_differences(self, parameters: Mapping[str, float]) -> np.ndarray:
        """Unweighted model-minus-data differences in dB over the unmasked points."""
        traces = self.model_traces(parameters)
        mask = self.mask
        if self.quantity == "duan":
            model = _duan_db(traces["var_xsum_db"], traces["var_ydiff_db"])
            return model - self.data.duan_db[mask]
        return np.concatenate(
            [
                traces["var_xsum_db"] - self.data.var_xsum_db[mask],
                traces["var_ydiff_db"] - self.data.var_ydiff_db[mask],
            ]
        )

    def residual_sigma_db(self) -> np.ndarray:
        sigma = self.data.sigma_db[self.mask]
        return sigma if self.quantity == "duan" else np.concatenate([sigma, sigma])

    def data_db(self) -> np.ndarray:
        mask = self.mask
        if self.quantity == "duan":
            return self.data.duan_db[mask]
        return np.concatenate([self.data.var_xsum_db[mask], self.data.var_ydiff_db[mask]])

    def with_data(self, data: FitData) -> "FitProblem":
        return replace(self, data=data)

    def to_dict(self) -> dict:
        return {
            "free_parameters": {name: bound.to_dict() for name, bound in self.free_parameters.items()},
            "exclusion_windows_hz": [list(window) for window in self.exclusion_windows],
            "residual_domain": self.residual_domain,
            "quantity": self.quantity,
            "starts": self.starts,
            "seed": self.seed,
        }


def model_residuals(theta: Sequence[float], problem: FitProblem) -> np.ndarray:
    """Weighted residuals per unmasked point: (model − data)/σ in dB, or the linear equivalent."""
    parameters = problem.parameters_from_vector(theta)
    values = np.asarray(theta, dtype=float)
    outside = (values < problem.lower_bounds) | (values > problem.upper_bounds)
    if np.any(outside):
        names = [name for name, flag in zip(problem.parameter_names, outside) if flag]
        raise FitProblemError(f"Parameters {names} lie outside their bounds: {parameters}")
    differences = problem.db_differences(parameters)
    sigma = problem.residual_sigma_db()
    if problem.residual_domain == "db":
        return differences / sigma
    data_db = problem.data_db()
    data_linear = np.power(10.0, data_db / 10.0)
    model_linear = np.power(10.0, (data_db + differences) / 10.0)
    # σ_lin ≈ P·σ_dB/4.343 to first order.
    return (model_linear - data_linear) / (data_linear * sigma / DB_PER_NEPER)
