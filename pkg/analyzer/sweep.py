"""Spectrum-analyzer emulation over the analytic model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from channel.curves import ResponseCurve
from channel.detection import apply_dark_noise, dark_noise_level, joint_variances_with_gains
from channel.entangler import apply_uniform_loss, entangle
from criteria.measures import CriteriaSpectrum, criteria_spectrum, tms_db
from quadrature.decibel import db_from_ratio
from quadrature.grid import FrequencyGrid

from .experiment import Experiment

logger = logging.getLogger(__name__)

TRACE_NAMES = ("var_xsum_db", "var_ydiff_db", "duan", "tms_db", "reid_product", "vacuum_db", "dark_db")


class BandCoverageError(ValueError):
    """Raised when split-band LO settings leave part of the grid uncovered."""


@dataclass(frozen=True)
class BandSplit:
    """LO setting used inside [start_hz, stop_hz]."""

    start_hz: float
    stop_hz: float
    gain_a: ResponseCurve
    gain_b: ResponseCurve

    def __post_init__(self) -> None:
        if not self.stop_hz > self.start_hz:
            raise ValueError("Band split stop must exceed start")


@dataclass(frozen=True)
class SweepConfig:
    grid: FrequencyGrid
    rbw: float = 3e6
    vbw: float = 1e3
    sweep_time: float = 0.54
    averages: int = 1
    band_splits: Tuple[BandSplit, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.rbw > self.vbw > 0.0:
            raise ValueError("Sweep requires rbw > vbw > 0")
        if self.averages < 1:
            raise ValueError("Sweep requires at least one average")
        if not self.sweep_time > 0.0:
            raise ValueError("Sweep time must be positive")
        object.__setattr__(self, "band_splits", tuple(self.band_splits))

    @classmethod
    def span(cls, start_hz: float, stop_hz: float, points: int, **kwargs: object) -> "SweepConfig":
        return cls(grid=FrequencyGrid.linear(start_hz, stop_hz, points), **kwargs)

    @property
    def sigma_db(self) -> float:
        return estimator_sigma_db(self.rbw, self.vbw, self.averages)


@dataclass(frozen=True)
class TraceSet:
    """Named traces on one grid; dB traces are relative to the combined vacuum."""

    grid: FrequencyGrid
    traces: Dict[str, np.ndarray]

    def __post_init__(self) -> None:
        missing = [name for name in TRACE_NAMES if name not in self.traces]
        if missing:
            raise ValueError(f"Trace set is missing {missing}")
        frozen = {}
        for name, values in self.traces.items():
            array = np.array(values, dtype=float)
            if array.shape != (len(self.grid),):
                raise ValueError(f"Trace {name} does not match the grid")
            array.setflags(write=False)
            frozen[name] = array
        object.__setattr__(self, "traces", frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.traces[name]

    def __len__(self) -> int:
        return len(self.grid)

    def criteria(self) -> CriteriaSpectrum:
        return CriteriaSpectrum(self.grid, self["duan"], self["tms_db"], self["reid_product"])


def _band_gains(experiment: Experiment, sweep: SweepConfig) -> Tuple[np.ndarray, np.ndarray]:
    grid = sweep.grid
    gain_a, gain_b = experiment.chain.gains(grid)
    if not sweep.band_splits:
        return gain_a, gain_b
    covered = np.zeros(len(grid), dtype=bool)
    for band in sweep.band_splits:
        inside = grid.mask(band.start_hz, band.stop_hz) & ~covered
        gain_a[inside] = band.gain_a.amplitude(grid.points[inside])
        gain_b[inside] = band.gain_b.amplitude(grid.points[inside])
        covered |= inside
    if not np.all(covered):
        gaps = grid.points[~covered]
        raise BandCoverageError(
            f"Band splits leave {gaps[0]:.6g}-{gaps[-1]:.6g} Hz uncovered ({gaps.size} points)"
        )
    return gain_a, gain_b


def sweep(experiment: Experiment, config: SweepConfig) -> TraceSet:
    """Evaluate the analytic chain at every grid frequency; the result is noiseless."""
    grid = config.grid
    efficiency_a, efficiency_b = experiment.mode_efficiencies
    cov = apply_uniform_loss(entangle(experiment.entangler, grid), efficiency_a, efficiency_b)
    gain_a, gain_b = _band_gains(experiment, config)
    joint = joint_variances_with_gains(cov, gain_a, gain_b)
    measured = apply_dark_noise(joint, experiment.chain)
    criteria = criteria_spectrum(measured, cov)
    if experiment.chain.dark_noise_subtracted:
        dark = np.zeros(len(grid))
    else:
        dark = dark_noise_level(experiment.chain, grid, gain_a, gain_b)
    with np.errstate(divide="ignore"):
        dark_db = np.where(dark > 0.0, 10.0 * np.log10(np.where(dark > 0.0, dark, 1.0)), -np.inf)
    traces = TraceSet(
        grid,
        {
            "var_xsum_db": db_from_ratio(measured.var_xsum),
            "var_ydiff_db": db_from_ratio(measured.var_ydiff),
            "duan": criteria.duan,
            "tms_db": criteria.tms_db,
            "reid_product": criteria.reid_product,
            "vacuum_db": np.zeros(len(grid)),
            "dark_db": dark_db,
        },
    )
    logger.debug("Swept %d points, min Duan %.4f", len(grid), float(np.min(criteria.duan)))
    return traces


def estimator_sigma_db(rbw: float, vbw: float, averages: int = 1) -> float:
    """Display standard deviation in dB for M = (rbw/vbw)·averages independent power samples."""
    if not rbw > vbw > 0.0:
        raise ValueError("Estimator statistics require rbw > vbw > 0")
    samples = (rbw / vbw) * averages
    return 10.0 / math.log(10.0) / math.sqrt(samples)


def _duan_from_db(var_xsum_db: np.ndarray, var_ydiff_db: np.ndarray) -> np.ndarray:
    return 2.0 * (np.power(10.0, var_xsum_db / 10.0) + np.power(10.0, var_ydiff_db / 10.0))


def noisy_trace(
    traces: TraceSet,
    config: SweepConfig,
    seed: int,
    spurs: Iterable[Sequence[float]] = (),
    sigma_db: Optional[float] = None,
) -> TraceSet:
    """Add Gaussian display noise in dB plus optional spurs; deterministic per seed.

    Each trace draws from its own counter-based stream keyed by ``(seed, trace index)``.
    Spurs are ``(frequency_hz, amplitude_db)`` pairs added to the nearest bin.
    """
    sigma = config.sigma_db if sigma_db is None else sigma_db
    noisy = dict(traces.traces)
    for stream, name in enumerate(("var_xsum_db", "var_ydiff_db")):
        generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))
        noisy[name] = traces[name] + sigma * generator.standard_normal(len(traces))
    for frequency, amplitude in spurs:
        index = int(np.argmin(np.abs(traces.grid.points - frequency)))
        for name in ("var_xsum_db", "var_ydiff_db"):
            noisy[name] = noisy[name].copy()
            noisy[name][index] += amplitude
    noisy["duan"] = _duan_from_db(noisy["var_xsum_db"], noisy["var_ydiff_db"])
    noisy["tms_db"] = tms_db(noisy["duan"])
    return replace(traces, traces=noisy)
