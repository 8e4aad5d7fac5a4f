"""Empirical Duan spectra from synthesized traces, checked against the analytic sweep."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from analyzer.experiment import Experiment
from analyzer.sweep import SweepConfig, TraceSet, sweep
from channel.curves import ResponseCurve
from channel.detection import DetectionChain
from channel.entangler import EntanglerConfig
from criteria.measures import CriteriaSpectrum, tms_db
from opa.spectrum import OpaSpectrumModel, anti_squeezed_variance, squeezed_variance
from quadrature.decibel import db_from_ratio
from quadrature.grid import FrequencyGrid

from .stages import DetectorOutputs, dark_calibration, simulate_chain, vacuum_calibration
from .synthesis import QuadratureTrace, SynthesisConfig, SynthesisError, binned_relative_error, synthesize_colored_noise, welch_psd

logger = logging.getLogger(__name__)

DEFAULT_BAND = (1e6, 1480e6)
DEFAULT_BIN_WIDTH = 10e6
ORACLE_Z_LIMIT = 3.0
ORACLE_PASS_FRACTION = 0.99


@dataclass(frozen=True)
class EmpiricalSpectrum:
    """Vacuum-normalized sum/difference spectra estimated from time series, with standard errors."""

    grid: FrequencyGrid
    var_xsum: np.ndarray
    var_ydiff: np.ndarray
    duan_standard_error: np.ndarray

    @property
    def duan(self) -> np.ndarray:
        return 2.0 * (self.var_xsum + self.var_ydiff)

    @property
    def criteria(self) -> CriteriaSpectrum:
        duan = self.duan
        return CriteriaSpectrum(self.grid, duan, tms_db(duan), np.full(duan.shape, np.nan))

    def to_trace_set(self) -> TraceSet:
        """Same columns as an analyzer sweep; the Reid product is not observable here."""
        size = len(self.grid)
        criteria = self.criteria
        return TraceSet(
            self.grid,
            {
                "var_xsum_db": db_from_ratio(self.var_xsum),
                "var_ydiff_db": db_from_ratio(self.var_ydiff),
                "duan": criteria.duan,
                "tms_db": criteria.tms_db,
                "reid_product": criteria.reid_product,
                "vacuum_db": np.zeros(size),
                "dark_db": np.full(size, np.nan),
            },
        )


def synthesize_sources(
    entangler: EntanglerConfig, config: SynthesisConfig
) -> Tuple[Tuple[QuadratureTrace, QuadratureTrace], Tuple[QuadratureTrace, QuadratureTrace]]:
    """Squeezed and anti-squeezed quadratures of both squeezers as independent series."""

    def pair(model: OpaSpectrumModel, first_stream: int, name: str) -> Tuple[QuadratureTrace, QuadratureTrace]:
        x = synthesize_colored_noise(
            lambda f: squeezed_variance(model, f), config, first_stream, label=f"x_{name}"
        )
        y = synthesize_colored_noise(
            lambda f: anti_squeezed_variance(model, f), config, first_stream + 1, label=f"y_{name}"
        )
        return x, y

    return pair(entangler.source_a, 0, "1"), pair(entangler.source_b, 2, "2")


def _bin_edges(frequencies: np.ndarray, band: Tuple[float, float], bin_width: float) -> List[np.ndarray]:
    start, stop = band
    if not stop > start > 0.0:
        raise SynthesisError(f"Invalid analysis band {band}")
    if not bin_width > 0.0:
        raise SynthesisError("Bin width must be positive")
    groups = []
    low = start
    while low < stop:
        high = min(low + bin_width, stop)
        members = np.flatnonzero((frequencies >= low) & (frequencies < high))
        if members.size:
            groups.append(members)
        low = high
    if not groups:
        raise SynthesisError(f"No Welch bins fall inside {start:.6g}-{stop:.6g} Hz")
    return groups


def _binned(values: np.ndarray, groups: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([float(np.mean(values[members])) for members in groups])


def empirical_spectrum(
    outputs: DetectorOutputs,
    vacuum: Optional[DetectorOutputs],
    config: SynthesisConfig,
    dark: Optional[DetectorOutputs] = None,
    band: Tuple[float, float] = DEFAULT_BAND,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> EmpiricalSpectrum:
    """Binned Welch PSDs of the sum and difference outputs over their vacuum calibration.

    With ``dark`` given, the dark-noise PSD is removed from signal and vacuum
    before the ratio is taken.
    """
    if vacuum is None:
        raise SynthesisError("Empirical spectra need a vacuum calibration")
    frequencies, _ = welch_psd(outputs.x_sum, config)
    groups = _bin_edges(frequencies, band, bin_width)
    centers = _binned(frequencies, groups)
    sizes = {members.size for members in groups}
    relative = {size: binned_relative_error(config, size) for size in sizes}
    rel = np.array([relative[members.size] for members in groups])

    ratios: Dict[str, np.ndarray] = {}
    variances: Dict[str, np.ndarray] = {}
    for name in ("x_sum", "y_diff"):
        signal = _binned(welch_psd(getattr(outputs, name), config)[1], groups)
        reference = _binned(welch_psd(getattr(vacuum, name), config)[1], groups)
        signal_var = (rel * signal) ** 2
        reference_var = (rel * reference) ** 2
        if dark is not None:
            floor = _binned(welch_psd(getattr(dark, name), config)[1], groups)
            signal_var = signal_var + (rel * floor) ** 2
            reference_var = reference_var + (rel * floor) ** 2
            signal = signal - floor
            reference = reference - floor
        if np.any(reference <= 0.0) or np.any(signal <= 0.0):
            raise SynthesisError(f"Dark-subtracted {name} spectrum is not positive")
        ratio = signal / reference
        ratios[name] = ratio
        variances[name] = ratio**2 * (signal_var / signal**2 + reference_var / reference**2)
    standard_error = 2.0 * np.sqrt(variances["x_sum"] + variances["y_diff"])
    return EmpiricalSpectrum(FrequencyGrid(centers), ratios["x_sum"], ratios["y_diff"], standard_error)


def empirical_duan_spectrum(
    outputs: DetectorOutputs,
    vacuum: Optional[DetectorOutputs],
    config: SynthesisConfig,
    dark: Optional[DetectorOutputs] = None,
    band: Tuple[float, float] = DEFAULT_BAND,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> CriteriaSpectrum:
    return empirical_spectrum(outputs, vacuum, config, dark, band, bin_width).criteria


def run_empirical(experiment: Experiment, config: SynthesisConfig, **kwargs: object) -> EmpiricalSpectrum:
    """Synthesize, propagate and estimate one experiment end to end."""
    entangler = experiment.entangler
    sources = synthesize_sources(entangler, config)
    outputs = simulate_chain(
        *sources,
        experiment.chain,
        config,
        relative_phase=entangler.relative_phase,
        reflectivity=entangler.beam_splitter_reflectivity,
        efficiencies=experiment.mode_efficiencies,
    )
    del sources
    vacuum = vacuum_calibration(experiment.chain, config)
    dark = dark_calibration(experiment.chain, config) if experiment.chain.dark_noise_subtracted else None
    return empirical_spectrum(outputs, vacuum, config, dark=dark, **kwargs)


def analytic_binned_duan(
    experiment: Experiment,
    config: SynthesisConfig,
    band: Tuple[float, float] = DEFAULT_BAND,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> np.ndarray:
    """Analytic Duan value averaged over the same Welch bins as the empirical estimate."""
    frequencies = np.fft.rfftfreq(config.segment_length, d=1.0 / config.sample_rate)
    groups = _bin_edges(frequencies, band, bin_width)
    members = np.concatenate(groups)
    traces = sweep(experiment, SweepConfig(grid=FrequencyGrid(frequencies[members])))
    var_xsum = np.power(10.0, traces["var_xsum_db"] / 10.0)
    var_ydiff = np.power(10.0, traces["var_ydiff_db"] / 10.0)
    offsets = np.cumsum([0] + [group.size for group in groups])
    return np.array(
        [
            2.0 * (np.mean(var_xsum[lo:hi]) + np.mean(var_ydiff[lo:hi]))
            for lo, hi in zip(offsets[:-1], offsets[1:])
        ]
    )


@dataclass(frozen=True)
class OracleCase:
    pump_ratio_x: float
    eta_total: float
    gain_ratio: float
    clearance_db: float = math.inf
    gamma_hwhm: float = 1.13e9

    def experiment(self) -> Experiment:
        source = OpaSpectrumModel(self.gamma_hwhm, self.pump_ratio_x)
        clearance = None if math.isinf(self.clearance_db) else ResponseCurve.constant(self.clearance_db)
        chain = DetectionChain.with_total_efficiency(
            self.eta_total, clearance_a=clearance, clearance_b=clearance
        ).with_gain_ratio(self.gain_ratio)
        return Experiment(EntanglerConfig(source, source), chain)

    def to_dict(self) -> dict:
        return {
            "pump_ratio_x": self.pump_ratio_x,
            "eta_total": self.eta_total,
            "gain_ratio": self.gain_ratio,
            "clearance_db": None if math.isinf(self.clearance_db) else self.clearance_db,
            "gamma_hwhm_hz": self.gamma_hwhm,
        }


@dataclass(frozen=True)
class OracleResult:
    case: OracleCase
    frequencies_hz: np.ndarray
    empirical_duan: np.ndarray
    analytic_duan: np.ndarray
    standard_error: np.ndarray
    z_limit: float = ORACLE_Z_LIMIT

    @property
    def z_scores(self) -> np.ndarray:
        return (self.empirical_duan - self.analytic_duan) / self.standard_error

    @property
    def fraction_within(self) -> float:
        return float(np.mean(np.abs(self.z_scores) <= self.z_limit))

    def passed(self, required_fraction: float = ORACLE_PASS_FRACTION) -> bool:
        return self.fraction_within >= required_fraction

    def to_dict(self) -> dict:
        return {
            "case": self.case.to_dict(),
            "bins": int(self.frequencies_hz.size),
            "fraction_within": self.fraction_within,
            "max_abs_z": float(np.max(np.abs(self.z_scores))),
        }


def default_oracle_cases() -> List[OracleCase]:
    """The 24 combinations of pump ratio, efficiency, gain ratio and clearance."""
    return [
        OracleCase(x, eta, ratio, clearance)
        for x, eta, ratio, clearance in product(
            (0.0, 0.3, 0.6768), (1.0, 0.59), (1.0, math.sqrt(2.0)), (math.inf, 13.0)
        )
    ]


def check_case(
    case: OracleCase,
    config: SynthesisConfig,
    band: Tuple[float, float] = DEFAULT_BAND,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> OracleResult:
    experiment = case.experiment()
    empirical = run_empirical(experiment, config, band=band, bin_width=bin_width)
    analytic = analytic_binned_duan(experiment, config, band, bin_width)
    result = OracleResult(
        case=case,
        frequencies_hz=empirical.grid.points,
        empirical_duan=empirical.duan,
        analytic_duan=analytic,
        standard_error=empirical.duan_standard_error,
    )
    logger.debug("Oracle case %s: %.3f of bins within %.1f SE", case.to_dict(), result.fraction_within, result.z_limit)
    return result


def oracle_equivalence(
    config: Optional[SynthesisConfig] = None,
    cases: Optional[Sequence[OracleCase]] = None,
    band: Tuple[float, float] = DEFAULT_BAND,
    bin_width: float = DEFAULT_BIN_WIDTH,
    workers: int = 1,
) -> List[OracleResult]:
    """Compare empirical and analytic Duan spectra for every case; results keep case order."""
    config = config or SynthesisConfig(max_analysis_frequency=band[1])
    cases = list(cases) if cases is not None else default_oracle_cases()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda case: check_case(case, config, band, bin_width), cases))
    else:
        results = [check_case(case, config, band, bin_width) for case in cases]
    failed = [result for result in results if not result.passed()]
    if failed:
        logger.warning("%d of %d oracle cases below the pass fraction", len(failed), len(results))
    else:
        logger.info("All %d oracle cases agree with the analytic model", len(results))
    return results
