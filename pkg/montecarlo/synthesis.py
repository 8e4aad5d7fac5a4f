"""Colored Gaussian time series and Welch spectral estimation.

PSDs here are in vacuum units: unit-variance white noise has a flat one-sided
PSD of 1 between DC and Nyquist.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import signal

logger = logging.getLogger(__name__)

PsdTarget = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, float]


class SynthesisError(RuntimeError):
    """Raised when a time-series synthesis or estimate cannot be formed."""


@dataclass(frozen=True)
class SynthesisConfig:
    sample_rate: float = 4e9
    n_samples: int = 2**22
    seed: int = 0
    segment_length: int = 4096
    overlap_fraction: float = 0.5
    window: str = "hann"
    max_analysis_frequency: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_samples < 2 or self.n_samples & (self.n_samples - 1):
            raise SynthesisError("n_samples must be a power of two")
        if self.segment_length < 2:
            raise SynthesisError("segment_length must be at least 2")
        if self.n_samples < 4 * self.segment_length:
            raise SynthesisError("n_samples must be at least four segment lengths")
        if not 0.0 <= self.overlap_fraction <= 0.9:
            raise SynthesisError("overlap_fraction must lie in [0, 0.9]")
        if not self.sample_rate > 0.0:
            raise SynthesisError("sample_rate must be positive")
        if self.max_analysis_frequency is not None and not self.sample_rate > 2.0 * self.max_analysis_frequency:
            raise SynthesisError(
                f"Sample rate {self.sample_rate:.6g} Hz cannot resolve {self.max_analysis_frequency:.6g} Hz"
            )
        if not 0 <= self.seed < 2**64:
            raise SynthesisError("seed must be a 64-bit unsigned integer")

    @property
    def overlap_samples(self) -> int:
        return int(round(self.overlap_fraction * self.segment_length))

    @property
    def segment_count(self) -> int:
        step = self.segment_length - self.overlap_samples
        return (self.n_samples - self.segment_length) // step + 1

    @property
    def frequencies(self) -> np.ndarray:
        """Frequencies of the full-length discrete spectrum used for synthesis."""
        return np.fft.rfftfreq(self.n_samples, d=1.0 / self.sample_rate)


@dataclass(frozen=True)
class QuadratureTrace:
    """Real time series for one quadrature of one mode at one chain stage."""

    samples: np.ndarray
    label: str = ""
    stage: str = "source"

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or not np.all(np.isfinite(samples)):
            raise SynthesisError(f"Trace {self.label!r} must be a finite 1-D series")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)


def stream_generator(seed: int, stream_id: int) -> np.random.Generator:
    """Counter-based generator for one named stream, independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream_id,))))


def _evaluate_target(target: PsdTarget, frequencies: np.ndarray) -> np.ndarray:
    if callable(target):
        values = np.asarray(target(frequencies), dtype=float)
    else:
        values = np.asarray(target, dtype=float)
    return np.broadcast_to(values, frequencies.shape)


def shape_spectrum(samples: np.ndarray, amplitude: np.ndarray) -> np.ndarray:
    """Multiply the discrete spectrum of ``samples`` by ``amplitude`` (one value per rfft bin)."""
    spectrum = np.fft.rfft(samples)
    spectrum *= amplitude
    return np.fft.irfft(spectrum, n=samples.size)


def synthesize_colored_noise(
    target_psd: PsdTarget,
    config: SynthesisConfig,
    stream_id: int = 0,
    label: str = "",
    stage: str = "source",
) -> QuadratureTrace:
    """Gaussian series whose one-sided PSD equals ``target_psd`` in vacuum units.

    Bin k carries a complex Gaussian of variance n·V(f_k) (real at DC and
    Nyquist); the inverse transform then has variance equal to the mean of V.
    """
    n = config.n_samples
    frequencies = config.frequencies
    psd = _evaluate_target(target_psd, frequencies)
    if np.any(~(psd > 0.0)):
        raise SynthesisError(f"Target PSD for {label!r} must be strictly positive")
    generator = stream_generator(config.seed, stream_id)
    spectrum = np.empty(frequencies.size, dtype=np.complex128)
    scale = np.sqrt(n * psd / 2.0)
    spectrum.real = generator.standard_normal(frequencies.size) * scale
    spectrum.imag = generator.standard_normal(frequencies.size) * scale
    # DC and Nyquist bins have no partner and must be real.
    spectrum[0] = generator.standard_normal() * np.sqrt(n * psd[0])
    spectrum[-1] = generator.standard_normal() * np.sqrt(n * psd[-1])
    samples = np.fft.irfft(spectrum, n=n)
    return QuadratureTrace(samples, label=label, stage=stage)


def white_noise(config: SynthesisConfig, stream_id: int, label: str = "", stage: str = "vacuum") -> QuadratureTrace:
    """Unit-variance white noise: the vacuum in this normalization."""
    generator = stream_generator(config.seed, stream_id)
    return QuadratureTrace(generator.standard_normal(config.n_samples), label=label, stage=stage)


def welch_psd(trace: Union[QuadratureTrace, np.ndarray], config: SynthesisConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Windowed, overlapped, averaged periodogram in vacuum units."""
    samples = trace.samples if isinstance(trace, QuadratureTrace) else np.asarray(trace, dtype=float)
    if samples.size < config.segment_length:
        raise SynthesisError(
            f"Trace of {samples.size} samples is shorter than one segment ({config.segment_length})"
        )
    frequencies, psd = signal.welch(
        samples,
        fs=config.sample_rate,
        window=config.window,
        nperseg=config.segment_length,
        noverlap=config.overlap_samples,
        detrend=False,
        return_onesided=True,
        scaling="density",
    )
    return frequencies, psd * config.sample_rate / 2.0


def effective_segments(config: SynthesisConfig) -> float:
    """Equivalent number of independent periodograms for overlapped segments."""
    window = signal.get_window(config.window, config.segment_length)
    energy = float(np.sum(window**2))
    count = config.segment_count
    step = config.segment_length - config.overlap_samples
    inflation = 1.0
    lag = 1
    while lag < count and lag * step < config.segment_length:
        overlap = float(np.sum(window[lag * step :] * window[: config.segment_length - lag * step]))
        inflation += 2.0 * (1.0 - lag / count) * (overlap / energy) ** 2
        lag += 1
    return count / inflation


def adjacent_bin_correlation(config: SynthesisConfig, max_lag: int = 4) -> np.ndarray:
    """Correlation of periodogram values k bins apart, for k = 1..max_lag."""
    window = signal.get_window(config.window, config.segment_length)
    spectrum = np.fft.fft(window**2)
    return np.abs(spectrum[1 : max_lag + 1]) ** 2 / np.abs(spectrum[0]) ** 2


def binned_relative_error(config: SynthesisConfig, bins_per_group: int) -> float:
    """Relative standard error of a PSD averaged over ``bins_per_group`` adjacent Welch bins."""
    if bins_per_group < 1:
        raise SynthesisError("Need at least one bin per group")
    correlation = adjacent_bin_correlation(config, max_lag=max(1, bins_per_group - 1))
    inflation = 1.0 + 2.0 * sum(
        (1.0 - lag / bins_per_group) * correlation[lag - 1] for lag in range(1, bins_per_group)
    )
    return float(np.sqrt(inflation / (bins_per_group * effective_segments(config))))
