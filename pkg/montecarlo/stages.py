"""Time-domain stages of the entangling and detection chain."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from channel.curves import ResponseCurve
from channel.detection import DetectionChain

from .synthesis import QuadratureTrace, SynthesisConfig, SynthesisError, shape_spectrum, synthesize_colored_noise, white_noise

logger = logging.getLogger(__name__)

# Stream-id blocks; each stage draws from its own block so results do not depend on call order.
LOSS_STREAMS = 100
DARK_STREAMS = 200
VACUUM_STREAMS = 300


@dataclass(frozen=True)
class FieldTraces:
    """Quadrature time series of two modes (sources before mixing, parties after)."""

    x_a: np.ndarray
    y_a: np.ndarray
    x_b: np.ndarray
    y_b: np.ndarray
    stage: str = "source"

    def __post_init__(self) -> None:
        lengths = {len(self.x_a), len(self.y_a), len(self.x_b), len(self.y_b)}
        if len(lengths) != 1:
            raise SynthesisError("All quadrature traces must share one length")

    @classmethod
    def from_sources(
        cls, source_a: Tuple[QuadratureTrace, QuadratureTrace], source_b: Tuple[QuadratureTrace, QuadratureTrace]
    ) -> "FieldTraces":
        return cls(source_a[0].samples, source_a[1].samples, source_b[0].samples, source_b[1].samples)


@dataclass(frozen=True)
class DetectorOutputs:
    """Sum photocurrent for the X setting and difference photocurrent for the Y setting."""

    x_sum: QuadratureTrace
    y_diff: QuadratureTrace


class ChainStage(ABC):
    @abstractmethod
    def apply(self, fields: FieldTraces, config: SynthesisConfig) -> FieldTraces:
        """Transform the quadrature traces and return the next stage's traces."""
        raise NotImplementedError


@dataclass(frozen=True)
class PhaseRotation(ChainStage):
    """Rotate mode B by ``phase`` radians."""

    phase: float

    def apply(self, fields: FieldTraces, config: SynthesisConfig) -> FieldTraces:
        c, s = math.cos(self.phase), math.sin(self.phase)
        return replace(
            fields, x_b=c * fields.x_b - s * fields.y_b, y_b=s * fields.x_b + c * fields.y_b, stage="rotated"
        )


@dataclass(frozen=True)
class BeamSplitter(ChainStage):
    """Sample-wise mixing A = t·a1 + r·a2, B = r·a1 − t·a2."""

    reflectivity: float = 0.5

    def apply(self, fields: FieldTraces, config: SynthesisConfig) -> FieldTraces:
        t, r = math.sqrt(1.0 - self.reflectivity), math.sqrt(self.reflectivity)
        return FieldTraces(
            x_a=t * fields.x_a + r * fields.x_b,
            y_a=t * fields.y_a + r * fields.y_b,
            x_b=r * fields.x_a - t * fields.x_b,
            y_b=r * fields.y_a - t * fields.y_b,
            stage="mixed",
        )


@dataclass(frozen=True)
class Loss(ChainStage):
    """sqrt(η)·signal + sqrt(1−η)·fresh vacuum, independently per quadrature."""

    efficiency_a: float
    efficiency_b: float

    def apply(self, fields: FieldTraces, config: SynthesisConfig) -> FieldTraces:
        attenuated = []
        names = ("x_a", "y_a", "x_b", "y_b")
        for offset, name in enumerate(names):
            efficiency = self.efficiency_a if name.endswith("_a") else self.efficiency_b
            samples = getattr(fields, name)
            if efficiency < 1.0:
                vacuum = white_noise(config, LOSS_STREAMS + offset, label=name, stage="loss").samples
                samples = math.sqrt(efficiency) * samples + math.sqrt(1.0 - efficiency) * vacuum
            attenuated.append(samples)
        return FieldTraces(*attenuated, stage="lossy")


def _apply_gain(samples: np.ndarray, gain: ResponseCurve, config: SynthesisConfig) -> np.ndarray:
    if gain.is_constant:
        return samples * float(gain.amplitude(np.array([1.0]))[0])
    return shape_spectrum(samples, gain.amplitude(config.frequencies, extrapolate=True))


def _dark_noise(
    clearance: Optional[ResponseCurve], config: SynthesisConfig, stream_id: int, label: str
) -> Optional[np.ndarray]:
    if clearance is None:
        return None
    if not clearance.is_constant and not clearance.covers(config.frequencies[1:]):
        logger.debug(
            "Holding clearance edge values outside %.6g-%.6g Hz for %s",
            clearance.frequencies_hz[0],
            clearance.frequencies_hz[-1],
            label,
        )

    def dark_psd(frequencies: np.ndarray) -> np.ndarray:
        return np.power(10.0, -clearance.evaluate(frequencies, extrapolate=True) / 10.0)

    return synthesize_colored_noise(dark_psd, config, stream_id, label=label, stage="dark").samples


@dataclass(frozen=True)
class HomodyneReadout:
    """Two detectors with gains and dark noise, combined into sum (X) and difference (Y)."""

    chain: DetectionChain
    stream_base: int = DARK_STREAMS
    include_fields: bool = True
    include_dark: bool = True

    def _photocurrent(
        self, samples: Optional[np.ndarray], gain: ResponseCurve, clearance: Optional[ResponseCurve],
        config: SynthesisConfig, stream_id: int, label: str,
    ) -> np.ndarray:
        total = np.zeros(config.n_samples) if samples is None else np.array(samples, dtype=float)
        dark = _dark_noise(clearance, config, stream_id, label) if self.include_dark else None
        if dark is not None:
            total = total + dark
        return _apply_gain(total, gain, config)

    def read(self, fields: Optional[FieldTraces], config: SynthesisConfig) -> DetectorOutputs:
        chain = self.chain
        use = fields if self.include_fields else None
        x_a = self._photocurrent(use.x_a if use else None, chain.gain_a, chain.clearance_a, config, self.stream_base, "dark_x_a")
        x_b = self._photocurrent(use.x_b if use else None, chain.gain_b, chain.clearance_b, config, self.stream_base + 1, "dark_x_b")
        x_sum = QuadratureTrace(x_a + x_b, label="x_sum", stage="detected")
        del x_a, x_b
        y_a = self._photocurrent(use.y_a if use else None, chain.gain_a, chain.clearance_a, config, self.stream_base + 2, "dark_y_a")
        y_b = self._photocurrent(use.y_b if use else None, chain.gain_b, chain.clearance_b, config, self.stream_base + 3, "dark_y_b")
        y_diff = QuadratureTrace(y_a - y_b, label="y_diff", stage="detected")
        return DetectorOutputs(x_sum=x_sum, y_diff=y_diff)


def simulate_chain(
    source_a: Tuple[QuadratureTrace, QuadratureTrace],
    source_b: Tuple[QuadratureTrace, QuadratureTrace],
    chain: DetectionChain,
    config: SynthesisConfig,
    relative_phase: float = math.pi / 2.0,
    reflectivity: float = 0.5,
    efficiencies: Optional[Tuple[float, float]] = None,
) -> DetectorOutputs:
    """Run source traces through rotation, mixing, loss and homodyne readout."""
    for trace in (*source_a, *source_b):
        if len(trace) != config.n_samples:
            raise SynthesisError(
                f"Trace {trace.label!r} has {len(trace)} samples, configuration expects {config.n_samples}"
            )
    efficiency_a, efficiency_b = efficiencies or (chain.total_efficiency, chain.total_efficiency)
    stages = (PhaseRotation(relative_phase), BeamSplitter(reflectivity), Loss(efficiency_a, efficiency_b))
    fields = FieldTraces.from_sources(source_a, source_b)
    for stage in stages:
        fields = stage.apply(fields, config)
    return HomodyneReadout(chain).read(fields, config)


def vacuum_calibration(chain: DetectionChain, config: SynthesisConfig) -> DetectorOutputs:
    """Readout with the signal beams blocked: vacuum in both detectors plus their dark noise."""
    fields = FieldTraces(
        *(white_noise(config, VACUUM_STREAMS + offset, stage="vacuum").samples for offset in range(4)),
        stage="vacuum",
    )
    return HomodyneReadout(chain, stream_base=VACUUM_STREAMS + 10).read(fields, config)


def dark_calibration(chain: DetectionChain, config: SynthesisConfig) -> DetectorOutputs:
    """Readout with the local oscillators off: dark noise only."""
    return HomodyneReadout(chain, stream_base=VACUUM_STREAMS + 20, include_fields=False).read(None, config)
