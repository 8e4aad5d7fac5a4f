"""Experiment configuration documents: JSON with units encoded in the field names."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from analyzer.experiment import Experiment
from analyzer.sweep import BandSplit, SweepConfig
from cavity.figures import CavityGeometry, absorption_round_trip_loss, cavity_figures
from channel.curves import ResponseCurve, gain_from_lo_power, measured_clearance_curve
from channel.detection import DetectionChain, gain_ratio_from_imbalance
from channel.entangler import EntanglerConfig
from fitkit.problem import ParameterBound
from montecarlo.synthesis import SynthesisConfig
from opa.spectrum import OpaSpectrumModel, pump_ratio
from opa.threshold import ThresholdInputs, ThresholdResult, opo_threshold
from quadrature.decibel import DecibelValue
from quadrature.grid import FrequencyGrid

logger = logging.getLogger(__name__)

DEFAULT_ESCAPE_EFFICIENCY = 0.999
CLEARANCE_PRESETS = ("measured",)
_REQUIRED = object()


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration documents; messages carry the field path."""


class _Reader:
    """Typed access to one JSON object, remembering its dotted path and the keys consumed."""

    def __init__(self, data: Any, path: str) -> None:
        if not isinstance(data, Mapping):
            raise ConfigError(f"{path}: expected an object")
        self.data = data
        self.path = path
        self.seen: set = set()

    def child_path(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def raw(self, key: str, default: Any = _REQUIRED) -> Any:
        self.seen.add(key)
        value = self.data.get(key)
        if value is None:
            if default is _REQUIRED:
                raise ConfigError(f"{self.child_path(key)}: missing field")
            return default
        return value

    def number(
        self, key: str, default: Any = _REQUIRED, positive: bool = False, unit_interval: bool = False
    ) -> Any:
        value = self.raw(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{self.child_path(key)}: expected a finite number, got {value!r}")
        if positive and not value > 0:
            raise ConfigError(f"{self.child_path(key)}: must be positive, got {value}")
        if unit_interval and not 0.0 <= value <= 1.0:
            raise ConfigError(f"{self.child_path(key)}: must lie in [0, 1], got {value}")
        return float(value)

    def integer(self, key: str, default: Any = _REQUIRED, minimum: int = 0) -> int:
        value = self.raw(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{self.child_path(key)}: expected an integer, got {value!r}")
        if value < minimum:
            raise ConfigError(f"{self.child_path(key)}: must be at least {minimum}, got {value}")
        return value

    def boolean(self, key: str, default: bool = False) -> bool:
        value = self.raw(key, default)
        if not isinstance(value, bool):
            raise ConfigError(f"{self.child_path(key)}: expected true or false, got {value!r}")
        return value

    def string(self, key: str, default: Any = _REQUIRED, choices: Optional[Sequence[str]] = None) -> Any:
        value = self.raw(key, default)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ConfigError(f"{self.child_path(key)}: expected a string, got {value!r}")
        if choices is not None and value not in choices:
            raise ConfigError(f"{self.child_path(key)}: must be one of {list(choices)}, got {value!r}")
        return value

    def pairs(self, key: str) -> Tuple[Tuple[float, float], ...]:
        value = self.raw(key, None)
        if value is None:
            return ()
        path = self.child_path(key)
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list of [a, b] pairs")
        result = []
        for index, item in enumerate(value):
            if (
                not isinstance(item, list)
                or len(item) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in item)
            ):
                raise ConfigError(f"{path}[{index}]: expected a pair of numbers, got {item!r}")
            result.append((float(item[0]), float(item[1])))
        return tuple(result)

    def child(self, key: str, required: bool = False) -> Optional["_Reader"]:
        value = self.raw(key, _REQUIRED if required else None)
        return None if value is None else _Reader(value, self.child_path(key))

    def items(self, key: str) -> List["_Reader"]:
        value = self.raw(key, None)
        if value is None:
            return []
        if not isinstance(value, list):
            raise ConfigError(f"{self.child_path(key)}: expected a list")
        return [_Reader(item, f"{self.child_path(key)}[{index}]") for index, item in enumerate(value)]

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigError(f"{self.path or '<root>'}: unknown fields {unknown}")


def _plain(value: Any) -> Any:
    if is_dataclass(value):
        return {item.name: _plain(getattr(value, item.name)) for item in fields(value) if item.metadata.get("emit", True)}
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (tuple, list)):
        return [_plain(item) for item in value]
    return value


@dataclass(frozen=True)
class MirrorSpec:
    """Mirror set and absorption for one wavelength of the monolithic cavity."""

    r1: float
    r2: float
    absorption_ppm_per_cm: float = 0.0
    refractive_index: Optional[float] = None

    @classmethod
    def parse(cls, reader: _Reader) -> "MirrorSpec":
        spec = cls(
            r1=reader.number("r1", unit_interval=True),
            r2=reader.number("r2", unit_interval=True),
            absorption_ppm_per_cm=reader.number("absorption_ppm_per_cm", 0.0),
            refractive_index=reader.number("refractive_index", None, positive=True),
        )
        reader.finish()
        return spec


@dataclass(frozen=True)
class CavitySpec:
    length_mm: float
    refractive_index: float
    signal: MirrorSpec
    pump: Optional[MirrorSpec] = None

    @classmethod
    def parse(cls, reader: _Reader) -> "CavitySpec":
        signal = MirrorSpec.parse(reader.child("signal", required=True))
        pump_reader = reader.child("pump")
        spec = cls(
            length_mm=reader.number("length_mm", positive=True),
            refractive_index=reader.number("refractive_index", positive=True),
            signal=signal,
            pump=MirrorSpec.parse(pump_reader) if pump_reader else None,
        )
        reader.finish()
        return spec

    def geometry(self, mirrors: MirrorSpec) -> CavityGeometry:
        length = self.length_mm * 1e-3
        index = mirrors.refractive_index or self.refractive_index
        loss = absorption_round_trip_loss(length, mirrors.absorption_ppm_per_cm)
        return CavityGeometry(length, index, mirrors.r1, mirrors.r2, loss)

    def signal_geometry(self) -> CavityGeometry:
        return self.geometry(self.signal)

    def pump_geometry(self) -> Optional[CavityGeometry]:
        return None if self.pump is None else self.geometry(self.pump)


@dataclass(frozen=True)
class ThresholdSpec:
    """Threshold inputs; unset losses, length and buildup come from the cavity block."""

    waist_signal_um: float
    waist_pump_um: float
    d_eff_pm_per_v: float
    crystal_length_mm: Optional[float] = None
    n_signal: Optional[float] = None
    n_pump: Optional[float] = None
    alpha_signal_ppm_per_cm: Optional[float] = None
    alpha_pump_ppm_per_cm: Optional[float] = None
    output_transmission: Optional[float] = None
    extra_loss: Optional[float] = None
    pump_buildup: Optional[float] = None
    wavelength_signal_nm: float = 1550.0

    @classmethod
    def parse(cls, reader: _Reader) -> "ThresholdSpec":
        spec = cls(
            waist_signal_um=reader.number("waist_signal_um", positive=True),
            waist_pump_um=reader.number("waist_pump_um", positive=True),
            d_eff_pm_per_v=reader.number("d_eff_pm_per_v", positive=True),
            crystal_length_mm=reader.number("crystal_length_mm", None, positive=True),
            n_signal=reader.number("n_signal", None, positive=True),
            n_pump=reader.number("n_pump", None, positive=True),
            alpha_signal_ppm_per_cm=reader.number("alpha_signal_ppm_per_cm", None),
            alpha_pump_ppm_per_cm=reader.number("alpha_pump_ppm_per_cm", None),
            output_transmission=reader.number("output_transmission", None, unit_interval=True),
            extra_loss=reader.number("extra_loss", None, unit_interval=True),
            pump_buildup=reader.number("pump_buildup", None, positive=True),
            wavelength_signal_nm=reader.number("wavelength_signal_nm", 1550.0, positive=True),
        )
        reader.finish()
        return spec

    def inputs(self, cavity: Optional[CavitySpec], path: str) -> ThresholdInputs:
        def resolve(name: str, own: Optional[float], fallback: Any) -> float:
            if own is not None:
                return own
            if cavity is None:
                raise ConfigError(f"{path}.{name}: missing field (no cavity block to derive it from)")
            return fallback()

        pump_geometry = cavity.pump_geometry() if cavity is not None else None
        if self.pump_buildup is None and pump_geometry is None:
            raise ConfigError(f"{path}.pump_buildup: missing field (no cavity pump block to derive it from)")
        n_signal = resolve("n_signal", self.n_signal, lambda: cavity.refractive_index)
        try:
            return ThresholdInputs(
                waist_signal=self.waist_signal_um * 1e-6,
                waist_pump=self.waist_pump_um * 1e-6,
                d_eff=self.d_eff_pm_per_v * 1e-12,
                crystal_length=resolve("crystal_length_mm", self.crystal_length_mm, lambda: cavity.length_mm) * 1e-3,
                n_signal=n_signal,
                n_pump=self.n_pump if self.n_pump is not None else (
                    (cavity.pump.refractive_index if cavity and cavity.pump else None) or n_signal
                ),
                alpha_signal=resolve(
                    "alpha_signal_ppm_per_cm", self.alpha_signal_ppm_per_cm, lambda: cavity.signal.absorption_ppm_per_cm
                ) * 1e-4,
                alpha_pump=(
                    self.alpha_pump_ppm_per_cm
                    if self.alpha_pump_ppm_per_cm is not None
                    else (cavity.pump.absorption_ppm_per_cm if cavity and cavity.pump else 0.0)
                ) * 1e-4,
                output_transmission=resolve("output_transmission", self.output_transmission, lambda: 1.0 - cavity.signal.r2),
                extra_loss=resolve("extra_loss", self.extra_loss, lambda: 1.0 - cavity.signal.r1),
                pump_buildup=self.pump_buildup if self.pump_buildup is not None else cavity_figures(pump_geometry).buildup,
                wavelength_signal=self.wavelength_signal_nm * 1e-9,
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class SourceSpec:
    """One squeezer: linewidth (direct or from the cavity), pump power and threshold."""

    name: str
    pump_power_mw: float
    threshold_power_mw: Optional[float] = None
    gamma_hwhm_mhz: Optional[float] = None
    escape_efficiency: Optional[float] = None
    cavity: Optional[CavitySpec] = None
    threshold: Optional[ThresholdSpec] = None
    path: str = field(default="", compare=False, metadata={"emit": False})

    @classmethod
    def parse(cls, reader: _Reader) -> "SourceSpec":
        cavity_reader = reader.child("cavity")
        threshold_reader = reader.child("threshold")
        spec = cls(
            name=reader.string("name", reader.path),
            pump_power_mw=reader.number("pump_power_mw"),
            threshold_power_mw=reader.number("threshold_power_mw", None, positive=True),
            gamma_hwhm_mhz=reader.number("gamma_hwhm_mhz", None, positive=True),
            escape_efficiency=reader.number("escape_efficiency", None, unit_interval=True),
            cavity=CavitySpec.parse(cavity_reader) if cavity_reader else None,
            threshold=ThresholdSpec.parse(threshold_reader) if threshold_reader else None,
            path=reader.path,
        )
        reader.finish()
        if spec.pump_power_mw < 0.0:
            raise ConfigError(f"{reader.child_path('pump_power_mw')}: must be non-negative")
        if spec.gamma_hwhm_mhz is None and spec.cavity is None:
            raise ConfigError(f"{reader.child_path('gamma_hwhm_mhz')}: missing field (or give a cavity block)")
        if spec.threshold_power_mw is None and spec.threshold is None:
            raise ConfigError(f"{reader.child_path('threshold_power_mw')}: missing field (or give a threshold block)")
        return spec

    def threshold_inputs(self) -> Optional[ThresholdInputs]:
        if self.threshold is None:
            return None
        return self.threshold.inputs(self.cavity, f"{self.path}.threshold")

    def threshold_result(self) -> Optional[ThresholdResult]:
        inputs = self.threshold_inputs()
        return None if inputs is None else opo_threshold(inputs)

    def threshold_power_w(self) -> float:
        """Measured threshold if given, otherwise the computed one."""
        if self.threshold_power_mw is not None:
            return self.threshold_power_mw * 1e-3
        return self.threshold_result().p_thr_input

    def gamma_hwhm_hz(self) -> float:
        if self.gamma_hwhm_mhz is not None:
            return self.gamma_hwhm_mhz * 1e6
        return cavity_figures(self.cavity.signal_geometry()).hwhm

    def escape(self) -> float:
        if self.escape_efficiency is not None:
            return self.escape_efficiency
        if self.cavity is not None:
            return cavity_figures(self.cavity.signal_geometry()).escape_efficiency
        return DEFAULT_ESCAPE_EFFICIENCY

    def model(self) -> OpaSpectrumModel:
        try:
            x = pump_ratio(self.pump_power_mw * 1e-3, self.threshold_power_w())
            return OpaSpectrumModel(self.gamma_hwhm_hz(), x, self.escape())
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{self.path}: {exc}") from exc


@dataclass(frozen=True)
class EntanglerSpec:
    relative_phase_rad: float = math.pi / 2.0
    reflectivity: float = 0.5

    @classmethod
    def parse(cls, reader: Optional[_Reader]) -> "EntanglerSpec":
        if reader is None:
            return cls()
        spec = cls(
            relative_phase_rad=reader.number("relative_phase_rad", math.pi / 2.0),
            reflectivity=reader.number("reflectivity", 0.5, unit_interval=True),
        )
        reader.finish()
        return spec


@dataclass(frozen=True)
class ClearanceSpec:
    """Dark-noise clearance applied to both detectors; exactly one source of values."""

    preset: Optional[str] = None
    points_mhz_db: Tuple[Tuple[float, float], ...] = ()
    csv: Optional[str] = None
    constant_db: Optional[float] = None
    offset_db: float = 0.0

    @classmethod
    def parse(cls, reader: _Reader, base_dir: Path) -> "ClearanceSpec":
        csv_path = reader.string("csv", None)
        if csv_path is not None:
            resolved = (base_dir / csv_path).resolve()
            if not resolved.is_file():
                raise ConfigError(f"{reader.child_path('csv')}: file not found: {resolved}")
            csv_path = str(resolved)
        spec = cls(
            preset=reader.string("preset", None, choices=CLEARANCE_PRESETS),
            points_mhz_db=reader.pairs("points_mhz_db"),
            csv=csv_path,
            constant_db=reader.number("constant_db", None),
            offset_db=reader.number("offset_db", 0.0),
        )
        reader.finish()
        given = [spec.preset is not None, bool(spec.points_mhz_db), spec.csv is not None, spec.constant_db is not None]
        if sum(given) != 1:
            raise ConfigError(f"{reader.path}: give exactly one of preset, points_mhz_db, csv, constant_db")
        return spec

    def curve(self) -> ResponseCurve:
        if self.preset == "measured":
            curve = measured_clearance_curve()
        elif self.points_mhz_db:
            curve = ResponseCurve.from_points((f * 1e6, v) for f, v in self.points_mhz_db)
        elif self.csv is not None:
            curve = ResponseCurve.from_csv(Path(self.csv))
        else:
            curve = ResponseCurve.constant(self.constant_db)
        return curve.shifted(self.offset_db) if self.offset_db else curve


def _lo_pair(reader: _Reader, key: str) -> Optional[Tuple[float, float]]:
    value = reader.raw(key, None)
    if value is None:
        return None
    path = reader.child_path(key)
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in value)
    ):
        raise ConfigError(f"{path}: expected two positive LO powers [detector A, detector B]")
    return float(value[0]), float(value[1])


@dataclass(frozen=True)
class DetectionSpec:
    eta_total: Optional[float] = None
    mode_overlap_efficiency: Optional[float] = None
    propagation_efficiency: Optional[float] = None
    quantum_efficiency: Optional[float] = None
    lo_power_mw: Optional[Tuple[float, float]] = None
    gain_ratio: Optional[float] = None
    vacuum_imbalance_db: Optional[float] = None
    clearance: Optional[ClearanceSpec] = None
    dark_noise_subtracted: bool = False

    @classmethod
    def parse(cls, reader: _Reader, base_dir: Path) -> "DetectionSpec":
        clearance_reader = reader.child("clearance")
        spec = cls(
            eta_total=reader.number("eta_total", None, unit_interval=True),
            mode_overlap_efficiency=reader.number("mode_overlap_efficiency", None, unit_interval=True),
            propagation_efficiency=reader.number("propagation_efficiency", None, unit_interval=True),
            quantum_efficiency=reader.number("quantum_efficiency", None, unit_interval=True),
            lo_power_mw=_lo_pair(reader, "lo_power_mw"),
            gain_ratio=reader.number("gain_ratio", None, positive=True),
            vacuum_imbalance_db=reader.number("vacuum_imbalance_db", None),
            clearance=ClearanceSpec.parse(clearance_reader, base_dir) if clearance_reader else None,
            dark_noise_subtracted=reader.boolean("dark_noise_subtracted", False),
        )
        reader.finish()
        budget = [spec.mode_overlap_efficiency, spec.propagation_efficiency, spec.quantum_efficiency]
        if spec.eta_total is None and any(value is None for value in budget):
            raise ConfigError(
                f"{reader.path}.eta_total: missing field (or give mode_overlap_efficiency, "
                "propagation_efficiency and quantum_efficiency)"
            )
        if spec.eta_total is not None and any(value is not None for value in budget):
            raise ConfigError(f"{reader.path}: eta_total excludes the individual efficiency budget fields")
        gain_fields = [spec.lo_power_mw, spec.gain_ratio, spec.vacuum_imbalance_db]
        if sum(value is not None for value in gain_fields) > 1:
            raise ConfigError(f"{reader.path}: give at most one of lo_power_mw, gain_ratio, vacuum_imbalance_db")
        return spec

    def chain(self) -> DetectionChain:
        clearance = self.clearance.curve() if self.clearance is not None else None
        if self.eta_total is not None:
            chain = DetectionChain.with_total_efficiency(
                self.eta_total,
                clearance_a=clearance,
                clearance_b=clearance,
                dark_noise_subtracted=self.dark_noise_subtracted,
            )
        else:
            chain = DetectionChain(
                propagation_efficiency=self.propagation_efficiency,
                visibility=math.sqrt(self.mode_overlap_efficiency),
                quantum_efficiency=self.quantum_efficiency,
                clearance_a=clearance,
                clearance_b=clearance,
                dark_noise_subtracted=self.dark_noise_subtracted,
            )
        if self.lo_power_mw is not None:
            return replace(
                chain,
                gain_a=gain_from_lo_power(self.lo_power_mw[0]),
                gain_b=gain_from_lo_power(self.lo_power_mw[1]),
            )
        if self.gain_ratio is not None:
            return chain.with_gain_ratio(self.gain_ratio)
        if self.vacuum_imbalance_db is not None:
            return chain.with_gain_ratio(gain_ratio_from_imbalance(DecibelValue(self.vacuum_imbalance_db)))
        return chain


@dataclass(frozen=True)
class BandSplitSpec:
    start_mhz: float
    stop_mhz: float
    lo_power_mw: Tuple[float, float]

    @classmethod
    def parse(cls, reader: _Reader) -> "BandSplitSpec":
        lo = _lo_pair(reader, "lo_power_mw")
        if lo is None:
            raise ConfigError(f"{reader.child_path('lo_power_mw')}: missing field")
        spec = cls(
            start_mhz=reader.number("start_mhz", positive=True),
            stop_mhz=reader.number("stop_mhz", positive=True),
            lo_power_mw=lo,
        )
        reader.finish()
        if not spec.stop_mhz > spec.start_mhz:
            raise ConfigError(f"{reader.path}: stop_mhz must exceed start_mhz")
        return spec

    def band_split(self) -> BandSplit:
        return BandSplit(
            self.start_mhz * 1e6,
            self.stop_mhz * 1e6,
            gain_from_lo_power(self.lo_power_mw[0]),
            gain_from_lo_power(self.lo_power_mw[1]),
        )


@dataclass(frozen=True)
class SweepSpec:
    start_mhz: float = 1.0
    stop_mhz: float = 1480.0
    points: int = 740
    rbw_mhz: float = 3.0
    vbw_khz: float = 1.0
    sweep_time_ms: float = 540.0
    averages: int = 1
    band_splits: Tuple[BandSplitSpec, ...] = ()

    @classmethod
    def parse(cls, reader: Optional[_Reader]) -> "SweepSpec":
        if reader is None:
            return cls()
        spec = cls(
            start_mhz=reader.number("start_mhz", 1.0, positive=True),
            stop_mhz=reader.number("stop_mhz", 1480.0, positive=True),
            points=reader.integer("points", 740, minimum=2),
            rbw_mhz=reader.number("rbw_mhz", 3.0, positive=True),
            vbw_khz=reader.number("vbw_khz", 1.0, positive=True),
            sweep_time_ms=reader.number("sweep_time_ms", 540.0, positive=True),
            averages=reader.integer("averages", 1, minimum=1),
            band_splits=tuple(BandSplitSpec.parse(item) for item in reader.items("band_splits")),
        )
        reader.finish()
        if not spec.stop_mhz > spec.start_mhz:
            raise ConfigError(f"{reader.path}: stop_mhz must exceed start_mhz")
        if not spec.rbw_mhz * 1e3 > spec.vbw_khz:
            raise ConfigError(f"{reader.path}: rbw must exceed vbw")
        return spec

    def config(self) -> SweepConfig:
        return SweepConfig(
            grid=FrequencyGrid.linear(self.start_mhz * 1e6, self.stop_mhz * 1e6, self.points),
            rbw=self.rbw_mhz * 1e6,
            vbw=self.vbw_khz * 1e3,
            sweep_time=self.sweep_time_ms * 1e-3,
            averages=self.averages,
            band_splits=tuple(split.band_split() for split in self.band_splits),
        )


@dataclass(frozen=True)
class SynthSpec:
    """Display-noise synthesis for analyzer traces."""

    seed: int = 0
    sigma_db: Optional[float] = None
    spurs_mhz_db: Tuple[Tuple[float, float], ...] = ()

    @classmethod
    def parse(cls, reader: Optional[_Reader]) -> "SynthSpec":
        if reader is None:
            return cls()
        spec = cls(
            seed=reader.integer("seed", 0),
            sigma_db=reader.number("sigma_db", None, positive=True),
            spurs_mhz_db=reader.pairs("spurs_mhz_db"),
        )
        reader.finish()
        return spec

    def spurs_hz(self) -> List[Tuple[float, float]]:
        return [(frequency * 1e6, amplitude) for frequency, amplitude in self.spurs_mhz_db]


@dataclass(frozen=True)
class MonteCarloSpec:
    sample_rate_ghz: float = 4.0
    n_samples: int = 2**22
    segment_length: int = 4096
    overlap_fraction: float = 0.5
    window: str = "hann"
    seed: int = 0
    band_mhz: Tuple[float, float] = (1.0, 1480.0)
    bin_width_mhz: float = 10.0
    oracle: bool = False
    dump_raw: bool = False

    @classmethod
    def parse(cls, reader: _Reader) -> "MonteCarloSpec":
        band = reader.raw("band_mhz", [1.0, 1480.0])
        if (
            not isinstance(band, list)
            or len(band) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in band)
        ):
            raise ConfigError(f"{reader.child_path('band_mhz')}: expected [start, stop]")
        spec = cls(
            sample_rate_ghz=reader.number("sample_rate_ghz", 4.0, positive=True),
            n_samples=reader.integer("n_samples", 2**22, minimum=2),
            segment_length=reader.integer("segment_length", 4096, minimum=2),
            overlap_fraction=reader.number("overlap_fraction", 0.5),
            window=reader.string("window", "hann"),
            seed=reader.integer("seed", 0),
            band_mhz=(float(band[0]), float(band[1])),
            bin_width_mhz=reader.number("bin_width_mhz", 10.0, positive=True),
            oracle=reader.boolean("oracle", False),
            dump_raw=reader.boolean("dump_raw", False),
        )
        reader.finish()
        try:
            spec.synthesis_config()
        except (ValueError, RuntimeError) as exc:
            raise ConfigError(f"{reader.path}: {exc}") from exc
        return spec

    def synthesis_config(self, seed: Optional[int] = None) -> SynthesisConfig:
        return SynthesisConfig(
            sample_rate=self.sample_rate_ghz * 1e9,
            n_samples=self.n_samples,
            seed=self.seed if seed is None else seed,
            segment_length=self.segment_length,
            overlap_fraction=self.overlap_fraction,
            window=self.window,
            max_analysis_frequency=self.band_mhz[1] * 1e6,
        )

    @property
    def band_hz(self) -> Tuple[float, float]:
        return self.band_mhz[0] * 1e6, self.band_mhz[1] * 1e6


# Config names carry units; the model works in SI.
_FIT_NAME_SCALES = {
    "eta_total": ("eta_total", 1.0),
    "pump_ratio_x": ("pump_ratio_x", 1.0),
    "gamma_hwhm_mhz": ("gamma_hwhm", 1e6),
    "gain_ratio": ("gain_ratio", 1.0),
    "clearance_offset_db": ("clearance_offset_db", 1.0),
}


@dataclass(frozen=True)
class FitBoundSpec:
    lower: float
    upper: float
    initial: Optional[float] = None

    @classmethod
    def parse(cls, reader: _Reader) -> "FitBoundSpec":
        spec = cls(
            lower=reader.number("lower"),
            upper=reader.number("upper"),
            initial=reader.number("initial", None),
        )
        reader.finish()
        if not spec.lower < spec.upper:
            raise ConfigError(f"{reader.path}: lower must be below upper")
        if spec.initial is not None and not spec.lower < spec.initial < spec.upper:
            raise ConfigError(f"{reader.path}.initial: must lie strictly between the bounds")
        return spec


@dataclass(frozen=True)
class FitSpec:
    free: Dict[str, FitBoundSpec]
    exclusion_windows_mhz: Tuple[Tuple[float, float], ...] = ()
    sigma_db: Optional[float] = None
    residual_domain: str = "db"
    quantity: str = "variances"
    starts: int = 8
    seed: int = 0
    workers: int = 1

    @classmethod
    def parse(cls, reader: _Reader) -> "FitSpec":
        free_reader = reader.child("free", required=True)
        free = {}
        for name in free_reader.data:
            if name not in _FIT_NAME_SCALES:
                raise ConfigError(f"{free_reader.child_path(name)}: unknown fit parameter; choose from {list(_FIT_NAME_SCALES)}")
            free[name] = FitBoundSpec.parse(free_reader.child(name, required=True))
        free_reader.finish()
        if not free:
            raise ConfigError(f"{free_reader.path}: at least one free parameter is required")
        spec = cls(
            free=free,
            exclusion_windows_mhz=reader.pairs("exclusion_windows_mhz"),
            sigma_db=reader.number("sigma_db", None, positive=True),
            residual_domain=reader.string("residual_domain", "db", choices=("db", "linear")),
            quantity=reader.string("quantity", "variances", choices=("variances", "duan")),
            starts=reader.integer("starts", 8, minimum=1),
            seed=reader.integer("seed", 0),
            workers=reader.integer("workers", 1, minimum=1),
        )
        reader.finish()
        return spec

    def parameter_bounds(self) -> Dict[str, ParameterBound]:
        bounds = {}
        for name, spec in self.free.items():
            model_name, scale = _FIT_NAME_SCALES[name]
            initial = None if spec.initial is None else spec.initial * scale
            bounds[model_name] = ParameterBound(spec.lower * scale, spec.upper * scale, initial)
        return bounds

    def exclusion_windows_hz(self) -> Tuple[Tuple[float, float], ...]:
        return tuple((low * 1e6, high * 1e6) for low, high in self.exclusion_windows_mhz)


@dataclass(frozen=True)
class ExperimentConfig:
    sources: Tuple[SourceSpec, SourceSpec]
    detection: DetectionSpec
    entangler: EntanglerSpec = field(default_factory=EntanglerSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    synth: SynthSpec = field(default_factory=SynthSpec)
    montecarlo: Optional[MonteCarloSpec] = None
    fit: Optional[FitSpec] = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: Path = Path(".")) -> "ExperimentConfig":
        root = _Reader(data, "")
        sources = root.items("sources")
        if len(sources) != 2:
            raise ConfigError("sources: expected exactly two source blocks")
        montecarlo = root.child("montecarlo")
        fit = root.child("fit")
        config = cls(
            sources=(SourceSpec.parse(sources[0]), SourceSpec.parse(sources[1])),
            detection=DetectionSpec.parse(root.child("detection", required=True), base_dir),
            entangler=EntanglerSpec.parse(root.child("entangler")),
            sweep=SweepSpec.parse(root.child("sweep")),
            synth=SynthSpec.parse(root.child("synth")),
            montecarlo=MonteCarloSpec.parse(montecarlo) if montecarlo else None,
            fit=FitSpec.parse(fit) if fit else None,
        )
        root.finish()
        return config

    def to_dict(self) -> Dict[str, Any]:
        """Fully resolved document; feeding it back to :func:`from_dict` gives an equal config."""
        return _plain(self)

    def entangler_config(self) -> EntanglerConfig:
        return EntanglerConfig(
            source_a=self.sources[0].model(),
            source_b=self.sources[1].model(),
            relative_phase=self.entangler.relative_phase_rad,
            beam_splitter_reflectivity=self.entangler.reflectivity,
        )

    def experiment(self) -> Experiment:
        try:
            return Experiment(self.entangler_config(), self.detection.chain())
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"detection: {exc}") from exc

    def sweep_config(self) -> SweepConfig:
        try:
            return self.sweep.config()
        except ValueError as exc:
            raise ConfigError(f"sweep: {exc}") from exc


def load_config(path: Path) -> ExperimentConfig:
    """Read and validate a configuration document."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: configuration file not found") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    config = ExperimentConfig.from_dict(data, base_dir=path.resolve().parent)
    logger.debug("Loaded configuration from %s", path)
    return config
