"""Raw trace dumps (little-endian float64 plus JSON sidecar) and empirical-spectrum CSV."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Tuple

import numpy as np

from analyzer.traces import traces_to_csv

from .oracle import EmpiricalSpectrum
from .synthesis import QuadratureTrace, SynthesisConfig, SynthesisError

logger = logging.getLogger(__name__)

RAW_DTYPE = "<f8"


def sidecar_path(raw_path: Path) -> Path:
    return Path(raw_path).with_suffix(".json")


def encode_raw_trace(trace: QuadratureTrace, config: SynthesisConfig) -> Tuple[bytes, str]:
    """Sample bytes and the JSON sidecar text for one trace."""
    metadata = {
        "dtype": RAW_DTYPE,
        "n_samples": len(trace),
        "sample_rate_hz": config.sample_rate,
        "seed": config.seed,
        "label": trace.label,
        "stage": trace.stage,
    }
    payload = np.asarray(trace.samples, dtype=RAW_DTYPE).tobytes()
    return payload, json.dumps(metadata, indent=2, sort_keys=True) + "\n"


def write_raw_trace(trace: QuadratureTrace, config: SynthesisConfig, path: Path) -> Tuple[Path, Path]:
    """Write samples to ``path`` and metadata to the sibling ``.json`` file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload, sidecar_text = encode_raw_trace(trace, config)
    path.write_bytes(payload)
    sidecar = sidecar_path(path)
    sidecar.write_text(sidecar_text, encoding="utf-8")
    logger.debug("Dumped %d samples of %s to %s", len(trace), trace.label, path)
    return path, sidecar


def read_raw_trace(path: Path) -> Tuple[QuadratureTrace, dict]:
    """Load a dump written by :func:`write_raw_trace`; returns the trace and its metadata."""
    path = Path(path)
    try:
        metadata = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise SynthesisError(f"Missing sidecar for raw trace {path}") from exc
    if metadata.get("dtype") != RAW_DTYPE:
        raise SynthesisError(f"Unsupported raw dtype {metadata.get('dtype')!r} in {path}")
    samples = np.frombuffer(path.read_bytes(), dtype=RAW_DTYPE).astype(float)
    if samples.size != metadata.get("n_samples"):
        raise SynthesisError(
            f"{path} holds {samples.size} samples, sidecar declares {metadata.get('n_samples')}"
        )
    trace = QuadratureTrace(samples, label=metadata.get("label", ""), stage=metadata.get("stage", "source"))
    return trace, metadata


def empirical_csv(spectrum: EmpiricalSpectrum) -> str:
    """Empirical spectrum in the analyzer's CSV layout (Reid column empty as NaN)."""
    return traces_to_csv(spectrum.to_trace_set())
