"""Command line interface for the entanglement spectrum toolkit."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from analyzer.sweep import noisy_trace, sweep
from analyzer.traces import format_number, read_traces_csv, traces_to_csv, traces_to_json
from cavity.figures import CavityFigures, cavity_figures, circulating_power
from criteria.measures import classify
from fitkit.problem import FitData, FitProblem
from fitkit.solver import fit
from montecarlo.dump import empirical_csv, encode_raw_trace, sidecar_path
from montecarlo.oracle import empirical_spectrum, oracle_equivalence, synthesize_sources
from montecarlo.stages import dark_calibration, simulate_chain, vacuum_calibration

from .config import ConfigError, ExperimentConfig, load_config
from .outputs import atomic_write_bytes, atomic_write_json, atomic_write_text, default_output_dir, dump_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
FIGURE_COLUMNS = ("source", "wavelength", "fsr_hz", "finesse", "fwhm_hz", "hwhm_hz", "buildup", "escape_efficiency")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def _figures_dict(figures: CavityFigures) -> Dict[str, Optional[float]]:
    return {key: _finite_or_none(value) for key, value in figures.to_dict().items()}


def _csv_text(header: Sequence[str], rows: List[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([value if isinstance(value, str) else format_number(value) for value in row])
    return buffer.getvalue()


def run_cavity(config: ExperimentConfig) -> Dict[str, Any]:
    """Figures of merit of every source cavity at both wavelengths."""
    report = []
    for source in config.sources:
        if source.cavity is None:
            logger.warning("Source %s has no cavity block; skipped", source.name)
            continue
        entry: Dict[str, Any] = {
            "source": source.name,
            "signal": _figures_dict(cavity_figures(source.cavity.signal_geometry())),
        }
        pump_geometry = source.cavity.pump_geometry()
        if pump_geometry is not None:
            entry["pump"] = _figures_dict(cavity_figures(pump_geometry))
            entry["circulating_pump_power_w"] = circulating_power(pump_geometry, source.pump_power_mw * 1e-3)
            if source.threshold_power_mw is not None:
                entry["circulating_threshold_power_w"] = circulating_power(
                    pump_geometry, source.threshold_power_mw * 1e-3
                )
        report.append(entry)
    if not report:
        raise ConfigError("sources: no source defines a cavity block")
    return {"cavities": report, "config": config.to_dict()}


def cavity_csv(report: Dict[str, Any]) -> str:
    rows = []
    for entry in report["cavities"]:
        for wavelength in ("signal", "pump"):
            figures = entry.get(wavelength)
            if figures is None:
                continue
            values = [figures[name] for name in FIGURE_COLUMNS[2:]]
            rows.append([entry["source"], wavelength] + [math.nan if v is None else v for v in values])
    return _csv_text(FIGURE_COLUMNS, rows)


def run_threshold(config: ExperimentConfig) -> Dict[str, Any]:
    report = []
    for source in config.sources:
        result = source.threshold_result()
        if result is None:
            continue
        entry = {"source": source.name, **result.to_dict()}
        entry["p_thr_input_mw"] = result.p_thr_input * 1e3
        entry["circulating_to_input_ratio"] = result.p_thr_circulating / result.p_thr_input
        report.append(entry)
    if not report:
        raise ConfigError("sources: no source defines a threshold block")
    return {"thresholds": report, "config": config.to_dict()}


def run_spectrum(config: ExperimentConfig, out_dir: Path) -> Dict[str, Any]:
    traces = sweep(config.experiment(), config.sweep_config())
    atomic_write_text(out_dir / "spectrum.csv", traces_to_csv(traces))
    atomic_write_json(out_dir / "spectrum.json", traces_to_json(traces, config.to_dict()))
    summary = classify(traces.criteria()).to_dict()
    logger.info("Minimum Duan value %.4f at %.1f MHz", summary["min_duan"]["value"], summary["min_duan"]["frequency_hz"] / 1e6)
    return {"classification": summary, "outputs": ["spectrum.csv", "spectrum.json"]}


def _run_montecarlo(config: ExperimentConfig, out_dir: Path, seed: Optional[int]) -> Dict[str, Any]:
    spec = config.montecarlo
    synthesis = spec.synthesis_config(seed)
    experiment = config.experiment()
    entangler = experiment.entangler
    sources = synthesize_sources(entangler, synthesis)
    outputs = simulate_chain(
        *sources,
        experiment.chain,
        synthesis,
        relative_phase=entangler.relative_phase,
        reflectivity=entangler.beam_splitter_reflectivity,
        efficiencies=experiment.mode_efficiencies,
    )
    vacuum = vacuum_calibration(experiment.chain, synthesis)
    dark = dark_calibration(experiment.chain, synthesis) if experiment.chain.dark_noise_subtracted else None
    written = []
    if spec.dump_raw:
        for name, trace in (
            ("x_sum", outputs.x_sum),
            ("y_diff", outputs.y_diff),
            ("vacuum_x_sum", vacuum.x_sum),
            ("vacuum_y_diff", vacuum.y_diff),
        ):
            payload, sidecar = encode_raw_trace(trace, synthesis)
            atomic_write_bytes(out_dir / "raw" / f"{name}.f64", payload)
            atomic_write_text(sidecar_path(out_dir / "raw" / f"{name}.f64"), sidecar)
            written.append(f"raw/{name}.f64")
    spectrum = empirical_spectrum(
        outputs, vacuum, synthesis, dark=dark, band=spec.band_hz, bin_width=spec.bin_width_mhz * 1e6
    )
    atomic_write_text(out_dir / "empirical.csv", empirical_csv(spectrum))
    written.append("empirical.csv")
    result: Dict[str, Any] = {"empirical_min_duan": float(np.min(spectrum.duan)), "outputs": written}
    if spec.oracle:
        results = oracle_equivalence(synthesis, band=spec.band_hz, bin_width=spec.bin_width_mhz * 1e6)
        document = {"cases": [item.to_dict() for item in results], "passed": all(item.passed() for item in results)}
        atomic_write_json(out_dir / "oracle.json", document)
        written.append("oracle.json")
        result["oracle_passed"] = document["passed"]
    return result


def run_synth(config: ExperimentConfig, out_dir: Path, seed: Optional[int] = None) -> Dict[str, Any]:
    """Noisy analyzer traces, plus Monte-Carlo empirical spectra when configured."""
    sweep_config = config.sweep_config()
    clean = sweep(config.experiment(), sweep_config)
    noise_seed = config.synth.seed if seed is None else seed
    noisy = noisy_trace(clean, sweep_config, noise_seed, spurs=config.synth.spurs_hz(), sigma_db=config.synth.sigma_db)
    atomic_write_text(out_dir / "synthetic.csv", traces_to_csv(noisy))
    atomic_write_json(out_dir / "synthetic.json", traces_to_json(noisy, config.to_dict()))
    summary: Dict[str, Any] = {
        "sigma_db": config.synth.sigma_db or sweep_config.sigma_db,
        "seed": noise_seed,
        "outputs": ["synthetic.csv", "synthetic.json"],
    }
    if config.montecarlo is not None:
        montecarlo = _run_montecarlo(config, out_dir, seed)
        summary["outputs"].extend(montecarlo.pop("outputs"))
        summary["montecarlo"] = montecarlo
    return summary


def build_fit_problem(config: ExperimentConfig, data_path: Path, seed: Optional[int] = None) -> FitProblem:
    if config.fit is None:
        raise ConfigError("fit: missing field")
    spec = config.fit
    sweep_config = config.sweep_config()
    traces = read_traces_csv(data_path)
    sigma = spec.sigma_db if spec.sigma_db is not None else sweep_config.sigma_db
    return FitProblem(
        data=FitData.from_traces(traces, sigma),
        experiment=config.experiment(),
        free_parameters=spec.parameter_bounds(),
        exclusion_windows=spec.exclusion_windows_hz(),
        band_splits=sweep_config.band_splits,
        residual_domain=spec.residual_domain,
        quantity=spec.quantity,
        starts=spec.starts,
        seed=spec.seed if seed is None else seed,
    )


def run_fit(config: ExperimentConfig, data_path: Path, out_dir: Path, seed: Optional[int] = None) -> Dict[str, Any]:
    problem = build_fit_problem(config, data_path, seed)
    result = fit(problem, workers=config.fit.workers)
    document = {"result": result.to_dict(), "problem": problem.to_dict(), "config": config.to_dict()}
    atomic_write_json(out_dir / "fit.json", document)
    return document["result"]


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="Experiment configuration (JSON)")
    common.add_argument("--out", type=Path, default=None, help="Output directory (default: $ENTANGLER_OUTPUT_DIR or .)")
    common.add_argument("--format", choices=("csv", "json"), default="json", help="Report format on stdout")
    common.add_argument("--seed", type=int, default=None, help="Override every configured seed")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = _Parser(description="Broadband Gaussian entanglement spectra: model, synthesis and fitting")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands.add_parser("cavity", parents=[common], help="Cavity figures of merit")
    commands.add_parser("threshold", parents=[common], help="Parametric oscillation threshold")
    commands.add_parser("spectrum", parents=[common], help="Analyzer sweep of the analytic model")
    commands.add_parser("synth", parents=[common], help="Noisy traces and Monte-Carlo spectra")
    fit_parser = commands.add_parser("fit", parents=[common], help="Fit model parameters to a trace CSV")
    fit_parser.add_argument("--data", type=Path, required=True, help="Trace CSV in the analyzer format")
    return parser


def dispatch(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    out_dir = args.out or default_output_dir() or Path(".")
    if args.command == "cavity":
        report = run_cavity(config)
        text = cavity_csv(report) if args.format == "csv" else dump_json(report)
        atomic_write_text(out_dir / f"cavity.{args.format}", text)
    elif args.command == "threshold":
        report = run_threshold(config)
        if args.format == "csv":
            header = list(report["thresholds"][0])
            text = _csv_text(header, [[entry[key] for key in header] for entry in report["thresholds"]])
        else:
            text = dump_json(report)
        atomic_write_text(out_dir / f"threshold.{args.format}", text)
    elif args.command == "spectrum":
        text = dump_json(run_spectrum(config, out_dir))
    elif args.command == "synth":
        text = dump_json(run_synth(config, out_dir, args.seed))
    else:
        text = dump_json(run_fit(config, args.data, out_dir, args.seed))
    _emit(text)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return dispatch(args)
    except np.linalg.LinAlgError as exc:
        logger.error("Numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (RuntimeError, ArithmeticError) as exc:
        logger.error("Numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
