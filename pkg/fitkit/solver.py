"""Multi-start damped least squares over logistic-mapped bounded parameters."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, special

from .problem import FitError, FitProblem, model_residuals

logger = logging.getLogger(__name__)

DIFF_STEP = 1e-6
TOLERANCE = 1e-10
MAX_ITERATIONS = 500
BOUNDARY_FRACTION = 1e-3
# Random starts stay this fraction of the range away from the bounds, where the logistic map is flat.
START_MARGIN = 0.02


@dataclass(frozen=True)
class StartOutcome:
    index: int
    theta: np.ndarray
    cost: float
    evaluations: int
    converged: bool
    message: str
    jacobian_u: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class FitResult:
    parameters: Dict[str, float]
    uncertainties: Dict[str, float]
    covariance: np.ndarray
    residual_rms_db: float
    weighted_rms: float
    iterations: int
    converged: bool
    at_bounds: Dict[str, bool]
    masked_windows: List[Tuple[float, float]] = field(default_factory=list)
    best_start: int = 0
    starts: int = 1
    message: str = ""

    @property
    def boundary_solution(self) -> bool:
        return any(self.at_bounds.values())

    def to_dict(self) -> dict:
        """JSON-ready mirror; non-finite uncertainties (flat directions at a bound) become null."""
        names = list(self.parameters)
        return {
            "parameters": dict(self.parameters),
            "uncertainties": {name: _finite_or_none(value) for name, value in self.uncertainties.items()},
            "covariance": {
                "names": names,
                "matrix": [[_finite_or_none(value) for value in row] for row in self.covariance.tolist()],
            },
            "residual_rms_db": self.residual_rms_db,
            "weighted_rms": self.weighted_rms,
            "iterations": self.iterations,
            "converged": self.converged,
            "at_bounds": dict(self.at_bounds),
            "boundary_solution": self.boundary_solution,
            "masked_windows_hz": [list(window) for window in self.masked_windows],
            "best_start": self.best_start,
            "starts": self.starts,
            "message": self.message,
        }


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def to_unbounded(theta: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    fraction = np.clip((theta - lower) / (upper - lower), 1e-12, 1.0 - 1e-12)
    return special.logit(fraction)


def to_bounded(u: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return lower + (upper - lower) * special.expit(u)


def _bounded_derivative(u: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    s = special.expit(u)
    return (upper - lower) * s * (1.0 - s)


def start_points(problem: FitProblem) -> np.ndarray:
    """First start at the initial guesses (or mid-range); the rest uniform inside the margins."""
    lower, upper = problem.lower_bounds, problem.upper_bounds
    first = np.array([bound.start for bound in problem.free_parameters.values()])
    if problem.starts == 1:
        return first[np.newaxis, :]
    rng = np.random.default_rng(problem.seed)
    width = upper - lower
    others = rng.uniform(lower + START_MARGIN * width, upper - START_MARGIN * width, size=(problem.starts - 1, first.size))
    return np.vstack([first, others])


def _run_start(problem: FitProblem, index: int, theta0: np.ndarray) -> StartOutcome:
    lower, upper = problem.lower_bounds, problem.upper_bounds

    def residuals(u: np.ndarray) -> np.ndarray:
        return model_residuals(to_bounded(u, lower, upper), problem)

    u0 = to_unbounded(theta0, lower, upper)
    solution = optimize.least_squares(
        residuals,
        u0,
        method="lm",
        diff_step=DIFF_STEP,
        ftol=TOLERANCE,
        xtol=TOLERANCE,
        gtol=TOLERANCE,
        max_nfev=MAX_ITERATIONS * (u0.size + 1),
    )
    theta = to_bounded(solution.x, lower, upper)
    outcome = StartOutcome(
        index=index,
        theta=theta,
        cost=float(solution.cost),
        evaluations=int(solution.nfev),
        converged=bool(solution.status > 0),
        message=str(solution.message),
        jacobian_u=np.asarray(solution.jac, dtype=float),
        u=np.asarray(solution.x, dtype=float),
    )
    logger.debug(
        "Start %d: cost %.6g after %d evaluations (%s)", index, outcome.cost, outcome.evaluations, outcome.message
    )
    return outcome


def _covariance(outcome: StartOutcome, problem: FitProblem) -> np.ndarray:
    """Quadratic approximation at the optimum, mapped back through the logistic transform."""
    jac = outcome.jacobian_u
    cov_u = np.linalg.pinv(jac.T @ jac)
    scale = _bounded_derivative(outcome.u, problem.lower_bounds, problem.upper_bounds)
    return cov_u * np.outer(scale, scale)


def fit(problem: FitProblem, workers: int = 1) -> FitResult:
    """Fit the free parameters; the best start wins, ties broken by start index."""
    starts = start_points(problem)
    outcomes: List[Optional[StartOutcome]] = []
    failures: List[str] = []

    def attempt(item: Tuple[int, np.ndarray]) -> Optional[StartOutcome]:
        index, theta0 = item
        try:
            return _run_start(problem, index, theta0)
        except FitError as exc:
            logger.warning("Start %d failed: %s", index, exc)
            failures.append(f"start {index}: {exc}")
            return None

    items = list(enumerate(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(attempt, items))
    else:
        outcomes = [attempt(item) for item in items]
    completed = [outcome for outcome in outcomes if outcome is not None]
    if not completed:
        raise FitError("Every start failed: " + "; ".join(sorted(failures)))
    best = min(completed, key=lambda outcome: (outcome.cost, outcome.index))

    names = problem.parameter_names
    parameters = {name: float(value) for name, value in zip(names, best.theta)}
    covariance = _covariance(best, problem)
    margin = BOUNDARY_FRACTION * (problem.upper_bounds - problem.lower_bounds)
    at_bounds = {
        name: bool(value - lower <= edge or upper - value <= edge)
        for name, value, lower, upper, edge in zip(
            names, best.theta, problem.lower_bounds, problem.upper_bounds, margin
        )
    }
    # A parameter pinned to a bound has no curvature information left.
    uncertainties = {
        name: math.nan if at_bounds[name] else float(np.sqrt(max(covariance[i, i], 0.0)))
        for i, name in enumerate(names)
    }
    differences = problem.db_differences(parameters)
    residuals = model_residuals(best.theta, problem)
    result = FitResult(
        parameters=parameters,
        uncertainties=uncertainties,
        covariance=covariance,
        residual_rms_db=float(np.sqrt(np.mean(differences**2))),
        weighted_rms=float(np.sqrt(np.mean(residuals**2))),
        iterations=best.evaluations,
        converged=best.converged,
        at_bounds=at_bounds,
        masked_windows=list(problem.exclusion_windows),
        best_start=best.index,
        starts=len(starts),
        message=best.message,
    )
    if not result.converged:
        logger.warning("Fit did not converge (%s); reporting best-so-far %s", best.message, parameters)
    if result.boundary_solution:
        logger.warning("Boundary solution for %s", [name for name, flag in at_bounds.items() if flag])
    logger.info("Fit finished: %s, residual RMS %.4f dB", parameters, result.residual_rms_db)
    return result
