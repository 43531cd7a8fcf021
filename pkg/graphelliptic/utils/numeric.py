import logging
from dataclasses import dataclass
from math import sqrt
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

PHI_RATIO = 2 / (1 + sqrt(5))


def golden_section_max(f: Callable[[float], float], lower: float, upper: float,
                       tol: float = 1e-8, max_iterations: int = 200) -> tuple:
    """Maximize a unimodal f on [lower, upper]; returns (argmax, maximum)."""
    x1 = upper - PHI_RATIO * (upper - lower)
    x2 = lower + PHI_RATIO * (upper - lower)
    f1, f2 = f(x1), f(x2)
    iteration = 0
    while iteration < max_iterations and abs(upper - lower) > tol * max(1.0, abs(x1)):
        if f2 < f1:
            upper, x2, f2 = x2, x1, f1
            x1 = upper - PHI_RATIO * (upper - lower)
            f1 = f(x1)
        else:
            lower, x1, f1 = x1, x2, f2
            x2 = lower + PHI_RATIO * (upper - lower)
            f2 = f(x2)
        iteration += 1
    return (x1, f1) if f1 >= f2 else (x2, f2)


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    converged: bool


def armijo_descent(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    tol: float = 1e-10,
    max_iterations: int = 20000,
    sufficient_decrease: float = 1e-4,
    ftol: float = 0.0,
    patience: int = 5,
) -> DescentResult:
    """Projected gradient descent with backtracking (Armijo) line search.

    Convergence is declared when the projected step ||x - P(x - g)|| drops below tol.
    With ftol > 0 it is also declared after `patience` accepted steps in a row whose
    relative decrease is at most ftol, or when no step decreases the objective at all.
    """
    project = project or (lambda x: x)
    x = project(np.asarray(x0, dtype=float))
    value = objective(x)
    step = 1.0
    stationarity = np.inf
    flat_steps = 0

    for iteration in range(1, max_iterations + 1):
        g = gradient(x)
        stationarity = float(np.linalg.norm(x - project(x - g)))
        if stationarity <= tol * (1.0 + abs(value)):
            return DescentResult(x, value, stationarity, iteration, True)

        step = min(step * 2.0, 1e8)
        while True:
            candidate = project(x - step * g)
            candidate_value = objective(candidate)
            decrease = float(np.dot(g, x - candidate))
            if np.isfinite(candidate_value) and candidate_value <= value - sufficient_decrease * decrease:
                break
            step *= 0.5
            if step < 1e-18:
                logger.debug("Line search stalled at iteration %d (stationarity %.3e)", iteration, stationarity)
                return DescentResult(x, value, stationarity, iteration, ftol > 0.0)
        if ftol > 0.0 and value - candidate_value <= ftol * (1.0 + abs(value)):
            flat_steps += 1
        else:
            flat_steps = 0
        x, value = candidate, candidate_value
        if flat_steps >= patience:
            return DescentResult(x, value, stationarity, iteration, True)

    return DescentResult(x, value, stationarity, max_iterations, False)


def sample_ball(rng: np.random.Generator, factor: np.ndarray, radius: float, count: int) -> np.ndarray:
    """Uniform samples of {c : ||R c|| <= radius} for an upper-triangular Cholesky factor R."""
    dim = factor.shape[0]
    directions = rng.standard_normal((count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / dim)
    points = directions * radii[:, None]
    # ||R c|| = ||y||  =>  c = R^{-1} y
    return np.linalg.solve(factor, points.T).T
