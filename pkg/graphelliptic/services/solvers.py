"""Multiple critical points of J_lambda.

The ball minimizer gives the solution inside B_rho; a deflated Newton search from seeded
starts collects the rest. Truncation (f+) and the Yamabe path reuse the same search and
then check the sign of what they found.
"""
import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import splu, spsolve

from graphelliptic.config import settings
from graphelliptic.errors import (
    HypothesisViolated,
    NegativePartNonzero,
    NoInteriorMinimizer,
    NonConvergence,
    OnlyTrivialFound,
)
from graphelliptic.models.graph import DomainDecomp, FunctionLike, VertexFn
from graphelliptic.models.nonlinearity import Branch, Nonlinearity
from graphelliptic.models.schemas import SolutionEntry, SolveReportModel, SolverTrace
from graphelliptic.services.calculus import assemble_stiffness
from graphelliptic.services.spectral import lambda1
from graphelliptic.services.variational import (
    LambdaStar,
    ProblemSpec,
    Regime,
    check_ar,
    check_f1l,
    classical_residual,
    energy,
    energy_gradient,
    lambda_admissible,
    lambda_star,
)
from graphelliptic.utils.numeric import armijo_descent, sample_ball

logger = logging.getLogger(__name__)

ROOTS_PER_START = 4
HypothesisValue = Union[bool, float, str, None]


# Report types

def sign_profile(u: VertexFn) -> str:
    tol = settings.tolerances
    interior = u.interior_values
    if np.max(np.abs(u.values)) <= tol.trivial:
        return "trivial"
    low = float(np.min(interior))
    if low > tol.positivity:
        return "positive"
    if low >= -tol.positivity:
        return "nonnegative"
    return "signed"


@dataclass(frozen=True, eq=False)
class Solution:
    u: VertexFn
    energy: float
    classical_residual_max: float
    alpha_norm_sq: float  # ||u||^p of the problem's ball norm; ||u||_alpha^2 for the semilinear problem
    in_ball: Optional[bool] = None

    @property
    def sign_profile(self) -> str:
        return sign_profile(self.u)

    @property
    def trivial(self) -> bool:
        return self.sign_profile == "trivial"

    def sort_key(self) -> Tuple[float, float]:
        return float(f"{self.energy:.12g}"), float(np.max(self.u.interior_values))

    def to_entry(self) -> SolutionEntry:
        return SolutionEntry(
            values=self.u.as_dict(),
            energy=self.energy,
            classical_residual_max=self.classical_residual_max,
            alpha_norm_sq=self.alpha_norm_sq,
            in_ball=self.in_ball,
            sign_profile=self.sign_profile,
            trivial=self.trivial,
        )


@dataclass
class SearchTrace:
    restarts: int = 0
    converged_restarts: int = 0
    newton_iterations: int = 0
    deflations: int = 0
    mode: str = "deflate"

    def to_model(self) -> SolverTrace:
        return SolverTrace(
            restarts=self.restarts,
            converged_restarts=self.converged_restarts,
            newton_iterations=self.newton_iterations,
            deflations=self.deflations,
            mode=self.mode,
        )


@dataclass(eq=False)
class SolveReport:
    solutions: List[Solution]
    lambda_used: float
    lambda_star: Optional[LambdaStar]
    rho: Optional[float]
    hypotheses: Dict[str, HypothesisValue]
    trace: SearchTrace
    seed: int
    positive: Optional[bool] = None

    def nontrivial(self) -> List[Solution]:
        return [s for s in self.solutions if not s.trivial]

    def to_model(self) -> SolveReportModel:
        star = self.lambda_star
        return SolveReportModel(
            solutions=[s.to_entry() for s in self.solutions],
            lambda_used=self.lambda_used,
            lambda_star=None if star is None or star.infinite else star.value,
            lambda_star_infinite=bool(star is not None and star.infinite),
            rho=self.rho,
            hypotheses=self.hypotheses,
            solver_trace=self.trace.to_model(),
            seed=self.seed,
            positive=self.positive,
        )


# Critical point problems

class CriticalPointProblem(ABC):
    """Smooth functional on coordinates c; lift(c) gives the D values."""

    dom: DomainDecomp

    @property
    @abstractmethod
    def dimension(self) -> int: ...

    @property
    @abstractmethod
    def metric(self) -> np.ndarray:
        """SPD matrix of the norm used for starts, trust caps and balls."""

    @abstractmethod
    def lift(self, c: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def energy(self, c: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, c: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, c: np.ndarray) -> Union[np.ndarray, sparse.spmatrix]: ...

    @abstractmethod
    def residual(self, c: np.ndarray, g: Optional[np.ndarray] = None) -> float:
        """Pointwise equation residual, sup over the free vertices."""

    @abstractmethod
    def ball_norm(self, c: np.ndarray) -> float: ...

    @cached_property
    def metric_factor(self) -> np.ndarray:
        """Upper Cholesky factor R of the metric, ||c|| = ||R c||."""
        return linalg.cholesky(self.metric, lower=False)

    def accepts(self, c: np.ndarray, g: Optional[np.ndarray] = None) -> bool:
        scale = 1.0 + float(np.max(np.abs(self.lift(c))))
        return self.residual(c, g) <= settings.tolerances.solution_residual * scale

    def norm(self, c: np.ndarray) -> float:
        return float(np.linalg.norm(self.metric_factor @ c))

    def solution(self, c: np.ndarray, rho: Optional[float] = None) -> Solution:
        norm = self.ball_norm(c)
        return Solution(
            u=VertexFn(self.dom, self.lift(c)),
            energy=self.energy(c),
            classical_residual_max=self.residual(c),
            alpha_norm_sq=norm,
            in_ball=None if rho is None else bool(norm < rho),
        )


class SemilinearProblem(CriticalPointProblem):
    """J_lambda on the interior coordinates of the Dirichlet class."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.dom = spec.dom
        self.stiffness = spec.alpha_stiffness
        self.mass = self.dom.mu[self.dom.interior_positions]
        self.logger = logging.getLogger(__name__)

    @property
    def dimension(self) -> int:
        return len(self.spec.interior)

    @cached_property
    def metric(self) -> np.ndarray:
        dense = self.stiffness.toarray()
        try:
            linalg.cholesky(dense)
            return dense
        except linalg.LinAlgError:
            self.logger.warning("alpha-form is not positive definite; sampling in the Dirichlet norm")
            return assemble_stiffness(self.dom).interior.toarray()

    def lift(self, c: np.ndarray) -> np.ndarray:
        values = np.zeros(self.dom.size)
        values[self.dom.interior_positions] = c
        return values

    def energy(self, c: np.ndarray) -> float:
        quadratic = float(c @ (self.stiffness @ c))
        return quadratic / (2.0 * self.spec.lam) - float(np.dot(self.mass, self.spec.f.potential(self.spec.interior, c)))

    def gradient(self, c: np.ndarray) -> np.ndarray:
        return self.stiffness @ c / self.spec.lam - self.mass * self.spec.f.value(self.spec.interior, c)

    def hessian(self, c: np.ndarray) -> sparse.csr_matrix:
        curvature = self.mass * self.spec.f.derivative(self.spec.interior, c)
        return (self.stiffness / self.spec.lam - sparse.diags(curvature)).tocsr()

    def residual(self, c: np.ndarray, g: Optional[np.ndarray] = None) -> float:
        g = self.gradient(c) if g is None else g
        return float(np.max(np.abs(self.spec.lam * g / self.mass)))

    def ball_norm(self, c: np.ndarray) -> float:
        return float(c @ (self.stiffness @ c))


# Deflated Newton engine

class DeflationOperator:
    """M(c) = prod_i (1 / (||c - c_i||^2 + tau) + shift) over the known roots c_i."""

    def __init__(self, tau: Optional[float] = None, shift: Optional[float] = None,
                 roots: Sequence[np.ndarray] = ()):
        self.tau = settings.tolerances.deflation_tau if tau is None else tau
        self.shift = settings.deflation_shift if shift is None else shift
        self.roots: List[np.ndarray] = [np.asarray(r, dtype=float) for r in roots]

    def __len__(self) -> int:
        return len(self.roots)

    def add(self, root: np.ndarray):
        self.roots.append(np.asarray(root, dtype=float).copy())

    def clear(self):
        self.roots.clear()

    def copy(self) -> "DeflationOperator":
        return DeflationOperator(self.tau, self.shift, self.roots)

    def log_factor(self, c: np.ndarray) -> float:
        total = 0.0
        for root in self.roots:
            d2 = float(np.dot(c - root, c - root)) + self.tau
            total += np.log(1.0 / d2 + self.shift)
        return total

    def log_gradient(self, c: np.ndarray) -> np.ndarray:
        """grad M / M."""
        out = np.zeros_like(c)
        for root in self.roots:
            diff = c - root
            d2 = float(np.dot(diff, diff)) + self.tau
            out -= 2.0 * diff / (d2 * (1.0 + self.shift * d2))
        return out

    def step_scale(self, c: np.ndarray, delta: np.ndarray) -> float:
        """Newton step of M G is the Newton step of G times this factor."""
        if not self.roots:
            return 1.0
        denominator = 1.0 - float(np.dot(self.log_gradient(c), delta))
        if abs(denominator) < 1e-14:
            return 1.0
        return 1.0 / denominator


@dataclass
class NewtonOutcome:
    c: np.ndarray
    converged: bool
    iterations: int


@dataclass
class SearchResult:
    roots: List[np.ndarray] = field(default_factory=list)
    trace: SearchTrace = field(default_factory=SearchTrace)


class DeflatedNewtonSearch:
    """Damped Newton with deflation, restarted from a batch of starts."""

    def __init__(self, problem: CriticalPointProblem, radius: float):
        self.problem = problem
        self.radius = radius
        self.abort_radius = 1e3 * max(radius, 1.0)
        self.logger = logging.getLogger(__name__)

    def direction(self, c: np.ndarray, g: np.ndarray) -> np.ndarray:
        tol = settings.tolerances
        hessian = self.problem.hessian(c)
        if sparse.issparse(hessian):
            if hessian.shape[0] > settings.dense_eigen_limit:
                try:
                    return splu(hessian.tocsc()).solve(-g)
                except RuntimeError:
                    shifted = hessian + tol.levenberg_shift * sparse.identity(hessian.shape[0])
                    return np.atleast_1d(spsolve(shifted.tocsc(), -g))
            hessian = hessian.toarray()
        sigma_min = np.linalg.svd(hessian, compute_uv=False)[-1]
        if sigma_min < tol.newton_singular:
            hessian = hessian + tol.levenberg_shift * np.eye(len(g))
        try:
            return np.linalg.solve(hessian, -g)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(hessian, -g, rcond=None)[0]

    def _merit(self, c: np.ndarray, deflation: Optional[DeflationOperator]) -> float:
        g = self.problem.gradient(c)
        norm = float(np.linalg.norm(g))
        if not np.isfinite(norm):
            return np.inf
        if norm == 0.0:
            return -np.inf
        return np.log(norm) + (deflation.log_factor(c) if deflation else 0.0)

    def newton(self, c0: np.ndarray, deflation: Optional[DeflationOperator] = None,
               max_iterations: Optional[int] = None) -> NewtonOutcome:
        max_iterations = max_iterations or settings.max_newton_iterations
        c = np.array(c0, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for iteration in range(1, max_iterations + 1):
                g = self.problem.gradient(c)
                if not np.all(np.isfinite(g)):
                    return NewtonOutcome(c, False, iteration)
                if self.problem.accepts(c, g):
                    return NewtonOutcome(c, True, iteration)

                delta = self.direction(c, g)
                if deflation:
                    delta = delta * deflation.step_scale(c, delta)
                length = self.problem.norm(delta)
                if not np.isfinite(length):
                    return NewtonOutcome(c, False, iteration)
                if length > self.radius:
                    delta = delta * (self.radius / length)

                merit = self._merit(c, deflation)
                step = 1.0
                for _ in range(12):
                    if self._merit(c + step * delta, deflation) < merit:
                        break
                    step *= 0.5
                else:
                    step = 1.0
                c = c + step * delta
                if self.problem.norm(c) > self.abort_radius:
                    self.logger.debug("Newton iterate left the search region after %d steps", iteration)
                    return NewtonOutcome(c, False, iteration)
        return NewtonOutcome(c, False, max_iterations)

    def polish(self, c: np.ndarray, steps: int = 3) -> np.ndarray:
        """A few undeflated Newton steps, kept only while the residual drops."""
        best, best_residual = c, self.problem.residual(c)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for _ in range(steps):
                if best_residual == 0.0:
                    break
                try:
                    candidate = best + self.direction(best, self.problem.gradient(best))
                except np.linalg.LinAlgError:
                    break
                residual = self.problem.residual(candidate)
                if not residual < best_residual:
                    break
                best, best_residual = candidate, residual
        return best

    def _distinct(self, c: np.ndarray, known: Sequence[np.ndarray]) -> Optional[int]:
        """Index of the known root within the distinctness threshold, if any."""
        values = self.problem.lift(c)
        for i, other in enumerate(known):
            if np.max(np.abs(values - self.problem.lift(other))) <= settings.tolerances.distinct:
                return i
        return None

    def explore(self, start: np.ndarray, deflation: DeflationOperator) -> Tuple[List[np.ndarray], int, int]:
        """Roots reached from one start, deflating each before retrying; (roots, iterations, deflations)."""
        found: List[np.ndarray] = []
        iterations = 0
        for _ in range(ROOTS_PER_START):
            try:
                outcome = self.newton(start, deflation)
            except (np.linalg.LinAlgError, FloatingPointError, ValueError, RuntimeError) as e:
                self.logger.debug("Restart dropped: %s", e)
                break
            iterations += outcome.iterations
            if not outcome.converged:
                break
            root = self.polish(outcome.c)
            if not self.problem.accepts(root):
                break
            if self._distinct(root, deflation.roots) is not None:
                break
            found.append(root)
            deflation.add(root)
        return found, iterations, len(found)

    def search(self, starts: Sequence[np.ndarray], mode: str = "deflate") -> SearchResult:
        result = SearchResult(trace=SearchTrace(restarts=len(starts), mode=mode))
        known = DeflationOperator()
        batch_size = max(1, settings.restart_batch)
        with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
            for first in range(0, len(starts), batch_size):
                batch = starts[first:first + batch_size]
                snapshots = [known.copy() for _ in batch]
                outcomes = list(pool.map(self.explore, batch, snapshots))
                # merge in start order regardless of completion order
                for roots, iterations, deflations in outcomes:
                    result.trace.newton_iterations += iterations
                    result.trace.deflations += deflations
                    if roots:
                        result.trace.converged_restarts += 1
                    for root in roots:
                        self._merge(root, known)
        result.roots = list(known.roots)
        self.logger.debug("Deflated search: %d roots from %d starts", len(result.roots), len(starts))
        return result

    def _merge(self, root: np.ndarray, known: DeflationOperator):
        duplicate = self._distinct(root, known.roots)
        if duplicate is None:
            known.add(root)
        elif self.problem.residual(root) < self.problem.residual(known.roots[duplicate]):
            known.roots[duplicate] = root


# Bounds used to size the search

@dataclass(frozen=True)
class PsCertificate:
    radius: float  # +inf when unusable
    usable: bool
    coefficient: float  # 1/2 - 1/beta
    linear_term: float
    constant_term: float
    max_iterate_norm: float


def _max_principle_side(branch: Branch, lam: float, c: float) -> float:
    """sup{r >= 0 : lam |f(r)| <= c r} along one sign branch of F."""
    h = Branch({e: lam * a for e, a in branch.derivative().coefficients.items()})
    if h.is_zero():
        return np.inf
    top = h.max_exponent()
    if top < 1.0 or (top == 1.0 and abs(h.leading_coefficient()) <= c):
        return np.inf
    below = dict(h.coefficients)
    below[1.0] = below.get(1.0, 0.0) - c
    above = dict(h.coefficients)
    above[1.0] = above.get(1.0, 0.0) + c
    upper = np.inf if h.is_polynomial() else 1e8
    roots = np.concatenate([Branch(below).roots(upper), Branch(above).roots(upper)])
    return float(roots.max()) if len(roots) else 0.0


def sup_norm_a_priori_bound(spec: ProblemSpec) -> float:
    """Maximum-principle bound on ||u||_inf over every solution; +inf when f grows at most linearly.

    At the vertex where |u| peaks, |lam f(x, u)| <= (2 deg(x)/mu(x) + |alpha(x)|) |u|.
    """
    dom = spec.dom
    interior = dom.interior_positions
    slopes = 2.0 * dom.degrees[interior] / dom.mu[interior] + np.abs(spec.alpha_interior)
    bound = 0.0
    for c, b in zip(slopes, spec.f.branches(spec.interior)):
        for branch in (b.positive, b.negative):
            side = _max_principle_side(branch, spec.lam, float(c))
            if np.isinf(side):
                return float("inf")
            bound = max(bound, side)
    return bound


def _dual_norm(spec: ProblemSpec, coefficients: np.ndarray) -> float:
    solved = np.atleast_1d(spsolve(spec.alpha_stiffness.tocsc(), coefficients))
    return float(np.sqrt(max(float(np.dot(coefficients, solved)), 0.0)))


def ps_boundedness_diagnostic(spec: ProblemSpec, trajectory: Sequence[FunctionLike]) -> PsCertificate:
    """A-priori alpha-norm radius of a Palais-Smale sequence from the AR estimate.

    With a = 1/2 - 1/beta every iterate obeys a ||u||^2 <= b ||u|| + c, where
    b = lam sup ||J'(u_k)||_* / beta and c = lam sup |J(u_k)| + lam B / beta,
    B bounding int (beta F - t f)+ over |t| < r0.
    """
    f = spec.f
    if f.ar_beta is None or f.ar_r0 is None:
        raise HypothesisViolated("no AR parameters (beta, r0) on the nonlinearity")
    spec.alpha.require_valid()
    beta, r0 = f.ar_beta, f.ar_r0
    check = check_ar(f, beta, r0, spec.interior)
    if not check.passed:
        raise HypothesisViolated(f"AR condition fails at {check.witness}")

    vertices = spec.interior
    t = np.broadcast_to(np.linspace(-r0, r0, 2001), (len(vertices), 2001))
    excess = np.maximum(beta * f.potential(vertices, t) - t * f.value(vertices, t), 0.0)
    bounded_term = float(np.dot(spec.dom.mu[spec.dom.interior_positions], excess.max(axis=1)))

    sup_energy, sup_dual, sup_norm = 0.0, 0.0, 0.0
    for u in trajectory:
        values = spec.dom.coerce_dirichlet(u)
        interior = values[spec.dom.interior_positions]
        sup_energy = max(sup_energy, abs(energy(spec, values)))
        sup_dual = max(sup_dual, _dual_norm(spec, energy_gradient(spec, values).coefficients))
        sup_norm = max(sup_norm, float(np.sqrt(max(interior @ (spec.alpha_stiffness @ interior), 0.0))))

    a = 0.5 - 1.0 / beta
    b = spec.lam * sup_dual / beta
    c = spec.lam * sup_energy + spec.lam * bounded_term / beta
    usable = a > 1e-8
    radius = (b + np.sqrt(b * b + 4.0 * a * c)) / (2.0 * a) if usable else float("inf")
    if not usable:
        logger.warning("PS radius unusable: beta = %g is too close to 2", beta)
    return PsCertificate(
        radius=float(radius),
        usable=usable,
        coefficient=a,
        linear_term=b,
        constant_term=c,
        max_iterate_norm=sup_norm,
    )


def start_radius(spec: ProblemSpec, problem: SemilinearProblem) -> float:
    """Metric radius that contains every solution when the max principle bounds them."""
    bound = sup_norm_a_priori_bound(spec)
    if np.isfinite(bound) and bound > 0.0:
        return float(bound * np.sqrt(np.abs(problem.metric).sum()))
    if spec.f.ar_beta is not None and spec.f.ar_r0 is not None and spec.alpha.regime is not Regime.INVALID:
        try:
            certificate = ps_boundedness_diagnostic(spec, [VertexFn.zeros(spec.dom)])
            if certificate.usable:
                return certificate.radius
        except HypothesisViolated as e:
            logger.debug("PS radius not available: %s", e)
    return settings.default_start_radius


# Solvers

def hypothesis_flags(spec: ProblemSpec, rho: Optional[float] = None) -> Tuple[Dict[str, HypothesisValue], Optional[LambdaStar]]:
    valid = spec.alpha.regime is not Regime.INVALID
    f0 = bool(np.any(spec.f.value_at_zero(spec.interior) != 0.0))
    flags: Dict[str, HypothesisValue] = {"regime": spec.alpha.regime.value, "f_at_zero_nonzero": f0}
    ar = None
    if spec.f.ar_beta is not None and spec.f.ar_r0 is not None:
        ar = check_ar(spec.f, spec.f.ar_beta, spec.f.ar_r0, spec.interior).passed
    flags["ar_sampled"] = ar
    star = lambda_star(spec) if valid else None
    below_star = None if star is None else bool(spec.lam < star.value)
    flags["lambda_below_star"] = below_star
    if rho is not None and valid:
        flags["lambda_admissible_rho"] = bool(spec.lam < lambda_admissible(spec, rho))
    flags["theorem_applicable"] = bool(valid and ar and f0 and below_star)
    return flags, star


def _report(spec: ProblemSpec, solutions: List[Solution], trace: SearchTrace, seed: int,
            rho: Optional[float]) -> SolveReport:
    flags, star = hypothesis_flags(spec, rho)
    if star is not None and not spec.lam < star.value:
        logger.warning("lambda = %g is not below lambda* = %g", spec.lam, star.value)
    return SolveReport(
        solutions=sorted(solutions, key=Solution.sort_key),
        lambda_used=spec.lam,
        lambda_star=star,
        rho=rho,
        hypotheses=flags,
        trace=trace,
        seed=seed,
    )


def search_critical_points(problem: CriticalPointProblem, radius: float, budget: int, seed: int,
                           mode: str = "deflate") -> SearchResult:
    """Zero start plus budget - 1 uniform starts in the metric ball of the given radius."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    starts = [np.zeros(problem.dimension)]
    if budget > 1:
        starts.extend(sample_ball(rng, problem.metric_factor, radius, budget - 1))
    return DeflatedNewtonSearch(problem, radius).search(starts, mode=mode)


def find_all_solutions(spec: ProblemSpec, budget: Optional[int] = None, seed: Optional[int] = None,
                       rho: Optional[float] = None, mode: str = "deflate") -> SolveReport:
    """Distinct classical solutions by deflated Newton from seeded starts.

    mode="mountain-pass" adds the string-method saddle and the ball minimizer to the set.
    """
    budget = settings.default_budget if budget is None else budget
    seed = settings.default_seed if seed is None else seed
    problem = SemilinearProblem(spec)
    radius = start_radius(spec, problem)
    logger.debug("Search radius %.6g over %d starts", radius, budget)
    found = search_critical_points(problem, radius, budget, seed, mode=mode)
    solutions = [problem.solution(c, rho) for c in found.roots]

    if mode == "mountain-pass":
        if rho is None:
            raise ValueError("mountain-pass mode needs rho")
        extra = [minimize_in_ball(spec, rho), mountain_pass(spec, rho)]
        for candidate in extra:
            if all(np.max(np.abs(candidate.u.values - s.u.values)) > settings.tolerances.distinct for s in solutions):
                solutions.append(candidate)
    elif mode != "deflate":
        raise ValueError(f"unknown mode {mode!r}")

    if not solutions:
        raise NonConvergence(f"none of {budget} restarts converged")
    return _report(spec, solutions, found.trace, seed, rho)


def minimize_in_ball(spec: ProblemSpec, rho: float) -> Solution:
    """Local minimizer of J_lambda strictly inside ||u||_alpha^2 < rho."""
    spec.alpha.require_valid()
    tol = settings.tolerances
    admissible = lambda_admissible(spec, rho)
    if not spec.lam < admissible:
        logger.warning("lambda = %g outside the admissible interval (0, %g); running anyway", spec.lam, admissible)

    problem = SemilinearProblem(spec)
    factor = problem.metric_factor
    radius = float(np.sqrt(rho))

    def to_coords(y: np.ndarray) -> np.ndarray:
        return linalg.solve_triangular(factor, y, lower=False)

    def project(y: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(y))
        return y * (radius / norm) if norm > radius else y

    result = armijo_descent(
        lambda y: problem.energy(to_coords(y)),
        lambda y: linalg.solve_triangular(factor, problem.gradient(to_coords(y)), trans="T", lower=False),
        np.zeros(problem.dimension),
        project=project,
        tol=tol.solution_residual,
        max_iterations=settings.max_descent_iterations,
    )
    inner = rho * (1.0 - tol.ball_margin)
    if float(result.x @ result.x) >= inner:
        raise NoInteriorMinimizer(f"ball minimizer sits on the sphere ||u||_alpha^2 = {rho}")
    if not result.converged:
        logger.warning("Ball descent stopped after %d iterations (stationarity %.3e)",
                       result.iterations, result.gradient_norm)

    engine = DeflatedNewtonSearch(problem, radius)
    outcome = engine.newton(to_coords(result.x))
    if not outcome.converged:
        raise NonConvergence("Newton polish of the ball minimizer did not converge")
    c = engine.polish(outcome.c)
    if problem.ball_norm(c) >= inner:
        raise NoInteriorMinimizer("Newton polish left the ball")
    return problem.solution(c, rho)


def _reparametrize(nodes: np.ndarray) -> np.ndarray:
    lengths = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(nodes, axis=0), axis=1))])
    if lengths[-1] == 0.0:
        return nodes
    target = np.linspace(0.0, lengths[-1], len(nodes))
    return np.column_stack([np.interp(target, lengths, nodes[:, j]) for j in range(nodes.shape[1])])


def mountain_pass(spec: ProblemSpec, rho: float, nodes: int = 24, iterations: int = 2000) -> Solution:
    """String between the ball minimizer and a far point of lower energy; climbs the top node."""
    problem = SemilinearProblem(spec)
    start = minimize_in_ball(spec, rho)
    a = start.u.interior_values
    direction = np.ones(problem.dimension)
    t = 1.0
    while problem.energy(t * direction) >= start.energy - 1.0:
        t *= 2.0
        if t > 1e6:
            raise HypothesisViolated("J is bounded below along the interior indicator")
    b = t * direction

    path = np.linspace(a, b, nodes)
    step = 0.5 * spec.lam / max(float(abs(problem.stiffness).sum(axis=1).max()), 1e-12)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iterations):
            energies = np.array([problem.energy(c) for c in path])
            top = int(np.argmax(energies[1:-1])) + 1
            moved = 0.0
            for i in range(1, nodes - 1):
                g = problem.gradient(path[i])
                tangent = path[i + 1] - path[i - 1]
                tangent /= max(float(np.linalg.norm(tangent)), 1e-300)
                along = float(np.dot(g, tangent))
                # the top node climbs along the string, the others relax across it
                move = (g - 2.0 * along * tangent) if i == top else (g - along * tangent)
                spacing = float(np.linalg.norm(path[i + 1] - path[i]))
                delta = step * move
                length = float(np.linalg.norm(delta))
                if length > spacing:
                    delta *= spacing / length
                path[i] = path[i] - delta
                moved = max(moved, length)
            path[1:top] = _reparametrize(path[:top + 1])[1:top]
            path[top + 1:-1] = _reparametrize(path[top:])[1:-1]
            if moved <= settings.tolerances.solution_residual:
                break

    energies = np.array([problem.energy(c) for c in path])
    engine = DeflatedNewtonSearch(problem, settings.default_start_radius)
    outcome = engine.newton(path[int(np.argmax(energies[1:-1])) + 1])
    if not outcome.converged:
        raise NonConvergence("Newton polish of the string's top node did not converge")
    c = engine.polish(outcome.c)
    if np.max(np.abs(c - a)) <= settings.tolerances.distinct:
        raise NonConvergence("string top node collapsed onto the ball minimizer")
    return problem.solution(c, rho)


def _nontrivial_or_raise(report: SolveReport, what: str) -> List[Solution]:
    found = report.nontrivial()
    if not found:
        raise OnlyTrivialFound(f"{what}: only u = 0 was found")
    return found


def solve_truncated(spec: ProblemSpec, budget: Optional[int] = None, seed: Optional[int] = None) -> SolveReport:
    """Non-negative solutions through the truncated nonlinearity f+ (lambda fixed to 1)."""
    if spec.lam != 1.0:
        logger.info("Truncation scheme runs at lambda = 1 (got %g)", spec.lam)
        spec = spec.with_lambda(1.0)
    if np.any(spec.f.value_at_zero(spec.interior) != 0.0):
        raise HypothesisViolated("truncation needs f(x, 0) = 0")
    if spec.alpha.regime is not Regime.NON_POSITIVE:
        raise HypothesisViolated(f"truncation needs alpha <= 0 (regime {spec.alpha.regime.value})")

    f1l = check_f1l(spec)
    if not f1l.passed:
        logger.warning("limsup f/t at 0+ is not below lambda_1: %s", f1l.witness)
    if spec.f.ar_beta is not None and spec.f.ar_r0 is not None:
        one_sided = check_ar(spec.f, spec.f.ar_beta, spec.f.ar_r0, spec.interior, two_sided=False)
        if not one_sided.passed:
            logger.warning("one-sided AR check failed: %s", one_sided.witness)

    truncated = spec.with_f(spec.f.truncated())
    report = find_all_solutions(truncated, budget=budget, seed=seed)
    kept = []
    for solution in _nontrivial_or_raise(report, "truncated problem"):
        if np.min(solution.u.values) < -settings.tolerances.positivity:
            raise NegativePartNonzero(f"u- is not zero: min u = {np.min(solution.u.values):.3e}")
        residual = float(np.max(np.abs(classical_residual(spec, solution.u))))
        if residual > settings.tolerances.solution_residual * (1.0 + solution.u.sup_norm()):
            raise HypothesisViolated(f"truncated solution misses the original equation by {residual:.3e}")
        kept.append(solution)
    report.solutions = kept
    report.positive = True
    report.trace.mode = "truncate"
    report.hypotheses["f1l"] = f1l.passed
    return report


def yamabe_solve(dom: DomainDecomp, gamma: float, p: float, budget: Optional[int] = None,
                 seed: Optional[int] = None) -> SolveReport:
    """Strictly positive solutions of -Delta u = gamma u + (u+)^(p-1)."""
    first = lambda1(dom).lambda1
    if not gamma < first:
        raise HypothesisViolated(f"gamma = {gamma} must be below lambda_1 = {first}")
    if not p > 2.0:
        raise HypothesisViolated(f"p = {p} must exceed 2")

    spec = ProblemSpec.build(dom, Nonlinearity.signed_power(1.0, p).truncated(), alpha=gamma, lam=1.0)
    report = find_all_solutions(spec, budget=budget, seed=seed)
    kept = []
    for solution in _nontrivial_or_raise(report, "Yamabe problem"):
        if np.min(solution.u.values) < -settings.tolerances.positivity:
            raise NegativePartNonzero(f"u- is not zero: min u = {np.min(solution.u.values):.3e}")
        # a zero at an interior vertex forces its neighbors to vanish, hence u = 0
        if np.min(solution.u.interior_values) <= settings.tolerances.positivity:
            raise HypothesisViolated("non-trivial Yamabe solution vanishes at an interior vertex")
        kept.append(solution)
    report.solutions = kept
    report.trace.mode = "yamabe"
    return report


def scalar_root_oracle(spec: ProblemSpec) -> np.ndarray:
    """All solutions t = u(x) when D° = {x}: roots of (deg/mu - alpha) t = lam f(x, t)."""
    if len(spec.interior) != 1:
        raise ValueError("the scalar oracle needs exactly one interior vertex")
    dom = spec.dom
    i = dom.interior_positions[0]
    slope = float(dom.degrees[i] / dom.mu[i] - spec.alpha_interior[0])
    b = spec.f.branches(spec.interior)[0]
    bound = sup_norm_a_priori_bound(spec)
    roots = []
    for sign, branch in ((1.0, b.positive), (-1.0, b.negative)):
        # positive side: slope r - lam F+'(r); negative side: lam F-'(r) - slope r
        terms = {e: -sign * spec.lam * a for e, a in branch.derivative().coefficients.items()}
        terms[1.0] = terms.get(1.0, 0.0) + sign * slope
        equation = Branch(terms)
        if equation.is_zero():
            continue
        upper = np.inf if equation.is_polynomial() else (2.0 * bound if np.isfinite(bound) else 1e6)
        roots.extend(sign * equation.roots(upper))
    if spec.f.value_at_zero(spec.interior)[0] == 0.0:
        roots.append(0.0)
    return np.unique(np.round(np.array(roots, dtype=float), 14))


@dataclass(frozen=True)
class SweepRow:
    lam: float
    n_solutions: int
    min_energy: Optional[float]
    lambda_star: Optional[float]  # +inf when unbounded, None when alpha is Invalid
    admissible: bool


def lambda_sweep(spec: ProblemSpec, grid: Sequence[float], budget: Optional[int] = None,
                 seed: Optional[int] = None, rho: Optional[float] = None) -> List[SweepRow]:
    """One row per lambda, computed in parallel and returned in grid order."""
    star = lambda_star(spec) if spec.alpha.regime is not Regime.INVALID else None
    upper = None
    if star is not None:
        upper = lambda_admissible(spec, rho) if rho is not None else star.value

    def row(lam: float) -> SweepRow:
        try:
            report = find_all_solutions(spec.with_lambda(lam), budget=budget, seed=seed)
            count = len(report.solutions)
            lowest = min(s.energy for s in report.solutions)
        except NonConvergence as e:
            logger.warning("lambda = %g: %s", lam, e)
            count, lowest = 0, None
        return SweepRow(
            lam=float(lam),
            n_solutions=count,
            min_energy=lowest,
            lambda_star=None if star is None else star.value,
            admissible=bool(upper is not None and lam < upper),
        )

    with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
        return list(pool.map(row, grid))
