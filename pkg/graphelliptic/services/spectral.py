"""Dirichlet spectral constants: lambda_1 and the (m,p) Rayleigh constant."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import splu

from graphelliptic.config import settings
from graphelliptic.errors import NonConvergence, ZeroFunction
from graphelliptic.models.graph import DomainDecomp, FunctionLike, VertexFn
from graphelliptic.services.calculus import assemble_stiffness, dirichlet_energy
from graphelliptic.services.sobolev import constraint_basis, seminorm, seminorm_gradient, seminorm_hessian
from graphelliptic.utils.numeric import armijo_descent

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EigenResult:
    lambda1: float
    eigenfunction: VertexFn
    residual: float


@dataclass(frozen=True, eq=False)
class RayleighResult:
    m: int
    p: float
    value: float
    certificate: VertexFn
    converged: bool
    heuristic: bool
    restarts: int


def _sign_normalize(vector: np.ndarray) -> np.ndarray:
    return -vector if abs(vector.min()) > abs(vector.max()) else vector


def _dense_first_pair(stiffness, mass):
    values, vectors = linalg.eigh(stiffness.interior.toarray(), np.diag(mass), subset_by_index=[0, 0])
    return float(values[0]), vectors[:, 0]


def _inverse_power_first_pair(stiffness, mass):
    tol = settings.tolerances.eigen_residual
    lu = splu(stiffness.interior.tocsc())
    x = np.ones(len(mass))
    x /= np.sqrt(np.dot(mass, x * x))
    value = float(x @ (stiffness.interior @ x))
    for iteration in range(1, settings.inverse_power_iterations + 1):
        y = lu.solve(mass * x)
        y /= np.sqrt(np.dot(mass, y * y))
        value = float(y @ (stiffness.interior @ y))
        x = y
        residual = np.max(np.abs(stiffness.interior @ x - value * mass * x))
        if residual <= tol:
            logger.debug("Inverse power iteration converged after %d steps", iteration)
            return value, x
    raise NonConvergence(f"inverse power iteration stopped at residual {residual:.3e}")


@lru_cache(maxsize=64)
def lambda1(dom: DomainDecomp) -> EigenResult:
    """Smallest eigenvalue of L u = lambda M u on the interior, eigenfunction L2-normalized."""
    stiffness = assemble_stiffness(dom)
    mass = stiffness.mass
    if len(mass) <= settings.dense_eigen_limit:
        value, vector = _dense_first_pair(stiffness, mass)
    else:
        value, vector = _inverse_power_first_pair(stiffness, mass)

    vector = _sign_normalize(vector / np.sqrt(np.dot(mass, vector * vector)))
    residual = float(np.max(np.abs(stiffness.interior @ vector - value * mass * vector)))
    if residual > settings.tolerances.eigen_residual:
        logger.warning("Eigen residual %.3e above tolerance", residual)
    logger.debug("lambda_1 = %.17g on %d interior vertices", value, len(mass))
    return EigenResult(
        lambda1=value,
        eigenfunction=VertexFn.from_interior(dom, vector),
        residual=residual,
    )


def rayleigh_quotient(dom: DomainDecomp, u: FunctionLike) -> float:
    values = dom.coerce_dirichlet(u)
    mass = float(np.dot(dom.mu, values * values))
    if mass == 0.0:
        raise ZeroFunction("Rayleigh quotient of the zero function")
    return dirichlet_energy(dom, values) / mass


class PRayleighSolver:
    """Minimizes int |grad^m u|^p / int |u|^p over C_0^m(D)."""

    def __init__(self, dom: DomainDecomp, m: int, p: float):
        self.dom = dom
        self.m = m
        self.p = p
        self.basis = constraint_basis(dom, m)
        self.logger = logging.getLogger(__name__)
        self._eps = settings.tolerances.p_regularization if p < 2.0 else 0.0

    def lift(self, c: np.ndarray) -> np.ndarray:
        return self.basis @ c

    def mass(self, u: np.ndarray) -> float:
        return float(np.dot(self.dom.mu, np.abs(u) ** self.p))

    def quotient(self, c: np.ndarray, eps: float = 0.0) -> float:
        u = self.lift(c)
        return seminorm(self.dom, u, self.m, self.p, eps) / self.mass(u)

    def gradient(self, c: np.ndarray) -> np.ndarray:
        u = self.lift(c)
        mass = self.mass(u)
        value = seminorm(self.dom, u, self.m, self.p, self._eps) / mass
        mass_gradient = self.p * self.dom.mu * np.sign(u) * np.abs(u) ** (self.p - 1.0)
        grad_u = (seminorm_gradient(self.dom, u, self.m, self.p, self._eps) - value * mass_gradient) / mass
        return self.basis.T @ grad_u

    def normalize(self, c: np.ndarray) -> np.ndarray:
        mass = self.mass(self.lift(c))
        if mass == 0.0:
            raise ZeroFunction("restart collapsed to the zero function")
        return c / mass ** (1.0 / self.p)

    def quadratic_pair(self):
        """Value and coefficients of the exact p = 2 minimizer."""
        stiffness = self.basis.T @ seminorm_hessian(self.dom, np.zeros(self.dom.size), self.m, 2.0) @ self.basis / 2.0
        mass = self.basis.T @ (self.dom.mu[:, None] * self.basis)
        values, vectors = linalg.eigh(stiffness, mass, subset_by_index=[0, 0])
        return float(values[0]), vectors[:, 0]

    def descend(self, start: np.ndarray):
        result = armijo_descent(
            lambda c: self.quotient(c, self._eps),
            self.gradient,
            start,
            project=self.normalize,
            tol=settings.tolerances.lambda_mp_agreement,
            max_iterations=settings.max_descent_iterations,
            ftol=settings.tolerances.lambda_mp_quotient_change,
        )
        return result

    def solve(self, restarts: int, seed: int) -> RayleighResult:
        _, quadratic = self.quadratic_pair()
        if self.p == 2.0:
            c = self.normalize(quadratic)
            return self._result(c, converged=True, restarts=1)

        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)]
        starts: List[np.ndarray] = [quadratic] + [rng.standard_normal(len(quadratic)) for rng in rngs[1:]]
        with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
            outcomes = list(pool.map(self._safe_descend, starts))

        best: Optional[tuple] = None
        for index, outcome in enumerate(outcomes):
            if outcome is None:
                continue
            value = self.quotient(outcome.x)
            if best is None or value < best[0]:
                best = (value, outcome, index)
        if best is None:
            raise NonConvergence("every p-Rayleigh restart failed")
        _, outcome, index = best
        if not outcome.converged:
            self.logger.warning("lambda_mp(%d, %g): best restart %d did not converge", self.m, self.p, index)
        return self._result(outcome.x, converged=outcome.converged, restarts=restarts)

    def _safe_descend(self, start: np.ndarray):
        try:
            return self.descend(start)
        except (ZeroFunction, FloatingPointError) as e:
            self.logger.debug("Restart dropped: %s", e)
            return None

    def _result(self, c: np.ndarray, converged: bool, restarts: int) -> RayleighResult:
        u = self.lift(c)
        u = _sign_normalize(u) / self.mass(u) ** (1.0 / self.p)
        return RayleighResult(
            m=self.m,
            p=self.p,
            value=seminorm(self.dom, u, self.m, self.p) / self.mass(u),
            certificate=VertexFn(self.dom, u),
            converged=converged,
            heuristic=self.p != 2.0,
            restarts=restarts,
        )


def lambda_mp(dom: DomainDecomp, m: int, p: float, restarts: Optional[int] = None,
              seed: Optional[int] = None) -> RayleighResult:
    """lambda_{m,p}: exact generalized eigenproblem at p = 2, seeded descent restarts otherwise."""
    if p <= 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    solver = PRayleighSolver(dom, m, p)
    result = solver.solve(
        restarts=restarts or settings.lambda_mp_restarts,
        seed=settings.default_seed if seed is None else seed,
    )
    logger.info("lambda_mp(m=%d, p=%g) = %.17g (converged=%s)", m, p, result.value, result.converged)
    return result
