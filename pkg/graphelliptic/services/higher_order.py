"""Higher-order calculus and the (m,p)-Laplacian problem on C_0^m(D).

Iterated Laplacians are restricted to D, like every other operator in the package.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from graphelliptic.config import settings
from graphelliptic.errors import NonConvergence, ZeroSlopeSingularity
from graphelliptic.models.graph import DomainDecomp, FunctionLike, VertexFn
from graphelliptic.models.nonlinearity import Nonlinearity, coefficient_values
from graphelliptic.models.schemas import ProblemDocument
from graphelliptic.services.calculus import gradient_form_all
from graphelliptic.services.sobolev import (
    constraint_basis,
    iterated_laplacian_matrix,
    seminorm,
    seminorm_gradient,
    seminorm_hessian,
    top_slope,
)
from graphelliptic.services.solvers import CriticalPointProblem, SearchTrace, SolveReport, Solution, search_critical_points
from graphelliptic.services.spectral import lambda_mp
from graphelliptic.services.variational import check_ar

__all__ = [
    "HigherOrderSpec",
    "MpProblem",
    "constraint_basis",
    "higher_slope",
    "iterated_laplacian",
    "kappa_mp",
    "mp_energy",
    "mp_energy_and_solve",
    "mp_gradient",
    "mp_operator_weak",
    "wmp_norm",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HigherOrderSpec:
    """-Delta_{m,p} u = lam f(x, u) on C_0^m(D)."""
    dom: DomainDecomp
    m: int
    p: float
    f: Nonlinearity
    lam: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"order m must be a positive integer, got {self.m}")
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.f.ar_beta is not None and not self.f.ar_beta > self.p:
            raise ValueError(f"AR exponent beta = {self.f.ar_beta} must exceed p = {self.p}")

    @classmethod
    def from_document(cls, dom: DomainDecomp, doc: ProblemDocument) -> "HigherOrderSpec":
        if doc.order is None:
            raise ValueError("problem document has no order section")
        if np.any(coefficient_values(doc.alpha, dom.vertices) != 0.0):
            raise ValueError("the (m,p) problem has no linear alpha term")
        return cls(dom=dom, m=doc.order.m, p=doc.order.p, f=Nonlinearity.from_entry(doc.f), lam=doc.lam)

    @cached_property
    def basis(self) -> np.ndarray:
        return constraint_basis(self.dom, self.m)

    @property
    def regularization(self) -> float:
        return settings.tolerances.p_regularization if self.p < 2.0 else 0.0


def iterated_laplacian(dom: DomainDecomp, u: FunctionLike, ell: int) -> VertexFn:
    return VertexFn(dom, iterated_laplacian_matrix(dom, ell) @ dom.coerce(u))


def higher_slope(dom: DomainDecomp, u: FunctionLike, k: int) -> VertexFn:
    """|grad^k u|: |Delta^{k/2} u| for even k, slope of Delta^{(k-1)/2} u for odd k."""
    if k < 0:
        raise ValueError("slope order must be nonnegative")
    return VertexFn(dom, top_slope(dom, u, k))


def wmp_norm(dom: DomainDecomp, u: FunctionLike, m: int, p: float) -> float:
    return float(seminorm(dom, u, m, p) ** (1.0 / p))


def mp_operator_weak(dom: DomainDecomp, u: FunctionLike, v: FunctionLike, m: int, p: float,
                     eps: float = 0.0) -> float:
    """<-Delta_{m,p} u, v> = int |grad^m u|^(p-2) <grad^m u, grad^m v> dmu."""
    power = iterated_laplacian_matrix(dom, m // 2)
    a = power @ dom.coerce(u)
    b = power @ dom.coerce(v)
    if m % 2 == 0:
        squared, pairing = a * a, a * b
    else:
        squared, pairing = gradient_form_all(dom, a, a), gradient_form_all(dom, a, b)
    base = squared + eps * eps
    if p < 2.0 and np.any(base == 0.0):
        raise ZeroSlopeSingularity(f"|grad^{m} u| vanishes somewhere and p = {p} < 2")
    weight = base ** ((p - 2.0) / 2.0) if p != 2.0 else np.ones_like(base)
    return float(np.dot(dom.mu, weight * pairing))


def kappa_mp(dom: DomainDecomp, m: int, p: float, seed: Optional[int] = None) -> float:
    """1 / (mu0 lambda_{m,p}^(1/p))."""
    value = lambda_mp(dom, m, p, seed=seed).value
    return float(1.0 / (dom.mu0 * value ** (1.0 / p)))


def mp_energy(hspec: HigherOrderSpec, u: FunctionLike, eps: float = 0.0) -> float:
    """J(u) = ||u||^p / p - lam int F(x, u)."""
    dom = hspec.dom
    values = dom.coerce(u)
    potential = hspec.f.potential(dom.vertices, values)
    return seminorm(dom, values, hspec.m, hspec.p, eps) / hspec.p - hspec.lam * float(np.dot(dom.mu, potential))


def mp_gradient(hspec: HigherOrderSpec, u: FunctionLike, eps: float = 0.0) -> np.ndarray:
    """Euclidean gradient of mp_energy over the D coordinates."""
    dom = hspec.dom
    values = dom.coerce(u)
    forcing = hspec.lam * dom.mu * hspec.f.value(dom.vertices, values)
    return seminorm_gradient(dom, values, hspec.m, hspec.p, eps) / hspec.p - forcing


class MpProblem(CriticalPointProblem):
    """mp_energy in the coordinates of an orthonormal basis of C_0^m(D)."""

    def __init__(self, hspec: HigherOrderSpec):
        self.hspec = hspec
        self.dom = hspec.dom
        self.basis = hspec.basis
        self.eps = hspec.regularization
        # vertices the class leaves free; the rest are pinned to 0
        self.free = np.flatnonzero(np.max(np.abs(self.basis), axis=1) > 1e-12)
        self.free_vertices = tuple(self.dom.vertices[i] for i in self.free)

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def metric(self) -> np.ndarray:
        quadratic = seminorm_hessian(self.dom, np.zeros(self.dom.size), self.hspec.m, 2.0) / 2.0
        return self.basis.T @ quadratic @ self.basis

    def lift(self, c: np.ndarray) -> np.ndarray:
        return self.basis @ c

    def energy(self, c: np.ndarray) -> float:
        return mp_energy(self.hspec, self.lift(c), self.eps)

    def gradient(self, c: np.ndarray) -> np.ndarray:
        return self.basis.T @ mp_gradient(self.hspec, self.lift(c), self.eps)

    def hessian(self, c: np.ndarray) -> np.ndarray:
        u = self.lift(c)
        hspec = self.hspec
        curvature = np.zeros(self.dom.size)
        # pinned vertices drop out of the projection; f' may be infinite there
        curvature[self.free] = hspec.lam * self.dom.mu[self.free] * hspec.f.derivative(self.free_vertices, u[self.free])
        full = seminorm_hessian(self.dom, u, hspec.m, hspec.p, self.eps) / hspec.p - np.diag(curvature)
        return self.basis.T @ full @ self.basis

    def residual(self, c: np.ndarray, g: Optional[np.ndarray] = None) -> float:
        """Weak-form residual projected on the class, as a density: max |N N^T w / mu|."""
        if g is None:
            g = self.basis.T @ mp_gradient(self.hspec, self.lift(c))
        return float(np.max(np.abs(self.basis @ g / self.dom.mu)))

    def ball_norm(self, c: np.ndarray) -> float:
        return seminorm(self.dom, self.lift(c), self.hspec.m, self.hspec.p)


def mp_energy_and_solve(hspec: HigherOrderSpec, budget: Optional[int] = None, seed: Optional[int] = None,
                        rho: Optional[float] = None) -> SolveReport:
    """Distinct critical points of the (m,p) energy on C_0^m(D)."""
    budget = settings.default_budget if budget is None else budget
    seed = settings.default_seed if seed is None else seed
    problem = MpProblem(hspec)
    logger.info("C_0^%d(D) has dimension %d", hspec.m, problem.dimension)

    hypotheses = {"order": f"{hspec.m},{hspec.p:g}", "heuristic": hspec.p != 2.0}
    f = hspec.f
    if f.ar_beta is not None and f.ar_r0 is not None:
        hypotheses["ar_sampled"] = check_ar(f, f.ar_beta, f.ar_r0, hspec.dom.interior, exponent=hspec.p).passed
    if rho is not None:
        hypotheses["kappa_mp"] = kappa_mp(hspec.dom, hspec.m, hspec.p, seed=seed)

    found = search_critical_points(problem, settings.default_start_radius, budget, seed, mode="deflate")
    solutions = [problem.solution(c, rho) for c in found.roots]
    if not solutions:
        raise NonConvergence(f"none of {budget} restarts converged on the (m,p) problem")
    trace: SearchTrace = found.trace
    trace.mode = f"mp({hspec.m},{hspec.p:g})"
    return SolveReport(
        solutions=sorted(solutions, key=Solution.sort_key),
        lambda_used=hspec.lam,
        lambda_star=None,
        rho=rho,
        hypotheses=hypotheses,
        trace=trace,
        seed=seed,
    )
