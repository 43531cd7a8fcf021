"""Energy functional J_lambda, alpha-norm, embedding constants and hypothesis checks.

All solver-facing norms use <u, v> = int Gamma(u, v) dmu on the Dirichlet class;
the full W^{1,2} product lives in calculus.sobolev_inner.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from graphelliptic.config import settings
from graphelliptic.errors import HypothesisViolated, InvalidAlphaRegime
from graphelliptic.models.graph import DomainDecomp, FunctionLike, VertexFn
from graphelliptic.models.nonlinearity import CoefficientLike, Nonlinearity, coefficient_values
from graphelliptic.models.schemas import CheckEntry, HypothesisReport, ProblemDocument
from graphelliptic.services.calculus import assemble_stiffness, dirichlet_energy, laplacian_all, lp_norm
from graphelliptic.services.spectral import lambda1
from graphelliptic.utils.numeric import golden_section_max

logger = logging.getLogger(__name__)

NOT_A_PROOF = "sampled falsifier, not a proof"


class Regime(str, Enum):
    NON_POSITIVE = "NonPositive"
    SMALL_L1 = "SmallL1"
    INVALID = "Invalid"


@dataclass(frozen=True, eq=False)
class LinearCoefficient:
    values: np.ndarray
    regime: Regime
    l1: float
    threshold: float  # mu0^2 lambda_1

    @classmethod
    def classify(cls, dom: DomainDecomp, alpha: CoefficientLike = 0.0) -> "LinearCoefficient":
        values = coefficient_values(alpha, dom.vertices)
        l1 = float(np.dot(dom.mu, np.abs(values)))
        threshold = dom.mu0 ** 2 * lambda1(dom).lambda1
        if np.all(values <= 0.0):
            regime = Regime.NON_POSITIVE
        elif l1 < threshold:
            regime = Regime.SMALL_L1
        else:
            regime = Regime.INVALID
        values.setflags(write=False)
        return cls(values=values, regime=regime, l1=l1, threshold=threshold)

    def require_valid(self):
        if self.regime is Regime.INVALID:
            raise InvalidAlphaRegime(
                f"alpha has a positive part and int|alpha| = {self.l1:.6g} >= mu0^2 lambda_1 = {self.threshold:.6g}"
            )


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """-Delta_mu u = alpha u + lam f(x, u) on D°, u = 0 on the boundary."""
    dom: DomainDecomp
    alpha: LinearCoefficient
    f: Nonlinearity
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.f.ar_beta is not None and not self.f.ar_beta > 2.0:
            raise ValueError(f"AR exponent beta = {self.f.ar_beta} must exceed 2")

    @classmethod
    def build(cls, dom: DomainDecomp, f: Nonlinearity, alpha: CoefficientLike = 0.0, lam: float = 1.0) -> "ProblemSpec":
        return cls(dom=dom, alpha=LinearCoefficient.classify(dom, alpha), f=f, lam=lam)

    @classmethod
    def from_document(cls, dom: DomainDecomp, doc: ProblemDocument) -> "ProblemSpec":
        return cls.build(dom, Nonlinearity.from_entry(doc.f), alpha=doc.alpha, lam=doc.lam)

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return replace(self, lam=lam)

    def with_f(self, f: Nonlinearity) -> "ProblemSpec":
        return replace(self, f=f)

    @property
    def interior(self) -> Tuple[str, ...]:
        return self.dom.interior

    @cached_property
    def alpha_interior(self) -> np.ndarray:
        return self.alpha.values[self.dom.interior_positions]

    @cached_property
    def alpha_stiffness(self) -> sparse.csr_matrix:
        """A = L - diag(mu alpha) on D°, so that ||u||_alpha^2 = u^T A u."""
        stiffness = assemble_stiffness(self.dom)
        return (stiffness.interior - sparse.diags(stiffness.mass * self.alpha_interior)).tocsr()


# Norms and constants

def alpha_norm(spec: ProblemSpec, u: FunctionLike) -> float:
    spec.alpha.require_valid()
    values = spec.dom.coerce_dirichlet(u)
    squared = dirichlet_energy(spec.dom, values) - float(np.dot(spec.dom.mu, spec.alpha.values * values * values))
    return float(np.sqrt(max(squared, 0.0)))


def norm_equivalence_bounds(spec: ProblemSpec) -> Tuple[float, float]:
    """(c1, c2) with c1 ||u|| <= ||u||_alpha <= c2 ||u||."""
    spec.alpha.require_valid()
    ratio = spec.alpha.l1 / spec.alpha.threshold
    if spec.alpha.regime is Regime.NON_POSITIVE:
        return 1.0, float(np.sqrt(1.0 + ratio))
    return float(np.sqrt(1.0 - ratio)), float(np.sqrt(2.0))


def kappa(spec: ProblemSpec) -> float:
    spec.alpha.require_valid()
    base = 1.0 / (spec.dom.mu0 * np.sqrt(lambda1(spec.dom).lambda1))
    if spec.alpha.regime is Regime.NON_POSITIVE:
        return float(base)
    return float(base / np.sqrt(1.0 - spec.alpha.l1 / spec.alpha.threshold))


def sup_norm_embedding_check(dom: DomainDecomp, u: FunctionLike, nu: float = 2.0) -> Tuple[float, float]:
    """Slack of ||u||_inf <= C ||u|| and ||u||_nu <= mu(D)^(1/nu) C ||u||, C = 1/(mu0 sqrt(lambda_1)).

    Both residuals are <= 0 up to round-off.
    """
    values = dom.coerce_dirichlet(u)
    norm = np.sqrt(dirichlet_energy(dom, values))
    constant = 1.0 / (dom.mu0 * np.sqrt(lambda1(dom).lambda1))
    sup_residual = float(np.max(np.abs(values)) - constant * norm)
    lp_residual = float(lp_norm(dom, values, nu) - dom.volume ** (1.0 / nu) * constant * norm)
    return sup_residual, lp_residual


# Energy and residuals

@dataclass(frozen=True, eq=False)
class GradientResult:
    pointwise: VertexFn  # r(x) = -Delta u/lam - alpha u/lam - f(x, u) on D°, 0 on the boundary
    coefficients: np.ndarray  # mu r on D°: <J'(u), v> = coefficients . v(D°)

    def weak(self, v: FunctionLike) -> float:
        values = self.pointwise.domain.coerce_dirichlet(v)
        return float(np.dot(self.coefficients, values[self.pointwise.domain.interior_positions]))


def energy(spec: ProblemSpec, u: FunctionLike) -> float:
    """J_lambda(u) = ||u||_alpha^2 / (2 lambda) - int F(x, u)."""
    values = spec.dom.coerce_dirichlet(u)
    squared = dirichlet_energy(spec.dom, values) - float(np.dot(spec.dom.mu, spec.alpha.values * values * values))
    potential = spec.f.potential(spec.dom.vertices, values)
    return squared / (2.0 * spec.lam) - float(np.dot(spec.dom.mu, potential))


def energy_gradient(spec: ProblemSpec, u: FunctionLike) -> GradientResult:
    values = spec.dom.coerce_dirichlet(u)
    interior = spec.dom.interior_positions
    f_values = spec.f.value(spec.dom.interior, values[interior])
    r = (-laplacian_all(spec.dom, values)[interior] - spec.alpha_interior * values[interior]) / spec.lam - f_values
    return GradientResult(
        pointwise=VertexFn.from_interior(spec.dom, r),
        coefficients=spec.dom.mu[interior] * r,
    )


def classical_residual(spec: ProblemSpec, u: FunctionLike) -> np.ndarray:
    """R(x) = -Delta u - alpha u - lam f(x, u) at each interior vertex, in interior order."""
    values = spec.dom.coerce_dirichlet(u)
    interior = spec.dom.interior_positions
    return (
        -laplacian_all(spec.dom, values)[interior]
        - spec.alpha_interior * values[interior]
        - spec.lam * spec.f.value(spec.dom.interior, values[interior])
    )


def weak_residual(spec: ProblemSpec, u: FunctionLike) -> float:
    """sup over ||v|| = 1 of |int Gamma(u, v) - int alpha u v - lam int f(x, u) v|."""
    coefficients = spec.dom.mu[spec.dom.interior_positions] * classical_residual(spec, u)
    stiffness = assemble_stiffness(spec.dom).interior
    solved = np.atleast_1d(spsolve(stiffness.tocsc(), coefficients))
    return float(np.sqrt(max(float(np.dot(coefficients, solved)), 0.0)))


def residual_equivalence_constants(dom: DomainDecomp) -> Tuple[float, float]:
    """(C1, C2): weak <= C1 max|R| and max|R| <= C2 weak."""
    c1 = dom.volume / (dom.mu0 * np.sqrt(lambda1(dom).lambda1))
    interior = dom.interior_positions
    c2 = float(np.max(np.sqrt(dom.degrees[interior]) / dom.mu[interior]))
    return float(c1), c2


# Hypotheses on f

def _ar_grid(r0: float) -> np.ndarray:
    upper = max(100.0, 10.0 * r0)
    return np.unique(np.concatenate([[r0], np.geomspace(r0, upper, 400)]))


def check_ar(f: Nonlinearity, beta: float, r0: float, vertices, t_grid: Optional[np.ndarray] = None,
             two_sided: bool = True, exponent: float = 2.0) -> CheckEntry:
    """t f(x, t) >= beta F(x, t) > 0 on the sampled |t| >= r0 (t >= r0 when one-sided).

    beta must exceed the homogeneity of the principal part: 2 for the Laplacian, p for (m,p).
    """
    if not beta > exponent or not r0 > 0.0:
        raise ValueError(f"AR parameters need beta > {exponent:g} and r0 > 0")
    vertices = tuple(vertices)
    grid = np.sort(np.asarray(t_grid if t_grid is not None else _ar_grid(r0), dtype=float))
    sides = (grid, -grid) if two_sided else (grid,)
    for side in sides:
        t = np.broadcast_to(side, (len(vertices), len(side)))
        tf = t * f.value(vertices, t)
        beta_f = beta * f.potential(vertices, t)
        slack = 1e2 * settings.tolerances.identity * (1.0 + np.abs(tf))
        bad = (tf < beta_f - slack) | (beta_f <= 0.0)
        if np.any(bad):
            # first violation in grid order, then vertex order
            i, j = np.argwhere(bad.T)[0][::-1]
            witness = {"vertex": vertices[i], "t": float(t[i, j]), "tf": float(tf[i, j]), "betaF": float(beta_f[i, j])}
            return CheckEntry(passed=False, witness=witness, note=NOT_A_PROOF)
    return CheckEntry(passed=True, note=NOT_A_PROOF)


def ar_leading_term(f: Nonlinearity, beta: float, vertices, two_sided: bool = True) -> bool:
    """Asymptotic sufficient condition: t f - beta F is eventually positive along every branch."""
    for b in f.branches(tuple(vertices)):
        branches = (b.positive, b.negative) if two_sided else (b.positive,)
        for branch in branches:
            # t f(t) - beta F(t) = sum a_e (e - beta) r^e on both branches
            excess = {e: a * (e - beta) for e, a in branch.coefficients.items()}
            excess = {e: c for e, c in excess.items() if c != 0.0}
            if branch.is_zero() or branch.leading_coefficient() <= 0.0 or not excess:
                return False
            if excess[max(excess)] <= 0.0:
                return False
    return True


def superquadratic_bounds(f: Nonlinearity, beta: float, r0: float, vertices) -> Tuple[float, float]:
    """(b1, b2) with F(x, t) >= b1 |t|^beta - b2 for all t, from the AR lower bound."""
    vertices = tuple(vertices)
    check = check_ar(f, beta, r0, vertices)
    if not check.passed:
        raise HypothesisViolated(f"AR condition fails at {check.witness}")
    at_r0 = f.potential(vertices, np.full(len(vertices), r0))
    at_minus_r0 = f.potential(vertices, np.full(len(vertices), -r0))
    m = np.minimum(at_r0, at_minus_r0) / r0 ** beta
    ball_max = np.array([f.max_abs_potential((x,), r0)[0] for x in vertices])
    return float(m.min()), float(np.max(ball_max + m * r0 ** beta))


def verify_superquadratic(f: Nonlinearity, b1: float, b2: float, beta: float, vertices,
                          bound: float = 100.0, points: int = 4001) -> CheckEntry:
    vertices = tuple(vertices)
    t = np.broadcast_to(np.linspace(-bound, bound, points), (len(vertices), points))
    gap = f.potential(vertices, t) - (b1 * np.abs(t) ** beta - b2)
    bad = gap < -1e2 * settings.tolerances.identity * (1.0 + np.abs(t) ** beta)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        return CheckEntry(passed=False, witness={"vertex": vertices[i], "t": float(t[i, j])}, note=NOT_A_PROOF)
    return CheckEntry(passed=True, note=NOT_A_PROOF)


def check_f1(spec: ProblemSpec, m0: float, sigma: float) -> CheckEntry:
    """max over D° x [-M0, M0] of |f| <= mu0^2 M0 lambda_1 / (2 (sigma + 1))."""
    if not m0 > 0.0 or not sigma > 0.0:
        raise ValueError("M0 and sigma must be positive")
    bound = spec.dom.mu0 ** 2 * m0 * lambda1(spec.dom).lambda1 / (2.0 * (sigma + 1.0))
    peak, s, x = spec.f.max_abs_value(spec.interior, m0)
    witness = {"vertex": x, "t": s, "abs_f": peak} if x is not None else None
    return CheckEntry(passed=bool(peak <= bound), witness=witness, note=f"bound {bound!r}")


def check_corollary_measure(spec: ProblemSpec) -> CheckEntry:
    """mu0 > 2 sqrt(max_{[-1,1]} |f| / lambda_1)."""
    peak, s, x = spec.f.max_abs_value(spec.interior, 1.0)
    required = 2.0 * np.sqrt(peak / lambda1(spec.dom).lambda1)
    witness = {"vertex": x, "t": s, "abs_f": peak} if x is not None else None
    return CheckEntry(passed=bool(spec.dom.mu0 > required), witness=witness, note=f"needs mu0 > {required!r}")


def check_f1l(spec: ProblemSpec, samples: Optional[np.ndarray] = None) -> CheckEntry:
    """limsup_{t -> 0+} f(x, t)/t < lambda_1 at every vertex of D, boundary included."""
    vertices = spec.dom.vertices
    limits = spec.f.limit_ratio_at_zero(vertices)
    samples = np.geomspace(1e-8, 1e-3, 32) if samples is None else np.asarray(samples, dtype=float)
    t = np.broadcast_to(samples, (len(vertices), len(samples)))
    sampled = float(np.max(spec.f.value(vertices, t) / t))
    first = lambda1(spec.dom).lambda1
    worst = int(np.argmax(limits))
    return CheckEntry(
        passed=bool(limits[worst] < first),
        witness={"vertex": vertices[worst], "limit": float(limits[worst]), "sampled": sampled},
        note=f"lambda_1 = {first!r}; limit in closed form",
    )


# Parameter ranges

def lambda_admissible(spec: ProblemSpec, rho: float) -> float:
    """Upper end Lambda(rho) of the admissible interval (0, Lambda(rho)); inf when F vanishes on the ball."""
    if not rho > 0.0:
        raise ValueError("rho must be positive")
    z = kappa(spec) * np.sqrt(rho)
    peak, _, _ = spec.f.max_abs_potential(spec.dom.vertices, z)
    if peak == 0.0:
        return float("inf")
    return float(rho / (2.0 * peak))


@dataclass(frozen=True)
class LambdaStar:
    value: float  # +inf when unbounded
    sup_ratio: float  # sup over rho of rho / max|F|, i.e. 2 lambda*
    argmax: Optional[float]  # maximizing z = kappa sqrt(rho)

    @property
    def infinite(self) -> bool:
        return bool(np.isinf(self.value))


def lambda_star(spec: ProblemSpec) -> LambdaStar:
    """lambda* = (1/(2 kappa^2)) sup_z z^2 / max_{x, |s| <= z} |F(x, s)|."""
    k2 = kappa(spec) ** 2
    vertices = spec.dom.vertices
    low, high = spec.f.potential_exponents(vertices)
    if low is None or low > 2.0 or high < 2.0:
        logger.info("lambda* is unbounded (potential exponents %s..%s)", low, high)
        return LambdaStar(value=float("inf"), sup_ratio=float("inf"), argmax=None)

    def quotient(log_z: float) -> float:
        z = float(np.exp(log_z))
        peak = spec.f.max_abs_potential(vertices, z)[0]
        return z * z / peak if peak > 0.0 else np.inf

    logs = np.linspace(np.log(1e-8), np.log(1e8), 801)
    values = np.array([quotient(s) for s in logs])
    best = int(np.argmax(values))
    lower, upper = logs[max(best - 1, 0)], logs[min(best + 1, len(logs) - 1)]
    log_z, peak = golden_section_max(quotient, lower, upper, tol=settings.tolerances.golden)
    if values[best] > peak:
        log_z, peak = logs[best], values[best]
    return LambdaStar(value=float(peak / (2.0 * k2)), sup_ratio=float(peak / k2), argmax=float(np.exp(log_z)))


def find_energy_escape(spec: ProblemSpec, u0: Optional[FunctionLike] = None, level: float = 1e6,
                       t_max: float = 1e6) -> Optional[Tuple[float, float]]:
    """Smallest doubling t <= t_max with J(t u0) < -level; u0 defaults to the interior indicator."""
    if u0 is None:
        u0 = VertexFn.from_interior(spec.dom, np.ones(len(spec.interior)))
    values = spec.dom.coerce_dirichlet(u0)
    t = 1.0
    while t <= t_max:
        j = energy(spec, t * values)
        if j < -level:
            return t, j
        t *= 2.0
    return None


def verify_hypotheses(spec: ProblemSpec, rho: Optional[float] = None) -> HypothesisReport:
    """Run every applicable check and collect the results."""
    dom = spec.dom
    first = lambda1(dom).lambda1
    valid = spec.alpha.regime is not Regime.INVALID
    f0 = spec.f.value_at_zero(spec.interior)
    report: Dict[str, object] = dict(
        regime=spec.alpha.regime.value,
        lambda1=first,
        mu0=dom.mu0,
        volume=dom.volume,
        alpha_l1=spec.alpha.l1,
        kappa=kappa(spec) if valid else None,
        f_at_zero_nonzero=bool(np.any(f0 != 0.0)),
        f1l=check_f1l(spec),
        corollary_measure=check_corollary_measure(spec),
        explicit_boundary=dom.explicit_boundary,
    )
    if spec.f.ar_beta is not None and spec.f.ar_r0 is not None:
        beta, r0 = spec.f.ar_beta, spec.f.ar_r0
        report["ar_two_sided"] = check_ar(spec.f, beta, r0, spec.interior, two_sided=True)
        report["ar_one_sided"] = check_ar(spec.f, beta, r0, spec.interior, two_sided=False)
        report["ar_leading_term"] = ar_leading_term(spec.f, beta, spec.interior)
    if valid:
        star = lambda_star(spec)
        report["lambda_star"] = None if star.infinite else star.value
        report["lambda_star_infinite"] = star.infinite
        report["lambda_star_sup_ratio"] = None if star.infinite else star.sup_ratio
        if rho is not None:
            report["lambda_admissible"] = bool(spec.lam < lambda_admissible(spec, rho))
        else:
            report["lambda_admissible"] = bool(spec.lam < star.value)
    else:
        logger.warning("alpha regime is Invalid; norm-based constants skipped")
    return HypothesisReport(**report)
