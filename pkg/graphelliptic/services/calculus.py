"""Discrete differential calculus on a domain D.

Neighbor sums are restricted to D. On Dirichlet-class functions this agrees with
the sums over the whole graph, since every outside neighbor hangs off a boundary
vertex where the function vanishes.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import sparse

from graphelliptic.config import settings
from graphelliptic.errors import NotDirichletClass
from graphelliptic.models.graph import DomainDecomp, FunctionLike

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Stiffness:
    interior: sparse.csr_matrix  # L on D° x D°
    coupling: sparse.csr_matrix  # L on D° x boundary
    mass: np.ndarray  # mu on D°


@lru_cache(maxsize=64)
def _edges(dom: DomainDecomp) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    coo = dom.weights.tocoo()
    return coo.row, coo.col, coo.data


def laplacian_all(dom: DomainDecomp, u: FunctionLike) -> np.ndarray:
    """Delta_mu u at every vertex of D."""
    values = dom.coerce(u)
    return (dom.weights @ values - dom.degrees * values) / dom.mu


def laplacian(dom: DomainDecomp, u: FunctionLike, x: str) -> float:
    return float(laplacian_all(dom, u)[dom.position_of(x)])


def gradient_form_all(dom: DomainDecomp, u: FunctionLike, v: FunctionLike) -> np.ndarray:
    u_values, v_values = dom.coerce(u), dom.coerce(v)
    rows, cols, w = _edges(dom)
    products = w * (u_values[cols] - u_values[rows]) * (v_values[cols] - v_values[rows])
    return np.bincount(rows, weights=products, minlength=dom.size) / (2.0 * dom.mu)


def gradient_form(dom: DomainDecomp, u: FunctionLike, v: FunctionLike, x: str) -> float:
    return float(gradient_form_all(dom, u, v)[dom.position_of(x)])


def slope_all(dom: DomainDecomp, u: FunctionLike) -> np.ndarray:
    return np.sqrt(np.maximum(gradient_form_all(dom, u, u), 0.0))


def slope(dom: DomainDecomp, u: FunctionLike, x: str) -> float:
    return float(slope_all(dom, u)[dom.position_of(x)])


def dirichlet_inner(dom: DomainDecomp, u: FunctionLike, v: FunctionLike) -> float:
    """<u, v> = integral of Gamma(u, v); the inner product of the Dirichlet class."""
    return float(np.dot(dom.mu, gradient_form_all(dom, u, v)))


def dirichlet_energy(dom: DomainDecomp, u: FunctionLike) -> float:
    return dirichlet_inner(dom, u, u)


def sobolev_inner(dom: DomainDecomp, u: FunctionLike, v: FunctionLike) -> float:
    """Full W^{1,2} inner product: gradient part plus the L2 mass term."""
    return dirichlet_inner(dom, u, v) + float(np.dot(dom.mu, dom.coerce(u) * dom.coerce(v)))


def sobolev_norm(dom: DomainDecomp, u: FunctionLike) -> float:
    return float(np.sqrt(sobolev_inner(dom, u, u)))


def lp_norm(dom: DomainDecomp, u: FunctionLike, nu: float = 2.0) -> float:
    values = np.abs(dom.coerce(u))
    if np.isinf(nu):
        return float(values.max())
    return float(np.dot(dom.mu, values ** nu) ** (1.0 / nu))


@lru_cache(maxsize=64)
def laplacian_matrix(dom: DomainDecomp) -> sparse.csr_matrix:
    """Matrix of Delta_mu on all of D (neighbor sums restricted to D)."""
    generator = dom.weights - sparse.diags(dom.degrees)
    return sparse.diags(1.0 / dom.mu) @ generator.tocsr()


@lru_cache(maxsize=64)
def assemble_stiffness(dom: DomainDecomp) -> Stiffness:
    """L with (L u)(x) = -mu(x) Delta_mu u(x) on D°, split into interior block and boundary coupling."""
    full = (sparse.diags(dom.degrees) - dom.weights).tocsr()
    interior = dom.interior_positions
    boundary = np.flatnonzero(dom.boundary_mask)
    stiffness = Stiffness(
        interior=full[interior][:, interior].tocsr(),
        coupling=full[interior][:, boundary].tocsr(),
        mass=dom.mu[interior].copy(),
    )
    logger.debug("Assembled stiffness of size %d (nnz=%d)", len(interior), stiffness.interior.nnz)
    return stiffness


def check_parts_identity(dom: DomainDecomp, u: FunctionLike, v: FunctionLike) -> float:
    """|int Gamma(u, v) + int (Delta_mu u) v| for Dirichlet-class v."""
    try:
        v_values = dom.coerce_dirichlet(v)
    except NotDirichletClass:
        logger.warning("Integration by parts needs v = 0 on the boundary")
        raise
    lhs = dirichlet_inner(dom, u, v_values)
    rhs = float(np.dot(dom.mu, laplacian_all(dom, u) * v_values))
    residual = abs(lhs + rhs)
    scale = 1.0 + np.linalg.norm(dom.coerce(u)) * np.linalg.norm(v_values)
    if residual > 1e3 * settings.tolerances.identity * scale:
        logger.warning("Green identity residual %.3e exceeds round-off", residual)
    return residual
