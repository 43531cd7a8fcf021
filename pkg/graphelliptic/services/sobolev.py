"""Higher-order Sobolev machinery shared by the spectral and (m,p) solvers.

|grad^k u| is |Delta^{k/2} u| for even k and the slope of Delta^{(k-1)/2} u for odd k.
The class C_0^m(D) asks |grad^j u| = 0 on the boundary for j < m; every such
condition is linear in u, so the class is the nullspace of a constraint matrix.
"""
import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import linalg

from graphelliptic.config import settings
from graphelliptic.errors import TrivialConstraintClass
from graphelliptic.models.graph import DomainDecomp, FunctionLike
from graphelliptic.services.calculus import laplacian_matrix

logger = logging.getLogger(__name__)


@lru_cache(maxsize=128)
def iterated_laplacian_matrix(dom: DomainDecomp, ell: int) -> np.ndarray:
    if ell < 0:
        raise ValueError("iteration count must be nonnegative")
    if ell == 0:
        matrix = np.eye(dom.size)
    else:
        matrix = laplacian_matrix(dom) @ iterated_laplacian_matrix(dom, ell - 1)
        matrix = np.asarray(matrix)
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=64)
def _directed_edges(dom: DomainDecomp) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    coo = dom.weights.tocoo()
    return coo.row, coo.col, coo.data


def constraint_matrix(dom: DomainDecomp, m: int) -> np.ndarray:
    """Rows of the linear conditions |grad^j u|(x) = 0, x on the boundary, j < m."""
    rows = []
    for j in range(m):
        power = iterated_laplacian_matrix(dom, j // 2)
        for x in dom.boundary:
            i = dom.position[x]
            if j % 2 == 0:
                rows.append(power[i])
                continue
            # zero slope <=> equal values along every D-edge at x
            start, stop = dom.weights.indptr[i], dom.weights.indptr[i + 1]
            for y in dom.weights.indices[start:stop]:
                rows.append(power[y] - power[i])
    return np.array(rows).reshape(-1, dom.size)


@lru_cache(maxsize=64)
def constraint_basis(dom: DomainDecomp, m: int) -> np.ndarray:
    """Orthonormal basis (columns, D coordinates) of C_0^m(D)."""
    if m < 1:
        raise ValueError("order must be a positive integer")
    matrix = constraint_matrix(dom, m)
    basis = linalg.null_space(matrix, rcond=settings.tolerances.trivial) if len(matrix) else np.eye(dom.size)
    if basis.shape[1] == 0:
        raise TrivialConstraintClass(f"C_0^{m}(D) reduces to the zero function")
    # fixed sign per column keeps results reproducible across LAPACK builds
    pivots = np.argmax(np.abs(basis), axis=0)
    basis = basis * np.sign(basis[pivots, np.arange(basis.shape[1])])
    basis.setflags(write=False)
    logger.debug("C_0^%d(D) has dimension %d", m, basis.shape[1])
    return basis


def top_slope(dom: DomainDecomp, u: FunctionLike, k: int) -> np.ndarray:
    """|grad^k u| at every vertex of D."""
    values = iterated_laplacian_matrix(dom, k // 2) @ dom.coerce(u)
    if k % 2 == 0:
        return np.abs(values)
    return np.sqrt(_squared_slope(dom, values))


def _squared_slope(dom: DomainDecomp, v: np.ndarray) -> np.ndarray:
    rows, cols, w = _directed_edges(dom)
    diffs = v[cols] - v[rows]
    return np.bincount(rows, weights=w * diffs * diffs, minlength=dom.size) / (2.0 * dom.mu)


def _pointwise(s: np.ndarray, p: float, eps: float, order: int) -> np.ndarray:
    """phi(s) = (s + eps^2)^(p/2) or one of its first two s-derivatives."""
    base = s + eps * eps
    half = p / 2.0
    coeff = (1.0, half, half * (half - 1.0))[order]
    if coeff == 0.0:
        return np.zeros_like(base)
    exponent = half - order
    with np.errstate(divide="ignore", invalid="ignore"):
        out = coeff * base ** exponent
    if exponent < 0.0:
        out = np.where(base > 0.0, out, np.inf)
    return out


def seminorm(dom: DomainDecomp, u: FunctionLike, m: int, p: float, eps: float = 0.0) -> float:
    """integral of |grad^m u|^p (regularized by eps when eps > 0)."""
    v = iterated_laplacian_matrix(dom, m // 2) @ dom.coerce(u)
    s = v * v if m % 2 == 0 else _squared_slope(dom, v)
    return float(np.dot(dom.mu, _pointwise(s, p, eps, 0)))


def seminorm_gradient(dom: DomainDecomp, u: FunctionLike, m: int, p: float, eps: float = 0.0) -> np.ndarray:
    """Euclidean gradient of the seminorm integral over the D coordinates.

    At vertices where |grad^m u| = 0 the continuous extension (zero) is used.
    """
    power = iterated_laplacian_matrix(dom, m // 2)
    v = power @ dom.coerce(u)
    if m % 2 == 0:
        phi1 = _pointwise(v * v, p, eps, 1)
        with np.errstate(invalid="ignore"):
            local = np.where(v != 0.0, 2.0 * dom.mu * phi1 * v, 0.0)
        return power.T @ local
    g = _pointwise(_squared_slope(dom, v), p, eps, 1)
    g = np.where(np.isfinite(g), g, 0.0)
    rows, cols, w = _directed_edges(dom)
    flux = w * (g[rows] + g[cols]) * (v[rows] - v[cols])
    return power.T @ np.bincount(rows, weights=flux, minlength=dom.size)


def seminorm_hessian(dom: DomainDecomp, u: FunctionLike, m: int, p: float, eps: float = 0.0) -> np.ndarray:
    power = iterated_laplacian_matrix(dom, m // 2)
    v = power @ dom.coerce(u)
    n = dom.size
    if m % 2 == 0:
        t2 = v * v
        phi1 = _pointwise(t2, p, eps, 1)
        phi2 = _pointwise(t2, p, eps, 2)
        with np.errstate(invalid="ignore"):
            local = dom.mu * (2.0 * phi1 + 4.0 * t2 * phi2)
        local = np.nan_to_num(local, nan=0.0, posinf=np.finfo(float).max)
        return power.T @ (local[:, None] * power)

    s = _squared_slope(dom, v)
    g = _pointwise(s, p, eps, 1)
    h = _pointwise(s, p, eps, 2)
    rows, cols, w = _directed_edges(dom)

    # phi'(s_x) part: graph Laplacian with edge weights w (g_x + g_y)
    edge = w * (g[rows] + g[cols])
    laplacian = np.zeros((n, n))
    np.add.at(laplacian, (rows, cols), -edge)
    np.add.at(laplacian, (rows, rows), edge)

    # phi''(s_x) part: sum over x of phi''(s_x)/mu_x a_x a_x^T, where a_x = mu_x grad s_x
    a = np.zeros((n, n))
    diffs = w * (v[cols] - v[rows])
    np.add.at(a, (cols, rows), diffs)
    np.add.at(a, (rows, rows), -diffs)
    curvature = np.where(s > 0.0, h, 0.0) / dom.mu
    hessian = laplacian + (a * curvature[None, :]) @ a.T
    return power.T @ hessian @ power
