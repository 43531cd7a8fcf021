"""Symbolic nonlinearities f(x, t) built from power terms.

Each term is either an integer power c t^k or a signed power c |t|^(q-2) t.
Coefficients are scalars or per-vertex maps (vertices missing from a map get 0).
"""
import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from graphelliptic.config import settings
from graphelliptic.models.schemas import NonlinearityEntry

logger = logging.getLogger(__name__)

CoefficientLike = Union[float, Mapping[str, float]]
_GRID_POINTS = 4097


def _freeze(coeff: CoefficientLike) -> Union[float, Tuple[Tuple[str, float], ...]]:
    if isinstance(coeff, Mapping):
        return tuple(sorted((str(k), float(v)) for k, v in coeff.items()))
    if isinstance(coeff, tuple):
        return coeff
    return float(coeff)


def coefficient_values(coeff, vertices: Sequence[str]) -> np.ndarray:
    """Per-vertex values of a scalar or mapped coefficient; unmapped vertices get 0."""
    coeff = _freeze(coeff)
    if isinstance(coeff, tuple):
        table = dict(coeff)
        return np.array([table.get(v, 0.0) for v in vertices], dtype=float)
    return np.full(len(vertices), coeff, dtype=float)


@dataclass(frozen=True)
class Term:
    kind: Literal["pow", "spow"]
    exponent: float
    coeff: Union[float, Tuple[Tuple[str, float], ...]]

    def __post_init__(self):
        object.__setattr__(self, "coeff", _freeze(self.coeff))
        if self.kind == "pow" and (self.exponent < 0 or int(self.exponent) != self.exponent):
            raise ValueError(f"integer power needs k >= 0, got {self.exponent}")
        if self.kind == "spow" and not self.exponent > 1.0:
            raise ValueError(f"signed power needs q > 1, got {self.exponent}")

    def coefficients(self, vertices: Sequence[str]) -> np.ndarray:
        return coefficient_values(self.coeff, vertices)

    def is_zero(self) -> bool:
        if isinstance(self.coeff, tuple):
            return all(a == 0.0 for _, a in self.coeff)
        return self.coeff == 0.0

    @property
    def potential_exponent(self) -> float:
        return self.exponent + 1 if self.kind == "pow" else self.exponent

    def value(self, c: np.ndarray, t: np.ndarray) -> np.ndarray:
        if self.kind == "pow":
            return c * t ** int(self.exponent)
        return c * np.sign(t) * np.abs(t) ** (self.exponent - 1.0)

    def potential(self, c: np.ndarray, t: np.ndarray) -> np.ndarray:
        e = self.potential_exponent
        if self.kind == "pow":
            return c * t ** int(e) / e
        return c * np.abs(t) ** e / e

    def derivative(self, c: np.ndarray, t: np.ndarray) -> np.ndarray:
        if self.kind == "pow":
            k = int(self.exponent)
            return np.zeros_like(t * c) if k == 0 else c * k * t ** (k - 1)
        # infinite at t = 0 when q < 2
        with np.errstate(divide="ignore"):
            return c * (self.exponent - 1.0) * np.abs(t) ** (self.exponent - 2.0)


class Branch:
    """Generalized polynomial sum a_e r^e in r = |s| >= 0, real exponents allowed."""

    def __init__(self, coefficients: Optional[Dict[float, float]] = None):
        self.coefficients = {e: a for e, a in (coefficients or {}).items() if a != 0.0}

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        total = np.zeros_like(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            for e, a in self.coefficients.items():
                total = total + a * r ** e
        return total

    def is_zero(self) -> bool:
        return not self.coefficients

    def derivative(self) -> "Branch":
        return Branch({e - 1.0: a * e for e, a in self.coefficients.items() if e != 0.0})

    def min_exponent(self) -> Optional[float]:
        return min(self.coefficients) if self.coefficients else None

    def max_exponent(self) -> Optional[float]:
        return max(self.coefficients) if self.coefficients else None

    def leading_coefficient(self) -> float:
        return self.coefficients[self.max_exponent()] if self.coefficients else 0.0

    def is_polynomial(self) -> bool:
        return all(e >= 0 and float(e).is_integer() for e in self.coefficients)

    def to_polynomial(self) -> Polynomial:
        if not self.coefficients:
            return Polynomial([0.0])
        coef = np.zeros(int(max(self.coefficients)) + 1)
        for e, a in self.coefficients.items():
            coef[int(e)] += a
        return Polynomial(coef)

    def roots(self, upper: float) -> np.ndarray:
        """Roots in the open interval (0, upper), sorted."""
        if self.is_zero() or upper <= 0.0:
            return np.empty(0)
        if self.is_polynomial():
            poly = self.to_polynomial().trim()
            if poly.degree() < 1:
                return np.empty(0)
            found = poly.roots()
            real = found[np.abs(found.imag) <= 1e-9 * (1.0 + np.abs(found.real))].real
            real = real[(real > 0.0) & (real < upper)]
            return np.unique(self._polish(real, upper))
        return self._bracketed_roots(upper)

    def _polish(self, candidates: np.ndarray, upper: float) -> np.ndarray:
        # companion-matrix roots of higher degree lose digits
        slope = self.derivative()
        out = []
        for r in candidates:
            for _ in range(3):
                d = float(slope(r))
                if d == 0.0:
                    break
                step = float(self(r)) / d
                if not (abs(step) < 1e-6 * (1.0 + abs(r)) and 0.0 < r - step < upper):
                    break
                r = r - step
            out.append(r)
        return np.array(out)

    def _bracketed_roots(self, upper: float) -> np.ndarray:
        tol = settings.tolerances.potential_extremum
        grid = np.unique(np.concatenate([
            np.linspace(0.0, upper, _GRID_POINTS)[1:-1],
            upper * np.geomspace(1e-12, 1.0, 257)[:-1],
        ]))
        values = self(grid)
        roots: List[float] = []
        for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
            if fa == 0.0:
                roots.append(float(a))
            elif fa * fb < 0.0:
                roots.append(brentq(self, a, b, xtol=tol * max(1.0, upper)))
        return np.array(sorted(set(roots)))


@dataclass(frozen=True)
class VertexBranches:
    """F on both sign branches at one vertex: F(r) and F(-r) for r >= 0."""
    positive: Branch
    negative: Branch


@dataclass(frozen=True)
class Nonlinearity:
    terms: Tuple[Term, ...] = ()
    ar_beta: Optional[float] = None
    ar_r0: Optional[float] = None
    positive_part: bool = False

    @classmethod
    def from_entry(cls, entry: NonlinearityEntry) -> "Nonlinearity":
        terms = []
        for t in entry.terms:
            exponent = t.k if t.kind == "pow" else t.q
            terms.append(Term(kind=t.kind, exponent=float(exponent), coeff=t.c))
        ar = entry.ar
        return cls(
            terms=tuple(terms),
            ar_beta=ar.beta if ar else None,
            ar_r0=ar.r0 if ar else None,
        )

    @classmethod
    def power(cls, c: CoefficientLike, k: int) -> "Nonlinearity":
        return cls(terms=(Term("pow", float(k), c),))

    @classmethod
    def signed_power(cls, c: CoefficientLike, q: float) -> "Nonlinearity":
        return cls(terms=(Term("spow", float(q), c),))

    def __add__(self, other: "Nonlinearity") -> "Nonlinearity":
        return Nonlinearity(
            terms=self.terms + other.terms,
            ar_beta=self.ar_beta if self.ar_beta is not None else other.ar_beta,
            ar_r0=self.ar_r0 if self.ar_r0 is not None else other.ar_r0,
            positive_part=self.positive_part or other.positive_part,
        )

    def with_ar(self, beta: float, r0: float) -> "Nonlinearity":
        return replace(self, ar_beta=beta, ar_r0=r0)

    def truncated(self) -> "Nonlinearity":
        """f+ : f for t >= 0 and 0 for t < 0."""
        return replace(self, positive_part=True)

    def scaled(self, c: float) -> "Nonlinearity":
        terms = []
        for term in self.terms:
            if isinstance(term.coeff, tuple):
                coeff = {v: c * a for v, a in term.coeff}
            else:
                coeff = c * term.coeff
            terms.append(Term(term.kind, term.exponent, coeff))
        return replace(self, terms=tuple(terms))

    def is_zero(self) -> bool:
        return all(term.is_zero() for term in self.terms)

    # Pointwise evaluation; t has the vertex axis first

    def coefficients(self, vertices: Sequence[str]) -> np.ndarray:
        return _coefficient_matrix(self, tuple(vertices))

    def _evaluate(self, method: str, vertices: Sequence[str], t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        matrix = self.coefficients(vertices)
        shape = (len(vertices),) + (1,) * max(t.ndim - 1, 0)
        total = np.zeros(np.broadcast_shapes(t.shape, shape))
        for term, c in zip(self.terms, matrix):
            total = total + getattr(term, method)(c.reshape(shape), t)
        if self.positive_part:
            total = np.where(t >= 0.0, total, 0.0)
        return total

    def value(self, vertices: Sequence[str], t) -> np.ndarray:
        return self._evaluate("value", vertices, t)

    def potential(self, vertices: Sequence[str], t) -> np.ndarray:
        return self._evaluate("potential", vertices, t)

    def derivative(self, vertices: Sequence[str], t) -> np.ndarray:
        return self._evaluate("derivative", vertices, t)

    def value_at_zero(self, vertices: Sequence[str]) -> np.ndarray:
        return self.value(vertices, np.zeros(len(vertices)))

    # Closed-form analysis

    def branches(self, vertices: Sequence[str]) -> Tuple[VertexBranches, ...]:
        return _branches(self, tuple(vertices))

    def limit_ratio_at_zero(self, vertices: Sequence[str]) -> np.ndarray:
        """lim f(x, t)/t as t -> 0+, per vertex (may be +-inf)."""
        out = np.zeros(len(vertices))
        for i, b in enumerate(self.branches(vertices)):
            f_pos = b.positive.derivative()
            if f_pos.is_zero():
                continue
            lowest = f_pos.min_exponent()
            coeff = f_pos.coefficients[lowest]
            if lowest < 1.0:
                out[i] = np.inf if coeff > 0 else -np.inf
            elif lowest == 1.0:
                out[i] = coeff
        return out

    def potential_exponents(self, vertices: Sequence[str]) -> Tuple[Optional[float], Optional[float]]:
        """Smallest and largest exponent of F over all vertices and both branches."""
        lows, highs = [], []
        for b in self.branches(vertices):
            for branch in (b.positive, b.negative):
                if not branch.is_zero():
                    lows.append(branch.min_exponent())
                    highs.append(branch.max_exponent())
        if not lows:
            return None, None
        return min(lows), max(highs)

    def max_abs_potential(self, vertices: Sequence[str], z: float) -> Tuple[float, float, Optional[str]]:
        """max over x and |s| <= z of |F(x, s)| with its maximizer (s, x).

        Ties resolve to the smallest |s|, then to the first vertex.
        """
        return _ball_extremum(self, self._representatives(vertices), z, use_value=False)

    def max_abs_value(self, vertices: Sequence[str], z: float) -> Tuple[float, float, Optional[str]]:
        """max over x and |s| <= z of |f(x, s)|."""
        return _ball_extremum(self, self._representatives(vertices), z, use_value=True)

    def _representatives(self, vertices: Sequence[str]) -> Tuple[str, ...]:
        """First vertex of every distinct coefficient column."""
        first: Dict[tuple, int] = {}
        for i, column in enumerate(map(tuple, self.coefficients(vertices).T)):
            first.setdefault(column, i)
        return tuple(vertices[i] for i in sorted(first.values()))


@lru_cache(maxsize=256)
def _coefficient_matrix(nl: Nonlinearity, vertices: Tuple[str, ...]) -> np.ndarray:
    if not nl.terms:
        return np.zeros((0, len(vertices)))
    matrix = np.vstack([term.coefficients(vertices) for term in nl.terms])
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=256)
def _branches(nl: Nonlinearity, vertices: Tuple[str, ...]) -> Tuple[VertexBranches, ...]:
    matrix = _coefficient_matrix(nl, vertices)
    out = []
    for i in range(len(vertices)):
        pos: Dict[float, float] = {}
        neg: Dict[float, float] = {}
        for term, row in zip(nl.terms, matrix):
            c = float(row[i])
            if c == 0.0:
                continue
            e = term.potential_exponent
            pos[e] = pos.get(e, 0.0) + c / e
            if term.kind == "pow":
                # F(-r) = c (-1)^(k+1) r^(k+1) / (k+1)
                neg[e] = neg.get(e, 0.0) + c * (-1.0) ** int(e) / e
            else:
                neg[e] = neg.get(e, 0.0) + c / e
        if nl.positive_part:
            neg = {}
        out.append(VertexBranches(Branch(pos), Branch(neg)))
    return tuple(out)


def _ball_extremum(nl: Nonlinearity, vertices: Tuple[str, ...], z: float, use_value: bool):
    if z < 0.0:
        raise ValueError("radius must be nonnegative")
    best_value, best_s, best_x = 0.0, 0.0, None
    for x, b in zip(vertices, _branches(nl, vertices)):
        for sign, branch in ((1.0, b.positive), (-1.0, b.negative)):
            target = branch.derivative() if use_value else branch
            if target.is_zero():
                continue
            candidates = np.unique(np.concatenate([[0.0], target.derivative().roots(z), [z]]))
            values = np.nan_to_num(np.abs(target(candidates)), nan=0.0)
            for r, v in zip(candidates, values):
                if v > best_value or (v == best_value and best_x is not None and r < abs(best_s)):
                    best_value, best_s, best_x = float(v), float(sign * r), x
    return best_value, best_s, best_x
