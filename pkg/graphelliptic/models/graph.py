"""Weighted graphs, domain decompositions and vertex functions.

All types are immutable after construction and safe to share across threads.
"""
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy import sparse
from scipy.sparse import csgraph

from graphelliptic.errors import (
    AsymmetricWeight,
    DanglingEdge,
    DisconnectedDomain,
    DomainMismatch,
    EmptyBoundary,
    EmptyDomain,
    EmptyInterior,
    NegativeWeight,
    NonPositiveMeasure,
    NotDirichletClass,
    ParseError,
    SelfLoop,
    UnknownVertex,
    VertexOutsideDomain,
)
from graphelliptic.models.schemas import GraphDocument

logger = logging.getLogger(__name__)

Document = Union[str, bytes, Mapping, GraphDocument]


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    vertices: Tuple[str, ...]
    mu: np.ndarray
    weights: sparse.csr_matrix

    @cached_property
    def index(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @property
    def edge_count(self) -> int:
        return self.weights.nnz // 2

    def index_of(self, x: str) -> int:
        try:
            return self.index[x]
        except KeyError:
            raise UnknownVertex(f"vertex {x!r} is not stored in the graph") from None

    def neighbors(self, x: str) -> Tuple[str, ...]:
        i = self.index_of(x)
        row = self.weights.indices[self.weights.indptr[i]:self.weights.indptr[i + 1]]
        return tuple(self.vertices[j] for j in sorted(row))

    def weight(self, x: str, y: str) -> float:
        return float(self.weights[self.index_of(x), self.index_of(y)])

    def degree(self, x: str) -> float:
        """deg(x) = sum of w(x, y) over all stored y."""
        return float(self.degrees[self.index_of(x)])

    @cached_property
    def _hops(self) -> np.ndarray:
        return csgraph.shortest_path(self.weights, method="D", directed=False, unweighted=True)

    def path_distance(self, x: str, y: str) -> Optional[int]:
        """Edge count of a shortest path; None when x and y lie in different components."""
        d = self._hops[self.index_of(x), self.index_of(y)]
        return None if np.isinf(d) else int(d)

    def is_connected(self) -> bool:
        n_components, _ = csgraph.connected_components(self.weights, directed=False)
        return n_components == 1


@dataclass(frozen=True, eq=False)
class DomainDecomp:
    graph: WeightedGraph
    vertices: Tuple[str, ...]
    boundary: Tuple[str, ...]
    interior: Tuple[str, ...]
    explicit_boundary: bool = False

    @cached_property
    def graph_indices(self) -> np.ndarray:
        return np.array([self.graph.index[v] for v in self.vertices], dtype=int)

    @cached_property
    def position(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def mu(self) -> np.ndarray:
        return self.graph.mu[self.graph_indices]

    @cached_property
    def weights(self) -> sparse.csr_matrix:
        """Weights restricted to D x D, in D order."""
        idx = self.graph_indices
        return self.graph.weights[idx][:, idx].tocsr()

    @cached_property
    def degrees(self) -> np.ndarray:
        """Degrees with neighbor sums restricted to D."""
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.vertices), dtype=bool)
        mask[[self.position[v] for v in self.boundary]] = True
        return mask

    @cached_property
    def interior_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def volume(self) -> float:
        return float(self.mu.sum())

    @property
    def mu0(self) -> float:
        return float(self.mu.min())

    def position_of(self, x: str) -> int:
        try:
            return self.position[x]
        except KeyError:
            raise VertexOutsideDomain(f"vertex {x!r} is not in the domain") from None

    def coerce(self, u: "FunctionLike") -> np.ndarray:
        """Values of u as a float array in domain order."""
        if isinstance(u, VertexFn):
            if u.domain is not self and u.domain.vertices != self.vertices:
                raise DomainMismatch("vertex function belongs to another domain")
            return u.values
        values = np.asarray(u, dtype=float)
        if values.shape != (self.size,):
            raise DomainMismatch(f"expected {self.size} values, got shape {values.shape}")
        return values

    def coerce_dirichlet(self, u: "FunctionLike") -> np.ndarray:
        values = self.coerce(u)
        if np.any(values[self.boundary_mask] != 0.0):
            raise NotDirichletClass("function does not vanish on the boundary")
        return values


@dataclass(frozen=True, eq=False)
class VertexFn:
    domain: DomainDecomp
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.domain.size,):
            raise DomainMismatch(f"expected {self.domain.size} values, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, domain: DomainDecomp) -> "VertexFn":
        return cls(domain, np.zeros(domain.size))

    @classmethod
    def from_mapping(cls, domain: DomainDecomp, mapping: Mapping[str, float]) -> "VertexFn":
        values = np.zeros(domain.size)
        for vertex, value in mapping.items():
            values[domain.position_of(vertex)] = value
        return cls(domain, values)

    @classmethod
    def from_interior(cls, domain: DomainDecomp, interior_values: Iterable[float]) -> "VertexFn":
        """Dirichlet-class function with the given values on the interior."""
        interior_values = np.asarray(list(interior_values), dtype=float)
        if interior_values.shape != (len(domain.interior),):
            raise DomainMismatch("interior values do not match the interior size")
        values = np.zeros(domain.size)
        values[domain.interior_positions] = interior_values
        return cls(domain, values)

    def __getitem__(self, vertex: str) -> float:
        return float(self.values[self.domain.position_of(vertex)])

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.domain.interior_positions]

    def is_dirichlet(self) -> bool:
        return bool(np.all(self.values[self.domain.boundary_mask] == 0.0))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def positive_part(self) -> "VertexFn":
        return VertexFn(self.domain, np.maximum(self.values, 0.0))

    def negative_part(self) -> "VertexFn":
        """max(-u, 0), so that u = u+ - u-."""
        return VertexFn(self.domain, np.maximum(-self.values, 0.0))

    def as_dict(self) -> Dict[str, float]:
        return {v: float(x) for v, x in zip(self.domain.vertices, self.values)}


FunctionLike = Union[VertexFn, Sequence[float], np.ndarray]


def load_document(document: Document) -> GraphDocument:
    """Parse a graph document from JSON text, bytes or an already decoded mapping."""
    if isinstance(document, GraphDocument):
        return document
    try:
        if isinstance(document, (str, bytes)):
            return GraphDocument.model_validate_json(document)
        return GraphDocument.model_validate(document)
    except (ValidationError, json.JSONDecodeError, ValueError) as e:
        raise ParseError(f"malformed graph document: {e}") from e


def load_graph(document: Document) -> WeightedGraph:
    """Build a validated graph; zero-weight edges are dropped."""
    doc = load_document(document)

    vertices = tuple(v.id for v in doc.vertices)
    if len(set(vertices)) != len(vertices):
        raise ParseError("duplicate vertex ids")
    index = {v: i for i, v in enumerate(vertices)}

    mu = np.array([v.mu for v in doc.vertices], dtype=float)
    for v in doc.vertices:
        if not v.mu > 0.0:
            raise NonPositiveMeasure(f"measure of {v.id!r} must be positive, got {v.mu}")

    pairs: Dict[Tuple[int, int], float] = {}
    for edge in doc.edges:
        if edge.a not in index or edge.b not in index:
            raise DanglingEdge(f"edge ({edge.a!r}, {edge.b!r}) references an undeclared vertex")
        if edge.a == edge.b:
            raise SelfLoop(f"self-loop at {edge.a!r}")
        if edge.w < 0.0:
            raise NegativeWeight(f"weight of ({edge.a!r}, {edge.b!r}) is negative")
        i, j = index[edge.a], index[edge.b]
        key = (min(i, j), max(i, j))
        if key in pairs and pairs[key] != edge.w:
            raise AsymmetricWeight(f"conflicting weights for ({edge.a!r}, {edge.b!r})")
        pairs[key] = edge.w

    rows, cols, data = [], [], []
    for (i, j), w in pairs.items():
        if w == 0.0:
            continue
        rows += [i, j]
        cols += [j, i]
        data += [w, w]

    n = len(vertices)
    weights = sparse.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=float)
    weights.sort_indices()
    mu.setflags(write=False)
    logger.debug("Loaded graph with %d vertices and %d edges", n, weights.nnz // 2)
    return WeightedGraph(vertices=vertices, mu=mu, weights=weights)


def decompose_domain(
    graph: WeightedGraph,
    domain: Iterable[str],
    boundary: Optional[Iterable[str]] = None,
) -> DomainDecomp:
    """Split D into vertex boundary and interior.

    A designated boundary replaces the computed one, provided it contains it.
    """
    requested = set(domain)
    if not requested:
        raise EmptyDomain("domain is empty")
    for v in requested:
        graph.index_of(v)
    vertices = tuple(v for v in graph.vertices if v in requested)
    idx = np.array([graph.index[v] for v in vertices], dtype=int)

    inside = np.zeros(len(graph.vertices), dtype=bool)
    inside[idx] = True

    restricted = graph.weights[idx][:, idx]
    n_components, _ = csgraph.connected_components(restricted, directed=False)
    if n_components != 1:
        raise DisconnectedDomain(f"domain splits into {n_components} components")

    computed = set()
    for v, i in zip(vertices, idx):
        row = graph.weights.indices[graph.weights.indptr[i]:graph.weights.indptr[i + 1]]
        if np.any(~inside[row]):
            computed.add(v)

    explicit = boundary is not None
    if explicit:
        designated = set(boundary)
        outside = designated - requested
        if outside:
            raise VertexOutsideDomain(f"designated boundary vertices outside D: {sorted(outside)}")
        missing = computed - designated
        if missing:
            raise DomainMismatch(f"designated boundary misses computed boundary vertices {sorted(missing)}")
        boundary_set = designated
    else:
        boundary_set = computed

    if not boundary_set:
        raise EmptyBoundary("domain has no boundary vertex")
    interior = tuple(v for v in vertices if v not in boundary_set)
    if not interior:
        raise EmptyInterior("domain has no interior vertex")

    for v in interior:
        assert all(inside[graph.index[y]] for y in graph.neighbors(v)), v

    return DomainDecomp(
        graph=graph,
        vertices=vertices,
        boundary=tuple(v for v in vertices if v in boundary_set),
        interior=interior,
        explicit_boundary=explicit,
    )


def load_domain(document: Document) -> DomainDecomp:
    """Graph plus the decomposition described by its "domain" section (all vertices by default)."""
    doc = load_document(document)
    graph = load_graph(doc)
    if doc.domain is None:
        return decompose_domain(graph, graph.vertices)
    return decompose_domain(graph, doc.domain.vertices, doc.domain.boundary)


def integrate(dom: DomainDecomp, u: FunctionLike) -> float:
    """Discrete integral: sum over D of mu(x) u(x)."""
    return float(np.dot(dom.mu, dom.coerce(u)))
