import json

import numpy as np
import pytest

from graphelliptic.models.graph import load_domain
from graphelliptic.models.nonlinearity import Nonlinearity


def path_document(n, boundary=True, mu=None, weights=None):
    """Path x1 - ... - xn; the endpoints are designated boundary when boundary is True."""
    vertices = [f"x{i}" for i in range(1, n + 1)]
    mu = mu or [1.0] * n
    weights = weights or [1.0] * (n - 1)
    doc = {
        "vertices": [{"id": v, "mu": m} for v, m in zip(vertices, mu)],
        "edges": [{"a": a, "b": b, "w": w} for a, b, w in zip(vertices, vertices[1:], weights)],
    }
    if boundary:
        doc["domain"] = {"vertices": vertices, "boundary": [vertices[0], vertices[-1]]}
    return doc


def random_document(rng, n):
    """Connected graph on n vertices: a random spanning path plus extra edges, boundary {v0, v_{n-1}}."""
    vertices = [f"v{i}" for i in range(n)]
    order = rng.permutation(n)
    pairs = {tuple(sorted((int(a), int(b)))) for a, b in zip(order, order[1:])}
    for _ in range(n):
        a, b = rng.choice(n, size=2, replace=False)
        pairs.add(tuple(sorted((int(a), int(b)))))
    return {
        "vertices": [{"id": v, "mu": float(rng.uniform(0.5, 2.0))} for v in vertices],
        "edges": [{"a": vertices[a], "b": vertices[b], "w": float(rng.uniform(0.5, 2.0))} for a, b in sorted(pairs)],
        "domain": {"vertices": vertices, "boundary": [vertices[0], vertices[-1]]},
    }


@pytest.fixture
def p3_doc():
    return path_document(3)


@pytest.fixture
def p3(p3_doc):
    return load_domain(p3_doc)


@pytest.fixture
def p5():
    return load_domain(path_document(5))


@pytest.fixture
def p5_in_p7():
    """x2..x6 inside the path x1..x7; the boundary {x2, x6} is computed, not designated."""
    doc = path_document(7, boundary=False)
    doc["domain"] = {"vertices": [f"x{i}" for i in range(2, 7)]}
    return load_domain(doc)


@pytest.fixture
def p7():
    return load_domain(path_document(7))


@pytest.fixture
def s4():
    leaves = ["l1", "l2", "l3"]
    return load_domain({
        "vertices": [{"id": "c", "mu": 1.0}] + [{"id": v, "mu": 1.0} for v in leaves],
        "edges": [{"a": "c", "b": v, "w": 1.0} for v in leaves],
        "domain": {"vertices": ["c"] + leaves, "boundary": leaves},
    })


@pytest.fixture
def random_domains():
    rng = np.random.default_rng(20240611)
    return [load_domain(random_document(rng, int(n))) for n in rng.integers(4, 13, size=8)]


@pytest.fixture(params=["p3", "p5", "p5_in_p7", "s4", "p7"])
def fixture_domain(request):
    return request.getfixturevalue(request.param)


@pytest.fixture
def cubic():
    """f(t) = 1 + t^3 with AR parameters beta = 3, r0 = 2."""
    return (Nonlinearity.power(1.0, 0) + Nonlinearity.power(1.0, 3)).with_ar(3.0, 2.0)


@pytest.fixture
def write_json(tmp_path):
    def write(name, payload):
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return str(path)

    return write
