import numpy as np
import pytest

from graphelliptic.errors import TrivialConstraintClass, ZeroFunction
from graphelliptic.models.graph import VertexFn
from graphelliptic.services.calculus import assemble_stiffness
from graphelliptic.services.spectral import lambda1, lambda_mp, rayleigh_quotient


@pytest.mark.parametrize(
    "name, expected",
    [
        ("p3", 2.0),
        ("s4", 3.0),
        ("p5", 2.0 - np.sqrt(2.0)),
        ("p5_in_p7", 2.0 - np.sqrt(2.0)),
        ("p7", 2.0 - np.sqrt(3.0)),
    ],
)
def test_lambda1_closed_forms(request, name, expected):
    result = lambda1(request.getfixturevalue(name))
    assert result.lambda1 == pytest.approx(expected, abs=1e-10)
    assert result.residual <= 1e-10


def test_eigenfunction_is_normalized_and_signed(p5):
    result = lambda1(p5)
    u = result.eigenfunction
    assert u.is_dirichlet()
    assert np.dot(p5.mu, u.values ** 2) == pytest.approx(1.0)
    assert np.all(u.interior_values > 0.0)


def test_eigenfunction_attains_rayleigh_minimum(random_domains):
    rng = np.random.default_rng(2)
    for dom in random_domains:
        result = lambda1(dom)
        assert rayleigh_quotient(dom, result.eigenfunction) == pytest.approx(result.lambda1, rel=1e-10)
        for _ in range(1000):
            u = VertexFn.from_interior(dom, rng.standard_normal(len(dom.interior)))
            assert rayleigh_quotient(dom, u) >= result.lambda1 - 1e-12


def test_lambda1_matches_dense_oracle(random_domains):
    from scipy.linalg import eigh

    for dom in random_domains:
        stiffness = assemble_stiffness(dom)
        oracle = eigh(stiffness.interior.toarray(), np.diag(stiffness.mass), eigvals_only=True)[0]
        assert lambda1(dom).lambda1 == pytest.approx(oracle, abs=1e-10)


def test_lambda1_is_cached(p3):
    assert lambda1(p3) is lambda1(p3)


def test_rayleigh_quotient_of_zero(p3):
    with pytest.raises(ZeroFunction):
        rayleigh_quotient(p3, np.zeros(3))


def test_lambda_mp_reduces_to_lambda1(fixture_domain):
    result = lambda_mp(fixture_domain, 1, 2.0)
    assert result.value == pytest.approx(lambda1(fixture_domain).lambda1, abs=1e-9)
    assert not result.heuristic
    assert result.converged


def test_lambda_mp_order_two_on_p3_is_trivial(p3):
    with pytest.raises(TrivialConstraintClass):
        lambda_mp(p3, 2, 2.0)


def test_lambda_mp_order_two_on_p7(p7):
    # the class keeps u = 0 on the boundary and flat next to it, leaving x3, x4, x5 free
    result = lambda_mp(p7, 2, 2.0)
    u = result.certificate.values
    assert u[0] == pytest.approx(0.0, abs=1e-12)
    assert u[1] == pytest.approx(0.0, abs=1e-12)
    assert result.value > 0.0


def test_lambda_mp_heuristic_for_p_not_two(p5):
    result = lambda_mp(p5, 1, 3.0, restarts=4, seed=0)
    assert result.heuristic
    assert result.value > 0.0
    # p-homogeneous quotient of the certificate reproduces the value
    u = result.certificate.values
    assert np.dot(p5.mu, np.abs(u) ** 3) == pytest.approx(1.0)


@pytest.mark.parametrize("p, expected", [(1.5, 0.7528172384723799), (3.0, 0.3353957737600322)])
def test_lambda_mp_converges_on_p5(p5, p, expected):
    result = lambda_mp(p5, 1, p, restarts=8, seed=0)
    assert result.converged
    assert result.value == pytest.approx(expected, rel=1e-7)


def test_lambda_mp_rejects_small_p(p3):
    with pytest.raises(ValueError):
        lambda_mp(p3, 1, 1.0)
