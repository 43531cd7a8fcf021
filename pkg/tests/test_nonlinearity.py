import numpy as np
import pytest

from graphelliptic.models.nonlinearity import Branch, Nonlinearity, Term
from graphelliptic.models.schemas import NonlinearityEntry

VERTICES = ("a", "b")


def test_from_entry_builds_terms():
    entry = NonlinearityEntry.model_validate({
        "terms": [{"kind": "pow", "c": 1.0, "k": 0}, {"kind": "spow", "c": {"a": 2.0}, "q": 3.0}],
        "ar": {"beta": 3.0, "r0": 2.0},
    })
    f = Nonlinearity.from_entry(entry)
    assert f.ar_beta == 3.0 and f.ar_r0 == 2.0
    np.testing.assert_allclose(f.value(VERTICES, [2.0, 2.0]), [1.0 + 2.0 * 4.0, 1.0])


def test_potential_and_derivative_closed_forms(cubic):
    t = np.array([[-1.5, 0.0, 2.0]])
    np.testing.assert_allclose(cubic.value(("x",), t), 1.0 + t ** 3)
    np.testing.assert_allclose(cubic.potential(("x",), t), t + t ** 4 / 4.0)
    np.testing.assert_allclose(cubic.derivative(("x",), t), 3.0 * t ** 2)


def test_signed_power():
    f = Nonlinearity.signed_power(1.0, 3.0)
    t = np.array([[-2.0, 3.0]])
    np.testing.assert_allclose(f.value(("x",), t), [[-4.0, 9.0]])
    np.testing.assert_allclose(f.potential(("x",), t), [[8.0 / 3.0, 9.0]])


def test_potential_is_antiderivative():
    f = Nonlinearity.power(2.0, 2) + Nonlinearity.signed_power(-1.0, 3.5) + Nonlinearity.power(0.5, 0)
    t = np.linspace(-3.0, 3.0, 41)[None, :]
    h = 1e-6
    numeric = (f.potential(("x",), t + h) - f.potential(("x",), t - h)) / (2 * h)
    np.testing.assert_allclose(numeric, f.value(("x",), t), rtol=1e-6, atol=1e-6)


def test_truncation_zeroes_negative_side(cubic):
    f = cubic.truncated()
    np.testing.assert_allclose(f.value(("x",), [[-2.0, 2.0]]), [[0.0, 9.0]])
    np.testing.assert_allclose(f.potential(("x",), [[-2.0]]), [[0.0]])
    assert f.branches(("x",))[0].negative.is_zero()


def test_per_vertex_coefficients_default_to_zero():
    f = Nonlinearity.power({"a": 3.0}, 1)
    np.testing.assert_array_equal(f.coefficients(VERTICES), [[3.0, 0.0]])
    np.testing.assert_allclose(f.value(VERTICES, [1.0, 1.0]), [3.0, 0.0])


def test_scaled_and_zero():
    f = Nonlinearity.power({"a": 2.0}, 3).scaled(0.5)
    np.testing.assert_allclose(f.value(VERTICES, [2.0, 2.0]), [8.0, 0.0])
    assert Nonlinearity().is_zero()
    assert Nonlinearity.power(0.0, 2).is_zero()


def test_invalid_terms():
    with pytest.raises(ValueError):
        Term("pow", 1.5, 1.0)
    with pytest.raises(ValueError):
        Term("spow", 1.0, 1.0)


def test_branches_of_cubic(cubic):
    b = cubic.branches(("x",))[0]
    # F(r) = r + r^4/4 and F(-r) = -r + r^4/4
    assert b.positive.coefficients == {1.0: 1.0, 4.0: 0.25}
    assert b.negative.coefficients == {1.0: -1.0, 4.0: 0.25}


def test_branch_roots_polynomial():
    # r^3 - 2 r + 1 = (r - 1)(r^2 + r - 1)
    roots = Branch({3.0: 1.0, 1.0: -2.0, 0.0: 1.0}).roots(np.inf)
    np.testing.assert_allclose(roots, [(np.sqrt(5.0) - 1.0) / 2.0, 1.0], atol=1e-12)


def test_branch_roots_fractional_exponents():
    # r^2.5 - 4 r has its positive root at 4^(2/3)
    roots = Branch({2.5: 1.0, 1.0: -4.0}).roots(100.0)
    np.testing.assert_allclose(roots, [4.0 ** (2.0 / 3.0)], rtol=1e-8)


def test_max_abs_potential_ties_and_sides(cubic):
    # |F| on [-z, z]: F(-z) = -z + z^4/4, F(z) = z + z^4/4; the positive side wins
    value, s, x = cubic.max_abs_potential(("x", "y"), 2.0)
    assert value == pytest.approx(6.0)
    assert s == 2.0
    assert x == "x"


def test_max_abs_potential_finds_interior_extremum():
    # F(t) = t - t^3/3
    f = Nonlinearity.power(1.0, 0) + Nonlinearity.power(-1.0, 2)
    value, s, _ = f.max_abs_potential(("x",), 1.2)
    # |F(+-1)| = 2/3 beats |F(+-1.2)| = 0.624
    assert value == pytest.approx(2.0 / 3.0)
    assert abs(s) == pytest.approx(1.0)


def test_max_abs_value_of_zero_nonlinearity():
    assert Nonlinearity().max_abs_value(VERTICES, 1.0) == (0.0, 0.0, None)


def test_limit_ratio_at_zero():
    f = Nonlinearity.power(1.5, 1) + Nonlinearity.power(1.0, 3)
    np.testing.assert_allclose(f.limit_ratio_at_zero(("x",)), [1.5])
    assert Nonlinearity.power(1.0, 0).limit_ratio_at_zero(("x",))[0] == np.inf
    assert Nonlinearity.power(1.0, 2).limit_ratio_at_zero(("x",))[0] == 0.0


def test_potential_exponents(cubic):
    assert cubic.potential_exponents(("x",)) == (1.0, 4.0)
    assert Nonlinearity().potential_exponents(("x",)) == (None, None)


def test_nonlinearity_is_hashable(cubic):
    assert hash(cubic) == hash((Nonlinearity.power(1.0, 0) + Nonlinearity.power(1.0, 3)).with_ar(3.0, 2.0))
