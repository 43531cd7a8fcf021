import numpy as np
import pytest

from graphelliptic.config import settings
from graphelliptic.errors import HypothesisViolated, NonConvergence, OnlyTrivialFound
from graphelliptic.models.graph import VertexFn
from graphelliptic.models.nonlinearity import Nonlinearity
from graphelliptic.services.solvers import (
    DeflationOperator,
    SemilinearProblem,
    find_all_solutions,
    lambda_sweep,
    minimize_in_ball,
    mountain_pass,
    ps_boundedness_diagnostic,
    scalar_root_oracle,
    sign_profile,
    solve_truncated,
    sup_norm_a_priori_bound,
    yamabe_solve,
)
from graphelliptic.services.variational import ProblemSpec, classical_residual

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
CUBIC_ROOTS_P3 = [-GOLDEN - 1.0, GOLDEN, 1.0]


def centers(report):
    return sorted(s.u["x2"] for s in report.solutions)


def test_cubic_on_p3_has_three_solutions(p3, cubic):
    report = find_all_solutions(ProblemSpec.build(p3, cubic), seed=0)
    np.testing.assert_allclose(centers(report), CUBIC_ROOTS_P3, atol=1e-8)
    for solution in report.solutions:
        assert solution.classical_residual_max <= 1e-10 * (1.0 + solution.u.sup_norm())
    assert report.trace.restarts == settings.default_budget
    assert report.hypotheses["f_at_zero_nonzero"] is True


def test_solutions_are_sorted_by_energy(p3, cubic):
    report = find_all_solutions(ProblemSpec.build(p3, cubic))
    energies = [s.energy for s in report.solutions]
    assert energies == sorted(energies)


def test_signed_square_on_p3(p3):
    # 2t = |t| t
    report = find_all_solutions(ProblemSpec.build(p3, Nonlinearity.signed_power(1.0, 3.0)))
    np.testing.assert_allclose(centers(report), [-2.0, 0.0, 2.0], atol=1e-8)
    profiles = {s.sign_profile for s in report.solutions}
    assert profiles == {"trivial", "positive", "signed"}


def test_verified_hypotheses_give_two_nontrivial_solutions(p5, cubic):
    report = find_all_solutions(ProblemSpec.build(p5, cubic, lam=0.1), seed=0)
    assert report.hypotheses["theorem_applicable"] is True
    nontrivial = report.nontrivial()
    assert len(nontrivial) >= 2
    for solution in nontrivial:
        assert solution.classical_residual_max <= 1e-10 * (1.0 + solution.u.sup_norm())


def test_scalar_oracle_matches_search(p3, cubic):
    spec = ProblemSpec.build(p3, cubic)
    oracle = scalar_root_oracle(spec)
    np.testing.assert_allclose(oracle, CUBIC_ROOTS_P3, atol=1e-10)
    np.testing.assert_allclose(centers(find_all_solutions(spec)), oracle, atol=1e-8)


def test_scalar_oracle_includes_zero_when_f_vanishes(p3):
    oracle = scalar_root_oracle(ProblemSpec.build(p3, Nonlinearity.signed_power(1.0, 3.0)))
    np.testing.assert_allclose(oracle, [-2.0, 0.0, 2.0], atol=1e-12)


def test_scalar_oracle_needs_one_interior_vertex(p5, cubic):
    with pytest.raises(ValueError):
        scalar_root_oracle(ProblemSpec.build(p5, cubic))


def test_solutions_on_p5_satisfy_equation(p5, cubic):
    spec = ProblemSpec.build(p5, cubic, lam=0.5)
    report = find_all_solutions(spec, budget=32, seed=3)
    assert report.solutions
    for solution in report.solutions:
        assert solution.u.is_dirichlet()
        residual = np.max(np.abs(classical_residual(spec, solution.u)))
        assert residual <= 1e-10 * (1.0 + solution.u.sup_norm())
    values = [s.u.values for s in report.solutions]
    for i, a in enumerate(values):
        for b in values[i + 1:]:
            assert np.max(np.abs(a - b)) > 1e-6


def test_search_is_independent_of_thread_count(monkeypatch, p5, cubic):
    spec = ProblemSpec.build(p5, cubic, lam=0.5)
    monkeypatch.setattr(settings, "threads", 1)
    single = find_all_solutions(spec, budget=24, seed=11).to_model().model_dump()
    monkeypatch.setattr(settings, "threads", 4)
    parallel = find_all_solutions(spec, budget=24, seed=11).to_model().model_dump()
    assert single == parallel


def test_unknown_mode(p3, cubic):
    with pytest.raises(ValueError):
        find_all_solutions(ProblemSpec.build(p3, cubic), mode="bisect")


def test_mountain_pass_mode_needs_rho(p3, cubic):
    with pytest.raises(ValueError):
        find_all_solutions(ProblemSpec.build(p3, cubic), mode="mountain-pass")


def test_minimize_in_ball(p3, cubic):
    solution = minimize_in_ball(ProblemSpec.build(p3, cubic), rho=1.0)
    assert solution.u["x2"] == pytest.approx(GOLDEN, abs=1e-8)
    assert solution.in_ball is True
    assert solution.alpha_norm_sq == pytest.approx(2.0 * GOLDEN ** 2)


def test_mountain_pass_reaches_saddle(p3, cubic):
    solution = mountain_pass(ProblemSpec.build(p3, cubic), rho=1.0)
    assert solution.u["x2"] == pytest.approx(1.0, abs=1e-8)
    assert solution.in_ball is False


def test_mountain_pass_mode_keeps_distinct_solutions(p3, cubic):
    report = find_all_solutions(ProblemSpec.build(p3, cubic), rho=1.0, mode="mountain-pass")
    np.testing.assert_allclose(centers(report), CUBIC_ROOTS_P3, atol=1e-8)
    assert report.trace.mode == "mountain-pass"
    assert sum(1 for s in report.solutions if s.in_ball) == 1


def test_truncated_cubic(p3):
    report = solve_truncated(ProblemSpec.build(p3, Nonlinearity.power(1.0, 3)))
    assert [s.u["x2"] for s in report.solutions] == pytest.approx([np.sqrt(2.0)], abs=1e-8)
    assert report.trace.mode == "truncate"
    assert report.hypotheses["f1l"] is True
    assert report.solutions[0].sign_profile == "positive"


def test_truncation_forces_unit_lambda(p3):
    report = solve_truncated(ProblemSpec.build(p3, Nonlinearity.power(1.0, 3), lam=0.3))
    assert report.lambda_used == 1.0


def test_truncation_with_zero_f_finds_only_trivial(p3):
    with pytest.raises(OnlyTrivialFound):
        solve_truncated(ProblemSpec.build(p3, Nonlinearity()))


def test_truncation_hypotheses(p3, cubic):
    with pytest.raises(HypothesisViolated):
        solve_truncated(ProblemSpec.build(p3, cubic))
    with pytest.raises(HypothesisViolated):
        solve_truncated(ProblemSpec.build(p3, Nonlinearity.power(1.0, 3), alpha={"x2": 0.5}))


@pytest.mark.parametrize("gamma, p, expected", [(0.0, 3.0, 2.0), (1.0, 4.0, 1.0)])
def test_yamabe_on_p3(p3, gamma, p, expected):
    report = yamabe_solve(p3, gamma, p)
    assert [s.u["x2"] for s in report.solutions] == pytest.approx([expected], abs=1e-8)
    assert report.trace.mode == "yamabe"


def test_yamabe_on_p5_matches_newton_oracle(p5):
    # 2a - b = a^2, 2b - 2a = b^2 on the symmetric interior (a, b, a)
    expected = [0.456310987, 0.704402257, 0.456310987]
    report = yamabe_solve(p5, 0.0, 3.0, budget=32)
    assert report.positive is True
    assert report.solutions
    for solution in report.solutions:
        assert solution.sign_profile == "positive"
        assert np.all(solution.u.interior_values > 0.0)
    assert any(np.allclose(s.u.interior_values, expected, atol=1e-8) for s in report.solutions)


def test_yamabe_hypotheses(p3):
    with pytest.raises(HypothesisViolated):
        yamabe_solve(p3, 2.0, 3.0)
    with pytest.raises(HypothesisViolated):
        yamabe_solve(p3, 0.0, 2.0)


def test_sup_norm_bound_contains_solutions(p3, cubic):
    spec = ProblemSpec.build(p3, cubic)
    bound = sup_norm_a_priori_bound(spec)
    assert np.isfinite(bound)
    assert bound >= GOLDEN + 1.0
    # largest root of r^3 - 4 r - 1 on the negative branch
    assert bound == pytest.approx(max(np.roots([1.0, 0.0, -4.0, -1.0]).real), rel=1e-8)


def test_sup_norm_bound_is_infinite_for_linear_growth(p3):
    assert np.isinf(sup_norm_a_priori_bound(ProblemSpec.build(p3, Nonlinearity.power(1.0, 1))))
    assert np.isinf(sup_norm_a_priori_bound(ProblemSpec.build(p3, Nonlinearity.power(1.0, 3).truncated())))


def test_ps_certificate_bounds_iterates(p3, cubic):
    spec = ProblemSpec.build(p3, cubic)
    trajectory = [VertexFn.from_interior(p3, [t]) for t in (0.0, 0.5, 1.0, -1.5)]
    certificate = ps_boundedness_diagnostic(spec, trajectory)
    assert certificate.usable
    assert certificate.coefficient == pytest.approx(1.0 / 6.0)
    assert certificate.radius >= certificate.max_iterate_norm
    assert certificate.max_iterate_norm == pytest.approx(1.5 * np.sqrt(2.0))


def test_ps_certificate_unusable_near_quadratic(p3, cubic):
    spec = ProblemSpec.build(p3, cubic.with_ar(2.0 + 1e-9, 2.0))
    certificate = ps_boundedness_diagnostic(spec, [VertexFn.zeros(p3)])
    assert not certificate.usable
    assert np.isinf(certificate.radius)


def test_ps_certificate_needs_ar(p3):
    with pytest.raises(HypothesisViolated):
        ps_boundedness_diagnostic(ProblemSpec.build(p3, Nonlinearity.power(1.0, 3)), [VertexFn.zeros(p3)])
    with pytest.raises(HypothesisViolated):
        ps_boundedness_diagnostic(
            ProblemSpec.build(p3, Nonlinearity.power(3.0, 1).with_ar(3.0, 1.0)), [VertexFn.zeros(p3)]
        )


def test_lambda_sweep_keeps_grid_order(p3, cubic):
    rows = lambda_sweep(ProblemSpec.build(p3, cubic), [1.0, 0.5], budget=32)
    assert [row.lam for row in rows] == [1.0, 0.5]
    assert [row.n_solutions for row in rows] == [3, 3]
    assert [row.admissible for row in rows] == [False, True]
    assert rows[0].lambda_star == pytest.approx((2.0 / 3.0) * 2.0 ** (1.0 / 3.0), rel=1e-8)


def test_deflation_operator():
    deflation = DeflationOperator(tau=0.0, shift=1.0, roots=[np.array([1.0])])
    c = np.array([3.0])
    assert deflation.log_factor(c) == pytest.approx(np.log(1.0 / 4.0 + 1.0))
    h = 1e-6
    numeric = (deflation.log_factor(c + h) - deflation.log_factor(c - h)) / (2 * h)
    assert deflation.log_gradient(c)[0] == pytest.approx(numeric, rel=1e-6)
    assert DeflationOperator().step_scale(c, np.array([1.0])) == 1.0
    copied = deflation.copy()
    copied.add(np.array([2.0]))
    assert len(deflation) == 1 and len(copied) == 2


def test_semilinear_problem_gradient_and_hessian(p5, cubic):
    problem = SemilinearProblem(ProblemSpec.build(p5, cubic, alpha=-0.5))
    rng = np.random.default_rng(29)
    h = 1e-6
    for _ in range(5):
        c = rng.standard_normal(3)
        e = np.eye(3)
        numeric = np.array([(problem.energy(c + h * e[i]) - problem.energy(c - h * e[i])) / (2 * h) for i in range(3)])
        np.testing.assert_allclose(problem.gradient(c), numeric, rtol=1e-6, atol=1e-6)
        columns = [(problem.gradient(c + h * e[i]) - problem.gradient(c - h * e[i])) / (2 * h) for i in range(3)]
        np.testing.assert_allclose(problem.hessian(c).toarray(), np.column_stack(columns), rtol=1e-6, atol=1e-6)


def test_sign_profile(p3):
    assert sign_profile(VertexFn.zeros(p3)) == "trivial"
    assert sign_profile(VertexFn.from_interior(p3, [1.0])) == "positive"
    assert sign_profile(VertexFn.from_interior(p3, [-1.0])) == "signed"


def test_report_model_serializes(p3, cubic):
    model = find_all_solutions(ProblemSpec.build(p3, cubic), budget=8).to_model()
    payload = model.model_dump(by_alias=True)
    assert payload["schema"] == 1
    assert payload["lambda_star_infinite"] is False
    assert payload["solutions"][0]["values"].keys() == {"x1", "x2", "x3"}


def test_search_matches_oracle_on_random_polynomials(p3):
    rng = np.random.default_rng(47)
    checked = 0
    while checked < 50:
        degree = int(rng.integers(0, 6))
        coefficients = rng.uniform(-1.0, 1.0, degree + 1)
        coefficients[-1] = np.sign(coefficients[-1]) * rng.uniform(0.2, 1.0)
        f = Nonlinearity()
        for k, c in enumerate(coefficients):
            f = f + Nonlinearity.power(float(c), k)
        spec = ProblemSpec.build(p3, f)
        oracle = scalar_root_oracle(spec)
        if not len(oracle):
            with pytest.raises(NonConvergence):
                find_all_solutions(spec, budget=8)
            continue
        # near-double roots are ill-conditioned for both methods
        if len(oracle) > 1 and np.min(np.diff(oracle)) < 1e-3:
            continue
        found = centers(find_all_solutions(spec, seed=checked))
        np.testing.assert_allclose(found, oracle, atol=1e-8)
        checked += 1
