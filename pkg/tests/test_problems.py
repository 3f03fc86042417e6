import numpy as np
import pytest
from scipy.optimize import minimize

from inexact_opt import geometry as geo
from inexact_opt import problems as pr


def test_quadratic_trivial_examples():
    p = pr.quadratic(2, [1, 1])
    assert p.constants.L == 1 and p.constants.mu2 == 1
    np.testing.assert_array_equal(p.x_star, [0, 0])
    assert p.f_star == 0
    q = pr.quadratic(2, [10, 0.1])
    assert q.constants.L == 10 and q.constants.mu2 == 0.1


def _reference_argmin(problem):
    """Constrained argmin by a general-purpose NLP solver (independent of the closed form)."""
    d = problem.domain
    cons = [{"type": "ineq", "fun": lambda x: d.radius**2 - np.sum((x - d.center) ** 2)}]
    res = minimize(problem.f, d.center, jac=problem.grad, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 500})
    return res.x


def test_quadratic_outside_center_projects_to_ray():
    p = pr.quadratic(2, [1, 1], [2, 0], geo.ball2(2, 1.0))
    ref = _reference_argmin(p)
    np.testing.assert_allclose(ref, [1, 0], atol=1e-6)
    np.testing.assert_allclose(p.x_star, [1, 0], atol=1e-12)
    assert p.f_star == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_quadratic_constrained_argmin_matches_solver(seed):
    rng = np.random.default_rng(seed)
    spec = rng.uniform(0.1, 3.0, 4)
    c = rng.normal(0, 2.0, 4)
    p = pr.quadratic(4, spec, c, geo.ball2(4, 1.0, [0.1, 0, 0, -0.2]))
    ref = _reference_argmin(p)
    assert p.f_star <= p.f(ref) + 1e-9
    np.testing.assert_allclose(p.x_star, ref, atol=1e-5)


def test_quadratic_box_and_simplex_argmin():
    p = pr.quadratic(3, [1, 2, 3], [2, -1, 0.5], geo.box([0, 0, 0], [1, 1, 1]))
    np.testing.assert_allclose(p.x_star, [1, 0, 0.5])
    s = pr.quadratic(3, [1, 1, 1], [1, 1, -5], geo.simplex(3))
    np.testing.assert_allclose(s.x_star, [0.5, 0.5, 0.0], atol=1e-12)


def test_holder_power_examples():
    p = pr.holder_power(2, 1.0)
    x = np.array([0.3, -0.4])
    assert p.f(x) == pytest.approx(0.5 * 0.25)
    assert p.constants.L == 1.0
    assert pr.holder_power(2, 0.5).f(np.array([1.0, 0.0])) == pytest.approx(2 / 3)


def test_nonsmooth_abs_examples():
    p = pr.nonsmooth_abs(2, [1.0, 0.0])
    assert p.f(np.array([0.5, 3.0])) == 0.5
    np.testing.assert_array_equal(p.grad(np.array([0.5, 3.0])), [1.0, 0.0])
    np.testing.assert_array_equal(p.grad(np.array([-0.5, 3.0])), [-1.0, 0.0])


def test_uniformly_convex_examples():
    p = pr.uniformly_convex_power(2, 2.0)
    assert p.f(np.array([0.6, 0.8])) == pytest.approx(0.5)
    assert p.constants.kappa_rho == 1.0
    assert pr.uniformly_convex_power(2, 4.0).f(np.array([1.0, 0.0])) == pytest.approx(0.25)


def test_stochastic_wrapper():
    base = pr.quadratic(3, [1, 2, 3])
    assert pr.stochastic_wrapper(base, 0.0).stochastic is False
    s = pr.stochastic_wrapper(base, 0.5)
    xi = s.sample_xi(np.random.default_rng(0), 200000)
    assert np.mean(np.sum(xi**2, axis=1)) == pytest.approx(0.5, rel=0.01)
    np.testing.assert_allclose(xi.mean(axis=0), 0, atol=5e-3)
    assert np.max(np.linalg.norm(xi, axis=1)) <= s.noise_bound + 1e-12
    with pytest.raises(pr.ProblemError):
        pr.stochastic_wrapper(base, -1.0)


CORPUS = [
    pr.quadratic(4, [1, 2, 0.5, 3], [0.1, 0.2, -0.1, 0.0]),
    pr.log_spectrum_quadratic(8, mu=1e-3),
    pr.holder_power(4, 0.5),
    pr.holder_power(4, 1.0),
    pr.nonsmooth_abs(3, [1.0, -2.0, 0.5]),
    pr.separable_holder(6, 0.5),
    pr.separable_holder(6, 0.0),
    pr.uniformly_convex_power(3, 4.0),
]


@pytest.mark.parametrize("problem", CORPUS, ids=lambda p: f"{p.name}_{p.params}")
def test_declared_constants_hold(problem):
    res = pr.certify(problem, np.random.default_rng(1), samples=800)
    assert all(res.values()), res
    assert geo.contains(problem.domain, problem.x_star)


@pytest.mark.parametrize("problem", CORPUS, ids=lambda p: p.name)
def test_minimizer_is_optimal(problem):
    X = geo.sample_points(problem.domain, 500, np.random.default_rng(2))
    assert min(problem.f(x) for x in X) >= problem.f_star - 1e-12
    assert problem.gap(problem.x_star) == pytest.approx(0.0, abs=1e-12)


def test_holder_constant_is_tight():
    p = pr.holder_power(3, 0.5)
    est = pr.sampled_holder_constant(p, 0.5, np.random.default_rng(0), samples=4000)
    assert est <= p.constants.L_nu * (1 + 1e-9)
    assert est >= 0.9 * p.constants.L_nu


def test_certify_kappa_below_closed_form():
    k = pr.certify_kappa(4.0, 3, np.random.default_rng(0), samples=5000)
    assert 0 < k < 10


def test_build_and_errors():
    p = pr.build({"name": "quadratic", "n": 2, "spectrum": [1, 2], "D": 0.3})
    assert p.stochastic and p.D == 0.3
    assert pr.build({"name": "separable_holder", "n": 4, "nu": 0.5}).name == "separable_holder"
    with pytest.raises(pr.ProblemError):
        pr.build({"name": "nope", "n": 2})
    with pytest.raises(pr.ProblemError):
        pr.quadratic(2, [1, -1])
    with pytest.raises(pr.ProblemError):
        pr.holder_power(2, 0.0)
    with pytest.raises(pr.ProblemError):
        pr.nonsmooth_abs(2, [0, 0])
    with pytest.raises(pr.ProblemError):
        pr.uniformly_convex_power(2, 1.5)


def test_offset_ball_keeps_start_away_from_minimizer():
    p = pr.holder_power(5, 0.5)
    assert np.linalg.norm(p.domain.center - p.x_star) == pytest.approx(0.5)
    assert p.x_star_interior()
