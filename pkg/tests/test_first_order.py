import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inexact_opt import geometry as geo
from inexact_opt import oracles as orc
from inexact_opt import problems as pr
from inexact_opt.first_order import (IGMConfig, igm_restart, igm_run, igm_universal, min_weight_sum,
                                     restart_schedule, weight)
from inexact_opt.records import SolverError


def exact(problem, seed=0, **kw):
    return orc.FirstOrderOracle(problem, np.random.default_rng(seed), **kw)


def test_weights():
    assert weight(1, 0.0, 2.0) == 0.5
    assert weight(4, 1.0, 1.0) == 2.0
    assert weight(9, 0.5, 1.0) == pytest.approx(3 / np.sqrt(2))


@given(st.floats(0, 1), st.floats(0.1, 10), st.integers(1, 400))
def test_weight_sum_lower_bound(p, L, N):
    A = sum(weight(k, p, L) for k in range(1, N + 1))
    assert A >= min_weight_sum(N, p, L) * (1 - 1e-12)


def test_zero_iterations_returns_start():
    p = pr.log_spectrum_quadratic(5, mu=1e-2)
    rec = igm_run(exact(p), p.domain, IGMConfig(p=1, L=1, max_iters=0))
    np.testing.assert_array_equal(rec.x_final, p.domain.center)
    assert rec.final_gap == pytest.approx(p.gap(p.domain.center))
    assert rec.calls == 0


def test_fast_rate_envelope():
    p = pr.log_spectrum_quadratic(20, mu=1e-4)
    assert p.domain.R == pytest.approx(1.0)
    rec = igm_run(exact(p), p.domain, IGMConfig(p=1, L=1, max_iters=300))
    for k, _, gap, _ in rec.rows:
        if k >= 10:
            assert gap <= 10 * 1 * 1 / k**2


def _reference_p0(problem, L, N):
    """Constant-weight two-sequence recurrence written out with explicit projections."""
    d = problem.domain
    x = d.center.copy()
    z = d.center.copy()
    A = 0.0
    traj = []
    for _ in range(N):
        a = 1.0 / L
        y = (A * x + a * z) / (A + a)
        step = z - a * problem.grad(y)
        r = np.linalg.norm(step - d.center)
        z = step if r <= d.radius else d.center + (step - d.center) * d.radius / r
        x = (A * x + a * z) / (A + a)
        A += a
        traj.append(x.copy())
    return traj


def test_p0_matches_reference_recurrence():
    p = pr.quadratic(3, [1.0, 0.5, 0.1], [2.0, -1.0, 0.5], geo.ball2(3, 1.0))
    rec = igm_run(exact(p), p.domain, IGMConfig(p=0, L=1.0, max_iters=50))
    ref = _reference_p0(p, 1.0, 50)
    # the record keeps gaps; compare the final point and the gap trace
    np.testing.assert_allclose(rec.x_final, ref[-1], atol=1e-10)
    gaps = [r[2] for r in rec.rows[1:]]
    np.testing.assert_allclose(gaps, [p.gap(x) for x in ref], atol=1e-10)


@pytest.mark.parametrize("p_order", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("setup_kind", ["ball", "box", "simplex"])
def test_iterates_stay_feasible(p_order, setup_kind):
    if setup_kind == "ball":
        dom = geo.ball2(4, 0.7, [0.1, 0, 0, 0])
    elif setup_kind == "box":
        dom = geo.box([-0.5] * 4, [0.2, 1, 1, 1])
    else:
        dom = geo.simplex(4)
    prob = pr.quadratic(4, [3, 1, 0.5, 0.1], [2, -2, 1, 0.3], dom)
    L = 3.0  # largest eigenvalue; on the simplex ||A||_{1->inf} is the same
    rec = igm_run(exact(prob), dom, IGMConfig(p=p_order, L=L, max_iters=200, check_invariants=True))
    assert rec.status == "max_iters"
    assert geo.contains(dom, rec.x_final, tol=1e-10)
    assert rec.extras["A_final"] >= min_weight_sum(200, p_order, L)


def test_gap_median_non_increasing():
    # batch large enough that the variance floor sits below the gaps reached by N=80
    prob = pr.build({"name": "log_quadratic", "n": 10, "mu": 1e-3, "D": 0.05})
    Ns = (10, 20, 40, 80)
    med = []
    for N in Ns:
        gaps = [igm_run(exact(prob, seed=s), prob.domain, IGMConfig(p=0.5, L=1, max_iters=N, batch=50)).final_gap
                for s in range(10)]
        med.append(np.median(gaps))
    assert all(b <= a for a, b in zip(med, med[1:])), med


def test_target_stop_and_budget_status():
    p = pr.log_spectrum_quadratic(10, mu=1e-2)
    rec = igm_run(exact(p), p.domain, IGMConfig(p=1, L=1, target_eps=1e-3))
    assert rec.status == "converged" and rec.final_gap <= 1e-3
    assert rec.calls == rec.iterations
    c = orc.CallCounter(max_calls=7)
    rec = igm_run(exact(p, counter=c), p.domain, IGMConfig(p=1, L=1, target_eps=1e-12, batch=2))
    assert rec.status == "budget_exceeded" and rec.calls == 6


def test_replay_is_identical():
    p = pr.build({"name": "log_quadratic", "n": 6, "mu": 1e-2, "D": 0.1})
    a = igm_run(exact(p, seed=3), p.domain, IGMConfig(p=0.5, L=1, max_iters=60, batch=3), seed=3)
    b = igm_run(exact(p, seed=3), p.domain, IGMConfig(p=0.5, L=1, max_iters=60, batch=3), seed=3)
    assert a.to_csv() == b.to_csv()


def test_non_finite_iterate_is_reported():
    p = pr.quadratic(2, [1.0, 1.0])
    broken = dataclasses.replace(p, grad=lambda x: np.full(2, np.nan))
    with pytest.raises(SolverError, match="non-finite"):
        igm_run(exact(broken), p.domain, IGMConfig(p=1, L=1, max_iters=5))


def test_config_errors():
    with pytest.raises(SolverError):
        IGMConfig(p=2)
    with pytest.raises(SolverError):
        IGMConfig(L=-1)
    with pytest.raises(SolverError):
        IGMConfig(batch=0)
    with pytest.raises(SolverError):
        igm_run(exact(pr.holder_power(2, 1.0)), geo.ball2(2), IGMConfig(L="adaptive"))


# ---------------------------------------------------------------- restarts


def test_restart_schedule():
    assert restart_schedule(1, 1.0, 0.01, 1.0, 0.5) == (1, 100)
    assert restart_schedule(1, 1.0, 0.01, 1.0, 0.01 / 8) == (3, 100)
    with pytest.raises(SolverError):
        restart_schedule(1, 1.0, 0.0, 1.0, 1e-3)


def test_restart_iteration_envelope():
    mu = 0.1
    p = pr.quadratic(5, np.geomspace(1, mu, 5), np.full(5, 0.9 * np.sqrt(2) / np.sqrt(5)), geo.ball2(5, np.sqrt(2)))
    for eps in (1e-3, 1e-5):
        rec = igm_restart(exact(p), p.domain, IGMConfig(p=1, L=1, target_eps=eps), mu2=mu)
        assert rec.status == "converged"
        assert rec.iterations <= 10 * np.sqrt(1 / mu) * np.log(mu * 1 / eps)


def test_restart_single_stage_when_target_is_loose():
    p = pr.quadratic(3, [1, 0.5, 0.2], [0.3, 0.2, 0.1])
    rec = igm_restart(exact(p), p.domain, IGMConfig(p=1, L=1, target_eps=10.0), mu2=0.2, stop="schedule")
    assert rec.extras["stages"] == 1


def test_restart_stop_modes_and_batches():
    p = pr.build({"name": "quadratic", "n": 3, "spectrum": [1, 0.5, 0.2], "center": [0.3, 0.2, 0.1], "D": 0.5})
    rec = igm_restart(exact(p), p.domain, IGMConfig(p=1, L=1, target_eps=1e-2), mu2=0.2, D=0.5, stop="schedule")
    batches = [s["batch"] for s in rec.extras["stage_log"]]
    assert batches == sorted(batches) and batches[-1] > batches[0]
    assert rec.extras["stages_run"] == rec.extras["stages"]
    with pytest.raises(SolverError):
        igm_restart(exact(p), p.domain, IGMConfig(p=1, L=1, target_eps=1e-2), mu2=0.2, stop="never")
    with pytest.raises(SolverError):
        igm_restart(exact(p), geo.simplex(3), IGMConfig(p=1, L=1, target_eps=1e-2), mu2=0.2)


# ---------------------------------------------------------------- universal


def test_universal_estimate_bounded_on_smooth_problem():
    p = pr.log_spectrum_quadratic(10, L=4.0, mu=1e-2)
    rec = igm_universal(exact(p), p.domain, 1.0, 1e-6, L0=1e-3)
    assert rec.status == "converged"
    hist = rec.extras["L_history"]
    assert max(hist[5:]) <= 2 * 4.0


@pytest.mark.parametrize("prob", [pr.holder_power(5, 0.5), pr.nonsmooth_abs(3, [1.0, 0.5, -0.2])],
                         ids=["holder", "abs"])
def test_universal_converges_without_constants(prob):
    rec = igm_universal(exact(prob), prob.domain, 1.0, 1e-3)
    assert rec.status == "converged" and rec.final_gap <= 1e-3
    # two calls per trial
    assert rec.calls % 2 == 0


def test_universal_budget_cap():
    p = pr.holder_power(5, 0.5)
    rec = igm_universal(exact(p), p.domain, 1.0, 1e-12, max_calls=50)
    assert rec.status == "budget_exceeded" and rec.calls <= 50
