import numpy as np
import pytest

from inexact_opt import oracles as orc
from inexact_opt import problems as pr


def quad(D=0.0):
    return pr.build({"name": "quadratic", "n": 3, "spectrum": [2.0, 1.0, 0.5], "center": [0.2, -0.1, 0.0], "D": D})


def test_exact_reply():
    p = quad()
    x = np.array([0.1, 0.2, -0.3])
    r = orc.fo_oracle_query(p, np.random.default_rng(0), x)
    assert r.F == p.f(x)
    np.testing.assert_array_equal(r.G, p.grad(x))


def test_large_batch_mean_matches_gradient():
    p = quad(D=1.0)
    x = np.array([0.1, 0.2, -0.3])
    oracle = orc.FirstOrderOracle(p, np.random.default_rng(1))
    F, G = oracle.replies(x, 200000)
    se = G.std(axis=0, ddof=1) / np.sqrt(len(G))
    assert np.all(np.abs(G.mean(axis=0) - p.grad(x)) <= 5 * se)
    assert abs(F.mean() - p.f(x)) <= 5 * F.std(ddof=1) / np.sqrt(len(F))
    assert oracle.calls == 200000


def test_counter_and_budget():
    c = orc.CallCounter(max_calls=5)
    oracle = orc.FirstOrderOracle(quad(), np.random.default_rng(0), counter=c, batch=2)
    oracle.query(np.zeros(3))
    oracle.query(np.zeros(3))
    assert c.total_calls == 4 and c.remaining() == 1
    with pytest.raises(orc.BudgetExceeded):
        oracle.query(np.zeros(3))


def test_domain_and_argument_errors():
    oracle = orc.FirstOrderOracle(quad(), np.random.default_rng(0))
    with pytest.raises(orc.OracleError):
        oracle.query(np.array([5.0, 0, 0]))
    with pytest.raises(orc.OracleError):
        orc.FirstOrderOracle(quad(), np.random.default_rng(0), delta=-1)
    with pytest.raises(orc.OracleError):
        orc.FirstOrderOracle(quad(), np.random.default_rng(0), bias_kind="weird")


def test_holder_oracle_claims():
    p = pr.holder_power(3, 1.0)
    o = orc.biased_fo_from_holder(p, 1e-3, np.random.default_rng(0))
    assert o.claim.L == p.constants.L_nu
    q = pr.nonsmooth_abs(2, [1.0, 0.0])
    o = orc.biased_fo_from_holder(q, 0.01, np.random.default_rng(0))
    assert o.claim.L == pytest.approx(q.constants.L_nu**2 / 0.02)
    with pytest.raises(orc.OracleError):
        orc.biased_fo_from_holder(q, 0.0, np.random.default_rng(0))


def test_exact_oracle_passes_validation():
    p = quad()
    o = orc.FirstOrderOracle(p, np.random.default_rng(0))
    rep = orc.validate_assumption1(o, orc.Claim(0.0, 2.0, 0.5, 0.0), pairs=1000)
    assert rep.passed and rep.violations == 0


def test_half_smoothness_claim_is_falsified():
    p = quad()
    o = orc.FirstOrderOracle(p, np.random.default_rng(0))
    rep = orc.validate_assumption1(o, orc.Claim(0.0, 1.0, 0.0, 0.0), pairs=1000)
    assert not rep.passed and rep.violations > 0
    # the constructed counterexample: a move along the top eigenvector
    x = np.zeros(3)
    y = np.array([0.5, 0.0, 0.0])
    term = p.f(y) - p.f(x) - p.grad(x) @ (y - x)
    assert term > 0.5 * 1.0 * 0.25


def test_additive_bias_is_a_delta_oracle():
    p = quad()
    o = orc.FirstOrderOracle(p, np.random.default_rng(0), delta=1e-2, bias_kind="additive")
    assert orc.validate_assumption1(o, orc.Claim(1e-2, 2.0, 0.0, 0.0), pairs=1000).passed
    assert not orc.validate_assumption1(o, orc.Claim(1e-5, 2.0, 0.5, 0.0), pairs=1000).passed


def test_variance_check():
    p = quad(D=0.5)
    o = orc.FirstOrderOracle(p, np.random.default_rng(0))
    ok = orc.validate_assumption1(o, orc.Claim(0.0, 2.0, 0.0, 0.5), sample_size=20, pairs=300)
    assert ok.variance_ok and ok.passed
    bad = orc.validate_assumption1(o, orc.Claim(0.0, 2.0, 0.0, 0.1), sample_size=20, pairs=300)
    assert not bad.variance_ok


def test_zero_order_realizations():
    p = quad()
    o = orc.ZeroOrderOracle(p, np.random.default_rng(0), k=2)
    real = orc.zo_open_realization(o)
    x = np.array([0.1, 0.0, 0.2])
    assert o.eval(real, x) == p.f(x)
    noisy = orc.ZeroOrderOracle(quad(D=0.3), np.random.default_rng(0), delta=0.1, k=3)
    r = noisy.open_realization()
    assert noisy.eval(r, x) == noisy.eval(r, x)
    noisy.eval(r, x)
    with pytest.raises(orc.RealizationExhausted):
        noisy.eval(r, x)
    assert noisy.counter.realizations == 1 and noisy.calls == 3
    with pytest.raises(orc.OracleError):
        noisy.open_realization(capacity=4)


def test_zero_order_noise_bound(rng):
    p = quad(D=0.3)
    o = orc.ZeroOrderOracle(p, rng, delta=0.05, k=2)
    for x in np.random.default_rng(3).uniform(-0.5, 0.5, (500, 3)):
        r = o.open_realization()
        err = o.eval(r, x) - o.exact_value(r, x)
        assert abs(err) <= 2 * 0.05
        assert abs(o.bias_field(x)) <= 0.05


def test_directional_oracle():
    p = quad()
    o = orc.DirectionalOracle(p, np.random.default_rng(0), k=3)
    x = np.array([0.1, 0.2, -0.3])
    real = o.open_realization()
    g = np.array([orc.dir_oracle_query(o, real, x, e) for e in np.eye(3)])
    np.testing.assert_allclose(g, p.grad(x), rtol=0, atol=1e-15)
    with pytest.raises(orc.OracleError):
        o.query(o.open_realization(), x, [2.0, 0, 0])


@pytest.mark.parametrize("nu", [0.0, 0.5])
@pytest.mark.parametrize("delta", [1e-2, 1e-3])
def test_holder_tagged_oracle_passes_validation(nu, delta):
    p = pr.nonsmooth_abs(3, [1.0, -0.5, 0.2]) if nu == 0 else pr.holder_power(3, nu)
    o = orc.biased_fo_from_holder(p, delta, np.random.default_rng(0))
    rep = orc.validate_assumption1(o, pairs=1000, rng=np.random.default_rng(1))
    assert rep.passed, rep.worst_pair
