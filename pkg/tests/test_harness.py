import json

import numpy as np
import pytest

from inexact_opt import harness as hx
from inexact_opt.rng import stream


def base_cfg(**over):
    cfg = {"problem": {"name": "log_quadratic", "n": 8, "mu": 1e-2},
           "solver": {"family": "igm", "p": 1.0, "eps": [1e-2, 1e-3]}, "seeds": [0, 1]}
    for k, v in over.items():
        cfg[k] = v
    return hx.normalize(cfg)


def test_schema_rejects_bad_fields():
    with pytest.raises(hx.ConfigError, match="field solver"):
        hx.validate_config({"problem": {"name": "quadratic", "n": 2, "spectrum": [1, 1]}, "solver": {}})
    with pytest.raises(hx.ConfigError, match="<root>"):
        hx.validate_config({"solver": {"family": "igm"}})
    with pytest.raises(hx.ConfigError, match="field solver.p"):
        hx.validate_config({"problem": {"name": "quadratic", "n": 2}, "solver": {"family": "igm", "p": 3}})


def test_parse_errors_carry_position():
    with pytest.raises(hx.ConfigError, match=r"cfg.json:2:\d+"):
        hx.parse_config_text('{"problem": 1,\n  oops}', "cfg.json")
    with pytest.raises(hx.ConfigError, match="top level"):
        hx.parse_config_text("[1, 2]")


def test_normalize_fills_defaults_and_is_idempotent():
    cfg = base_cfg()
    assert cfg["oracle"]["delta"] == 0.0 and cfg["constant_C"] == 10
    assert hx.normalize(cfg) == cfg
    hx.validate_config(cfg)
    u = hx.normalize({"problem": {"name": "holder_power", "n": 3, "nu": 0.5}, "solver": {"family": "igm_universal"}})
    assert u["solver"]["L"] == "adaptive"
    with pytest.raises(hx.ConfigError):
        hx.normalize({"problem": {"name": "holder_power", "n": 3, "nu": 0.5},
                      "solver": {"family": "igm", "L": "adaptive"}})


def test_hash_is_canonical():
    a = base_cfg()
    b = json.loads(json.dumps(a, sort_keys=False))
    assert hx.config_hash(a) == hx.config_hash(dict(reversed(list(b.items()))))
    c = base_cfg(seeds=[5])
    assert hx.config_hash(a) != hx.config_hash(c)


def test_seed_override():
    cfg = base_cfg()
    assert hx.apply_seed_override(cfg, {"OPT_SEED": "7"})["seeds"] == [7]
    assert hx.apply_seed_override(cfg, {})["seeds"] == [0, 1]
    with pytest.raises(hx.ConfigError):
        hx.apply_seed_override(cfg, {"OPT_SEED": "x"})


def test_streams_are_independent_and_reproducible():
    a = stream(3, "oracle", 0).random(5)
    np.testing.assert_array_equal(a, stream(3, "oracle", 0).random(5))
    assert not np.allclose(a, stream(3, "pilot", 0).random(5))
    assert not np.allclose(a, stream(4, "oracle", 0).random(5))


def test_run_writes_named_files_and_replays(tmp_path):
    cfg = base_cfg()
    man = hx.run(cfg, tmp_path / "a")
    h = hx.config_hash(cfg)[:12]
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == [f"manifest_{h}.json", f"run_{h}_seed0.csv", f"run_{h}_seed1.csv"]
    text = (tmp_path / "a" / f"manifest_{h}.json").read_text()
    again = hx.parse_config_text(text)
    assert hx.config_hash(again) == man["config_hash"]
    hx.run(again, tmp_path / "b")
    for f in man["files"]:
        assert (tmp_path / "a" / f["path"]).read_bytes() == (tmp_path / "b" / f["path"]).read_bytes()
    header = (tmp_path / "a" / f"run_{h}_seed0.csv").read_text().splitlines()[0]
    assert header == "k,calls,gap,walltime_ns"


@pytest.mark.parametrize("family,extra", [
    ("igm", {}),
    ("igm_restart", {"mu2": 1e-2}),
    ("igm_universal", {}),
    ("zo_two_point", {}),
    ("zo_k_point", {}),
    ("zo_directional", {}),
])
def test_every_family_executes(family, extra):
    cfg = base_cfg(solver={"family": family, "p": 1.0, "eps": [1e-2], **extra},
                   oracle={"k": 4})
    rec = hx.execute(cfg, 1e-2, 0)
    assert rec.status == "converged"
    assert rec.final_gap <= 1e-2


def test_bias_kind_holder_uses_reduced_constant():
    cfg = hx.normalize({"problem": {"name": "nonsmooth_abs", "n": 3},
                        "oracle": {"bias_kind": "holder", "delta": 1e-2},
                        "solver": {"family": "igm", "p": 0.0, "eps": [0.05]}})
    problem = hx.build_problem(cfg)
    assert hx._smooth_L(cfg, problem) == pytest.approx(problem.constants.L_nu**2 / 2e-2)
    assert hx.execute(cfg, 0.05, 0, problem=problem).status == "converged"


def test_config_errors_surface():
    with pytest.raises(hx.ConfigError):
        hx.build_problem(base_cfg(setup={"set": "box"}))
    with pytest.raises(hx.ConfigError):
        hx.execute(hx.normalize({"problem": {"name": "holder_power", "n": 3, "nu": 0.5},
                                 "solver": {"family": "igm"}}), 1e-2, 0)


def test_fit_slope_exact_power_law():
    x = np.array([10.0, 100.0, 1000.0, 1e4])
    fit = hx.fit_slope(x, 3 * x**0.5)
    assert fit.slope == pytest.approx(0.5)
    assert fit.ci_low <= fit.slope <= fit.ci_high
    assert fit.intercept == pytest.approx(np.log(3))


def test_sweep_slope_and_outputs(tmp_path):
    cfg = base_cfg(problem={"name": "log_quadratic", "n": 30, "mu": 1e-6}, seeds=[0])
    cfg["solver"]["p"] = 0.0
    rep = hx.sweep(cfg, eps_grid=list(10.0 ** -np.arange(1.0, 4.01, 0.25)), out_dir=tmp_path)
    assert rep.passed, rep.reason
    assert abs(rep.fit.slope - 1.0) <= 0.1
    h = hx.config_hash(cfg)[:12]
    lines = (tmp_path / f"sweep_{h}.csv").read_text().splitlines()
    assert lines[0] == "eps,seed,calls,iterations,gap"
    assert len(lines) == 1 + len(rep.grid)
    side = json.loads((tmp_path / f"sweep_{h}.json").read_text())
    assert side["passed"] and side["theory"] == 1.0


def test_sweep_needs_four_points_and_flags_divergence():
    cfg = base_cfg(seeds=[0])
    rep = hx.sweep(cfg, eps_grid=[1e-1, 1e-2])
    assert not rep.passed and "need 4" in rep.reason
    cfg2 = base_cfg(seeds=[0])
    cfg2["solver"]["max_calls"] = 5
    rep = hx.sweep(cfg2, eps_grid=[1e-2, 1e-3, 1e-4, 1e-5])
    assert not rep.passed and rep.divergent


def test_validate_exact_and_half_L():
    cfg = hx.normalize({"problem": {"name": "quadratic", "n": 3, "spectrum": [2, 1, 0.5]},
                        "solver": {"family": "igm"}})
    assert hx.validate(cfg, pairs=500)["passed"]
    cfg["oracle"]["claim"] = {"L": 1.0}
    rep = hx.validate(cfg, pairs=500)
    assert not rep["passed"] and rep["violations"] > 0


@pytest.mark.parametrize("family", ["zo_two_point", "zo_directional"])
def test_validate_zero_order_noise_bound(family):
    cfg = hx.normalize({"problem": {"name": "log_quadratic", "n": 5, "mu": 1e-2},
                        "oracle": {"delta": 1e-2, "D": 0.1}, "solver": {"family": family}})
    rep = hx.validate(cfg, queries=2000)
    assert rep["passed"] and rep["max_deviation"] <= rep["bound"]


def test_quantile_check_deterministic_equals_mean(tmp_path):
    cfg = base_cfg(seeds=list(range(50)))
    cfg["solver"]["eps"] = [0.05]
    rep = hx.quantile_check(cfg, 0.1, out_dir=tmp_path)
    assert rep["quantile"] == pytest.approx(rep["mean_gap"], rel=1e-12)
    assert rep["passed"]
    assert list(tmp_path.glob("quantile_*.json"))


def test_quantile_check_needs_many_seeds():
    with pytest.raises(hx.ConfigError, match="50 seeds"):
        hx.quantile_check(base_cfg(), 0.1)
