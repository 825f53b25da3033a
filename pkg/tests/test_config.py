"""core/config.py — JSON 설정 검증, 기본 실험, 해시, 조립."""
from pathlib import Path

import numpy as np
import pytest

from cpush.core.config import (RunConfig, build_problem, build_schedule,
                               builtin_config, config_hash, load_run_config,
                               run_config_from_dict, solver_config)
from cpush.core.errors import ConfigError, ConnectivityError
from cpush.core.graph import RandomSchedule, RotatingSchedule

PRESETS = Path(__file__).resolve().parents[1] / "presets" / "configs"


def test_defaults():
    rc = run_config_from_dict({})
    assert rc.problem == "case-a" and rc.graph == {"kind": "case-a"}
    assert (rc.alpha_c, rc.alpha_sigma, rc.beta) == (0.05, 0.6, 1.0)
    assert rc.horizon == 50_000 and rc.log_every == 100


def test_integers_accepted_for_floats_and_vice_versa():
    rc = run_config_from_dict({"beta": 1, "horizon": 10.0,
                               "alpha": {"c": 1, "sigma": 1}})
    assert rc.beta == 1.0 and isinstance(rc.beta, float)
    assert rc.horizon == 10 and isinstance(rc.horizon, int)


@pytest.mark.parametrize("d, field", [
    ({"beta": 0.0}, "beta"),
    ({"alpha": {"sigma": 0.5}}, "alpha.sigma"),
    ({"alpha": {"c": -1.0}}, "alpha.c"),
    ({"horizon": -1}, "horizon"),
    ({"horizon": "많이"}, "horizon"),
    ({"log_every": 0}, "log_every"),
    ({"problem": "case-c"}, "problem"),
    ({"problem": "case-a", "agents": 4}, "agents"),
    ({"x0": {"mode": "explicit"}}, "x0"),
    ({"version": 9}, "version"),
    ({"graph": "ring"}, "graph"),
])
def test_invalid_fields_named(d, field):
    with pytest.raises(ConfigError) as ei:
        run_config_from_dict(d)
    assert ei.value.field == field
    assert f"'{field}'" in str(ei.value)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="horizn"):
        run_config_from_dict({"horizn": 5})


def test_json_error_line(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n "beta": 1.0,,\n}', encoding="utf-8")
    with pytest.raises(ConfigError) as ei:
        load_run_config(path)
    assert ei.value.line == 2


def test_relative_paths_resolve_against_config_dir():
    rc = load_run_config(PRESETS / "case_a.json")
    assert rc.output_path == PRESETS / "../../runs/case_a.csv"
    s = build_schedule(rc, 8)
    assert isinstance(s, RotatingSchedule) and s.window == 4


def test_explicit_x0():
    pts = [[1.0, 0.5, 3.0]] * 8
    rc = run_config_from_dict({"x0": {"mode": "explicit", "points": pts}})
    cfg = solver_config(rc)
    assert np.array_equal(cfg.x0, np.array(pts))


def test_builtin_configs():
    rc = builtin_config("case-b")
    assert rc.agents == 100 and rc.graph["kind"] == "random"
    assert build_problem(rc).n_agents == 100
    rc = builtin_config("case-a-prime", horizon=7, seed=None)
    assert rc.horizon == 7 and rc.seed == 0
    assert build_problem(rc).name == "case-a-prime"
    with pytest.raises(ConfigError):
        builtin_config("case-z")
    with pytest.raises(ConfigError):
        builtin_config("case-a", beta=2.5)


def test_config_hash_ignores_horizon_and_output():
    a = builtin_config("case-a")
    assert config_hash(a) == config_hash(a.with_overrides(
        horizon=10, output=Path("elsewhere.csv"), log_every=7))
    assert config_hash(a) != config_hash(a.with_overrides(beta=1.5))
    assert config_hash(a) != config_hash(a.with_overrides(seed=1))


def test_random_schedule_with_explicit_window():
    rc = RunConfig(problem="case-b", agents=10,
                   graph={"kind": "random", "seed": 0, "p": 0.5, "window": 3})
    s = build_schedule(rc, 10)
    assert isinstance(s, RandomSchedule) and s.window == 3
    assert s.verified_horizon == 100
    rc = RunConfig(problem="case-b", agents=10,
                   graph={"kind": "random", "seed": 0, "p": 0.0, "window": 2})
    with pytest.raises(ConnectivityError):
        build_schedule(rc, 10)


def test_graph_node_count_mismatch(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("n 3\n0 1\n1 2\n2 0\n", encoding="utf-8")
    rc = RunConfig(graph={"kind": "static", "file": str(g)})
    with pytest.raises(ConfigError, match="노드 수"):
        build_schedule(rc, 8)


def test_case_b_too_few_agents():
    with pytest.raises(ConfigError):
        build_problem(RunConfig(problem="case-b", agents=1))
