"""cli.main — 종료 코드, 산출물 형식, 결정성, 재개, 단계 타이머."""
import json
from pathlib import Path

import pytest

from cpush.cli import EXACT_ALPHA_C, _StageTimer, main
from cpush.core.metrics import FIELDS

PRESETS = Path(__file__).resolve().parents[1] / "presets" / "configs"
HEADER = ",".join(FIELDS)


def _cfg(tmp_path, name="run.json", **kw):
    d = {"version": 1, "problem": "case-a", "graph": {"kind": "case-a"},
         "horizon": 200, "output": "out.csv", "log_every": 50}
    d.update(kw)
    path = tmp_path / name
    path.write_text(json.dumps(d), encoding="utf-8")
    return path


def _summary(csv: Path) -> dict:
    return json.loads(csv.with_suffix(".summary.json").read_text("utf-8"))


# ---- 설정 오류 → 2


def test_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "없음.json")]) == 2


def test_bad_json_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "version": 1,\n "horizon":\n}\n', encoding="utf-8")
    assert main(["run", "--config", str(bad)]) == 2
    assert "4행" in capsys.readouterr().out


@pytest.mark.parametrize("extra", [{"horizn": 10}, {"version": 2},
                                   {"beta": 2.0}, {"x0": "random"},
                                   {"graph": {"kind": "torus"}}])
def test_invalid_config_values(tmp_path, extra):
    assert main(["run", "--config", str(_cfg(tmp_path, **extra))]) == 2


def test_case_a_agent_count_fixed(tmp_path):
    assert main(["case-a", "--agents", "9", "--horizon", "5",
                 "--output", str(tmp_path / "a.csv")]) == 2


def test_threads_env_validated(tmp_path, monkeypatch):
    monkeypatch.setenv("CPUSH_THREADS", "많이")
    assert main(["run", "--config", str(_cfg(tmp_path))]) == 2
    monkeypatch.setenv("CPUSH_THREADS", "-1")
    assert main(["run", "--config", str(_cfg(tmp_path))]) == 2


def test_missing_graph_file(tmp_path):
    cfg = _cfg(tmp_path, graph={"kind": "rotating", "files": ["g0.txt"]})
    assert main(["run", "--config", str(cfg)]) == 2


# ---- 산출물


def test_zero_horizon_writes_header_only(tmp_path):
    cfg = _cfg(tmp_path, horizon=0)
    assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out.csv"
    assert out.read_text(encoding="utf-8") == HEADER + "\n"
    s = _summary(out)
    assert s["final_t"] == 0 and s["envelope"] is None
    assert s["checks"]["steps"] == 0


def test_short_run_outputs(tmp_path):
    assert main(["run", "--config", str(_cfg(tmp_path))]) == 0
    out = tmp_path / "out.csv"
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == HEADER
    assert [int(r.split(",")[0]) for r in lines[1:]] == [50, 100, 150, 200]
    s = _summary(out)
    assert s["problem"] == "case-a" and s["agents"] == 8
    assert s["optimum"] == [1.0, 0.5, 3.0] and not s["optimum_derived"]
    assert len(s["final_x"]) == 8 and len(s["final_x"][0]) == 3
    chk = s["checks"]
    assert chk["max_tracking_residual"] <= 1e-9
    assert chk["tracker_bound_violations"] == 0 and chk["box_violations"] == 0
    assert chk["certificate_violations"] == 0
    timing = json.loads(out.with_suffix(".timing.json").read_text("utf-8"))
    assert {"setup", "run", "write"} <= set(timing["stages"])
    assert timing["config_hash"] == s["config_hash"]
    assert timing["stages"]["run"]["steps"] == 200


def test_outputs_are_byte_identical(tmp_path, monkeypatch):
    cfg = _cfg(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", str(cfg), "--output", str(a)]) == 0
    monkeypatch.setenv("CPUSH_THREADS", "3")
    assert main(["run", "--config", str(cfg), "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (a.with_suffix(".summary.json").read_bytes()
            == b.with_suffix(".summary.json").read_bytes())


def test_relative_output_follows_config_dir(tmp_path):
    sub = tmp_path / "cfg"
    sub.mkdir()
    cfg = _cfg(sub, output="../runs/x.csv", horizon=10)
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "runs" / "x.csv").exists()


def test_exact_flag_sets_step_constant(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["case-a", "--paper-exact", "--horizon", "50",
                 "--output", str(out)]) == 0
    last = out.read_text(encoding="utf-8").splitlines()[-1].split(",")
    assert int(last[0]) == 50
    assert float(last[1]) == pytest.approx(EXACT_ALPHA_C / 51 ** 0.6,
                                           rel=1e-11)


def test_case_a_prime_builtin(tmp_path):
    out = tmp_path / "ap.csv"
    assert main(["case-a-prime", "--horizon", "100", "--output", str(out)]) == 0
    s = _summary(out)
    assert s["problem"] == "case-a-prime"
    assert s["checks"]["polyak_active_steps"] == 0


def test_case_b_small_derives_optimum(tmp_path):
    cfg = _cfg(tmp_path, problem="case-b", agents=20,
               graph={"kind": "random", "seed": 0, "p": 0.05},
               horizon=100, oracle_horizon=2000)
    assert main(["run", "--config", str(cfg)]) == 0
    s = _summary(tmp_path / "out.csv")
    assert s["optimum_derived"] and len(s["optimum"]) == 3
    assert s["checks"]["min_certificate_slack"] is None
    assert s["graph"]["kind"] == "random" and s["graph"]["verified_horizon"] >= 200


def test_inline_family_problem(tmp_path):
    fam = {"labels": [1.0, -1.0], "features": [[1.0], [1.0]],
           "quad": [[0.5], [0.5]], "g_quad": [[0.0], [0.0]],
           "g_lin": [[1.0], [1.0]], "g_const": [-10.0, -10.0],
           "lower": [[1.0], [1.0]], "upper": [[5.0], [5.0]],
           "optimum": [1.0]}
    cfg = _cfg(tmp_path, problem=fam, graph={"kind": "complete"},
               horizon=2000, log_every=500)
    assert main(["run", "--config", str(cfg)]) == 0
    s = _summary(tmp_path / "out.csv")
    assert s["agents"] == 2 and s["final_criterion"] < 1e-9
    bad = dict(fam, quad=[[-0.5], [0.5]])
    assert main(["run", "--config", str(_cfg(tmp_path, problem=bad))]) == 2


# ---- 체크포인트 / 재개


def test_resume_matches_uninterrupted(tmp_path):
    cfg = _cfg(tmp_path, checkpoint="ck.npz")
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "ck.npz").exists()
    resumed, full = tmp_path / "r.csv", tmp_path / "f.csv"
    assert main(["run", "--config", str(cfg), "--horizon", "400",
                 "--resume", str(tmp_path / "ck.npz"),
                 "--output", str(resumed)]) == 0
    assert main(["run", "--config", str(_cfg(tmp_path, "full.json")),
                 "--horizon", "400", "--output", str(full)]) == 0
    assert _summary(resumed)["final_x"] == _summary(full)["final_x"]
    assert _summary(resumed)["final_t"] == 400


def test_resume_rejects_other_config(tmp_path):
    cfg = _cfg(tmp_path, checkpoint="ck.npz", horizon=20)
    assert main(["run", "--config", str(cfg)]) == 0
    assert main(["run", "--config", str(cfg), "--beta", "1.5",
                 "--resume", str(tmp_path / "ck.npz")]) == 2
    assert main(["run", "--config", str(cfg),
                 "--resume", str(tmp_path / "없음.npz")]) == 2


# ---- validate-graphs


def test_validate_case_a_preset(capsys):
    assert main(["validate-graphs", "--config",
                 str(PRESETS / "case_a.json"), "--k-max", "8"]) == 0
    out = capsys.readouterr().out
    assert "spread_A" in out and "결합 강연결" in out


def test_validate_complete_and_self_loops():
    assert main(["validate-graphs", "--config",
                 str(PRESETS / "case_a_complete.json")]) == 0
    assert main(["validate-graphs", "--config",
                 str(PRESETS / "self_loops_only.json")]) == 4


def test_unverified_schedule_runs_with_warning(tmp_path, capsys):
    cfg = _cfg(tmp_path, graph={"kind": "self-loops"}, horizon=10)
    assert main(["run", "--config", str(cfg)]) == 0
    assert "검증되지 않음" in capsys.readouterr().out


# ---- 단계 타이머


def _timing(out):
    return json.loads(out.with_suffix(".timing.json").read_text("utf-8"))


def test_stage_timer_records_and_merges(tmp_path):
    out = tmp_path / "r.csv"
    with _StageTimer(out, "h1").stage("oracle") as rec:
        rec["steps"] = 1000
    d = _timing(out)
    assert d["config_hash"] == "h1"
    st = d["stages"]["oracle"]
    assert st["ok"] and st["sec"] >= 0 and st["steps"] == 1000
    # 같은 설정으로 재실행: 실행된 단계만 갱신
    with _StageTimer(out, "h1").stage("run"):
        pass
    d = _timing(out)
    assert set(d["stages"]) == {"oracle", "run"}
    assert "steps" not in d["stages"]["run"]


def test_stage_timer_resets_for_other_config(tmp_path):
    out = tmp_path / "r.csv"
    with _StageTimer(out, "h1").stage("oracle"):
        pass
    with _StageTimer(out, "h2").stage("run"):
        pass
    d = _timing(out)
    assert d["config_hash"] == "h2" and list(d["stages"]) == ["run"]


def test_stage_timer_failure_recorded_and_raised(tmp_path):
    out = tmp_path / "r.csv"
    with pytest.raises(RuntimeError):
        with _StageTimer(out, "h1").stage("run") as rec:
            rec["steps"] = 5
            raise RuntimeError("boom")
    st = _timing(out)["stages"]["run"]
    assert st["ok"] is False and st["steps"] == 5


def test_stage_timer_ignores_corrupt_file(tmp_path):
    out = tmp_path / "r.csv"
    out.with_suffix(".timing.json").write_text("{깨짐", encoding="utf-8")
    with _StageTimer(out, "h1").stage("setup"):
        pass
    assert list(_timing(out)["stages"]) == ["setup"]


def test_resumed_run_times_only_new_steps(tmp_path):
    cfg = _cfg(tmp_path, checkpoint="a.npz")
    assert main(["run", "--config", str(cfg)]) == 0
    assert main(["run", "--config", str(cfg), "--horizon", "300",
                 "--resume", str(tmp_path / "a.npz")]) == 0
    run = _timing(tmp_path / "out.csv")["stages"]["run"]
    assert run["steps"] == 100
