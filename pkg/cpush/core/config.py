"""실행 설정 (JSON) 읽기/검증과 설정 → 문제·스케줄·솔버 객체 조립.

형식 (version 1):
{
  "version": 1,
  "problem": "case-a",            # | "case-a-prime" | "case-b" | {인라인 족}
  "agents": 8,                    # case-b 와 인라인 족에서만 의미
  "graph": {"kind": "case-a"},    # | rotating{files,window} | random{seed,p,window}
                                  #   | static{file} | complete | ring
                                  #   | unbalanced-ring | self-loops
  "alpha": {"c": 0.05, "sigma": 0.6},
  "beta": 1.0,
  "horizon": 50000,
  "x0": "box-center",             # | "uniform" | {"mode": "explicit", "points": [[..], ..]}
  "seed": 0,
  "output": "case_a.csv",
  "log_every": 100,
  "envelope_t_min": 1000,
  "checkpoint": null, "checkpoint_every": 0,
  "oracle_horizon": 100000        # x* 가 없는 문제의 중앙 반복 길이
}
상대 경로(output, checkpoint, graph 파일)는 설정 파일 위치 기준.
인라인 족: {"labels": [N], "features": [N][n], "quad", "g_quad", "g_lin": [N][n],
"g_const": [N], "lower", "upper": [N][n], "optimum": [n] (선택)}.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConnectivityError
from .graph import (GraphSchedule, RandomSchedule, RotatingSchedule,
                    StaticSchedule, case_a_schedule, complete_graph,
                    load_graph, make_random_schedule, ring_graph,
                    self_loops_only, unbalanced_ring,
                    verify_jointly_connected)
from .problem import (ConstrainedProblem, LogisticQuadraticFamily,
                      case_a_problem, case_b_problem, problem_from_family)
from .solver import SolverConfig, StepSchedule

VERSION = 1

_BUILTIN_PROBLEMS = ("case-a", "case-a-prime", "case-b")
_STATIC_BUILDERS = {
    "complete": complete_graph,
    "ring": ring_graph,
    "unbalanced-ring": unbalanced_ring,
    "self-loops": self_loops_only,
}
_KEYS = {"version", "problem", "agents", "graph", "alpha", "beta", "horizon",
         "x0", "seed", "output", "log_every", "envelope_t_min", "checkpoint",
         "checkpoint_every", "oracle_horizon"}
_FAMILY_KEYS = ("labels", "features", "quad", "g_quad", "g_lin", "g_const",
                "lower", "upper")


@dataclass(frozen=True)
class RunConfig:
    problem: object = "case-a"
    agents: int | None = None
    graph: dict = field(default_factory=lambda: {"kind": "case-a"})
    alpha_c: float = 0.05
    alpha_sigma: float = 0.6
    beta: float = 1.0
    horizon: int = 50_000
    x0: object = "box-center"
    seed: int = 0
    output: Path = Path("run.csv")
    log_every: int = 100
    envelope_t_min: int = 1000
    checkpoint: Path | None = None
    checkpoint_every: int = 0
    oracle_horizon: int = 100_000
    base_dir: Path = Path(".")

    def __post_init__(self):
        _check(self.beta, 0 < self.beta < 2, "beta", "(0, 2) 밖")
        _check(self.alpha_c, self.alpha_c > 0, "alpha.c", "양수여야 함")
        _check(self.alpha_sigma, 0.5 < self.alpha_sigma <= 1.0,
               "alpha.sigma", "(0.5, 1] 밖")
        _check(self.horizon, self.horizon >= 0, "horizon", "음수")
        _check(self.log_every, self.log_every >= 1, "log_every", "1 미만")
        _check(self.envelope_t_min, self.envelope_t_min >= 10,
               "envelope_t_min", "10 미만")
        _check(self.checkpoint_every, self.checkpoint_every >= 0,
               "checkpoint_every", "음수")
        _check(self.oracle_horizon, self.oracle_horizon >= 1,
               "oracle_horizon", "1 미만")
        if self.agents is not None:
            _check(self.agents, self.agents >= 1, "agents", "1 미만")
        if isinstance(self.problem, str):
            if self.problem not in _BUILTIN_PROBLEMS:
                raise ConfigError(
                    f"알 수 없는 문제 '{self.problem}' "
                    f"(사용 가능: {', '.join(_BUILTIN_PROBLEMS)})",
                    field="problem")
            if self.problem.startswith("case-a") and self.agents not in (None, 8):
                raise ConfigError(f"case-a 는 에이전트 8개 고정: {self.agents}",
                                  field="agents")
        elif not isinstance(self.problem, dict):
            raise ConfigError("문자열 또는 객체여야 함", field="problem")
        if not isinstance(self.graph, dict) or "kind" not in self.graph:
            raise ConfigError("{\"kind\": ...} 객체여야 함", field="graph")

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_path(self) -> Path:
        return self.resolve(self.output)

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return replace(self, **kw)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from None


def _check(value, ok: bool, name: str, why: str):
    if not ok:
        raise ConfigError(f"{why}: {value}", field=name)


def _typed(d: dict, key: str, kind, default):
    if key not in d or d[key] is None:
        return default
    v = d[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if kind is int and isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, kind) or isinstance(v, bool):
        raise ConfigError(f"{kind.__name__} 이어야 함: {v!r}", field=key)
    return v


def run_config_from_dict(d: dict, base_dir: Path = Path(".")) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("최상위는 객체여야 함")
    unknown = sorted(set(d) - _KEYS)
    if unknown:
        raise ConfigError(f"알 수 없는 키: {', '.join(unknown)}")
    version = d.get("version", 1)
    if not isinstance(version, int) or version > VERSION:
        raise ConfigError(f"지원하지 않는 설정 버전: {version}",
                          field="version")
    alpha = d.get("alpha", {})
    if not isinstance(alpha, dict):
        raise ConfigError("{\"c\", \"sigma\"} 객체여야 함", field="alpha")
    x0 = d.get("x0", "box-center")
    if isinstance(x0, dict):
        if x0.get("mode") != "explicit" or "points" not in x0:
            raise ConfigError("{\"mode\": \"explicit\", \"points\": ...}",
                              field="x0")
        x0 = x0["points"]
    elif x0 not in ("box-center", "uniform"):
        raise ConfigError(f"알 수 없는 초기화 모드: {x0!r}", field="x0")
    ckpt = d.get("checkpoint")
    return RunConfig(
        problem=d.get("problem", "case-a"),
        agents=_typed(d, "agents", int, None),
        graph=d.get("graph", {"kind": "case-a"}),
        alpha_c=_typed(alpha, "c", float, 0.05),
        alpha_sigma=_typed(alpha, "sigma", float, 0.6),
        beta=_typed(d, "beta", float, 1.0),
        horizon=_typed(d, "horizon", int, 50_000),
        x0=x0,
        seed=_typed(d, "seed", int, 0),
        output=Path(_typed(d, "output", str, "run.csv")),
        log_every=_typed(d, "log_every", int, 100),
        envelope_t_min=_typed(d, "envelope_t_min", int, 1000),
        checkpoint=Path(ckpt) if ckpt else None,
        checkpoint_every=_typed(d, "checkpoint_every", int, 0),
        oracle_horizon=_typed(d, "oracle_horizon", int, 100_000),
        base_dir=Path(base_dir),
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"설정 파일 없음: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON 파싱 실패: {e.msg} (열 {e.colno})",
                          line=e.lineno) from None
    return run_config_from_dict(d, base_dir=path.parent)


def builtin_config(name: str, **overrides) -> RunConfig:
    """case-a / case-b 기본 실험 설정."""
    if name == "case-a":
        rc = RunConfig(problem="case-a", graph={"kind": "case-a"},
                       output=Path("case_a.csv"))
    elif name == "case-a-prime":
        rc = RunConfig(problem="case-a-prime",
                       graph={"kind": "unbalanced-ring"},
                       output=Path("case_a_prime.csv"))
    elif name == "case-b":
        rc = RunConfig(problem="case-b", agents=100,
                       graph={"kind": "random", "p": 0.05},
                       output=Path("case_b.csv"))
    else:
        raise ConfigError(f"알 수 없는 기본 실험: {name}", field="problem")
    return rc.with_overrides(**overrides)


def config_hash(rc: RunConfig) -> str:
    """결과 궤적을 결정하는 항목의 sha256 (horizon·출력 경로 제외 —
    같은 실행을 더 길게 이어 가는 재개를 허용)."""
    d = asdict(rc)
    keep = {k: d[k] for k in ("problem", "agents", "graph", "alpha_c",
                              "alpha_sigma", "beta", "x0", "seed")}
    blob = json.dumps(keep, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ------------------------------------------------------------ 조립


def _family_problem(spec: dict, agents: int | None) -> ConstrainedProblem:
    missing = [k for k in _FAMILY_KEYS if k not in spec]
    if missing:
        raise ConfigError(f"인라인 족 항목 누락: {', '.join(missing)}",
                          field="problem")
    try:
        fam = LogisticQuadraticFamily(*(spec[k] for k in _FAMILY_KEYS[:6]))
        if agents is not None and agents != fam.n_agents:
            raise ValueError(f"agents={agents} ≠ labels 길이 {fam.n_agents}")
        return problem_from_family(fam, spec["lower"], spec["upper"],
                                   name=spec.get("name", "custom"),
                                   optimum=spec.get("optimum"))
    except ValueError as e:
        raise ConfigError(str(e), field="problem") from None


def build_problem(rc: RunConfig) -> ConstrainedProblem:
    if isinstance(rc.problem, dict):
        return _family_problem(rc.problem, rc.agents)
    if rc.problem == "case-a":
        return case_a_problem()
    if rc.problem == "case-a-prime":
        return case_a_problem(constrained=False)
    try:
        return case_b_problem(rc.agents or 100)
    except ValueError as e:
        raise ConfigError(str(e), field="agents") from None


def _graph_file(rc: RunConfig, p, name: str) -> Path:
    path = rc.resolve(p)
    if not path.exists():
        raise ConfigError(f"그래프 파일 없음: {path}", field=name)
    return path


def build_schedule(rc: RunConfig, n: int, log=None) -> GraphSchedule:
    """설정의 graph 항목 → 스케줄. 랜덤 스케줄은 창을 실측 검증한다."""
    g = rc.graph
    kind = g["kind"]
    window = g.get("window")
    if kind == "case-a":
        s = case_a_schedule()
    elif kind == "rotating":
        files = g.get("files") or []
        if not files:
            raise ConfigError("files 목록이 비어 있음", field="graph.files")
        s = RotatingSchedule(
            tuple(load_graph(_graph_file(rc, f, f"graph.files[{i}]"))
                  for i, f in enumerate(files)),
            window=int(window or 0))
    elif kind == "static":
        if "file" not in g:
            raise ConfigError("file 항목 필요", field="graph.file")
        s = StaticSchedule(load_graph(_graph_file(rc, g["file"], "graph.file")),
                           window=int(window or 1))
    elif kind in _STATIC_BUILDERS:
        s = StaticSchedule(_STATIC_BUILDERS[kind](n), window=int(window or 1))
    elif kind == "random":
        seed = int(g.get("seed", rc.seed))
        p = float(g.get("p", 0.05))
        if window:
            s = RandomSchedule(n, seed, p, window=int(window))
            probe = max(10 * n, int(window))
            if not verify_jointly_connected(s, probe):
                raise ConnectivityError(
                    f"랜덤 스케줄 seed={seed}: 창 H={window} 검증 실패")
            return replace(s, verified_horizon=probe)
        return make_random_schedule(n, seed, p, log=log)
    else:
        raise ConfigError(f"알 수 없는 그래프 종류: {kind}", field="graph.kind")
    if s.n_nodes != n:
        raise ConfigError(f"그래프 노드 수 {s.n_nodes} ≠ 에이전트 수 {n}",
                          field="graph")
    return s


def step_schedule(rc: RunConfig) -> StepSchedule:
    return StepSchedule(rc.alpha_c, rc.alpha_sigma)


def solver_config(rc: RunConfig) -> SolverConfig:
    x0 = rc.x0 if isinstance(rc.x0, str) else np.asarray(rc.x0, float)
    return SolverConfig(beta=rc.beta, horizon=rc.horizon, x0=x0, seed=rc.seed)
