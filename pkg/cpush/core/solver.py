"""분산 반복 (push-pull + Polyak 보정), 초기화, 중앙 반복, 부등식 인증.

한 스텝 (모든 에이전트 동시, t 시점 상태만 읽음):

  vᵢ   = Σⱼ A_ij xⱼ − yᵢ
  kᵢ   = gᵢ⁺(vᵢ)/‖dᵢ‖² · dᵢ          (dᵢ = ∇gᵢ(vᵢ) 또는 d0)
  xᵢ⁺  = P_Xᵢ(vᵢ − β kᵢ)
  yᵢ⁺  = Σⱼ B_ij yⱼ − α(t)∇fᵢ(xᵢ) + α(t+1)∇fᵢ(xᵢ⁺)

yᵢ(0) = α(0)∇fᵢ(xᵢ(0)) 이고 B 가 열 확률이므로 Σyᵢ(t) = α(t)Σ∇fᵢ(xᵢ(t))
가 매 스텝 유지된다 (추적 항등식).

y 갱신의 덧셈 순서는 N = 1 에서 (y − α(t)g) 가 정확히 0 이 되도록
고정되어 있다 — 그래서 단일 에이전트 실행이 centralized_iterate 와
비트 단위로 같다.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError, DegenerateDirectionError, NumericalError
from .graph import GraphSchedule, WeightPair
from .problem import (GRAD_FLOOR, BoxSet, ConstrainedProblem,
                      InequalityConstraint, plus_part_rows)


@dataclass(frozen=True)
class StepSchedule:
    """α(t) = c / (t+1)^σ,  σ ∈ (0.5, 1]  → Σα = ∞, Σα² < ∞."""

    c: float
    sigma: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"alpha.c 는 양수: {self.c}")
        if not 0.5 < self.sigma <= 1.0:
            raise ValueError(f"alpha.sigma 는 (0.5, 1]: {self.sigma}")

    def alpha(self, t: int) -> float:
        return self.c / (t + 1) ** self.sigma


@dataclass(frozen=True)
class SolverConfig:
    """x0: "box-center" | "uniform" | (N, n) 배열 (explicit).
    d0: None 이면 1/√n · (1, …, 1)."""

    beta: float = 1.0
    horizon: int = 1000
    x0: object = "box-center"
    d0: np.ndarray | None = None
    grad_floor: float = GRAD_FLOOR
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.beta < 2.0:
            raise ValueError(f"beta 는 (0, 2): {self.beta}")
        if self.horizon < 0:
            raise ValueError(f"horizon 은 0 이상: {self.horizon}")
        if not self.grad_floor > 0:
            raise ValueError(f"grad_floor 는 양수: {self.grad_floor}")
        if self.d0 is not None:
            d0 = np.array(self.d0, dtype=np.float64).reshape(-1)
            if not np.any(d0 != 0) or not np.isfinite(d0).all():
                raise ValueError(f"d0 는 유한한 0 아닌 벡터: {d0}")
            d0.setflags(write=False)
            object.__setattr__(self, "d0", d0)

    def direction(self, n: int) -> np.ndarray:
        if self.d0 is None:
            return np.full(n, 1.0 / math.sqrt(n))
        if self.d0.shape != (n,):
            raise ValueError(f"d0 차원 {self.d0.shape} ≠ ({n},)")
        return self.d0


@dataclass(frozen=True)
class NetworkState:
    """t 시점 (x, y) — 둘 다 (N, n), 읽기 전용."""

    t: int
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        for name in ("x", "y"):
            a = getattr(self, name)
            if a.flags.writeable:
                a = a.copy()
                a.setflags(write=False)
                object.__setattr__(self, name, a)


class StepTrace(NamedTuple):
    """한 스텝의 중간값 (관찰자용)."""

    v: np.ndarray          # (N, n)
    gplus: np.ndarray      # (N,)  gᵢ⁺(vᵢ)
    d: np.ndarray          # (N, n)
    k: np.ndarray          # (N, n)  β 곱하기 전 보정
    x_prev: np.ndarray
    grads: np.ndarray      # ∇fᵢ(xᵢ⁺)


# ------------------------------------------------------------ 공용 조각


def _sqnorm_rows(D: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", D, D)


def _correction_rows(gplus: np.ndarray, D: np.ndarray) -> np.ndarray:
    return (gplus / _sqnorm_rows(D))[:, None] * D


def _check_finite(arr: np.ndarray, term: str, t: int):
    ok = np.isfinite(arr)
    if ok.all():
        return
    bad = ~ok if ok.ndim == 1 else ~ok.all(axis=1)
    raise NumericalError(term, agent=int(np.flatnonzero(bad)[0]), t=t)


def polyak_correction(gplus: float, d, beta: float,
                      grad_floor: float = GRAD_FLOOR) -> np.ndarray:
    """β · g⁺/‖d‖² · d  (g⁺ = 0 이면 0 벡터)."""
    d = np.asarray(d, dtype=np.float64)
    if gplus < 0:
        raise ValueError(f"gplus 는 0 이상: {gplus}")
    if gplus == 0:
        return np.zeros_like(d)
    nrm = float(np.linalg.norm(d))
    if nrm < grad_floor:
        raise DegenerateDirectionError(
            f"g⁺={gplus:.3g} > 0 인데 ‖d‖={nrm:.3g} < {grad_floor:g}")
    return beta * (gplus / (nrm * nrm)) * d


# ------------------------------------------------------------ 분산 반복


def _initial_points(p: ConstrainedProblem, cfg: SolverConfig) -> np.ndarray:
    if isinstance(cfg.x0, str):
        if cfg.x0 == "box-center":
            return 0.5 * (p.lower + p.upper)
        if cfg.x0 == "uniform":
            rng = np.random.default_rng(cfg.seed)
            return rng.uniform(p.lower, p.upper)
        raise ConfigError(f"알 수 없는 모드: {cfg.x0}", field="x0")
    X = np.asarray(cfg.x0, dtype=np.float64)
    if X.shape != (p.n_agents, p.dim):
        raise ConfigError(f"명시 초기점 shape {X.shape} ≠ "
                          f"({p.n_agents}, {p.dim})", field="x0")
    return X.copy()


def initialize(p: ConstrainedProblem, cfg: SolverConfig,
               sched: StepSchedule) -> NetworkState:
    X = _initial_points(p, cfg)
    _check_finite(X, "x", 0)
    G = p.grads(X)
    _check_finite(G, "grad_f", 0)
    return NetworkState(0, X, sched.alpha(0) * G)


def _advance(p: ConstrainedProblem, w: WeightPair, s: NetworkState,
             G: np.ndarray, sched: StepSchedule, cfg: SolverConfig,
             d0: np.ndarray, pool=None):
    """(다음 상태, trace). G 는 ∇fᵢ(xᵢ(t)) — run 이 스텝 사이에 재사용."""
    t = s.t
    V = w.A @ s.x - s.y
    _check_finite(V, "v", t)
    gv = p.g_values(V, pool)
    _check_finite(gv, "g(v)", t)
    gplus, D = plus_part_rows(gv, p.g_grads(V, pool), d0, cfg.grad_floor)
    K = _correction_rows(gplus, D)
    Xn = np.clip(V - cfg.beta * K, p.lower, p.upper)
    _check_finite(Xn, "x", t + 1)
    Gn = p.grads(Xn, pool)
    _check_finite(Gn, "grad_f", t + 1)
    Yn = (w.B @ s.y - sched.alpha(t) * G) + sched.alpha(t + 1) * Gn
    _check_finite(Yn, "y", t + 1)
    return NetworkState(t + 1, Xn, Yn), StepTrace(V, gplus, D, K, s.x, Gn)


def step(s: NetworkState, w: WeightPair, p: ConstrainedProblem,
         sched: StepSchedule, cfg: SolverConfig) -> NetworkState:
    if s.x.shape != (p.n_agents, p.dim) or s.y.shape != s.x.shape:
        raise ValueError(f"상태 shape {s.x.shape}/{s.y.shape} 가 문제 "
                         f"({p.n_agents}, {p.dim}) 와 다름")
    if w.A.shape != (p.n_agents, p.n_agents):
        raise ValueError(f"가중치 크기 {w.A.shape} ≠ 에이전트 수 {p.n_agents}")
    nxt, _ = _advance(p, w, s, p.grads(s.x), sched, cfg,
                      cfg.direction(p.dim))
    return nxt


Observer = Callable[[NetworkState, "StepTrace | None"], None]


def run(p: ConstrainedProblem, schedule: GraphSchedule, sched: StepSchedule,
        cfg: SolverConfig, observer: Observer | None = None,
        state: NetworkState | None = None, log=None, threads: int = 0,
        progress_every: int | None = None) -> NetworkState:
    """t = state.t .. horizon−1 를 진행해 마지막 상태를 돌려준다.

    observer(state, trace) 는 시작 상태(trace=None) 와 매 스텝 뒤에
    t 순서대로 불린다. threads > 0 이면 벡터화 족이 없는 문제에 한해
    에이전트별 평가를 스레드 풀에 나눈다 (결과 순서는 에이전트 순서).
    """
    if schedule.n_nodes != p.n_agents:
        raise ValueError(f"그래프 노드 수 {schedule.n_nodes} ≠ 에이전트 수 "
                         f"{p.n_agents}")
    T = cfg.horizon
    if log and schedule.verified_horizon < T:
        log(f"[run] 경고: 스케줄 결합 강연결이 t<{T} 전체에서 검증되지 않음 "
            f"(verified_horizon={schedule.verified_horizon})")
    if state is None:
        state = initialize(p, cfg, sched)
    elif state.t > T:
        raise ValueError(f"재개 시점 t={state.t} 가 horizon {T} 이후")
    if observer:
        observer(state, None)

    d0 = cfg.direction(p.dim)
    every = progress_every or max(1, T // 10)
    pool = (ThreadPoolExecutor(max_workers=threads)
            if threads > 0 and p.family is None else None)
    try:
        G = p.grads(state.x, pool)
        while state.t < T:
            state, trace = _advance(p, schedule.weights_at(state.t), state,
                                    G, sched, cfg, d0, pool)
            G = trace.grads
            if observer:
                observer(state, trace)
            if log and state.t % every == 0:
                log(f"[run] t={state.t}/{T}  α={sched.alpha(state.t):.4g}  "
                    f"x̄={np.array2string(state.x.mean(axis=0), precision=4)}")
    finally:
        if pool is not None:
            pool.shutdown()
    return state


# ------------------------------------------------------------ 중앙 반복


def centralized_iterate(p: ConstrainedProblem, x, t: int,
                        sched: StepSchedule, cfg: SolverConfig,
                        box: BoxSet | None = None) -> np.ndarray:
    """v = x − α(t)Σ∇fᵢ(x), g₀ = maxᵢ gᵢ(v) (동률이면 가장 작은 i),
    반환 P_X(v − β k), X = ⋂Xᵢ."""
    box = box or p.intersection()
    x = np.asarray(x, dtype=np.float64)
    X = np.broadcast_to(x, (p.n_agents, p.dim))
    v = x - sched.alpha(t) * p.grads(X).sum(axis=0)
    V = np.broadcast_to(v, (p.n_agents, p.dim))
    gv = p.g_values(V)
    i = int(np.argmax(gv))
    gplus, D = plus_part_rows(gv[i:i + 1], p.g_grads(V)[i:i + 1],
                              cfg.direction(p.dim), cfg.grad_floor)
    K = _correction_rows(gplus, D)
    return np.clip(v - cfg.beta * K[0], box.lower, box.upper)


def solve_centralized(p: ConstrainedProblem, horizon: int,
                      sched: StepSchedule, cfg: SolverConfig, x0=None,
                      log=None) -> np.ndarray:
    box = p.intersection()
    x = box.center if x0 is None else np.asarray(x0, dtype=np.float64)
    every = max(1, horizon // 5)
    for t in range(horizon):
        x = centralized_iterate(p, x, t, sched, cfg, box)
        if log and (t + 1) % every == 0:
            log(f"[oracle] t={t + 1}/{horizon}  x={np.array2string(x, precision=5)}")
    return x


def with_derived_optimum(p: ConstrainedProblem, horizon: int,
                         sched: StepSchedule, cfg: SolverConfig,
                         log=None) -> ConstrainedProblem:
    """x* 가 없는 문제에 중앙 반복 결과를 도출 최적점으로 붙인다."""
    if p.optimum is not None:
        return p
    if log:
        log(f"[oracle] {p.name}: x* 미지정 → 중앙 반복 {horizon} 스텝으로 도출")
    xs = solve_centralized(p, horizon, sched, cfg, log=log)
    return replace(p, optimum=xs, optimal_value=None, optimum_derived=True)


# ------------------------------------------------------------ 인증 / 불변량


def descent_slack_rows(V, Xn, z, gplus, D, beta: float) -> np.ndarray:
    """에이전트별 ‖v−z‖² − β(2−β)g⁺²/‖d‖² − ‖x⁺−z‖²."""
    dv = V - z
    dx = Xn - z
    return (_sqnorm_rows(dv) - beta * (2.0 - beta) * gplus ** 2
            / _sqnorm_rows(D) - _sqnorm_rows(dx))


def descent_certificate(v, x_next, z, gplus: float, d, beta: float) -> float:
    """z ∈ Y, g⁺(z) = 0 이면 ≥ 0 (허용 −1e-9)."""
    row = lambda a: np.asarray(a, dtype=np.float64).reshape(1, -1)
    return float(descent_slack_rows(row(v), row(x_next), row(z),
                                   np.array([gplus], float), row(d), beta)[0])


def tracking_residual(s: NetworkState, grads: np.ndarray,
                      sched: StepSchedule) -> float:
    """‖Σyᵢ − α(t)Σ∇fᵢ(xᵢ)‖ / (1 + ‖Σyᵢ‖)."""
    ysum = s.y.sum(axis=0)
    r = ysum - sched.alpha(s.t) * grads.sum(axis=0)
    return float(np.linalg.norm(r) / (1.0 + np.linalg.norm(ysum)))


def polyak_feasibility(c: InequalityConstraint, box: BoxSet, x0,
                       beta: float = 1.0, d0=None, iters: int = 100,
                       grad_floor: float = GRAD_FLOOR):
    """x ← P_Y(x − β g⁺(x)/‖d‖² d) 만 반복. (마지막 x, g⁺ 이력) 반환."""
    x = np.asarray(x0, dtype=np.float64).copy()
    d0 = (np.full(box.dim, 1.0 / math.sqrt(box.dim)) if d0 is None
          else np.asarray(d0, dtype=np.float64))
    hist = []
    for _ in range(iters):
        gplus, D = plus_part_rows(np.array([float(c.value(x))]),
                                  np.asarray(c.grad(x), float)[None, :], d0,
                                  grad_floor)
        hist.append(float(gplus[0]))
        x = np.clip(x - beta * _correction_rows(gplus, D)[0], box.lower,
                    box.upper)
    hist.append(max(float(c.value(x)), 0.0))
    return x, np.array(hist)
