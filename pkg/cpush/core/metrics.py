"""수렴 지표: 기준값, 합의 오차, α 가중 평균, 속도 포락선.

원칙: 관측된 반복에서만 계산한다. 증명 상수(H₁…H₃, θ, λ)는 추정하지
않고, 속도 주장은 실행 자체의 기록으로 맞춘 포락선으로만 확인한다.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: CSV 열 순서 (헤더와 동일)
FIELDS = ("t", "alpha", "criterion", "consensus_error", "feasibility",
          "objective_gap")
#: 상승 허용 비율 (마지막 20% 구간)
UPTICK_TOL = 0.01


@dataclass(frozen=True)
class MetricsRecord:
    t: int
    alpha: float
    criterion: float
    consensus_error: float
    feasibility: float
    objective_gap: float

    def __post_init__(self):
        for name in ("criterion", "consensus_error", "feasibility"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} 는 0 이상: {getattr(self, name)}")

    def csv_row(self) -> str:
        vals = [format(getattr(self, k), ".12g") for k in FIELDS[1:]]
        return ",".join([str(self.t)] + vals)


def criterion(xs, x_star) -> float:
    """(1/N) Σᵢ ‖xᵢ − x*‖ / ‖x*‖."""
    xs = np.atleast_2d(np.asarray(xs, float))
    x_star = np.asarray(x_star, float)
    ref = float(np.linalg.norm(x_star))
    if ref == 0.0:
        raise ValueError("x* = 0 — 상대 기준값 정의 불가 (절대 거리 사용)")
    return float(np.mean(np.linalg.norm(xs - x_star, axis=1)) / ref)


def consensus_error(xs) -> float:
    """maxᵢ ‖xᵢ − x̄‖, x̄ 는 산술 평균."""
    xs = np.atleast_2d(np.asarray(xs, float))
    return float(np.max(np.linalg.norm(xs - xs.mean(axis=0), axis=1)))


def left_perron_vector(A) -> np.ndarray:
    """πᵀA = πᵀ, Σπ = 1 (행 확률 A, 고정 그래프 전용)."""
    A = np.asarray(A, float)
    vals, vecs = np.linalg.eig(A.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[k] - 1.0) > 1e-8:
        raise ValueError(f"고유값 1 없음 (가장 가까운 값 {vals[k]:.6g})")
    pi = np.abs(np.real(vecs[:, k]))
    return pi / pi.sum()


def pi_consensus_error(xs, pi) -> float:
    """maxᵢ ‖xᵢ − Σⱼπⱼxⱼ‖."""
    xs = np.atleast_2d(np.asarray(xs, float))
    xbar = np.asarray(pi, float) @ xs
    return float(np.max(np.linalg.norm(xs - xbar, axis=1)))


@dataclass(frozen=True)
class RunningAverages:
    """x̃ᵢ(t) = Σₖ α(k)xᵢ(k) / Σₖ α(k), k 오름차순 누적."""

    weight_sum: float = 0.0
    weighted_x: np.ndarray | None = None

    def averages(self) -> np.ndarray:
        if self.weighted_x is None or self.weight_sum <= 0:
            raise ValueError("갱신 전 평균 조회")
        return self.weighted_x / self.weight_sum


def update_running_average(ra: RunningAverages, alpha_t: float,
                           xs) -> RunningAverages:
    if not alpha_t > 0:
        raise ValueError(f"alpha_t 는 양수: {alpha_t}")
    xs = np.atleast_2d(np.asarray(xs, float))
    wx = alpha_t * xs if ra.weighted_x is None else ra.weighted_x + alpha_t * xs
    return RunningAverages(ra.weight_sum + alpha_t, wx)


def rate_envelope_fit(records, t_min: int):
    """(C_hat, violations).

    C_hat = max_{t ≥ t_min} criterion(t)·√t / ln t,
    violations = #{t ≥ 2·t_min : criterion(t) > 2·C_hat·ln t/√t}.
    """
    if t_min < 10:
        raise ValueError(f"t_min 은 10 이상: {t_min}")
    tail = [r for r in records if r.t >= t_min]
    if len(tail) < 2:
        raise ValueError(f"t ≥ {t_min} 기록이 {len(tail)}개 — 포락선 맞춤 불가")
    c_hat = max(r.criterion * math.sqrt(r.t) / math.log(r.t) for r in tail)
    violations = sum(
        1 for r in tail
        if r.t >= 2 * t_min
        and r.criterion > 2.0 * c_hat * math.log(r.t) / math.sqrt(r.t))
    return c_hat, violations


def trailing_upticks(records, frac: float = 0.2) -> float:
    """마지막 frac 구간에서 criterion 이 직전 기록보다 커진 비율."""
    if not 0 < frac <= 1:
        raise ValueError(f"frac 은 (0, 1]: {frac}")
    n = len(records)
    tail = records[n - max(2, math.ceil(frac * n)):] if n >= 2 else []
    if len(tail) < 2:
        return 0.0
    ups = sum(1 for a, b in zip(tail, tail[1:]) if b.criterion > a.criterion)
    return ups / (len(tail) - 1)
