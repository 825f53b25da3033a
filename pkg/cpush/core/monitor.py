"""실행 관찰자: 매 스텝 불변량 점검 + log_every 마다 MetricsRecord.

점검 항목
  - 추적 항등식 잔차  ‖Σyᵢ − α(t)Σ∇fᵢ‖/(1+‖Σyᵢ‖)   (≤ 1e-9)
  - 부등식 인증 slack (z = x*, 주어진 x* 일 때만)    (≥ −1e-9)
  - Polyak 단계 감소율  gᵢ⁺(vᵢ − βkᵢ) < gᵢ⁺(vᵢ)
  - 추적자 크기  ‖Σyᵢ(t)‖ ≤ N·M·α(t), M = 지금까지 본 최대 ‖∇fᵢ‖
  - 박스 포함  xᵢ(t) ∈ Xᵢ  (t ≥ 1)
"""
from __future__ import annotations

import numpy as np

from .metrics import (MetricsRecord, RunningAverages, consensus_error,
                      criterion, update_running_average)
from .problem import ConstrainedProblem, feasibility_violation, global_objective
from .solver import (NetworkState, SolverConfig, StepSchedule, StepTrace,
                     descent_slack_rows, tracking_residual)

TRACKING_TOL = 1e-9
SLACK_TOL = -1e-9


class RunMonitor:
    def __init__(self, p: ConstrainedProblem, sched: StepSchedule,
                 cfg: SolverConfig, log_every: int = 100):
        if p.optimum is None:
            raise ValueError(f"{p.name}: x* 없음 — 기준값 계산 불가")
        if log_every < 1:
            raise ValueError(f"log_every 는 1 이상: {log_every}")
        self.p = p
        self.sched = sched
        self.beta = cfg.beta
        self.log_every = log_every
        self.certify = not p.optimum_derived
        self.records: list[MetricsRecord] = []
        self.ra = RunningAverages()
        self.last: NetworkState | None = None

        self.max_tracking = 0.0
        self.min_slack = np.inf
        self.slack_violations = 0
        self.polyak_active = 0
        self.polyak_decreased = 0
        self.max_grad_norm = 0.0
        self.tracker_violations = 0
        self.box_violations = 0
        self.steps = 0

    def __call__(self, s: NetworkState, trace: StepTrace | None):
        p = self.p
        grads = p.grads(s.x) if trace is None else trace.grads
        a = self.sched.alpha(s.t)

        self.max_tracking = max(self.max_tracking,
                                tracking_residual(s, grads, self.sched))
        self.max_grad_norm = max(self.max_grad_norm,
                                 float(np.linalg.norm(grads, axis=1).max()))
        ysum = float(np.linalg.norm(s.y.sum(axis=0)))
        bound = p.n_agents * self.max_grad_norm * a
        if ysum > bound + TRACKING_TOL * (1.0 + ysum):
            self.tracker_violations += 1

        if trace is not None:
            self.steps += 1
            if ((s.x < p.lower) | (s.x > p.upper)).any():
                self.box_violations += 1
            if self.certify:
                slack = descent_slack_rows(trace.v, s.x, p.optimum,
                                          trace.gplus, trace.d, self.beta)
                self.min_slack = min(self.min_slack, float(slack.min()))
                self.slack_violations += int((slack < SLACK_TOL).sum())
            active = trace.gplus > 0
            if active.any():
                U = trace.v - self.beta * trace.k
                after = np.maximum(p.g_values(U), 0.0)
                self.polyak_active += int(active.sum())
                self.polyak_decreased += int(
                    (after[active] < trace.gplus[active]).sum())

        self.ra = update_running_average(self.ra, a, s.x)
        self.last = s
        if s.t > 0 and s.t % self.log_every == 0:
            self._record(s)

    def _record(self, s: NetworkState):
        p = self.p
        xt0 = self.ra.averages()[0]
        self.records.append(MetricsRecord(
            t=s.t,
            alpha=self.sched.alpha(s.t),
            criterion=criterion(s.x, p.optimum),
            consensus_error=consensus_error(s.x),
            feasibility=max(feasibility_violation(p, x) for x in s.x),
            objective_gap=global_objective(p, xt0) - p.optimal_value,
        ))

    def finalize(self) -> list[MetricsRecord]:
        """마지막 상태가 기록되지 않았으면 추가하고 기록 목록 반환.

        t = 0 (시작 상태) 는 기록하지 않는다 — T = 0 이면 빈 목록.
        """
        last = self.last
        if last is not None and last.t > 0 and (not self.records
                                                or self.records[-1].t != last.t):
            self._record(last)
        return self.records

    @property
    def polyak_decrease_fraction(self) -> float | None:
        if not self.polyak_active:
            return None
        return self.polyak_decreased / self.polyak_active

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "max_tracking_residual": self.max_tracking,
            "min_certificate_slack": (None if not self.certify
                                      or self.min_slack == np.inf
                                      else self.min_slack),
            "certificate_violations": self.slack_violations,
            "polyak_active_steps": self.polyak_active,
            "polyak_decrease_fraction": self.polyak_decrease_fraction,
            "max_grad_norm": self.max_grad_norm,
            "tracker_bound_violations": self.tracker_violations,
            "box_violations": self.box_violations,
        }
