"""제약 볼록 문제: 에이전트별 (fᵢ, gᵢ, Xᵢ) 삼중항과 내장 인스턴스.

  min Σᵢ fᵢ(x)   s.t.  gᵢ(x) ≤ 0,  x ∈ Xᵢ   (i = 0..N−1)

fᵢ 는 매끄러운 볼록, gᵢ 는 볼록 부등식 하나, Xᵢ 는 박스. 박스 하한 =
상한인 퇴화 좌표(예: x³ = 3)도 허용.

내장 인스턴스는 모두 "로지스틱 + 대각 이차" 족이라 에이전트 축으로
벡터화된 평가(LogisticQuadraticFamily)를 갖는다 — 솔버 한 스텝이
numpy 연산 몇 개로 끝난다. 임의 콜러블로 만든 문제는 에이전트별
루프(선택적으로 스레드 풀)로 평가한다.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateDirectionError

#: x* 가능성 판정 허용치 (gᵢ(x*) ≤ FEAS_TOL)
FEAS_TOL = 1e-9
#: ‖d‖ 퇴화 하한 기본값
GRAD_FLOOR = 1e-12


@dataclass(frozen=True)
class SmoothObjective:
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float | None = None


@dataclass(frozen=True)
class InequalityConstraint:
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoxSet:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError(f"박스 차원 불일치: {lo.shape} vs {hi.shape}")
        if not (lo <= hi).all():
            raise ValueError(f"빈 박스 (lower > upper): {lo} / {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, float)
        return bool(((x >= self.lower - tol) & (x <= self.upper + tol)).all())


def intersect_boxes(boxes) -> BoxSet:
    boxes = list(boxes)
    lo = np.max([b.lower for b in boxes], axis=0)
    hi = np.min([b.upper for b in boxes], axis=0)
    if not (lo <= hi).all():
        bad = np.flatnonzero(lo > hi).tolist()
        raise ValueError(f"박스 교집합이 비어 있음 (좌표 {bad})")
    return BoxSet(lo, hi)


def project_box(x, box: BoxSet) -> np.ndarray:
    """좌표별 clamp — 박스 위 유클리드 투영 (비확장)."""
    return np.clip(np.asarray(x, float), box.lower, box.upper)


def plus_part_rows(gv: np.ndarray, dg: np.ndarray, d0: np.ndarray,
                   grad_floor: float = GRAD_FLOOR):
    """에이전트 행 단위 (g⁺, d). g > 0 이면 d = ∇g, 아니면 d0.

    g⁺ = 0 경계(g = 0)도 d0 쪽 — 이 경우 보정량이 0 이라 d0 는
    나눗셈만 지킨다.
    """
    gplus = np.maximum(gv, 0.0)
    active = gv > 0.0
    D = np.where(active[:, None], dg, np.asarray(d0, float)[None, :])
    if active.any():
        nrm = np.sqrt(np.einsum("ij,ij->i", D, D))
        bad = np.flatnonzero(active & (nrm < grad_floor))
        if len(bad):
            i = int(bad[0])
            raise DegenerateDirectionError(
                f"g={gv[i]:.3g} > 0 인데 ‖∇g‖={nrm[i]:.3g} < {grad_floor:g}",
                agent=i)
    return gplus, D


def plus_part(c: InequalityConstraint, x, d0, grad_floor: float = GRAD_FLOOR):
    x = np.asarray(x, float)
    d0 = np.asarray(d0, float)
    if not np.any(d0 != 0):
        raise ValueError("d0 는 0 이 아닌 벡터여야 함")
    gplus, D = plus_part_rows(np.array([float(c.value(x))]),
                              np.asarray(c.grad(x), float)[None, :], d0,
                              grad_floor)
    return float(gplus[0]), D[0]


# ------------------------------------------------------------ 벡터화 족


@dataclass(frozen=True)
class LogisticQuadraticFamily:
    """fᵢ(x) = ln(1 + exp(−aᵢ·wᵢᵀx)) + Σ_d P_id·x_d²
    gᵢ(x) = Σ_d Q_id·x_d² + L_idᵀx + cᵢ       (P, Q ≥ 0 → 볼록)

    모든 배열은 에이전트가 첫 축. idx 로 일부 행만 평가할 수 있다.
    """

    labels: np.ndarray     # (N,)   aᵢ
    features: np.ndarray   # (N, n) wᵢ
    quad: np.ndarray       # (N, n) P
    g_quad: np.ndarray     # (N, n) Q
    g_lin: np.ndarray      # (N, n) L
    g_const: np.ndarray    # (N,)   c

    def __post_init__(self):
        arrs = {}
        for name in ("labels", "features", "quad", "g_quad", "g_lin",
                     "g_const"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if not np.isfinite(a).all():
                raise ValueError(f"{name}: 비유한 계수")
            a.setflags(write=False)
            arrs[name] = a
        N = arrs["labels"].shape
        if arrs["labels"].ndim != 1:
            raise ValueError(f"labels 는 (N,) 이어야 함: {N}")
        n_agents = arrs["labels"].shape[0]
        mats = ("features", "quad", "g_quad", "g_lin")
        shape = arrs["features"].shape
        if len(shape) != 2 or shape[0] != n_agents:
            raise ValueError(f"features 는 (N, n) 이어야 함: {shape}")
        for name in mats:
            if arrs[name].shape != shape:
                raise ValueError(f"{name} shape {arrs[name].shape} ≠ {shape}")
        if arrs["g_const"].shape != (n_agents,):
            raise ValueError(f"g_const 는 (N,): {arrs['g_const'].shape}")
        if (arrs["quad"] < 0).any() or (arrs["g_quad"] < 0).any():
            raise ValueError("이차 계수는 음이 아니어야 함 (볼록성)")
        for name, a in arrs.items():
            object.__setattr__(self, name, a)

    @property
    def n_agents(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def _margin(self, X, idx):
        return self.labels[idx] * np.einsum("ij,ij->i", self.features[idx], X)

    def f_values(self, X, idx=slice(None)) -> np.ndarray:
        z = self._margin(X, idx)
        return np.logaddexp(0.0, -z) + np.einsum("ij,ij->i", self.quad[idx],
                                                 X * X)

    def f_grads(self, X, idx=slice(None)) -> np.ndarray:
        z = self._margin(X, idx)
        s = np.exp(-np.logaddexp(0.0, z))          # σ(−z)
        return ((-self.labels[idx] * s)[:, None] * self.features[idx]
                + 2.0 * self.quad[idx] * X)

    def g_values(self, X, idx=slice(None)) -> np.ndarray:
        return (np.einsum("ij,ij->i", self.g_quad[idx], X * X)
                + np.einsum("ij,ij->i", self.g_lin[idx], X)
                + self.g_const[idx])

    def g_grads(self, X, idx=slice(None)) -> np.ndarray:
        return 2.0 * self.g_quad[idx] * X + self.g_lin[idx]

    def _row(self, fn, i, x):
        return fn(np.asarray(x, float)[None, :], slice(i, i + 1))[0]

    def objective(self, i: int) -> SmoothObjective:
        L = (0.25 * float(self.features[i] @ self.features[i])
             + 2.0 * float(self.quad[i].max()))
        return SmoothObjective(
            value=lambda x: float(self._row(self.f_values, i, x)),
            grad=partial(self._row, self.f_grads, i),
            lipschitz=L)

    def constraint(self, i: int) -> InequalityConstraint:
        return InequalityConstraint(
            value=lambda x: float(self._row(self.g_values, i, x)),
            grad=partial(self._row, self.g_grads, i))


# ------------------------------------------------------------ 문제


class Agent(NamedTuple):
    f: SmoothObjective
    g: InequalityConstraint
    box: BoxSet


@dataclass(frozen=True)
class ConstrainedProblem:
    """N 개 (fᵢ, gᵢ, Xᵢ) + 선택적 x*, f*.

    optimal_value 가 비어 있고 optimum 이 있으면 f* = Σfᵢ(x*) 로
    채운다. optimum_derived 는 x* 를 중앙 반복으로 구했는지 — 이 경우
    gᵢ(x*) ≤ 0 은 근사로만 성립하므로 박스 포함만 검사한다.
    """

    agents: tuple
    name: str = "custom"
    optimum: np.ndarray | None = None
    optimal_value: float | None = None
    optimum_derived: bool = False
    family: LogisticQuadraticFamily | None = None
    lower: np.ndarray = field(init=False, repr=False, compare=False)
    upper: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        agents = tuple(Agent(*a) for a in self.agents)
        if not agents:
            raise ValueError("에이전트 없음")
        n = agents[0].box.dim
        if any(a.box.dim != n for a in agents):
            raise ValueError("에이전트 박스 차원 불일치")
        if self.family is not None and (self.family.n_agents != len(agents)
                                        or self.family.dim != n):
            raise ValueError("family 크기가 에이전트 목록과 다름")
        object.__setattr__(self, "agents", agents)
        lo = np.stack([a.box.lower for a in agents])
        hi = np.stack([a.box.upper for a in agents])
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.optimum is not None:
            xs = np.array(self.optimum, dtype=np.float64).reshape(-1)
            if xs.shape != (n,):
                raise ValueError(f"optimum 차원 {xs.shape} ≠ ({n},)")
            xs.setflags(write=False)
            object.__setattr__(self, "optimum", xs)
            for i, a in enumerate(agents):
                if not a.box.contains(xs):
                    raise ValueError(f"optimum 이 X_{i} 밖: {xs}")
                if not self.optimum_derived and a.g.value(xs) > FEAS_TOL:
                    raise ValueError(f"optimum 이 g_{i} ≤ 0 위반: "
                                     f"{a.g.value(xs):.3g}")
            if self.optimal_value is None:
                object.__setattr__(self, "optimal_value",
                                   global_objective(self, xs))

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def dim(self) -> int:
        return self.lower.shape[1]

    def intersection(self) -> BoxSet:
        return intersect_boxes(a.box for a in self.agents)

    # 에이전트 축 평가 (X: (N, n)) — family 가 있으면 벡터화, 없으면 루프.
    # pool 은 .map(fn, iterable) 을 가진 실행기 (순서 보존).

    def _check(self, X):
        X = np.asarray(X, float)
        if X.shape != (self.n_agents, self.dim):
            raise ValueError(f"에이전트 행렬은 ({self.n_agents}, {self.dim}) "
                             f"이어야 함: {X.shape}")
        return X

    def _rows(self, which, X, pool):
        mapper = pool.map if pool is not None else map
        return list(mapper(lambda i: which(self.agents[i], X[i]),
                           range(self.n_agents)))

    def f_values(self, X, pool=None) -> np.ndarray:
        X = self._check(X)
        if self.family is not None:
            return self.family.f_values(X)
        return np.array(self._rows(lambda a, x: a.f.value(x), X, pool), float)

    def grads(self, X, pool=None) -> np.ndarray:
        X = self._check(X)
        if self.family is not None:
            return self.family.f_grads(X)
        return np.array(self._rows(lambda a, x: a.f.grad(x), X, pool),
                        float).reshape(X.shape)

    def g_values(self, X, pool=None) -> np.ndarray:
        X = self._check(X)
        if self.family is not None:
            return self.family.g_values(X)
        return np.array(self._rows(lambda a, x: a.g.value(x), X, pool), float)

    def g_grads(self, X, pool=None) -> np.ndarray:
        X = self._check(X)
        if self.family is not None:
            return self.family.g_grads(X)
        return np.array(self._rows(lambda a, x: a.g.grad(x), X, pool),
                        float).reshape(X.shape)


def problem_from_family(fam: LogisticQuadraticFamily, lower, upper,
                        name: str = "custom", optimum=None,
                        optimum_derived: bool = False) -> ConstrainedProblem:
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    if lower.shape != (fam.n_agents, fam.dim) or upper.shape != lower.shape:
        raise ValueError(f"박스 배열은 ({fam.n_agents}, {fam.dim}) 이어야 함")
    agents = [Agent(fam.objective(i), fam.constraint(i),
                    BoxSet(lower[i], upper[i])) for i in range(fam.n_agents)]
    return ConstrainedProblem(tuple(agents), name=name, optimum=optimum,
                              optimum_derived=optimum_derived, family=fam)


def global_objective(p: ConstrainedProblem, x) -> float:
    x = np.asarray(x, float)
    if x.shape != (p.dim,):
        raise ValueError(f"차원 불일치: {x.shape} vs ({p.dim},)")
    X = np.broadcast_to(x, (p.n_agents, p.dim))
    return float(np.sum(p.f_values(X)))


def feasibility_violation(p: ConstrainedProblem, x) -> float:
    """max( maxᵢ gᵢ⁺(x), maxᵢ ‖x − P_Xᵢ(x)‖ )."""
    x = np.asarray(x, float)
    X = np.broadcast_to(x, (p.n_agents, p.dim))
    gmax = float(np.max(p.g_values(X)))
    dist = float(np.max(np.linalg.norm(X - np.clip(X, p.lower, p.upper),
                                       axis=1)))
    return max(gmax, 0.0, dist)


# ------------------------------------------------------------ 내장 인스턴스


def _logistic_family(N: int, r1: int, g_coef: float,
                     constrained: bool = True) -> LogisticQuadraticFamily:
    """로지스틱 + 이차 족: aᵢ = (−1)ⁱ, bᵢ = (0.01i, 0.02i),
    pᵢ = (x¹)²/4 (i < r1) 또는 (x²)²/4 (그 외), i 는 1 기반.
    gᵢ = (x¹)² + g_coef·i·x² + x³ − 10."""
    i = np.arange(1, N + 1, dtype=np.float64)
    labels = np.where(np.arange(1, N + 1) % 2 == 0, 1.0, -1.0)
    features = np.column_stack([0.01 * i, 0.02 * i, np.ones(N)])
    quad = np.zeros((N, 3))
    quad[i < r1, 0] = 0.25
    quad[i >= r1, 1] = 0.25
    if constrained:
        g_quad = np.tile([1.0, 0.0, 0.0], (N, 1))
        g_lin = np.column_stack([np.zeros(N), g_coef * i, np.ones(N)])
        g_const = np.full(N, -10.0)
    else:                                   # g ≡ −1: 한 번도 활성화 안 됨
        g_quad = np.zeros((N, 3))
        g_lin = np.zeros((N, 3))
        g_const = np.full(N, -1.0)
    return LogisticQuadraticFamily(labels, features, quad, g_quad, g_lin,
                                   g_const)


def case_a_problem(constrained: bool = True) -> ConstrainedProblem:
    """N = 8, r₁ = 5, Xᵢ = [i/2−3, i/2+1]×[i/2−3.5, i/2+0.5]×[i/2−1, i/2+2.5].

    constrained=False 는 부등식 제약을 뺀 변형 (case-a-prime).
    """
    N = 8
    i = np.arange(1, N + 1, dtype=np.float64)[:, None]
    lower = i / 2 + np.array([-3.0, -3.5, -1.0])
    upper = i / 2 + np.array([1.0, 0.5, 2.5])
    fam = _logistic_family(N, 5, 1.0, constrained)
    return problem_from_family(
        fam, lower, upper, name="case-a" if constrained else "case-a-prime",
        optimum=np.array([1.0, 0.5, 3.0]))


def case_b_problem(N: int = 100) -> ConstrainedProblem:
    """gᵢ = (x¹)² + 0.1i·x² + x³ − 10, Xᵢ = [0.06i−5, 0.06i+1.94] ×
    [0.06i−5.5, 0.06i+0.94] × [0.06i−3, 0.06i+2.94], r₁ = ⌈N/2⌉+1.

    x* = (1, 0.5, 3) 는 N = 100 일 때만 주어진다 — 다른 N 은 교집합이
    달라지므로 호출부가 solve_centralized 로 도출한다.
    """
    if N < 2:
        raise ValueError(f"case-b 는 N ≥ 2: {N}")
    i = np.arange(1, N + 1, dtype=np.float64)[:, None]
    lower = 0.06 * i + np.array([-5.0, -5.5, -3.0])
    upper = 0.06 * i + np.array([1.94, 0.94, 2.94])
    fam = _logistic_family(N, math.ceil(N / 2) + 1, 0.1)
    optimum = np.array([1.0, 0.5, 3.0]) if N == 100 else None
    return problem_from_family(fam, lower, upper, name="case-b",
                               optimum=optimum)
