"""공용 픽스처: 손계산 가능한 1차원 문제, 내장 인스턴스.

실행: 저장소 루트에서 `python -m pytest tests/` (numpy·networkx·hypothesis
필요). 수락 규모 실행은 `-m "not slow"` 로 뺄 수 있다.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from cpush.core.problem import (Agent, BoxSet, ConstrainedProblem,  # noqa: E402
                                InequalityConstraint, SmoothObjective,
                                case_a_problem)


def make_quad_1d(lo=-5.0, hi=5.0, g_offset=-10.0, optimum=None):
    """f(x) = x²/2, g(x) = x + g_offset, X = [lo, hi] (에이전트 1개)."""
    f = SmoothObjective(value=lambda x: 0.5 * float(x @ x),
                        grad=lambda x: np.array(x, dtype=np.float64),
                        lipschitz=1.0)
    g = InequalityConstraint(value=lambda x: float(x[0]) + g_offset,
                             grad=lambda x: np.ones(1))
    return ConstrainedProblem((Agent(f, g, BoxSet([lo], [hi])),),
                              name="quad-1d", optimum=optimum)


def make_shifted_quads(centers, lo=-10.0, hi=10.0):
    """fᵢ(x) = ‖x − cᵢ‖²/2, g ≡ −1 (비활성) — 최적점은 cᵢ 평균."""
    centers = np.asarray(centers, float)
    n = centers.shape[1]
    agents = []
    for c in centers:
        f = SmoothObjective(value=lambda x, c=c: 0.5 * float((x - c) @ (x - c)),
                            grad=lambda x, c=c: np.asarray(x, float) - c)
        g = InequalityConstraint(value=lambda x: -1.0,
                                 grad=lambda x: np.zeros(n))
        agents.append(Agent(f, g, BoxSet(np.full(n, lo), np.full(n, hi))))
    return ConstrainedProblem(tuple(agents), name="shifted-quads")


@pytest.fixture
def quad_1d():
    return make_quad_1d()


@pytest.fixture(scope="session")
def case_a():
    return case_a_problem()


X_STAR = np.array([1.0, 0.5, 3.0])
