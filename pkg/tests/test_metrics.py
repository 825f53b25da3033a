"""core/metrics.py · core/monitor.py — 기준값, 합의 오차, 가중 평균, 포락선."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpush.core.graph import build_weights, unbalanced_ring
from cpush.core.metrics import (MetricsRecord, RunningAverages,
                                consensus_error, criterion,
                                left_perron_vector, pi_consensus_error,
                                rate_envelope_fit, trailing_upticks,
                                update_running_average)
from cpush.core.monitor import RunMonitor
from cpush.core.solver import NetworkState, SolverConfig, StepSchedule

from conftest import X_STAR, make_quad_1d


def _rec(t, c):
    return MetricsRecord(t=t, alpha=0.1, criterion=c, consensus_error=0.0,
                         feasibility=0.0, objective_gap=0.0)


# ---- 기준값 / 합의 오차


def test_criterion_examples():
    assert criterion(np.tile(X_STAR, (4, 1)), X_STAR) == 0.0
    assert criterion([2 * X_STAR], X_STAR) == pytest.approx(1.0)
    far = X_STAR + np.array([np.linalg.norm(X_STAR), 0.0, 0.0])
    assert criterion([X_STAR, far], X_STAR) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        criterion([[1.0, 0.0]], [0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_criterion_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    xs = rng.normal(size=(7, 3))
    perm = rng.permutation(7)
    assert criterion(xs[perm], X_STAR) == pytest.approx(criterion(xs, X_STAR),
                                                        rel=1e-14)


def test_consensus_error_examples():
    assert consensus_error(np.ones((5, 3))) == 0.0
    assert consensus_error([[0.0, 0, 0], [2.0, 0, 0]]) == pytest.approx(1.0)
    assert consensus_error([[3.0, 4.0, 5.0]]) == 0.0
    assert consensus_error([[1.0, 1.0], [1.0, 1.0 + 1e-6]]) > 1e-12


def test_pi_weighted_consensus_static_graph():
    w = build_weights(unbalanced_ring(6))
    pi = left_perron_vector(w.A)
    assert pi.sum() == pytest.approx(1.0) and (pi > 0).all()
    assert np.allclose(pi @ w.A, pi, atol=1e-12)
    xs = np.tile([1.0, 2.0], (6, 1))
    assert pi_consensus_error(xs, pi) == pytest.approx(0.0, abs=1e-12)
    xs[0] += 1.0
    assert pi_consensus_error(xs, pi) > 0


# ---- α 가중 평균


def test_running_average_examples():
    ra = update_running_average(RunningAverages(), 0.1, [[4.0]])
    assert ra.averages()[0, 0] == pytest.approx(4.0)
    ra = update_running_average(
        update_running_average(RunningAverages(), 0.5, [[1.0]]), 0.5, [[3.0]])
    assert ra.averages()[0, 0] == pytest.approx(2.0)
    ra = update_running_average(
        update_running_average(RunningAverages(), 0.1, [[0.0]]), 0.05, [[3.0]])
    assert ra.averages()[0, 0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        update_running_average(ra, 0.0, [[1.0]])
    with pytest.raises(ValueError):
        RunningAverages().averages()


# ---- 포락선


def test_envelope_zero_and_exact():
    recs = [_rec(t, 0.0) for t in range(10, 5000, 10)]
    assert rate_envelope_fit(recs, 100) == (0.0, 0)
    recs = [_rec(t, math.log(t) / math.sqrt(t)) for t in range(10, 5000, 10)]
    c_hat, violations = rate_envelope_fit(recs, 100)
    assert c_hat == pytest.approx(1.0) and violations == 0


def test_envelope_errors():
    with pytest.raises(ValueError):
        rate_envelope_fit([_rec(5000, 0.1)], 100)
    with pytest.raises(ValueError):
        rate_envelope_fit([_rec(t, 0.1) for t in range(10, 100)], 5)


def test_trailing_upticks():
    recs = [_rec(t, 1.0 / t) for t in range(1, 101)]
    assert trailing_upticks(recs) == 0.0
    recs[-1] = _rec(100, 1.0)
    assert trailing_upticks(recs) == pytest.approx(1 / 19)
    assert trailing_upticks([]) == 0.0


def test_record_rejects_negative_and_formats():
    with pytest.raises(ValueError):
        MetricsRecord(1, 0.1, -1.0, 0.0, 0.0, 0.0)
    r = MetricsRecord(12, 0.05, 1 / 3, 0.0, 0.0, -2e-13)
    assert r.csv_row() == "12,0.05,0.333333333333,0,0,-2e-13"


# ---- 관찰자


def test_monitor_records_every_k_and_final():
    p = make_quad_1d(optimum=[0.5])
    sched = StepSchedule(0.1, 0.6)
    mon = RunMonitor(p, sched, SolverConfig(), log_every=4)
    for t in range(0, 11):
        mon(NetworkState(t, np.array([[0.5 + 1.0 / (t + 1)]]),
                         np.array([[sched.alpha(t) * (0.5 + 1.0 / (t + 1))]])),
            None)
    recs = mon.finalize()
    assert [r.t for r in recs] == [4, 8, 10]
    assert recs[0].criterion == pytest.approx(0.2 / 0.5)
    assert mon.max_tracking <= 1e-15


def test_monitor_needs_optimum(quad_1d):
    with pytest.raises(ValueError):
        RunMonitor(quad_1d, StepSchedule(0.1, 0.6), SolverConfig())
