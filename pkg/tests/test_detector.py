import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erics.detector import (
    ERICS,
    DetectorConfig,
    DetectorState,
    DriftAlert,
    ma_feature,
    ma_generic,
    ma_probit,
    step,
    window_sum,
)
from erics.distributions import GaussianParamDist, kl_divergence


def g(mu, s2):
    return GaussianParamDist(np.asarray(mu, float), np.asarray(s2, float))


PREV = g([0, 0], [1, 1])
CUR = g([1, 0], [1, 1])


def random_walk(rng, T, K, scale=0.1):
    mu = np.cumsum(rng.normal(0, scale, (T, K)), axis=0)
    s2 = np.exp(np.cumsum(rng.normal(0, scale, (T, K)), axis=0))
    return [g(m, s) for m, s in zip(mu, s2)]


# -- moving averages -----------------------------------------------------------

def test_identical_snapshots_have_zero_ma():
    psis = [g([0.5, 1.0, -3.0], [2.0, 0.1, 1.0])] * 6
    assert ma_generic(psis) == 0.0
    assert ma_probit(psis) == 0.0
    assert ma_feature(psis, 1) == 0.0


def test_single_pair_example():
    assert ma_generic([PREV, CUR]) == pytest.approx(0.5, abs=1e-15)
    assert ma_probit([PREV, CUR]) == pytest.approx(0.5, abs=1e-15)


def test_feature_ma_example():
    assert ma_feature([PREV, CUR], 0) == pytest.approx(0.5)
    assert ma_feature([PREV, CUR], 1) == 0.0


def test_feature_ma_is_not_additive():
    # one coordinate's term rises to 1.5 while the other falls to 0.5
    prev = g([0, 0], [1, 1])
    cur = g([0, 0], [1.5, 0.5])
    assert ma_probit([prev, cur]) == pytest.approx(0.0, abs=1e-15)
    assert ma_feature([prev, cur], 0) + ma_feature([prev, cur], 1) == pytest.approx(0.5)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 5, 50]), st.integers(1, 6))
def test_closed_form_matches_entropy_plus_kl(seed, K, M):
    psis = random_walk(np.random.default_rng(seed), M + 1, K)
    a, b = ma_probit(psis), ma_generic(psis)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_ma_errors():
    with pytest.raises(ValueError):
        ma_probit([PREV])
    with pytest.raises(ValueError):
        ma_generic([PREV, g([0], [1])])
    with pytest.raises(IndexError):
        ma_feature([PREV, CUR], 2)


# -- window sum ----------------------------------------------------------------

def test_window_sum_examples():
    assert window_sum([0.3] * 6) == 0.0
    assert window_sum([0.0, 0.1, 0.3, 0.2]) == pytest.approx(0.2, abs=1e-15)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=80))
def test_window_sum_telescopes(values):
    assert abs(window_sum(values) - (values[-1] - values[0])) <= 1e-12


def test_window_sum_per_feature_axis():
    ma = np.array([[0.0, 1.0], [0.5, 0.5], [0.2, 2.0]])
    np.testing.assert_allclose(window_sum(ma), [0.2, 1.0])


# -- step ----------------------------------------------------------------------

def test_frozen_stream_is_silent():
    cfg = DetectorConfig(M=10, W=10, warmup_batches=0, per_feature=True)
    det = ERICS(cfg, record_trace=True)
    psi = g([0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
    det.run([psi] * 5000)
    assert det.alerts == []
    assert all(r.ma == 0.0 and r.window_sum == 0.0 for r in det.trace)


def test_alpha_decay_follows_product():
    beta = 1e-4
    cfg = DetectorConfig(M=5, W=5, beta=beta, warmup_batches=0)
    det = ERICS(cfg, alpha0=1.0, record_trace=True)
    det.run([PREV] * 600)
    alphas = np.array([r.alpha for r in det.trace])
    # oracle: cumulative product of (1 - beta * j), j = 1..n
    expected = np.cumprod(1.0 - beta * np.arange(1, 601))
    np.testing.assert_allclose(alphas, expected, rtol=1e-12)
    assert alphas[-1] < 1e-6
    assert np.all(np.diff(alphas) < 0)


def test_alpha_clamped_at_zero():
    cfg = DetectorConfig(M=2, W=2, beta=1.0, warmup_batches=0)
    det = ERICS(cfg, alpha0=1.0, record_trace=True)
    det.run([PREV] * 5)
    assert all(r.alpha >= 0.0 for r in det.trace)
    assert det.trace[0].alpha == 0.0


def test_synthetic_jump_fires_within_three_windows():
    K = 10
    base = np.zeros(K)
    psis = [g(base, np.ones(K))] * 500
    mu = base.copy()
    for _ in range(10):
        mu = mu.copy()
        mu[: K // 2] += 1.0
        psis.append(g(mu, np.ones(K)))
    psis += [psis[-1]] * 200
    det = ERICS(DetectorConfig(M=50, W=50, beta=1e-4, warmup_batches=0))
    det.run(psis)
    assert det.global_alerts
    assert 500 <= det.global_alerts[0].time_step < 500 + 3 * 50


def test_alert_resets_alpha_and_delta():
    cfg = DetectorConfig(M=1, W=1, warmup_batches=0)
    state = DetectorState.initial(cfg)
    step(state, cfg, PREV)
    raw, emitted = step(state, cfg, CUR)
    assert len(emitted) == 1
    alert = emitted[0]
    assert alert.window_sum > alert.alpha_at_fire
    assert state.alpha == alert.window_sum == pytest.approx(0.5)
    assert state.delta_drift == 1


def test_warmup_suppresses_but_still_resets():
    cfg = DetectorConfig(M=1, W=1, warmup_batches=5)
    state = DetectorState.initial(cfg)
    step(state, cfg, PREV)
    raw, emitted = step(state, cfg, CUR)
    assert raw and not emitted
    assert state.alpha == pytest.approx(0.5)
    assert state.delta_drift == 1


def test_state_invariants_on_random_stream():
    rng = np.random.default_rng(11)
    cfg = DetectorConfig(M=8, W=6, beta=1e-3, warmup_batches=0, per_feature=True)
    state = DetectorState.initial(cfg)
    for psi in random_walk(rng, 400, 4, scale=0.3):
        step(state, cfg, psi)
        assert state.alpha >= 0 and state.delta_drift >= 1
        assert min(state.ma_history) >= 0
        assert np.all(state.feature_alpha >= 0) and np.all(state.feature_delta >= 1)


def test_dimension_change_rejected():
    det = ERICS(DetectorConfig())
    det.update(PREV)
    with pytest.raises(ValueError):
        det.update(g([0.0], [1.0]))


@pytest.mark.parametrize("kwargs", [dict(M=0), dict(W=0), dict(beta=-0.1), dict(beta=1.5), dict(warmup_batches=-1)])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        DetectorConfig(**kwargs)


# -- properties ----------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_alerts_are_model_aware(seed):
    rng = np.random.default_rng(seed)
    M, W = 5, 4
    # mostly frozen snapshots with a few random moves
    psis, cur = [], g(np.zeros(3), np.ones(3))
    for t in range(300):
        if rng.random() < 0.03:
            cur = g(cur.mu + rng.normal(0, 1, 3), cur.sigma2 * np.exp(rng.normal(0, 0.3, 3)))
        psis.append(cur)
    det = ERICS(DetectorConfig(M=M, W=W, beta=1e-2, warmup_batches=0))
    det.run(psis)
    for a in det.alerts:
        lo = max(1, a.time_step - (M + W))
        assert any(kl_divergence(psis[i], psis[i - 1]) > 0 for i in range(lo, a.time_step + 1))


def test_per_feature_explainability():
    K, k = 4, 2
    rng = np.random.default_rng(0)
    psis, mu = [], np.zeros(K)
    for t in range(400):
        if t >= 200:
            mu = mu.copy()
            mu[k] += rng.normal(0, 0.5)
        psis.append(g(mu, np.ones(K)))
    det = ERICS(DetectorConfig(M=10, W=10, per_feature=True, warmup_batches=0))
    det.run(psis)
    scopes = {a.scope for a in det.feature_alerts()}
    assert scopes == {k}
    assert all(a.time_step >= 200 for a in det.alerts)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_deterministic(seed):
    psis = random_walk(np.random.default_rng(seed), 120, 3, scale=0.2)
    cfg = DetectorConfig(M=5, W=5, beta=1e-3, per_feature=True, warmup_batches=3)
    assert ERICS(cfg).run(psis) == ERICS(cfg).run(psis)


def test_alert_json_round_trip():
    for a in (DriftAlert(12, "global", 0.3, 0.1), DriftAlert(4, 7, 1e-9, 0.0)):
        line = a.to_json()
        assert json.loads(line)["time_step"] == a.time_step
        assert DriftAlert.from_json(line) == a


def test_trace_records_post_step_alpha():
    cfg = DetectorConfig(M=1, W=1, warmup_batches=0)
    det = ERICS(cfg, record_trace=True)
    det.run([PREV, CUR, CUR])
    assert [r.alert for r in det.trace] == [False, True, False]
    assert det.trace[1].alpha == pytest.approx(0.5)
    assert det.trace[2].alpha == pytest.approx(0.5 * (1 - 1e-4))
    assert math.isclose(det.trace[1].window_sum, 0.5)
