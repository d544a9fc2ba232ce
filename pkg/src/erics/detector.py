"""Drift detection on a stream of parameter-distribution snapshots.

At every time step the detector receives the current parameter distribution
``psi_t`` and

1. decays the threshold, ``alpha <- alpha - alpha * beta * delta``,
2. increments ``delta`` (time steps since the last alert),
3. updates the moving average ``MA_t`` of ``|dH + KL|`` over the last ``M``
   consecutive snapshot pairs,
4. sums the MA increments over the last ``W`` steps, which telescopes to
   ``MA_t - MA_{t-W}``,
5. raises an alert when that sum exceeds ``alpha`` and then resets
   ``alpha`` to the sum and ``delta`` to 1.

With ``per_feature=True`` steps 1-5 also run for every parameter separately.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .distributions import (
    GaussianParamDist,
    differential_entropy,
    kl_divergence,
    per_param_kl_terms,
)

GLOBAL = "global"


@dataclass(frozen=True)
class DetectorConfig:
    M: int = 50
    W: int = 50
    beta: float = 0.0001
    per_feature: bool = False
    warmup_batches: int = 80

    def __post_init__(self):
        if self.M < 1 or self.W < 1:
            raise ValueError("M and W must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.warmup_batches < 0:
            raise ValueError("warmup_batches must be non-negative")


@dataclass(frozen=True)
class DriftAlert:
    time_step: int
    scope: Union[str, int]  # "global" or the feature index
    window_sum: float
    alpha_at_fire: float

    @property
    def is_global(self) -> bool:
        return self.scope == GLOBAL

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "DriftAlert":
        return cls(**json.loads(line))


def _check_sequence(psis):
    if len(psis) < 2:
        raise ValueError("need at least two snapshots (M + 1 with M >= 1)")
    K = psis[0].K
    if any(p.K != K for p in psis):
        raise ValueError("all snapshots must have the same dimension")
    return len(psis) - 1


def ma_generic(psis: Sequence[GaussianParamDist]) -> float:
    """Moving average of ``|h(psi_i) - h(psi_{i-1}) + KL(psi_i || psi_{i-1})|``.

    ``psis`` is ordered oldest to newest and holds ``M + 1`` snapshots.
    Slow reference implementation used to check :func:`ma_probit`.
    """
    M = _check_sequence(psis)
    total = 0.0
    for prev, cur in zip(psis[:-1], psis[1:]):
        total += abs(differential_entropy(cur) - differential_entropy(prev) + kl_divergence(cur, prev))
    return total / M


def pair_term(cur: GaussianParamDist, prev: GaussianParamDist) -> float:
    """``|sum_k (s2_ik + (m_{i-1,k} - m_ik)^2) / s2_{i-1,k} - K|``, one MA summand times two."""
    return abs(float(np.sum(per_param_kl_terms(cur, prev))) - cur.K)


def ma_probit(psis: Sequence[GaussianParamDist]) -> float:
    """Closed-form moving average for diagonal Gaussians, linear in ``K``."""
    M = _check_sequence(psis)
    return sum(pair_term(cur, prev) for prev, cur in zip(psis[:-1], psis[1:])) / (2.0 * M)


def ma_feature(psis: Sequence[GaussianParamDist], k: int) -> float:
    """Moving average restricted to parameter ``k``."""
    M = _check_sequence(psis)
    if not 0 <= k < psis[0].K:
        raise IndexError(f"feature index {k} out of range for K={psis[0].K}")
    total = 0.0
    for prev, cur in zip(psis[:-1], psis[1:]):
        d = prev.mu[k] - cur.mu[k]
        total += abs((cur.sigma2[k] + d * d) / prev.sigma2[k] - 1.0)
    return total / (2.0 * M)


def window_sum(ma_history) -> float:
    """Sum of the ``W`` successive MA increments in ``ma_history`` (length ``W + 1``).

    Works on the last axis, so a ``(W + 1, K)`` array gives one sum per feature.
    """
    ma = np.asarray(ma_history, dtype=float)
    if ma.shape[0] < 2:
        raise ValueError("need at least two MA values")
    return np.sum(np.diff(ma, axis=0), axis=0)


@dataclass
class DetectorState:
    """Rolling state of the detector.

    Rather than the last ``M + 1`` snapshots, the state keeps the newest
    snapshot plus the ``M`` pair terms derived from them, which is all the
    moving average needs. Buffers start filled with zeros, i.e. missing
    history is treated as "no change".
    """

    M: int
    W: int
    alpha: float = 0.0
    alpha0: float = 0.0
    delta_drift: int = 1
    t: int = -1
    last_psi: Optional[GaussianParamDist] = None
    pair_terms: deque = field(default=None)
    ma_history: deque = field(default=None)
    # per-feature state; arrays of shape (K,) or buffers of such arrays
    feature_pair_terms: Optional[deque] = None
    feature_ma_history: Optional[deque] = None
    feature_alpha: Optional[np.ndarray] = None
    feature_delta: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.pair_terms is None:
            self.pair_terms = deque([0.0] * self.M, maxlen=self.M)
        if self.ma_history is None:
            self.ma_history = deque([0.0] * (self.W + 1), maxlen=self.W + 1)

    @classmethod
    def initial(cls, cfg: DetectorConfig, alpha0: float = 0.0) -> "DetectorState":
        if alpha0 < 0:
            raise ValueError("alpha0 must be non-negative")
        return cls(M=cfg.M, W=cfg.W, alpha=float(alpha0), alpha0=float(alpha0))

    @property
    def ma(self) -> float:
        return self.ma_history[-1]

    def _init_features(self, K: int):
        zeros = np.zeros(K)
        self.feature_pair_terms = deque([zeros] * self.M, maxlen=self.M)
        self.feature_ma_history = deque([zeros] * (self.W + 1), maxlen=self.W + 1)
        self.feature_alpha = np.full(K, self.alpha0)
        self.feature_delta = np.ones(K, dtype=np.int64)


def _decay(alpha, beta, delta):
    # clamp: beta * delta >= 1 would otherwise push alpha below zero
    return np.maximum(alpha - alpha * beta * delta, 0.0)


def step(state: DetectorState, cfg: DetectorConfig, psi: GaussianParamDist):
    """Advance the detector by one time step.

    Returns ``(raw_alerts, emitted_alerts)``: every threshold crossing, and
    the subset reported to the caller (crossings during the warm-up phase
    still reset the thresholds but are not emitted).
    """
    prev = state.last_psi if state.last_psi is not None else psi
    if prev.K != psi.K:
        raise ValueError(f"snapshot dimension changed from {prev.K} to {psi.K}")
    state.t += 1
    t = state.t
    raw = []

    ratios = per_param_kl_terms(psi, prev)

    state.alpha = float(_decay(state.alpha, cfg.beta, state.delta_drift))
    state.delta_drift += 1
    state.pair_terms.append(abs(float(np.sum(ratios)) - psi.K))
    state.ma_history.append(sum(state.pair_terms) / (2.0 * cfg.M))
    s = state.ma_history[-1] - state.ma_history[0]
    if s > state.alpha:
        raw.append(DriftAlert(t, GLOBAL, float(s), state.alpha))
        state.alpha = float(s)
        state.delta_drift = 1

    if cfg.per_feature:
        if state.feature_alpha is None:
            state._init_features(psi.K)
        state.feature_alpha = _decay(state.feature_alpha, cfg.beta, state.feature_delta)
        state.feature_delta += 1
        state.feature_pair_terms.append(np.abs(ratios - 1.0))
        state.feature_ma_history.append(np.sum(state.feature_pair_terms, axis=0) / (2.0 * cfg.M))
        s_k = state.feature_ma_history[-1] - state.feature_ma_history[0]
        fired = np.flatnonzero(s_k > state.feature_alpha)
        for k in fired:
            raw.append(DriftAlert(t, int(k), float(s_k[k]), float(state.feature_alpha[k])))
        state.feature_alpha[fired] = s_k[fired]
        state.feature_delta[fired] = 1

    state.last_psi = psi
    emitted = raw if t >= cfg.warmup_batches else []
    return raw, emitted


@dataclass
class TraceRow:
    t: int
    ma: float
    window_sum: float
    alpha: float
    alert: bool


class ERICS:
    """Stateful drift detector fed with one parameter snapshot per time step.

    >>> det = ERICS(DetectorConfig(M=5, W=5, warmup_batches=0))
    >>> alerts = det.update(model.snapshot())  # doctest: +SKIP
    """

    def __init__(self, config: Optional[DetectorConfig] = None, alpha0: float = 0.0, record_trace: bool = False):
        self.config = config or DetectorConfig()
        self.state = DetectorState.initial(self.config, alpha0)
        self.alerts: list[DriftAlert] = []
        self.record_trace = record_trace
        self.trace: list[TraceRow] = []
        self.feature_trace: list[tuple] = []

    def update(self, psi: GaussianParamDist) -> list[DriftAlert]:
        """Consume ``psi_t``; return the alerts emitted at this step."""
        raw, emitted = step(self.state, self.config, psi)
        self.alerts.extend(emitted)
        if self.record_trace:
            st = self.state
            s = st.ma_history[-1] - st.ma_history[0]
            self.trace.append(TraceRow(st.t, st.ma, s, st.alpha, any(a.is_global for a in emitted)))
            if self.config.per_feature:
                fired = {a.scope for a in emitted if not a.is_global}
                ma_k = st.feature_ma_history[-1]
                s_k = ma_k - st.feature_ma_history[0]
                for k in range(psi.K):
                    self.feature_trace.append((st.t, k, ma_k[k], s_k[k], st.feature_alpha[k], k in fired))
        return emitted

    def run(self, psis) -> list[DriftAlert]:
        for psi in psis:
            self.update(psi)
        return self.alerts

    @property
    def global_alerts(self) -> list[DriftAlert]:
        return [a for a in self.alerts if a.is_global]

    def feature_alerts(self, k: Optional[int] = None) -> list[DriftAlert]:
        return [a for a in self.alerts if not a.is_global and (k is None or a.scope == k)]
