"""Diagonal Gaussian parameter distributions.

All quantities are in nats. The KL divergence is always taken as
``D_KL[newer || older]``: the first argument is the more recent snapshot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)

# Variances are clamped to this floor before any log or division.
VARIANCE_FLOOR = 1e-12


class _FloorCounter:
    """Counts how often the variance floor had to be applied."""

    def __init__(self):
        self.count = 0

    def reset(self):
        self.count = 0


floor_hits = _FloorCounter()


def _floored(sigma2: np.ndarray) -> np.ndarray:
    low = sigma2 < VARIANCE_FLOOR
    if low.any():
        floor_hits.count += int(low.sum())
        return np.maximum(sigma2, VARIANCE_FLOOR)
    return sigma2


@dataclass(frozen=True, eq=False)
class GaussianParamDist:
    """Independent normal distribution over ``K`` model parameters.

    The arrays are copied on construction and marked read-only, so a
    snapshot can be shared freely.
    """

    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).ravel()
        sigma2 = np.array(self.sigma2, dtype=float).ravel()
        if mu.size == 0:
            raise ValueError("distribution needs at least one parameter")
        if mu.shape != sigma2.shape:
            raise ValueError(f"mu has {mu.size} entries but sigma2 has {sigma2.size}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma2))):
            raise ValueError("mu and sigma2 must be finite")
        if np.any(sigma2 <= 0):
            raise ValueError("all variances must be strictly positive")
        mu.setflags(write=False)
        sigma2.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def K(self) -> int:
        return self.mu.size

    @classmethod
    def from_sigma(cls, mu, sigma) -> "GaussianParamDist":
        sigma = np.asarray(sigma, dtype=float)
        return cls(mu, sigma * sigma)

    def __eq__(self, other):
        if not isinstance(other, GaussianParamDist):
            return NotImplemented
        return np.array_equal(self.mu, other.mu) and np.array_equal(self.sigma2, other.sigma2)

    def __hash__(self):
        return hash((self.mu.tobytes(), self.sigma2.tobytes()))

    def __repr__(self):
        return f"GaussianParamDist(K={self.K}, mu={self.mu!r}, sigma2={self.sigma2!r})"


def _check_pair(p: GaussianParamDist, q: GaussianParamDist):
    if p.K != q.K:
        raise ValueError(f"dimension mismatch: {p.K} vs {q.K}")


def differential_entropy(d: GaussianParamDist) -> float:
    s2 = _floored(d.sigma2)
    return 0.5 * (d.K + d.K * LOG_2PI + float(np.sum(np.log(s2))))


def per_param_kl_terms(p: GaussianParamDist, q: GaussianParamDist) -> np.ndarray:
    """Per-coordinate ratio terms ``(sigma2_p + (mu_q - mu_p)**2) / sigma2_q``.

    ``p`` is the newer distribution, ``q`` the older one.
    """
    _check_pair(p, q)
    diff = q.mu - p.mu
    return (_floored(p.sigma2) + diff * diff) / _floored(q.sigma2)


def kl_divergence(p: GaussianParamDist, q: GaussianParamDist) -> float:
    """``D_KL[p || q]`` for diagonal Gaussians, ``p`` being the newer snapshot."""
    terms = per_param_kl_terms(p, q)
    log_det_ratio = float(np.sum(np.log(_floored(q.sigma2))) - np.sum(np.log(_floored(p.sigma2))))
    return 0.5 * (float(np.sum(terms)) - p.K + log_det_ratio)
