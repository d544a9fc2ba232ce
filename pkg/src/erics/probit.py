"""Online Probit classifier with independent Gaussian weights.

Weights are distributed as ``theta_k ~ N(mu_k, sigma_k**2)``. Integrating them
out of ``P(y | x, theta) = Phi(y * theta @ x)`` gives the marginal likelihood

    P(y | x; mu, sigma) = Phi(y * mu @ x / sqrt(1 + sum_k sigma_k**2 * x_k**2))

which is maximised per batch by gradient ascent on ``(mu, sigma)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .distributions import GaussianParamDist

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class LabeledBatch:
    """A mini-batch of observations with labels in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("X must be a non-empty 2-d array")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be -1 or +1")
        self.X = X
        self.y = y

    def __iter__(self):
        return iter((self.X, self.y))

    def __len__(self):
        return self.X.shape[0]


def _as_2d(X, K):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if K > 1 or X.size == 1 else X[:, None]
    if X.shape[1] != K:
        raise ValueError(f"expected {K} feature columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X


def log_likelihood(mu, sigma, X, y) -> float:
    """Batch-mean marginal log-likelihood."""
    s = np.sqrt(1.0 + (X * X) @ (sigma * sigma))
    z = y * (X @ mu) / s
    return float(np.mean(log_ndtr(z)))


def gradients(mu, sigma, X, y):
    """Analytic gradient of :func:`log_likelihood` w.r.t. ``mu`` and ``sigma``."""
    X2 = X * X
    s2 = 1.0 + X2 @ (sigma * sigma)
    s = np.sqrt(s2)
    z = y * (X @ mu) / s
    # inverse Mills ratio phi(z) / Phi(z), computed in log space for large |z|
    ratio = np.exp(-0.5 * z * z - _LOG_SQRT_2PI - log_ndtr(z))
    n = X.shape[0]
    grad_mu = (ratio * y / s) @ X / n
    grad_sigma = sigma * ((-ratio * z / s2) @ X2) / n
    return grad_mu, grad_sigma


class ProbitModel:
    """Probit model whose weights follow a diagonal Gaussian.

    Parameters
    ----------
    n_features : int
        Number of weights ``K`` (one per input column).
    epochs : int
        Gradient steps per call to :meth:`partial_fit`.
    lr_mu, lr_sigma : float
        Step sizes for the means and the standard deviations.
    """

    def __init__(self, n_features: int, epochs: int = 10, lr_mu: float = 0.01, lr_sigma: float = 0.01):
        if n_features < 1:
            raise ValueError("n_features must be positive")
        if epochs < 1:
            raise ValueError("epochs must be positive")
        if lr_mu <= 0 or lr_sigma <= 0:
            raise ValueError("learning rates must be positive")
        self.K = int(n_features)
        self.epochs = int(epochs)
        self.lr_mu = float(lr_mu)
        self.lr_sigma = float(lr_sigma)
        self.mu = np.zeros(self.K)
        self.sigma = np.ones(self.K)
        self.n_rejected = 0

    @property
    def dist(self) -> GaussianParamDist:
        return GaussianParamDist(self.mu, self.sigma * self.sigma)

    def snapshot(self) -> GaussianParamDist:
        """Immutable copy of the current parameter distribution."""
        return self.dist

    def decision_function(self, X) -> np.ndarray:
        X = _as_2d(X, self.K)
        return (X @ self.mu) / np.sqrt(1.0 + (X * X) @ (self.sigma * self.sigma))

    def predict_proba(self, X) -> np.ndarray:
        """Return ``P(y = +1 | x)`` for every row of ``X``."""
        return ndtr(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1.0, -1.0)

    def partial_fit(self, X, y=None) -> "ProbitModel":
        """Update the weights on one batch.

        ``X`` may also be a :class:`LabeledBatch`. If any gradient turns out
        non-finite, the whole batch is rejected and the previous parameters kept.
        """
        batch = X if isinstance(X, LabeledBatch) else LabeledBatch(X, y)
        Xb, yb = batch.X, batch.y
        if Xb.shape[1] != self.K:
            raise ValueError(f"expected {self.K} feature columns, got {Xb.shape[1]}")
        mu, sigma = self.mu.copy(), self.sigma.copy()
        for _ in range(self.epochs):
            g_mu, g_sigma = gradients(mu, sigma, Xb, yb)
            if not (np.all(np.isfinite(g_mu)) and np.all(np.isfinite(g_sigma))):
                self.n_rejected += 1
                logger.warning("non-finite gradient, batch skipped (%d so far)", self.n_rejected)
                return self
            mu += self.lr_mu * g_mu
            sigma += self.lr_sigma * g_sigma
            sigma = np.maximum(np.abs(sigma), SIGMA_FLOOR)
        self.mu, self.sigma = mu, sigma
        return self
