"""Observation likelihood and the change-of-measure penalty.

Weights are carried in log space as -phi_hat, where

    phi_hat = 0.5*||h(x) - y||^2 / r_var                (data misfit)
            + sum_n (0.5*|lam_n|^2*dt + lam_n . dW_n)   (control penalty)

The additive normalising constant of the Gaussian likelihood is dropped
consistently everywhere. The penalty is the negative log of the
change-of-measure factor for a path driven by dW + lam*dt, so weighting by
exp(-penalty) makes controlled ensembles unbiased against the uncontrolled
model: the law of the effective increment xi = dW + lam*dt under the control
is N(lam*dt, dt), and log[N(xi; 0, dt) / N(xi; lam*dt, dt)] = -lam.dW
- 0.5*|lam|^2*dt exactly.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["Observation", "neg_log_likelihood", "girsanov_penalty"]


@dataclass(frozen=True)
class Observation:
    """One window's observation: values, variance, and where they were taken."""

    y: np.ndarray
    obs_variance: float
    window_index: int = 0
    obs_points: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, float)))
        if self.obs_variance <= 0.0:
            raise ValueError("obs_variance must be positive")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("observation values must be finite")


def neg_log_likelihood(hx: np.ndarray, y: np.ndarray, r_var: float) -> float:
    """Gaussian data misfit 0.5*||hx - y||^2 / r_var (constant dropped)."""
    if r_var <= 0.0:
        raise ValueError(f"observation variance must be positive, got {r_var}")
    hx = np.atleast_1d(np.asarray(hx, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if hx.shape != y.shape:
        raise ValueError(f"length mismatch: h(x) {hx.shape} vs y {y.shape}")
    diff = hx - y
    return 0.5 * float(diff @ diff) / r_var


def girsanov_penalty(d_lambda: np.ndarray, d_w: np.ndarray, dt: float) -> float:
    """Control penalty sum_n (0.5*|lam_n|^2*dt + lam_n . dW_n).

    d_lambda and d_w are (n_steps, n_noise) with matching shapes; rows that
    carry zero control contribute exactly zero.
    """
    lam = np.asarray(d_lambda, dtype=float)
    dw = np.asarray(d_w, dtype=float)
    if lam.shape != dw.shape:
        raise ValueError(f"shape mismatch: control {lam.shape} vs noise {dw.shape}")
    return float(0.5 * dt * np.sum(lam * lam) + np.sum(lam * dw))
