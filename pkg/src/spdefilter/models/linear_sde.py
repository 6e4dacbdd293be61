"""Scalar Ornstein-Uhlenbeck model dX = -A X dt + D dW, midpoint scheme.

One substep with effective increment xi = dW + lam*dt solves

    (1 + A dt/2) x_next = (1 - A dt/2) x + D xi

The scheme preserves the continuous stationary law N(0, D^2/(2A)) exactly:
with r = (1-A dt/2)/(1+A dt/2), r^2 v + (D/(1+A dt/2))^2 dt = v holds
identically for v = D^2/(2A). With a linear unit observation the exact
filtering posterior is conjugate Gaussian, so this model doubles as the
ground-truth check for every filter.
"""

from dataclasses import dataclass

import numpy as np

from .base import ForwardModel

__all__ = ["LinearSdeParams", "LinearSde", "exact_gaussian_posterior"]


@dataclass(frozen=True)
class LinearSdeParams:
    drift: float = 1.0       # A > 0, mean reversion rate
    noise: float = 1.0       # D, diffusion amplitude
    dt: float = 0.1

    def __post_init__(self):
        if self.drift <= 0 or self.noise <= 0 or self.dt <= 0:
            raise ValueError("drift, noise and dt must all be positive")
        if self.drift * self.dt >= 2.0:
            raise ValueError("need drift*dt < 2 for a positive midpoint factor")


class LinearSde(ForwardModel):

    n_dof = 1
    n_noise = 1

    def __init__(self, params: LinearSdeParams = LinearSdeParams()):
        self.params = params
        self.dt = params.dt
        half = 0.5 * params.drift * params.dt
        self._ap = 1.0 + half
        self._b = 1.0 - half
        self.obs_matrix = np.array([[1.0]])

    @property
    def decay(self):
        """One-step multiplier (1 - A dt/2)/(1 + A dt/2)."""
        return self._b / self._ap

    def step_with_cache(self, x, xi):
        x_next = (self._b * x + self.params.noise * xi) / self._ap
        return x_next, None

    def vjp_state(self, cache, gbar):
        return (self._b / self._ap) * gbar

    def vjp_noise(self, cache, gbar):
        return (self.params.noise / self._ap) * gbar

    def stationary_variance(self) -> float:
        p = self.params
        return p.noise ** 2 / (2.0 * p.drift)

    def sample_stationary(self, stream: np.random.Generator, n: int) -> np.ndarray:
        return stream.normal(scale=np.sqrt(self.stationary_variance()), size=n)


def exact_gaussian_posterior(prior_mean: float, prior_var: float, y: float,
                    r_var: float):
    """Conjugate Gaussian update for a unit observation operator."""
    if prior_var <= 0 or r_var <= 0:
        raise ValueError("variances must be positive")
    post_var = prior_var * r_var / (prior_var + r_var)
    post_mean = post_var * (prior_mean / prior_var + y / r_var)
    return post_mean, post_var
