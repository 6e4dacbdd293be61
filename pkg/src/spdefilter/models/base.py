"""Forward-model interface shared by all filters.

A model advances a state through one assimilation window of N_s implicit
substeps, each driven by the effective increment xi_n = dW_n + lam_n*dt,
and exposes the pieces needed for reverse-mode differentiation of the
weight exponent phi_hat through that recurrence:

    step_with_cache  one substep plus whatever the backward sweep needs
    vjp_state        (d x_next / d x_prev)^T applied to a cotangent
    vjp_noise        (d x_next / d xi)^T applied to a cotangent

The adjoint here is hand-derived. Writing step n as the implicit relation
R_n(x_{n-1}, x_n, xi_n) = 0 and J = Phi(x_end), the backward sweep carries
gbar_n = dJ/dx_n: solve A_n^T mu = gbar_n with A_n = dR_n/dx_n, then
dJ/dxi_n = -C_n^T mu (C_n = dR_n/dxi_n) and gbar_{n-1} = -B_n^T mu
(B_n = dR_n/dx_{n-1}). Each model implements the two vjp hooks from its
own A, B, C. All substep states are stored on the forward sweep (N_s is
small), never recomputed.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import PropagationError
from ..likelihood import Observation, girsanov_penalty, neg_log_likelihood

__all__ = [
    "ModelState",
    "NoiseWindow",
    "ControlWindow",
    "ForwardModel",
    "propagate",
    "phi_hat_of_window",
    "grad_phi_hat",
]


@dataclass
class ModelState:
    """State vector plus how many substeps it has been advanced."""

    dof: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        self.dof = np.atleast_1d(np.asarray(self.dof, dtype=float))

    def copy(self):
        return ModelState(self.dof.copy(), self.time_index)


@dataclass
class NoiseWindow:
    """Brownian increments for one window: (N_s, N_noise), N(0, dt) entries.

    Row n-1 is the increment consumed at substep n; rows not yet uncovered
    by the sequential nudge stay exactly zero.
    """

    d_w: np.ndarray
    dt: float

    def __post_init__(self):
        self.d_w = np.atleast_2d(np.asarray(self.d_w, dtype=float))
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @classmethod
    def zeros(cls, n_steps, n_noise, dt):
        return cls(np.zeros((n_steps, n_noise)), dt)

    @property
    def n_steps(self):
        return self.d_w.shape[0]

    def copy(self):
        return NoiseWindow(self.d_w.copy(), self.dt)


@dataclass
class ControlWindow:
    """Piecewise-constant control, one (N_noise,) row per substep."""

    d_lambda: np.ndarray

    def __post_init__(self):
        self.d_lambda = np.atleast_2d(np.asarray(self.d_lambda, dtype=float))

    @classmethod
    def zeros(cls, n_steps, n_noise):
        return cls(np.zeros((n_steps, n_noise)))

    def copy(self):
        return ControlWindow(self.d_lambda.copy())


class ForwardModel:
    """Interface every concrete model implements.

    Required attributes: n_dof, n_noise, dt, obs_matrix (n_obs x n_dof,
    observation operator h(x) = H x). Required methods below; step() has a
    default in terms of step_with_cache.
    """

    n_dof = None
    n_noise = None
    dt = None
    obs_matrix = None

    def step_with_cache(self, x: np.ndarray, xi: np.ndarray):
        raise NotImplementedError

    def step(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return self.step_with_cache(x, xi)[0]

    def vjp_state(self, cache, gbar: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vjp_noise(self, cache, gbar: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vjp_both(self, cache, gbar: np.ndarray):
        """(dJ/dxi, gbar_prev) in one call; override to share the inner solve."""
        return self.vjp_noise(cache, gbar), self.vjp_state(cache, gbar)

    def observe(self, dof: np.ndarray) -> np.ndarray:
        return self.obs_matrix @ dof


def _check_shapes(model, w, c):
    if w.d_w.shape != c.d_lambda.shape:
        raise ValueError(f"noise {w.d_w.shape} and control {c.d_lambda.shape} "
                         "shapes differ")
    if w.d_w.shape[1] != model.n_noise:
        raise ValueError(f"window has {w.d_w.shape[1]} noise columns, model "
                         f"expects {model.n_noise}")


def propagate(model, x0: ModelState, w: NoiseWindow, c: ControlWindow) -> ModelState:
    """Advance x0 through all substeps of the window. Pure and deterministic."""
    _check_shapes(model, w, c)
    dt = w.dt
    x = x0.dof
    for n in range(w.n_steps):
        xi = w.d_w[n] + c.d_lambda[n] * dt
        try:
            x = model.step(x, xi)
        except Exception as exc:  # noqa: BLE001 - annotate with substep, re-raise
            raise PropagationError(n + 1, str(exc)) from exc
    return ModelState(x, x0.time_index + w.n_steps)


def _forward_sweep(model, x0_dof, d_w, d_lambda, dt, first_substep=1):
    """Run substeps, returning (states, caches). states[k] is after k steps."""
    x = np.asarray(x0_dof, dtype=float)
    states = [x]
    caches = []
    for n in range(d_w.shape[0]):
        xi = d_w[n] + d_lambda[n] * dt
        try:
            x, cache = model.step_with_cache(x, xi)
        except Exception as exc:  # noqa: BLE001
            raise PropagationError(first_substep + n, str(exc)) from exc
        states.append(x)
        caches.append(cache)
    return states, caches


def _phi_of_end(model, x_end, obs: Observation) -> float:
    return neg_log_likelihood(model.observe(x_end), obs.y, obs.obs_variance)


def phi_hat_of_window(model, x0: ModelState, w: NoiseWindow, c: ControlWindow,
                      obs: Observation) -> float:
    """Weight exponent: data misfit at the window end plus control penalty."""
    x_end = propagate(model, x0, w, c)
    return _phi_of_end(model, x_end.dof, obs) + girsanov_penalty(c.d_lambda, w.d_w, w.dt)


def _grad_phi_rows(model, x0_dof, d_w, d_lambda, dt, obs, rows, first_substep=1):
    """phi_hat and its gradient w.r.t. the requested control rows (0-based).

    One forward sweep with caches, one backward sweep. Returns
    (phi_hat, {row: gradient vector}). The penalty's direct derivative
    lam_n*dt + dW_n is included.
    """
    states, caches = _forward_sweep(model, x0_dof, d_w, d_lambda, dt, first_substep)
    x_end = states[-1]
    misfit = _phi_of_end(model, x_end, obs)
    phi = misfit + girsanov_penalty(d_lambda, d_w, dt)

    hx = model.observe(x_end)
    gbar = model.obs_matrix.T @ ((hx - obs.y) / obs.obs_variance)
    want = set(rows)
    last = min(want)
    grads = {}
    for n in range(d_w.shape[0] - 1, -1, -1):
        if n in want:
            if n == last:
                dj_dxi = model.vjp_noise(caches[n], gbar)
            else:
                dj_dxi, gbar = model.vjp_both(caches[n], gbar)
            grads[n] = dt * dj_dxi + dt * d_lambda[n] + d_w[n]
            if n == last:
                break
        else:
            gbar = model.vjp_state(caches[n], gbar)
    return phi, grads


def grad_phi_hat(model, x0: ModelState, w: NoiseWindow, c: ControlWindow,
                 obs: Observation, n: int) -> np.ndarray:
    """Exact gradient of phi_hat_of_window w.r.t. control row n (1-based)."""
    _check_shapes(model, w, c)
    if not 1 <= n <= w.n_steps:
        raise ValueError(f"substep {n} outside [1, {w.n_steps}]")
    _, grads = _grad_phi_rows(model, x0.dof, w.d_w, c.d_lambda, w.dt, obs, [n - 1])
    return grads[n - 1]
