"""Stochastic Kuramoto-Sivashinsky model on periodic P2 elements.

Continuous equation on [0, L], periodic:

    du + (alpha u_xxxx + beta u_xx + gamma u u_x) dt = c dW

with cellwise-constant-in-space white noise. Testing against v and
integrating by parts, one implicit-midpoint substep with effective
increment xi = dW + lam*dt solves

    M (u' - u) + dt [alpha A u_mid - beta S u_mid + N(u_mid)] = c P xi

for u', where u_mid = (u + u')/2, M is the mass matrix, A the
interior-penalty fourth-order form, S the (u_x, v_x) stiffness matrix,
N(w) the convection vector with entries -int (gamma/2) w^2 v_x dx, and P
the noise projection. Note the sign split: the fourth-order term is
stabilising, the second-order term enters anti-diffusively, which is what
drives the low-wavenumber instability (growth rate beta k^2 - alpha k^4).

The substep residual R(u, u', xi) gives the adjoint blocks directly:
dR/du' = M + (dt/2) G'(u_mid) =: J, dR/du = J - 2M, dR/dxi = -c P, with
G'(w) = alpha A - beta S + N'(w). The Newton iteration reuses J.
"""

from dataclasses import dataclass

import numpy as np

from .base import ForwardModel, ModelState
from .p2periodic import (P2PeriodicMesh, assemble_cip, assemble_mass,
                         assemble_stiffness, noise_projection_matrix,
                         nonlinear_form, nonlinear_jacobian,
                         point_evaluation_matrix)

__all__ = ["SksParams", "SksModel", "u_initial", "sks_step", "spin_up_initial"]


@dataclass(frozen=True)
class SksParams:
    length: float = 4.0
    n_cells: int = 100
    alpha: float = 0.03       # fourth-order (stabilising) coefficient
    beta: float = 1.1         # anti-diffusion coefficient
    gamma: float = 1.0        # advection coefficient
    noise_amp: float = 2.5    # c, noise amplitude
    eta: float = 5.0          # interior penalty weight
    dt: float = 0.01
    newton_tol: float = 1e-9
    newton_max_iter: int = 30
    n_obs: int = 10
    obs_variance: float = 2.5

    def __post_init__(self):
        if self.n_cells < 4:
            raise ValueError("n_cells must be at least 4")
        if self.eta <= 0 or self.dt <= 0 or self.newton_tol <= 0:
            raise ValueError("eta, dt and newton_tol must be positive")


def u_initial(x):
    """Spin-up seed profile: two positive sech-type bumps."""
    x = np.asarray(x, dtype=float)
    return (0.4 / (np.exp(x - 403.0 / 15.0) + np.exp(-x + 403.0 / 15.0))
            + 1.0 / (np.exp(x - 203.0 / 15.0) + np.exp(-x + 203.0 / 15.0)))


class SksModel(ForwardModel):

    def __init__(self, params: SksParams = SksParams()):
        self.params = params
        self.dt = params.dt
        self.mesh = P2PeriodicMesh(params.length, params.n_cells)
        self.n_dof = self.mesh.n_dof
        self.n_noise = params.n_cells

        self.mass = assemble_mass(self.mesh)
        self.stiffness = assemble_stiffness(self.mesh)
        self.cip = assemble_cip(self.mesh, params.eta)
        self.noise_proj = noise_projection_matrix(self.mesh)
        # constant part of G'(w); only the convection block changes with w
        self._linear_part = params.alpha * self.cip - params.beta * self.stiffness

        obs_x = np.arange(params.n_obs) * params.length / params.n_obs
        self.obs_matrix = point_evaluation_matrix(self.mesh, obs_x)
        self.obs_points = obs_x

    def _g(self, w):
        return self._linear_part @ w + nonlinear_form(w, self.mesh, self.params.gamma)

    def _g_jac(self, w):
        return self._linear_part + nonlinear_jacobian(w, self.mesh, self.params.gamma)

    def step_with_cache(self, x, xi):
        p = self.params
        rhs = p.noise_amp * (self.noise_proj @ xi)
        u = np.asarray(x, dtype=float)
        u_next = u.copy()
        jac = None
        for _ in range(p.newton_max_iter):
            mid = 0.5 * (u + u_next)
            resid = self.mass @ (u_next - u) + p.dt * self._g(mid) - rhs
            norm = np.linalg.norm(resid)
            jac = self.mass + (0.5 * p.dt) * self._g_jac(mid)
            if norm <= p.newton_tol:
                return u_next, jac
            u_next -= np.linalg.solve(jac, resid)
        raise RuntimeError(f"Newton stalled: residual norm {norm:.3e} after "
                           f"{p.newton_max_iter} iterations")

    def vjp_state(self, cache, gbar):
        # dR/du = J - 2M, so gbar_prev = (2M - J)^T mu = 2 M mu - gbar
        mu = np.linalg.solve(cache.T, gbar)
        return 2.0 * (self.mass @ mu) - gbar

    def vjp_noise(self, cache, gbar):
        mu = np.linalg.solve(cache.T, gbar)
        return self.params.noise_amp * (self.noise_proj.T @ mu)

    def vjp_both(self, cache, gbar):
        mu = np.linalg.solve(cache.T, gbar)
        dj_dxi = self.params.noise_amp * (self.noise_proj.T @ mu)
        gbar_prev = 2.0 * (self.mass @ mu) - gbar
        return dj_dxi, gbar_prev

    def residual(self, u, u_next, xi):
        """Newton residual R(u, u_next, xi); exposed for the Jacobian tests."""
        p = self.params
        mid = 0.5 * (u + u_next)
        return (self.mass @ (u_next - u) + p.dt * self._g(mid)
                - p.noise_amp * (self.noise_proj @ xi))

    def residual_jacobian(self, u, u_next):
        """dR/du_next at the given point."""
        mid = 0.5 * (u + u_next)
        return self.mass + (0.5 * self.params.dt) * self._g_jac(mid)


def sks_step(u: ModelState, d_w: np.ndarray, lam: np.ndarray,
             params: SksParams, model: SksModel = None) -> ModelState:
    """One implicit-midpoint substep driven by dW + lam*dt."""
    model = model if model is not None else SksModel(params)
    xi = np.asarray(d_w, float) + np.asarray(lam, float) * params.dt
    return ModelState(model.step(u.dof, xi), u.time_index + 1)


def spin_up_initial(model: SksModel, streams, steps: int = 200) -> ModelState:
    """Interpolate the seed profile and advance `steps` stochastic substeps.

    `streams` yields one (n_cells,) N(0, dt) increment per substep (pass
    zeros for a deterministic spin-up).
    """
    u = ModelState(u_initial(model.mesh.dof_x), 0)
    for k in range(steps):
        d_w = streams(k)
        u = ModelState(model.step(u.dof, d_w), 0)
    return u
