"""The three assimilation algorithms: bootstrap, temper-jitter, nudge.

Each filter maps a weighted ensemble plus one observation to the
post-assimilation ensemble for that window, drawing every random number
from streams keyed by (particle slot, window, substep, purpose) so that
results never depend on execution order or worker count.

The nudged filter follows the three-stage construction: at each substep n
it samples the new noise row, then (1) per particle, minimises the weight
exponent phi_hat over the new control row only, giving bounds
[phi_min, phi_max]; (2) globally, picks target exponents phi* inside those
bounds by minimising sigma*sum(phi) - ESS(phi); (3) per particle, scales
the stage-1 control row by the s in [0, 1] that lands phi_hat on phi*.
Because rows beyond n are still zero, the control at substep n depends
only on noise already revealed, which is what keeps the Girsanov weight
exp(-phi_hat) an unbiased reweighting. After the last substep particles
are weighted, resampled, and refreshed by pCN MCMC on the noise window.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PropagationError
from .likelihood import Observation, girsanov_penalty, neg_log_likelihood
from .models.base import (ControlWindow, ModelState, NoiseWindow,
                          _grad_phi_rows, propagate)
from .optim import BoxProblem, brent_root, lbfgs_minimize
from .streams import Purpose, StreamKey, derive_stream, sample_brownian
from .weights import ess, ess_from_phi, normalize_log_weights, systematic_resample

__all__ = [
    "Particle",
    "WeightedEnsemble",
    "PhiBounds",
    "TemperSchedule",
    "FilterContext",
    "WindowDiagnostics",
    "bootstrap_assimilate",
    "adapt_delta_theta",
    "pcn_propose",
    "mcmc_jitter",
    "temper_jitter_assimilate",
    "stage2_objective",
    "stage2_objective_grad",
    "stage2_solve",
    "stage3_scale",
    "nudge_assimilate",
]


@dataclass
class Particle:
    x_start: ModelState
    noise: NoiseWindow
    control: ControlWindow
    x_end: ModelState = None
    log_weight_increment: float = 0.0

    def copy(self):
        return Particle(self.x_start.copy(), self.noise.copy(),
                        self.control.copy(),
                        None if self.x_end is None else self.x_end.copy(),
                        self.log_weight_increment)


@dataclass
class WeightedEnsemble:
    particles: list
    log_weights: np.ndarray

    @classmethod
    def uniform(cls, particles):
        return cls(particles, np.zeros(len(particles)))

    @property
    def n_particles(self):
        return len(self.particles)

    def states(self) -> np.ndarray:
        """(N_p, n_dof) matrix of current endpoint dofs."""
        return np.stack([p.x_end.dof if p.x_end is not None else p.x_start.dof
                         for p in self.particles])


@dataclass
class PhiBounds:
    phi_min: np.ndarray
    phi_max: np.ndarray

    def __post_init__(self):
        self.phi_min = np.asarray(self.phi_min, dtype=float)
        self.phi_max = np.asarray(self.phi_max, dtype=float)
        if self.phi_min.shape != self.phi_max.shape:
            raise ValueError("bound shapes differ")
        if np.any(self.phi_min > self.phi_max + 1e-12):
            raise ValueError("phi_min exceeds phi_max")


@dataclass
class TemperSchedule:
    thetas: list = field(default_factory=lambda: [0.0])
    ess_target_fraction: float = 0.8

    def append(self, theta):
        self.thetas.append(theta)

    @property
    def n_stages(self):
        return len(self.thetas) - 1


@dataclass(frozen=True)
class FilterContext:
    """Stream addressing and parallelism for one assimilation window."""

    master_seed: int
    window_index: int
    n_substeps: int
    n_workers: int = 1


@dataclass
class WindowDiagnostics:
    ess_pre_resample: float = np.nan
    resampled: bool = False
    stage1_fallbacks: int = 0
    jitter_acceptance: float = np.nan
    temper_schedule: TemperSchedule = None
    warnings: list = field(default_factory=list)


def _particle_map(fn, n_items, n_workers):
    """Order-preserving map over particle slots."""
    if n_workers <= 1:
        return [fn(i) for i in range(n_items)]
    with ThreadPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(fn, range(n_items)))


def _roll_state(p: Particle) -> ModelState:
    return (p.x_end if p.x_end is not None else p.x_start).copy()


def _noise_row(ctx, particle_id, substep, n_noise, dt,
               purpose=Purpose.MODEL_NOISE):
    key = StreamKey(ctx.master_seed, particle_id, ctx.window_index, substep,
                    purpose)
    return sample_brownian(derive_stream(key), 1, n_noise, dt)[0]


def _window_stream(ctx, particle_id, purpose):
    """Stream for window-level draws (jitter chains, resampling uniforms)."""
    key = StreamKey(ctx.master_seed, particle_id, ctx.window_index, 1, purpose)
    return derive_stream(key)


def _phi_of_particle(model, p: Particle, obs: Observation) -> float:
    misfit = neg_log_likelihood(model.observe(p.x_end.dof), obs.y,
                                obs.obs_variance)
    return misfit + girsanov_penalty(p.control.d_lambda, p.noise.d_w,
                                     p.noise.dt)


def _resample_in_place(ens_particles, weights, u):
    parents = systematic_resample(weights, u)
    return [ens_particles[j].copy() for j in parents]


# ---------------------------------------------------------------------------
# bootstrap

def bootstrap_assimilate(ens: WeightedEnsemble, obs: Observation, model,
                         ctx: FilterContext, resample_threshold: float = 1.0):
    """Propagate with fresh noise, weight by the likelihood, resample.

    Returns (ensemble, WindowDiagnostics); pre-resample ESS is always
    reported, including on the degenerate-weights error path.
    """
    n_p = ens.n_particles
    dt = model.dt
    diag = WindowDiagnostics()
    parts = []
    log_w = ens.log_weights.astype(float).copy()
    for i, prev in enumerate(ens.particles):
        x0 = _roll_state(prev)
        d_w = np.stack([_noise_row(ctx, i, n + 1, model.n_noise, dt)
                        for n in range(ctx.n_substeps)])
        p = Particle(x0, NoiseWindow(d_w, dt),
                     ControlWindow.zeros(ctx.n_substeps, model.n_noise))
        p.x_end = propagate(model, p.x_start, p.noise, p.control)
        p.log_weight_increment = -_phi_of_particle(model, p, obs)
        log_w[i] += p.log_weight_increment
        parts.append(p)

    try:
        w = normalize_log_weights(log_w)
    except Exception as exc:
        diag.ess_pre_resample = 0.0
        exc.diagnostics = diag
        raise
    diag.ess_pre_resample = ess(w)

    if diag.ess_pre_resample < resample_threshold * n_p:
        u = float(_window_stream(ctx, 0, Purpose.RESAMPLE_UNIFORM).random())
        parts = _resample_in_place(parts, w, u)
        log_w = np.zeros(n_p)
        diag.resampled = True
    return WeightedEnsemble(parts, log_w), diag


# ---------------------------------------------------------------------------
# tempering and jittering

def adapt_delta_theta(log_lik: np.ndarray, theta_remaining: float,
                      target: float, tol: float = 1e-3):
    """Largest step d <= theta_remaining keeping ESS(d*phi) >= target*N_p.

    Bisection to absolute tolerance tol. Returns (delta_theta, warned);
    warned flags the pathological case where even 1e-6 misses the target.
    """
    if not 0.0 < theta_remaining <= 1.0:
        raise ValueError(f"theta_remaining outside (0, 1]: {theta_remaining}")
    phi = -np.asarray(log_lik, dtype=float)
    n_p = phi.size
    if target <= 0.0:
        return theta_remaining, False

    def ok(d):
        return ess_from_phi(d * phi) >= target * n_p

    if ok(theta_remaining):
        return theta_remaining, False
    if not ok(1e-6):
        return 1e-6, True
    lo, hi = 1e-6, theta_remaining
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo, False


def pcn_propose(w: NoiseWindow, delta: float, xi: NoiseWindow) -> NoiseWindow:
    """Preconditioned Crank-Nicolson move rho*w + sqrt(1-rho^2)*xi.

    rho = (2-delta)/(2+delta); the N(0, dt) marginal is preserved exactly,
    which is what makes the prior term drop out of the MH ratio.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if abs(w.dt - xi.dt) > 1e-14:
        raise ValueError("innovation dt differs from the window dt")
    rho = (2.0 - delta) / (2.0 + delta)
    return NoiseWindow(rho * w.d_w + np.sqrt(1.0 - rho * rho) * xi.d_w, w.dt)


def mcmc_jitter(p: Particle, obs: Observation, theta: float, delta: float,
                n_steps: int, model, stream: np.random.Generator):
    """n_steps pCN Metropolis-Hastings moves on the particle's noise window.

    Target: prior on the noise tempered by exp(-theta * phi_hat), control
    held fixed. Mutates and returns the particle; also returns the current
    phi_hat and the acceptance count. Proposals whose propagation fails are
    rejected and the chain continues.
    """
    phi_cur = _phi_of_particle(model, p, obs)
    n_accept = 0
    for _ in range(n_steps):
        xi = NoiseWindow(sample_brownian(stream, p.noise.n_steps,
                                         p.noise.d_w.shape[1], p.noise.dt),
                         p.noise.dt)
        w_prop = pcn_propose(p.noise, delta, xi)
        try:
            x_prop = propagate(model, p.x_start, w_prop, p.control)
        except PropagationError:
            continue
        misfit = neg_log_likelihood(model.observe(x_prop.dof), obs.y,
                                    obs.obs_variance)
        phi_prop = misfit + girsanov_penalty(p.control.d_lambda, w_prop.d_w,
                                             w_prop.dt)
        log_acc = theta * (phi_cur - phi_prop)
        if np.log(stream.random()) < log_acc:
            p.noise = w_prop
            p.x_end = x_prop
            phi_cur = phi_prop
            n_accept += 1
    return p, phi_cur, n_accept


def temper_jitter_assimilate(ens: WeightedEnsemble, obs: Observation, model,
                             ctx: FilterContext, delta: float = 0.15,
                             n_jitter: int = 5, ess_target: float = 0.8):
    """Adaptive likelihood tempering with pCN jittering between stages."""
    n_p = ens.n_particles
    dt = model.dt
    diag = WindowDiagnostics(temper_schedule=TemperSchedule([0.0], ess_target))
    parts = []
    phi = np.empty(n_p)
    for i, prev in enumerate(ens.particles):
        x0 = _roll_state(prev)
        d_w = np.stack([_noise_row(ctx, i, n + 1, model.n_noise, dt)
                        for n in range(ctx.n_substeps)])
        p = Particle(x0, NoiseWindow(d_w, dt),
                     ControlWindow.zeros(ctx.n_substeps, model.n_noise))
        p.x_end = propagate(model, p.x_start, p.noise, p.control)
        phi[i] = _phi_of_particle(model, p, obs)
        parts.append(p)
    # entry ESS under the full (theta = 1) likelihood, comparable across filters
    diag.ess_pre_resample = ess_from_phi(phi)

    jitter_streams = [_window_stream(ctx, i, Purpose.JITTER_NOISE)
                      for i in range(n_p)]
    resample_stream = _window_stream(ctx, 0, Purpose.RESAMPLE_UNIFORM)

    theta = 0.0
    accepts = total_moves = 0
    while theta < 1.0:
        d_theta, warned = adapt_delta_theta(-phi, 1.0 - theta, ess_target)
        if warned:
            diag.warnings.append(f"theta step floored at 1e-6 (theta={theta:.3f})")
        w = normalize_log_weights(-d_theta * phi)
        u = float(resample_stream.random())
        parents = systematic_resample(w, u)
        parts = [parts[j].copy() for j in parents]
        phi = phi[parents]
        theta = min(theta + d_theta, 1.0)
        diag.temper_schedule.append(theta)
        for i in range(n_p):
            parts[i], phi[i], acc = mcmc_jitter(parts[i], obs, theta, delta,
                                                n_jitter, model,
                                                jitter_streams[i])
            accepts += acc
            total_moves += n_jitter
        for i, p in enumerate(parts):
            p.log_weight_increment = 0.0
    diag.resampled = True
    if total_moves:
        diag.jitter_acceptance = accepts / total_moves
    return WeightedEnsemble.uniform(parts), diag


# ---------------------------------------------------------------------------
# the three-stage nudge

def stage2_objective(phi: np.ndarray, sigma: float) -> float:
    """sigma * sum(phi) - ESS(phi), the stage-2 trade-off functional."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    phi = np.asarray(phi, dtype=float)
    return sigma * float(phi.sum()) - ess_from_phi(phi)


def stage2_objective_grad(phi: np.ndarray, sigma: float) -> np.ndarray:
    """Analytic gradient of stage2_objective (ESS term shift-invariant)."""
    phi = np.asarray(phi, dtype=float)
    e = np.exp(-(phi - phi.min()))
    s1 = e.sum()
    s2 = float(e @ e)
    d_ess = 2.0 * s1 * e * (s1 * e - s2) / (s2 * s2)
    return sigma - d_ess


def stage2_solve(bounds: PhiBounds, sigma: float, tol: float = 1e-6,
                 max_iter: int = 500) -> np.ndarray:
    """Minimise the stage-2 functional inside the per-particle phi bounds.

    The ESS term only sees differences phi_i - phi_j, so its basins sit
    around configurations where particles share a common level as far as
    their boxes allow. A deterministic scan over that clustered family
    clip(c, lo, hi) picks the promising basin; projected L-BFGS polishes
    it, with restarts from the corners and midpoint. Best iterate wins.
    """
    lo, hi = bounds.phi_min, bounds.phi_max
    levels = np.linspace(lo.min() - 1.0, hi.max(), 201)
    family = np.clip(levels[:, None], lo[None, :], hi[None, :])
    scan = family[int(np.argmin([stage2_objective(row, sigma)
                                 for row in family]))]
    best = None
    for x0 in (lo, hi, 0.5 * (lo + hi), scan):
        problem = BoxProblem(lambda x: stage2_objective(x, sigma),
                             lambda x: stage2_objective_grad(x, sigma),
                             x0=x0, lower=lo, upper=hi, tol=tol,
                             max_iter=max_iter)
        res = lbfgs_minimize(problem)
        if best is None or res.f < best.f:
            best = res
    return np.clip(best.x, lo, hi)


def stage3_scale(p: Particle, n: int, phi_star: float, obs: Observation,
                 model, phi_of_scale=None, tol: float = 1e-8) -> float:
    """Scale control row n (1-based) so phi_hat hits phi_star; returns s.

    g(s) = phi_hat(s * row_n) - phi_star brackets a root on [0, 1] whenever
    phi_star lies within the stage-1 bounds; endpoints map to s = 0 (no
    nudge) and s = 1 (full stage-1 row). Failing brackets are widened to
    [-0.5, 1.5] once before giving up.
    """
    row = p.control.d_lambda[n - 1].copy()
    if phi_of_scale is None:
        def phi_of_scale(s):
            lam = p.control.d_lambda.copy()
            lam[n - 1] = s * row
            x_end = propagate(model, p.x_start, p.noise, ControlWindow(lam))
            misfit = neg_log_likelihood(model.observe(x_end.dof), obs.y,
                                        obs.obs_variance)
            return misfit + girsanov_penalty(lam, p.noise.d_w, p.noise.dt)

    def g(s):
        return phi_of_scale(s) - phi_star

    g0 = g(0.0)
    g1 = g(1.0)
    slack = 1e-10 * max(1.0, abs(phi_star))
    if g0 <= slack and g0 >= -slack or (g0 < 0 and g1 < 0 and g0 >= g1):
        s = 0.0
    elif abs(g1) <= slack or (g0 > 0 and g1 > 0 and g1 <= g0):
        s = 1.0
    elif g0 * g1 <= 0:
        s = brent_root(g, 0.0, 1.0, tol)
    else:
        gl, gr = g(-0.5), g(1.5)
        if gl * gr <= 0:
            s = brent_root(g, -0.5, 1.5, tol)
        else:
            raise RuntimeError(
                f"stage 3 bracket failure at substep {n}: g(0)={g0:.3e}, "
                f"g(1)={g1:.3e}, phi_star={phi_star:.6e}")
    p.control.d_lambda[n - 1] = s * row
    return s


def _memoized_pair(fg):
    """Split an (f, g) evaluator into objective/gradient with shared work."""
    cache = {}

    def lookup(x):
        k = np.asarray(x, dtype=float).tobytes()
        if k not in cache:
            cache[k] = fg(np.asarray(x, dtype=float))
        return cache[k]

    return (lambda x: lookup(x)[0]), (lambda x: lookup(x)[1])


def nudge_assimilate(ens: WeightedEnsemble, obs: Observation, model,
                     ctx: FilterContext, sigma: float = 0.1,
                     delta: float = 0.05, n_jitter: int = 5,
                     stage1_max_iter: int = 20, stage1_tol: float = 1e-5,
                     resample_threshold: float = 1.0):
    """Three-stage nudged filter for one window; see the module docstring.

    stage1_max_iter = 0 disables nudging entirely (control stays zero),
    which reduces the filter to bootstrap_assimilate on the same noise.
    """
    n_p = ens.n_particles
    dt = model.dt
    n_sub = ctx.n_substeps
    n_noise = model.n_noise
    diag = WindowDiagnostics()

    parts = [Particle(_roll_state(prev), NoiseWindow.zeros(n_sub, n_noise, dt),
                      ControlWindow.zeros(n_sub, n_noise))
             for prev in ens.particles]
    states = [[p.x_start.dof.copy()] for p in parts]
    prefix_pen = np.zeros(n_p)

    for n in range(1, n_sub + 1):
        rows_new = [None] * n_p

        def _stage1(i, n=n):
            p = parts[i]
            d_w_n = _noise_row(ctx, i, n, n_noise, dt)
            p.noise.d_w[n - 1] = d_w_n
            rows_new[i] = d_w_n
            tail_dw = p.noise.d_w[n - 1:]
            const = prefix_pen[i]

            def fg(lam_row):
                tail_lam = p.control.d_lambda[n - 1:].copy()
                tail_lam[0] = lam_row
                phi, grads = _grad_phi_rows(model, states[i][n - 1], tail_dw,
                                            tail_lam, dt, obs, [0],
                                            first_substep=n)
                return phi + const, grads[0]

            if stage1_max_iter <= 0:
                phi0, _ = fg(np.zeros(n_noise))
                return phi0, phi0, 0
            objective, gradient = _memoized_pair(fg)
            res = lbfgs_minimize(BoxProblem(objective, gradient,
                                            x0=np.zeros(n_noise),
                                            tol=stage1_tol,
                                            max_iter=stage1_max_iter))
            phi_max = res.f_history[0]
            if not np.isfinite(res.f) or res.f > phi_max:
                p.control.d_lambda[n - 1] = 0.0
                return phi_max, phi_max, 1
            p.control.d_lambda[n - 1] = res.x
            return res.f, phi_max, 0

        stage1_out = _particle_map(_stage1, n_p, ctx.n_workers)
        phi_min = np.array([o[0] for o in stage1_out])
        phi_max = np.array([o[1] for o in stage1_out])
        diag.stage1_fallbacks += sum(o[2] for o in stage1_out)

        phi_star = stage2_solve(PhiBounds(phi_min, phi_max), sigma)
        phi_star = np.clip(phi_star, phi_min, phi_max)

        def _stage3(i, n=n):
            p = parts[i]
            d_w_n = rows_new[i]
            tail_dw = p.noise.d_w[n - 1:]
            row = p.control.d_lambda[n - 1].copy()
            const = prefix_pen[i]

            def phi_of_scale(s):
                tail_lam = p.control.d_lambda[n - 1:].copy()
                tail_lam[0] = s * row
                x = states[i][n - 1]
                for m in range(tail_dw.shape[0]):
                    x = model.step(x, tail_dw[m] + tail_lam[m] * dt)
                misfit = neg_log_likelihood(model.observe(x), obs.y,
                                            obs.obs_variance)
                return misfit + const + girsanov_penalty(tail_lam, tail_dw, dt)

            stage3_scale(p, n, phi_star[i], obs, model, phi_of_scale)
            row_final = p.control.d_lambda[n - 1]
            states[i].append(model.step(states[i][n - 1],
                                        d_w_n + row_final * dt))
            return float(0.5 * dt * (row_final @ row_final)
                         + row_final @ d_w_n)

        pen_inc = _particle_map(_stage3, n_p, ctx.n_workers)
        prefix_pen += np.asarray(pen_inc)

    phi = np.empty(n_p)
    for i, p in enumerate(parts):
        p.x_end = ModelState(states[i][-1],
                             p.x_start.time_index + n_sub)
        phi[i] = (neg_log_likelihood(model.observe(p.x_end.dof), obs.y,
                                     obs.obs_variance) + prefix_pen[i])
        p.log_weight_increment = -phi[i]

    log_w = ens.log_weights.astype(float) - phi
    try:
        w = normalize_log_weights(log_w)
    except Exception as exc:
        diag.ess_pre_resample = 0.0
        exc.diagnostics = diag
        raise
    diag.ess_pre_resample = ess(w)

    if diag.ess_pre_resample < resample_threshold * n_p:
        u = float(_window_stream(ctx, 0, Purpose.RESAMPLE_UNIFORM).random())
        parts = _resample_in_place(parts, w, u)
        log_w = np.zeros(n_p)
        diag.resampled = True

    if n_jitter > 0:
        accepts = 0

        def _jitter(i):
            stream = _window_stream(ctx, i, Purpose.JITTER_NOISE)
            parts[i], _, acc = mcmc_jitter(parts[i], obs, 1.0, delta,
                                           n_jitter, model, stream)
            return acc

        accepts = sum(_particle_map(_jitter, n_p, ctx.n_workers))
        diag.jitter_acceptance = accepts / (n_p * n_jitter)

    return WeightedEnsemble(parts, log_w), diag
