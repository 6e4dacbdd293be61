"""Twin-experiment harness: generate truth and observations, run a filter
over assimilation windows, and write CSV artifacts a plotting tool can read.

Artifact layout under cfg.out_dir:
    config.json                  exact echo of the configuration
    truth.csv                    window_index + dof values, window 0 = initial
    observations.csv             window_index, point_index, position, value
    diagnostics.csv              window_index, ess, rmse, rb, res
    ranks.csv                    window_index, point_index, rank
    snapshots/window_%05d.csv    dof-by-particle matrix per saved window
    summary.json                 run-level aggregates and mesh metadata

Every random draw is keyed by (particle slot, window, substep, purpose), so
truth, observations, and filter noise are mutually independent and reruns
are byte-identical regardless of worker count.
"""

import json
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .filters import (FilterContext, Particle, WeightedEnsemble,
                      bootstrap_assimilate, nudge_assimilate,
                      temper_jitter_assimilate)
from .likelihood import Observation
from .metrics import rank_update, rb, res, rmse
from .models.base import ControlWindow, ModelState, NoiseWindow, propagate
from .models.linear_sde import LinearSde, LinearSdeParams, exact_gaussian_posterior
from .models.sks import SksModel, SksParams, spin_up_initial
from .streams import Purpose, StreamKey, derive_stream, sample_brownian
from .weights import normalize_log_weights

__all__ = ["build_model", "generate_truth_and_obs", "initial_ensemble",
           "run_experiment"]


def _fmt(v) -> str:
    return repr(float(v))


def build_model(cfg: ExperimentConfig):
    if cfg.model == "linear_sde":
        if cfg.n_obs_points != 1:
            raise ValueError("the scalar model observes exactly one point")
        return LinearSde(LinearSdeParams(**cfg.model_params))
    params = SksParams(**{**cfg.model_params, "n_obs": cfg.n_obs_points,
                          "obs_variance": cfg.obs_variance})
    return SksModel(params)


def _noise_row(seed, particle_id, window, substep, n_noise, dt, purpose):
    key = StreamKey(seed, particle_id, window, substep, purpose)
    return sample_brownian(derive_stream(key), 1, n_noise, dt)[0]


def _truth_window_noise(cfg, model, window):
    rows = [_noise_row(cfg.master_seed, 0, window, n + 1, model.n_noise,
                       model.dt, Purpose.TRUTH_NOISE)
            for n in range(cfg.steps_per_window)]
    return NoiseWindow(np.stack(rows), model.dt)


def _initial_truth_state(cfg, model) -> ModelState:
    if cfg.model == "linear_sde":
        stream = derive_stream(StreamKey(cfg.master_seed, 0, 0, 1,
                                         Purpose.TRUTH_NOISE))
        x0 = model.sample_stationary(stream, 1)
        return ModelState(x0.astype(float), 0)
    # stochastic spin-up from the seed profile; window 0 is init-only
    def spin_noise(k):
        return _noise_row(cfg.master_seed, 0, 0, k + 1, model.n_noise,
                          model.dt, Purpose.TRUTH_NOISE)
    return spin_up_initial(model, spin_noise, steps=cfg.spin_up_steps)


def generate_truth_and_obs(cfg: ExperimentConfig, model=None):
    """Truth dof trajectory (n_windows+1 rows) and observations (one row per
    window). Fixed cfg.obs_values short-circuit the noisy observation draw;
    obs_variance 0 returns h(truth) exactly."""
    model = model if model is not None else build_model(cfg)
    n_s = cfg.steps_per_window
    zero_c = ControlWindow.zeros(n_s, model.n_noise)
    state = _initial_truth_state(cfg, model)
    truth = [state.dof.copy()]
    for k in range(1, cfg.n_windows + 1):
        state = propagate(model, state, _truth_window_noise(cfg, model, k),
                          zero_c)
        truth.append(state.dof.copy())
    truth = np.stack(truth)

    m = cfg.n_obs_points
    obs = np.zeros((cfg.n_windows, m))
    for k in range(1, cfg.n_windows + 1):
        if cfg.obs_values is not None:
            obs[k - 1] = np.asarray(cfg.obs_values[k - 1], dtype=float)
            continue
        y = model.observe(truth[k])
        if cfg.obs_variance > 0:
            eps = derive_stream(StreamKey(cfg.master_seed, 0, k, 1,
                                          Purpose.OBS_NOISE)).normal(size=m)
            y = y + np.sqrt(cfg.obs_variance) * eps
        obs[k - 1] = y
    return truth, obs


def initial_ensemble(cfg: ExperimentConfig, model,
                     truth_initial: ModelState = None) -> WeightedEnsemble:
    """Starting ensemble. Scalar model: stationary draws, one stream per
    particle. Spatial model: every particle starts from the shared spin-up
    state and runs cfg.spread_steps free substeps on its own noise."""
    n_s, n_noise, dt = cfg.steps_per_window, model.n_noise, model.dt

    def blank(x_start):
        return Particle(x_start, NoiseWindow.zeros(n_s, n_noise, dt),
                        ControlWindow.zeros(n_s, n_noise))

    parts = []
    if cfg.model == "linear_sde":
        for i in range(cfg.n_particles):
            stream = derive_stream(StreamKey(cfg.master_seed, i, 0, 1,
                                             Purpose.MODEL_NOISE))
            parts.append(blank(ModelState(model.sample_stationary(stream, 1), 0)))
        return WeightedEnsemble.uniform(parts)

    u0 = (truth_initial if truth_initial is not None
          else _initial_truth_state(cfg, model))
    for i in range(cfg.n_particles):
        u = u0.dof.copy()
        for k in range(cfg.spread_steps):
            xi = _noise_row(cfg.master_seed, i, 0, k + 1, n_noise, dt,
                            Purpose.MODEL_NOISE)
            u = model.step(u, xi)
        parts.append(blank(ModelState(u, 0)))
    return WeightedEnsemble.uniform(parts)


def _free_propagate(ens, model, ctx):
    """Prediction-only fallback: fresh noise, no weighting, no resampling."""
    parts = []
    for i, prev in enumerate(ens.particles):
        x0 = (prev.x_end if prev.x_end is not None else prev.x_start).copy()
        rows = [_noise_row(ctx.master_seed, i, ctx.window_index, n + 1,
                           model.n_noise, model.dt, Purpose.MODEL_NOISE)
                for n in range(ctx.n_substeps)]
        p = Particle(x0, NoiseWindow(np.stack(rows), model.dt),
                     ControlWindow.zeros(ctx.n_substeps, model.n_noise))
        p.x_end = propagate(model, p.x_start, p.noise, p.control)
        parts.append(p)
    return WeightedEnsemble(parts, ens.log_weights.copy())


def _write_csv(path, schema, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# schema: {schema}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_snapshot(path, schema, states):
    # states is (N_p, n_dof); files hold the transpose: one row per dof
    header = [f"particle_{i}" for i in range(states.shape[0])]
    rows = [[_fmt(v) for v in col] for col in states.T]
    _write_csv(path, schema, header, rows)


def _dispatch(cfg):
    if cfg.filter_name == "bootstrap":
        return lambda ens, ob, model, ctx: bootstrap_assimilate(
            ens, ob, model, ctx, resample_threshold=cfg.resample_threshold)
    if cfg.filter_name == "temper_jitter":
        return lambda ens, ob, model, ctx: temper_jitter_assimilate(
            ens, ob, model, ctx, delta=cfg.delta_tj, n_jitter=cfg.n_jitter,
            ess_target=cfg.ess_target)
    return lambda ens, ob, model, ctx: nudge_assimilate(
        ens, ob, model, ctx, sigma=cfg.sigma, delta=cfg.delta_nudge,
        n_jitter=cfg.n_jitter, stage1_max_iter=cfg.stage1_max_iter,
        resample_threshold=cfg.resample_threshold)


def _weighted_moments(ens):
    w = normalize_log_weights(ens.log_weights)
    x = ens.states()[:, 0]
    mean = float(w @ x)
    return mean, float(w @ (x - mean) ** 2)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run the configured filter over all windows; returns the summary dict."""
    out = Path(cfg.out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    n_dof = model.n_dof
    m = cfg.n_obs_points
    positions = np.asarray(getattr(model, "obs_points", np.zeros(m)), float)
    dof_x = np.asarray(getattr(getattr(model, "mesh", None), "dof_x",
                               np.zeros(n_dof)), float)

    truth, obs = generate_truth_and_obs(cfg, model)
    cfg.save(out / "config.json")
    _write_csv(out / "truth.csv", "spdefilter-truth-v1",
               ["window_index"] + [f"dof_{j}" for j in range(n_dof)],
               [[str(k)] + [_fmt(v) for v in truth[k]]
                for k in range(cfg.n_windows + 1)])
    obs_rows = []
    for k in range(1, cfg.n_windows + 1):
        for j in range(m):
            obs_rows.append([str(k), str(j), _fmt(positions[j]),
                             _fmt(obs[k - 1, j])])
    _write_csv(out / "observations.csv", "spdefilter-observations-v1",
               ["window_index", "point_index", "position", "value"], obs_rows)

    ens = initial_ensemble(cfg, model,
                           None if cfg.model == "linear_sde"
                           else ModelState(truth[0].copy(), 0))
    _write_snapshot(out / "snapshots" / "window_00000.csv",
                    "spdefilter-snapshot-v1", ens.states())

    step_fn = _dispatch(cfg)
    diag_rows, rank_rows, warnings = [], [], []
    ess_series, rmse_series, rb_series, res_series = [], [], [], []
    aborted_at = None
    try:
        for k in range(1, cfg.n_windows + 1):
            ob = Observation(obs[k - 1], cfg.obs_variance, window_index=k)
            ctx = FilterContext(cfg.master_seed, k, cfg.steps_per_window,
                                cfg.n_workers)
            try:
                ens, diag = step_fn(ens, ob, model, ctx)
                ess_val = float(diag.ess_pre_resample)
                for msg in diag.warnings:
                    warnings.append(f"window {k}: {msg}")
            except Exception as exc:
                if cfg.abort_on_error:
                    aborted_at = k
                    raise
                warnings.append(f"window {k}: {type(exc).__name__}: {exc}")
                ens = _free_propagate(ens, model, ctx)
                ess_val = float("nan")

            hx = ens.states() @ model.obs_matrix.T
            y_true = model.observe(truth[k])
            r_rmse = rmse(y_true, hx)
            r_rb = rb(y_true, hx)
            r_res = res(y_true, hx) if cfg.n_particles > 1 else float("nan")
            diag_rows.append([str(k), _fmt(ess_val), _fmt(r_rmse),
                              _fmt(r_rb), _fmt(r_res)])
            ess_series.append(ess_val)
            rmse_series.append(r_rmse)
            rb_series.append(r_rb)
            res_series.append(r_res)
            tie_stream = derive_stream(StreamKey(cfg.master_seed, 0, k, 1,
                                                 Purpose.RANK_TIE))
            for j in range(m):
                rank_rows.append([str(k), str(j),
                                  str(rank_update(y_true[j], hx[:, j],
                                                  tie_stream))])
            if k % cfg.snapshot_every == 0:
                _write_snapshot(out / "snapshots" / f"window_{k:05d}.csv",
                                "spdefilter-snapshot-v1", ens.states())
    finally:
        _write_csv(out / "diagnostics.csv", "spdefilter-diagnostics-v1",
                   ["window_index", "ess", "rmse", "rb", "res"], diag_rows)
        _write_csv(out / "ranks.csv", "spdefilter-ranks-v1",
                   ["window_index", "point_index", "rank"], rank_rows)

    ess_arr = np.asarray(ess_series)
    finite = np.isfinite(ess_arr)
    summary = {
        "schema": "spdefilter-summary-v1",
        "preset": cfg.preset,
        "model": cfg.model,
        "filter": cfg.filter_name,
        "n_particles": cfg.n_particles,
        "n_windows": cfg.n_windows,
        "n_dof": int(n_dof),
        "dof_x": [float(v) for v in dof_x],
        "obs_positions": [float(v) for v in positions],
        "aborted_at": aborted_at,
        "warnings": warnings,
        "time_mean_ess": float(np.mean(ess_arr[finite])) if finite.any() else None,
        "time_mean_ess_fraction": (float(np.mean(ess_arr[finite]) / cfg.n_particles)
                                   if finite.any() else None),
        "min_ess_fraction": (float(np.min(ess_arr[finite]) / cfg.n_particles)
                             if finite.any() else None),
        "frac_windows_ess_above_10pct": (
            float(np.mean(ess_arr[finite] > 0.1 * cfg.n_particles))
            if finite.any() else None),
        "time_mean_rmse": float(np.nanmean(rmse_series)) if rmse_series else None,
        "time_mean_rb": float(np.nanmean(rb_series)) if rb_series else None,
        "time_mean_res": float(np.nanmean(res_series)) if res_series else None,
        "config": cfg.to_dict(),
    }
    if cfg.model == "linear_sde" and cfg.n_windows == 1:
        # single window from a stationary start: the Gaussian posterior is
        # exact because the midpoint step preserves the stationary law
        mean, var = _weighted_moments(ens)
        prior_var = model.stationary_variance()
        ex_mean, ex_var = exact_gaussian_posterior(0.0, prior_var, float(obs[-1, 0]),
                                          cfg.obs_variance)
        summary.update({
            "ensemble_mean": mean,
            "ensemble_variance": var,
            "exact_mean": ex_mean,
            "exact_variance": ex_var,
            "mean_abs_error": abs(mean - ex_mean),
            "variance_abs_error": abs(var - ex_var),
        })
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
