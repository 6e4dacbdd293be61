"""Particle filtering for stochastic differential equations.

Three sequential Monte Carlo filters (bootstrap, tempering with pCN
jittering, and a three-stage nudged filter weighted by the exact change
of measure for its control) over pluggable forward models, with a
reproducible twin-experiment harness.
"""

from .config import ExperimentConfig, preset_config
from .errors import BracketError, DegenerateWeightsError, PropagationError
from .experiment import (build_model, generate_truth_and_obs,
                         initial_ensemble, run_experiment)
from .filters import (FilterContext, Particle, PhiBounds, TemperSchedule,
                      WeightedEnsemble, WindowDiagnostics, adapt_delta_theta,
                      bootstrap_assimilate, mcmc_jitter, nudge_assimilate,
                      pcn_propose, stage2_objective, stage2_objective_grad,
                      stage2_solve, stage3_scale, temper_jitter_assimilate)
from .likelihood import Observation, girsanov_penalty, neg_log_likelihood
from .metrics import DiagnosticsRecord, rank_update, rb, res, rmse
from .models import (ControlWindow, ForwardModel, LinearSde, LinearSdeParams,
                     ModelState, NoiseWindow, P2PeriodicMesh, SksModel,
                     SksParams, exact_gaussian_posterior, grad_phi_hat,
                     phi_hat_of_window, propagate, sks_step, spin_up_initial,
                     u_initial)
from .optim import BoxProblem, OptimResult, brent_root, lbfgs_minimize
from .streams import Purpose, StreamKey, derive_stream, sample_noise_window
from .weights import ess, ess_from_phi, normalize_log_weights, systematic_resample

__version__ = "0.1.0"
