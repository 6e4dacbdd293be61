"""Score every filter against a closed-form posterior.

The scalar linear SDE  dx = -A x dt + D dW  is special: the implicit
midpoint step preserves its stationary normal law exactly, so after one
assimilation window (10 substeps, one noisy observation) the filtering
distribution is a Gaussian we can write down. A 300-particle run of each
filter is scored against that exact answer.
"""

from pathlib import Path

from spdefilter.config import preset_config
from spdefilter.experiment import run_experiment
from spdefilter.models.linear_sde import LinearSde, LinearSdeParams, exact_gaussian_posterior

out_root = Path("runs/demo_linear")

model = LinearSde(LinearSdeParams(drift=1.0, noise=1.0, dt=0.1))
exact_mean, exact_var = exact_gaussian_posterior(
    0.0, model.stationary_variance(), -0.055634, 0.01)

print("one window, N_p = 300, observation y = -0.055634 with R = 0.01\n")
print(f"{'filter':<16}{'ESS%':>8}{'mean':>12}{'|mean err|':>12}"
      f"{'variance':>12}{'|var err|':>12}")
print("-" * 72)
print(f"{'exact':<16}{'':>8}{exact_mean:>12.6f}{'':>12}{exact_var:>12.6f}{'':>12}")

for filt in ("bootstrap", "temper_jitter", "nudge"):
    cfg = preset_config("linear_verification", filter_name=filt,
                        out_dir=str(out_root / filt))
    s = run_experiment(cfg)
    print(f"{filt:<16}{100 * s['time_mean_ess_fraction']:>8.1f}"
          f"{s['ensemble_mean']:>12.6f}{s['mean_abs_error']:>12.6f}"
          f"{s['ensemble_variance']:>12.6f}{s['variance_abs_error']:>12.6f}")

print(f"\nartifacts under {out_root}/<filter>/")
