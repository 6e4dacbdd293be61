"""Experiment configuration: a flat, JSON-serialisable record plus presets."""

import dataclasses
import json
from dataclasses import dataclass, field

_MODELS = ("linear_sde", "sks")
_FILTERS = ("bootstrap", "temper_jitter", "nudge")

__all__ = ["ExperimentConfig", "preset_config", "PRESETS"]


@dataclass
class ExperimentConfig:
    preset: str
    model: str
    filter_name: str
    n_particles: int
    master_seed: int
    n_windows: int
    steps_per_window: int
    out_dir: str
    model_params: dict = field(default_factory=dict)
    n_obs_points: int = 1
    obs_variance: float = 1.0
    obs_values: list = None        # fixed observations, [window][point]
    sigma: float = 0.1
    delta_nudge: float = 0.05
    delta_tj: float = 0.15
    n_jitter: int = 5
    ess_target: float = 0.8
    resample_threshold: float = 1.0
    stage1_max_iter: int = 20
    spin_up_steps: int = 200
    spread_steps: int = 20
    snapshot_every: int = 1
    n_workers: int = 1
    abort_on_error: bool = True

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {_MODELS}")
        if self.filter_name not in _FILTERS:
            raise ValueError(
                f"unknown filter {self.filter_name!r}; choose from {_FILTERS}")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.n_windows < 0:
            raise ValueError("n_windows must be >= 0")
        if self.steps_per_window < 1:
            raise ValueError("steps_per_window must be >= 1")
        if self.n_obs_points < 1:
            raise ValueError("n_obs_points must be >= 1")
        if self.obs_variance < 0:
            raise ValueError("obs_variance must be >= 0")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.obs_values is not None:
            if len(self.obs_values) != self.n_windows:
                raise ValueError("obs_values must have one row per window")
            if any(len(row) != self.n_obs_points for row in self.obs_values):
                raise ValueError("each obs_values row needs n_obs_points entries")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls(**json.load(fh))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _linear_verification() -> ExperimentConfig:
    # published single-window check: unit drift/noise, dt 0.1, one fixed
    # observation; the exact Gaussian posterior is available for comparison
    return ExperimentConfig(
        preset="linear_verification",
        model="linear_sde",
        filter_name="nudge",
        n_particles=300,
        master_seed=42,
        n_windows=1,
        steps_per_window=10,
        out_dir="runs/linear_verification",
        model_params={"drift": 1.0, "noise": 1.0, "dt": 0.1},
        n_obs_points=1,
        obs_variance=0.01,
        obs_values=[[-0.055634]],
        sigma=0.1,
    )


def _sks_benchmark() -> ExperimentConfig:
    # full-size twin experiment: 100 cells (200 dofs), 90 particles,
    # 10 observation points, windows of 5 substeps
    return ExperimentConfig(
        preset="sks_benchmark",
        model="sks",
        filter_name="nudge",
        n_particles=90,
        master_seed=42,
        n_windows=900,
        steps_per_window=5,
        out_dir="runs/sks_benchmark",
        model_params={"length": 4.0, "n_cells": 100, "alpha": 0.03,
                      "beta": 1.1, "gamma": 1.0, "noise_amp": 2.5,
                      "eta": 5.0, "dt": 0.01},
        n_obs_points=10,
        obs_variance=2.5,
        sigma=0.01,
        snapshot_every=10,
    )


def _sks_desk() -> ExperimentConfig:
    # scaled-down twin experiment that finishes in minutes on one core
    cfg = _sks_benchmark()
    return cfg.replace(
        preset="sks_desk",
        n_particles=30,
        n_windows=150,
        out_dir="runs/sks_desk",
        model_params={**cfg.model_params, "n_cells": 32},
        snapshot_every=1,
    )


PRESETS = {
    "linear_verification": _linear_verification,
    "sks_benchmark": _sks_benchmark,
    "sks_desk": _sks_desk,
}


def preset_config(name: str, **overrides) -> ExperimentConfig:
    """Named preset with optional field overrides."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = PRESETS[name]()
    return cfg.replace(**overrides) if overrides else cfg
