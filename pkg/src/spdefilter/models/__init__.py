from .base import (ControlWindow, ForwardModel, ModelState, NoiseWindow,
                   grad_phi_hat, phi_hat_of_window, propagate)
from .linear_sde import LinearSde, LinearSdeParams, exact_gaussian_posterior
from .p2periodic import P2PeriodicMesh
from .sks import SksModel, SksParams, sks_step, spin_up_initial, u_initial

REGISTRY = {
    "linear_sde": LinearSde,
    "sks": SksModel,
}

__all__ = [
    "ControlWindow",
    "ForwardModel",
    "ModelState",
    "NoiseWindow",
    "grad_phi_hat",
    "phi_hat_of_window",
    "propagate",
    "LinearSde",
    "LinearSdeParams",
    "exact_gaussian_posterior",
    "P2PeriodicMesh",
    "SksModel",
    "SksParams",
    "sks_step",
    "spin_up_initial",
    "u_initial",
    "REGISTRY",
]
