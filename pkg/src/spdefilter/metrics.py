"""Ensemble-vs-truth error metrics and rank bookkeeping.

All metrics live in observation space: compare h(X_i) against the
noiseless truth values h(X_true) at the observation points.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["rmse", "rb", "res", "rank_update", "DiagnosticsRecord"]


def _check(y_true: np.ndarray, hx: np.ndarray):
    y = np.asarray(y_true, dtype=float).ravel()
    hx = np.atleast_2d(np.asarray(hx, dtype=float))
    if hx.shape[1] != y.size:
        raise ValueError(f"ensemble dim {hx.shape[1]} != truth dim {y.size}")
    return y, hx


def rmse(y_true: np.ndarray, hx: np.ndarray) -> float:
    """Mean over particles of ||y_true - h(X_i)||_2, relative to ||y_true||_2."""
    y, hx = _check(y_true, hx)
    denom = np.linalg.norm(y)
    if denom == 0.0:
        raise ValueError("truth vector has zero norm, metric undefined")
    return float(np.mean(np.linalg.norm(hx - y, axis=1)) / denom)


def rb(y_true: np.ndarray, hx: np.ndarray) -> float:
    """Relative l1 bias of the ensemble mean."""
    y, hx = _check(y_true, hx)
    denom = np.sum(np.abs(y))
    if denom == 0.0:
        raise ValueError("truth vector has zero norm, metric undefined")
    return float(np.sum(np.abs(y - hx.mean(axis=0))) / denom)


def res(y_true: np.ndarray, hx: np.ndarray) -> float:
    """Ensemble spread: sum of squared deviations from the ensemble mean
    over (N_p - 1) ||y_true||_2^2."""
    y, hx = _check(y_true, hx)
    n_p = hx.shape[0]
    if n_p < 2:
        raise ValueError("spread needs at least two particles")
    denom = float(y @ y)
    if denom == 0.0:
        raise ValueError("truth vector has zero norm, metric undefined")
    dev = hx - hx.mean(axis=0)
    return float(np.sum(dev * dev) / ((n_p - 1) * denom))


def rank_update(y_true_point: float, ensemble_values: np.ndarray,
                tie_stream: np.random.Generator) -> int:
    """Rank of the truth value within the ensemble, in 0..N_p.

    Count of ensemble values strictly below the truth, plus a uniform
    draw over the tied positions. Pooled over windows and points these
    are uniform for a calibrated ensemble.
    """
    v = np.asarray(ensemble_values, dtype=float).ravel()
    below = int(np.sum(v < y_true_point))
    ties = int(np.sum(v == y_true_point))
    if ties == 0:
        return below
    return below + int(tie_stream.integers(0, ties + 1))


@dataclass
class DiagnosticsRecord:
    window_index: int
    ess: float
    rmse: float
    rb: float
    res: float
