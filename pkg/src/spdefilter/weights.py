"""Log-weight bookkeeping, effective sample size, systematic resampling."""

import numpy as np

from .errors import DegenerateWeightsError

__all__ = ["normalize_log_weights", "ess", "ess_from_phi", "systematic_resample"]


def normalize_log_weights(log_w: np.ndarray) -> np.ndarray:
    """Exponentiate and normalise log-weights stably (log-sum-exp shift).

    Raises DegenerateWeightsError if any entry is NaN or all are -inf.
    """
    log_w = np.asarray(log_w, dtype=float)
    if np.any(np.isnan(log_w)):
        raise DegenerateWeightsError("NaN log-weight in ensemble")
    m = np.max(log_w)
    if m == -np.inf:
        raise DegenerateWeightsError("all log-weights are -inf")
    w = np.exp(log_w - m)
    return w / w.sum()


def ess(w: np.ndarray) -> float:
    """Effective sample size 1 / sum(w_i^2) of normalised weights."""
    w = np.asarray(w, dtype=float)
    return 1.0 / float(w @ w)


def ess_from_phi(phi: np.ndarray) -> float:
    """ESS of weights proportional to exp(-phi), computed in log space.

    Equals (sum exp(-phi))^2 / sum exp(-2 phi); shifting by min(phi) keeps
    both sums finite for widely spread phi values.
    """
    phi = np.asarray(phi, dtype=float)
    e = np.exp(-(phi - phi.min()))
    s1 = e.sum()
    s2 = float(e @ e)
    return s1 * s1 / s2


def systematic_resample(w: np.ndarray, u: float) -> np.ndarray:
    """Systematic resampling: parent indices for positions (u+j)/N.

    w must be normalised (sum 1 within 1e-8) and non-negative; u is a single
    uniform on [0, 1). Returns N sorted parent indices; expected counts are
    N*w_i and realised counts never differ from that by a full unit.
    """
    w = np.asarray(w, dtype=float)
    n = w.size
    if np.any(w < 0.0):
        raise ValueError("weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-8:
        raise ValueError(f"weights must be normalised, sum = {w.sum()!r}")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    positions = (u + np.arange(n)) / n
    cum = np.cumsum(w)
    cum[-1] = 1.0  # guard rounding so the last interval is closed
    parents = np.searchsorted(cum, positions, side="right")
    return np.minimum(parents, n - 1)
