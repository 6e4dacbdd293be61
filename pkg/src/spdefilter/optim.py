"""Self-contained optimisation kernels: projected L-BFGS and Brent root-finding.

The quasi-Newton solver is limited-memory BFGS with two-loop recursion,
backtracking Armijo line search, and gradient projection for box
constraints (active coordinates are frozen, the update acts on the free
set). Problems here are small (a few hundred variables) and smooth, which
is what this implementation is tuned for.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError

__all__ = ["BoxProblem", "OptimResult", "lbfgs_minimize", "brent_root"]

_ARMIJO_C = 1e-4
_EPS = np.finfo(float).eps


@dataclass
class BoxProblem:
    """Box-constrained smooth minimisation problem.

    lower/upper may be None (unbounded) or vectors with +-inf entries;
    equal lower and upper pin a variable. x0 must be feasible.
    """

    objective: callable
    gradient: callable
    x0: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None
    tol: float = 1e-6
    max_iter: int = 500
    memory: int = 10

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        n = self.x0.size
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.broadcast_to(np.asarray(self.lower, float), (n,)).copy())
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.broadcast_to(np.asarray(self.upper, float), (n,)).copy())
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise ValueError("x0 infeasible")


@dataclass
class OptimResult:
    x: np.ndarray
    f: float
    status: str            # "converged" | "max_iter" | "line_search_failure"
    n_iter: int
    f_history: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"


def _two_loop(g, pairs):
    """L-BFGS two-loop recursion: approximate -H*g search direction."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)  # Barzilai-Borwein style initial scaling
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def lbfgs_minimize(p: BoxProblem) -> OptimResult:
    """Minimise a BoxProblem; every iterate stays feasible.

    Convergence: projected-gradient infinity norm below p.tol. On a failed
    line search the best iterate so far is returned with status
    "line_search_failure".
    """
    clip = lambda z: np.clip(z, p.lower, p.upper)
    x = clip(p.x0)
    f = float(p.objective(x))
    g = np.asarray(p.gradient(x), dtype=float)
    pairs = deque(maxlen=p.memory)
    hist = [f]

    for it in range(1, p.max_iter + 1):
        pg = x - clip(x - g)
        if np.max(np.abs(pg)) < p.tol:
            return OptimResult(x, f, "converged", it - 1, hist)

        # freeze coordinates pressed against a finite bound by the gradient
        lo_fin = np.isfinite(p.lower)
        hi_fin = np.isfinite(p.upper)
        tol_lo = 1e-12 * np.maximum(1.0, np.abs(np.where(lo_fin, p.lower, 0.0)))
        tol_hi = 1e-12 * np.maximum(1.0, np.abs(np.where(hi_fin, p.upper, 0.0)))
        at_lo = lo_fin & (x - p.lower <= tol_lo) & (g > 0)
        at_hi = hi_fin & (p.upper - x <= tol_hi) & (g < 0)
        active = at_lo | at_hi | (lo_fin & (p.lower == p.upper))
        gf = np.where(active, 0.0, g)

        d = _two_loop(gf, list(pairs))
        d[active] = 0.0
        if d @ g > -_EPS * max(1.0, np.linalg.norm(d) * np.linalg.norm(g)):
            d = -gf  # not a descent direction: restart from steepest descent
            if not np.any(d):
                return OptimResult(x, f, "converged", it - 1, hist)

        # Armijo backtracking along the projection arc
        alpha, accepted = 1.0, False
        for _ in range(60):
            xn = clip(x + alpha * d)
            step = xn - x
            slope = g @ step
            fn = float(p.objective(xn))
            if slope <= 0.0 and fn <= f + _ARMIJO_C * slope and fn <= f:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return OptimResult(x, f, "line_search_failure", it, hist)

        gn = np.asarray(p.gradient(xn), dtype=float)
        s, yv = xn - x, gn - g
        if s @ yv > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            pairs.append((s, yv, 1.0 / (s @ yv)))
        else:
            # negative curvature along the step: the memory no longer models
            # the local Hessian, so drop it rather than keep stale pairs
            pairs.clear()
        x, f, g = xn, fn, gn
        hist.append(f)

    return OptimResult(x, f, "max_iter", p.max_iter, hist)


def brent_root(f: callable, a: float, b: float, tol: float = 1e-8,
               max_iter: int = 200) -> float:
    """Root of f on [a, b] by Brent's method (bisection/secant/IQI blend).

    Requires a sign change: f(a)*f(b) <= 0, else BracketError. Returns r
    with bracket width below tol; r always lies inside [a, b].
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise BracketError(f"no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}")

    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if fb * fc > 0.0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * _EPS * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:  # secant
                pp = 2.0 * xm * s
                q = 1.0 - s
            else:       # inverse quadratic interpolation
                q = fa / fc
                r = fb / fc
                pp = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if pp > 0.0:
                q = -q
            pp = abs(pp)
            if 2.0 * pp < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, pp / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b += d if abs(d) > tol1 else (tol1 if xm > 0 else -tol1)
        fb = f(b)
    raise RuntimeError(f"brent_root: no convergence in {max_iter} iterations")
