"""Confidence-width schedules, LCB/UCB construction, and information gain.

The confidence multiplier for function i at step t is

    beta_sqrt(i, t) = B_i + sigma * sqrt(2 * (gamma_{t-1} + 1 + ln((N+1)/delta)))

where B_i bounds the function's RKHS norm, sigma is the sub-Gaussian noise
scale, and gamma_{t-1} is the maximum information gain obtainable from t-1
observations.  Three schedules are offered:

* ``theory``:        the formula above with a caller-supplied gamma table
                     (falls back to the greedy estimate when none is given);
* ``greedy-gamma``:  the formula with gamma estimated by greedy submodular
                     subset selection on the acquisition grid;
* ``fixed``:         a constant multiplier, common in practice.

The exact maximum information gain is an NP-hard subset-selection problem;
the greedy value is a certified (1 - 1/e)-factor surrogate and is what this
module computes.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass

import numpy as np

from .gp import GpPosterior, posterior_mean, posterior_var
from .kernels import KernelSpec, kernel_diag, kernel_matrix

BETA_THEORY = "theory"
BETA_GREEDY_GAMMA = "greedy-gamma"
BETA_FIXED = "fixed"

_BETA_MODES = (BETA_THEORY, BETA_GREEDY_GAMMA, BETA_FIXED)


@dataclass(frozen=True)
class ConfidenceConfig:
    """Inputs of the confidence-width formula.

    ``rkhs_bounds`` holds B_0 (objective) followed by B_1..B_N (constraints).
    """

    rkhs_bounds: tuple[float, ...]
    noise_sigma: float
    delta: float
    num_constraints: int
    beta_mode: str = BETA_GREEDY_GAMMA
    beta_fixed: float | None = None

    def __post_init__(self):
        if self.beta_mode not in _BETA_MODES:
            raise ValueError(
                f"unknown beta_mode {self.beta_mode!r}; expected one of {_BETA_MODES}"
            )
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.num_constraints < 1:
            raise ValueError(
                f"num_constraints must be >= 1, got {self.num_constraints}"
            )
        if len(self.rkhs_bounds) != self.num_constraints + 1:
            raise ValueError(
                f"expected {self.num_constraints + 1} RKHS bounds, "
                f"got {len(self.rkhs_bounds)}"
            )
        if any(b <= 0 for b in self.rkhs_bounds):
            raise ValueError("all RKHS bounds must be positive")
        if self.beta_mode == BETA_FIXED and (
            self.beta_fixed is None or self.beta_fixed <= 0
        ):
            raise ValueError("fixed beta_mode requires a positive beta_fixed")


@dataclass(frozen=True, eq=False)
class GammaEstimate:
    """Per-function information-gain values at a given step count.

    ``method`` is ``"greedy"`` (submodular surrogate of the maximum) or
    ``"realized"`` (gain of the actually sampled sequence).
    """

    values: tuple[float, ...]
    method: str
    t: int

    def __post_init__(self):
        if self.method not in ("greedy", "realized"):
            raise ValueError(f"unknown gamma method {self.method!r}")
        if any(v < 0 for v in self.values):
            raise ValueError("information gain values must be >= 0")


def beta_sqrt(cfg: ConfidenceConfig, i: int, t: int, gamma_prev: float) -> float:
    """Confidence multiplier for function i at step t.

    ``gamma_prev`` is the information gain available after t-1 observations
    (ignored in fixed mode).
    """
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if gamma_prev < 0:
        raise ValueError(f"gamma_prev must be >= 0, got {gamma_prev}")
    if cfg.beta_mode == BETA_FIXED:
        return float(cfg.beta_fixed)
    b = cfg.rkhs_bounds[i]
    n_funcs = cfg.num_constraints + 1
    return float(
        b
        + cfg.noise_sigma
        * math.sqrt(2.0 * (gamma_prev + 1.0 + math.log(n_funcs / cfg.delta)))
    )


def lcb(gp: GpPosterior, beta: float, x):
    """Lower confidence bound mean - beta * std; accepts (d,) or (n, d)."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return posterior_mean(gp, x) - beta * np.sqrt(posterior_var(gp, x))


def ucb(gp: GpPosterior, beta: float, x):
    """Upper confidence bound mean + beta * std; accepts (d,) or (n, d)."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return posterior_mean(gp, x) + beta * np.sqrt(posterior_var(gp, x))


def greedy_gamma_curve(kernel: KernelSpec, grid, t_max: int, lam: float) -> np.ndarray:
    """Greedy information-gain values for subset sizes 1..t_max.

    Runs greedy submodular maximization of 0.5 * log det(I + K_X / lam) over
    subsets X of the grid, returning the running value after each selection.
    Ties break toward the lowest grid index, making the result deterministic
    for a fixed grid order.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    n = grid.shape[0]
    if n == 0:
        raise ValueError("grid must be nonempty")
    if t_max < 1:
        raise ValueError(f"subset size must be >= 1, got {t_max}")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if t_max > n:
        warnings.warn(
            f"requested subset size {t_max} exceeds grid size {n}; capping",
            RuntimeWarning,
        )
        t_max = n

    # v[x] = posterior variance of x given the selected set; A stacks the
    # rows of L^{-1} K_{S,grid} so that v = diag(K) - sum_m A[m]^2.
    v = kernel_diag(kernel, grid).astype(float)
    A = np.empty((t_max, n))
    gains = np.empty(t_max)
    total = 0.0
    for m in range(t_max):
        j = int(np.argmax(v))  # marginal gain is monotone in variance
        vj = max(v[j], 0.0)
        total += 0.5 * math.log1p(vj / lam)
        gains[m] = total
        kj = kernel_matrix(kernel, grid[j : j + 1], grid)[0]
        if m > 0:
            kj = kj - A[:m, j] @ A[:m]
        A[m] = kj / math.sqrt(vj + lam)
        v = np.maximum(v - A[m] ** 2, 0.0)
    return gains


def estimate_gamma(kernel: KernelSpec, domain_grid, t: int, lam: float) -> float:
    """Greedy estimate of the maximum information gain at subset size t."""
    curve = greedy_gamma_curve(kernel, domain_grid, t, lam)
    return float(curve[-1])


# Greedy curves are pure functions of (kernel, domain, lam); runs in the same
# process share them through this cache, reusing prefixes of longer curves.
_CURVE_CACHE: dict = {}
_CURVE_LOCK = threading.Lock()


def cached_gamma_curve(kernel: KernelSpec, domain, t_max: int, lam: float) -> np.ndarray:
    """Memoized greedy_gamma_curve over a domain's grid (see acquisition)."""
    key = (kernel, domain, float(lam))
    with _CURVE_LOCK:
        hit = _CURVE_CACHE.get(key)
    if hit is not None and len(hit) >= min(t_max, domain.grid_points().shape[0]):
        return hit[:t_max]
    curve = greedy_gamma_curve(kernel, domain.grid_points(), t_max, lam)
    with _CURVE_LOCK:
        _CURVE_CACHE[key] = curve
    return curve
