"""Gaussian-process posterior regression with incremental Cholesky updates.

The model regularizes with a configurable noise variance ``lam`` (the
surrogate's modelling noise, decoupled from the true observation noise):

    mean(x) = k_t(x)' (K_t + lam I)^{-1} y_{1:t}
    var(x)  = k(x, x) - k_t(x)' (K_t + lam I)^{-1} k_t(x)

A :class:`GpPosterior` is immutable; :func:`update` returns a new posterior
whose Cholesky factor is extended by rank-1 bordering in O(t^2).  The running
information gain ``0.5 * log det(I + K_t / lam)`` is accumulated alongside.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .kernels import JITTER_LADDER, KernelSpec, gram_matrix, kernel_diag, kernel_matrix


class FactorizationError(RuntimeError):
    """Raised when the Gram matrix cannot be factorized even with jitter."""


@dataclass(frozen=True, eq=False)
class GpPosterior:
    """Immutable GP posterior over one scalar function.

    Attributes
    ----------
    kernel : KernelSpec
    inputs : np.ndarray, shape (t, d)
    observations : np.ndarray, shape (t,)
    noise_lambda : float
        Modelling noise variance lam > 0.
    factor : np.ndarray, shape (t, t)
        Lower Cholesky factor of K_t + (lam + jitter) I.
    alpha : np.ndarray, shape (t,)
        Precomputed (K_t + lam I)^{-1} y.
    info_gain_running : float
        0.5 * log det(I + K_t / lam), accumulated incrementally.
    jitter : float
        Diagonal jitter actually applied during factorization.
    """

    kernel: KernelSpec
    inputs: np.ndarray
    observations: np.ndarray
    noise_lambda: float
    factor: np.ndarray
    alpha: np.ndarray
    info_gain_running: float
    jitter: float

    @property
    def num_points(self) -> int:
        return self.inputs.shape[0]


def _try_factor(K: np.ndarray, lam: float, variance: float):
    """Cholesky of K + (lam + jitter) I, escalating jitter on failure."""
    t = K.shape[0]
    last_err = None
    for scale in JITTER_LADDER:
        jitter = scale * variance
        try:
            L = cholesky(K + (lam + jitter) * np.eye(t), lower=True)
            return L, jitter
        except np.linalg.LinAlgError as err:
            last_err = err
    cond = np.linalg.cond(K + lam * np.eye(t)) if t else 0.0
    raise FactorizationError(
        f"Cholesky factorization failed for a {t}x{t} Gram matrix "
        f"(lambda={lam}, condition number ~{cond:.3e}): {last_err}"
    )


def fit(kernel: KernelSpec, X, y, lam: float) -> GpPosterior:
    """Fit a posterior from scratch; t = 0 yields the prior."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    X = np.asarray(X, dtype=float).reshape(-1, kernel.dimension)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"got {X.shape[0]} inputs but {y.shape[0]} observations")
    t = X.shape[0]
    if t == 0:
        empty = np.zeros((0, 0))
        return GpPosterior(
            kernel=kernel,
            inputs=X.copy(),
            observations=y.copy(),
            noise_lambda=float(lam),
            factor=empty,
            alpha=np.zeros(0),
            info_gain_running=0.0,
            jitter=JITTER_LADDER[0] * kernel.variance,
        )
    K = gram_matrix(kernel, X)
    L, jitter = _try_factor(K, lam, kernel.variance)
    alpha = cho_solve((L, True), y)
    # 0.5 log det(I + K/lam) = sum log diag(L) - (t/2) log lam
    info = float(np.sum(np.log(np.diag(L))) - 0.5 * t * np.log(lam))
    return GpPosterior(
        kernel=kernel,
        inputs=X.copy(),
        observations=y.copy(),
        noise_lambda=float(lam),
        factor=L,
        alpha=alpha,
        info_gain_running=info,
        jitter=jitter,
    )


def prior(kernel: KernelSpec, lam: float) -> GpPosterior:
    """Posterior with no data: mean 0, variance k(x, x)."""
    return fit(kernel, np.zeros((0, kernel.dimension)), np.zeros(0), lam)


def _query(gp: GpPosterior, x):
    """Coerce query to (n, d); remember whether input was a single point."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != gp.kernel.dimension:
        raise ValueError(
            f"query dimension {arr.shape[1]} != kernel dimension {gp.kernel.dimension}"
        )
    return arr, single


def posterior_mean(gp: GpPosterior, x):
    """Posterior mean at x; accepts a single (d,) point or an (n, d) batch."""
    Q, single = _query(gp, x)
    if gp.num_points == 0:
        out = np.zeros(Q.shape[0])
    else:
        kq = kernel_matrix(gp.kernel, gp.inputs, Q)
        out = kq.T @ gp.alpha
    return float(out[0]) if single else out


def posterior_var(gp: GpPosterior, x):
    """Posterior variance at x, clamped to [0, k(x, x)].

    Values below -1e-6 before clamping indicate numerical trouble and are
    reported as a RuntimeWarning.
    """
    Q, single = _query(gp, x)
    prior_diag = kernel_diag(gp.kernel, Q)
    if gp.num_points == 0:
        out = prior_diag
    else:
        kq = kernel_matrix(gp.kernel, gp.inputs, Q)
        V = solve_triangular(gp.factor, kq, lower=True)
        out = prior_diag - np.einsum("ij,ij->j", V, V)
        if np.any(out < -1e-6):
            warnings.warn(
                f"posterior variance fell below -1e-6 (min {out.min():.3e}); "
                "clamping to 0",
                RuntimeWarning,
            )
        out = np.clip(out, 0.0, prior_diag)
    return float(out[0]) if single else out


def update(gp: GpPosterior, x, y: float) -> GpPosterior:
    """Posterior with one observation appended (rank-1 bordered factor).

    Falls back to a full refit if the bordering is numerically unstable.
    The information gain increases by 0.5 * log(1 + var(x) / lam), with the
    variance taken before insertion.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != gp.kernel.dimension:
        raise ValueError(
            f"point dimension {x.shape[0]} != kernel dimension {gp.kernel.dimension}"
        )
    t = gp.num_points
    X_new = np.vstack([gp.inputs, x[None, :]])
    y_new = np.append(gp.observations, float(y))
    kxx = float(kernel_diag(gp.kernel, x[None, :])[0])

    if t == 0:
        c = np.zeros(0)
        cross = 0.0
    else:
        kvec = kernel_matrix(gp.kernel, gp.inputs, x[None, :])[:, 0]
        c = solve_triangular(gp.factor, kvec, lower=True)
        cross = float(c @ c)

    var_before = max(kxx - cross, 0.0)
    d_sq = kxx + gp.noise_lambda + gp.jitter - cross
    if d_sq <= 1e-12 * (kxx + gp.noise_lambda):
        # bordering lost positive definiteness; refit with the jitter ladder
        refit = fit(gp.kernel, X_new, y_new, gp.noise_lambda)
        info = gp.info_gain_running + 0.5 * np.log1p(var_before / gp.noise_lambda)
        return GpPosterior(
            kernel=refit.kernel,
            inputs=refit.inputs,
            observations=refit.observations,
            noise_lambda=refit.noise_lambda,
            factor=refit.factor,
            alpha=refit.alpha,
            info_gain_running=info,
            jitter=refit.jitter,
        )

    L_new = np.zeros((t + 1, t + 1))
    L_new[:t, :t] = gp.factor
    L_new[t, :t] = c
    L_new[t, t] = np.sqrt(d_sq)
    alpha = cho_solve((L_new, True), y_new)
    info = gp.info_gain_running + 0.5 * float(np.log1p(var_before / gp.noise_lambda))
    return GpPosterior(
        kernel=gp.kernel,
        inputs=X_new,
        observations=y_new,
        noise_lambda=gp.noise_lambda,
        factor=L_new,
        alpha=alpha,
        info_gain_running=info,
        jitter=gp.jitter,
    )
