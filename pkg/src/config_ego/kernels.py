"""Covariance kernels and Gram-matrix construction for the surrogate models.

Three families are supported:

* ``linear``:               k(x, y) = variance * <x, y>
* ``squared-exponential``:  k(x, y) = variance * exp(-||x - y||^2 / lengthscale^2)
* ``matern``:               half-integer smoothness nu in {1/2, 3/2, 5/2}, with
                            scaled distance u = sqrt(2 nu) * ||x - y|| / lengthscale

Note the squared-exponential convention above divides by ``lengthscale**2``
(no factor of 2 in the denominator).  The Matern family uses the standard
closed forms

    nu = 1/2:  variance * exp(-u)
    nu = 3/2:  variance * (1 + u) * exp(-u)
    nu = 5/2:  variance * (1 + u + u^2/3) * exp(-u)

General (non-half-integer) nu is rejected at configuration time so that no
special-function dependency is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINEAR = "linear"
SQUARED_EXPONENTIAL = "squared-exponential"
MATERN = "matern"

_FAMILIES = (LINEAR, SQUARED_EXPONENTIAL, MATERN)
_MATERN_NUS = (0.5, 1.5, 2.5)

# Diagonal jitter (as a fraction of the signal variance) added before
# factorizing Gram matrices; escalation ladder used on failure.
DEFAULT_JITTER_SCALE = 1e-10
JITTER_LADDER = (1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters (isotropic lengthscale only).

    Parameters
    ----------
    family : str
        One of ``"linear"``, ``"squared-exponential"``, ``"matern"``.
    variance : float
        Signal variance; k(x, x) equals this for the stationary families.
    lengthscale : float
        Isotropic lengthscale.
    dimension : int
        Input dimension d >= 1.
    nu : float, optional
        Matern smoothness; must be one of 0.5, 1.5, 2.5.
    """

    family: str
    variance: float
    lengthscale: float
    dimension: int
    nu: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}"
            )
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.family == MATERN:
            if self.nu is None or self.nu not in _MATERN_NUS:
                raise ValueError(
                    f"matern smoothness nu must be one of {_MATERN_NUS}, got {self.nu}"
                )
        elif self.nu is not None:
            raise ValueError(f"nu is only meaningful for the matern family")


def _as_matrix(spec: KernelSpec, x) -> np.ndarray:
    """Coerce x to an (n, d) array, checking the dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != spec.dimension:
        raise ValueError(
            f"expected points of dimension {spec.dimension}, got shape {arr.shape}"
        )
    return arr


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """Cross-covariance matrix with entries k(X[a], Y[b]), shape (n, m)."""
    X = _as_matrix(spec, X)
    Y = _as_matrix(spec, Y)
    if spec.family == LINEAR:
        return spec.variance * (X @ Y.T)
    diff = X[:, None, :] - Y[None, :, :]
    sqdist = np.einsum("abk,abk->ab", diff, diff)
    if spec.family == SQUARED_EXPONENTIAL:
        return spec.variance * np.exp(-sqdist / spec.lengthscale**2)
    # matern: closed forms over u = sqrt(2 nu) * dist / lengthscale
    dist = np.sqrt(np.maximum(sqdist, 0.0))
    u = np.sqrt(2.0 * spec.nu) * dist / spec.lengthscale
    if spec.nu == 0.5:
        poly = 1.0
    elif spec.nu == 1.5:
        poly = 1.0 + u
    else:  # nu == 2.5
        poly = 1.0 + u + u * u / 3.0
    return spec.variance * poly * np.exp(-u)


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for a single pair of points."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != spec.dimension or y.shape[0] != spec.dimension:
        raise ValueError(
            f"expected points of dimension {spec.dimension}, "
            f"got {x.shape[0]} and {y.shape[0]}"
        )
    return float(kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    """Vector of k(x, x) values (prior variances) for each row of X."""
    X = _as_matrix(spec, X)
    if spec.family == LINEAR:
        return spec.variance * np.einsum("ij,ij->i", X, X)
    return np.full(X.shape[0], spec.variance)


def gram_matrix(spec: KernelSpec, X) -> np.ndarray:
    """Symmetric PSD Gram matrix of the points in X, shape (t, t)."""
    X = _as_matrix(spec, X)
    return kernel_matrix(spec, X, X)
