"""Squared-exponential covariance with per-dimension lengthscales."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, LinAlgError

__all__ = [
    "KernelParams",
    "ConditioningError",
    "rbf",
    "gram",
    "gram_cross",
    "jittered_cholesky",
]

JITTER_START = 1e-10
JITTER_MAX = 1e-4


class ConditioningError(np.linalg.LinAlgError):
    """Raised when a Gram matrix cannot be factorized even with jitter."""

    def __init__(self, message, jitters=()):
        super().__init__(message)
        self.jitters = tuple(jitters)


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the RBF kernel plus a white-noise diagonal.

    Attributes:
        lengthscales: One positive lengthscale per input dimension.
        signal_variance: Prior variance of the latent function.
        noise_variance: Variance added to the Gram diagonal.
    """

    lengthscales: tuple
    signal_variance: float
    noise_variance: float = 0.0

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if not ls or any(not (v > 0) or not np.isfinite(v) for v in ls):
            raise ValueError(f"lengthscales must be positive and finite, got {ls}")
        if not (self.signal_variance > 0) or not np.isfinite(self.signal_variance):
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if not (self.noise_variance >= 0) or not np.isfinite(self.noise_variance):
            raise ValueError(f"noise_variance must be non-negative, got {self.noise_variance}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def to_dict(self) -> dict:
        return {
            "lengthscales": list(self.lengthscales),
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelParams":
        return cls(
            lengthscales=tuple(d["lengthscales"]),
            signal_variance=d["signal_variance"],
            noise_variance=d.get("noise_variance", 0.0),
        )


def _as_rows(X, d, name):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, d) if X.size else X.reshape(0, d)
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"{name} must have {d} columns, got shape {X.shape}")
    return X


def _scaled_sqdist(A, B, lengthscales):
    ls = np.asarray(lengthscales)
    A = A / ls
    B = B / ls
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def rbf(x, x2, params: KernelParams) -> float:
    """Evaluate ``sv * exp(-0.5 * sum(((x - x2) / l) ** 2))``."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape or x.size != params.dim:
        raise ValueError(
            f"dimension mismatch: {x.size}, {x2.size}, lengthscales {params.dim}"
        )
    r = (x - x2) / np.asarray(params.lengthscales)
    return params.signal_variance * float(np.exp(-0.5 * np.dot(r, r)))


def gram(X, params: KernelParams, include_noise: bool = False) -> np.ndarray:
    """Gram matrix of ``X`` (n, d); noise optionally added to the diagonal."""
    X = _as_rows(X, params.dim, "X")
    if X.shape[0] < 1:
        raise ValueError("gram requires at least one input")
    # Differences rather than the expanded quadratic keep the matrix exactly
    # symmetric with an exact diagonal.
    diff = (X[:, None, :] - X[None, :, :]) / np.asarray(params.lengthscales)
    K = params.signal_variance * np.exp(-0.5 * np.einsum("ijk,ijk->ij", diff, diff))
    if include_noise:
        K[np.diag_indices_from(K)] += params.noise_variance
    return K


def gram_cross(X, Xstar, params: KernelParams) -> np.ndarray:
    """Cross-covariance between training rows ``X`` and test rows ``Xstar``."""
    X = _as_rows(X, params.dim, "X")
    Xstar = _as_rows(Xstar, params.dim, "Xstar")
    if Xstar.shape[0] == 0:
        return np.zeros((X.shape[0], 0))
    return params.signal_variance * np.exp(
        -0.5 * _scaled_sqdist(X, Xstar, params.lengthscales)
    )


def jittered_cholesky(K: np.ndarray):
    """Lower Cholesky factor of ``K``, adding diagonal jitter on failure.

    Jitter starts at ``1e-10 * mean(diag)`` and grows by 10x up to
    ``1e-4 * mean(diag)``.

    Returns:
        ``(L, jitter)`` where ``jitter`` is the absolute amount added.

    Raises:
        ConditioningError: if every jitter level fails.
    """
    try:
        return cholesky(K, lower=True, check_finite=True), 0.0
    except (LinAlgError, ValueError):
        pass
    scale = float(np.mean(np.diag(K)))
    if not np.isfinite(scale) or scale <= 0:
        raise ConditioningError("Gram matrix has a non-positive diagonal", ())
    tried = []
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-12):
        jitter = rel * scale
        tried.append(jitter)
        try:
            L = cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
            return L, jitter
        except LinAlgError:
            rel *= 10.0
    raise ConditioningError(
        f"Cholesky failed with jitter levels {tried}", tried
    )
