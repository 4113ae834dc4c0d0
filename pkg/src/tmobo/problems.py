"""Benchmark problems and the space-filling initial design."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist

__all__ = ["Problem", "dtlz1", "dtlz1_g", "make_problem", "PROBLEMS", "latin_hypercube"]


@dataclass(frozen=True)
class Problem:
    """A box-constrained multi-objective function to be minimized.

    ``func(x, rng)`` returns the p objective values at ``x``; observation
    noise, if any, is drawn from ``rng``.
    """

    name: str
    dim_in: int
    dim_out: int
    bounds: np.ndarray
    func: Callable

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float).reshape(self.dim_in, 2)
        if not np.all(b[:, 0] < b[:, 1]):
            raise ValueError("problem bounds need lo < hi in every dimension")
        b.setflags(write=False)
        object.__setattr__(self, "bounds", b)

    def evaluate(self, x, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim_in:
            raise ValueError(f"{self.name} expects {self.dim_in} inputs, got {x.size}")
        return np.asarray(self.func(x, rng), dtype=float)


def dtlz1_g(xm) -> float:
    xm = np.asarray(xm, dtype=float) - 0.5
    return 100.0 * (xm.size + np.sum(xm**2 - np.cos(20.0 * math.pi * xm)))


def dtlz1(x, noise_sd: float = 0.0, rng=None, n_obj: int = 3) -> np.ndarray:
    """DTLZ1 with optional additive Gaussian noise on each objective.

    The last ``len(x) - n_obj + 1`` variables feed the multimodal distance
    function ``g``; noiseless objectives satisfy ``sum(f) == 0.5 * (1 + g)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size < n_obj:
        raise ValueError("DTLZ1 needs at least as many inputs as objectives")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"DTLZ1 inputs must lie in [0, 1], got {x}")
    g = dtlz1_g(x[n_obj - 1 :])
    f = np.full(n_obj, 0.5 * (1.0 + g))
    for i in range(n_obj):
        f[i] *= np.prod(x[: n_obj - 1 - i])
        if i > 0:
            f[i] *= 1.0 - x[n_obj - 1 - i]
    if noise_sd > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_sd > 0")
        f = f + noise_sd * rng.standard_normal(n_obj)
    return f


def _make_dtlz1(noise_sd=0.0, dim_in=6, dim_out=3):
    return Problem(
        name="dtlz1",
        dim_in=dim_in,
        dim_out=dim_out,
        bounds=np.tile([0.0, 1.0], (dim_in, 1)),
        func=lambda x, rng: dtlz1(x, noise_sd, rng, dim_out),
    )


PROBLEMS = {"dtlz1": _make_dtlz1}


def make_problem(name: str, noise_sd: float = 0.0) -> Problem:
    try:
        factory = PROBLEMS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; available: {sorted(PROBLEMS)}") from None
    return factory(noise_sd=noise_sd)


def latin_hypercube(n: int, d: int, bounds=None, seed=None, candidates: int = 1000) -> np.ndarray:
    """Maximin Latin hypercube design.

    Draws ``candidates`` random Latin hypercubes (one point per stratum of
    width 1/n in every dimension) and keeps the one with the largest minimum
    pairwise distance.

    Args:
        n: Number of points (>= 2).
        d: Input dimension.
        bounds: (d, 2) array of box bounds; the unit cube when omitted.
        seed: Seed or ``numpy.random.Generator``.
        candidates: Number of random designs compared.
    """
    if n < 2:
        raise ValueError("a Latin hypercube needs n >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    best, best_score = None, -np.inf
    for _ in range(max(1, candidates)):
        perms = np.argsort(rng.random((d, n)), axis=1).T
        design = (perms + rng.random((n, d))) / n
        score = pdist(design).min()
        if score > best_score:
            best, best_score = design, score
    if bounds is not None:
        b = np.asarray(bounds, dtype=float).reshape(d, 2)
        best = b[:, 0] + best * (b[:, 1] - b[:, 0])
    return best
