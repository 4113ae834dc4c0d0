"""Hypervolume probability of improvement under independent predictive marginals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, ndtr

from .pareto import CellDecomposition, ParetoFront, exclusive_hypervolume, exclusive_hypervolume_many
from .surrogate import Family, PredictiveMarginal

__all__ = [
    "HvPoIValue",
    "student_t_cdf",
    "gaussian_cdf",
    "marginal_cdf",
    "prob_in_region",
    "prob_in_region_many",
    "hvpoi",
    "hvpoi_many",
]

SKIP_BELOW = 1e-16


@dataclass(frozen=True)
class HvPoIValue:
    value: float
    improvement: float
    prob_in_A: float


def _standard_t_cdf(t, dof):
    t = np.asarray(t, dtype=float)
    x = dof / (dof + t * t)
    tail = 0.5 * betainc(0.5 * dof, 0.5, x)
    return np.where(t > 0, 1.0 - tail, tail)


def student_t_cdf(z, dof, unit_variance: bool = True):
    """CDF of the Student-t with ``dof`` degrees of freedom.

    With ``unit_variance`` (the default) the distribution is rescaled to unit
    variance, i.e. ``T_dof(z * sqrt(dof / (dof - 2)))`` with ``T_dof`` the
    standard Student-t CDF. Infinite ``dof`` gives the normal CDF.

    Raises:
        ValueError: if ``dof <= 2``.
    """
    dof = float(dof)
    if not dof > 2:
        raise ValueError(f"dof must exceed 2, got {dof}")
    z = np.asarray(z, dtype=float)
    if math.isinf(dof):
        out = ndtr(z)
    else:
        t = z * math.sqrt(dof / (dof - 2.0)) if unit_variance else z
        out = _standard_t_cdf(t, dof)
    return float(out) if out.ndim == 0 else out


def gaussian_cdf(z):
    """Standard normal CDF."""
    out = ndtr(np.asarray(z, dtype=float))
    return float(out) if out.ndim == 0 else out


def marginal_cdf(z, dof, family, unit_variance: bool = True):
    if Family.parse(family) is Family.GAUSSIAN or math.isinf(dof):
        return gaussian_cdf(z)
    return student_t_cdf(z, dof, unit_variance)


def prob_in_region_many(means, scales, dofs, families, cells: CellDecomposition,
                        unit_variance: bool = True) -> np.ndarray:
    """Probability mass inside the cells for m candidates at once.

    Args:
        means, scales: (m, p) predictive means and standard deviations.
        dofs, families: per-objective degrees of freedom and family tags.
    """
    means = np.atleast_2d(means)
    scales = np.atleast_2d(scales)
    m, p = means.shape
    if p != cells.p:
        raise ValueError(f"{p} marginals for {cells.p}-objective cells")
    if cells.q == 0:
        return np.zeros(m)
    grids, lo_idx, up_idx = cells.grid()
    # CDF at each distinct bound value, shape (m, len(grid_j)) per objective
    cdf = []
    for j in range(p):
        z = (grids[j][None, :] - means[:, j : j + 1]) / scales[:, j : j + 1]
        cdf.append(np.asarray(marginal_cdf(z, dofs[j], families[j], unit_variance)))
    out = np.empty(m)
    step = max(1, 2_000_000 // max(cells.q * p, 1))
    for s in range(0, m, step):
        prod = None
        for j in range(p):
            diff = cdf[j][s : s + step, up_idx[:, j]] - cdf[j][s : s + step, lo_idx[:, j]]
            prod = diff if prod is None else prod * diff
        out[s : s + step] = prod.sum(axis=1)
    return np.clip(out, 0.0, 1.0)


def _unpack(marginals):
    means = np.array([[mg.mean for mg in marginals]])
    scales = np.array([[math.sqrt(mg.variance) for mg in marginals]])
    return means, scales, [mg.dof for mg in marginals], [mg.family for mg in marginals]


def prob_in_region(marginals, cells: CellDecomposition, unit_variance: bool = True) -> float:
    """Probability that the objective vector lands in the non-dominated cells.

    Sums, over cells, the product across objectives of the marginal CDF
    differences between the cell's upper and lower bounds. Cells where every
    difference is below ``1e-16`` are skipped.
    """
    if len(marginals) != cells.p:
        raise ValueError(f"{len(marginals)} marginals for {cells.p}-objective cells")
    means, scales, dofs, fams = _unpack(marginals)
    total = 0.0
    for lo, up in zip(cells.lower, cells.upper):
        diffs = []
        for j, mg in enumerate(marginals):
            s = scales[0, j]
            d = (marginal_cdf((up[j] - mg.mean) / s, mg.dof, mg.family, unit_variance)
                 - marginal_cdf((lo[j] - mg.mean) / s, mg.dof, mg.family, unit_variance))
            diffs.append(d)
        if all(d < SKIP_BELOW for d in diffs):
            continue
        total += math.prod(diffs)
    return min(max(total, 0.0), 1.0)


def hvpoi(marginals, front: ParetoFront, cells: CellDecomposition,
          unit_variance: bool = True) -> HvPoIValue:
    """Exclusive hypervolume of the mean vector times the probability of landing in A."""
    mu = np.array([mg.mean for mg in marginals])
    improvement = exclusive_hypervolume(front, cells, mu)
    prob = prob_in_region(marginals, cells, unit_variance)
    return HvPoIValue(improvement * prob, improvement, prob)


def hvpoi_many(means, scales, dofs, families, front: ParetoFront, cells: CellDecomposition,
               unit_variance: bool = True) -> np.ndarray:
    """Acquisition values for m candidates; probability skipped where improvement is 0."""
    means = np.atleast_2d(means)
    scales = np.atleast_2d(scales)
    imp = exclusive_hypervolume_many(cells, front, means)
    out = np.zeros(len(means))
    live = imp > 0
    if live.any():
        prob = prob_in_region_many(means[live], scales[live], dofs, families, cells, unit_variance)
        out[live] = imp[live] * prob
    return out
