"""Pareto dominance, hypervolume and cell decomposition of the non-dominated region.

All routines assume minimization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParetoFront",
    "CellDecomposition",
    "dominates",
    "extract_front",
    "hypervolume",
    "decompose",
    "exclusive_hypervolume",
    "default_ideal_point",
]


def dominates(a, b) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and better somewhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


class ParetoFront:
    """Mutually non-dominated, deduplicated objective vectors.

    Construction checks the non-domination invariant; use :func:`extract_front`
    to build a front from arbitrary points.
    """

    def __init__(self, points, p: int | None = None):
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            if p is None:
                p = pts.shape[1] if pts.ndim == 2 else 0
            pts = np.zeros((0, p))
        pts = np.atleast_2d(pts)
        if not np.all(np.isfinite(pts)):
            raise ValueError("front points must be finite")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("front contains duplicate points")
        for i in range(len(pts)):
            le = np.all(pts <= pts[i], axis=1) & np.any(pts < pts[i], axis=1)
            if le.any():
                raise ValueError(f"front point {pts[i]} is dominated")
        pts.setflags(write=False)
        self.points = pts

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __repr__(self):
        return f"ParetoFront({len(self)} points, p={self.p})"

    def with_point(self, y) -> "ParetoFront":
        """Front of the union of this front and ``y``."""
        return extract_front(np.vstack([self.points, np.atleast_2d(y)]))

    def is_dominated(self, y) -> bool:
        """True if some member weakly dominates ``y`` (equality counts)."""
        if len(self) == 0:
            return False
        return bool(np.any(np.all(self.points <= np.asarray(y, dtype=float), axis=1)))


def extract_front(Y) -> ParetoFront:
    """Non-dominated rows of ``Y`` (n, p), exact duplicates collapsed."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.size == 0:
        return ParetoFront(np.zeros((0, Y.shape[1] if Y.ndim == 2 else 0)))
    U = np.unique(Y, axis=0)
    keep = np.ones(len(U), dtype=bool)
    for i in range(len(U)):
        dom = np.all(U <= U[i], axis=1) & np.any(U < U[i], axis=1)
        keep[i] = not dom.any()
    return ParetoFront(U[keep])


def _hv_sweep(pts, ref):
    """Hypervolume by slicing along the last objective (points < ref)."""
    if len(pts) == 0:
        return 0.0
    if pts.shape[1] == 1:
        return float(ref[0] - pts[:, 0].min())
    if pts.shape[1] == 2:
        order = np.argsort(pts[:, 0], kind="stable")
        vol, best = 0.0, ref[1]
        for x, y in pts[order]:
            if y < best:
                vol += (ref[0] - x) * (best - y)
                best = y
        return float(vol)
    order = np.argsort(pts[:, -1], kind="stable")
    pts = pts[order]
    vol = 0.0
    for i in range(len(pts)):
        top = pts[i + 1, -1] if i + 1 < len(pts) else ref[-1]
        depth = top - pts[i, -1]
        if depth <= 0:
            continue
        slab = extract_front(pts[: i + 1, :-1]).points
        vol += depth * _hv_sweep(slab, ref[:-1])
    return float(vol)


def hypervolume(front, ref) -> float:
    """Volume dominated by ``front`` and bounded above by ``ref``.

    Points that do not strictly dominate ``ref`` contribute nothing and are
    dropped.
    """
    pts = front.points if isinstance(front, ParetoFront) else np.atleast_2d(np.asarray(front, float))
    ref = np.asarray(ref, dtype=float)
    if pts.size == 0:
        return 0.0
    if pts.shape[1] != ref.shape[0]:
        raise ValueError("reference point dimension does not match the front")
    pts = pts[np.all(pts < ref, axis=1)]
    if len(pts) == 0:
        return 0.0
    return _hv_sweep(extract_front(pts).points, ref)


@dataclass(frozen=True, eq=False)
class CellDecomposition:
    """Axis-aligned boxes ``[lower[k], upper[k]]`` tiling the non-dominated region.

    ``dominated_lower``/``dominated_upper`` tile the complementary dominated
    part of the same bounding box.
    """

    lower: np.ndarray
    upper: np.ndarray
    f_min: np.ndarray
    f_max: np.ndarray
    dominated_lower: np.ndarray
    dominated_upper: np.ndarray

    @property
    def q(self) -> int:
        return len(self.lower)

    @property
    def p(self) -> int:
        return len(self.f_min)

    @property
    def cells(self):
        return list(zip(self.lower, self.upper))

    def volumes(self) -> np.ndarray:
        return np.prod(self.upper - self.lower, axis=1)

    def grid(self):
        """Per-objective sorted bound values and the index of each cell bound.

        Lets callers evaluate a CDF once per distinct bound instead of once per
        cell.
        """
        grids, lo_idx, up_idx = [], [], []
        for j in range(self.p):
            g = np.unique(np.concatenate([self.lower[:, j], self.upper[:, j]]))
            grids.append(g)
            lo_idx.append(np.searchsorted(g, self.lower[:, j]))
            up_idx.append(np.searchsorted(g, self.upper[:, j]))
        return grids, np.array(lo_idx).T, np.array(up_idx).T


def _partition(pts, lo, hi, free, dominated):
    # keep only members whose dominated orthant meets the box interior
    pts = pts[np.all(pts < hi, axis=1)]
    if len(pts) == 0:
        free.append((lo, hi))
        return
    if np.any(np.all(pts <= lo, axis=1)):
        dominated.append((lo, hi))
        return
    # pivot: the member dominating the largest share of the box
    corners = np.maximum(pts, lo)
    pivot = corners[np.argmax(np.prod(hi - corners, axis=1))]
    split = pivot > lo
    for side in itertools.product((0, 1), repeat=len(lo)):
        side = np.array(side, dtype=bool)
        if np.any(~side & ~split):
            continue  # empty slab below a coordinate that was not split
        sub_lo = np.where(side, pivot, lo)
        sub_hi = np.where(side, hi, pivot)
        if side.all():
            dominated.append((sub_lo, sub_hi))
        else:
            _partition(pts, sub_lo, sub_hi, free, dominated)


def decompose(front: ParetoFront, f_min, f_max) -> CellDecomposition:
    """Split the box ``[f_min, f_max]`` into non-dominated and dominated cells.

    The box is split at the coordinates of a pivot front point into up to
    ``2**p`` sub-boxes; the one above the pivot is dominated and the others are
    split recursively until no front point dominates any of their interior
    (non-dominated cells) or one front point dominates all of it.

    Raises:
        ValueError: if the bounds are not ordered or a front point is outside
            the box.
    """
    f_min = np.asarray(f_min, dtype=float)
    f_max = np.asarray(f_max, dtype=float)
    if f_min.shape != f_max.shape or not np.all(f_min < f_max):
        raise ValueError(f"need f_min < f_max componentwise, got {f_min}, {f_max}")
    pts = front.points if isinstance(front, ParetoFront) else np.atleast_2d(np.asarray(front, float))
    if pts.size and pts.shape[1] != f_min.size:
        raise ValueError("front dimension does not match the bounds")
    pts = pts.reshape(-1, f_min.size)
    if np.any(pts < f_min) or np.any(pts > f_max):
        raise ValueError("front points must lie within [f_min, f_max]")
    free, dominated = [], []
    _partition(pts, f_min.copy(), f_max.copy(), free, dominated)
    p = f_min.size

    def stack(boxes, k):
        return np.array([b[k] for b in boxes]).reshape(-1, p)

    return CellDecomposition(
        lower=stack(free, 0), upper=stack(free, 1), f_min=f_min, f_max=f_max,
        dominated_lower=stack(dominated, 0), dominated_upper=stack(dominated, 1),
    )


def exclusive_hypervolume(front: ParetoFront, cells: CellDecomposition, mu) -> float:
    """Hypervolume gained by adding ``mu`` to ``front``, summed over the cells.

    Zero when ``mu`` is (weakly) dominated by the front. Each cell contributes
    ``prod_j max(0, u_j - max(l_j, mu_j))``.
    """
    mu = np.asarray(mu, dtype=float)
    if front.is_dominated(mu):
        return 0.0
    return float(np.sum(np.prod(np.maximum(cells.upper - np.maximum(cells.lower, mu), 0.0), axis=1)))


def exclusive_hypervolume_many(cells: CellDecomposition, front: ParetoFront, M) -> np.ndarray:
    """:func:`exclusive_hypervolume` for each row of ``M`` (m, p)."""
    M = np.atleast_2d(M)
    out = np.zeros(len(M))
    if len(front):
        dominated = np.any(np.all(front.points[None, :, :] <= M[:, None, :], axis=2), axis=1)
    else:
        dominated = np.zeros(len(M), dtype=bool)
    live = ~dominated
    if live.any() and cells.q:
        Ml = M[live]
        # chunked to bound memory at (chunk, q, p)
        res = np.empty(len(Ml))
        step = max(1, 2_000_000 // max(cells.q * cells.p, 1))
        for s in range(0, len(Ml), step):
            m = Ml[s : s + step, None, :]
            side = np.maximum(cells.upper[None] - np.maximum(cells.lower[None], m), 0.0)
            res[s : s + step] = np.prod(side, axis=2).sum(axis=1)
        out[live] = res
    return out


def default_ideal_point(Y, f_max=None, margin: float = 0.5) -> np.ndarray:
    """Componentwise minimum of ``Y`` lowered by ``margin`` times the observed range.

    Kept strictly below ``f_max`` when given.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    lo = Y.min(axis=0)
    span = Y.max(axis=0) - lo
    f_min = lo - margin * span
    if f_max is not None:
        f_max = np.asarray(f_max, dtype=float)
        gap = np.maximum(np.abs(f_max), 1.0) * 1e-6
        f_min = np.where(f_min < f_max, f_min, f_max - np.maximum(margin * span, gap))
        f_min = np.minimum(f_min, f_max - gap)
    return f_min
