"""Closed-loop multi-objective Bayesian optimization.

Seeds: replication ``r`` uses ``rep_seed = config.seed + r``. Every random
component draws from ``SeedSequence([rep_seed, stream, ...])`` with a fixed
stream id, so replications never share RNG state and adding replications does
not perturb existing ones:

    stream 0: initial Latin hypercube
    stream 1: observation noise, keyed by evaluation index
    stream 2: acquisition search, keyed by iteration
    stream 3: hyperparameter multi-starts, keyed by (fit.seed, iteration, objective)

Both surrogate families consume identical streams, so for a given replication
they start from the same design and see the same noise sequence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import hvpoi_many
from .config import AcqBudget, ExperimentConfig
from .kernel import ConditioningError
from .pareto import (CellDecomposition, ParetoFront, decompose, default_ideal_point,
                     extract_front, hypervolume)
from .problems import Problem, latin_hypercube, make_problem
from .surrogate import Dataset, Family, SurrogateModel, fit, predict_arrays

__all__ = [
    "OptimizationState",
    "TraceRecord",
    "stream_rng",
    "initial_state",
    "build_cells",
    "acquisition_function",
    "maximize",
    "optimize_acquisition",
    "ask",
    "tell",
    "bo_step",
    "run_replication",
    "run_experiment",
    "summarize",
]

log = logging.getLogger(__name__)

STREAM_LHS, STREAM_NOISE, STREAM_ACQ, STREAM_FIT = 0, 1, 2, 3
CI_Z = 1.96


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def _stream_seed(seed, *key) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, key)]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class OptimizationState:
    X: np.ndarray
    Y: np.ndarray
    rng_seed: int
    iteration: int = 0
    models: tuple = ()
    front: ParetoFront | None = None
    cells: CellDecomposition | None = None

    def __post_init__(self):
        if len(self.X) != len(self.Y):
            raise ValueError("X and Y must have the same number of rows")
        if self.front is None:
            object.__setattr__(self, "front", extract_front(self.Y))

    @property
    def eval_count(self) -> int:
        return len(self.X)


@dataclass
class TraceRecord:
    family: str
    replication: int
    iteration: int
    eval_count: int
    hv_indicator: float
    acq_value: float | None = None
    nu: tuple = ()
    noise: tuple = ()
    lengthscales: tuple = ()
    x: tuple = ()
    y: tuple = ()


def initial_state(problem: Problem, n_init: int, rep_seed: int,
                  lhs_candidates: int = 1000) -> OptimizationState:
    X = latin_hypercube(n_init, problem.dim_in, problem.bounds,
                        stream_rng(rep_seed, STREAM_LHS), lhs_candidates)
    Y = np.array([problem.evaluate(x, stream_rng(rep_seed, STREAM_NOISE, i)) for i, x in enumerate(X)])
    return OptimizationState(X=X, Y=Y, rng_seed=rep_seed)


def build_cells(Y, ref_point, ideal_point=None):
    """Front of ``Y`` plus the cell decomposition of its non-dominated region.

    Front members outside ``[f_min, ref_point)`` dominate nothing inside the
    box and are left out of the decomposition.
    """
    ref = np.asarray(ref_point, dtype=float)
    front = extract_front(Y)
    f_min = (np.asarray(ideal_point, dtype=float) if ideal_point is not None and len(ideal_point)
             else default_ideal_point(Y, ref))
    inside = front.points[np.all(front.points < ref, axis=1) & np.all(front.points >= f_min, axis=1)]
    cells = decompose(ParetoFront(inside, p=ref.size), f_min, ref)
    return front, cells


def acquisition_function(models, front, cells, unit_variance=True):
    """Vectorized HvPoI over candidate rows."""
    dofs = [m.dof for m in models]
    fams = [m.family for m in models]

    def acq(Xc):
        Xc = np.atleast_2d(Xc)
        means = np.empty((len(Xc), len(models)))
        scales = np.empty_like(means)
        for j, m in enumerate(models):
            mu, var = predict_arrays(m, Xc)
            means[:, j] = mu
            scales[:, j] = np.sqrt(var)
        return hvpoi_many(means, scales, dofs, fams, front, cells, unit_variance)

    return acq


def _pattern_search(acq, x0, f0, lo, hi, budget):
    span = hi - lo
    step = 0.05 * span
    x, f = x0.copy(), f0
    used = 0
    d = x.size
    eye = np.eye(d)
    while used < budget and np.all(step > 1e-7 * span):
        polls = np.vstack([x + eye * step, x - eye * step])
        polls = np.clip(polls, lo, hi)
        polls = polls[: max(1, min(len(polls), budget - used))]
        vals = acq(polls)
        used += len(polls)
        k = int(np.argmax(vals))
        if vals[k] > f:
            x, f = polls[k], float(vals[k])
        else:
            step = step * 0.5
    return x, f


def maximize(acq, bounds, budget: AcqBudget, rng):
    """Random search followed by compass-search refinement of the best candidates.

    Returns:
        ``(x, value)``; with an identically-zero acquisition the first random
        sample is returned.
    """
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    d = len(lo)
    cand = lo + rng.random((budget.random_samples(d), d)) * (hi - lo)
    vals = acq(cand)
    order = np.argsort(-vals, kind="stable")
    best_x, best_f = cand[order[0]], float(vals[order[0]])
    if best_f <= 0:
        return best_x, best_f
    for i in order[: budget.topk]:
        if vals[i] <= 0:
            break
        x, f = _pattern_search(acq, cand[i], float(vals[i]), lo, hi, budget.refine_evals)
        if f > best_f:
            best_x, best_f = x, f
    return best_x, best_f


def optimize_acquisition(state: OptimizationState, bounds, budget: AcqBudget, rng,
                         unit_variance: bool = True):
    acq = acquisition_function(state.models, state.front, state.cells, unit_variance)
    return maximize(acq, bounds, budget, rng)


def fit_models(state: OptimizationState, family, config: ExperimentConfig, previous=()):
    models = []
    for j in range(state.Y.shape[1]):
        seed = _stream_seed(state.rng_seed, STREAM_FIT, config.fit.seed, state.iteration, j)
        fc = config.fit.fit_config(family, seed)
        init = None
        if config.warm_start and previous:
            init = (previous[j].params, previous[j].nu)
        models.append(fit(Dataset(state.X, state.Y[:, j]), config=fc, init=init))
    return tuple(models)


def ask(state: OptimizationState, problem: Problem, family, config: ExperimentConfig):
    """Fit surrogates and pick the next input; returns ``(x, acq_value, state)``."""
    models = fit_models(state, family, config, state.models)
    front, cells = build_cells(state.Y, config.ref_point, config.ideal_point or None)
    state = replace(state, models=models, front=front, cells=cells)
    rng = stream_rng(state.rng_seed, STREAM_ACQ, state.iteration)
    x, value = optimize_acquisition(state, problem.bounds, config.acq, rng, config.acq.unit_variance_cdf)
    return x, value, state


def tell(state: OptimizationState, x, y) -> OptimizationState:
    X = np.vstack([state.X, np.atleast_2d(x)])
    Y = np.vstack([state.Y, np.atleast_2d(y)])
    return replace(state, X=X, Y=Y, front=extract_front(Y), iteration=state.iteration + 1)


def _record(family, rep, state, ref, acq_value=None, models=()):
    return TraceRecord(
        family=Family.parse(family).value,
        replication=rep,
        iteration=state.iteration,
        eval_count=state.eval_count,
        hv_indicator=hypervolume(state.front, ref),
        acq_value=acq_value,
        nu=tuple(m.nu for m in models if m.family is Family.STUDENT_T),
        noise=tuple(m.params.noise_variance * m.scale**2 for m in models),
        lengthscales=tuple(m.params.lengthscales for m in models),
        x=tuple(state.X[-1]),
        y=tuple(state.Y[-1]),
    )


def bo_step(state: OptimizationState, problem: Problem, config: ExperimentConfig, family,
            replication: int = 0):
    """One fit-acquire-evaluate cycle; returns ``(new_state, TraceRecord)``.

    The record carries the hyperparameters of the models that chose the point.
    Noise variances are reported in objective units.
    """
    x, value, fitted = ask(state, problem, family, config)
    y = problem.evaluate(x, stream_rng(state.rng_seed, STREAM_NOISE, state.eval_count))
    new = tell(fitted, x, y)
    return new, _record(family, replication, new, config.ref_point, value, fitted.models)


def run_replication(config: ExperimentConfig, family, replication: int, failures=None):
    """Trace records of one replication: the initial design, then each acquisition."""
    problem = make_problem(config.problem, config.noise_sd)
    rep_seed = config.seed + replication
    init = initial_state(problem, config.n_init, rep_seed, lhs_candidates=config.lhs_candidates)
    records = []
    for k in range(1, config.n_init + 1):
        partial = OptimizationState(X=init.X[:k], Y=init.Y[:k], rng_seed=rep_seed)
        records.append(_record(family, replication, partial, config.ref_point))
    state = init
    try:
        for _ in range(config.n_acq):
            state, rec = bo_step(state, problem, config, family, replication)
            records.append(rec)
            log.debug("%s rep %d eval %d hv %.6g", rec.family, replication, rec.eval_count,
                      rec.hv_indicator)
    except ConditioningError as exc:
        msg = f"{Family.parse(family).value} replication {replication} aborted at eval " \
              f"{state.eval_count}: {exc}"
        log.error(msg)
        if failures is not None:
            failures.append({"family": Family.parse(family).value, "replication": replication,
                             "eval_count": state.eval_count, "error": str(exc),
                             "jitters": list(getattr(exc, "jitters", ()))})
    return records


def _run_one(args):
    config, family, rep = args
    failures = []
    return run_replication(config, family, rep, failures), failures


def run_experiment(config: ExperimentConfig, jobs: int = 1, failures=None):
    """All replications for every configured family, ordered by (family, replication).

    Args:
        jobs: Worker processes; results are identical for any value.
        failures: Optional list collecting one dict per aborted replication.
    """
    tasks = [(config, fam, r) for fam in config.families for r in range(config.reps)]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    records = []
    for recs, fails in results:
        records.extend(recs)
        if failures is not None:
            failures.extend(fails)
    return records


@dataclass(frozen=True)
class SummaryRow:
    family: str
    eval_count: int
    n_reps: int
    mean: float
    half_width: float

    @property
    def lower(self):
        return self.mean - self.half_width

    @property
    def upper(self):
        return self.mean + self.half_width


def summarize(records) -> list:
    """Mean hypervolume indicator and normal-approximation 95% CI per eval count.

    The half-width is ``1.96 * sd / sqrt(reps)`` with the sample standard
    deviation; it is NaN when only one replication is available.
    """
    groups: dict = {}
    for r in records:
        groups.setdefault((r.family, r.eval_count), []).append(r.hv_indicator)
    families = list(dict.fromkeys(r.family for r in records))
    rows = []
    for fam in families:
        for (f, k) in sorted(key for key in groups if key[0] == fam):
            v = np.asarray(groups[(f, k)], dtype=float)
            mean = float(np.mean(v))
            if len(v) > 1 and np.all(v == v[0]):
                rows.append(SummaryRow(f, k, len(v), float(v[0]), 0.0))
                continue
            half = CI_Z * float(np.std(v, ddof=1)) / math.sqrt(len(v)) if len(v) > 1 else math.nan
            rows.append(SummaryRow(f, k, len(v), mean, half))
    return rows
