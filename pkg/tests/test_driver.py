import math
import statistics

import numpy as np
import pytest

from tmobo.acquisition import hvpoi_many
from tmobo.config import AcqBudget, ExperimentConfig, FitSettings
from tmobo.driver import (
    OptimizationState, TraceRecord, bo_step, build_cells, initial_state, maximize,
    optimize_acquisition, run_experiment, run_replication, stream_rng, summarize,
)
from tmobo.kernel import KernelParams
from tmobo.pareto import ParetoFront, decompose, extract_front, hypervolume
from tmobo.problems import make_problem
from tmobo.surrogate import Dataset, Family, condition

SMALL_ACQ = AcqBudget(n_random=300, topk=2, refine_evals=24)


def small_config(**kw):
    base = dict(n_init=5, n_acq=2, reps=2, seed=11, lhs_candidates=20,
                fit=FitSettings(n_starts=2, maxiter=50), acq=SMALL_ACQ)
    base.update(kw)
    return ExperimentConfig(**base)


def test_maximize_zero_acquisition_in_bounds():
    bounds = np.array([[0.0, 1.0], [-3.0, -1.0]])
    x, v = maximize(lambda X: np.zeros(len(X)), bounds, SMALL_ACQ, np.random.default_rng(0))
    assert v == 0.0
    assert np.all(x >= bounds[:, 0]) and np.all(x <= bounds[:, 1])


def test_maximize_finds_constructed_hvpoi_bump():
    centre = np.array([0.37, 0.81])
    front = ParetoFront(np.zeros((0, 2)))
    cells = decompose(front, [0.0, 0.0], [2.0, 2.0])

    def acq(X):
        r2 = np.sum((X - centre) ** 2, axis=1)
        means = np.column_stack([0.2 + 5 * r2, 0.3 + 5 * r2])
        sds = np.full_like(means, 0.01)
        return hvpoi_many(means, sds, [6.0, 6.0], [Family.STUDENT_T] * 2, front, cells)

    budget = AcqBudget(n_random=400, topk=3, refine_evals=100)
    x, _ = maximize(acq, np.array([[0.0, 1.0], [0.0, 1.0]]), budget, np.random.default_rng(1))
    assert np.linalg.norm(x - centre) < 0.01


def test_maximize_deterministic():
    f = lambda X: np.exp(-np.sum((X - 0.3) ** 2, axis=1))
    b = np.array([[0.0, 1.0]] * 3)
    a = maximize(f, b, SMALL_ACQ, np.random.default_rng(5))
    c = maximize(f, b, SMALL_ACQ, np.random.default_rng(5))
    assert a[0].tobytes() == c[0].tobytes() and a[1] == c[1]


def test_build_cells_excludes_points_beyond_reference():
    Y = np.array([[500.0, 1.0], [1.0, 500.0], [100.0, 100.0]])
    front, cells = build_cells(Y, [400.0, 400.0])
    assert len(front) == 3
    total = float(np.prod(cells.f_max - cells.f_min))
    assert cells.volumes().sum() == pytest.approx(total - hypervolume(front, [400, 400]), rel=1e-12)


def _fixed_state(family, nu=None):
    problem = make_problem("dtlz1", 0.0)
    state = initial_state(problem, 8, 3, lhs_candidates=5)
    p = KernelParams((0.5,) * 6, 1.0, 1e-3)
    models = tuple(condition(Dataset(state.X, state.Y[:, j]), family, p, nu) for j in range(3))
    front, cells = build_cells(state.Y, (400.0, 400.0, 400.0))
    return problem, OptimizationState(X=state.X, Y=state.Y, rng_seed=3, models=models,
                                      front=front, cells=cells)


def test_gaussian_limit_selects_same_point():
    problem, tp_state = _fixed_state(Family.STUDENT_T, 1e6)
    _, gp_state = _fixed_state(Family.GAUSSIAN)
    xa, va = optimize_acquisition(tp_state, problem.bounds, SMALL_ACQ, np.random.default_rng(2))
    xb, vb = optimize_acquisition(gp_state, problem.bounds, SMALL_ACQ, np.random.default_rng(2))
    np.testing.assert_allclose(xa, xb, atol=1e-9)
    assert va == pytest.approx(vb, rel=1e-4)


def test_bo_step_invariants():
    cfg = small_config()
    problem = make_problem(cfg.problem, cfg.noise_sd)
    state = initial_state(problem, cfg.n_init, 4, lhs_candidates=cfg.lhs_candidates)
    hv0 = hypervolume(state.front, cfg.ref_point)
    for _ in range(2):
        new, rec = bo_step(state, problem, cfg, Family.STUDENT_T)
        assert new.eval_count == state.eval_count + 1 == rec.eval_count
        assert rec.hv_indicator >= hv0
        np.testing.assert_array_equal(new.front.points, extract_front(new.Y).points)
        assert len(rec.nu) == 3 and len(rec.noise) == 3 and all(n > 2 for n in rec.nu)
        hv0, state = rec.hv_indicator, new


def test_run_replication_replays_identically():
    cfg = small_config()
    a = run_replication(cfg, Family.GAUSSIAN, 1)
    b = run_replication(cfg, Family.GAUSSIAN, 1)
    assert a == b


def test_run_experiment_counts_and_order():
    cfg = small_config()
    recs = run_experiment(cfg)
    assert len(recs) == 2 * 2 * (5 + 2)
    keys = [(r.family, r.replication, r.eval_count) for r in recs]
    assert keys[0] == ("StudentT", 0, 1)
    for fam in ("StudentT", "Gaussian"):
        for rep in range(2):
            hv = [r.hv_indicator for r in recs if r.family == fam and r.replication == rep]
            assert hv == sorted(hv)


def test_run_experiment_init_only():
    cfg = small_config(reps=1, n_acq=0, family="Gaussian")
    recs = run_experiment(cfg)
    assert len(recs) == 5
    Y = np.array([r.y for r in recs])
    assert recs[-1].hv_indicator == hypervolume(extract_front(Y), cfg.ref_point)


def test_seed_isolation_across_rep_counts():
    one = run_experiment(small_config(reps=1, family="Gaussian"))
    three = run_experiment(small_config(reps=3, family="Gaussian"))
    assert one == [r for r in three if r.replication == 0]


def test_families_share_initial_design():
    recs = run_experiment(small_config(reps=1, n_acq=0))
    tp = [r.y for r in recs if r.family == "StudentT"]
    gp = [r.y for r in recs if r.family == "Gaussian"]
    assert tp == gp


def _rec(fam, rep, k, hv):
    return TraceRecord(family=fam, replication=rep, iteration=0, eval_count=k, hv_indicator=hv)


def test_summarize_identical_replications():
    rows = summarize([_rec("G", r, 1, 3.7) for r in range(4)])
    assert rows[0].half_width == 0.0 and rows[0].mean == 3.7


def test_summarize_two_replications():
    rows = summarize([_rec("G", 0, 1, 4.0), _rec("G", 1, 1, 6.0)])
    assert rows[0].mean == 5.0
    # sample sd of {4, 6} is sqrt(2); half-width 1.96 * sqrt(2) / sqrt(2)
    assert rows[0].half_width == pytest.approx(1.96, rel=1e-15)


def test_summarize_matches_independent_recomputation(rng):
    values = rng.random(10) * 100
    rows = summarize([_rec("T", r, 7, v) for r, v in enumerate(values)])
    mean = statistics.fmean(values)
    half = 1.96 * statistics.stdev(values) / math.sqrt(10)
    assert rows[0].mean == pytest.approx(mean, rel=1e-12, abs=1e-9)
    assert rows[0].half_width == pytest.approx(half, rel=1e-12, abs=1e-9)
    assert rows[0].lower == pytest.approx(mean - half, abs=1e-9)


def test_stream_rng_independent_streams():
    a = stream_rng(5, 1, 0).random()
    b = stream_rng(5, 1, 1).random()
    c = stream_rng(5, 1, 0).random()
    assert a == c and a != b
