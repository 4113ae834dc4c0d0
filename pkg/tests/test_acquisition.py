import math

import numpy as np
import pytest
from scipy import stats

from oracles import monte_carlo_region_probability, random_front, t3_cdf
from tmobo.acquisition import (
    gaussian_cdf, hvpoi, hvpoi_many, prob_in_region, prob_in_region_many, student_t_cdf,
)
from tmobo.pareto import ParetoFront, decompose, exclusive_hypervolume, extract_front
from tmobo.surrogate import Family, PredictiveMarginal


def _tp(mean, sd, dof):
    return PredictiveMarginal(mean, sd * sd, dof, Family.STUDENT_T)


def _gp(mean, sd):
    return PredictiveMarginal(mean, sd * sd, math.inf, Family.GAUSSIAN)


def test_student_t_cdf_at_zero():
    for dof in (2.5, 3.0, 17.0, 1e6):
        assert student_t_cdf(0.0, dof) == 0.5


def test_student_t_cdf_closed_form_nu3():
    expected = t3_cdf(math.sqrt(3.0))
    assert expected == pytest.approx(0.90915, abs=1e-5)
    assert student_t_cdf(1.0, 3.0) == pytest.approx(expected, abs=1e-12)
    for z in np.linspace(-4, 4, 17):
        assert student_t_cdf(z, 3.0) == pytest.approx(t3_cdf(z * math.sqrt(3.0)), abs=1e-12)
        assert student_t_cdf(z, 3.0, unit_variance=False) == pytest.approx(t3_cdf(z), abs=1e-12)


def test_student_t_cdf_gaussian_limit():
    assert student_t_cdf(1.959964, 1e6) == pytest.approx(0.975, abs=1e-4)
    assert student_t_cdf(0.7, math.inf) == pytest.approx(gaussian_cdf(0.7), abs=0)


def test_student_t_cdf_symmetry_and_monotone():
    z = np.linspace(-30, 30, 10**4)
    for dof in (2.1, 4.0, 40.0):
        c = student_t_cdf(z, dof)
        assert np.all(np.diff(c) >= 0)
        np.testing.assert_allclose(student_t_cdf(-z, dof), 1 - c, atol=1e-15)


def test_student_t_cdf_rejects_small_dof():
    with pytest.raises(ValueError):
        student_t_cdf(0.1, 2.0)


def test_student_t_cdf_vs_scipy():
    z = np.linspace(-6, 6, 101)
    for dof in (2.2, 5.0, 50.0):
        ref = stats.t.cdf(z * math.sqrt(dof / (dof - 2)), dof)
        np.testing.assert_allclose(student_t_cdf(z, dof), ref, atol=1e-10)


def test_gaussian_cdf_values():
    assert gaussian_cdf(0.0) == 0.5
    assert gaussian_cdf(1.959964) == pytest.approx(0.975, abs=1e-7)
    assert gaussian_cdf(-8.0) < 1e-14


def test_prob_point_mass_inside_empty_front():
    front = ParetoFront(np.zeros((0, 2)))
    cd = decompose(front, [0, 0], [1, 1])
    marg = [_tp(0.5, 1e-9, 7.0), _tp(0.4, 1e-9, 7.0)]
    assert prob_in_region(marg, cd) == pytest.approx(1.0, abs=1e-9)


def test_prob_deep_in_dominated_region():
    front = extract_front([(0.2, 0.3), (0.3, 0.2)])
    cd = decompose(front, [0, 0], [1, 1])
    marg = [_tp(0.7, 1e-4, 10.0), _tp(0.7, 1e-4, 10.0)]
    assert prob_in_region(marg, cd) < 1e-6


def test_prob_dimension_mismatch():
    cd = decompose(ParetoFront(np.zeros((0, 2))), [0, 0], [1, 1])
    with pytest.raises(ValueError):
        prob_in_region([_gp(0.5, 0.1)], cd)


def test_prob_matches_monte_carlo(rng):
    front = extract_front(random_front(rng, 4, 2))
    f_min, f_max = np.zeros(2), np.ones(2)
    cd = decompose(front, f_min, f_max)
    means, sds, dofs = [0.45, 0.35], [0.2, 0.15], [4.0, 6.0]
    marg = [_tp(m, s, d) for m, s, d in zip(means, sds, dofs)]
    mc = monte_carlo_region_probability(means, sds, dofs, front.points, f_min, f_max, seed=1)
    assert prob_in_region(marg, cd) == pytest.approx(mc, abs=0.005)


def test_prob_complement(rng):
    for _ in range(5):
        front = extract_front(random_front(rng, 5, 3))
        cd = decompose(front, np.zeros(3), np.ones(3))
        marg = [_tp(m, s, 5.0) for m, s in zip(rng.random(3), rng.uniform(0.05, 0.3, 3))]
        p_free = prob_in_region(marg, cd)
        box_cd = decompose(ParetoFront(np.zeros((0, 3))), np.zeros(3), np.ones(3))
        p_box = prob_in_region(marg, box_cd)
        from dataclasses import replace
        dominated = replace(cd, lower=cd.dominated_lower, upper=cd.dominated_upper)
        p_dom = prob_in_region(marg, dominated)
        assert p_free == pytest.approx(p_box - p_dom, abs=1e-6)
        assert 0.0 <= p_free <= 1.0


def test_prob_vectorized_agrees(rng):
    front = extract_front(random_front(rng, 6, 3))
    cd = decompose(front, np.zeros(3), np.ones(3))
    means = rng.random((20, 3))
    sds = rng.uniform(0.01, 0.5, (20, 3))
    dofs = [3.5, 9.0, math.inf]
    fams = [Family.STUDENT_T, Family.STUDENT_T, Family.GAUSSIAN]
    many = prob_in_region_many(means, sds, dofs, fams, cd)
    for i in range(20):
        marg = [_tp(means[i, 0], sds[i, 0], 3.5), _tp(means[i, 1], sds[i, 1], 9.0), _gp(means[i, 2], sds[i, 2])]
        assert many[i] == pytest.approx(prob_in_region(marg, cd), abs=1e-12)


def test_prob_continuous_in_scale(rng):
    for _ in range(10):
        front = extract_front(random_front(rng, 5, 2))
        cd = decompose(front, np.zeros(2), np.ones(2))
        m, s = rng.random(2), rng.uniform(0.01, 0.4, 2)
        a = prob_in_region([_tp(m[0], s[0], 5.0), _tp(m[1], s[1], 5.0)], cd)
        b = prob_in_region([_tp(m[0], s[0] * 1.01, 5.0), _tp(m[1], s[1] * 1.01, 5.0)], cd)
        assert abs(a - b) < 0.01


def test_hvpoi_dominated_mean_is_zero():
    front = extract_front([(0.2, 0.3), (0.3, 0.2)])
    cd = decompose(front, [0, 0], [1, 1])
    v = hvpoi([_tp(0.5, 5.0, 3.0), _tp(0.5, 5.0, 3.0)], front, cd)
    assert v.value == 0.0 and v.improvement == 0.0
    assert v.prob_in_A > 0


def test_hvpoi_certain_improvement():
    front = ParetoFront(np.zeros((0, 3)))
    cd = decompose(front, [0, 0, 0], [4, 4, 4])
    m = [1.0, 2.0, 3.0]
    v = hvpoi([_tp(x, 1e-9, 8.0) for x in m], front, cd)
    assert v.value == pytest.approx(3 * 2 * 1, rel=1e-9)
    assert v.value == v.improvement * v.prob_in_A


def test_hvpoi_composition_of_oracles(rng):
    front = extract_front(random_front(rng, 3, 2))
    f_min, f_max = np.zeros(2), np.ones(2)
    cd = decompose(front, f_min, f_max)
    means, sds, dofs = [0.15, 0.2], [0.1, 0.08], [3.0, 12.0]
    v = hvpoi([_tp(m, s, d) for m, s, d in zip(means, sds, dofs)], front, cd)
    improvement = exclusive_hypervolume(front, cd, means)
    mc = monte_carlo_region_probability(means, sds, dofs, front.points, f_min, f_max, seed=2)
    assert v.improvement == improvement
    assert v.value == pytest.approx(improvement * mc, abs=0.005 * improvement)


def test_hvpoi_permutation_invariant(rng):
    front = extract_front(random_front(rng, 6, 3))
    cd = decompose(front, np.zeros(3), np.ones(3))
    marg = [_tp(0.2, 0.1, 4.0), _tp(0.3, 0.2, 8.0), _gp(0.25, 0.05)]
    perm = [2, 0, 1]
    front_p = ParetoFront(front.points[:, perm])
    cd_p = decompose(front_p, np.zeros(3), np.ones(3))
    a = hvpoi(marg, front, cd)
    b = hvpoi([marg[i] for i in perm], front_p, cd_p)
    assert b.value == pytest.approx(a.value, rel=1e-10)


def test_hvpoi_gaussian_student_consistency(rng):
    front = extract_front(random_front(rng, 6, 3))
    cd = decompose(front, np.zeros(3), np.ones(3))
    means, sds = rng.random(3) * 0.4, rng.uniform(0.05, 0.2, 3)
    a = hvpoi([_tp(m, s, 1e6) for m, s in zip(means, sds)], front, cd)
    b = hvpoi([_gp(m, s) for m, s in zip(means, sds)], front, cd)
    assert a.value == pytest.approx(b.value, rel=1e-4)


def test_hvpoi_many_agrees(rng):
    front = extract_front(random_front(rng, 5, 2))
    cd = decompose(front, np.zeros(2), np.ones(2))
    means = rng.random((30, 2)) * 0.6
    sds = rng.uniform(0.02, 0.3, (30, 2))
    many = hvpoi_many(means, sds, [4.0, 4.0], [Family.STUDENT_T] * 2, front, cd)
    for i in range(30):
        v = hvpoi([_tp(means[i, j], sds[i, j], 4.0) for j in range(2)], front, cd)
        assert many[i] == pytest.approx(v.value, rel=1e-12, abs=1e-300)
