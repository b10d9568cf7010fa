import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doubledescent import theory


def test_single_point_fill():
    est = theory.fill_distance(np.array([[0.5]]))
    assert est.kappa == pytest.approx(0.5, abs=est.grid_spacing)
    assert est.kappa <= 0.5


def test_points_equal_probes():
    P = np.random.default_rng(0).uniform(size=(30, 2))
    assert theory.fill_distance(P, P).kappa == 0.0


def test_fill_errors():
    with pytest.raises(ValueError):
        theory.fill_distance(np.zeros((0, 1)))
    with pytest.raises(ValueError):
        theory.fill_distance(np.zeros((2, 1)), np.zeros((0, 1)))


def _exact_fill_1d(x):
    x = np.sort(x)
    return max(x[0], 1 - x[-1], np.max(np.diff(x)) / 2 if x.size > 1 else 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(0, 10_000))
def test_fill_1d_against_gap_formula(n, seed):
    x = np.random.default_rng(seed).uniform(size=n)
    exact = _exact_fill_1d(x)
    est = theory.fill_distance(x[:, None], seed=seed)
    assert est.kappa <= exact + 1e-15
    assert est.kappa >= exact * (1 - 1 / 20) - 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_fill_nonincreasing_on_nested_samples(seed, d):
    rng = np.random.default_rng(seed)
    P = rng.uniform(size=(64, d))
    probes = theory.unit_grid(d, 101 if d == 2 else 4001)
    kappas = [theory.fill_distance(P[:k], probes).kappa for k in (4, 8, 16, 32, 64)]
    assert all(b <= a for a, b in zip(kappas, kappas[1:]))
    assert all(k <= math.sqrt(d) for k in kappas)


def test_fill_scaling_slope_2d():
    fit = theory.fill_scaling(2, [2 ** k for k in range(5, 13)], trials=20, seed=0)
    assert fit.slope == pytest.approx(-0.5, abs=0.1)


def test_bound_examples():
    assert theory.theorem1_bound(10, 1, 0.0, 0.0, 1.0, 1.0) == 0.0
    vals = [theory.theorem1_bound(n, 2, 1.0, 2.0, 3.0, 0.5) for n in range(3, 60)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    hand = math.exp(-(8 / math.log(8))) * (1.5 + 2.5)
    assert theory.theorem1_bound(8, 1, 1.5, 2.5, 1.0, 1.0) == pytest.approx(hand, rel=1e-14)
    with pytest.raises(ValueError):
        theory.theorem1_bound(1, 1, 1.0, 1.0, 1.0, 1.0)


def test_fit_bound_constants_recovers_exact_curve():
    ns, A, B = [8, 16, 64], 2.0, 0.7
    errs = [A * math.exp(-B * (n / math.log(n))) * 3.0 for n in ns]
    fA, fB = theory.fit_bound_constants(ns, errs, [3.0] * 3, d=1)
    assert fA == pytest.approx(A) and fB == pytest.approx(B)


def test_exact_recovery_at_centers():
    target = theory.random_kernel_target(1, 6, 0.1, seed=theory.derive_seed(0, "target", 1))
    rep = theory.noiseless_approx_experiment(0.1, [6], seed=0, d=1, trials=1, n_centers=6,
                                             sample_points=lambda n, t: target.centers)
    row = rep.rows[0]
    assert row.sup_error < 1e-8
    assert row.norm_h == pytest.approx(row.norm_hstar, rel=1e-8)


def test_approx_experiment_d1():
    rep = theory.noiseless_approx_experiment(0.05, [8, 32, 128, 512], seed=1, d=1, trials=5)
    assert rep.minimality_holds
    assert rep.means[512][0] < rep.means[32][0]


def test_bound_shape_fit_dominates_larger_n():
    rep = theory.noiseless_approx_experiment(0.05, [8, 16, 32, 64, 128, 256, 512], seed=0, d=1, trials=20)
    check = theory.bound_shape_check(rep)
    assert sorted(check) == [32, 64, 128, 256, 512]
    for n, (err, bound) in check.items():
        assert err <= bound, n
