"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]`` / ``[FAIL]`` line (also repeated in
the terminal summary). Run with ``pytest tests/test_acceptance.py -v``.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from doubledescent import kernel_machine as km
from doubledescent import neural_net as nn
from doubledescent import sweep as sw
from doubledescent import theory, trees
from doubledescent.dataset_io import make_friedman1
from doubledescent.minnorm import null_space_basis, solve_min_norm, solve_ridge

LINES = []


@pytest.fixture
def report(capsys):
    def emit(number, passed, detail, started):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail} ({time.time() - started:.0f}s)"
        LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert passed, line
    return emit


# -- 1. Fourier model on the circle -----------------------------------------

SYNTH_GRID = (16, 32, 64, 128, 192, 224, 256, 288, 320, 384, 512, 1024, 2048)


def test_criterion_1_synthetic_circle(report):
    t0 = time.time()
    cfg = sw.SweepConfig("synthetic", capacities=SYNTH_GRID, repeats=20,
                         params={"n": 256, "snr": 20.0, "M": 4096})
    res = sw.run_sweep(cfg)
    caps = [p.capacity for p in res.points]
    risk = np.array([p.test_sq for p in res.points])
    norm = np.array([p.norm for p in res.points])
    norm_sd = np.array([p.norm_std for p in res.points])
    i = caps.index(256)
    peak = int(np.argmax(risk)) == i
    below = risk[:i].min()
    second = risk[-1] < below
    norm_ok = int(np.argmax(norm)) == i and all(
        norm[j + 1] <= norm[j] + max(norm_sd[j], norm_sd[j + 1]) for j in range(i, len(caps) - 1))
    detail = (f"(a) risk peak at N={caps[int(np.argmax(risk))]} [{peak}]; "
              f"(b) risk(2048)={risk[-1]:.3g} vs min below n={below:.3g} [{second}]; "
              f"(c) norm peak at N={caps[int(np.argmax(norm))]}, non-increasing after [{norm_ok}]")
    report(1, peak and second and norm_ok, detail, t0)


# -- 2./3. Random Fourier features and kernel reference on MNIST ------------

RFF_GRID = (100, 200, 400, 600, 800, 900, 960, 1000, 1040, 1100, 1200, 1500, 2000, 3000, 5000, 10000)


@pytest.fixture(scope="module")
def rff_sweep(mnist_1000):
    t0 = time.time()
    cfg = sw.SweepConfig("rff", capacities=RFF_GRID, repeats=1, params={"sigma": 5.0})
    return sw.run_sweep(cfg, mnist_1000), time.time() - t0


def test_criterion_2_rff_double_descent(rff_sweep, report):
    t0 = time.time()
    res, elapsed = rff_sweep
    by_cap = {p.capacity: p for p in res.points}
    thr = res.threshold
    at_thr = by_cap.get(thr)
    last = res.points[-1]
    norms = [p.norm for p in res.points]
    ok_thr = thr == 1000
    ok_drop = at_thr is not None and last.test_01 * 2 <= at_thr.test_01
    ok_norm = res.points[int(np.argmax(norms))].capacity == thr
    detail = (f"threshold={thr} [{ok_thr}]; test 0-1 at threshold={getattr(at_thr, 'test_01', float('nan')):.4f}, "
              f"at capacity {last.capacity}={last.test_01:.4f} [{ok_drop}]; norm peak at "
              f"{res.points[int(np.argmax(norms))].capacity} [{ok_norm}]")
    report(2, ok_thr and ok_drop and ok_norm and elapsed < 1800, detail, t0 - elapsed)


def test_criterion_3_kernel_reference(rff_sweep, mnist_1000, report):
    t0 = time.time()
    res, _ = rff_sweep
    train, test = mnist_1000
    model = km.fit_interpolating(train.features, train.targets, 5.0)
    pred = km.predict(model, test.features)
    per_sq = np.sum((pred - test.targets) ** 2, axis=1)
    per_01 = (np.argmax(pred, axis=1) != test.class_ids).astype(float)
    se_sq = per_sq.std() / math.sqrt(test.n)
    se_01 = per_01.std() / math.sqrt(test.n)
    best_sq = min(p.test_sq for p in res.points)
    best_01 = min(p.test_01 for p in res.points)
    ok_sq = per_sq.mean() <= best_sq + 2 * se_sq
    ok_01 = per_01.mean() <= best_01 + 2 * se_01
    ref = res.references[0]
    detail = (f"kernel squared={per_sq.mean():.4f} vs best RFF {best_sq:.4f} (+2SE {2 * se_sq:.4f}) [{ok_sq}]; "
              f"kernel 0-1={per_01.mean():.4f} vs best RFF {best_01:.4f} (+2SE {2 * se_01:.4f}) [{ok_01}]")
    consistent = abs(ref.test_sq - per_sq.mean()) < 1e-9
    report(3, ok_sq and ok_01 and consistent, detail, t0)


# -- 4. minimum-norm solver properties ---------------------------------------

def test_criterion_4_min_norm_properties(report):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    fails = {"residual": 0, "null_space": 0, "pinv": 0, "ridge": 0}
    for _ in range(100):
        n = int(rng.integers(2, 15))
        D = n + int(rng.integers(1, 20))
        A, Y = rng.standard_normal((n, D)), rng.standard_normal((n, int(rng.integers(1, 4))))
        r = solve_min_norm(A, Y)
        if np.linalg.norm(A @ r.coefficients - Y) > 1e-8 * max(1.0, np.linalg.norm(Y)):
            fails["residual"] += 1
        Z = null_space_basis(A)
        pert = r.coefficients + Z @ rng.standard_normal((Z.shape[1], Y.shape[1]))
        if np.linalg.norm(pert) < np.linalg.norm(r.coefficients) - 1e-12:
            fails["null_space"] += 1
        shape = (int(rng.integers(2, 15)), int(rng.integers(1, 15)))
        B, yb = rng.standard_normal(shape), rng.standard_normal(shape[0])
        if not np.allclose(solve_min_norm(B, yb).coefficients, np.linalg.pinv(B) @ yb, rtol=1e-8, atol=1e-8):
            fails["pinv"] += 1
        norms = [solve_ridge(A, Y, lam).coefficient_norm for lam in (1e-8, 1e-5, 1e-3, 1e-1, 10.0)]
        if any(b > a * (1 + 1e-9) for a, b in zip(norms, norms[1:])):
            fails["ridge"] += 1
    elapsed = time.time() - t0
    report(4, not any(fails.values()) and elapsed < 60,
           f"failures over 100 instances each: {fails}; runtime {elapsed:.1f}s < 60s", t0)


# -- 5. trees and PERT forests -----------------------------------------------

def test_criterion_5_trees(report):
    t0 = time.time()
    rng = np.random.default_rng(5)
    X, Y = rng.standard_normal((300, 6)), rng.standard_normal((300, 2))
    tree = trees.fit_tree(X, Y, max_leaves=300, seed=1)
    train_risk = float(np.mean(np.sum((tree.predict(X) - Y) ** 2, axis=1)))
    ok_a = train_risk <= 1e-20

    train = make_friedman1(500, noise_std=1.0, seed=100)
    test = make_friedman1(2000, noise_std=1.0, seed=101)

    def mean_test(n_tree):
        risks = []
        for s in range(5):
            f = trees.fit_forest(train.features, train.targets, n_tree, train.n, bootstrap=False, seed=s)
            risks.append(np.mean((f.predict(test.features) - test.targets) ** 2))
        return float(np.mean(risks))

    one, fifty = mean_test(1), mean_test(50)
    ok_b = fifty < one
    elapsed = time.time() - t0
    report(5, ok_a and ok_b and elapsed < 300,
           f"(a) single tree train risk={train_risk:.1e} [{ok_a}]; (b) PERT test risk N_tree=1: {one:.3f}, "
           f"N_tree=50: {fifty:.3f} [{ok_b}]", t0)


# -- 6. L2-boosting ------------------------------------------------------------

def test_criterion_6_boosting(report):
    t0 = time.time()
    bad = 0
    for nu in (0.85, 0.1):
        for s in range(20):
            rng = np.random.default_rng(1000 + s)
            X, Y = rng.standard_normal((80, 5)), rng.standard_normal((80, 2))
            seq = trees.fit_l2_boost(X, Y, n_tree=30, shrinkage=nu, seed=s).forests[0]
            bad += int(np.any(np.diff(seq.train_risk) > 1e-12))
    train = make_friedman1(500, noise_std=1.0, seed=200)
    test = make_friedman1(2000, noise_std=1.0, seed=201)

    def mean_test(n_forest):
        return float(np.mean([np.mean((trees.fit_l2_boost(train.features, train.targets, 20, 0.85, 10,
                                                           n_forest=n_forest, seed=s).predict(test.features)
                                       - test.targets) ** 2) for s in range(5)]))

    one, ten = mean_test(1), mean_test(10)
    elapsed = time.time() - t0
    report(6, bad == 0 and ten <= one and elapsed < 300,
           f"non-monotone sequences: {bad}/40; test risk N_forest=1: {one:.3f}, N_forest=10: {ten:.3f}", t0)


# -- 7. two-layer networks -----------------------------------------------------

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def test_criterion_7_neural_net(mnist_1000, report):
    t0 = time.time()
    worst = 0.0
    for seed in range(3):
        rng = np.random.default_rng(seed)
        net = nn.init_net(4, 5, 3, "random_small", seed=seed)
        net.W1 *= 10
        X, Y = rng.standard_normal((3, 4)), rng.standard_normal((3, 3))
        _, grads = nn.loss_and_grads(net, X, Y)
        for p in nn.PARAMS:
            arr = getattr(net, p)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + 1e-5
                up = nn.loss_and_grads(net, X, Y)[0]
                arr[idx] = old - 1e-5
                down = nn.loss_and_grads(net, X, Y)[0]
                arr[idx] = old
                fd = (up - down) / 2e-5
                worst = max(worst, abs(fd - grads[p][idx]) / max(abs(fd), abs(grads[p][idx]), 1e-8))
    ok_grad = worst < 1e-5

    train, _ = mnist_1000
    raw = yaml.safe_load((CONFIG_DIR / "net_mnist_1000.yaml").read_text())
    cfg = sw.SweepConfig.from_dict(raw)
    res = sw.run_sweep(cfg, mnist_1000)
    caps = [p.capacity for p in res.points]
    target = train.n * train.K
    first_past = next(i for i, c in enumerate(caps) if c >= target)
    reached = any(p.train_01 == 0.0 for p in res.points)
    thr = res.threshold_zero_one
    ok_thr = thr is not None and abs(caps.index(thr) - first_past) <= 1
    elapsed = time.time() - t0
    curve = ", ".join(f"{c}:{p.train_01:.3f}" for c, p in zip(caps, res.points))
    report(7, ok_grad and reached and ok_thr and elapsed < 7200,
           f"max gradient rel. error={worst:.1e} [{ok_grad}]; train 0-1 by capacity {{{curve}}}; "
           f"threshold={thr} vs n*K={target} (grid point {caps[first_past]}) [{ok_thr}]", t0)


# -- 8. theory -------------------------------------------------------------------

def test_criterion_8_theory(report):
    t0 = time.time()
    ns = [2 ** k for k in range(5, 13)]
    slopes = {d: theory.fill_scaling(d, ns, trials=20, seed=0).slope for d in (1, 2)}
    ok_slope = all(abs(slopes[d] + 1.0 / d) <= 0.1 for d in (1, 2))
    reps = {1: theory.noiseless_approx_experiment(0.05, [8, 16, 32, 64, 128, 256, 512], seed=0, d=1, trials=20),
            2: theory.noiseless_approx_experiment(0.2, [16, 32, 64, 128, 256, 512], seed=0, d=2, trials=20)}
    ok_norm = all(r.minimality_holds for r in reps.values())
    ok_trend = all(r.sup_error_decreasing for r in reps.values())
    elapsed = time.time() - t0
    report(8, ok_slope and ok_norm and ok_trend and elapsed < 600,
           f"fill slopes d=1: {slopes[1]:.3f}, d=2: {slopes[2]:.3f} [{ok_slope}]; interpolant norm <= target "
           f"norm [{ok_norm}]; mean sup error decreasing in n [{ok_trend}]", t0)


# -- 9. determinism ----------------------------------------------------------------

def test_criterion_9_determinism(mnist_1000, tmp_path, report):
    t0 = time.time()
    friedman = {"source": "friedman1", "n_train": 100, "n_test": 200}
    configs = [
        (sw.SweepConfig("rff", capacities=(200, 1000, 2000), base_seed=7, params={"sigma": 5.0}), mnist_1000),
        (sw.SweepConfig("relu_rf", capacities=(100, 1000), base_seed=7), mnist_1000),
        (sw.SweepConfig("synthetic", capacities=(16, 64, 256), repeats=3, params={"n": 64, "M": 1024}), None),
        (sw.SweepConfig("tree_forest", capacities=(10, 100, 300), repeats=2, dataset=friedman), None),
        (sw.SweepConfig("l2_boost", capacities=(50, 200, 400), repeats=2, dataset=friedman), None),
        (sw.SweepConfig("two_layer_net", repeats=2, dataset=friedman,
                        params={"hidden_grid": [2, 8], "epochs": 5, "step": 1e-3, "batch": 16}), None),
    ]
    same = []
    for i, (cfg, data) in enumerate(configs):
        a = sw.emit_csv(sw.run_sweep(cfg, data), tmp_path / f"{i}a.csv").read_bytes()
        b = sw.emit_csv(sw.run_sweep(cfg, data), tmp_path / f"{i}b.csv").read_bytes()
        same.append(a == b)
    report(9, all(same), f"bitwise-identical reruns: {dict(zip([c.family for c, _ in configs], same))}", t0)
