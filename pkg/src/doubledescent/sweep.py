"""Capacity sweeps: fit one model family across a capacity grid, record
train/test risks and norms, average repeats, find the interpolation
threshold, and write CSV and plots.

Capacity conventions per family:

* ``rff``: real parameters per output, 2 x (number of Fourier features).
  Set ``params.capacity_unit: features`` to index by feature count instead.
* ``relu_rf``: number of ReLU features.
* ``synthetic``: number of circle basis functions N.
* ``tree_forest``: total leaf budget. Capacities up to n mean a single tree
  with that many leaves; beyond n they must be multiples of n and mean
  ``capacity / n`` averaged trees of n leaves each.
* ``l2_boost``: total leaf budget again, with trees of ``max_leaves`` leaves.
  Up to ``max_rounds * max_leaves`` it is one boosted sequence with
  ``capacity / max_leaves`` rounds; beyond that, multiples of
  ``max_rounds * max_leaves`` average that many full sequences.
* ``two_layer_net``: parameter count ``(d + 1) H + (H + 1) K``, taken from
  ``params.hidden_grid``.
* ``kernel_ref``: no grid, only the kernel-machine reference row.

Every (family, capacity, repeat) cell gets its seed from
``derive_seed(base_seed, family, capacity, repeat)``.
"""
from __future__ import annotations

import csv
import importlib.util
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernel_machine as km
from . import neural_net as nn
from . import random_features as rf
from . import synthetic_circle as sc
from . import trees
from .dataset_io import (MNIST_PIXEL_RANGE, Dataset, PreprocessSpec, load_csv, load_mnist,
                         make_friedman1, permutation_prefix, preprocess)
from .minnorm import DEFAULT_RANK_TOL, coefficient_norm, solve_min_norm
from .seeding import derive_seed

log = logging.getLogger(__name__)

FAMILIES = ("rff", "relu_rf", "kernel_ref", "synthetic", "tree_forest", "l2_boost", "two_layer_net")
DEFAULT_REPEATS = {"rff": 1, "relu_rf": 1, "kernel_ref": 1, "synthetic": 20,
                   "tree_forest": 5, "l2_boost": 5, "two_layer_net": 5}
NORM_KINDS = {"rff": "coef_l2", "relu_rf": "coef_l2", "kernel_ref": "rkhs", "synthetic": "weighted_circle",
              "tree_forest": "none", "l2_boost": "none", "two_layer_net": "coef_l2"}
CSV_COLUMNS = ("family", "capacity", "repeat_count", "train_sq_mean", "train_sq_std",
               "test_sq_mean", "test_sq_std", "train_01_mean", "train_01_std",
               "test_01_mean", "test_01_std", "norm_mean", "norm_std", "norm_kind", "status")
SQUARED_TOL = 1e-6
RISK_CONVENTION = "squared risk = mean over samples of squared error summed over outputs"


# --------------------------------------------------------------------------
# Risks
# --------------------------------------------------------------------------

def compute_risks(predictions, labels_onehot, class_ids=None) -> tuple[float, float]:
    """(squared, zero-one) risk. Argmax ties go to the lowest class index.

    Zero-one risk is NaN when ``class_ids`` is None (regression).
    """
    P = np.asarray(predictions, dtype=np.float64)
    Y = np.asarray(labels_onehot, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if P.shape != Y.shape:
        raise ValueError(f"predictions {P.shape} and labels {Y.shape} differ in shape")
    if not np.all(np.isfinite(P)):
        raise ValueError("non-finite predictions")
    n = P.shape[0]
    if n == 0:
        raise ValueError("no samples")
    squared = float(np.sum((P - Y) ** 2) / n)
    if class_ids is None:
        return squared, float("nan")
    ids = np.asarray(class_ids)
    if ids.shape != (n,):
        raise ValueError("class_ids length does not match predictions")
    return squared, float(np.mean(np.argmax(P, axis=1) != ids))


# --------------------------------------------------------------------------
# Config and results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    family: str
    capacities: tuple = ()
    dataset: dict = field(default_factory=dict)
    repeats: Optional[int] = None
    base_seed: int = 0
    params: dict = field(default_factory=dict)
    workers: int = 1
    threshold_tol: float = SQUARED_TOL

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        caps = tuple(int(c) for c in self.capacities)
        object.__setattr__(self, "capacities", caps)
        if any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValueError("capacity grid must be strictly increasing")
        if self.repeats is None:
            object.__setattr__(self, "repeats", DEFAULT_REPEATS[self.family])
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        known = {"family", "capacities", "dataset", "repeats", "base_seed", "params", "workers",
                 "threshold_tol"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        raw = dict(raw)
        raw["capacities"] = tuple(raw.get("capacities") or ())
        raw["dataset"] = dict(raw.get("dataset") or {})
        raw["params"] = dict(raw.get("params") or {})
        return cls(**raw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["capacities"] = list(self.capacities)
        return d


@dataclass(frozen=True)
class RiskPoint:
    capacity: int
    repeat_count: int
    train_sq: float
    train_sq_std: float
    test_sq: float
    test_sq_std: float
    train_01: float
    train_01_std: float
    test_01: float
    test_01_std: float
    norm: float
    norm_std: float
    norm_kind: str
    status: str = "ok"
    family: str = ""


@dataclass
class SweepResult:
    config: SweepConfig
    points: list
    threshold: Optional[int]
    threshold_squared: Optional[int]
    threshold_zero_one: Optional[int]
    references: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    histories: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Datasets
# --------------------------------------------------------------------------

def bundled_mnist_csv() -> Optional[Path]:
    """Path of the 5000-row MNIST sample shipped with mlxtend, if installed."""
    spec = importlib.util.find_spec("mlxtend")
    if spec is None or not spec.submodule_search_locations:
        return None
    path = Path(list(spec.submodule_search_locations)[0]) / "data" / "data" / "mnist_5k.csv.gz"
    return path if path.exists() else None


def _scale(train: Dataset, test: Dataset, ref: dict) -> tuple[Dataset, Dataset]:
    fr = ref.get("feature_range")
    spec = PreprocessSpec(scaling=ref.get("scaling", "interval_01"),
                          feature_range=tuple(fr) if fr is not None else None)
    return train.with_features(preprocess(train.features, spec)), test.with_features(
        preprocess(test.features, spec))


def load_dataset(ref: dict) -> tuple[Dataset, Dataset]:
    """Materialize ``(train, test)`` from a dataset reference.

    Sources: ``mnist`` (IDX directory, via ``path`` or ``$MNIST_DIR``),
    ``mnist_csv`` (one CSV of pixels plus label, split into train and test
    by a seeded permutation; defaults to ``$MNIST_CSV`` or the mlxtend
    sample), ``csv`` (generic, same split), and ``friedman1`` (synthetic
    regression).
    """
    source = ref.get("source", "mnist_csv")
    seed = int(ref.get("seed", 0))
    n_train = ref.get("n_train")
    n_test = ref.get("n_test")
    if source == "friedman1":
        d, noise = int(ref.get("d", 10)), float(ref.get("noise_std", 1.0))
        train = make_friedman1(int(n_train or 500), d, noise, derive_seed(seed, "friedman-train"))
        test = make_friedman1(int(n_test or 2000), d, noise, derive_seed(seed, "friedman-test"))
        return train, test
    if source == "mnist":
        directory = ref.get("path") or os.environ.get("MNIST_DIR")
        if not directory:
            raise FileNotFoundError("mnist source needs dataset.path or $MNIST_DIR")
        full_train, full_test = load_mnist(directory, "train"), load_mnist(directory, "test")
        ref = {"feature_range": list(MNIST_PIXEL_RANGE), **ref}
        train = full_train.take(permutation_prefix(full_train.n, int(n_train or full_train.n), seed))
        test = full_test if n_test is None else full_test.take(
            permutation_prefix(full_test.n, int(n_test), derive_seed(seed, "test")))
        return _scale(train, test, ref)
    if source in ("mnist_csv", "csv"):
        path = ref.get("path") or (os.environ.get("MNIST_CSV") if source == "mnist_csv" else None)
        if not path and source == "mnist_csv":
            path = bundled_mnist_csv()
        if not path:
            raise FileNotFoundError(f"{source} source needs dataset.path")
        full = load_csv(path, n_classes=ref.get("n_classes"), regression=bool(ref.get("regression", False)))
        if source == "mnist_csv":
            ref = {"feature_range": list(MNIST_PIXEL_RANGE), **ref}
        n_train = int(n_train or full.n // 2)
        n_test = full.n - n_train if n_test is None else int(n_test)
        perm = permutation_prefix(full.n, n_train + n_test, seed)
        return _scale(full.take(perm[:n_train]), full.take(perm[n_train:]), ref)
    raise ValueError(f"unknown dataset source {source!r}")


# --------------------------------------------------------------------------
# Per-family cells
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    train_sq: float
    test_sq: float
    train_01: float
    test_01: float
    norm: float


def _risks_pair(fit_pred, test_pred, train: Dataset, test: Dataset) -> tuple:
    tr = compute_risks(fit_pred, train.targets, train.class_ids)
    te = compute_risks(test_pred, test.targets, test.class_ids)
    return tr[0], te[0], tr[1], te[1]


def _rff_cell(kind, capacity, seed, train, test, params):
    unit = params.get("capacity_unit", "real_params")
    if kind == "fourier" and unit == "real_params":
        if capacity % 2:
            raise ValueError(f"Fourier capacity {capacity} is not an even real-parameter count")
        n_features = capacity // 2
    else:
        n_features = capacity
    fmap = rf.sample_feature_map(rf.FeatureSpec(kind, n_features, train.d,
                                                float(params.get("sigma", 5.0)), seed))
    Phi = rf.featurize(fmap, train.features)
    sol = solve_min_norm(Phi, train.targets, float(params.get("rank_tol", DEFAULT_RANK_TOL)))
    scaled = params.get("norm", "coef_l2") == "coef_l2_scaled"
    risks = _risks_pair(Phi @ sol.coefficients, rf.predict(fmap, sol.coefficients, test.features),
                        train, test)
    return CellResult(*risks, coefficient_norm(sol, scaled))


def _kernel_cell(train, test, params):
    model = km.fit_interpolating(train.features, train.targets, float(params.get("sigma", 5.0)),
                                 float(params.get("jitter", 0.0)))
    risks = _risks_pair(km.predict(model, train.features), km.predict(model, test.features),
                        train, test)
    return CellResult(*risks, km.rkhs_norm(model))


def _synthetic_cell(capacity, repeat, base_seed, params):
    n = int(params.get("n", 256))
    M = int(params.get("M", 4096))
    snr = float(params.get("snr", 20.0))
    res = sc.run_trial(n, capacity, repeat, snr, M, derive_seed(base_seed, "synthetic"),
                       params.get("K_max"))
    return CellResult(res.train_residual, res.excess_risk, float("nan"), float("nan"), res.norm)


def _tree_cell(capacity, seed, train, test, params):
    n = train.n
    bootstrap = bool(params.get("bootstrap", False))
    mtry = params.get("mtry")
    if capacity <= n:
        n_tree, leaves = 1, capacity
    elif capacity % n == 0:
        n_tree, leaves = capacity // n, n
    else:
        raise ValueError(f"tree capacity {capacity} > n={n} must be a multiple of n")
    model = trees.fit_forest(train.features, train.targets, n_tree, leaves, bootstrap, seed, mtry)
    risks = _risks_pair(model.predict(train.features), model.predict(test.features), train, test)
    return CellResult(*risks, float("nan"))


def _boost_cell(capacity, seed, train, test, params):
    leaves = int(params.get("max_leaves", 10))
    max_rounds = int(params.get("max_rounds", 20))
    shrinkage = float(params.get("shrinkage", 0.85))
    block = max_rounds * leaves
    if capacity % leaves:
        raise ValueError(f"boosting capacity {capacity} is not a multiple of max_leaves={leaves}")
    if capacity <= block:
        rounds, n_forest = capacity // leaves, 1
    elif capacity % block == 0:
        rounds, n_forest = max_rounds, capacity // block
    else:
        raise ValueError(f"boosting capacity {capacity} past one sequence must be a multiple of {block}")
    model = trees.fit_l2_boost(train.features, train.targets, rounds, shrinkage, leaves,
                               params.get("mtry"), n_forest, seed)
    risks = _risks_pair(model.predict(train.features), model.predict(test.features), train, test)
    return CellResult(*risks, float("nan"))


def net_config(params: dict) -> nn.TrainConfig:
    return nn.TrainConfig(momentum=float(params.get("momentum", 0.95)),
                          base_step=float(params.get("step", 0.01)),
                          batch_size=int(params.get("batch", 128)),
                          epochs_max=int(params.get("epochs", 6000)),
                          init=params.get("init_after", "glorot"))


def _net_norm(net: nn.TwoLayerNet) -> float:
    return float(math.sqrt(sum(float(np.sum(getattr(net, p) ** 2)) for p in nn.PARAMS)))


def _net_chain(repeat, base_seed, train, test, params):
    """All hidden sizes of one repeat, as a serialized weight-reuse chain."""
    if params.get("center_inputs", True):
        # W1 (x - mu) + b1 is the same function class with the same
        # parameter count; it only removes the large shared input mean
        # that otherwise kills ReLU units under momentum SGD
        mu = train.features.mean(axis=0)
        train, test = train.with_features(train.features - mu), test.with_features(test.features - mu)
    grid = [int(h) for h in params["hidden_grid"]]
    seeds = [derive_seed(base_seed, "two_layer_net", nn.param_count(train.d, h, train.K), repeat)
             for h in grid]
    points = nn.sweep_hidden_units(train, grid, net_config(params), weight_reuse=bool(params.get("reuse", True)),
                                   seeds=seeds)
    out = []
    for pt in points:
        risks = _risks_pair(pt.net.forward(train.features), pt.net.forward(test.features), train, test)
        out.append((pt.n_params, CellResult(*risks, _net_norm(pt.net)), pt.history))
    return out


# --------------------------------------------------------------------------
# Orchestration
# --------------------------------------------------------------------------

_WORKER_DATA: dict = {}


def _init_worker(train, test):
    _WORKER_DATA["train"], _WORKER_DATA["test"] = train, test


def _run_task(task):
    family, capacity, repeat, base_seed, params = task
    train, test = _WORKER_DATA.get("train"), _WORKER_DATA.get("test")
    try:
        if family == "two_layer_net":
            return task, "ok", _net_chain(repeat, base_seed, train, test, params)
        seed = derive_seed(base_seed, family, capacity, repeat)
        if family == "rff":
            cell = _rff_cell("fourier", capacity, seed, train, test, params)
        elif family == "relu_rf":
            cell = _rff_cell("relu", capacity, seed, train, test, params)
        elif family == "synthetic":
            cell = _synthetic_cell(capacity, repeat, base_seed, params)
        elif family == "tree_forest":
            cell = _tree_cell(capacity, seed, train, test, params)
        elif family == "l2_boost":
            cell = _boost_cell(capacity, seed, train, test, params)
        elif family == "kernel_ref":
            cell = _kernel_cell(train, test, params)
        else:
            raise ValueError(f"no runner for family {family!r}")
        return task, "ok", cell
    except Exception as exc:  # recorded in the row, the sweep keeps going
        log.warning("cell %s capacity=%s repeat=%s failed: %r", family, capacity, repeat, exc)
        return task, f"failed:{type(exc).__name__}", None


def _mean_std(values):
    a = np.asarray(values, dtype=np.float64)
    if a.size == 0 or np.all(np.isnan(a)):
        return float("nan"), float("nan")
    return float(np.mean(a)), float(np.std(a))


def _aggregate(family, capacity, cells, statuses, repeats, norm_kind) -> RiskPoint:
    ok = [c for c in cells if c is not None]
    stats = {}
    for name in ("train_sq", "test_sq", "train_01", "test_01", "norm"):
        stats[name] = _mean_std([getattr(c, name) for c in ok])
    failed = [s for s in statuses if s != "ok"]
    if not failed:
        status = "ok"
    elif not ok:
        status = failed[0]
    else:
        status = f"partial:{len(ok)}/{repeats}"
    return RiskPoint(capacity, len(ok), stats["train_sq"][0], stats["train_sq"][1],
                     stats["test_sq"][0], stats["test_sq"][1], stats["train_01"][0], stats["train_01"][1],
                     stats["test_01"][0], stats["test_01"][1], stats["norm"][0], stats["norm"][1],
                     norm_kind, status, family)


def resolve_capacities(cfg: SweepConfig, train: Optional[Dataset]) -> tuple:
    if cfg.family == "two_layer_net":
        grid = cfg.params.get("hidden_grid")
        if not grid:
            raise ValueError("two_layer_net sweeps need params.hidden_grid")
        return tuple(nn.param_count(train.d, int(h), train.K) for h in grid)
    if cfg.family == "kernel_ref":
        return ()
    return cfg.capacities


def _execute(tasks, workers, train, test):
    if workers == 1 or len(tasks) <= 1:
        _init_worker(train, test)
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(train, test)) as pool:
        return list(pool.map(_run_task, tasks))


def run_sweep(cfg: SweepConfig, data: Optional[tuple] = None) -> SweepResult:
    """Run every (capacity, repeat) cell of ``cfg`` and aggregate.

    ``data`` may pass an already loaded ``(train, test)`` pair; otherwise
    ``cfg.dataset`` is loaded (synthetic sweeps need no dataset). The rff
    family also gets the kernel-machine reference row.
    """
    if cfg.family == "synthetic":
        train = test = None
    else:
        train, test = data if data is not None else load_dataset(cfg.dataset)
    capacities = resolve_capacities(cfg, train)
    params = dict(cfg.params)
    norm_kind = params.get("norm", NORM_KINDS[cfg.family]) if cfg.family in ("rff", "relu_rf") \
        else NORM_KINDS[cfg.family]

    if cfg.family == "two_layer_net":
        tasks = [(cfg.family, -1, r, cfg.base_seed, params) for r in range(cfg.repeats)]
    elif cfg.family == "kernel_ref":
        tasks = []
    else:
        tasks = [(cfg.family, c, r, cfg.base_seed, params) for c in capacities for r in range(cfg.repeats)]
    if cfg.family in ("rff", "kernel_ref"):
        tasks.append(("kernel_ref", -1, 0, cfg.base_seed, params))
    outputs = _execute(tasks, cfg.workers, train, test)

    per_cap = {c: ([], []) for c in capacities}
    references, histories = [], {}
    for (family, capacity, repeat, _, _), status, payload in outputs:
        if family == "kernel_ref":
            base = cfg.family if cfg.family != "kernel_ref" else "kernel"
            references.append(_aggregate(f"{base}_inf", -1, [payload], [status], 1, "rkhs"))
        elif family == "two_layer_net":
            if payload is None:
                for c in capacities:
                    per_cap[c][0].append(None)
                    per_cap[c][1].append(status)
                continue
            for cap, cell, hist in payload:
                per_cap[cap][0].append(cell)
                per_cap[cap][1].append(status)
                histories[(cap, repeat)] = hist
        else:
            per_cap[capacity][0].append(payload)
            per_cap[capacity][1].append(status)

    points = [_aggregate(cfg.family, c, *per_cap[c], cfg.repeats, norm_kind) for c in capacities]
    thr_sq = detect_interpolation_threshold(points, cfg.threshold_tol, "squared")
    thr_01 = detect_interpolation_threshold(points, 0.0, "zero_one")
    threshold = thr_01 if cfg.family == "two_layer_net" else thr_sq
    metadata = {"risk_convention": RISK_CONVENTION, "seed_rule": "derive_seed(base_seed, family, capacity, repeat)",
                "numpy": np.__version__}
    if cfg.family == "two_layer_net":
        metadata["hidden_activation"] = "relu"
    if cfg.family in ("rff", "relu_rf"):
        unit = params.get("capacity_unit", "real_params")
        halve = cfg.family == "rff" and unit == "real_params"
        metadata["capacity_unit"] = unit
        metadata["feature_counts"] = {str(c): c // 2 if halve else c for c in capacities}
    return SweepResult(cfg, points, threshold, thr_sq, thr_01, references, metadata, histories)


def detect_interpolation_threshold(points, tol: float = SQUARED_TOL, criterion: str = "squared"):
    """Smallest capacity whose mean training risk is interpolating, or None.

    ``squared``: mean train squared risk <= tol. ``zero_one``: mean train
    zero-one risk == 0. Accepts a SweepResult or a sequence of RiskPoints.
    """
    if isinstance(points, SweepResult):
        points = points.points
    if criterion not in ("squared", "zero_one"):
        raise ValueError(f"unknown criterion {criterion!r}")
    for p in sorted(points, key=lambda p: p.capacity):
        value = p.train_sq if criterion == "squared" else p.train_01
        if not math.isnan(value) and (value <= tol if criterion == "squared" else value == 0.0):
            return p.capacity
    return None


# --------------------------------------------------------------------------
# Double-descent shape check
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubleDescentCheck:
    threshold: Optional[int]
    test_peak_at_threshold: bool
    second_descent: bool
    norm_peak_at_threshold: bool
    norm_nonincreasing_after: bool

    @property
    def passed(self) -> bool:
        return (self.test_peak_at_threshold and self.second_descent
                and self.norm_peak_at_threshold and self.norm_nonincreasing_after)


def verify_double_descent(points, threshold: Optional[int], metric: str = "test_sq",
                          slack: float = 1.0) -> DoubleDescentCheck:
    """Check the double-descent triple at ``threshold``.

    Test risk must be a local maximum at the threshold, the best test risk
    past it must not exceed the best one before it, and the norm must peak
    at the threshold and not increase afterwards. Comparisons allow
    ``slack`` repeat standard deviations.
    """
    if isinstance(points, SweepResult):
        points = points.points
    points = sorted(points, key=lambda p: p.capacity)
    caps = [p.capacity for p in points]
    if threshold is None or threshold not in caps:
        return DoubleDescentCheck(threshold, False, False, False, False)
    i = caps.index(threshold)
    risk = np.array([getattr(p, metric) for p in points])
    risk_sd = np.nan_to_num(np.array([getattr(p, f"{metric}_std") for p in points]))
    norm = np.array([p.norm for p in points])
    norm_sd = np.nan_to_num(np.array([p.norm_std for p in points]))

    peak = all(risk[i] + slack * risk_sd[i] >= risk[j] for j in (i - 1, i + 1) if 0 <= j < len(points))
    before, after = risk[:i], risk[i + 1:]
    second = bool(before.size and after.size and np.min(after) <= np.min(before))
    norm_peak = bool(np.all(norm[i] + slack * norm_sd[i] >= norm))
    nonincr = all(norm[j + 1] <= norm[j] + slack * max(norm_sd[j], norm_sd[j + 1])
                  for j in range(i, len(points) - 1))
    return DoubleDescentCheck(threshold, peak, second, norm_peak, bool(nonincr))


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def result_rows(result: SweepResult) -> list:
    rows = []
    for p in list(result.points) + list(result.references):
        rows.append([p.family, p.capacity, p.repeat_count, p.train_sq, p.train_sq_std, p.test_sq,
                     p.test_sq_std, p.train_01, p.train_01_std, p.test_01, p.test_01_std, p.norm,
                     p.norm_std, p.norm_kind, p.status])
    return rows


def emit_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in result_rows(result):
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> list:
    """Rows of a sweep CSV as RiskPoints (reference rows included)."""
    out = []
    with Path(path).open(newline="") as fh:
        for r in csv.DictReader(fh):
            f = {k: float(r[k]) for k in CSV_COLUMNS[3:13]}
            out.append(RiskPoint(int(r["capacity"]), int(r["repeat_count"]), f["train_sq_mean"],
                                 f["train_sq_std"], f["test_sq_mean"], f["test_sq_std"], f["train_01_mean"],
                                 f["train_01_std"], f["test_01_mean"], f["test_01_std"], f["norm_mean"],
                                 f["norm_std"], r["norm_kind"], r["status"], r["family"]))
    return out


def plot_points(points, threshold=None, title: str = "", log_risk: bool = True):
    """Figure with test/train risk panels and a norm panel. Reference rows
    (capacity -1) become horizontal lines."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curve = sorted((p for p in points if p.capacity >= 0), key=lambda p: p.capacity)
    refs = [p for p in points if p.capacity < 0]
    caps = np.array([p.capacity for p in curve], dtype=float)
    has_01 = any(not math.isnan(p.test_01) for p in curve)
    panels = [("test_sq", "test squared risk"), ("train_sq", "train squared risk")]
    if has_01:
        panels.insert(1, ("test_01", "test zero-one risk"))
    panels.append(("norm", "norm"))
    fig, axes = plt.subplots(len(panels), 1, figsize=(6, 2.4 * len(panels)), sharex=True)
    for ax, (attr, label) in zip(np.atleast_1d(axes), panels):
        vals = np.array([getattr(p, attr) for p in curve], dtype=float)
        ax.plot(caps, vals, marker="o", ms=3, label=label)
        for ref in refs:
            v = getattr(ref, attr)
            if not math.isnan(v):
                ax.axhline(v, color="tab:green", ls="--", lw=1, label=ref.family)
        if threshold is not None:
            ax.axvline(threshold, color="k", ls=":", lw=1)
        if log_risk and attr != "test_01" and np.any(vals > 0):
            ax.set_yscale("log")
        ax.set_ylabel(label)
        ax.legend(fontsize=7)
    ax.set_xlabel("capacity")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return fig


def threshold_from_points(points) -> Optional[int]:
    """Threshold as run_sweep would pick it, recomputed from CSV rows."""
    curve = [p for p in points if p.capacity >= 0]
    if curve and curve[0].family == "two_layer_net":
        return detect_interpolation_threshold(curve, 0.0, "zero_one")
    return detect_interpolation_threshold(curve, SQUARED_TOL, "squared")


def emit_plot(result_or_points, path, title: str = "") -> Path:
    import matplotlib.pyplot as plt

    if isinstance(result_or_points, SweepResult):
        points = list(result_or_points.points) + list(result_or_points.references)
        title = title or result_or_points.config.family
    else:
        points = list(result_or_points)
    fig = plot_points(points, threshold_from_points(points), title)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def emit_histories(result: SweepResult, directory) -> list:
    """One per-epoch training history CSV per (capacity, repeat) network."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for (cap, rep), hist in sorted(result.histories.items()):
        p = directory / f"history_cap{cap}_rep{rep}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_sq", "train_01"])
            for e, (sq, z) in enumerate(zip(hist.train_sq, hist.train_01)):
                w.writerow([e, repr(sq), repr(z)])
        paths.append(p)
    return paths
