"""Two-layer ReLU networks trained by momentum SGD on the squared loss.

Loss convention: mean over samples of the squared error summed over the K
outputs. Momentum is the heavy-ball update ``v <- mu v - step * grad``,
``theta <- theta + v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from .dataset_io import Dataset

InitMode = Literal["glorot", "weight_reuse", "random_small"]
PARAMS = ("W1", "b1", "W2", "b2")
SMALL_INIT_STD = 0.1  # N(0, 0.01)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TwoLayerNet:
    W1: np.ndarray  # H x d
    b1: np.ndarray  # H
    W2: np.ndarray  # K x H
    b2: np.ndarray  # K

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @property
    def H(self) -> int:
        return self.W1.shape[0]

    @property
    def K(self) -> int:
        return self.W2.shape[0]

    @property
    def n_params(self) -> int:
        return param_count(self.d, self.H, self.K)

    def copy(self) -> "TwoLayerNet":
        return TwoLayerNet(*(getattr(self, p).copy() for p in PARAMS))

    def hidden(self, X) -> np.ndarray:
        return np.maximum(X @ self.W1.T + self.b1, 0.0)

    def forward(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return self.hidden(X) @ self.W2.T + self.b2


def param_count(d: int, H: int, K: int) -> int:
    return (d + 1) * H + (H + 1) * K


def threshold_hidden_units(n: int, d: int, K: int) -> int:
    """Smallest H with ``param_count(d, H, K) >= n * K``."""
    return max(0, math.ceil((n * K - K) / (d + 1 + K)))


def _glorot(fan_in: int, fan_out: int, rng) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out)) if fan_in + fan_out else 0.0
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_net(d: int, H: int, K: int, mode: InitMode = "glorot",
             donor: Optional[TwoLayerNet] = None, seed: int = 0) -> TwoLayerNet:
    """Fresh network.

    ``weight_reuse`` copies the donor's hidden units into the first H1 slots
    (W1 rows, b1 entries, W2 columns, plus b2) and draws the rest from
    N(0, 0.01). ``random_small`` draws every parameter from N(0, 0.01).
    ``glorot`` uses Glorot-uniform weights and zero biases.
    """
    rng = np.random.default_rng(seed)
    if mode == "glorot":
        return TwoLayerNet(_glorot(d, H, rng), np.zeros(H), _glorot(H, K, rng), np.zeros(K))
    if mode == "random_small":
        s = SMALL_INIT_STD
        return TwoLayerNet(s * rng.standard_normal((H, d)), s * rng.standard_normal(H),
                           s * rng.standard_normal((K, H)), s * rng.standard_normal(K))
    if mode != "weight_reuse":
        raise ValueError(f"unknown init mode {mode!r}")
    if donor is None:
        raise ValueError("weight_reuse needs a donor network")
    if donor.d != d or donor.K != K:
        raise ValueError("donor has different input or output dimension")
    H1 = donor.H
    if H1 > H:
        raise ValueError(f"donor has {H1} hidden units, more than the target's {H}")
    s = SMALL_INIT_STD
    extra = H - H1
    return TwoLayerNet(
        np.vstack([donor.W1, s * rng.standard_normal((extra, d))]),
        np.concatenate([donor.b1, s * rng.standard_normal(extra)]),
        np.hstack([donor.W2, s * rng.standard_normal((K, extra))]),
        donor.b2.copy(),
    )


def loss_and_grads(net: TwoLayerNet, X, Y):
    """Squared loss on (X, Y) and its gradient for every parameter."""
    Z = X @ net.W1.T + net.b1
    A = np.maximum(Z, 0.0)
    R = A @ net.W2.T + net.b2 - Y
    m = X.shape[0]
    loss = float(np.sum(R * R) / m)
    G = (2.0 / m) * R
    GA = (G @ net.W2) * (Z > 0)
    grads = {"W1": GA.T @ X, "b1": GA.sum(axis=0), "W2": G.T @ A, "b2": G.sum(axis=0)}
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    momentum: float = 0.95
    base_step: float = 0.01
    batch_size: int = 128
    epochs_max: int = 6000
    decay_rate: float = 0.1
    decay_every: int = 500
    regime: Literal["underparam", "overparam"] = "underparam"
    init: InitMode = "glorot"

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.base_step < 0 or self.batch_size < 1 or self.epochs_max < 0:
            raise ValueError("invalid step, batch size or epoch budget")
        if self.regime not in ("underparam", "overparam"):
            raise ValueError(f"unknown regime {self.regime!r}")

    def step_at(self, epoch: int) -> float:
        if self.regime == "overparam":
            return self.base_step
        return self.base_step * (1.0 - self.decay_rate) ** (epoch // self.decay_every)


@dataclass
class TrainHistory:
    train_sq: list = field(default_factory=list)
    train_01: list = field(default_factory=list)
    stopped_early: bool = False

    @property
    def epochs(self) -> int:
        return len(self.train_sq)


def _risks(net, X, Y, ids):
    out = net.forward(X)
    sq = float(np.mean(np.sum((out - Y) ** 2, axis=1)))
    err = float(np.mean(np.argmax(out, axis=1) != ids)) if ids is not None else float("nan")
    return sq, err


def train(net: TwoLayerNet, ds: Dataset, cfg: TrainConfig, seed: int = 0):
    """Momentum SGD over shuffled minibatches; returns ``(net, history)``.

    The input network is not modified. In the under-parameterized regime
    the step decays by ``decay_rate`` every ``decay_every`` epochs and
    training stops at the first epoch ending with zero classification
    error; over-parameterized runs use a fixed step for the full budget.
    """
    net = net.copy()
    X, Y, ids = ds.features, ds.targets, ds.class_ids
    rng = np.random.default_rng(seed)
    velocity = {p: np.zeros_like(getattr(net, p)) for p in PARAMS}
    hist = TrainHistory()
    with np.errstate(over="ignore", invalid="ignore"):  # non-finite loss raises TrainingDiverged
        _run_epochs(net, X, Y, ids, cfg, rng, velocity, hist)
    return net, hist


def _run_epochs(net, X, Y, ids, cfg, rng, velocity, hist):
    n = X.shape[0]
    for epoch in range(cfg.epochs_max):
        step = cfg.step_at(epoch)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            _, grads = loss_and_grads(net, X[rows], Y[rows])
            for p in PARAMS:
                v = velocity[p]
                v *= cfg.momentum
                v -= step * grads[p]
                getattr(net, p)[...] += v
        sq, err = _risks(net, X, Y, ids)
        if not math.isfinite(sq):
            raise TrainingDiverged(epoch)
        hist.train_sq.append(sq)
        hist.train_01.append(err)
        if cfg.regime == "underparam" and err == 0.0:
            hist.stopped_early = True
            return


def regime_for(n_params: int, n: int, K: int) -> str:
    return "underparam" if n_params < n * K else "overparam"


@dataclass(frozen=True)
class NetSweepPoint:
    H: int
    n_params: int
    net: TwoLayerNet
    history: TrainHistory
    init: str


def sweep_hidden_units(ds: Dataset, H_grid, cfg: TrainConfig, seed: int = 0,
                       weight_reuse: bool = True, seeds=None):
    """Train one network per H, in increasing order.

    With ``weight_reuse`` the networks below ``n * K`` parameters form a
    chain: the smallest starts from Glorot-uniform, each larger one from
    the previous trained network. Networks at or past ``n * K`` parameters
    start from ``cfg.init`` (Glorot by default). ``seeds`` optionally gives
    one seed per H; otherwise ``seed + index`` is used.
    """
    H_grid = list(H_grid)
    if any(b <= a for a, b in zip(H_grid, H_grid[1:])):
        raise ValueError("hidden-unit grid must be strictly increasing")
    seeds = list(seeds) if seeds is not None else [seed + i for i in range(len(H_grid))]
    donor = None
    out = []
    for H, s in zip(H_grid, seeds):
        P = param_count(ds.d, H, ds.K)
        regime = regime_for(P, ds.n, ds.K)
        if weight_reuse and regime == "underparam" and donor is not None:
            mode = "weight_reuse"
        elif weight_reuse and regime == "underparam":
            mode = "glorot"
        else:
            mode = cfg.init if cfg.init != "weight_reuse" else "glorot"
        net = init_net(ds.d, H, ds.K, mode, donor if mode == "weight_reuse" else None, seed=s)
        trained, hist = train(net, ds, replace(cfg, regime=regime), seed=s)
        if regime == "underparam":
            donor = trained
        out.append(NetSweepPoint(H, P, trained, hist, mode))
    return out
