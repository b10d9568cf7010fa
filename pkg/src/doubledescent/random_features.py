"""Random Fourier and random ReLU feature expansions.

A Fourier map with N frequencies produces 2N real columns
``[cos <v_1,x>, sin <v_1,x>, cos <v_2,x>, ...]``; the complex model
``sum_k a_k exp(i <v_k, x>)`` is represented by its real and imaginary parts.
A ReLU map with N unit-norm directions produces N columns ``max(<v_k,x>, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

FeatureKind = Literal["fourier", "relu"]
_ROW_CHUNK = 2048


@dataclass(frozen=True)
class FeatureSpec:
    kind: FeatureKind
    n_features: int
    input_dim: int
    sigma: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fourier", "relu"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.n_features < 1 or self.input_dim < 1:
            raise ValueError("n_features and input_dim must be positive")
        if self.kind == "fourier" and not self.sigma > 0:
            raise ValueError("bandwidth sigma must be positive")

    @property
    def n_params(self) -> int:
        """Real parameters per output: 2N for Fourier features, N for ReLU."""
        return 2 * self.n_features if self.kind == "fourier" else self.n_features


@dataclass(frozen=True)
class FeatureMap:
    spec: FeatureSpec
    weights: np.ndarray  # N x d

    @property
    def width(self) -> int:
        return self.spec.n_params


def sample_feature_map(spec: FeatureSpec) -> FeatureMap:
    rng = np.random.default_rng(spec.seed)
    g = rng.standard_normal((spec.n_features, spec.input_dim))
    if spec.kind == "fourier":
        W = g / spec.sigma
    else:
        W = g / np.linalg.norm(g, axis=1, keepdims=True)
    W.setflags(write=False)
    return FeatureMap(spec, W)


def featurize(fmap: FeatureMap, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != fmap.spec.input_dim:
        raise ValueError(f"expected inputs with {fmap.spec.input_dim} columns, got shape {X.shape}")
    Z = X @ fmap.weights.T
    if fmap.spec.kind == "relu":
        return np.maximum(Z, 0.0)
    out = np.empty((X.shape[0], 2 * fmap.spec.n_features))
    np.cos(Z, out=out[:, 0::2])
    np.sin(Z, out=out[:, 1::2])
    return out


def predict(fmap: FeatureMap, coefficients, X) -> np.ndarray:
    """``featurize(fmap, X) @ coefficients``, evaluated in row blocks."""
    C = np.asarray(coefficients, dtype=np.float64)
    if C.shape[0] != fmap.width:
        raise ValueError(f"coefficients have {C.shape[0]} rows, feature width is {fmap.width}")
    X = np.asarray(X, dtype=np.float64)
    blocks = [featurize(fmap, X[i:i + _ROW_CHUNK]) @ C for i in range(0, X.shape[0], _ROW_CHUNK)]
    if not blocks:
        return np.zeros((0,) + C.shape[1:])
    return np.concatenate(blocks, axis=0)
