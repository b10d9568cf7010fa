"""Dataset loading, preprocessing, one-hot encoding and subsampling.

Every trainer in the package consumes a :class:`Dataset`: a finite feature
matrix plus a target matrix. For classification data the targets are the
one-hot encoding of ``class_ids``; regression tasks carry real targets and
``class_ids=None``.
"""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
MNIST_PIXEL_RANGE = (0.0, 255.0)


class IDXFormatError(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    class_ids: Optional[np.ndarray] = None
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        Y = np.asarray(self.targets, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.shape[0] != X.shape[0]:
            raise ValueError("features and targets disagree on the number of rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite entries")
        if not np.all(np.isfinite(Y)):
            raise ValueError("targets contain non-finite entries")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "targets", _readonly(Y))
        if self.class_ids is not None:
            ids = np.asarray(self.class_ids, dtype=np.int64)
            if ids.shape != (X.shape[0],):
                raise ValueError("class_ids must be a vector with one entry per row")
            if not np.array_equal(one_hot_encode(ids, Y.shape[1]), Y):
                raise ValueError("targets are not the one-hot encoding of class_ids")
            object.__setattr__(self, "class_ids", _readonly(ids))

    @classmethod
    def from_classes(cls, features, class_ids, n_classes: Optional[int] = None,
                     name: str = "dataset") -> "Dataset":
        ids = np.asarray(class_ids, dtype=np.int64)
        K = int(ids.max()) + 1 if n_classes is None else int(n_classes)
        return cls(features, one_hot_encode(ids, K), ids, name=name)

    @property
    def labels_onehot(self) -> np.ndarray:
        if self.class_ids is None:
            raise AttributeError(f"{self.name} is a regression dataset without class labels")
        return self.targets

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def K(self) -> int:
        return self.targets.shape[1]

    @property
    def is_classification(self) -> bool:
        return self.class_ids is not None

    def take(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        ids = None if self.class_ids is None else self.class_ids[rows]
        return Dataset(self.features[rows], self.targets[rows], ids, name=self.name)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.targets, self.class_ids, name=self.name)


@dataclass(frozen=True)
class PreprocessSpec:
    """How to scale features before training.

    ``feature_range`` declares the known value range of every feature (for
    8-bit images, ``(0, 255)``). When set, ``interval_01`` maps that range
    onto [0, 1] instead of each column's observed extremes.
    """

    scaling: Literal["interval_01", "zscore", "none"] = "interval_01"
    seed: int = 0
    subsample_n: Optional[int] = None
    feature_range: Optional[tuple] = field(default=None)

    def __post_init__(self):
        if self.scaling not in ("interval_01", "zscore", "none"):
            raise ValueError(f"unknown scaling {self.scaling!r}")
        if self.subsample_n is not None and self.subsample_n < 1:
            raise ValueError("subsample_n must be positive")
        if self.feature_range is not None:
            lo, hi = self.feature_range
            if not hi > lo:
                raise ValueError("feature_range must satisfy hi > lo")


# --------------------------------------------------------------------------
# IDX format
# --------------------------------------------------------------------------

def parse_idx(data: bytes, expected_kind: Literal["images", "labels"]) -> np.ndarray:
    """Decode an unsigned-byte IDX file (MNIST distribution format)."""
    if expected_kind not in ("images", "labels"):
        raise ValueError(f"unknown IDX kind {expected_kind!r}")
    if len(data) < 4:
        raise IDXFormatError("file too short for an IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in (IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC):
        raise IDXFormatError(f"wrong magic number 0x{magic:08x}")
    kind = "images" if magic == IDX_IMAGES_MAGIC else "labels"
    if kind != expected_kind:
        raise IDXFormatError(f"expected an IDX {expected_kind} file, found {kind}")
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise IDXFormatError("truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    size = int(np.prod(dims, dtype=np.int64))
    payload = data[header_len:]
    if len(payload) != size:
        raise IDXFormatError(
            f"payload has {len(payload)} bytes, header declares {size} ({'x'.join(map(str, dims))})")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims).copy()


def serialize_idx(array: np.ndarray) -> bytes:
    """Inverse of :func:`parse_idx` for 1-D label and 3-D image arrays."""
    a = np.asarray(array)
    if a.dtype != np.uint8:
        if np.any((a < 0) | (a > 255)) or np.any(a != np.round(a)):
            raise ValueError("IDX ubyte payload must hold integers in [0, 255]")
        a = a.astype(np.uint8)
    if a.ndim == 1:
        magic = IDX_LABELS_MAGIC
    elif a.ndim == 3:
        magic = IDX_IMAGES_MAGIC
    else:
        raise ValueError("only 1-D label and 3-D image arrays are supported")
    header = struct.pack(f">I{a.ndim}I", magic, *a.shape)
    return header + np.ascontiguousarray(a).tobytes()


def _read_maybe_gz(path: Path) -> bytes:
    with open(path, "rb") as f:
        head = f.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as f:
        return f.read()


def _find(directory: Path, stem: str) -> Path:
    for cand in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        p = directory / cand
        if p.exists():
            return p
    raise FileNotFoundError(f"no {stem}[.gz] under {directory}")


def load_mnist(directory, split: Literal["train", "test"] = "train") -> Dataset:
    """Load an MNIST split from the four standard IDX files (gzipped or raw).

    Pixels are returned unscaled (0..255); pair with
    ``PreprocessSpec(feature_range=MNIST_PIXEL_RANGE)``.
    """
    directory = Path(directory)
    img_name, lab_name = MNIST_FILES[split]
    images = parse_idx(_read_maybe_gz(_find(directory, img_name)), "images")
    labels = parse_idx(_read_maybe_gz(_find(directory, lab_name)), "labels")
    if images.shape[0] != labels.shape[0]:
        raise IDXFormatError("image and label files disagree on the item count")
    X = images.reshape(images.shape[0], -1).astype(np.float64)
    return Dataset.from_classes(X, labels.astype(np.int64), 10, name=f"mnist-{split}")


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def load_csv(path, n_classes: Optional[int] = None, regression: bool = False,
             name: Optional[str] = None) -> Dataset:
    """Read a numeric CSV whose last column is the class id (or the target).

    A header row is detected and skipped when its first cell is not numeric.
    Gzipped files are accepted.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    rows = []
    with opener(path, "rt", newline="") as f:
        for i, row in enumerate(csv.reader(f)):
            if not row:
                continue
            if i == 0:
                try:
                    float(row[0])
                except ValueError:
                    continue
            rows.append(row)
    if not rows:
        raise ValueError(f"{path} holds no data rows")
    table = np.asarray(rows, dtype=np.float64)
    X, last = table[:, :-1], table[:, -1]
    name = name or path.name
    if regression:
        return Dataset(X, last[:, None], None, name=name)
    if np.any(last != np.round(last)) or np.any(last < 0):
        raise ValueError("last CSV column must hold non-negative integer class ids")
    return Dataset.from_classes(X, last.astype(np.int64), n_classes, name=name)


# --------------------------------------------------------------------------
# Transformations
# --------------------------------------------------------------------------

def preprocess(features: np.ndarray, spec: PreprocessSpec) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("cannot preprocess non-finite features")
    if spec.scaling == "none":
        return X.copy()
    if spec.scaling == "interval_01":
        if spec.feature_range is not None:
            lo, hi = map(float, spec.feature_range)
            return np.clip((X - lo) / (hi - lo), 0.0, 1.0)
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        out = np.zeros_like(X)
        ok = span > 0
        out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
        return out
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population variance
    out = np.zeros_like(X)
    ok = std > 0
    out[:, ok] = (X[:, ok] - mean[ok]) / std[ok]
    return out


def one_hot_encode(class_ids, K: int) -> np.ndarray:
    ids = np.asarray(class_ids)
    if K < 1:
        raise ValueError("K must be positive")
    if ids.size and (ids.min() < 0 or ids.max() >= K):
        raise ValueError(f"class ids must lie in [0, {K})")
    out = np.zeros((ids.shape[0], K))
    out[np.arange(ids.shape[0]), ids.astype(np.int64)] = 1.0
    return out


def permutation_prefix(N: int, n: int, seed: int) -> np.ndarray:
    """First ``n`` entries of a seeded Fisher-Yates shuffle of ``range(N)``."""
    if n > N:
        raise ValueError(f"cannot draw {n} distinct rows from {N}")
    rng = np.random.default_rng(seed)
    idx = np.arange(N)
    draws = rng.integers(np.arange(n), N)  # j_i uniform on [i, N)
    for i, j in enumerate(draws):
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:n].copy()


def subsample(ds: Dataset, n: int, seed: int) -> Dataset:
    """Uniform sample of ``n`` rows without replacement."""
    if n < 1:
        raise ValueError("n must be positive")
    return ds.take(permutation_prefix(ds.n, n, seed))


def holdout_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random (train, test) partition with ``round(test_fraction * n)`` test rows."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    perm = permutation_prefix(ds.n, ds.n, seed)
    n_test = int(round(test_fraction * ds.n))
    return ds.take(np.sort(perm[n_test:])), ds.take(np.sort(perm[:n_test]))


def make_friedman1(n: int, d: int = 10, noise_std: float = 1.0, seed: int = 0) -> Dataset:
    """Friedman #1 regression task on [0, 1]^d (needs d >= 5).

    y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise
    """
    if d < 5:
        raise ValueError("Friedman #1 needs at least 5 features")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    y = (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
         + 10 * X[:, 3] + 5 * X[:, 4])
    y = y + noise_std * rng.standard_normal(n)
    return Dataset(X, y[:, None], None, name="friedman1")
