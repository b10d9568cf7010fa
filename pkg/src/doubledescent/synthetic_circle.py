"""One-dimensional Fourier model on the circle.

Basis functions ``e_k(x) = exp(i (k-1) x)`` for k = 1, 2, ... . The target
``h* = sum_k p_k e_k`` uses the same law ``p_k ~ 1/k^2`` that random
subclasses draw their frequencies from. Inputs live on the grid
``{2 pi j / M}``, where e_1..e_M are orthonormal under the uniform measure,
so risks are computed exactly on that grid.

Frequency indices are 1-based throughout this module.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .minnorm import DEFAULT_RANK_TOL, solve_min_norm
from .seeding import derive_seed

_MAX_REJECTION_DRAWS = 20_000_000


@dataclass(frozen=True)
class CircleSpec:
    M: int = 4096
    K_max: Optional[int] = None
    noise_variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("grid size M must be positive")
        if self.K_max is None:
            object.__setattr__(self, "K_max", self.M)
        if not 1 <= self.K_max <= self.M:
            raise ValueError("K_max must lie in [1, M] to keep frequencies distinguishable on the grid")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")


@dataclass(frozen=True)
class FrequencyDistribution:
    p: np.ndarray  # p[k-1] is the probability of index k

    @classmethod
    def inverse_square(cls, K_max: int) -> "FrequencyDistribution":
        k = np.arange(1, K_max + 1, dtype=np.float64)
        p = 1.0 / k ** 2
        return cls(p / p.sum())

    @property
    def K_max(self) -> int:
        return self.p.shape[0]

    def prob(self, indices) -> np.ndarray:
        return self.p[np.asarray(indices) - 1]


@dataclass(frozen=True)
class CircleTarget:
    coefficients: np.ndarray  # complex, coefficients[k-1] multiplies e_k

    @classmethod
    def from_distribution(cls, dist: FrequencyDistribution) -> "CircleTarget":
        return cls(dist.p.astype(np.complex128))

    @property
    def power(self) -> float:
        """Mean of |h*|^2 over the grid (Parseval)."""
        return float(np.sum(np.abs(self.coefficients) ** 2))


@dataclass(frozen=True)
class CircleData:
    grid_index: np.ndarray  # j in [0, M)
    x: np.ndarray
    y: np.ndarray           # complex


def noise_variance_for_snr(target: CircleTarget, snr: float) -> float:
    """Noise variance giving ``E|h*(x)|^2 / sigma^2 = snr``; 0 for infinite SNR."""
    if snr <= 0:
        raise ValueError("SNR must be positive")
    return 0.0 if np.isinf(snr) else target.power / snr


def sample_indices(N: int, dist: FrequencyDistribution, seed: int) -> np.ndarray:
    """Draw i.i.d. from ``dist`` until ``N`` distinct indices have appeared.

    Returned sorted. ``N = K_max`` short-circuits to every index. If the
    rejection stream runs past 2e7 draws, the remaining indices are taken by
    successive weighted sampling over the unseen ones (Efraimidis-Spirakis
    keys), which has the same law as continuing the stream.
    """
    K = dist.K_max
    if N > K:
        raise ValueError(f"cannot pick {N} distinct indices out of {K}")
    if N < 1:
        raise ValueError("N must be positive")
    if N == K:
        return np.arange(1, K + 1)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(dist.p)
    cdf /= cdf[-1]
    seen = np.zeros(K, dtype=bool)
    have = 0
    drawn = 0
    batch = max(1024, 4 * N)
    while have < N and drawn < _MAX_REJECTION_DRAWS:
        draws = np.minimum(np.searchsorted(cdf, rng.random(batch), side="right"), K - 1)
        drawn += batch
        # keep first occurrences in draw order so the stream stops at exactly N
        uniq, first = np.unique(draws, return_index=True)
        new = draws[np.sort(first[~seen[uniq]])]
        take = new[: N - have]
        seen[take] = True
        have += take.shape[0]
        batch = min(batch * 2, 1 << 22)
    if have < N:
        rest = np.flatnonzero(~seen)
        keys = np.log(rng.random(rest.shape[0])) / dist.p[rest]
        seen[rest[np.argsort(-keys, kind="stable")[: N - have]]] = True
    return np.flatnonzero(seen) + 1


def target_on_grid(target: CircleTarget, M: int) -> np.ndarray:
    """h* evaluated at every grid point 2 pi j / M."""
    c = np.zeros(M, dtype=np.complex128)
    c[: target.coefficients.shape[0]] = target.coefficients
    return M * np.fft.ifft(c)


def generate_data(spec: CircleSpec, target: CircleTarget, n: int, seed: int) -> CircleData:
    """n grid points drawn uniformly with replacement; y = h*(x) + real noise."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    j = rng.integers(0, spec.M, size=n)
    h = target_on_grid(target, spec.M)[j]
    noise = np.sqrt(spec.noise_variance) * rng.standard_normal(n) if spec.noise_variance > 0 else 0.0
    return CircleData(j, 2 * np.pi * j / spec.M, h + noise)


def design_matrix(x: np.ndarray, indices: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.outer(x, np.asarray(indices) - 1))


def _realify(Phi: np.ndarray) -> np.ndarray:
    return np.block([[Phi.real, -Phi.imag], [Phi.imag, Phi.real]])


def fit_circle(data: CircleData, indices, dist: FrequencyDistribution,
               rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Least squares over span{e_k : k in indices}.

    Below interpolation (N < n) this is ordinary least squares. From N >= n on,
    the interpolant minimizing ``sum |a_k|^2 / p_k`` is returned. The complex
    system is solved as its real 2n x 2N counterpart.
    """
    indices = np.asarray(indices)
    n, N = data.x.shape[0], indices.shape[0]
    if n == 0:
        raise ValueError("no data")
    A = _realify(design_matrix(data.x, indices))
    b = np.concatenate([data.y.real, np.asarray(data.y).imag])
    weights = None
    if N >= n:
        pk = dist.prob(indices)
        weights = np.concatenate([pk, pk])
    res = solve_min_norm(A, b, rank_tol=rank_tol, weights=weights)
    return res.coefficients[:N] + 1j * res.coefficients[N:]


def _embed(coef, indices, M: int) -> np.ndarray:
    c = np.zeros(M, dtype=np.complex128)
    c[np.asarray(indices) - 1] = coef
    return c


def excess_risk(coef, indices, target: CircleTarget, spec: CircleSpec) -> float:
    """Mean of |h - h*|^2 over the M grid points (noise floor excluded).

    Computed on the grid and cross-checked against the coefficient-space
    sum, which must agree to 1e-8 relative.
    """
    indices = np.asarray(indices)
    if indices.size and indices.max() > spec.M:
        raise ValueError("frequency index exceeds the grid size (aliasing)")
    diff = _embed(coef, indices, spec.M)
    diff[: target.coefficients.shape[0]] -= target.coefficients
    grid = spec.M * np.fft.ifft(diff)
    on_grid = float(np.mean(np.abs(grid) ** 2))
    parseval = float(np.sum(np.abs(diff) ** 2))
    if abs(on_grid - parseval) > 1e-8 * max(1.0, parseval):
        raise RuntimeError(f"grid risk {on_grid!r} and Parseval sum {parseval!r} disagree")
    return on_grid


def weighted_norm(coef, indices, dist: FrequencyDistribution) -> float:
    """``sqrt(sum_k |a_k|^2 / p_k)``."""
    a = np.asarray(coef)
    return float(np.sqrt(np.sum(np.abs(a) ** 2 / dist.prob(indices))))


def predict_circle(coef, indices, x) -> np.ndarray:
    return design_matrix(np.asarray(x, dtype=np.float64), indices) @ np.asarray(coef)


# --------------------------------------------------------------------------
# sweep over N
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleTrialResult:
    trial: int
    N: int
    excess_risk: float
    norm: float
    train_residual: float


def run_trial(n: int, N: int, trial: int, snr: float, M: int = 4096,
              base_seed: int = 0, K_max: Optional[int] = None) -> CircleTrialResult:
    """One (trial, N) cell.

    The training sample depends on (base_seed, trial) only, so every N in a
    trial sees the same data; the frequency subset is seeded by
    (base_seed, trial, N).
    """
    dist = FrequencyDistribution.inverse_square(K_max or M)
    target = CircleTarget.from_distribution(dist)
    spec = CircleSpec(M=M, K_max=K_max, noise_variance=noise_variance_for_snr(target, snr))
    data = generate_data(spec, target, n, derive_seed(base_seed, "circle-data", trial))
    idx = sample_indices(N, dist, derive_seed(base_seed, "circle-indices", trial, N))
    coef = fit_circle(data, idx, dist)
    resid = predict_circle(coef, idx, data.x) - data.y
    return CircleTrialResult(trial, N, excess_risk(coef, idx, target, spec),
                             weighted_norm(coef, idx, dist), float(np.mean(np.abs(resid) ** 2)))
