"""Fill distance, the exponential interpolation bound, and a noiseless
kernel-interpolation experiment on the unit cube."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import kernel_machine as km
from .seeding import derive_seed

log = logging.getLogger(__name__)

MAX_GRID_PROBES = 4_000_000
SPECTRAL_RANK_TOL = 1e-13


@dataclass(frozen=True)
class FillEstimate:
    kappa: float
    n: int
    d: int
    probe_count: int
    grid_spacing: float = float("nan")


def unit_grid(d: int, per_axis: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _max_min_dist(tree: cKDTree, probes: np.ndarray) -> float:
    dist, _ = tree.query(probes, k=1)
    return float(np.max(dist))


def fill_distance(points, probes=None, *, n_random: int = 1000, seed: int = 0,
                  refine_ratio: float = 20.0) -> FillEstimate:
    """Largest distance from a probe in [0,1]^d to its nearest point.

    With explicit ``probes`` this is exactly max-over-probes of the nearest
    distance. Otherwise a regular grid plus ``n_random`` uniform probes is
    used, and the grid is refined until its spacing is at most
    ``kappa / refine_ratio``, which keeps the probe-induced underestimate
    small. The result never exceeds the true fill distance.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("need a non-empty n x d point set")
    d = P.shape[1]
    tree = cKDTree(P)
    if probes is not None:
        Q = np.asarray(probes, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] == 0 or Q.shape[1] != d:
            raise ValueError("probes must be a non-empty m x d matrix")
        return FillEstimate(_max_min_dist(tree, Q), P.shape[0], d, Q.shape[0])

    rng = np.random.default_rng(seed)
    random_probes = rng.uniform(size=(n_random, d))
    kappa = _max_min_dist(tree, random_probes)
    per_axis = 33
    count = n_random
    while True:
        grid = unit_grid(d, per_axis)
        kappa = max(kappa, _max_min_dist(tree, grid))
        count = n_random + grid.shape[0]
        spacing = 1.0 / (per_axis - 1)
        if spacing <= kappa / refine_ratio:
            break
        want = int(math.ceil(refine_ratio / max(kappa, 1e-300))) + 1
        if want ** d > MAX_GRID_PROBES:
            log.warning("fill-distance grid capped at %d probes per axis", per_axis)
            break
        per_axis = max(want, per_axis + 1)
    return FillEstimate(kappa, P.shape[0], d, count, spacing)


def theorem1_bound(n: int, d: int, norm_hstar: float, norm_h: float, A: float, B: float) -> float:
    """``A exp(-B (n / log n)^(1/d)) (norm_hstar + norm_h)``."""
    if n < 2:
        raise ValueError("the bound needs n >= 2 (log n must be positive)")
    if d < 1 or A <= 0 or B <= 0:
        raise ValueError("need d >= 1 and positive constants A, B")
    if norm_hstar < 0 or norm_h < 0:
        raise ValueError("norms are non-negative")
    return A * math.exp(-B * (n / math.log(n)) ** (1.0 / d)) * (norm_hstar + norm_h)


def fit_bound_constants(ns: Sequence[int], errors: Sequence[float], norm_sums: Sequence[float],
                        d: int) -> tuple[float, float]:
    """Least-squares (A, B) for ``log(err / norms) = log A - B (n/log n)^(1/d)``."""
    t = np.array([(n / math.log(n)) ** (1.0 / d) for n in ns])
    z = np.log(np.asarray(errors, dtype=float) / np.asarray(norm_sums, dtype=float))
    design = np.stack([np.ones_like(t), -t], axis=1)
    (logA, B), *_ = np.linalg.lstsq(design, z, rcond=None)
    return float(math.exp(logA)), float(B)


# --------------------------------------------------------------------------
# Fill-distance scaling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    d: int
    ns: tuple
    mean_log_kappa: tuple
    slope: float


def fill_scaling(d: int, ns: Sequence[int], trials: int = 20, seed: int = 0) -> ScalingFit:
    """Slope of mean log kappa_n against log(n / log n) for uniform samples."""
    means = []
    for n in ns:
        logs = []
        for t in range(trials):
            rng = np.random.default_rng(derive_seed(seed, "fill", d, n, t))
            est = fill_distance(rng.uniform(size=(n, d)), seed=derive_seed(seed, "probe", d, n, t))
            logs.append(math.log(est.kappa))
        means.append(float(np.mean(logs)))
    x = np.array([math.log(n / math.log(n)) for n in ns])
    slope = float(np.polyfit(x, np.array(means), 1)[0])
    return ScalingFit(d, tuple(ns), tuple(means), slope)


# --------------------------------------------------------------------------
# Noiseless approximation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelTarget:
    centers: np.ndarray
    coefficients: np.ndarray
    sigma: float

    def __call__(self, X) -> np.ndarray:
        return km.gaussian_gram(np.asarray(X, dtype=float), self.centers, self.sigma) @ self.coefficients

    @property
    def rkhs_norm(self) -> float:
        return km.rkhs_norm(km.KernelModel(self.centers, self.coefficients[:, None], self.sigma))


def random_kernel_target(d: int, n_centers: int, sigma: float, seed: int) -> KernelTarget:
    rng = np.random.default_rng(seed)
    return KernelTarget(rng.uniform(size=(n_centers, d)), rng.standard_normal(n_centers), float(sigma))


@dataclass(frozen=True)
class ApproxRow:
    n: int
    trial: int
    kappa: float
    sup_error: float
    norm_h: float
    norm_hstar: float


@dataclass
class ApproxReport:
    d: int
    sigma: float
    rows: list
    norm_tol: float = 1e-8
    means: dict = field(default_factory=dict)

    def __post_init__(self):
        for n in sorted({r.n for r in self.rows}):
            sel = [r for r in self.rows if r.n == n]
            self.means[n] = (float(np.mean([r.sup_error for r in sel])),
                             float(np.mean([r.kappa for r in sel])))

    @property
    def minimality_holds(self) -> bool:
        return all(r.norm_h <= r.norm_hstar + self.norm_tol for r in self.rows)

    @property
    def mean_sup_errors(self) -> list:
        return [self.means[n][0] for n in sorted(self.means)]

    @property
    def sup_error_decreasing(self) -> bool:
        """Mean sup error never increases along the n-grid and ends below where it started."""
        e = self.mean_sup_errors
        return all(b <= a for a, b in zip(e, e[1:])) and e[-1] < e[0]


def fit_min_norm_interpolant(X, y, sigma: float, rank_tol: float = SPECTRAL_RANK_TOL) -> km.KernelModel:
    return km.fit_interpolating(X, np.asarray(y, dtype=float), sigma, rank_tol=rank_tol)


def noiseless_approx_experiment(sigma: float, ns: Sequence[int], seed: int = 0, d: int = 1,
                                trials: int = 20, n_centers: int = 10, probes_per_axis: Optional[int] = None,
                                rank_tol: float = SPECTRAL_RANK_TOL,
                                sample_points=None) -> ApproxReport:
    """Fit min-norm Gaussian interpolants to a fixed kernel-expansion target.

    For each n and trial, n uniform points in [0,1]^d are labelled by the
    target without noise. ``sample_points`` (a callable ``(n, trial) ->
    points``) overrides the uniform draw.
    """
    target = random_kernel_target(d, n_centers, sigma, derive_seed(seed, "target", d))
    target_norm = target.rkhs_norm
    per_axis = probes_per_axis or (2001 if d == 1 else 161)
    probes = unit_grid(d, per_axis)
    truth = target(probes)
    rows = []
    for n in ns:
        for t in range(trials):
            if sample_points is not None:
                X = np.asarray(sample_points(n, t), dtype=float)
            else:
                X = np.random.default_rng(derive_seed(seed, "approx", d, n, t)).uniform(size=(n, d))
            model = fit_min_norm_interpolant(X, target(X), sigma, rank_tol)
            err = float(np.max(np.abs(km.predict(model, probes)[:, 0] - truth)))
            rows.append(ApproxRow(n, t, fill_distance(X, probes).kappa, err, km.rkhs_norm(model),
                                  target_norm))
    return ApproxReport(d, float(sigma), rows)


def bound_shape_check(report: ApproxReport, n_fit: int = 2) -> dict:
    """Fit (A, B) on the ``n_fit`` smallest n and compare the bound at the rest.

    Returns ``{n: (mean sup error, fitted bound)}`` for the remaining n.
    Norms enter as per-n means of ``norm_h`` and ``norm_hstar``.
    """
    ns = sorted(report.means)
    if len(ns) <= n_fit:
        raise ValueError("need more n values than fitting points")
    norms = {n: (float(np.mean([r.norm_hstar for r in report.rows if r.n == n])),
                 float(np.mean([r.norm_h for r in report.rows if r.n == n]))) for n in ns}
    A, B = fit_bound_constants(ns[:n_fit], [report.means[n][0] for n in ns[:n_fit]],
                               [sum(norms[n]) for n in ns[:n_fit]], report.d)
    return {n: (report.means[n][0], theorem1_bound(n, report.d, *norms[n], A, B)) for n in ns[n_fit:]}
