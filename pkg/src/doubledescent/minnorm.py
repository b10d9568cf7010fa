"""Minimum-norm and ridge least squares.

The empirical risk is the mean squared error ``(1/n) * ||A a - Y||_F^2``.
When the minimizer is not unique (more columns than independent rows) the
solver returns the one with the smallest, optionally weighted, coefficient
norm ``sum_j a_j^2 / w_j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_RANK_TOL = 1e-12


@dataclass(frozen=True)
class SolveResult:
    coefficients: np.ndarray
    rank: int
    coefficient_norm: float
    residual_sq: float
    condition: float = np.nan

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]


def _check(design, targets):
    A = np.asarray(design, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise ValueError(f"design must be a non-empty 2-D matrix, got shape {A.shape}")
    vector = Y.ndim == 1
    Y2 = Y[:, None] if vector else Y
    if Y2.ndim != 2 or Y2.shape[0] != A.shape[0]:
        raise ValueError(f"targets of shape {Y.shape} do not match design {A.shape}")
    if Y2.shape[1] == 0:
        raise ValueError("targets have no columns")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(Y2))):
        raise ValueError("non-finite entries in design or targets")
    return A, Y2, vector


def _result(A, Y, coef, rank, condition, vector) -> SolveResult:
    resid = A @ coef - Y
    if vector:
        coef = coef[:, 0]
    return SolveResult(
        coefficients=coef,
        rank=int(rank),
        coefficient_norm=float(np.linalg.norm(coef)),
        residual_sq=float(np.sum(resid * resid)),
        condition=float(condition),
    )


def solve_min_norm(design, targets, rank_tol: float = DEFAULT_RANK_TOL,
                   weights: Optional[np.ndarray] = None) -> SolveResult:
    """Least-squares solution of minimum (weighted) l2 norm.

    Uses a thin SVD of the design; singular values below
    ``rank_tol * s_max`` are treated as zero. With ``weights`` the returned
    coefficients minimize ``sum_j a_j^2 / w_j`` among all least-squares
    minimizers, obtained by solving the unweighted problem for the design
    with column j scaled by ``sqrt(w_j)`` and mapping back.

    ``coefficient_norm`` on the result is always the plain Frobenius norm.
    """
    A, Y, vector = _check(design, targets)
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (A.shape[1],):
            raise ValueError("weights must have one entry per design column")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and strictly positive")
        root_w = np.sqrt(w)
        scaled = A * root_w
    else:
        root_w = None
        scaled = A

    U, s, Vt = np.linalg.svd(scaled, full_matrices=False)
    if s[0] == 0.0:
        coef = np.zeros((A.shape[1], Y.shape[1]))
        return _result(A, Y, coef, 0, np.inf, vector)
    rank = int(np.sum(s > rank_tol * s[0]))
    inner = (U[:, :rank].T @ Y) / s[:rank, None]
    coef = Vt[:rank].T @ inner
    if root_w is not None:
        coef = coef * root_w[:, None]
    return _result(A, Y, coef, rank, s[0] / s[rank - 1], vector)


def solve_ridge(design, targets, lam: float) -> SolveResult:
    """Minimize ``(1/n) ||A a - Y||^2 + lam * ||a||^2``.

    Solves ``(A^T A + n lam I) a = A^T Y``, or the equivalent dual system
    ``a = A^T (A A^T + n lam I)^{-1} Y`` when A has more columns than rows.
    """
    if not lam > 0:
        raise ValueError("ridge parameter must be positive")
    A, Y, vector = _check(design, targets)
    n, D = A.shape
    shift = n * lam
    if D <= n:
        G = A.T @ A
        G[np.diag_indices_from(G)] += shift
        coef = np.linalg.solve(G, A.T @ Y)
    else:
        G = A @ A.T
        G[np.diag_indices_from(G)] += shift
        coef = A.T @ np.linalg.solve(G, Y)
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > DEFAULT_RANK_TOL * s[0])) if s[0] > 0 else 0
    cond = (s[0] ** 2 + shift) / (s[-1] ** 2 + shift)
    return _result(A, Y, coef, rank, cond, vector)


def coefficient_norm(result: SolveResult, scale_by_sqrt_n_features: bool = False) -> float:
    norm = float(np.linalg.norm(result.coefficients))
    if scale_by_sqrt_n_features:
        norm *= np.sqrt(result.n_features)
    return norm


def weighted_norm(coefficients, weights) -> float:
    """``sqrt(sum_j |a_j|^2 / w_j)`` summed over all output columns."""
    a = np.asarray(coefficients)
    w = np.asarray(weights, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return float(np.sqrt(np.sum(np.abs(a) ** 2 / w[:, None])))


def null_space_basis(design, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical null space of the design."""
    A = np.asarray(design, dtype=np.float64)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    return Vt[rank:].T.copy()
