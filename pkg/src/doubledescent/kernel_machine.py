"""Gaussian kernel interpolation (the infinite-feature reference model)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

log = logging.getLogger(__name__)

_ROW_CHUNK = 4096


class SingularGramError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelModel:
    support_points: np.ndarray
    dual_coefficients: np.ndarray
    sigma: float
    jitter: float = 0.0
    # squared RKHS norm computed during a spectral fit, where recomputing
    # alpha^T K alpha from a huge alpha would lose all precision
    norm_sq: Optional[float] = None


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    D = (np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :]
         - 2.0 * (A @ B.T))
    return np.maximum(D, 0.0)


def gaussian_gram(A, B, sigma: float) -> np.ndarray:
    """Entries ``exp(-||a_i - b_j||^2 / (2 sigma^2))``."""
    same = B is A
    A = np.asarray(A, dtype=np.float64)
    B = A if same else np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ValueError(f"incompatible shapes {A.shape} and {B.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("non-finite inputs")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    D = _sq_dists(A, B)
    if same:
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return np.exp(-D / (2.0 * sigma * sigma))


def fit_interpolating(X, Y, sigma: float, jitter: float = 0.0, *, fallback: bool = True,
                      rank_tol: Optional[float] = None) -> KernelModel:
    """Solve ``(K + jitter I) alpha = Y`` for the Gaussian gram K of X.

    By default a Cholesky factorization is used. If it fails and
    ``fallback`` is set, it is retried once with jitter ``1e-10 * trace/n``;
    otherwise :class:`SingularGramError` is raised.

    With ``rank_tol`` the gram is instead pseudo-inverted through its
    eigendecomposition, dropping eigenvalues below ``rank_tol * lambda_max``.
    That gives the minimum-norm interpolant even when the gram is numerically
    singular (dense samples, wide kernels).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != X.shape[0]:
        raise ValueError("X and Y disagree on the number of rows")
    K = gaussian_gram(X, X, sigma)

    if rank_tol is not None:
        lam, U = np.linalg.eigh(K)
        keep = lam > rank_tol * lam[-1]
        proj = U[:, keep].T @ Y
        alpha = U[:, keep] @ (proj / lam[keep, None])
        norm_sq = float(np.sum(proj * proj / lam[keep, None]))
        return KernelModel(X, alpha, float(sigma), 0.0, norm_sq)

    n = X.shape[0]
    try:
        factor = linalg.cho_factor(K + jitter * np.eye(n), lower=True, check_finite=False)
    except linalg.LinAlgError:
        if not fallback:
            raise SingularGramError(
                f"Gaussian gram of {n} points is not positive definite at jitter={jitter}")
        jitter = max(jitter, 1e-10 * np.trace(K) / n)
        log.warning("gram factorization failed; retrying with jitter %.3g", jitter)
        try:
            factor = linalg.cho_factor(K + jitter * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularGramError(f"gram still singular at jitter={jitter}") from exc
    alpha = linalg.cho_solve(factor, Y, check_finite=False)
    return KernelModel(X, alpha, float(sigma), float(jitter))


def rkhs_norm(model: KernelModel) -> float:
    """``sqrt(sum over outputs of alpha^T K alpha)``."""
    if model.norm_sq is not None:
        return float(np.sqrt(max(model.norm_sq, 0.0)))
    K = gaussian_gram(model.support_points, model.support_points, model.sigma)
    q = np.einsum("ik,ij,jk->", model.dual_coefficients, K, model.dual_coefficients)
    return float(np.sqrt(max(q, 0.0)))


def predict(model: KernelModel, X_new) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim != 2 or X_new.shape[1] != model.support_points.shape[1]:
        raise ValueError(f"expected {model.support_points.shape[1]} input columns, got {X_new.shape}")
    out = [gaussian_gram(X_new[i:i + _ROW_CHUNK], model.support_points, model.sigma)
           @ model.dual_coefficients for i in range(0, X_new.shape[0], _ROW_CHUNK)]
    if not out:
        return np.zeros((0, model.dual_coefficients.shape[1]))
    return np.concatenate(out, axis=0)
