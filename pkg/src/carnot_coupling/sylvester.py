"""Particular solution of the T-Sylvester equation u v^t - v u^t = w.

For a wide matrix v (n x m, m >= n) with v v^t invertible and skew w, the
minimal particular solution is characterized by v u^t = -w/2 and reads

    u^t = -(1/2) v^t (v v^t)^{-1} w.

v v^t is Wishart-distributed (hence a.s. positive definite) when v has
standard Gaussian entries, so the system is solved by Cholesky factorization,
never by explicit inversion.  Monte Carlo diagnostics for the Wishart
inverse-trace identity E[tr((v v^t)^{-1})] = n/(m-n-1) and the induced
moment bound E|u|^2 <= E|w|^2 / (4(m-n-1)) live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .groups import SkewMatrix
from .mc import MCEstimate, run_estimator

__all__ = [
    "SingularGramError",
    "SylvesterSolution",
    "solve_tsylvester",
    "tsylvester_batch",
    "wishart_inv_trace_mc",
    "UMomentReport",
    "u_moment_check",
    "COND_LIMIT",
]

COND_LIMIT = 1e12


class SingularGramError(np.linalg.LinAlgError):
    """v v^t is numerically singular (condition number above COND_LIMIT)."""


@dataclass(frozen=True)
class SylvesterSolution:
    """Solution matrix with its residual |u v^t - v u^t - w| and Gram condition."""

    U: np.ndarray
    residual: float
    cond: float


def _hs_norm(mat: np.ndarray) -> float:
    return float(np.sqrt(np.sum(mat * mat)))


def solve_tsylvester(v: np.ndarray, w) -> SylvesterSolution:
    """Particular solution of u v^t - v u^t = w with skew right-hand side.

    v: (n, m) with m >= n; w: SkewMatrix or full (n, n) skew array.
    Raises SingularGramError when cond(v v^t) exceeds COND_LIMIT.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[0] > v.shape[1]:
        raise ValueError("need a wide matrix (n x m with m >= n)")
    w_mat = w.to_matrix() if isinstance(w, SkewMatrix) else np.asarray(w, dtype=float)
    n = v.shape[0]
    if w_mat.shape != (n, n):
        raise ValueError("right-hand side dimension mismatch")
    gram = v @ v.T
    eigs = np.linalg.eigvalsh(gram)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    if lam_min <= 0 or lam_min * COND_LIMIT < lam_max:
        raise SingularGramError(
            f"Gram spectrum [{lam_min:.3e}, {lam_max:.3e}] beyond the condition limit"
        )
    cond = lam_max / lam_min
    cho = scipy.linalg.cho_factor(gram, lower=True)
    # u = (1/2) w (v v^t)^{-1} v, transposed form of the closed-form solution
    u = 0.5 * w_mat @ scipy.linalg.cho_solve(cho, v)
    residual = _hs_norm(u @ v.T - v @ u.T - w_mat)
    return SylvesterSolution(u, residual, float(cond))


def tsylvester_batch(v: np.ndarray, w_mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched particular solutions; v (B, n, m), w_mat (B, n, n) skew.

    Returns (u, cond) with u (B, n, m).  Ill-conditioned rows are solved
    anyway and flagged through cond; callers treat them as resample events.
    """
    gram = v @ np.swapaxes(v, -1, -2)
    eigs = np.linalg.eigvalsh(gram)
    cond = eigs[..., -1] / np.where(eigs[..., 0] > 0, eigs[..., 0], np.finfo(float).tiny)
    sol = np.linalg.solve(gram, v)
    u = 0.5 * (w_mat @ sol)
    return u, cond


def wishart_inv_trace_mc(
    n: int, m: int, N: int, seed: int, workers: int = 1
) -> MCEstimate:
    """Monte Carlo mean of tr((v v^t)^{-1}) over Gaussian v; target n/(m-n-1)."""
    if m < n + 2:
        raise ValueError("need m >= n + 2 for the inverse trace to be integrable")
    if N < 1:
        raise ValueError("need at least one sample")

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        v = rng.standard_normal((count, n, m))
        gram = v @ np.swapaxes(v, -1, -2)
        eigs = np.linalg.eigvalsh(gram)
        return np.sum(1.0 / eigs, axis=-1)

    return run_estimator(sampler, max(N, 2), seed, workers)


@dataclass(frozen=True)
class UMomentReport:
    """Empirical E|u|^2 against the closed-form bound, pass flag at k sigma."""

    mean_u_sq: float
    stderr: float
    bound: float
    n_samples: int
    passed: bool


def u_moment_check(n: int, m: int, N: int, seed: int, workers: int = 1) -> UMomentReport:
    """Check E|u|^2 <= E|w|^2/(4(m-n-1)) with w having i.i.d. N(0,1) upper entries."""
    if m < n + 2:
        raise ValueError("need m >= n + 2")
    pairs = n * (n - 1) // 2
    bound = (2.0 * pairs) / (4.0 * (m - n - 1))  # E|w|^2 = n(n-1) in HS norm

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        v = rng.standard_normal((count, n, m))
        upper = rng.standard_normal((count, pairs))
        iu, ju = np.triu_indices(n, k=1)
        w = np.zeros((count, n, n))
        w[:, iu, ju] = upper
        w[:, ju, iu] = -upper
        u, _ = tsylvester_batch(v, w)
        return np.sum(u * u, axis=(-1, -2))

    est = run_estimator(sampler, N, seed, workers)
    return UMomentReport(est.mean, est.stderr, bound, est.n, est.mean <= bound + 3 * est.stderr)
