"""Legendre-basis synthesis of Brownian paths and the swept-area series.

A standard Brownian motion on [0, T] is synthesized from i.i.d. standard
Gaussian vectors xi_0, xi_1, ... as

    B_t = sum_k xi_k * int_0^t Q_k(s) ds,

where Q_k(s) = sqrt(2/T) P_k(2s/T - 1) and P_k are the L^2-normalized
Legendre polynomials on [-1, 1].  Only the k = 0 integral survives at t = T,
so B_T = sqrt(T) xi_0 exactly.  The signed swept areas of the components at
time T collapse to the bilinear series

    A_T = T * sum_k alpha_k * (xi_k odot xi_{k+1}),
    alpha_k = 1 / (2 sqrt((2k+1)(2k+3))),

which is what makes this basis the natural driver for endpoint couplings.
An Euler-Maruyama discretization of the area SDE is kept alongside as an
independent distributional oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .groups import CarnotElement, SkewMatrix, odot_packed, triu_pairs

__all__ = [
    "alpha",
    "alpha_sq",
    "pair_alpha_sq",
    "integral_Q",
    "integral_Q_table",
    "CoefficientStream",
    "PathSample",
    "sample_stream",
    "synth_path",
    "levy_area_series",
    "levy_area_packed",
    "carnot_endpoint",
    "endpoint_packed",
    "sde_oracle",
    "sde_oracle_batch",
    "truncation_index",
]


def alpha(k: int) -> float:
    """Series coefficient alpha_k = 1/(2 sqrt((2k+1)(2k+3))), decreasing in k."""
    if k < 0:
        raise ValueError("index must be nonnegative")
    return 1.0 / (2.0 * math.sqrt((2 * k + 1) * (2 * k + 3)))


def alpha_sq(k: int) -> float:
    """alpha_k^2 = 1/(4 (2k+1)(2k+3)); telescopes to sum_k alpha_k^2 = 1/8."""
    return 1.0 / (4.0 * (2 * k + 1) * (2 * k + 3))


def pair_alpha_sq(k: int) -> float:
    """alpha_k^2 + alpha_{k+1}^2 = 1/(2 (2k+1)(2k+5))."""
    return 1.0 / (2.0 * (2 * k + 1) * (2 * k + 5))


def _legendre_values(u: np.ndarray, kmax: int) -> np.ndarray:
    """Monic-free Legendre values L_0..L_kmax at u via the three-term recurrence."""
    u = np.asarray(u, dtype=float)
    out = np.empty((kmax + 1,) + u.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = u
    for k in range(1, kmax):
        out[k + 1] = ((2 * k + 1) * u * out[k] - k * out[k - 1]) / (k + 1)
    return out


def integral_Q_table(times: np.ndarray, T: float, kmax: int) -> np.ndarray:
    """Table of int_0^t Q_k(s) ds, shape (len(times), kmax+1).

    Uses the antiderivative recurrence int L_k = (L_{k+1} - L_{k-1})/(2k+1),
    which is stable at high degree (no expanded polynomial coefficients).
    The k >= 1 columns vanish identically at t = T.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if T <= 0:
        raise ValueError("horizon must be positive")
    if np.any(times < 0) or np.any(times > T):
        raise ValueError("times must lie in [0, T]")
    u = 2.0 * times / T - 1.0
    leg = _legendre_values(u, kmax + 1)
    table = np.empty((times.shape[0], kmax + 1))
    # (t/T) * sqrt(T) rather than t/sqrt(T): makes the t = T value exactly sqrt(T)
    table[:, 0] = (times / T) * math.sqrt(T)
    for k in range(1, kmax + 1):
        table[:, k] = math.sqrt(T / (4.0 * (2 * k + 1))) * (leg[k + 1] - leg[k - 1])
    return table


def integral_Q(k: int, t: float, T: float) -> float:
    """int_0^t Q_k(s) ds for a single index."""
    if k < 0:
        raise ValueError("index must be nonnegative")
    return float(integral_Q_table(np.array([t]), T, k)[0, k])


@dataclass(frozen=True)
class CoefficientStream:
    """Gaussian coefficients xi_0..xi_K driving one path on [0, T].

    xi has shape (K+1, n); row k is the R^n coefficient of int Q_k.
    """

    n: int
    T: float
    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim != 2 or xi.shape[1] != self.n:
            raise ValueError("coefficients must have shape (K+1, n)")
        if xi.shape[0] < 2:
            raise ValueError("need at least indices 0 and 1")
        object.__setattr__(self, "xi", xi)

    @property
    def k_path(self) -> int:
        return self.xi.shape[0] - 1


@dataclass(frozen=True)
class PathSample:
    """Brownian path values at increasing times in [0, T]; B_0 = 0."""

    times: np.ndarray
    values: np.ndarray  # shape (len(times), n)


def sample_stream(n: int, T: float, k_path: int, rng: np.random.Generator) -> CoefficientStream:
    """Fresh i.i.d. standard-normal coefficient stream with indices 0..k_path."""
    if k_path < 1:
        raise ValueError("truncation index must be >= 1")
    return CoefficientStream(n, T, rng.standard_normal((k_path + 1, n)))


def synth_path(stream: CoefficientStream, times) -> PathSample:
    """Evaluate the truncated Legendre synthesis at the given times."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    table = integral_Q_table(times, stream.T, stream.k_path)
    return PathSample(times, table @ stream.xi)


def levy_area_packed(xi: np.ndarray, T: float, iu: np.ndarray, ju: np.ndarray) -> np.ndarray:
    """Packed T * sum_{k < K} alpha_k (xi_k odot xi_{k+1}) for batched xi.

    xi has shape (..., K+1, n); returns shape (..., n(n-1)/2).
    """
    kmax = xi.shape[-2] - 1
    a = np.array([alpha(k) for k in range(kmax)])
    terms = odot_packed(xi[..., :-1, :], xi[..., 1:, :], iu, ju)
    return T * np.einsum("k,...kp->...p", a, terms)


def levy_area_series(stream: CoefficientStream) -> SkewMatrix:
    """Swept-area matrix at time T of the path driven by the stream."""
    iu, ju = triu_pairs(stream.n)
    return SkewMatrix(stream.n, levy_area_packed(stream.xi, stream.T, iu, ju))


def endpoint_packed(
    x: np.ndarray, z_packed: np.ndarray, xi: np.ndarray, T: float,
    iu: np.ndarray, ju: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint (X_T, z_T) in packed vertical coordinates, batched over xi.

    X_T = x + sqrt(T) xi_0,
    z_T = z + (sqrt(T)/2) (x odot xi_0) + area series.
    """
    sqrtT = math.sqrt(T)
    xT = x + sqrtT * xi[..., 0, :]
    zT = z_packed + 0.5 * sqrtT * odot_packed(x, xi[..., 0, :], iu, ju)
    zT = zT + levy_area_packed(xi, T, iu, ju)
    return xT, zT


def carnot_endpoint(g: CarnotElement, stream: CoefficientStream) -> CarnotElement:
    """Endpoint of the group Brownian motion started at g, driven by the stream."""
    if g.n != stream.n:
        raise ValueError("dimension mismatch")
    iu, ju = triu_pairs(g.n)
    xT, zT = endpoint_packed(g.x, g.z.upper, stream.xi, stream.T, iu, ju)
    return CarnotElement(xT, SkewMatrix(g.n, zT))


def sde_oracle_batch(
    g: CarnotElement, T: float, steps: int, count: int, rng: np.random.Generator,
    step_block: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama endpoints (X_T, z_T packed) for `count` independent paths.

    Left-point (Ito) quadrature of z_t = z + (1/2) int X odot dX; the swept-area
    variance carries an O(1/steps) discretization deficit.  Used only as an
    independent cross-check of the Legendre representation.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    n = g.n
    iu, ju = triu_pairs(n)
    dt = T / steps
    sq = math.sqrt(dt)
    x = np.tile(np.asarray(g.x, dtype=float), (count, 1))
    z = np.tile(np.asarray(g.z.upper, dtype=float), (count, 1))
    done = 0
    while done < steps:
        blk = min(step_block, steps - done)
        dB = rng.standard_normal((blk, count, n)) * sq
        for j in range(blk):
            z += 0.5 * odot_packed(x, dB[j], iu, ju)
            x += dB[j]
        done += blk
    return x, z


def sde_oracle(g: CarnotElement, T: float, steps: int, rng: np.random.Generator) -> CarnotElement:
    """Single Euler-Maruyama endpoint (see sde_oracle_batch)."""
    x, z = sde_oracle_batch(g, T, steps, 1, rng)
    return CarnotElement(x[0], SkewMatrix(g.n, z[0]))


def truncation_index(tol: float, T: float) -> int:
    """Smallest K >= 1 whose per-entry area tail std, relative to T, is <= tol.

    The telescoping tail control gives the closed form sqrt(1/(2(2K+1))) for
    the relative tail standard deviation, hence K = ceil((1/(2 tol^2) - 1)/2).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if T <= 0:
        raise ValueError("horizon must be positive")
    k = math.ceil((1.0 / (2.0 * tol * tol) - 1.0) / 2.0)
    return max(1, k)
