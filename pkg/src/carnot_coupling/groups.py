"""Exact algebra of the Heisenberg group and the free step-2 Carnot groups.

The Heisenberg group is R^3 with product
    (x1, x2, z) * (x1', x2', z') = (x1+x1', x2+x2', z+z' + (x1 x2' - x2 x1')/2).

The free step-2 Carnot group of rank n is R^n x so(n) with product
    (u, A) * (v, B) = (u+v, A + B + odot(u, v)/2),   odot(u, v) = u v^t - v u^t.

Skew-symmetric matrices are stored packed: the n(n-1)/2 strictly upper
triangular entries in row-major (i < j) order.  Antisymmetry is then true by
construction and the Hilbert-Schmidt norm is sqrt(2 * sum(entries^2)).

All operations here are pure and work unchanged on exact rational inputs
(`fractions.Fraction` scalars / object arrays), which the algebraic tests use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "HeisenbergPoint",
    "SkewMatrix",
    "CarnotElement",
    "heis_mul",
    "heis_inv",
    "carnot_mul",
    "carnot_inv",
    "odot",
    "so3_iso_check",
    "dilate",
    "zeta",
    "heis_zeta",
    "quasinorm_H",
    "heis_to_carnot",
    "carnot_to_heis",
    "triu_pairs",
    "pack_skew",
    "unpack_skew",
    "odot_packed",
]


def triu_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the strictly upper triangle, row-major (i < j)."""
    return np.triu_indices(n, k=1)


def pack_skew(mat: np.ndarray) -> np.ndarray:
    """Strictly upper triangular entries of a skew matrix, row-major order."""
    mat = np.asarray(mat)
    n = mat.shape[-1]
    iu, ju = triu_pairs(n)
    return mat[..., iu, ju]


def unpack_skew(n: int, packed: np.ndarray) -> np.ndarray:
    """Rebuild the full skew matrix M (M = -M^t exactly) from packed entries."""
    packed = np.asarray(packed)
    iu, ju = triu_pairs(n)
    out = np.zeros(packed.shape[:-1] + (n, n), dtype=packed.dtype)
    out[..., iu, ju] = packed
    out[..., ju, iu] = -packed
    return out


def odot_packed(u: np.ndarray, v: np.ndarray, iu: np.ndarray, ju: np.ndarray) -> np.ndarray:
    """Packed u odot v = u v^t - v u^t for batched vectors (leading axes shared)."""
    return u[..., iu] * v[..., ju] - u[..., ju] * v[..., iu]


@dataclass(frozen=True)
class HeisenbergPoint:
    """Point (x1, x2, z) of the Heisenberg group; z is the vertical coordinate."""

    x1: float
    x2: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x1, self.x2, self.z)


@dataclass(frozen=True)
class SkewMatrix:
    """Skew-symmetric n x n matrix stored by its strictly upper triangle."""

    n: int
    upper: np.ndarray  # shape (n(n-1)/2,), entry order (0,1), (0,2), ..., (n-2,n-1)

    def __post_init__(self):
        upper = np.asarray(self.upper)
        if upper.shape != (self.n * (self.n - 1) // 2,):
            raise ValueError(
                f"expected {self.n * (self.n - 1) // 2} packed entries, got shape {upper.shape}"
            )
        object.__setattr__(self, "upper", upper)

    @classmethod
    def zero(cls, n: int) -> "SkewMatrix":
        return cls(n, np.zeros(n * (n - 1) // 2))

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "SkewMatrix":
        mat = np.asarray(mat)
        return cls(mat.shape[0], pack_skew(mat))

    def to_matrix(self) -> np.ndarray:
        return unpack_skew(self.n, self.upper)

    def hs_norm(self) -> float:
        """Hilbert-Schmidt (Frobenius) norm: sqrt(2 * sum of packed entries^2)."""
        return math.sqrt(2.0 * float(np.sum(np.asarray(self.upper, dtype=float) ** 2)))

    def __add__(self, other: "SkewMatrix") -> "SkewMatrix":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return SkewMatrix(self.n, self.upper + other.upper)

    def __sub__(self, other: "SkewMatrix") -> "SkewMatrix":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return SkewMatrix(self.n, self.upper - other.upper)

    def scaled(self, c) -> "SkewMatrix":
        return SkewMatrix(self.n, self.upper * c)


@dataclass(frozen=True)
class CarnotElement:
    """Element (x, z) of the free step-2 Carnot group of rank n = len(x)."""

    x: np.ndarray
    z: SkewMatrix

    def __post_init__(self):
        x = np.asarray(self.x)
        object.__setattr__(self, "x", x)
        if self.z.n != x.shape[0]:
            raise ValueError("horizontal / vertical dimension mismatch")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @classmethod
    def identity(cls, n: int) -> "CarnotElement":
        return cls(np.zeros(n), SkewMatrix.zero(n))


def heis_mul(a: HeisenbergPoint, b: HeisenbergPoint) -> HeisenbergPoint:
    """Group product on the Heisenberg group."""
    cross = a.x1 * b.x2 - a.x2 * b.x1
    half = cross / 2
    return HeisenbergPoint(a.x1 + b.x1, a.x2 + b.x2, a.z + b.z + half)


def heis_inv(a: HeisenbergPoint) -> HeisenbergPoint:
    """Group inverse (-x1, -x2, -z); the cross term vanishes."""
    return HeisenbergPoint(-a.x1, -a.x2, -a.z)


def odot(u: Sequence[float], v: Sequence[float]) -> SkewMatrix:
    """The skew bracket u odot v = u v^t - v u^t (bilinear, odot(u, u) = 0)."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError("dimension mismatch")
    n = u.shape[0]
    iu, ju = triu_pairs(n)
    return SkewMatrix(n, odot_packed(u, v, iu, ju))


def carnot_mul(a: CarnotElement, b: CarnotElement) -> CarnotElement:
    """Group product (x, z) * (x', z') = (x + x', z + z' + odot(x, x')/2)."""
    if a.n != b.n:
        raise ValueError("dimension mismatch")
    # dividing by 2 is exact for floats and stays rational for Fraction inputs
    half_bracket = SkewMatrix(a.n, odot(a.x, b.x).upper / 2)
    return CarnotElement(a.x + b.x, a.z + b.z + half_bracket)


def carnot_inv(a: CarnotElement) -> CarnotElement:
    """Group inverse (-x, -z); exact because odot(x, x) = 0."""
    return CarnotElement(-a.x, a.z.scaled(-1))


def so3_iso_check(u: Sequence[float], v: Sequence[float], tol: float = 1e-12) -> bool:
    """Check psi(u ^ v) = -u odot v, the so(3) <-> (R^3, cross) isomorphism.

    psi maps (a, b, c) to the skew matrix [[0, -c, b], [c, 0, -a], [-b, a, 0]].
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (3,) or v.shape != (3,):
        raise ValueError("so3_iso_check requires 3-vectors")
    a, b, c = np.cross(u, v)
    psi = np.array([[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]])
    lhs = psi
    rhs = -odot(u, v).to_matrix()
    return bool(np.max(np.abs(lhs - rhs)) <= tol)


def dilate(lam: float, g):
    """Homogeneous dilation (x, z) -> (lam x, lam^2 z) for lam > 0."""
    if lam <= 0:
        raise ValueError("dilation parameter must be positive")
    if isinstance(g, HeisenbergPoint):
        return HeisenbergPoint(lam * g.x1, lam * g.x2, lam * lam * g.z)
    return CarnotElement(g.x * lam, g.z.scaled(lam * lam))


def zeta(g: CarnotElement, g_tilde: CarnotElement) -> SkewMatrix:
    """Vertical part of g^{-1} * g_tilde: z~ - z - odot(x, x~)/2."""
    if g.n != g_tilde.n:
        raise ValueError("dimension mismatch")
    half = SkewMatrix(g.n, odot(g.x, g_tilde.x).upper / 2)
    return g_tilde.z - g.z - half


def heis_zeta(g: HeisenbergPoint, g_tilde: HeisenbergPoint) -> float:
    """Scalar relative vertical displacement on the Heisenberg group."""
    return g_tilde.z - g.z - (g.x1 * g_tilde.x2 - g.x2 * g_tilde.x1) / 2


def quasinorm_H(a: HeisenbergPoint) -> float:
    """Homogeneous quasinorm sqrt(x1^2 + x2^2 + |z|); H(dil_lam a) = lam H(a)."""
    return math.sqrt(a.x1 ** 2 + a.x2 ** 2 + abs(a.z))


def heis_to_carnot(a: HeisenbergPoint) -> CarnotElement:
    """Embed (x1, x2, z) as the rank-2 Carnot element with upper entry z."""
    return CarnotElement(np.array([a.x1, a.x2]), SkewMatrix(2, np.array([a.z])))


def carnot_to_heis(g: CarnotElement) -> HeisenbergPoint:
    """Inverse of the rank-2 embedding."""
    if g.n != 2:
        raise ValueError("only rank-2 elements embed into the Heisenberg group")
    return HeisenbergPoint(g.x[0], g.x[1], g.z.upper[0])
