"""Built-in bounded test functions for the semigroup estimators.

Each entry is vectorized over endpoints given as (x, z_packed) arrays with
leading batch axis; `sup` is the exact sup norm and `min_value` the infimum
(log-based checks require a positive infimum).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["TestFunction", "CATALOG", "get_function"]


@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup: float
    min_value: float

    def __call__(self, x: np.ndarray, z_packed: np.ndarray) -> np.ndarray:
        return self.fn(x, z_packed)


def _constant(x, zp):
    return np.ones(x.shape[:-1])


def _coordinate_bump(x, zp):
    return np.exp(-x[..., 0] ** 2)


def _gaussian_bump(x, zp):
    # vertical norm is the Hilbert-Schmidt norm of the packed skew part
    return np.exp(-np.sum(x * x, axis=-1) - 2.0 * np.sum(zp * zp, axis=-1))


def _sin_perturbation(x, zp):
    return 2.0 + np.sin(x[..., 0])


CATALOG = {
    "constant": TestFunction("constant", _constant, 1.0, 1.0),
    "coordinate-bump": TestFunction("coordinate-bump", _coordinate_bump, 1.0, 0.0),
    "gaussian-bump": TestFunction("gaussian-bump", _gaussian_bump, 1.0, 0.0),
    "sin-perturbation": TestFunction("sin-perturbation", _sin_perturbation, 3.0, 1.0),
}


def get_function(name: str) -> TestFunction:
    try:
        return CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown catalog function {name!r}; choose from {sorted(CATALOG)}")
