"""Strict elementwise arithmetic on complex tensors.

Thin wrappers over numpy that reject shape mismatches instead of
broadcasting; reconstruction code paths prefer a loud failure over a
silently broadcast coil axis.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b)
    return a + b


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b)
    return a - b


def scale(a: np.ndarray, s: complex) -> np.ndarray:
    return a * s


def conj(a: np.ndarray) -> np.ndarray:
    return np.conj(a)


def abs_(a: np.ndarray) -> np.ndarray:
    """Magnitude; always returns a real-valued tensor."""
    return np.abs(a)


def where(mask: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Select ``a`` where mask is true, else ``b``; mask must match shapes."""
    _check_same_shape(a, b)
    if mask.shape != a.shape:
        raise InputError(f"mask shape {mask.shape} does not match data shape {a.shape}")
    return np.where(mask, a, b)
