"""Centered orthonormal 2D Fourier transforms over the trailing two axes.

Conventions, fixed once for the whole package:

* "centered" means the DC component sits at index (H//2, W//2); transforms
  are fftshift(FFT(ifftshift(x))) over the last two axes.
* normalization is orthonormal (1/sqrt(HW) in both directions), so Parseval
  holds: ||fft2c(x)||_2 == ||x||_2.
* odd extents are allowed; the DC bin is still at (H//2, W//2).

Arrays are plain numpy complex tensors (complex128 for verification paths,
complex64 for training). Leading axes (coils, slices) transform
independently.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


def _check_spatial(x: np.ndarray) -> None:
    if x.ndim < 2:
        raise InputError(f"need at least 2 axes for a 2D transform, got shape {x.shape}")


def fft2c(x: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2D DFT over the last two axes."""
    _check_spatial(x)
    shifted = np.fft.ifftshift(x, axes=(-2, -1))
    k = np.fft.fft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(k, axes=(-2, -1))


def ifft2c(k: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`fft2c` (same centering and normalization)."""
    _check_spatial(k)
    shifted = np.fft.ifftshift(k, axes=(-2, -1))
    x = np.fft.ifft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(x, axes=(-2, -1))
