"""Cartesian line-mask generation, mask application, hard data consistency.

A mask selects whole k-space lines: one boolean per column of the last
tensor axis, broadcast over all rows and coils. The center
ceil(width * center_fraction) columns form the fully sampled ACS band,
centered on width // 2 (ACS start = width // 2 - n_acs // 2).

Two families:

* random: every non-ACS column is kept independently with probability
  p = (width/R - width*cf) / (width - width*cf), clamped to [0, 1];
* equispaced: non-ACS columns at stride exactly R from a seed-derived
  offset in [0, R). The lattice runs through the ACS band too (those
  columns are sampled anyway).

Masks are pure functions of (width, acceleration, center_fraction, seed);
the RNG is splitmix64 (see :mod:`parallax.rng`), so any implementation of
those update equations regenerates identical masks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .rng import SplitMix64


@dataclass(frozen=True)
class SamplingMask:
    width: int
    sampled: np.ndarray  # bool, shape (width,)
    acs_range: tuple[int, int]  # half-open column interval, fully sampled
    acceleration: int
    center_fraction: float
    seed: int

    def __post_init__(self):
        sampled = np.asarray(self.sampled, dtype=bool)
        if sampled.shape != (self.width,):
            raise InputError(f"sampled must have shape ({self.width},), got {sampled.shape}")
        object.__setattr__(self, "sampled", sampled)
        lo, hi = self.acs_range
        if not bool(sampled[lo:hi].all()):
            raise InputError("every ACS column must be sampled")

    @property
    def n_acs(self) -> int:
        return self.acs_range[1] - self.acs_range[0]

    def acs_columns(self) -> np.ndarray:
        return np.arange(self.acs_range[0], self.acs_range[1])

    def sampled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.sampled)

    def to_json(self) -> str:
        """One-line provenance record; indices make the mask self-contained."""
        rec = {
            "width": self.width,
            "acceleration": self.acceleration,
            "center_fraction": self.center_fraction,
            "seed": self.seed,
            "sampled": [int(i) for i in self.sampled_indices()],
        }
        return json.dumps(rec, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SamplingMask":
        rec = json.loads(text)
        sampled = np.zeros(rec["width"], dtype=bool)
        sampled[rec["sampled"]] = True
        lo, hi = _acs_interval(rec["width"], rec["center_fraction"])
        return cls(
            width=rec["width"],
            sampled=sampled,
            acs_range=(lo, hi),
            acceleration=rec["acceleration"],
            center_fraction=rec["center_fraction"],
            seed=rec["seed"],
        )


def _acs_interval(width: int, center_fraction: float) -> tuple[int, int]:
    n_acs = math.ceil(width * center_fraction)
    start = width // 2 - n_acs // 2
    return start, start + n_acs


def _validate_args(width: int, acceleration: int, center_fraction: float, allow_zero_cf: bool) -> int:
    if width < 1:
        raise ConfigError(f"width must be positive, got {width}")
    if acceleration < 1:
        raise ConfigError(f"acceleration must be >= 1, got {acceleration}")
    lo_ok = center_fraction >= 0.0 if allow_zero_cf else center_fraction > 0.0
    if not (lo_ok and center_fraction < 1.0):
        raise ConfigError(f"center_fraction must lie in (0, 1), got {center_fraction}")
    n_acs = math.ceil(width * center_fraction)
    if width < n_acs:
        raise ConfigError("width smaller than the requested ACS band")
    return n_acs


def make_random_mask(width: int, acceleration: int, center_fraction: float, seed: int) -> SamplingMask:
    """Random-offset line mask: full ACS plus Bernoulli(p) non-ACS columns.

    p is chosen so the expected total sampled fraction is 1/acceleration.
    Raises ConfigError when the ACS band alone already exceeds the sampling
    budget (p would be negative).
    """
    _validate_args(width, acceleration, center_fraction, allow_zero_cf=False)
    lo, hi = _acs_interval(width, center_fraction)
    budget = width / acceleration - width * center_fraction
    remaining = width - width * center_fraction
    p = budget / remaining
    if p < 0.0:
        raise ConfigError(
            f"ACS band ({width}x{center_fraction}) exceeds the sampling budget width/R={width / acceleration:.2f}"
        )
    p = min(p, 1.0)
    rng = SplitMix64(seed)
    sampled = np.zeros(width, dtype=bool)
    for col in range(width):
        keep = rng.uniform() < p  # one draw per column, ACS included, keeps the stream aligned
        if lo <= col < hi:
            sampled[col] = True
        else:
            sampled[col] = keep
    return SamplingMask(width, sampled, (lo, hi), acceleration, center_fraction, seed)


def make_equispaced_mask(width: int, acceleration: int, center_fraction: float, seed: int) -> SamplingMask:
    """Equispaced line mask: full ACS plus a stride-R lattice at a random offset.

    center_fraction == 0 is permitted for this family only (pure lattice,
    used by stride-geometry tests).
    """
    _validate_args(width, acceleration, center_fraction, allow_zero_cf=True)
    lo, hi = _acs_interval(width, center_fraction)
    rng = SplitMix64(seed)
    offset = rng.below(acceleration)
    sampled = np.zeros(width, dtype=bool)
    sampled[offset::acceleration] = True
    sampled[lo:hi] = True
    return SamplingMask(width, sampled, (lo, hi), acceleration, center_fraction, seed)


def _check_width(k: np.ndarray, m: SamplingMask) -> None:
    if k.shape[-1] != m.width:
        raise InputError(f"k-space width {k.shape[-1]} does not match mask width {m.width}")


def apply_mask(k: np.ndarray, m: SamplingMask) -> np.ndarray:
    """Zero every unsampled column; sampled columns are copied unchanged.

    The same line mask applies to every coil (leading axes broadcast).
    """
    _check_width(k, m)
    return np.where(m.sampled, k, np.zeros((), dtype=k.dtype))


def data_consistency(k_pred: np.ndarray, k_obs: np.ndarray, m: SamplingMask) -> np.ndarray:
    """Hard data consistency: copy observed columns over predictions.

    Output equals k_obs at sampled columns (bitwise at matching precision)
    and k_pred elsewhere. Callers guarantee k_obs is zero outside the mask.
    """
    if k_pred.shape != k_obs.shape:
        raise InputError(f"shape mismatch: {k_pred.shape} vs {k_obs.shape}")
    _check_width(k_pred, m)
    return np.where(m.sampled, k_obs, k_pred)
