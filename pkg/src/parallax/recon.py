"""Non-learned reconstruction baselines.

* root-sum-of-squares coil combination and the zero-filled baseline;
* sensitivity-map estimation from apodized ACS-only k-space;
* TV-regularized compressed sensing by gradient descent with backtracking.

The TV functional is the isotropic total variation with Huber smoothing at
scale eps: rho(t) = t^2 / (2 eps) for t <= eps, t - eps/2 above, applied to
t = sqrt(|dx|^2 + |dy|^2) of forward differences. rho(0) = 0, so constant
images have exactly zero TV.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, NumericalError
from .fourier import fft2c, ifft2c
from .sampling import SamplingMask, apply_mask

TV_EPS = 1e-6


def rss(coil_images: np.ndarray) -> np.ndarray:
    """Pixelwise sqrt of the sum of squared magnitudes over the coil axis."""
    if coil_images.ndim != 3:
        raise InputError(f"expected (coils, H, W), got shape {coil_images.shape}")
    return np.sqrt(np.sum(np.abs(coil_images) ** 2, axis=0))


def zero_filled_recon(k_under: np.ndarray) -> np.ndarray:
    """RSS of the naive inverse transform; the aliased reference baseline."""
    return rss(ifft2c(k_under))


@dataclass(frozen=True)
class SensitivityMaps:
    maps: np.ndarray  # (coils, H, W) complex
    support: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.maps.ndim != 3:
            raise InputError(f"maps must be (coils, H, W), got {self.maps.shape}")
        if self.support.shape != self.maps.shape[1:]:
            raise InputError("support shape must match the spatial extents of maps")

    @property
    def n_coils(self) -> int:
        return self.maps.shape[0]


def estimate_sensitivities(k_under: np.ndarray, m: SamplingMask, threshold: float = 0.05) -> SensitivityMaps:
    """Low-resolution ACS-based sensitivity estimate.

    Keeps only the ACS lines, apodized with a raised-cosine window across the
    band, transforms to image space, and divides each coil image by their
    RSS. Support is the region where that RSS exceeds threshold * max; maps
    are zeroed outside it.
    """
    if k_under.ndim != 3:
        raise InputError(f"expected (coils, H, W), got shape {k_under.shape}")
    if k_under.shape[-1] != m.width:
        raise InputError(f"k-space width {k_under.shape[-1]} does not match mask width {m.width}")
    lo, hi = m.acs_range
    if hi <= lo:
        raise ConfigError("mask has an empty ACS region; cannot estimate sensitivities")
    n_acs = hi - lo
    taper = np.hanning(n_acs + 2)[1:-1]
    k_low = np.zeros_like(k_under)
    k_low[..., lo:hi] = k_under[..., lo:hi] * taper
    low_res = ifft2c(k_low)
    magnitude = rss(low_res)
    peak = float(magnitude.max())
    if peak == 0.0:
        raise ConfigError("ACS region carries no signal")
    support = magnitude > threshold * peak
    with np.errstate(divide="ignore", invalid="ignore"):
        maps = np.where(support & (magnitude > 0), low_res / magnitude, 0.0)
    return SensitivityMaps(maps=maps, support=support)


def _fwd_diff(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dh = np.zeros_like(x)
    dv = np.zeros_like(x)
    dh[:, :-1] = x[:, 1:] - x[:, :-1]
    dv[:-1, :] = x[1:, :] - x[:-1, :]
    return dh, dv


def _fwd_diff_adjoint(yh: np.ndarray, yv: np.ndarray) -> np.ndarray:
    out = np.zeros_like(yh)
    out[:, :-1] -= yh[:, :-1]
    out[:, 1:] += yh[:, :-1]
    out[:-1, :] -= yv[:-1, :]
    out[1:, :] += yv[:-1, :]
    return out


def tv_value(x: np.ndarray, eps: float = TV_EPS) -> float:
    """Huber-smoothed isotropic total variation."""
    dh, dv = _fwd_diff(x)
    t = np.sqrt(np.abs(dh) ** 2 + np.abs(dv) ** 2)
    quad = t <= eps
    vals = np.where(quad, t**2 / (2 * eps), t - eps / 2)
    return float(np.sum(vals))


def tv_grad(x: np.ndarray, eps: float = TV_EPS) -> np.ndarray:
    """Gradient (Wirtinger, w.r.t. conj(x)) of :func:`tv_value`."""
    dh, dv = _fwd_diff(x)
    t = np.sqrt(np.abs(dh) ** 2 + np.abs(dv) ** 2)
    weight = np.where(t <= eps, 1.0 / eps, 1.0 / np.maximum(t, eps * 1e-30))
    return _fwd_diff_adjoint(weight * dh, weight * dv)


def default_tv_weight(k_under: np.ndarray) -> float:
    h, w = k_under.shape[-2:]
    return 1e-3 * float(np.linalg.norm(k_under)) / float(np.sqrt(h * w))


def _objective(x, k_under, m, maps):
    pred = apply_mask(fft2c(maps.maps * x), m)
    resid = pred - k_under
    return 0.5 * float(np.sum(np.abs(resid) ** 2)), resid


def cs_tv_reconstruct(
    k_under: np.ndarray,
    m: SamplingMask,
    maps: SensitivityMaps,
    tv_weight: float | None = None,
    iters: int = 200,
    step: float = 1.0,
):
    """Approximate minimizer of the TV-regularized least-squares objective.

    Plain gradient descent; each iteration backtracks (up to 30 halvings)
    until the objective does not increase, which makes the returned trace
    nonincreasing by construction. Raises NumericalError if backtracking
    fails. Returns (x, trace) with trace rows (iteration, data, tv, total).
    """
    if iters < 1:
        raise InputError(f"iters must be >= 1, got {iters}")
    if tv_weight is None:
        tv_weight = default_tv_weight(k_under)
    if tv_weight < 0:
        raise InputError(f"tv_weight must be >= 0, got {tv_weight}")
    if k_under.shape[0] != maps.n_coils:
        raise InputError("coil count of k-space and maps disagree")

    conj_maps = np.conj(maps.maps)
    with np.errstate(all="ignore"):
        x = np.sum(conj_maps * ifft2c(k_under), axis=0)
        data_term, resid = _objective(x, k_under, m, maps)
        tv_term = tv_weight * tv_value(x)
        total = data_term + tv_term
    trace = [(0, data_term, tv_term, total)]

    current_step = step
    for it in range(1, iters + 1):
        # non-finite intermediates surface as a rejected trial step below
        with np.errstate(all="ignore"):
            grad = np.sum(conj_maps * ifft2c(resid), axis=0) + tv_weight * tv_grad(x)
        accepted = False
        trial_step = current_step
        for _ in range(31):
            with np.errstate(all="ignore"):
                x_new = x - trial_step * grad
                data_new, resid_new = _objective(x_new, k_under, m, maps)
                tv_new = tv_weight * tv_value(x_new)
                total_new = data_new + tv_new
            if total_new <= total:
                accepted = True
                break
            trial_step *= 0.5
        if not accepted:
            raise NumericalError(
                f"objective increased after 30 step halvings at iteration {it} (total={total:.6g})"
            )
        x, resid = x_new, resid_new
        data_term, tv_term, total = data_new, tv_new, total_new
        trace.append((it, data_term, tv_term, total))
        current_step = trial_step * 2.0
    return x, trace
