"""NMSE, PSNR and SSIM for reconstruction evaluation.

SSIM uses uniform (box) windows, population statistics, and only fully
valid window positions; the windowed statistics live in
:func:`ssim_stats` so the training loss (which needs gradients) and the
reported metric share one forward computation.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(x_hat: np.ndarray, x: np.ndarray) -> None:
    if x_hat.shape != x.shape:
        raise InputError(f"shape mismatch: {x_hat.shape} vs {x.shape}")


def nmse(x_hat: np.ndarray, x: np.ndarray) -> float:
    """||x_hat - x||^2 / ||x||^2."""
    _check_pair(x_hat, x)
    den = float(np.sum(np.abs(x) ** 2))
    if den == 0.0:
        raise InputError("reference image is identically zero")
    return float(np.sum(np.abs(x_hat - x) ** 2) / den)


def psnr(x_hat: np.ndarray, x: np.ndarray, data_range: float | None = None) -> float:
    """10 log10(data_range^2 / MSE); +inf on identical inputs (with a warning)."""
    _check_pair(x_hat, x)
    if data_range is None:
        data_range = float(np.max(x))
    if data_range <= 0:
        raise InputError(f"data_range must be positive, got {data_range}")
    mse = float(np.mean((x_hat - x) ** 2))
    if mse == 0.0:
        warnings.warn("psnr of identical images is infinite; excluded from aggregates")
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def box_mean_valid(img: np.ndarray, window: int) -> np.ndarray:
    """Mean over every fully-contained window x window patch (valid mode)."""
    h, w = img.shape
    integral = np.zeros((h + 1, w + 1), dtype=img.dtype)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=integral[1:, 1:])
    s = (
        integral[window:, window:]
        - integral[:-window, window:]
        - integral[window:, :-window]
        + integral[:-window, :-window]
    )
    return s / (window * window)


def ssim_stats(
    x_hat: np.ndarray,
    x: np.ndarray,
    data_range: float,
    window: int = SSIM_WINDOW,
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
):
    """Windowed statistics and the per-window SSIM map.

    Returns (ssim_map, stats) where stats holds the intermediates needed by
    the analytic gradient: mu1, mu2, var1, var2, cov, and the c constants.
    Identical inputs give a map that is exactly 1.0 (the numerator and
    denominator are assembled from bitwise-identical subexpressions).
    """
    _check_pair(x_hat, x)
    if min(x.shape) < window:
        raise InputError(f"image {x.shape} smaller than the {window}x{window} SSIM window")
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu1 = box_mean_valid(x_hat, window)
    mu2 = box_mean_valid(x, window)
    e11 = box_mean_valid(x_hat * x_hat, window)
    e22 = box_mean_valid(x * x, window)
    e12 = box_mean_valid(x_hat * x, window)
    var1 = e11 - mu1 * mu1
    var2 = e22 - mu2 * mu2
    cov = e12 - mu1 * mu2
    num = (2.0 * (mu1 * mu2) + c1) * (2.0 * cov + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    ssim_map = num / den
    stats = {
        "mu1": mu1,
        "mu2": mu2,
        "var1": var1,
        "var2": var2,
        "cov": cov,
        "c1": c1,
        "c2": c2,
        "a1": 2.0 * (mu1 * mu2) + c1,
        "a2": 2.0 * cov + c2,
        "b1": mu1 * mu1 + mu2 * mu2 + c1,
        "b2": var1 + var2 + c2,
    }
    return ssim_map, stats


def ssim(
    x_hat: np.ndarray,
    x: np.ndarray,
    data_range: float | None = None,
    window: int = SSIM_WINDOW,
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
) -> float:
    """Mean SSIM over all valid uniform-window positions."""
    if data_range is None:
        data_range = float(np.max(x))
    ssim_map, _ = ssim_stats(
        np.asarray(x_hat, dtype=np.float64), np.asarray(x, dtype=np.float64), data_range, window, k1, k2
    )
    return float(np.mean(ssim_map))


@dataclass
class MetricReport:
    """Per-slice metrics plus volume aggregates (mean of per-slice values).

    Infinite PSNR slices (identical images) are excluded from the PSNR
    aggregate; nmse >= 0 and ssim in [-1, 1] always hold.
    """

    nmse: list[float] = field(default_factory=list)
    psnr: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)

    def add_slice(self, x_hat: np.ndarray, x: np.ndarray, data_range: float) -> None:
        self.nmse.append(nmse(x_hat, x))
        self.psnr.append(psnr(x_hat, x, data_range))
        self.ssim.append(ssim(x_hat, x, data_range))

    @property
    def aggregate(self) -> dict[str, float]:
        finite_psnr = [p for p in self.psnr if math.isfinite(p)]
        return {
            "nmse": float(np.mean(self.nmse)),
            "psnr": float(np.mean(finite_psnr)) if finite_psnr else math.inf,
            "ssim": float(np.mean(self.ssim)),
        }

    def write_json(self, path: str | Path) -> None:
        rec = {
            "aggregate": self.aggregate,
            "slices": [
                {"slice": i, "nmse": n, "psnr": p, "ssim": s}
                for i, (n, p, s) in enumerate(zip(self.nmse, self.psnr, self.ssim))
            ],
        }
        Path(path).write_text(json.dumps(rec, indent=2) + "\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slice", "nmse", "psnr", "ssim"])
            for i, (n, p, s) in enumerate(zip(self.nmse, self.psnr, self.ssim)):
                writer.writerow([i, repr(n), repr(p), repr(s)])
            agg = self.aggregate
            writer.writerow(["mean", repr(agg["nmse"]), repr(agg["psnr"]), repr(agg["ssim"])])


def evaluate_volume(pred: np.ndarray, target: np.ndarray) -> MetricReport:
    """Metrics for a (slices, H, W) or single (H, W) pair; data_range is the
    maximum of the ground-truth volume, shared across slices."""
    if pred.shape != target.shape:
        raise InputError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.ndim == 2:
        pred = pred[None]
        target = target[None]
    data_range = float(np.max(target))
    report = MetricReport()
    for sl in range(pred.shape[0]):
        report.add_slice(pred[sl], target[sl], data_range)
    return report
