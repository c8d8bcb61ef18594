"""Synthetic multi-coil ground truth: ellipse phantoms, smooth coil
sensitivities, and the forward acquisition model.

The object is a seeded superposition of ellipses (piecewise-constant
magnitude) under a gentle linear phase ramp. Sensitivities are broad
Gaussian lobes centered at equiangular positions around the field of view
with a small per-coil linear phase, normalized so their root-sum-of-squares
is exactly 1 everywhere; that smoothness is what lets GRAPPA at stride 2
reconstruct these phantoms essentially exactly, which the whole test
pyramid leans on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InputError
from .fileio import validate_manifest, write_cfl
from .fourier import fft2c
from .recon import SensitivityMaps, rss, zero_filled_recon
from .rng import SplitMix64, gauss_array, mix64
from .sampling import SamplingMask, apply_mask


@dataclass(frozen=True)
class PhantomSpec:
    h: int = 128
    w: int = 160
    n_coils: int = 15
    n_ellipses: int = 6
    seed: int = 0
    noise_std: float = 0.0
    contrast: str = "pd"  # pd: broad intensity range; pdfs: dimmer, lower SNR

    def __post_init__(self):
        if self.n_coils < 1:
            raise InputError(f"need at least one coil, got {self.n_coils}")
        if self.h < 32 or self.w < 32:
            raise InputError(f"phantom extent must be >= 32, got {self.h}x{self.w}")
        if self.contrast not in ("pd", "pdfs"):
            raise InputError(f"contrast must be 'pd' or 'pdfs', got {self.contrast!r}")


def _ellipse_mask(h, w, cy, cx, ry, rx, angle):
    y, x = np.mgrid[0:h, 0:w]
    yc = (y - cy) / ry
    xc = (x - cx) / rx
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    u = cos_a * xc + sin_a * yc
    v = -sin_a * xc + cos_a * yc
    return (u * u + v * v) <= 1.0


def make_phantom(spec: PhantomSpec) -> tuple[np.ndarray, SensitivityMaps]:
    """Seeded (complex image, ground-truth sensitivity maps) pair."""
    rng = SplitMix64(mix64(spec.seed, 0x0B1EC7))
    h, w = spec.h, spec.w
    lo_mag, hi_mag = (0.4, 1.0) if spec.contrast == "pd" else (0.15, 0.5)

    mag = np.zeros((h, w))
    # one large body ellipse, then interior structure
    body = _ellipse_mask(
        h, w,
        cy=h * (0.5 + 0.04 * (rng.uniform() - 0.5)),
        cx=w * (0.5 + 0.04 * (rng.uniform() - 0.5)),
        ry=h * (0.32 + 0.08 * rng.uniform()),
        rx=w * (0.32 + 0.08 * rng.uniform()),
        angle=2 * np.pi * rng.uniform(),
    )
    mag += (lo_mag + (hi_mag - lo_mag) * rng.uniform()) * body
    for _ in range(max(0, spec.n_ellipses - 1)):
        sub = _ellipse_mask(
            h, w,
            cy=h * (0.3 + 0.4 * rng.uniform()),
            cx=w * (0.3 + 0.4 * rng.uniform()),
            ry=h * (0.04 + 0.12 * rng.uniform()),
            rx=w * (0.04 + 0.12 * rng.uniform()),
            angle=2 * np.pi * rng.uniform(),
        )
        delta = (hi_mag - lo_mag) * (rng.uniform() - 0.35)
        mag = np.maximum(mag + delta * (sub & body), 0.0)

    y, x = np.mgrid[0:h, 0:w]
    fr = 0.03 * (2 * rng.uniform() - 1)
    fc = 0.03 * (2 * rng.uniform() - 1)
    phase = 2 * np.pi * (fr * (y - h / 2) / h + fc * (x - w / 2) / w)
    image = mag * np.exp(1j * phase)

    maps = _make_sensitivities(spec, rng)
    return image, maps


def _make_sensitivities(spec: PhantomSpec, rng: SplitMix64) -> SensitivityMaps:
    h, w, n = spec.h, spec.w, spec.n_coils
    support = np.ones((h, w), dtype=bool)
    if n == 1:
        return SensitivityMaps(maps=np.ones((1, h, w), dtype=complex), support=support)
    y, x = np.mgrid[0:h, 0:w]
    sigma = 0.7 * min(h, w)
    start = 2 * np.pi * rng.uniform()
    maps = np.empty((n, h, w), dtype=complex)
    for i in range(n):
        angle = start + 2 * np.pi * i / n
        cy = h / 2 + 0.55 * h * np.sin(angle)
        cx = w / 2 + 0.55 * w * np.cos(angle)
        dist2 = (y - cy) ** 2 + (x - cx) ** 2
        lobe = np.exp(-dist2 / (2 * sigma**2))
        p = 0.5 * (2 * rng.uniform() - 1)
        q = 0.5 * (2 * rng.uniform() - 1)
        coil_phase = 2 * np.pi * (p * (y - h / 2) / h + q * (x - w / 2) / w)
        maps[i] = lobe * np.exp(1j * coil_phase)
    maps /= rss(maps)
    return SensitivityMaps(maps=maps, support=support)


def simulate_acquisition(
    x: np.ndarray,
    maps: SensitivityMaps,
    m: SamplingMask,
    noise_std: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Per-coil k_i = mask(fft2c(S_i * x) + eps_i), eps complex Gaussian with
    per-component std ``noise_std``."""
    if x.shape != maps.maps.shape[1:]:
        raise InputError(f"image shape {x.shape} does not match maps {maps.maps.shape}")
    k = fft2c(maps.maps * x)
    if noise_std > 0:
        n = k.size
        draws = gauss_array(mix64(seed, 0x4015E), 2 * n)
        noise = noise_std * (draws[:n] + 1j * draws[n:]).reshape(k.shape)
        k = k + noise
    return apply_mask(k, m)


def fully_sampled_mask(width: int) -> SamplingMask:
    lo = width // 2 - 1
    return SamplingMask(width, np.ones(width, dtype=bool), (lo, lo + 2), 1, 2.0 / width, 0)


def make_dataset(
    n_volumes: int,
    slices_per_volume: int,
    spec_template: PhantomSpec,
    seed: int,
    out_dir: str | Path,
) -> dict:
    """Generate a CFL dataset plus manifest: per-slice fully sampled k-space,
    the RSS ground-truth image, and the true maps, split 70/15/15 by sample
    index. Per-sample seeds derive deterministically from ``seed``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    total = n_volumes * slices_per_volume
    n_train = int(np.floor(0.7 * total))
    n_val = int(np.floor(0.15 * total))
    samples = []
    idx = 0
    for v in range(n_volumes):
        for s in range(slices_per_volume):
            sample_seed = mix64(seed, v, s)
            spec = replace(spec_template, seed=sample_seed)
            image, maps = make_phantom(spec)
            mask = fully_sampled_mask(spec.w)
            k_full = simulate_acquisition(image, maps, mask, spec.noise_std, seed=sample_seed)
            target = zero_filled_recon(k_full.astype(np.complex64))
            sample_id = f"v{v:03d}s{s:02d}"
            write_cfl(out / f"{sample_id}_kspace", k_full)
            write_cfl(out / f"{sample_id}_image", target)
            write_cfl(out / f"{sample_id}_maps", maps.maps)
            split = "train" if idx < n_train else ("val" if idx < n_train + n_val else "test")
            samples.append(
                {
                    "id": sample_id,
                    "kspace_path": f"{sample_id}_kspace.cfl",
                    "image_path": f"{sample_id}_image.cfl",
                    "maps_path": f"{sample_id}_maps.cfl",
                    "seed": sample_seed,
                    "contrast": spec.contrast,
                    "split": split,
                    "volume": f"v{v:03d}",
                }
            )
            idx += 1
    manifest = {"seed": seed, "samples": samples}
    validate_manifest(manifest)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
