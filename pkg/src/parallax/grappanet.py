"""GrappaNet: differentiable two-stage reconstruction with a GRAPPA layer.

The forward pass maps undersampled multi-coil k-space to an image:

1. normalize by the 0.999-quantile of the zero-filled image magnitude;
2. f1: k-space U-Net (residual) -> hard DC -> inverse FFT -> image U-Net
   (residual) -> FFT -> hard DC;
3. restrict to the union of the acquired lines and the stride-R' target
   lattice, re-impose observed data, and let the fixed GRAPPA kernel
   (calibrated from the ACS at stride R') fill every remaining line;
4. f2: same structure as f1;
5. inverse FFT, root-sum-of-squares, center crop (when the image is at
   least crop x crop), and undo the normalization.

The lattice offset is the stride phase with the most acquired lines, so a
mask that already is a stride-R' lattice keeps its own phase and the
zero-weight network reduces exactly to plain GRAPPA + RSS.

The kernel is a fixed input: gradients flow through its application, never
into its weights. An image-space-only ablation with the same interface
(one U-Net on the coil images, no GRAPPA layer, parameter count matched by
doubling the channel width) lives here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .errors import InputError
from .fourier import ifft2c
from .grappa import GrappaKernel, calibrate, default_kernel_rows, extract_acs
from .rng import mix64
from .sampling import SamplingMask
from .unet import UNetConfig, init_unet_params, make_param_vars, unet_forward, unet_param_count

UNET_PREFIXES = ("f1_kspace.", "f1_image.", "f2_kspace.", "f2_image.")


@dataclass(frozen=True)
class GrappaNetConfig:
    coils: int
    base_channels: int = 16
    depth: int = 2
    target_accel: int = 2  # the easier stride the GRAPPA layer completes
    kernel_rows: int | None = None
    kernel_cols: int = 5
    reg: float | None = None
    crop: int = 320
    l1_weight: float = 0.001

    @property
    def unet(self) -> UNetConfig:
        return UNetConfig(in_channels=2 * self.coils, base_channels=self.base_channels, depth=self.depth)

    @property
    def kh(self) -> int:
        return self.kernel_rows if self.kernel_rows is not None else default_kernel_rows(self.target_accel)


@dataclass(frozen=True)
class AblationConfig:
    """Image-space U-Net only; base channels doubled to match the parameter
    count of the four half-width GrappaNet U-Nets (params scale ~ width^2)."""

    coils: int
    base_channels: int = 32
    depth: int = 2
    crop: int = 320
    l1_weight: float = 0.001

    @property
    def unet(self) -> UNetConfig:
        return UNetConfig(in_channels=2 * self.coils, base_channels=self.base_channels, depth=self.depth)


def init_grappanet_params(cfg: GrappaNetConfig, seed: int, dtype=np.float32) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    for i, prefix in enumerate(UNET_PREFIXES):
        params.update(init_unet_params(cfg.unet, mix64(seed, i), dtype=dtype, prefix=prefix))
    return params


def init_ablation_params(cfg: AblationConfig, seed: int, dtype=np.float32) -> dict[str, np.ndarray]:
    return init_unet_params(cfg.unet, mix64(seed, 0xAB), dtype=dtype, prefix="image_only.")


def grappanet_param_count(cfg: GrappaNetConfig) -> int:
    return 4 * unet_param_count(cfg.unet)


def ablation_param_count(cfg: AblationConfig) -> int:
    return unet_param_count(cfg.unet)


def normalization_scale(k_under: np.ndarray) -> float:
    """0.999-quantile of the zero-filled image magnitude (1.0 if zero)."""
    mag = np.abs(ifft2c(k_under))
    q = float(np.quantile(mag.ravel(), 0.999))
    return q if q > 0 else 1.0


def choose_lattice_offset(m: SamplingMask, accel: int) -> int:
    """Stride phase with the most acquired lines (ties -> smallest)."""
    counts = [int(m.sampled[o::accel].sum()) for o in range(accel)]
    return int(np.argmax(counts))


def prepare_grappa_layer(k_under: np.ndarray, m: SamplingMask, cfg: GrappaNetConfig):
    """Calibrate the fixed kernel and build the lattice/union line sets."""
    accel = cfg.target_accel
    offset = choose_lattice_offset(m, accel)
    lattice = np.zeros(m.width, dtype=bool)
    lattice[offset::accel] = True
    union = m.sampled | lattice
    phase = (offset - m.acs_range[0]) % accel
    kernel = calibrate(extract_acs(k_under, m), accel, cfg.kh, cfg.kernel_cols, cfg.reg, phase=phase)
    return kernel, offset, lattice, union


@dataclass
class ForwardResult:
    image: ag.Var  # real image after crop and rescale
    params: dict[str, ag.Var]  # parameter leaves (read .grad after backward)
    k_input: ag.Var  # normalized paired-real input leaf
    k_final: ag.Var  # k-space after f2 (pre-RSS), normalized units
    scale: float
    kernel: GrappaKernel | None = None


def _f_block(v, k_obs, sampled, params, cfg: GrappaNetConfig, prefix: str):
    u = unet_forward(v, params, cfg.unet, prefix + "kspace.")
    v = ag.data_consistency_cols(ag.add(v, u), k_obs, sampled)
    img = ag.ifft2c_pairs(v)
    u = unet_forward(img, params, cfg.unet, prefix + "image.")
    k = ag.fft2c_pairs(ag.add(img, u))
    return ag.data_consistency_cols(k, k_obs, sampled)


def _finish_image(image: ag.Var, crop: int, scale: float) -> ag.Var:
    h, w = image.value.shape
    if h >= crop and w >= crop:
        image = ag.crop_center_image(image, crop, crop)
    return ag.scale(image, scale)


def grappanet_forward(
    k_under: np.ndarray,
    m: SamplingMask,
    raw_params: dict[str, np.ndarray],
    cfg: GrappaNetConfig,
    dtype=np.float32,
    kernel: GrappaKernel | None = None,
) -> ForwardResult:
    if k_under.ndim != 3 or k_under.shape[0] != cfg.coils:
        raise InputError(f"expected ({cfg.coils}, H, W) k-space, got {k_under.shape}")
    if k_under.shape[-1] != m.width:
        raise InputError(f"k-space width {k_under.shape[-1]} does not match mask width {m.width}")
    if kernel is None:
        kernel, offset, lattice, union = prepare_grappa_layer(k_under, m, cfg)
    else:
        if kernel.accel != cfg.target_accel:
            raise InputError(f"kernel stride {kernel.accel} does not match config {cfg.target_accel}")
        offset = choose_lattice_offset(m, cfg.target_accel)
        lattice = np.zeros(m.width, dtype=bool)
        lattice[offset :: cfg.target_accel] = True
        union = m.sampled | lattice

    scale = normalization_scale(k_under)
    k_norm = ag.complex_to_pairs(k_under / scale, dtype)
    params = make_param_vars(raw_params)

    k_input = ag.Var(k_norm)
    k_obs = k_norm  # the input is the observed zero-filled k-space
    v = _f_block(k_input, k_obs, m.sampled, params, cfg, "f1_")
    v = ag.project_cols(v, union)
    v = ag.data_consistency_cols(v, k_obs, m.sampled)
    v = ag.grappa_fill(v, kernel.weights, union, lattice)
    v = _f_block(v, k_obs, m.sampled, params, cfg, "f2_")
    image = ag.rss_pairs(ag.ifft2c_pairs(v))
    image = _finish_image(image, cfg.crop, scale)
    return ForwardResult(image=image, params=params, k_input=k_input, k_final=v, scale=scale, kernel=kernel)


def image_unet_forward(
    k_under: np.ndarray,
    m: SamplingMask,
    raw_params: dict[str, np.ndarray],
    cfg: AblationConfig,
    dtype=np.float32,
) -> ForwardResult:
    """Ablation: one residual U-Net on the coil images, then RSS."""
    if k_under.ndim != 3 or k_under.shape[0] != cfg.coils:
        raise InputError(f"expected ({cfg.coils}, H, W) k-space, got {k_under.shape}")
    scale = normalization_scale(k_under)
    k_norm = ag.complex_to_pairs(k_under / scale, dtype)
    params = make_param_vars(raw_params)
    k_input = ag.Var(k_norm)
    img = ag.ifft2c_pairs(k_input)
    u = unet_forward(img, params, cfg.unet, "image_only.")
    img = ag.add(img, u)
    image = ag.rss_pairs(img)
    image = _finish_image(image, cfg.crop, scale)
    k_final = ag.fft2c_pairs(img)
    return ForwardResult(image=image, params=params, k_input=k_input, k_final=k_final, scale=scale)


def grappa_rss_reference(k_under: np.ndarray, m: SamplingMask, cfg: GrappaNetConfig) -> np.ndarray:
    """Network-free closed form the zero-weight pipeline must reproduce:
    GRAPPA fill over the union lattice, inverse FFT, RSS, crop."""
    from .grappa import apply as grappa_apply
    from .recon import rss

    kernel, offset, lattice, union = prepare_grappa_layer(k_under, m, cfg)
    union_mask = SamplingMask(
        width=m.width,
        sampled=union,
        acs_range=m.acs_range,
        acceleration=cfg.target_accel,
        center_fraction=m.center_fraction,
        seed=m.seed,
    )
    filled = grappa_apply(k_under, union_mask, kernel, offset=offset)
    image = rss(ifft2c(filled))
    h, w = image.shape
    if h >= cfg.crop and w >= cfg.crop:
        top, left = (h - cfg.crop) // 2, (w - cfg.crop) // 2
        image = image[top : top + cfg.crop, left : left + cfg.crop]
    return image
