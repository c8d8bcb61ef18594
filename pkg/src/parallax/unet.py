"""U-Net over joint multi-coil channels, built from autograd primitives.

Architecture per level: two (3x3 conv -> instance norm -> leaky ReLU)
blocks; 2x average-pool on the way down with channel doubling; nearest
up-sampling and skip concatenation on the way up; a final 1x1 convolution
back to ``out_channels``. Inputs whose extents are not divisible by
2**depth are reflect-padded up and cropped back, so output spatial size
always equals input size.

Weights follow Kaiming-uniform fan-in initialization for the leaky-ReLU
slope; the final 1x1 convolution starts at zero so a freshly initialized
network is exactly the zero map (the reconstruction models add it
residually).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .errors import ConfigError
from .rng import mix64, uniform_array

INIT_SCHEME = "kaiming-uniform(leaky=0.2), zero final 1x1"


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int
    base_channels: int = 16
    depth: int = 2
    out_channels: int | None = None

    def __post_init__(self):
        if self.in_channels < 1 or self.base_channels < 1 or self.depth < 1:
            raise ConfigError(f"invalid U-Net config: {self}")
        if self.out_channels is None:
            object.__setattr__(self, "out_channels", self.in_channels)


def _conv_shapes(cfg: UNetConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, weight shape) pairs; each conv also owns a bias."""
    shapes: list[tuple[str, tuple[int, ...]]] = []
    c = cfg.base_channels
    ch_in = cfg.in_channels
    for level in range(cfg.depth):
        ch_out = c * 2**level
        shapes.append((f"enc{level}.conv1", (ch_out, ch_in, 3, 3)))
        shapes.append((f"enc{level}.conv2", (ch_out, ch_out, 3, 3)))
        ch_in = ch_out
    bottom = c * 2**cfg.depth
    shapes.append(("bottom.conv1", (bottom, ch_in, 3, 3)))
    shapes.append(("bottom.conv2", (bottom, bottom, 3, 3)))
    for level in reversed(range(cfg.depth)):
        skip = c * 2**level
        above = c * 2 ** (level + 1)
        shapes.append((f"dec{level}.conv1", (skip, above + skip, 3, 3)))
        shapes.append((f"dec{level}.conv2", (skip, skip, 3, 3)))
    shapes.append(("final", (cfg.out_channels, c, 1, 1)))
    return shapes


def unet_param_count(cfg: UNetConfig) -> int:
    return sum(int(np.prod(s)) + s[0] for _, s in _conv_shapes(cfg))


def init_unet_params(cfg: UNetConfig, seed: int, dtype=np.float32, prefix: str = "") -> dict[str, np.ndarray]:
    """Seeded parameter dict; deterministic given (cfg, seed)."""
    params: dict[str, np.ndarray] = {}
    gain = np.sqrt(2.0 / (1.0 + ag.LEAKY_SLOPE**2))
    for idx, (name, shape) in enumerate(_conv_shapes(cfg)):
        key = f"{prefix}{name}"
        if name == "final":
            params[f"{key}.w"] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = gain * np.sqrt(3.0 / fan_in)
            draws = uniform_array(mix64(seed, idx), int(np.prod(shape)))
            params[f"{key}.w"] = ((2.0 * draws - 1.0) * bound).reshape(shape).astype(dtype)
        params[f"{key}.b"] = np.zeros(shape[0], dtype=dtype)
    return params


def unet_forward(x: ag.Var, params: dict[str, ag.Var], cfg: UNetConfig, prefix: str = "") -> ag.Var:
    """Run the U-Net; ``params`` maps names to Var leaves (see make_param_vars)."""
    if x.value.shape[0] != cfg.in_channels:
        raise ConfigError(f"expected {cfg.in_channels} input channels, got {x.value.shape[0]}")
    _, h, w = x.value.shape
    unit = 2**cfg.depth
    h_pad = -(-h // unit) * unit
    w_pad = -(-w // unit) * unit
    if (h_pad, w_pad) != (h, w):
        x = ag.pad_reflect_to(x, h_pad, w_pad)

    def block(v, key):
        for conv in ("conv1", "conv2"):
            v = ag.conv2d(v, params[f"{prefix}{key}.{conv}.w"], params[f"{prefix}{key}.{conv}.b"])
            v = ag.instance_norm(v)
            v = ag.leaky_relu(v)
        return v

    skips = []
    for level in range(cfg.depth):
        x = block(x, f"enc{level}")
        skips.append(x)
        x = ag.avg_pool2(x)
    x = block(x, "bottom")
    for level in reversed(range(cfg.depth)):
        x = ag.upsample2(x)
        x = ag.concat_channels(x, skips[level])
        x = block(x, f"dec{level}")
    x = ag.conv2d(x, params[f"{prefix}final.w"], params[f"{prefix}final.b"])
    if (h_pad, w_pad) != (h, w):
        x = ag.crop_2d(x, h, w)
    return x


def make_param_vars(raw: dict[str, np.ndarray]) -> dict[str, ag.Var]:
    return {name: ag.Var(arr) for name, arr in raw.items()}
