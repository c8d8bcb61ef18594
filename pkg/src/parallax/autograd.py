"""Minimal reverse-mode automatic differentiation on numpy arrays.

A ``Var`` wraps a real-valued array; operations record closures that push
the output adjoint back to the inputs. ``backward`` walks the recorded
graph once, in reverse topological order. Complex k-space flows through the
tape as paired real channels (channel 2i is the real part of coil i,
channel 2i+1 the imaginary part); the Fourier nodes convert to complex
internally, and because the centered orthonormal DFT is unitary, the
adjoint of fft2c on the paired-real view is ifft2c on the paired-real view.

Everything differentiable in the reconstruction pipeline is a primitive
here, including hard data consistency (adjoint: zero at observed columns),
the GRAPPA fill (a fixed complex convolution; adjoint convolves with the
conjugate-flipped kernel) and the SSIM score (closed-form adjoint through
the windowed moments, sharing its forward statistics with the metrics
module).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError
from .fourier import fft2c, ifft2c
from . import metrics as _metrics

LEAKY_SLOPE = 0.2
INSTANCE_NORM_EPS = 1e-5


class Var:
    """Node in the computation record."""

    __slots__ = ("value", "grad", "parents", "push")

    def __init__(self, value, parents=(), push=None):
        self.value = np.asarray(value)
        self.grad = None
        self.parents = parents
        self.push = push  # fn(adjoint) -> None; accumulates into parents

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, adjoint):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += adjoint


def backward(root: Var) -> int:
    """Reverse pass from a scalar root; returns the node count visited.

    Nodes are visited exactly once, in reverse topological order.
    """
    if root.value.ndim != 0:
        raise InputError(f"backward needs a scalar root, got shape {root.value.shape}")
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.push is not None and node.grad is not None:
            node.push(node.grad)
    return len(order)


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Var, b: Var) -> Var:
    if a.value.shape != b.value.shape:
        raise InputError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Var(a.value + b.value, (a, b))
    out.push = lambda g: (a.accumulate(g), b.accumulate(g))
    return out


def mul(a: Var, b: Var) -> Var:
    if a.value.shape != b.value.shape:
        raise InputError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Var(a.value * b.value, (a, b))
    out.push = lambda g: (a.accumulate(g * b.value), b.accumulate(g * a.value))
    return out


def scale(a: Var, s: float) -> Var:
    out = Var(a.value * s, (a,))
    out.push = lambda g: a.accumulate(g * s)
    return out


def add_const(a: Var, c) -> Var:
    out = Var(a.value + c, (a,))
    out.push = lambda g: a.accumulate(g)
    return out


def abs_(a: Var) -> Var:
    sign = np.sign(a.value)
    out = Var(np.abs(a.value), (a,))
    out.push = lambda g: a.accumulate(g * sign)
    return out


def mean_all(a: Var) -> Var:
    n = a.value.size
    out = Var(np.asarray(a.value.mean()), (a,))
    out.push = lambda g: a.accumulate(np.full_like(a.value, float(g) / n))
    return out


def leaky_relu(a: Var, slope: float = LEAKY_SLOPE) -> Var:
    pos = a.value > 0
    out = Var(np.where(pos, a.value, slope * a.value), (a,))
    out.push = lambda g: a.accumulate(np.where(pos, g, slope * g))
    return out


# ---------------------------------------------------------------------------
# convolution and friends


def conv2d(x: Var, w: Var, b: Var) -> Var:
    """Same-padded 2D convolution: (C,H,W) x (O,C,kh,kw) -> (O,H,W)."""
    cin, h, wd = x.value.shape
    cout, cin_w, kh, kw = w.value.shape
    if cin != cin_w:
        raise InputError(f"conv2d channel mismatch: input {cin}, weights {cin_w}")
    if b.value.shape != (cout,):
        raise InputError(f"conv2d bias must have shape ({cout},), got {b.value.shape}")
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x.value, ((0, 0), (ph, ph), (pw, pw)))
    cols = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (C,H,W,kh,kw)
    cols = np.ascontiguousarray(cols.transpose(1, 2, 0, 3, 4)).reshape(h * wd, cin * kh * kw)
    wmat = w.value.reshape(cout, -1)
    y = (cols @ wmat.T + b.value).T.reshape(cout, h, wd)
    out = Var(y.astype(x.value.dtype, copy=False), (x, w, b))

    def push(g):
        gmat = g.reshape(cout, h * wd).T  # (HW, O)
        b.accumulate(g.sum(axis=(1, 2)))
        w.accumulate((gmat.T @ cols).reshape(w.value.shape))
        gcols = (gmat @ wmat).reshape(h, wd, cin, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i : i + h, j : j + wd] += gcols[:, :, :, i, j].transpose(2, 0, 1)
        x.accumulate(gxp[:, ph : ph + h, pw : pw + wd])

    out.push = push
    return out


def instance_norm(x: Var, eps: float = INSTANCE_NORM_EPS) -> Var:
    """Per-channel normalization over the spatial axes (no affine params)."""
    v = x.value
    mu = v.mean(axis=(1, 2), keepdims=True)
    var = v.var(axis=(1, 2), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (v - mu) * inv
    out = Var(y.astype(v.dtype, copy=False), (x,))

    def push(g):
        g_mean = g.mean(axis=(1, 2), keepdims=True)
        gy_mean = (g * y).mean(axis=(1, 2), keepdims=True)
        x.accumulate(inv * (g - g_mean - y * gy_mean))

    out.push = push
    return out


def avg_pool2(x: Var) -> Var:
    c, h, w = x.value.shape
    if h % 2 or w % 2:
        raise InputError(f"avg_pool2 needs even extents, got {x.value.shape}")
    y = x.value.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))
    out = Var(y, (x,))

    def push(g):
        x.accumulate(np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) * 0.25)

    out.push = push
    return out


def upsample2(x: Var) -> Var:
    """Nearest-neighbor 2x; adjoint sums each 2x2 block."""
    y = np.repeat(np.repeat(x.value, 2, axis=1), 2, axis=2)
    out = Var(y, (x,))

    def push(g):
        c, h, w = g.shape
        x.accumulate(g.reshape(c, h // 2, 2, w // 2, 2).sum(axis=(2, 4)))

    out.push = push
    return out


def concat_channels(a: Var, b: Var) -> Var:
    na = a.value.shape[0]
    out = Var(np.concatenate([a.value, b.value], axis=0), (a, b))
    out.push = lambda g: (a.accumulate(g[:na]), b.accumulate(g[na:]))
    return out


def _reflect_indices(n: int, pad: int) -> np.ndarray:
    if pad == 0:
        return np.arange(n)
    if n == 1:
        return np.zeros(n + pad, dtype=int)
    if pad > n - 1:
        raise InputError(f"reflect padding {pad} too large for extent {n}")
    return np.concatenate([np.arange(n), n - 2 - np.arange(pad)])


def pad_reflect_to(x: Var, h_target: int, w_target: int) -> Var:
    """Reflect-pad the bottom/right edges up to the target extents."""
    _, h, w = x.value.shape
    rows = _reflect_indices(h, h_target - h)
    cols = _reflect_indices(w, w_target - w)
    out = Var(x.value[:, rows][:, :, cols], (x,))

    def push(g):
        gx = np.zeros_like(x.value)
        # scatter-add through the same gather indices
        tmp = np.zeros((x.value.shape[0], h, len(cols)), dtype=g.dtype)
        np.add.at(tmp, (slice(None), rows), g)
        np.add.at(gx, (slice(None), slice(None), cols), tmp)
        x.accumulate(gx)

    out.push = push
    return out


def crop_2d(x: Var, h: int, w: int, top: int = 0, left: int = 0) -> Var:
    out = Var(x.value[:, top : top + h, left : left + w], (x,))

    def push(g):
        gx = np.zeros_like(x.value)
        gx[:, top : top + h, left : left + w] = g
        x.accumulate(gx)

    out.push = push
    return out


def crop_center_image(x: Var, h: int, w: int) -> Var:
    """Center crop of a 2D image Var."""
    hh, ww = x.value.shape
    top, left = (hh - h) // 2, (ww - w) // 2
    out = Var(x.value[top : top + h, left : left + w], (x,))

    def push(g):
        gx = np.zeros_like(x.value)
        gx[top : top + h, left : left + w] = g
        x.accumulate(gx)

    out.push = push
    return out


# ---------------------------------------------------------------------------
# complex pairing and k-space nodes


def pairs_to_complex(v: np.ndarray) -> np.ndarray:
    return v[0::2] + 1j * v[1::2]


def complex_to_pairs(c: np.ndarray, dtype=np.float64) -> np.ndarray:
    n, h, w = c.shape
    out = np.empty((2 * n, h, w), dtype=dtype)
    out[0::2] = c.real
    out[1::2] = c.imag
    return out


def fft2c_pairs(x: Var) -> Var:
    dt = x.value.dtype
    out = Var(complex_to_pairs(fft2c(pairs_to_complex(x.value)), dt), (x,))
    out.push = lambda g: x.accumulate(complex_to_pairs(ifft2c(pairs_to_complex(g)), dt))
    return out


def ifft2c_pairs(x: Var) -> Var:
    dt = x.value.dtype
    out = Var(complex_to_pairs(ifft2c(pairs_to_complex(x.value)), dt), (x,))
    out.push = lambda g: x.accumulate(complex_to_pairs(fft2c(pairs_to_complex(g)), dt))
    return out


def data_consistency_cols(pred: Var, obs: np.ndarray, sampled: np.ndarray) -> Var:
    """Copy observed columns over predictions; adjoint is exactly zero there."""
    if pred.value.shape != obs.shape:
        raise InputError(f"shape mismatch: {pred.value.shape} vs {obs.shape}")
    keep = ~np.asarray(sampled, dtype=bool)
    out = Var(np.where(keep, pred.value, obs), (pred,))
    out.push = lambda g: pred.accumulate(np.where(keep, g, 0.0))
    return out


def project_cols(x: Var, keep_cols: np.ndarray) -> Var:
    keep = np.asarray(keep_cols, dtype=bool)
    out = Var(np.where(keep, x.value, 0.0), (x,))
    out.push = lambda g: x.accumulate(np.where(keep, g, 0.0))
    return out


def grappa_fill(x: Var, weights: np.ndarray, sampled: np.ndarray, lattice: np.ndarray) -> Var:
    """Differentiable GRAPPA layer on paired-real k-space.

    Lines flagged in ``sampled`` pass through; the rest are synthesized by
    the fixed complex kernel convolved over the lattice projection. The
    kernel itself receives no gradient; the adjoint convolves the missing-
    line adjoints with the conjugate-flipped kernel and projects back onto
    the lattice.
    """
    from .grappa import _correlate  # shared convolution core

    sampled = np.asarray(sampled, dtype=bool)
    lattice = np.asarray(lattice, dtype=bool)
    dt = x.value.dtype
    c = pairs_to_complex(x.value)
    src = np.where(lattice, c, 0.0)
    pred = _correlate(src, weights)
    out_c = np.where(sampled, c, pred)
    out = Var(complex_to_pairs(out_c, dt), (x,))

    flipped = np.conj(weights[:, :, ::-1, ::-1]).transpose(1, 0, 2, 3)

    def push(g):
        gc = pairs_to_complex(g)
        direct = np.where(sampled, gc, 0.0)
        through = _correlate(np.where(sampled, 0.0, gc), flipped)
        x.accumulate(complex_to_pairs(direct + np.where(lattice, through, 0.0), dt))

    out.push = push
    return out


def rss_pairs(x: Var) -> Var:
    """Root-sum-of-squares across paired-real coil channels -> (H, W)."""
    sq = np.sum(x.value.astype(np.float64) ** 2, axis=0)
    r = np.sqrt(sq)
    out = Var(r.astype(x.value.dtype, copy=False), (x,))

    def push(g):
        safe = np.where(r > 0, r, 1.0)
        x.accumulate((g / safe)[None, :, :].astype(x.value.dtype) * x.value)

    out.push = push
    return out


# ---------------------------------------------------------------------------
# loss primitives


def _box_spread(g: np.ndarray, window: int) -> np.ndarray:
    """Adjoint of the valid-mode box sum: full correlation with a ones kernel."""
    pad = window - 1
    gp = np.pad(g, ((pad, pad), (pad, pad)))
    integral = np.zeros((gp.shape[0] + 1, gp.shape[1] + 1))
    np.cumsum(np.cumsum(gp, axis=0), axis=1, out=integral[1:, 1:])
    return (
        integral[window:, window:]
        - integral[:-window, window:]
        - integral[window:, :-window]
        + integral[:-window, :-window]
    )


def ssim_score(x_hat: Var, target: np.ndarray, data_range: float, window: int = _metrics.SSIM_WINDOW) -> Var:
    """Mean SSIM as a scalar node; forward statistics come from
    :func:`parallax.metrics.ssim_stats` so the loss and the reported metric
    are the same computation."""
    xv = x_hat.value.astype(np.float64)
    yv = np.asarray(target, dtype=np.float64)
    ssim_map, st = _metrics.ssim_stats(xv, yv, data_range, window)
    n_windows = ssim_map.size
    out = Var(np.asarray(ssim_map.mean(), dtype=x_hat.value.dtype), (x_hat,))

    def push(g):
        gs = float(g) / n_windows
        a1, a2, b1, b2 = st["a1"], st["a2"], st["b1"], st["b2"]
        mu1, mu2 = st["mu1"], st["mu2"]
        inv_bb = 1.0 / (b1 * b2)
        d_a1 = a2 * inv_bb
        d_a2 = a1 * inv_bb
        d_b1 = -a1 * a2 * inv_bb / b1
        d_b2 = -a1 * a2 * inv_bb / b2
        # chain through mu1, E11, E12 (x_hat enters mu1, var1, cov)
        d_mu1 = 2.0 * mu2 * d_a1 + 2.0 * mu1 * d_b1 - 2.0 * mu1 * d_b2 - mu2 * (2.0 * d_a2)
        d_e11 = d_b2
        d_e12 = 2.0 * d_a2
        w2 = window * window
        grad = (
            _box_spread(d_mu1, window) / w2
            + 2.0 * xv * (_box_spread(d_e11, window) / w2)
            + yv * (_box_spread(d_e12, window) / w2)
        )
        x_hat.accumulate((gs * grad).astype(x_hat.value.dtype))

    out.push = push
    return out


def reconstruction_loss(x_hat: Var, target: np.ndarray, l1_weight: float = 0.001) -> Var:
    """-SSIM(x_hat, target) + l1_weight * mean|x_hat - target|.

    data_range for the SSIM term is the target maximum; identical images
    give exactly -1.
    """
    target = np.asarray(target)
    if x_hat.value.shape != target.shape:
        raise InputError(f"loss shape mismatch: {x_hat.value.shape} vs {target.shape}")
    data_range = float(target.max())
    if data_range <= 0:
        data_range = 1.0
    s = ssim_score(x_hat, target, data_range)
    l1 = mean_all(abs_(add_const(x_hat, -target)))
    return add(scale(s, -1.0), scale(l1, l1_weight))
