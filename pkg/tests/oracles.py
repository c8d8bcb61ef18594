"""Independent brute-force oracles used to pin expected values.

Everything here is deliberately naive (O(N^2) sums, explicit loops, dense
matrices) and shares no code with the library paths it checks.
"""

from __future__ import annotations

import numpy as np


def dft2_centered_sum(x: np.ndarray) -> np.ndarray:
    """Direct DFT sum with centered indices and 1/sqrt(HW) normalization.

    X[ku, kv] = 1/sqrt(HW) * sum_{m,n} x[m, n]
                * exp(-2j*pi*((ku - H//2)(m - H//2)/H + (kv - W//2)(n - W//2)/W))
    """
    h, w = x.shape[-2:]
    lead = x.shape[:-2]
    xs = x.reshape(-1, h, w)
    out = np.zeros_like(xs, dtype=np.complex128)
    for b in range(xs.shape[0]):
        for ku in range(h):
            for kv in range(w):
                acc = 0.0 + 0.0j
                for m in range(h):
                    for n in range(w):
                        phase = -2j * np.pi * (
                            (ku - h // 2) * (m - h // 2) / h + (kv - w // 2) * (n - w // 2) / w
                        )
                        acc += xs[b, m, n] * np.exp(phase)
                out[b, ku, kv] = acc / np.sqrt(h * w)
    return out.reshape(*lead, h, w)


def idft2_centered_sum(k: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft2_centered_sum` (conjugate phase)."""
    h, w = k.shape[-2:]
    lead = k.shape[:-2]
    ks = k.reshape(-1, h, w)
    out = np.zeros_like(ks, dtype=np.complex128)
    for b in range(ks.shape[0]):
        for m in range(h):
            for n in range(w):
                acc = 0.0 + 0.0j
                for ku in range(h):
                    for kv in range(w):
                        phase = 2j * np.pi * (
                            (ku - h // 2) * (m - h // 2) / h + (kv - w // 2) * (n - w // 2) / w
                        )
                        acc += ks[b, ku, kv] * np.exp(phase)
                out[b, m, n] = acc / np.sqrt(h * w)
    return out.reshape(*lead, h, w)


def rss_scalar(coil_images: np.ndarray) -> np.ndarray:
    """Root-sum-of-squares via explicit per-pixel loops."""
    n, h, w = coil_images.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(n):
                v = coil_images[i, r, c]
                acc += v.real * v.real + v.imag * v.imag
            out[r, c] = np.sqrt(acc)
    return out


def nmse_scalar(pred: np.ndarray, ref: np.ndarray) -> float:
    num = 0.0
    den = 0.0
    for p, r in zip(pred.ravel(), ref.ravel()):
        num += abs(p - r) ** 2
        den += abs(r) ** 2
    return num / den


def psnr_scalar(pred: np.ndarray, ref: np.ndarray, data_range: float) -> float:
    se = 0.0
    for p, r in zip(pred.ravel(), ref.ravel()):
        se += (p - r) ** 2
    mse = se / pred.size
    return 10.0 * np.log10(data_range**2 / mse)


def ssim_scalar(x: np.ndarray, y: np.ndarray, data_range: float, window: int = 7,
                k1: float = 0.01, k2: float = 0.03) -> float:
    """SSIM by direct windowed sums (population statistics, valid positions)."""
    h, w = x.shape
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    vals = []
    n = window * window
    for r in range(h - window + 1):
        for c in range(w - window + 1):
            xs = x[r : r + window, c : c + window].ravel()
            ys = y[r : r + window, c : c + window].ravel()
            mx = sum(xs) / n
            my = sum(ys) / n
            vx = sum((v - mx) ** 2 for v in xs) / n
            vy = sum((v - my) ** 2 for v in ys) / n
            vxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys)) / n
            vals.append(((2 * mx * my + c1) * (2 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def median_filter_sort(img: np.ndarray, patch: int) -> np.ndarray:
    """Median filter with index clamping at edges, via explicit sorting."""
    h, w = img.shape
    half = patch // 2
    out = np.empty_like(img)
    for r in range(h):
        for c in range(w):
            vals = []
            for dr in range(-half, half + 1):
                for dc in range(-half, half + 1):
                    rr = min(max(r + dr, 0), h - 1)
                    cc = min(max(c + dc, 0), w - 1)
                    vals.append(img[rr, cc])
            vals.sort()
            out[r, c] = vals[len(vals) // 2]
    return out


def grappa_normal_equations(
    acs: np.ndarray, accel: int, kernel_rows: int, kernel_cols: int, reg: float,
    phase: int = 0,
) -> np.ndarray:
    """Dense normal-equations GRAPPA calibration oracle.

    Assembles the same equations the library is specified to build (kept
    lines at the given lattice phase, every other interior line a target,
    taps at line offsets not divisible by the stride) but with explicit
    loops, and solves (A^H A + reg I) g = A^H b by a dense solve. Returns
    weights shaped like GrappaKernel.weights.
    """
    n_coils, n_read, n_lines = acs.shape
    half_l, half_r = kernel_rows // 2, kernel_cols // 2
    active = [d for d in range(-half_l, half_l + 1) if d % accel != 0]
    rows = []
    targets = []
    sim = acs.copy()
    for line in range(n_lines):
        if line % accel != phase:
            sim[:, :, line] = 0.0
    for t in range(half_l, n_lines - half_l):
        if t % accel == phase:
            continue
        for r in range(half_r, n_read - half_r):
            feats = []
            for i in range(n_coils):
                for d in active:
                    for c in range(-half_r, half_r + 1):
                        feats.append(sim[i, r + c, t + d])
            rows.append(feats)
            targets.append(acs[:, r, t])
    a = np.array(rows)
    b = np.array(targets)
    gram = a.conj().T @ a + reg * np.eye(a.shape[1])
    sol = np.linalg.solve(gram, a.conj().T @ b)
    weights = np.zeros((n_coils, n_coils, kernel_rows, kernel_cols), dtype=complex)
    coeffs = sol.T.reshape(n_coils, n_coils, len(active), kernel_cols)
    for ai, d in enumerate(active):
        weights[:, :, d + half_l, :] = coeffs[:, :, ai, :]
    return weights


def numeric_grad(fn, arrays: list[np.ndarray], h: float = 1e-4) -> list[np.ndarray]:
    """Central finite-difference gradient of scalar fn(*arrays) w.r.t. each array."""
    grads = []
    for idx, arr in enumerate(arrays):
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            fp = fn(*arrays)
            flat[j] = orig - h
            fm = fn(*arrays)
            flat[j] = orig
            gflat[j] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise relative error with an absolute floor for near-zeros."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
