"""GRAPPA kernel calibration from the ACS and k-space interpolation.

Layout convention: k-space tensors are (coils, readout, lines) with the
undersampled line axis last, matching :mod:`parallax.sampling`. A kernel is
a complex convolution from N coils to N coils with ``kh`` taps along the
line axis and ``kw`` taps along the readout axis (both odd).

Missing lines sit at offsets d with d % R' != 0 from the sampled stride-R'
lattice, so only taps at those offsets can ever see data: calibration solves
for exactly that "active" tap set and stores zeros elsewhere. This keeps the
lambda=0 system full-rank whenever the ACS provides enough equations.

Calibration simulates undersampling inside the ACS: lines off the chosen
lattice phase are zeroed, and every zeroed interior line contributes one
equation block per relative position within the stride cell (predicted from
the kept lines through the kernel window). All blocks are solved jointly as
one ridge least-squares problem. The phase must match the alignment of the
actually acquired lattice relative to the ACS start so that the learned
relation is the one the data obeys; :func:`grappa_reconstruct` wires this up
from the mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CalibrationError, InputError, SolverError, StrideMismatchError
from .sampling import SamplingMask


@dataclass(frozen=True)
class GrappaKernel:
    weights: np.ndarray  # (n_coils_out, n_coils_in, kh, kw) complex
    accel: int  # stride R' the kernel was calibrated for

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise InputError(f"kernel weights must be 4D, got shape {self.weights.shape}")
        _, _, kh, kw = self.weights.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise InputError(f"kernel extents must be odd, got ({kh}, {kw})")
        if not np.all(np.isfinite(self.weights)):
            raise InputError("kernel weights must be finite")

    @property
    def n_coils(self) -> int:
        return self.weights.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]


@dataclass(frozen=True)
class AcsRegion:
    """Fully sampled central block: (coils, readout, n_acs_lines)."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise InputError(f"ACS data must be (coils, readout, lines), got shape {self.data.shape}")

    @property
    def n_lines(self) -> int:
        return self.data.shape[2]


def extract_acs(k: np.ndarray, m: SamplingMask) -> AcsRegion:
    if k.shape[-1] != m.width:
        raise InputError(f"k-space width {k.shape[-1]} does not match mask width {m.width}")
    lo, hi = m.acs_range
    if hi <= lo:
        raise CalibrationError("mask has an empty ACS region")
    return AcsRegion(np.ascontiguousarray(k[..., lo:hi]))


def active_line_offsets(kh: int, accel: int) -> np.ndarray:
    """Line-axis tap offsets that can carry data: d in [-kh//2, kh//2], d % accel != 0."""
    half = kh // 2
    d = np.arange(-half, half + 1)
    return d[d % accel != 0]


def default_kernel_rows(accel: int) -> int:
    """Dense extent covering 4 sampled source lines (2 above + 2 below) around
    any missing line at stride ``accel``: the farthest source sits 2*accel - 1
    lines away, so the extent is 4*accel - 1."""
    return 4 * accel - 1


def calibrate(
    acs: AcsRegion,
    accel: int,
    kernel_rows: int,
    kernel_cols: int,
    reg: float | None = None,
    phase: int = 0,
) -> GrappaKernel:
    """Fit kernel weights from the ACS by regularized least squares.

    ``phase`` selects which lines (local index % accel == phase) play the
    "kept" role in the simulated undersampling; all others are prediction
    targets. ``reg`` is the ridge weight on the squared kernel norm; None
    selects the default 1e-6 * ||A||_F^2 / n_columns where A is the design
    matrix. With reg=0 a rank-deficient system raises SolverError naming the
    deficiency.
    """
    if accel < 2:
        raise InputError(f"calibration stride must be >= 2, got {accel}")
    if kernel_rows % 2 == 0 or kernel_cols % 2 == 0:
        raise InputError(f"kernel extents must be odd, got ({kernel_rows}, {kernel_cols})")
    data = np.asarray(acs.data)
    n_coils, n_read, n_lines = data.shape
    if n_lines < kernel_rows or n_read < kernel_cols:
        raise CalibrationError(
            f"ACS block {n_read}x{n_lines} too small for a {kernel_rows}x{kernel_cols} kernel"
        )
    half_l = kernel_rows // 2
    half_r = kernel_cols // 2
    active = active_line_offsets(kernel_rows, accel)
    if active.size == 0:
        raise CalibrationError(f"kernel_rows={kernel_rows} leaves no usable taps at stride {accel}")
    n_unknown = n_coils * active.size * kernel_cols

    phase = phase % accel
    line_idx = np.arange(n_lines)
    sim = np.where((line_idx % accel) == phase, data, 0.0)
    # windows: (coil, readout anchor, line anchor, kw, kh)
    win = sliding_window_view(sim, (kernel_cols, kernel_rows), axis=(1, 2))
    centers = np.arange(half_l, n_lines - half_l)
    keep = (centers % accel) != phase
    if centers.size == 0 or not keep.any():
        raise CalibrationError("no calibration equations: ACS too small for the requested kernel")
    sel = win[:, :, keep, :, :]  # (coil, nR, nT, kw, kh)
    sel = sel[..., (active + half_l)]  # keep active line taps
    # feature order: (in_coil, line tap, readout tap)
    a_mat = sel.transpose(1, 2, 0, 4, 3).reshape(-1, n_unknown)
    targs = data[:, half_r : n_read - half_r, centers[keep]]
    b_mat = targs.transpose(1, 2, 0).reshape(-1, n_coils)
    if a_mat.shape[0] < n_unknown:
        raise CalibrationError(
            f"under-determined calibration: {a_mat.shape[0]} equations for {n_unknown} unknowns"
        )

    if reg is None:
        reg = 1e-6 * float(np.linalg.norm(a_mat) ** 2) / n_unknown
    if reg < 0:
        raise InputError(f"ridge weight must be >= 0, got {reg}")

    if reg == 0.0:
        sol, _, rank, _ = np.linalg.lstsq(a_mat, b_mat, rcond=None)
        if rank < n_unknown:
            raise SolverError(
                f"rank-deficient calibration with reg=0: rank {rank} < {n_unknown} unknowns"
            )
    else:
        aug = np.concatenate([a_mat, np.sqrt(reg) * np.eye(n_unknown, dtype=a_mat.dtype)], axis=0)
        rhs = np.concatenate([b_mat, np.zeros((n_unknown, n_coils), dtype=b_mat.dtype)], axis=0)
        sol, _, _, _ = np.linalg.lstsq(aug, rhs, rcond=None)

    weights = np.zeros((n_coils, n_coils, kernel_rows, kernel_cols), dtype=np.complex128)
    weights[:, :, active + half_l, :] = sol.T.reshape(n_coils, n_coils, active.size, kernel_cols)
    return GrappaKernel(weights=weights, accel=accel)


def _correlate(src: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """pred[o, r, t] = sum_{i,a,b} weights[o,i,a,b] * src[i, r+b-kw//2, t+a-kh//2]
    with zero padding outside the array."""
    n_out, n_in, kh, kw = weights.shape
    _, n_read, n_lines = src.shape
    half_l, half_r = kh // 2, kw // 2
    padded = np.pad(src, ((0, 0), (half_r, half_r), (half_l, half_l)))
    out = np.zeros((n_out, n_read, n_lines), dtype=np.result_type(src.dtype, weights.dtype))
    for a in range(kh):
        if not weights[:, :, a, :].any():
            continue
        for b in range(kw):
            w_ab = weights[:, :, a, b]
            if not w_ab.any():
                continue
            seg = padded[:, b : b + n_read, a : a + n_lines]
            out += np.einsum("oi,irt->ort", w_ab, seg)
    return out


def lattice_offset(m: SamplingMask, accel: int) -> int:
    """Smallest offset o such that every line == o (mod accel) is sampled."""
    for offset in range(accel):
        if bool(m.sampled[offset::accel].all()):
            return offset
    raise StrideMismatchError(
        f"mask does not contain a full stride-{accel} lattice; cannot apply the kernel"
    )


def apply(
    k_under: np.ndarray,
    m: SamplingMask,
    g: GrappaKernel,
    offset: int | None = None,
) -> np.ndarray:
    """Fill unobserved lines by the kernel convolution over lattice sources.

    Observed entries pass through unchanged (hard consistency). The
    convolution reads only the stride lattice the kernel was calibrated for;
    a mask without a full lattice is rejected.
    """
    if k_under.ndim != 3:
        raise InputError(f"expected (coils, readout, lines), got shape {k_under.shape}")
    if k_under.shape[-1] != m.width:
        raise InputError(f"k-space width {k_under.shape[-1]} does not match mask width {m.width}")
    if k_under.shape[0] != g.n_coils:
        raise InputError(f"coil count {k_under.shape[0]} does not match kernel coils {g.n_coils}")
    missing = ~m.sampled
    if not missing.any():
        return k_under.copy()
    if offset is None:
        offset = lattice_offset(m, g.accel)
    elif not bool(m.sampled[offset :: g.accel].all()):
        raise StrideMismatchError(f"lattice offset {offset} is not fully sampled in the mask")

    src = np.zeros_like(k_under)
    src[..., offset :: g.accel] = k_under[..., offset :: g.accel]
    pred = _correlate(src, g.weights.astype(np.result_type(k_under.dtype, np.complex64)))
    out = k_under.copy()
    out[..., missing] = pred[..., missing].astype(k_under.dtype)
    return out


def grappa_reconstruct(
    k_under: np.ndarray,
    m: SamplingMask,
    accel: int | None = None,
    kernel_rows: int | None = None,
    kernel_cols: int = 5,
    reg: float | None = None,
) -> np.ndarray:
    """Convenience composition: extract ACS, calibrate, apply."""
    if accel is None:
        accel = m.acceleration
    if not (~m.sampled).any() or accel < 2:
        return k_under.copy()
    if kernel_rows is None:
        kernel_rows = default_kernel_rows(accel)
    offset = lattice_offset(m, accel)
    acs = extract_acs(k_under, m)
    # align the simulated undersampling with the acquired lattice
    phase = (offset - m.acs_range[0]) % accel
    kernel = calibrate(acs, accel, kernel_rows, kernel_cols, reg, phase=phase)
    return apply(k_under, m, kernel, offset=offset)
