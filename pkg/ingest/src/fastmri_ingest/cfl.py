"""Minimal CFL pair writer/reader.

Format contract shared with the reconstruction toolkit: ``base.hdr`` holds a
``# Dimensions`` line plus five space-separated extents (unused ones 1);
``base.cfl`` holds little-endian float32 (real, imag) pairs, column-major
over the declared extents. Header extents are the reverse of the numpy
shape, so C-ordered complex64 bytes go to disk unchanged.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MAX_DIMS = 5


def _pair_paths(path: str | Path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".cfl", ".hdr"):
        p = p.with_suffix("")
    return Path(str(p) + ".hdr"), Path(str(p) + ".cfl")


def write_cfl(path: str | Path, tensor: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(tensor), dtype="<c8")
    if arr.ndim > MAX_DIMS:
        raise ValueError(f"CFL supports at most {MAX_DIMS} dimensions, got {arr.ndim}")
    extents = list(reversed(arr.shape)) + [1] * (MAX_DIMS - arr.ndim)
    hdr, cfl = _pair_paths(path)
    hdr.parent.mkdir(parents=True, exist_ok=True)
    hdr.write_text("# Dimensions\n" + " ".join(str(e) for e in extents) + "\n")
    arr.tofile(cfl)


def read_cfl(path: str | Path) -> np.ndarray:
    hdr, cfl = _pair_paths(path)
    lines = hdr.read_text().splitlines()
    extents = [int(tok) for tok in lines[1].split()]
    while len(extents) > 1 and extents[-1] == 1:
        extents.pop()
    return np.fromfile(cfl, dtype="<c8").reshape(tuple(reversed(extents)))
