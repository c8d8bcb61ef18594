"""CFL tensor files, PNG views, and the dataset manifest schema.

A CFL pair is ``base.hdr`` (text: a ``# Dimensions`` line, then up to five
space-separated extents, unused ones 1) plus ``base.cfl`` (raw little-endian
float32 (real, imag) pairs, column-major over the declared extents). Header
extents are therefore the reverse of the numpy shape: a (coils, H, W) tensor
is declared as ``W H coils 1 1`` and its C-ordered bytes already match the
column-major layout, so no transposition happens on disk.

PNG output is a diagnostic view only (8-bit magnitude, min-max normalized
per image); it never feeds back into any numeric path.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FileFormatError, InputError

MAX_DIMS = 5
_SCHEMA_PATH = Path(__file__).parent / "schemas" / "manifest.schema.json"


def _pair_paths(path: str | Path) -> tuple[Path, Path]:
    """(header, data) paths; names may contain dots (e.g. "conv1.w"), so the
    extensions are appended rather than substituted."""
    p = Path(path)
    if p.suffix in (".cfl", ".hdr"):
        p = p.with_suffix("")
    return Path(str(p) + ".hdr"), Path(str(p) + ".cfl")


def write_cfl(path: str | Path, tensor: np.ndarray) -> None:
    """Write a tensor as a CFL pair; values cast to complex64."""
    arr = np.ascontiguousarray(np.asarray(tensor), dtype="<c8")
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > MAX_DIMS:
        raise InputError(f"CFL supports at most {MAX_DIMS} dimensions, got {arr.ndim}")
    extents = list(reversed(arr.shape)) + [1] * (MAX_DIMS - arr.ndim)
    hdr, cfl = _pair_paths(path)
    hdr.parent.mkdir(parents=True, exist_ok=True)
    hdr.write_text("# Dimensions\n" + " ".join(str(e) for e in extents) + "\n")
    arr.tofile(cfl)


def read_cfl(path: str | Path) -> np.ndarray:
    """Read a CFL pair back as a complex64 tensor.

    Trailing 1-extents in the header (the padded dimensions) are dropped;
    the remaining extents, reversed, give the numpy shape.
    """
    hdr, cfl = _pair_paths(path)
    if not hdr.exists() or not cfl.exists():
        raise FileFormatError(f"missing CFL pair at {hdr.with_suffix('')}")
    lines = hdr.read_text().splitlines()
    if not lines or not lines[0].startswith("# Dimensions"):
        raise FileFormatError(f"{hdr}: expected a '# Dimensions' header line")
    if len(lines) < 2:
        raise FileFormatError(f"{hdr}: missing extents line")
    try:
        extents = [int(tok) for tok in lines[1].split()]
    except ValueError as exc:
        raise FileFormatError(f"{hdr}: malformed extents line {lines[1]!r}") from exc
    if not extents or any(e < 1 for e in extents):
        raise FileFormatError(f"{hdr}: extents must all be >= 1, got {extents}")
    expected = 8 * int(np.prod(extents))
    actual = cfl.stat().st_size
    if expected != actual:
        raise FileFormatError(f"{cfl}: expected {expected} bytes for extents {extents}, found {actual}")
    while len(extents) > 1 and extents[-1] == 1:
        extents.pop()
    data = np.fromfile(cfl, dtype="<c8")
    return data.reshape(tuple(reversed(extents)))


def save_png(path: str | Path, img: np.ndarray) -> None:
    """8-bit magnitude view, min-max normalized per image."""
    mag = np.abs(np.asarray(img, dtype=np.complex128)).astype(np.float64)
    if mag.ndim != 2:
        raise InputError(f"PNG view needs a 2D image, got shape {mag.shape}")
    lo, hi = float(mag.min()), float(mag.max())
    scaled = np.zeros_like(mag) if hi == lo else (mag - lo) / (hi - lo)
    Image.fromarray((scaled * 255.0).round().astype(np.uint8), mode="L").save(Path(path))


def manifest_schema() -> dict:
    return json.loads(_SCHEMA_PATH.read_text())


def validate_manifest(manifest: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(manifest, manifest_schema())
    except jsonschema.ValidationError as exc:
        raise FileFormatError(f"manifest does not match the dataset schema: {exc.message}") from exc


def load_manifest(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileFormatError(f"missing manifest {p}")
    try:
        manifest = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{p}: not valid JSON: {exc}") from exc
    validate_manifest(manifest)
    return manifest
