"""Convert fastMRI multi-coil HDF5 volumes to per-slice CFL pairs.

Each input file is expected to hold a complex ``kspace`` dataset shaped
(slices, coils, rows, columns) and an ``acquisition`` attribute naming the
contrast (labels containing "PDFS" map to pdfs, everything else to pd).
Slices are exported individually (the reconstruction engine is 2D); the
volume name is retained in the manifest for volume-level aggregation.

Volumes wider than ``max_width`` are skipped with a log line, mirroring the
training-data width filter of the reference experiments. Unreadable or
malformed files are skipped and recorded in the manifest's errors section.
Files are processed in sorted filename order, so reruns produce identical
manifests.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import h5py
import numpy as np

from .cfl import write_cfl

log = logging.getLogger("fastmri_ingest")

_SCHEMA_PATH = Path(__file__).parent / "schemas" / "manifest.schema.json"


class IngestError(Exception):
    pass


def manifest_schema() -> dict:
    return json.loads(_SCHEMA_PATH.read_text())


def validate_manifest(manifest: dict) -> None:
    import jsonschema

    jsonschema.validate(manifest, manifest_schema())


def _contrast_label(acquisition: str) -> str:
    return "pdfs" if "PDFS" in acquisition.upper() else "pd"


def _read_volume(path: Path) -> tuple[np.ndarray, str]:
    with h5py.File(path, "r") as fh:
        if "kspace" not in fh:
            raise IngestError(f"{path.name}: no 'kspace' dataset")
        kspace = np.asarray(fh["kspace"])
        acquisition = fh.attrs.get("acquisition", "")
        if isinstance(acquisition, bytes):
            acquisition = acquisition.decode()
    if kspace.ndim != 4:
        raise IngestError(f"{path.name}: expected (slices, coils, rows, cols), got shape {kspace.shape}")
    if not np.iscomplexobj(kspace):
        raise IngestError(f"{path.name}: kspace is not complex-valued")
    return kspace, _contrast_label(str(acquisition))


def convert(input_h5_dir: str | Path, output_dir: str | Path, max_width: int | None = None) -> dict:
    """Convert every volume under ``input_h5_dir``; returns the manifest."""
    src = Path(input_h5_dir)
    out = Path(output_dir)
    if not src.is_dir():
        raise IngestError(f"input directory {src} does not exist")
    files = sorted(src.glob("*.h5")) + sorted(src.glob("*.hdf5"))
    if not files:
        raise IngestError(f"no HDF5 volumes found in {src}")
    out.mkdir(parents=True, exist_ok=True)

    samples: list[dict] = []
    errors: list[dict] = []
    for path in files:
        try:
            kspace, contrast = _read_volume(path)
        except (IngestError, OSError) as exc:
            log.warning("skipping %s: %s", path.name, exc)
            errors.append({"path": path.name, "reason": str(exc)})
            continue
        width = kspace.shape[-1]
        if max_width is not None and width > max_width:
            log.info("skipping %s: width %d exceeds limit %d", path.name, width, max_width)
            errors.append({"path": path.name, "reason": f"width {width} > max_width {max_width}"})
            continue
        stem = path.stem
        for sl in range(kspace.shape[0]):
            sample_id = f"{stem}_s{sl:02d}"
            write_cfl(out / sample_id, kspace[sl].astype(np.complex64))
            samples.append(
                {
                    "id": sample_id,
                    "kspace_path": f"{sample_id}.cfl",
                    "contrast": contrast,
                    "split": "external",
                    "volume": stem,
                }
            )
        log.info("converted %s: %d slices, width %d", path.name, kspace.shape[0], width)

    manifest = {"samples": samples, "errors": errors}
    validate_manifest(manifest)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
