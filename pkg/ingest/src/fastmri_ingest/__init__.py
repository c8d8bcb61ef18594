"""fastmri-ingest: fastMRI HDF5 volumes -> CFL pairs + dataset manifest."""

__version__ = "0.1.0"

from .convert import IngestError, convert, manifest_schema, validate_manifest

__all__ = ["convert", "IngestError", "manifest_schema", "validate_manifest"]
