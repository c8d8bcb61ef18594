"""Command line for the HDF5 -> CFL converter."""

from __future__ import annotations

import argparse
import logging
import sys

from .convert import IngestError, convert


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fastmri-ingest",
        description="Convert fastMRI multi-coil HDF5 volumes to per-slice CFL pairs plus a manifest.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("input_dir", help="directory of fastMRI-layout .h5/.hdf5 volumes")
    parser.add_argument("output_dir", help="destination for CFL pairs and manifest.json")
    parser.add_argument("--max-width", type=int, default=None,
                        help="skip volumes with k-space width greater than this")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-file progress")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        manifest = convert(args.input_dir, args.output_dir, args.max_width)
    except IngestError as exc:
        print(f"ingest-error: {exc}", file=sys.stderr)
        return 1
    print(f"converted {len(manifest['samples'])} slices ({len(manifest['errors'])} skipped volumes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
