"""Command-line surface: reproducible reconstruction pipelines.

Every subcommand resolves its flags, echoes them to <out>/config.json, and
writes bit-exact CFL outputs (plus PNG views and CSV/JSON reports). Errors
print one machine-readable line ``<category>: <message>`` on stderr and
exit nonzero.

PARALLAX_THREADS caps worker threads (default 1); --deterministic forces
single-threaded execution so reruns with an identical config.json are
bitwise identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def worker_count(deterministic: bool = False) -> int:
    if deterministic:
        return 1
    try:
        return max(1, int(os.environ.get("PARALLAX_THREADS", "1")))
    except ValueError:
        return 1


def _setup_threads(argv: list[str]) -> None:
    """Pin BLAS pools before numpy loads; must run first in main()."""
    n = 1 if "--deterministic" in argv else worker_count()
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--seed", type=int, default=0, help="base RNG seed")
    sub.add_argument("--precision", choices=("f32", "f64"), default="f32", help="floating-point width")
    sub.add_argument("--deterministic", action="store_true", help="force single-threaded, bitwise-reproducible execution")


def _echo_config(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = {k: v for k, v in vars(args).items() if k != "func"}
    (out / "config.json").write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")
    return out


def _complex_dtype(precision: str):
    import numpy as np

    return np.complex64 if precision == "f32" else np.complex128


def _load_mask(path: str):
    from .errors import FileFormatError
    from .sampling import SamplingMask

    p = Path(path)
    if not p.exists():
        raise FileFormatError(f"missing mask file {p}")
    return SamplingMask.from_json(p.read_text())


def _load_kspace(path: str, precision: str, mask=None):
    """Read k-space; when a mask is given, apply it (idempotent, so inputs
    that are already undersampled pass through unchanged)."""
    from .fileio import read_cfl
    from .sampling import apply_mask

    k = read_cfl(path).astype(_complex_dtype(precision))
    if mask is not None:
        k = apply_mask(k, mask)
    return k


def cmd_phantom(args) -> int:
    from .phantom import PhantomSpec, make_dataset

    out = _echo_config(args)
    spec = PhantomSpec(
        h=args.height,
        w=args.width,
        n_coils=args.coils,
        n_ellipses=args.ellipses,
        noise_std=args.noise_std,
        contrast=args.contrast,
    )
    manifest = make_dataset(args.volumes, args.slices, spec, args.seed, out)
    print(f"wrote {len(manifest['samples'])} samples to {out}")
    return 0


def cmd_mask(args) -> int:
    from .sampling import make_equispaced_mask, make_random_mask
    from .training import default_center_fraction

    out = _echo_config(args)
    cf = args.center_fraction if args.center_fraction is not None else default_center_fraction(args.accel)
    maker = make_random_mask if args.family == "random" else make_equispaced_mask
    mask = maker(args.width, args.accel, cf, args.seed)
    (out / "mask.json").write_text(mask.to_json() + "\n")
    print(f"wrote mask.json ({int(mask.sampled.sum())}/{mask.width} lines sampled)")
    return 0


def _kernel_geometry(args, accel: int):
    from .grappa import default_kernel_rows

    rows = args.kernel_rows if args.kernel_rows is not None else default_kernel_rows(accel)
    return rows, args.kernel_cols


def cmd_grappa_calib(args) -> int:
    from .fileio import write_cfl
    from .grappa import calibrate, extract_acs, lattice_offset

    out = _echo_config(args)
    mask = _load_mask(args.mask)
    k = _load_kspace(args.kspace, "f64", mask)
    accel = args.accel if args.accel is not None else mask.acceleration
    rows, cols = _kernel_geometry(args, accel)
    offset = lattice_offset(mask, accel)
    phase = (offset - mask.acs_range[0]) % accel
    kernel = calibrate(extract_acs(k, mask), accel, rows, cols, args.reg, phase=phase)
    write_cfl(out / "kernel", kernel.weights)
    sidecar = {
        "coils": kernel.n_coils,
        "kh": rows,
        "kw": cols,
        "accel": accel,
        "reg": args.reg,
    }
    (out / "kernel.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    print(f"wrote kernel.cfl ({kernel.n_coils} coils, {rows}x{cols} taps, stride {accel})")
    return 0


def _write_recon(out: Path, kspace, image) -> None:
    from .fileio import save_png, write_cfl

    write_cfl(out / "recon", image)
    save_png(out / "recon.png", image)
    if kspace is not None:
        write_cfl(out / "kspace_filled", kspace)


def cmd_grappa_recon(args) -> int:
    import numpy as np

    from .fileio import read_cfl
    from .fourier import ifft2c
    from .grappa import GrappaKernel, apply, grappa_reconstruct
    from .recon import rss

    out = _echo_config(args)
    mask = _load_mask(args.mask)
    k = _load_kspace(args.kspace, args.precision, mask)
    accel = args.accel if args.accel is not None else mask.acceleration
    if args.kernel is not None:
        sidecar = json.loads((Path(args.kernel) / "kernel.json").read_text())
        weights = read_cfl(Path(args.kernel) / "kernel").astype(np.complex128)
        filled = apply(k, mask, GrappaKernel(weights, sidecar["accel"]))
    else:
        rows, cols = _kernel_geometry(args, accel)
        filled = grappa_reconstruct(k, mask, accel, rows, cols, args.reg)
    image = rss(ifft2c(filled))
    _write_recon(out, filled, image)
    print("wrote recon.cfl, recon.png, kspace_filled.cfl")
    return 0


def cmd_zf_recon(args) -> int:
    from .recon import zero_filled_recon
    from .sampling import apply_mask

    out = _echo_config(args)
    k = _load_kspace(args.kspace, args.precision)
    if args.mask is not None:
        k = apply_mask(k, _load_mask(args.mask))
    image = zero_filled_recon(k)
    _write_recon(out, None, image)
    print("wrote recon.cfl, recon.png")
    return 0


def cmd_cs_recon(args) -> int:
    import csv

    import numpy as np

    from .fileio import read_cfl
    from .recon import SensitivityMaps, cs_tv_reconstruct, estimate_sensitivities, rss

    out = _echo_config(args)
    mask = _load_mask(args.mask)
    k = _load_kspace(args.kspace, args.precision, mask)
    if args.maps is not None:
        maps_arr = read_cfl(args.maps).astype(_complex_dtype(args.precision))
        support = rss(maps_arr) > 0
        maps = SensitivityMaps(maps_arr, support)
    else:
        maps = estimate_sensitivities(k, mask, args.threshold)
    sol, trace = cs_tv_reconstruct(k, mask, maps, args.tv_weight, args.iters, args.step)
    _write_recon(out, None, np.abs(sol))
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "data_term", "tv_term", "total"])
        for row in trace:
            writer.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])
    print(f"wrote recon.cfl, trace.csv ({len(trace) - 1} iterations)")
    return 0


def _model_config(args, coils: int):
    from .grappanet import AblationConfig, GrappaNetConfig

    if args.model == "grappanet":
        return GrappaNetConfig(
            coils=coils,
            base_channels=args.base_channels,
            depth=args.depth,
            target_accel=args.target_accel,
            kernel_rows=args.kernel_rows,
            kernel_cols=args.kernel_cols,
            l1_weight=args.l1_weight,
        )
    return AblationConfig(
        coils=coils,
        base_channels=2 * args.base_channels,
        depth=args.depth,
        l1_weight=args.l1_weight,
    )


def cmd_train(args) -> int:
    from .training import TrainConfig, load_samples, train

    out = _echo_config(args)
    samples = load_samples(args.manifest)
    coils = samples[0].kspace.shape[0]
    model_cfg = _model_config(args, coils)
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        decay=args.decay,
        eps=args.eps,
        accel=args.accel,
        center_fraction=args.center_fraction,
        l1_weight=args.l1_weight,
        seed=args.seed,
        precision=args.precision,
    )
    store, records = train(samples, model_cfg, cfg, log_path=out / "metrics.csv", checkpoint_dir=out / "checkpoint")
    final_val = [r for r in records if r["split"] == "val"]
    tail = f", final val ssim {final_val[-1]['ssim']:.4f}" if final_val else ""
    print(f"trained {args.epochs} epochs ({args.model}){tail}; wrote checkpoint/, metrics.csv")
    return 0


def cmd_net_recon(args) -> int:
    import numpy as np

    from .training import forward_model, load_checkpoint, model_config_from_record

    out = _echo_config(args)
    mask = _load_mask(args.mask)
    k = _load_kspace(args.kspace, args.precision, mask)
    store, manifest = load_checkpoint(args.checkpoint)
    model_cfg = model_config_from_record(manifest["config"])
    dtype = np.float32 if args.precision == "f32" else np.float64
    result = forward_model(k, mask, store.params, model_cfg, dtype)
    _write_recon(out, None, np.asarray(result.image.value))
    print("wrote recon.cfl, recon.png")
    return 0


def cmd_eval(args) -> int:
    from concurrent.futures import ThreadPoolExecutor

    import numpy as np

    from .errors import InputError
    from .fileio import read_cfl
    from .metrics import MetricReport, nmse, psnr, ssim

    out = _echo_config(args)
    pred = read_cfl(args.pred).real.astype(np.float64)
    target = read_cfl(args.target).real.astype(np.float64)
    if pred.shape != target.shape:
        raise InputError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if pred.ndim == 2:
        pred, target = pred[None], target[None]
    data_range = float(target.max())
    report = MetricReport()
    workers = worker_count(args.deterministic)

    def one(i):
        return (
            nmse(pred[i], target[i]),
            psnr(pred[i], target[i], data_range),
            ssim(pred[i], target[i], data_range),
        )

    if workers > 1 and pred.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(pred.shape[0])))
    else:
        rows = [one(i) for i in range(pred.shape[0])]
    for n, p, s in rows:
        report.nmse.append(n)
        report.psnr.append(p)
        report.ssim.append(s)
    report.write_json(out / "metrics.json")
    report.write_csv(out / "metrics.csv")
    agg = report.aggregate
    print(f"nmse {agg['nmse']:.6g}  psnr {agg['psnr']:.4f}  ssim {agg['ssim']:.6f}")
    return 0


def cmd_dither(args) -> int:
    import numpy as np

    from .fileio import read_cfl, save_png, write_cfl
    from .postprocess import dither, sigma_for_contrast

    out = _echo_config(args)
    image = np.abs(read_cfl(args.image)).astype(np.float64)
    sigma = args.dither_sigma if args.dither_sigma is not None else sigma_for_contrast(args.contrast)
    result = dither(image, sigma=sigma, seed=args.seed)
    write_cfl(out / "dithered", result)
    save_png(out / "dithered.png", result)
    print(f"wrote dithered.cfl, dithered.png (sigma {sigma})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parallax",
        description="Multi-coil MRI reconstruction sandbox: GRAPPA, TV compressed sensing, GrappaNet.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name, func, help_):
        p = subs.add_parser(name, help=help_, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        _add_common(p)
        return p

    p = sub("phantom", cmd_phantom, "generate a synthetic multi-coil dataset")
    p.add_argument("--volumes", type=int, default=1, help="number of phantom volumes")
    p.add_argument("--slices", type=int, default=1, help="slices per volume")
    p.add_argument("--height", type=int, default=128, help="image rows")
    p.add_argument("--width", type=int, default=160, help="image columns (undersampled axis)")
    p.add_argument("--coils", type=int, default=15, help="receiver coils")
    p.add_argument("--ellipses", type=int, default=6, help="ellipses per phantom")
    p.add_argument("--noise-std", type=float, default=0.0, help="complex noise std per component")
    p.add_argument("--contrast", choices=("pd", "pdfs"), default="pd", help="intensity statistics")

    p = sub("mask", cmd_mask, "generate a Cartesian line mask")
    p.add_argument("--width", type=int, required=True, help="number of k-space lines")
    p.add_argument("--accel", type=int, required=True, help="nominal acceleration R")
    p.add_argument("--center-fraction", type=float, default=None, help="ACS fraction (default 0.08 for R<=4, 0.04 above)")
    p.add_argument("--family", choices=("random", "equispaced"), default="random", help="mask family")

    p = sub("grappa-calib", cmd_grappa_calib, "calibrate a GRAPPA kernel from the ACS")
    p.add_argument("--kspace", required=True, help="undersampled k-space CFL")
    p.add_argument("--mask", required=True, help="mask JSON")
    p.add_argument("--accel", type=int, default=None, help="kernel stride (default: mask acceleration)")
    p.add_argument("--kernel-rows", type=int, default=None, help="line-axis taps (default 4R-1)")
    p.add_argument("--kernel-cols", type=int, default=5, help="readout-axis taps")
    p.add_argument("--reg", type=float, default=None, help="ridge weight (default 1e-6*||A||_F^2/cols)")

    p = sub("grappa-recon", cmd_grappa_recon, "GRAPPA-fill k-space and reconstruct")
    p.add_argument("--kspace", required=True, help="undersampled k-space CFL")
    p.add_argument("--mask", required=True, help="mask JSON")
    p.add_argument("--kernel", default=None, help="directory holding kernel.cfl + kernel.json (default: calibrate)")
    p.add_argument("--accel", type=int, default=None, help="kernel stride (default: mask acceleration)")
    p.add_argument("--kernel-rows", type=int, default=None, help="line-axis taps (default 4R-1)")
    p.add_argument("--kernel-cols", type=int, default=5, help="readout-axis taps")
    p.add_argument("--reg", type=float, default=None, help="ridge weight (default 1e-6*||A||_F^2/cols)")

    p = sub("zf-recon", cmd_zf_recon, "zero-filled RSS baseline")
    p.add_argument("--kspace", required=True, help="k-space CFL")
    p.add_argument("--mask", default=None, help="optional mask JSON to apply first")

    p = sub("cs-recon", cmd_cs_recon, "TV-regularized compressed-sensing reconstruction")
    p.add_argument("--kspace", required=True, help="undersampled k-space CFL")
    p.add_argument("--mask", required=True, help="mask JSON")
    p.add_argument("--maps", default=None, help="sensitivity maps CFL (default: estimate from ACS)")
    p.add_argument("--threshold", type=float, default=0.05, help="support threshold for estimated maps")
    p.add_argument("--tv-weight", type=float, default=None, help="TV weight (default 1e-3*||k||/sqrt(HW))")
    p.add_argument("--iters", type=int, default=200, help="gradient-descent iterations")
    p.add_argument("--step", type=float, default=1.0, help="initial step size")

    p = sub("train", cmd_train, "train a reconstruction network on a dataset manifest")
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--model", choices=("grappanet", "image-unet"), default="grappanet", help="architecture")
    p.add_argument("--epochs", type=int, default=20, help="training epochs")
    p.add_argument("--batch", type=int, default=1, help="batch size")
    p.add_argument("--lr", type=float, default=0.0003, help="RMSProp learning rate")
    p.add_argument("--decay", type=float, default=0.99, help="RMSProp decay")
    p.add_argument("--eps", type=float, default=1e-8, help="RMSProp epsilon")
    p.add_argument("--accel", type=int, default=4, help="training mask acceleration")
    p.add_argument("--center-fraction", type=float, default=None, help="ACS fraction (default 0.08 for R<=4, 0.04 above)")
    p.add_argument("--l1-weight", type=float, default=0.001, help="L1 weight lambda in the loss")
    p.add_argument("--base-channels", type=int, default=16, help="U-Net base channels (image-unet doubles this)")
    p.add_argument("--depth", type=int, default=2, help="U-Net pooling depth")
    p.add_argument("--target-accel", type=int, default=2, help="stride the GRAPPA layer completes")
    p.add_argument("--kernel-rows", type=int, default=None, help="GRAPPA line taps (default 4R'-1)")
    p.add_argument("--kernel-cols", type=int, default=5, help="GRAPPA readout taps")

    p = sub("net-recon", cmd_net_recon, "reconstruct with a trained checkpoint")
    p.add_argument("--kspace", required=True, help="undersampled k-space CFL")
    p.add_argument("--mask", required=True, help="mask JSON")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")

    p = sub("eval", cmd_eval, "NMSE/PSNR/SSIM between prediction and target CFLs")
    p.add_argument("--pred", required=True, help="prediction CFL (real image or slice stack)")
    p.add_argument("--target", required=True, help="ground-truth CFL")

    p = sub("dither", cmd_dither, "brightness-adaptive dithering for display")
    p.add_argument("--image", required=True, help="magnitude image CFL")
    p.add_argument("--dither-sigma", type=float, default=None, help="noise level (default 0.025 pd / 0.05 pdfs)")
    p.add_argument("--contrast", choices=("pd", "pdfs"), default="pd", help="contrast used for the default sigma")

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_threads(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import ParallaxError

    try:
        return args.func(args)
    except ParallaxError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
