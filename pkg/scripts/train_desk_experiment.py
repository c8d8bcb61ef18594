#!/usr/bin/env python3
"""Desk-scale model comparison: train GrappaNet and the parameter-matched
image-space U-Net ablation on a phantom dataset, then score zero-filled,
ablation, and GrappaNet reconstructions on the held-out test split.

Defaults reproduce the acceptance experiment (200 samples, 48x48, 4 coils,
R=4, 20 epochs, ~10-15 min on a laptop)."""

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from parallax.grappanet import AblationConfig, GrappaNetConfig, ablation_param_count, grappanet_param_count
from parallax.metrics import nmse, psnr, ssim
from parallax.phantom import PhantomSpec, make_dataset
from parallax.recon import zero_filled_recon
from parallax.rng import mix64
from parallax.sampling import apply_mask, make_random_mask
from parallax.training import TrainConfig, forward_model, load_samples, train


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--volumes", type=int, default=50)
    parser.add_argument("--slices", type=int, default=4)
    parser.add_argument("--size", type=int, default=48, help="image extent (square)")
    parser.add_argument("--coils", type=int, default=4)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--accel", type=int, default=4)
    parser.add_argument("--acs-lines", type=int, default=8)
    parser.add_argument("--base-channels", type=int, default=8)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("desk_experiment"))
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    cf = args.acs_lines / args.size
    spec = PhantomSpec(h=args.size, w=args.size, n_coils=args.coils, n_ellipses=5, seed=0)
    print(f"generating {args.volumes * args.slices} samples ...")
    make_dataset(args.volumes, args.slices, spec, seed=42, out_dir=args.out / "data")
    samples = load_samples(args.out / "data/manifest.json")

    net_cfg = GrappaNetConfig(coils=args.coils, base_channels=args.base_channels, depth=2,
                              kernel_rows=3, kernel_cols=5)
    abl_cfg = AblationConfig(coils=args.coils, base_channels=2 * args.base_channels, depth=2)
    print(f"params: grappanet {grappanet_param_count(net_cfg)}, image-unet {ablation_param_count(abl_cfg)}")
    run_cfg = TrainConfig(epochs=args.epochs, accel=args.accel, center_fraction=cf, seed=args.seed)

    print("training grappanet ...")
    net_store, net_rec = train(samples, net_cfg, run_cfg, log_path=args.out / "grappanet_log.csv")
    print("training image-unet ablation ...")
    abl_store, abl_rec = train(samples, abl_cfg, run_cfg, log_path=args.out / "image_unet_log.csv")

    test_set = [s for s in samples if s.split == "test"]
    mask_seed = mix64(run_cfg.seed, 0x7E57)
    table = {name: {"ssim": [], "nmse": [], "psnr": []} for name in ("zero-filled", "image-unet", "grappanet")}
    for s in test_set:
        mask = make_random_mask(args.size, args.accel, cf, seed=mask_seed)
        k_u = apply_mask(s.kspace, mask)
        data_range = float(s.target.max())
        recons = {
            "zero-filled": zero_filled_recon(k_u),
            "image-unet": np.asarray(forward_model(k_u, mask, abl_store.params, abl_cfg, np.float32).image.value),
            "grappanet": np.asarray(forward_model(k_u, mask, net_store.params, net_cfg, np.float32).image.value),
        }
        for name, img in recons.items():
            table[name]["ssim"].append(ssim(img, s.target, data_range))
            table[name]["nmse"].append(nmse(img, s.target))
            table[name]["psnr"].append(psnr(img, s.target, data_range))

    rows = []
    for name in ("zero-filled", "image-unet", "grappanet"):
        rows.append({
            "model": name,
            "ssim": float(np.mean(table[name]["ssim"])),
            "nmse": float(np.mean(table[name]["nmse"])),
            "psnr": float(np.mean(table[name]["psnr"])),
        })
        r = rows[-1]
        print(f"{name:12s} ssim {r['ssim']:.4f}  nmse {r['nmse']:.3e}  psnr {r['psnr']:.2f} dB")

    with open(args.out / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["model", "ssim", "nmse", "psnr"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.out / 'results.csv'}")


if __name__ == "__main__":
    main()
