#!/usr/bin/env python3
"""Produce a gallery of PNGs for one phantom: ground truth, zero-filled,
GRAPPA (R=2), TV compressed sensing (R=4), and a dithered version of the
GRAPPA result."""

import argparse
from pathlib import Path

import numpy as np

from parallax.fileio import save_png
from parallax.fourier import ifft2c
from parallax.grappa import grappa_reconstruct
from parallax.phantom import PhantomSpec, fully_sampled_mask, make_phantom, simulate_acquisition
from parallax.postprocess import dither, sigma_for_contrast
from parallax.recon import cs_tv_reconstruct, estimate_sensitivities, rss, zero_filled_recon
from parallax.sampling import make_equispaced_mask, make_random_mask


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--coils", type=int, default=15)
    parser.add_argument("--contrast", choices=("pd", "pdfs"), default="pd")
    parser.add_argument("--out", type=Path, default=Path("gallery"))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    spec = PhantomSpec(n_coils=args.coils, seed=args.seed, contrast=args.contrast)
    x, maps = make_phantom(spec)
    k_full = simulate_acquisition(x, maps, fully_sampled_mask(spec.w), 0.0, args.seed)
    truth = zero_filled_recon(k_full)
    save_png(args.out / "truth.png", truth)

    m2 = make_equispaced_mask(spec.w, 2, 24 / spec.w, seed=args.seed)
    k2 = np.where(m2.sampled, k_full, 0)
    save_png(args.out / "zero_filled_r2.png", zero_filled_recon(k2))
    grappa_img = rss(ifft2c(grappa_reconstruct(k2, m2, accel=2)))
    save_png(args.out / "grappa_r2.png", grappa_img)

    m4 = make_random_mask(spec.w, 4, 0.08, seed=args.seed)
    k4 = np.where(m4.sampled, k_full, 0)
    save_png(args.out / "zero_filled_r4.png", zero_filled_recon(k4))
    est = estimate_sensitivities(k4, m4)
    cs_img, _ = cs_tv_reconstruct(k4, m4, est, iters=200)
    save_png(args.out / "cs_tv_r4.png", np.abs(cs_img))

    sigma = sigma_for_contrast(args.contrast)
    save_png(args.out / "grappa_r2_dithered.png", dither(grappa_img, sigma=sigma, seed=args.seed))
    print(f"wrote 6 PNGs to {args.out}")


if __name__ == "__main__":
    main()
