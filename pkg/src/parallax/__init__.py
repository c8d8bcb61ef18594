"""parallax: multi-coil MRI reconstruction sandbox.

Classical parallel imaging (GRAPPA), TV compressed sensing, and a
differentiable GrappaNet pipeline with a from-scratch autograd, verified
end-to-end on synthetic phantoms.
"""

__version__ = "0.1.0"

from .fourier import fft2c, ifft2c
from .sampling import SamplingMask, apply_mask, data_consistency, make_equispaced_mask, make_random_mask
from .grappa import GrappaKernel, calibrate, grappa_reconstruct
from .recon import cs_tv_reconstruct, estimate_sensitivities, rss, zero_filled_recon
from .metrics import nmse, psnr, ssim

__all__ = [
    "fft2c",
    "ifft2c",
    "SamplingMask",
    "apply_mask",
    "data_consistency",
    "make_random_mask",
    "make_equispaced_mask",
    "GrappaKernel",
    "calibrate",
    "grappa_reconstruct",
    "rss",
    "zero_filled_recon",
    "estimate_sensitivities",
    "cs_tv_reconstruct",
    "nmse",
    "psnr",
    "ssim",
]
