"""RMSProp training loop for the reconstruction networks.

Masks are regenerated every epoch from per-sample seeds (fresh random
sampling patterns per pass over the data); validation uses one fixed mask
seed shared across samples and epochs. Training is deterministic given the
seeds: samples iterate in manifest order, batch gradients average in that
order, and parameters update in sorted-name order.

Checkpoints are CFL tensors per parameter (float32) plus a JSON manifest
naming every parameter, its shape and dtype, the optimizer-state files, the
config, seed, and epoch.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autograd as ag
from .errors import InputError, TrainingError
from .fileio import load_manifest, read_cfl, write_cfl
from .grappanet import (
    AblationConfig,
    ForwardResult,
    GrappaNetConfig,
    grappanet_forward,
    image_unet_forward,
    init_ablation_params,
    init_grappanet_params,
)
from .metrics import nmse as metric_nmse
from .metrics import psnr as metric_psnr
from .metrics import ssim as metric_ssim
from .rng import mix64
from .sampling import apply_mask, make_random_mask
from .unet import INIT_SCHEME

_EPOCH_TAG = 0x7A11
_VAL_TAG = 0xE7A1


def default_center_fraction(accel: int) -> float:
    """0.08 for accelerations up to 4x, 0.04 above (8x-style masks)."""
    return 0.08 if accel <= 4 else 0.04


@dataclass
class ParamStore:
    params: dict[str, np.ndarray]
    rms: dict[str, np.ndarray]
    scheme: str
    seed: int

    @classmethod
    def initialize(cls, params: dict[str, np.ndarray], seed: int) -> "ParamStore":
        return cls(
            params=params,
            rms={name: np.zeros_like(arr) for name, arr in params.items()},
            scheme=INIT_SCHEME,
            seed=seed,
        )

    def copy(self) -> "ParamStore":
        return ParamStore(
            params={n: a.copy() for n, a in self.params.items()},
            rms={n: a.copy() for n, a in self.rms.items()},
            scheme=self.scheme,
            seed=self.seed,
        )


def rmsprop_step(
    store: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float = 3e-4,
    decay: float = 0.99,
    eps: float = 1e-8,
) -> ParamStore:
    """acc <- decay*acc + (1-decay)*g^2; p <- p - lr*g/(sqrt(acc)+eps)."""
    for name in sorted(store.params):
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != store.params[name].shape:
            raise InputError(f"gradient shape {g.shape} != param shape {store.params[name].shape} for {name}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        acc = store.rms[name]
        acc *= decay
        acc += (1.0 - decay) * g * g
        store.params[name] -= lr * g / (np.sqrt(acc) + eps)
        if not np.all(np.isfinite(store.params[name])):
            raise TrainingError(f"non-finite parameter {name!r} after update")
    return store


@dataclass
class Sample:
    id: str
    kspace: np.ndarray  # (coils, H, W) complex64, fully sampled
    target: np.ndarray | None  # (H, W) real ground truth
    seed: int
    contrast: str
    split: str


def load_samples(manifest_path: str | Path) -> list[Sample]:
    manifest = load_manifest(manifest_path)
    base = Path(manifest_path).parent
    samples = []
    for rec in manifest["samples"]:
        kspace = read_cfl(base / rec["kspace_path"])
        target = None
        if rec.get("image_path"):
            target = np.ascontiguousarray(read_cfl(base / rec["image_path"]).real)
        samples.append(
            Sample(
                id=rec["id"],
                kspace=kspace,
                target=target,
                seed=int(rec.get("seed", 0)),
                contrast=rec["contrast"],
                split=rec["split"],
            )
        )
    return samples


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 1
    lr: float = 3e-4
    decay: float = 0.99
    eps: float = 1e-8
    accel: int = 4
    center_fraction: float | None = None
    l1_weight: float = 0.001
    seed: int = 0
    precision: str = "f32"
    fixed_masks: bool = False  # freeze per-sample masks across epochs (overfit smoke tests)

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    @property
    def cf(self) -> float:
        return self.center_fraction if self.center_fraction is not None else default_center_fraction(self.accel)


def init_model_params(model_cfg, seed: int, dtype) -> dict[str, np.ndarray]:
    if isinstance(model_cfg, GrappaNetConfig):
        return init_grappanet_params(model_cfg, seed, dtype=dtype)
    if isinstance(model_cfg, AblationConfig):
        return init_ablation_params(model_cfg, seed, dtype=dtype)
    raise InputError(f"unknown model config {type(model_cfg).__name__}")


def forward_model(k_under, mask, raw_params, model_cfg, dtype) -> ForwardResult:
    if isinstance(model_cfg, GrappaNetConfig):
        return grappanet_forward(k_under, mask, raw_params, model_cfg, dtype=dtype)
    if isinstance(model_cfg, AblationConfig):
        return image_unet_forward(k_under, mask, raw_params, model_cfg, dtype=dtype)
    raise InputError(f"unknown model config {type(model_cfg).__name__}")


def _sample_metrics(image: np.ndarray, target: np.ndarray) -> dict[str, float]:
    rng = float(target.max())
    return {
        "ssim": metric_ssim(image, target, rng),
        "nmse": metric_nmse(image, target),
        "psnr": metric_psnr(image, target, rng),
    }


def _epoch_mask_seed(sample: Sample, epoch: int, cfg: TrainConfig) -> int:
    if cfg.fixed_masks:
        return mix64(sample.seed, _EPOCH_TAG)
    return mix64(sample.seed, epoch, _EPOCH_TAG)


def train(
    samples: list[Sample],
    model_cfg,
    cfg: TrainConfig,
    log_path: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
) -> tuple[ParamStore, list[dict]]:
    """Train on the 'train' split, evaluate on 'val' each epoch.

    Returns the final ParamStore and per-epoch metric rows
    (epoch, split, loss, ssim, nmse, psnr). Non-finite losses abort with the
    last completed epoch checkpointed (when checkpoint_dir is given).
    """
    train_set = [s for s in samples if s.split == "train"]
    val_set = [s for s in samples if s.split == "val"]
    if not train_set:
        raise InputError("no training samples in dataset")
    for s in train_set + val_set:
        if s.target is None:
            raise InputError(f"sample {s.id} has no ground-truth image")

    dtype = cfg.dtype
    store = ParamStore.initialize(init_model_params(model_cfg, cfg.seed, dtype), cfg.seed)
    records: list[dict] = []
    last_good = store.copy()

    def run_sample(sample: Sample, mask_seed: int, with_grad: bool):
        width = sample.kspace.shape[-1]
        mask = make_random_mask(width, cfg.accel, cfg.cf, seed=mask_seed)
        k_under = apply_mask(sample.kspace, mask)
        result = forward_model(k_under, mask, store.params, model_cfg, dtype)
        loss = ag.reconstruction_loss(result.image, sample.target.astype(dtype), cfg.l1_weight)
        if with_grad:
            ag.backward(loss)
        return result, loss

    completed = -1
    try:
        for epoch in range(cfg.epochs):
            train_losses, train_metrics = [], []
            for start in range(0, len(train_set), cfg.batch_size):
                batch = train_set[start : start + cfg.batch_size]
                grads: dict[str, np.ndarray] = {}
                for sample in batch:
                    result, loss = run_sample(sample, _epoch_mask_seed(sample, epoch, cfg), with_grad=True)
                    value = float(loss.value)
                    if not math.isfinite(value):
                        raise TrainingError(f"non-finite loss on sample {sample.id} (epoch {epoch})")
                    train_losses.append(value)
                    train_metrics.append(_sample_metrics(np.asarray(result.image.value), sample.target))
                    for name, var in result.params.items():
                        g = var.grad if var.grad is not None else np.zeros_like(var.value)
                        if name in grads:
                            grads[name] = grads[name] + g
                        else:
                            grads[name] = g.copy()
                scale = 1.0 / len(batch)
                rmsprop_step(store, {n: g * scale for n, g in grads.items()}, cfg.lr, cfg.decay, cfg.eps)

            records.append(_epoch_row(epoch, "train", train_losses, train_metrics))
            if val_set:
                val_losses, val_metrics = [], []
                val_seed = mix64(cfg.seed, _VAL_TAG)
                for sample in val_set:
                    result, loss = run_sample(sample, val_seed, with_grad=False)
                    val_losses.append(float(loss.value))
                    val_metrics.append(_sample_metrics(np.asarray(result.image.value), sample.target))
                records.append(_epoch_row(epoch, "val", val_losses, val_metrics))
            last_good = store.copy()
            completed = epoch
    except TrainingError:
        if checkpoint_dir is not None:
            save_checkpoint(checkpoint_dir, last_good, model_cfg, cfg, epoch=completed)
        raise

    if log_path is not None:
        write_metric_log(log_path, records)
    if checkpoint_dir is not None:
        save_checkpoint(checkpoint_dir, store, model_cfg, cfg, epoch=cfg.epochs - 1)
    return store, records


def _epoch_row(epoch: int, split: str, losses: list[float], metrics: list[dict]) -> dict:
    finite_psnr = [m["psnr"] for m in metrics if math.isfinite(m["psnr"])]
    return {
        "epoch": epoch,
        "split": split,
        "loss": float(np.mean(losses)),
        "ssim": float(np.mean([m["ssim"] for m in metrics])),
        "nmse": float(np.mean([m["nmse"] for m in metrics])),
        "psnr": float(np.mean(finite_psnr)) if finite_psnr else math.inf,
    }


def write_metric_log(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "split", "loss", "ssim", "nmse", "psnr"])
        for row in records:
            writer.writerow([row["epoch"], row["split"], repr(row["loss"]), repr(row["ssim"]),
                             repr(row["nmse"]), repr(row["psnr"])])


def _config_record(model_cfg, cfg: TrainConfig) -> dict:
    return {
        "model": type(model_cfg).__name__,
        "model_config": asdict(model_cfg),
        "train_config": asdict(cfg),
    }


def save_checkpoint(directory: str | Path, store: ParamStore, model_cfg, cfg: TrainConfig, epoch: int) -> None:
    out = Path(directory)
    (out / "params").mkdir(parents=True, exist_ok=True)
    (out / "rms").mkdir(parents=True, exist_ok=True)
    entries = []
    for name in sorted(store.params):
        arr = store.params[name]
        write_cfl(out / "params" / name, arr.astype(np.float32))
        write_cfl(out / "rms" / name, store.rms[name].astype(np.float32))
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": str(arr.dtype),
                "param_path": f"params/{name}.cfl",
                "rms_path": f"rms/{name}.cfl",
            }
        )
    manifest = {
        "scheme": store.scheme,
        "seed": store.seed,
        "epoch": epoch,
        "config": _config_record(model_cfg, cfg),
        "params": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_checkpoint(directory: str | Path) -> tuple[ParamStore, dict]:
    out = Path(directory)
    manifest = json.loads((out / "manifest.json").read_text())
    params: dict[str, np.ndarray] = {}
    rms: dict[str, np.ndarray] = {}
    for entry in manifest["params"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        params[entry["name"]] = read_cfl(out / entry["param_path"]).real.astype(dtype).reshape(shape)
        rms[entry["name"]] = read_cfl(out / entry["rms_path"]).real.astype(dtype).reshape(shape)
    store = ParamStore(params=params, rms=rms, scheme=manifest["scheme"], seed=manifest["seed"])
    return store, manifest


def model_config_from_record(record: dict):
    kind = record["model"]
    kwargs = record["model_config"]
    if kind == "GrappaNetConfig":
        return GrappaNetConfig(**kwargs)
    if kind == "AblationConfig":
        return AblationConfig(**kwargs)
    raise InputError(f"unknown model kind {kind!r} in checkpoint")
