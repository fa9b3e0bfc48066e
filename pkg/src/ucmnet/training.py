"""Training recipe: AdamW + cosine schedule, per-epoch evaluation,
best/final checkpointing, deterministic seeding."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import DatasetManifest, batches
from .losses import LossConfig, group_loss
from .metrics import MetricsReport, metrics_report
from .optim import AdamW, cosine_lr
from .serialize import save_checkpoint
from .tensor import Tensor, backward, no_grad


class NumericAbort(RuntimeError):
    """Raised when the loss goes non-finite; carries (epoch, batch_id)."""

    def __init__(self, epoch, batch_ids, value):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch_ids}")
        self.epoch = epoch
        self.batch_ids = batch_ids


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 8
    eval_batch: int = 1
    lr: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    t_max: int = 50
    eta_min: float = 1e-5
    scheduler_mode: str = "periodic"
    seed: int = 0
    checkpoint_dir: str = "checkpoints"
    augment: bool = True
    rotation_degrees: float = 360.0
    hflip_p: float = 0.5
    vflip_p: float = 0.5
    threshold: float = 0.5

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        return self


HISTORY_FIELDS = ["epoch", "lr", "train_loss", "test_miou", "test_mdice",
                  "test_miou_star", "test_mdice_star"]


def evaluate(model, manifest: DatasetManifest, split: str, input_size,
             threshold: float = 0.5, smooth: float = 1.0,
             batch_size: int = 1) -> MetricsReport:
    """Eval-mode pass over a split (batch size 1 by default)."""
    model.eval()
    pairs = []
    with no_grad():
        for batch in batches(manifest, split, batch_size=batch_size,
                             size=input_size, augment_train=False):
            out, _ = model(Tensor(batch.images))
            probs = T.sigmoid(out).numpy()
            for i in range(probs.shape[0]):
                pairs.append((probs[i, 0], batch.masks[i, 0]))
    return metrics_report(pairs, threshold=threshold, smooth=smooth)


def train(model, manifest: DatasetManifest, input_size, cfg: TrainConfig,
          loss_cfg: LossConfig | None = None, log=None):
    """Run the full recipe; returns (history, best) where best holds the
    best-test-mIoU epoch and checkpoint path.

    Per epoch: train-mode pass over shuffled batches (forward, group loss,
    backward, AdamW step at the cosine-scheduled rate), then a test-split
    evaluation. The best checkpoint is kept by test mIoU; the final state is
    saved unconditionally. History rows land in checkpoint_dir/history.csv.
    """
    cfg.validate()
    loss_cfg = (loss_cfg or LossConfig()).validate()
    os.makedirs(cfg.checkpoint_dir, exist_ok=True)
    optimizer = AdamW(list(model.named_parameters()), lr=cfg.lr,
                      weight_decay=cfg.weight_decay, beta1=cfg.beta1,
                      beta2=cfg.beta2, eps=cfg.adam_eps)
    history = []
    best = {"miou": -1.0, "epoch": -1,
            "path": os.path.join(cfg.checkpoint_dir, "best.ucmw")}
    final_path = os.path.join(cfg.checkpoint_dir, "final.ucmw")
    history_path = os.path.join(cfg.checkpoint_dir, "history.csv")

    with open(history_path, "w", newline="") as hist_fh:
        writer = csv.DictWriter(hist_fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for epoch in range(cfg.epochs):
            lr = cosine_lr(epoch, cfg.lr, cfg.t_max, cfg.eta_min,
                           cfg.scheduler_mode)
            model.train()
            losses = []
            for batch in batches(manifest, "train", cfg.batch_size,
                                 seed=cfg.seed, epoch=epoch, size=input_size,
                                 augment_train=cfg.augment,
                                 rotation_degrees=cfg.rotation_degrees,
                                 hflip_p=cfg.hflip_p, vflip_p=cfg.vflip_p):
                optimizer.zero_grad()
                out, stages = model(Tensor(batch.images))
                loss = group_loss(out, stages, Tensor(batch.masks), loss_cfg)
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericAbort(epoch, batch.ids, value)
                backward(loss)
                optimizer.step(lr=lr)
                losses.append(value)
            report = evaluate(model, manifest, "test", input_size,
                              threshold=cfg.threshold, smooth=loss_cfg.smooth,
                              batch_size=cfg.eval_batch)
            row = {"epoch": epoch, "lr": f"{lr:.10g}",
                   "train_loss": f"{float(np.mean(losses)):.8f}",
                   "test_miou": f"{report.miou:.8f}",
                   "test_mdice": f"{report.mdice:.8f}",
                   "test_miou_star": f"{report.miou_star:.8f}",
                   "test_mdice_star": f"{report.mdice_star:.8f}"}
            writer.writerow(row)
            hist_fh.flush()
            history.append(row)
            if log:
                log(f"epoch {epoch:3d}  lr {lr:.6f}  loss {float(np.mean(losses)):.5f}  "
                    f"mIoU {report.miou:.4f}  mDice {report.mdice:.4f}")
            if report.miou > best["miou"]:
                best.update(miou=report.miou, epoch=epoch)
                save_checkpoint(model, optimizer, best["path"],
                                extra={"epoch": epoch, "best_miou": report.miou})
    save_checkpoint(model, optimizer, final_path,
                    extra={"epoch": cfg.epochs - 1, "best_miou": best["miou"]})
    best["final_path"] = final_path
    best["history_path"] = history_path
    return history, best
