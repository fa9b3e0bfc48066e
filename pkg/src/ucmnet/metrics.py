"""Evaluation metrics: per-image mIoU/mDice and their pooled * variants.

Two conventions are reported side by side:
  mIoU, mDice    mean over images of the per-image scores (Dice in its
                 smoothed form, IoU raw with the empty-vs-empty case scored
                 as a perfect 1.0)
  mIoU*, mDice*  single scores from the confusion counts pooled over the
                 whole split
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred_probs: np.ndarray, target: np.ndarray,
              threshold: float = 0.5) -> ConfusionCounts:
    """Binarize at ``threshold`` (ties count positive) and count pixels."""
    pred_probs = np.asarray(pred_probs)
    target = np.asarray(target)
    if pred_probs.shape != target.shape:
        raise ValueError(f"shape mismatch {pred_probs.shape} vs {target.shape}")
    pred = pred_probs >= threshold
    pos = target >= 0.5
    tp = int(np.count_nonzero(pred & pos))
    fp = int(np.count_nonzero(pred & ~pos))
    fn = int(np.count_nonzero(~pred & pos))
    tn = int(np.count_nonzero(~pred & ~pos))
    return ConfusionCounts(tp, fp, fn, tn)


def iou_from_counts(c: ConfusionCounts) -> float:
    union = c.tp + c.fp + c.fn
    if union == 0:
        return 1.0
    return c.tp / union


def dice_smooth_from_counts(c: ConfusionCounts, smooth: float = 1.0) -> float:
    # 2*intersection + s over (pred pixels + target pixels + s)
    return (2.0 * c.tp + smooth) / ((c.tp + c.fp) + (c.tp + c.fn) + smooth)


@dataclass
class MetricsReport:
    n_images: int
    miou: float
    mdice: float
    miou_star: float
    mdice_star: float
    pooled: ConfusionCounts
    per_image: list

    def row(self, split: str = "test"):
        return {"split": split, "n_images": self.n_images,
                "mIoU": self.miou, "mDice": self.mdice,
                "mIoU_star": self.miou_star, "mDice_star": self.mdice_star}

    def write_csv(self, path, split: str = "test"):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["split", "n_images", "mIoU",
                                               "mDice", "mIoU_star", "mDice_star"])
            w.writeheader()
            w.writerow(self.row(split))

    def __str__(self):
        return (f"n={self.n_images} mIoU={self.miou:.4f} mDice={self.mdice:.4f} "
                f"mIoU*={self.miou_star:.4f} mDice*={self.mdice_star:.4f}")


def metrics_report(per_image, threshold: float = 0.5,
                   smooth: float = 1.0) -> MetricsReport:
    """Score a list of (pred_probs, target) pairs.

    Accepts ConfusionCounts entries directly as well, so pooled counts can be
    re-scored without the pixel data.
    """
    per_image = list(per_image)
    if not per_image:
        raise ValueError("metrics_report needs at least one image")
    counts = []
    for item in per_image:
        if isinstance(item, ConfusionCounts):
            counts.append(item)
        else:
            pred, target = item
            counts.append(confusion(pred, target, threshold))
    ious = [iou_from_counts(c) for c in counts]
    dices = [dice_smooth_from_counts(c, smooth) for c in counts]
    pooled = ConfusionCounts(0, 0, 0, 0)
    for c in counts:
        pooled = pooled + c
    denom_star = pooled.tp + pooled.fp + pooled.fn
    miou_star = 1.0 if denom_star == 0 else pooled.tp / denom_star
    mdice_star = 1.0 if denom_star == 0 else \
        2.0 * pooled.tp / (2.0 * pooled.tp + pooled.fp + pooled.fn)
    # fsum keeps the means exactly invariant to image order
    return MetricsReport(
        n_images=len(counts),
        miou=math.fsum(ious) / len(ious),
        mdice=math.fsum(dices) / len(dices),
        miou_star=miou_star,
        mdice_star=mdice_star,
        pooled=pooled,
        per_image=counts,
    )
