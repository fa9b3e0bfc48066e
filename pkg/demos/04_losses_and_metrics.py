"""The group loss and the two metric conventions.

Run: python demos/04_losses_and_metrics.py
"""

import numpy as np

from ucmnet import tensor as T
from ucmnet.losses import LossConfig, bce, dice_loss, group_loss, squared_dice_loss
from ucmnet.metrics import metrics_report
from ucmnet.tensor import Tensor


def t(v):
    return Tensor(np.asarray(v, np.float32))


print("== the squared variant punishes partial overlap harder ==")
pred = t([1.0, 0.0])
target = t([1.0, 1.0])
print(f"dice loss          = {dice_loss(pred, target, 1.0).item():.3f}")
print(f"squared dice loss  = {squared_dice_loss(pred, target, 1.0).item():.3f}")
print(f"bce([0.9,0.2] vs [1,0]) = {bce(t([0.9, 0.2]), t([1.0, 0.0])).item():.5f}")

print("\n== group loss = output head + weighted stage heads ==")
rng = np.random.default_rng(0)
target_map = t((rng.random((1, 1, 32, 32)) > 0.5).astype(np.float32))
out_logits = t(rng.normal(size=(1, 1, 32, 32)).astype(np.float32))
stage_logits = [t(rng.normal(size=(1, 1, 2 << i, 2 << i)).astype(np.float32))
                for i in range(5)]
cfg = LossConfig()
full = group_loss(out_logits, stage_logits, target_map, cfg).item()
head_only = group_loss(out_logits, [], target_map, cfg).item()
print(f"output head alone: {head_only:.4f}")
print(f"with 5 stage heads (weights {cfg.stage_weights}): {full:.4f}")

print("\n== per-image means vs pooled counts ==")
# one easy image (small lesion, found) and one hard image (missed half)
easy_pred = np.zeros((8, 8))
easy_pred[:2, :2] = 1.0
easy_target = easy_pred.copy()
hard_pred = np.zeros((8, 8))
hard_pred[:, :4] = 1.0
hard_target = np.ones((8, 8))
r = metrics_report([(easy_pred, easy_target), (hard_pred, hard_target)])
print(f"per-image mIoU  = {r.miou:.4f}   (mean of 1.0 and 0.5)")
print(f"pooled   mIoU*  = {r.miou_star:.4f}   (the big image dominates)")
print(f"per-image mDice = {r.mdice:.4f}, pooled mDice* = {r.mdice_star:.4f}")
