"""End-to-end miniature: synthesize a dataset, train, evaluate, predict.

Run: python demos/05_overfit_circles.py          (~15 s on one core)
"""

import csv
import os
import tempfile

import numpy as np
from PIL import Image

from ucmnet import NetworkConfig, build_variant
from ucmnet.data import read_manifest
from ucmnet.training import TrainConfig, evaluate, train


def write_circle_dataset(root, n=8, size=64, seed=7):
    """Bright discs on dark noise; the manifest lists every sample in both splits."""
    rng = np.random.default_rng(seed)
    os.makedirs(root, exist_ok=True)
    yy, xx = np.mgrid[0:size, 0:size]
    names = []
    for i in range(n):
        cy, cx = rng.uniform(0.3 * size, 0.7 * size, size=2)
        r = rng.uniform(0.15 * size, 0.3 * size)
        disc = ((yy - cy) ** 2 + (xx - cx) ** 2) <= r * r
        image = rng.uniform(0.0, 0.15, size=(3, size, size)).astype(np.float32)
        image += disc[None] * rng.uniform(0.6, 0.9, size=3).astype(np.float32)[:, None, None]
        img8 = (np.clip(image, 0, 1) * 255).round().astype(np.uint8).transpose(1, 2, 0)
        Image.fromarray(img8).save(os.path.join(root, f"img_{i}.png"))
        Image.fromarray(disc.astype(np.uint8) * 255, mode="L").save(
            os.path.join(root, f"mask_{i}.png"))
        names.append((f"img_{i}.png", f"mask_{i}.png"))
    path = os.path.join(root, "manifest.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "mask", "split"])
        for split in ("train", "test"):
            for img, msk in names:
                w.writerow([img, msk, split])
    return path


root = tempfile.mkdtemp(prefix="circles_")
manifest = read_manifest(write_circle_dataset(os.path.join(root, "data"),
                                              n=8, size=64, seed=7))
print(f"synthetic dataset in {root}: 8 images of bright discs, masks = discs")

model = build_variant(NetworkConfig(input_size=(64, 64)), seed=0)
print(f"model: {model.num_parameters()} parameters")

cfg = TrainConfig(epochs=60, checkpoint_dir=os.path.join(root, "ckpt"), seed=0)
history, best = train(model, manifest, (64, 64), cfg,
                      log=lambda s: print("  " + s) if int(s.split()[1]) % 15 == 0 else None)
print(f"best test mIoU {best['miou']:.4f} at epoch {best['epoch']}")

report = evaluate(model, manifest, "train", (64, 64))
print(f"final train-split metrics: {report}")

# render one prediction next to its target
from ucmnet import tensor as T
from ucmnet.data import batches
from ucmnet.tensor import Tensor, no_grad

model.eval()
batch = next(iter(batches(manifest, "test", 1, size=(64, 64))))
with no_grad():
    logits, _ = model(Tensor(batch.images))
probs = T.sigmoid(logits).numpy()[0, 0]
pred = (probs >= 0.5).astype(np.uint8) * 255
truth = (batch.masks[0, 0] * 255).astype(np.uint8)
side_by_side = np.concatenate([truth, np.full((64, 4), 128, np.uint8), pred], axis=1)
out_png = os.path.join(root, "pred_vs_truth.png")
Image.fromarray(side_by_side, mode="L").save(out_png)
agree = float((pred == truth).mean())
print(f"wrote {out_png} (truth | prediction), pixel agreement {agree:.1%}")
