"""Shared test oracles: central finite differences and synthetic data."""

import numpy as np

from ucmnet.tensor import no_grad

H_FD = 1e-5


def numeric_grad(loss_fn, param, h=H_FD):
    """Central-difference gradient of a scalar re-evaluated loss.

    ``param`` is a Tensor whose float64 .data is perturbed in place;
    ``loss_fn`` re-runs the forward pass and returns the scalar loss value.
    Stays independent of the autograd path: only forward evaluations.
    """
    assert param.data.dtype == np.float64, "finite differences need float64"
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
    return grad


def max_rel_error(analytic, numeric):
    """max |a - n| / max(1, |n|), elementwise."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n))))


def assert_grad_close(analytic, numeric, tol=1e-4, what=""):
    err = max_rel_error(analytic, numeric)
    assert err < tol, f"gradient mismatch{' for ' + what if what else ''}: {err:.3e} >= {tol}"


def away_from_kinks(rng, shape, margin=0.05):
    """Random values bounded away from zero (safe for relu-like kinks)."""
    x = rng.normal(size=shape)
    x = np.where(np.abs(x) < margin, x + np.sign(x) * margin + (x == 0) * margin, x)
    return x


def make_circle_sample(rng, size=64):
    """One synthetic sample: bright disc on a dark noisy background."""
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = rng.uniform(0.3 * size, 0.7 * size, size=2)
    r = rng.uniform(0.15 * size, 0.3 * size)
    disc = ((yy - cy) ** 2 + (xx - cx) ** 2) <= r * r
    image = rng.uniform(0.0, 0.15, size=(3, size, size)).astype(np.float32)
    tint = rng.uniform(0.6, 0.9, size=3).astype(np.float32)
    image += disc[None].astype(np.float32) * tint[:, None, None]
    image = np.clip(image, 0.0, 1.0)
    mask = disc[None].astype(np.float32)
    return image, mask


def write_circle_dataset(root, n=8, size=64, seed=7):
    """PNG images + masks + a manifest where train == test == all samples."""
    import csv
    import os

    from PIL import Image

    rng = np.random.default_rng(seed)
    os.makedirs(root, exist_ok=True)
    rows = []
    for i in range(n):
        image, mask = make_circle_sample(rng, size)
        img8 = (image * 255).round().astype(np.uint8).transpose(1, 2, 0)
        msk8 = (mask[0] * 255).astype(np.uint8)
        img_name, msk_name = f"img_{i}.png", f"mask_{i}.png"
        Image.fromarray(img8).save(os.path.join(root, img_name))
        Image.fromarray(msk8, mode="L").save(os.path.join(root, msk_name))
        rows.append((img_name, msk_name))
    manifest = os.path.join(root, "manifest.csv")
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "mask", "split"])
        for img_name, msk_name in rows:
            w.writerow([img_name, msk_name, "train"])
        for img_name, msk_name in rows:
            w.writerow([img_name, msk_name, "test"])
    return manifest
