"""Dataset ingestion: manifest CSV, resizing, augmentation, splits, batches.

A manifest is a UTF-8 CSV with header ``image,mask,split`` (split values
``train``/``test``; the column may be absent for an unsplit listing).
Images load as [3,H,W] float32 in [0,1]; masks as strictly binary [1,H,W].
No dataset mean/std statistics are applied.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage


class DataError(RuntimeError):
    pass


def derive_seed(seed: int, purpose: str, index: int = 0) -> int:
    """Stable sub-seed from (seed, purpose, index) via sha256."""
    digest = hashlib.sha256(f"{seed}:{purpose}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class ManifestRecord:
    image: str
    mask: str
    split: str = ""


@dataclass
class DatasetManifest:
    records: list
    root: str = ""

    def of_split(self, split):
        return [r for r in self.records if r.split == split]


@dataclass
class Sample:
    image: np.ndarray   # [3,H,W] float32 in [0,1]
    mask: np.ndarray    # [1,H,W] float32 in {0,1}
    id: str


@dataclass
class Batch:
    images: np.ndarray  # [B,3,H,W]
    masks: np.ndarray   # [B,1,H,W]
    ids: list


def read_manifest(path, root=None) -> DatasetManifest:
    if not os.path.exists(path):
        raise DataError(f"manifest not found: {path}")
    root = root if root is not None else os.path.dirname(os.path.abspath(path))
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "image" not in reader.fieldnames \
                or "mask" not in reader.fieldnames:
            raise DataError(f"manifest {path} must have an 'image,mask[,split]' header")
        for row in reader:
            records.append(ManifestRecord(row["image"], row["mask"],
                                          (row.get("split") or "").strip()))
    if not records:
        raise DataError(f"manifest {path} has no records")
    return DatasetManifest(records, root)


def write_manifest(manifest: DatasetManifest, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "mask", "split"])
        for r in manifest.records:
            w.writerow([r.image, r.mask, r.split])


def make_split(records, ratio: float = 0.7, seed: int = 0) -> list:
    """Deterministic shuffle then assign the first ceil(ratio*n) to train.

    Records that already carry a split keep it (a pre-split manifest passes
    through unchanged).
    """
    records = list(records)
    if not records:
        raise DataError("cannot split an empty record list")
    if all(r.split for r in records):
        return records
    rng = np.random.default_rng(derive_seed(seed, "split"))
    order = rng.permutation(len(records))
    n_train = int(np.ceil(ratio * len(records)))
    split_of = {}
    for rank, idx in enumerate(order):
        split_of[int(idx)] = "train" if rank < n_train else "test"
    return [ManifestRecord(r.image, r.mask, r.split or split_of[i])
            for i, r in enumerate(records)]


def _resolve(root, path):
    return path if os.path.isabs(path) else os.path.join(root, path)


def load_sample(image_path, mask_path, size=(256, 256), mask_threshold=127) -> Sample:
    """Bilinear-resize the RGB image to ``size`` and scale to [0,1]; nearest-
    resize the mask and binarize above ``mask_threshold``."""
    try:
        img = Image.open(image_path).convert("RGB")
        msk = Image.open(mask_path).convert("L")
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read sample ({image_path}, {mask_path}): {exc}") from exc
    if img.size[0] == 0 or img.size[1] == 0:
        raise DataError(f"empty image: {image_path}")
    h, w = size
    img = img.resize((w, h), Image.BILINEAR)
    msk = msk.resize((w, h), Image.NEAREST)
    image = np.asarray(img, dtype=np.float32).transpose(2, 0, 1) / 255.0
    mask = (np.asarray(msk, dtype=np.uint8) > mask_threshold).astype(np.float32)[None]
    return Sample(image, mask, os.path.splitext(os.path.basename(image_path))[0])


def augment(sample: Sample, rng: np.random.Generator,
            rotation_degrees: float = 360.0,
            hflip_p: float = 0.5, vflip_p: float = 0.5) -> Sample:
    """Random flips and rotation; image and mask get the same transform.

    Rotation angle is uniform in [0, rotation_degrees); image resampled
    bilinearly, mask nearest, zero fill outside, so masks stay binary.
    """
    image, mask = sample.image, sample.mask
    if rng.random() < hflip_p:
        image = image[:, :, ::-1]
        mask = mask[:, :, ::-1]
    if rng.random() < vflip_p:
        image = image[:, ::-1, :]
        mask = mask[:, ::-1, :]
    angle = float(rng.uniform(0.0, rotation_degrees)) if rotation_degrees > 0 else 0.0
    if angle != 0.0:
        image = ndimage.rotate(image, angle, axes=(2, 1), reshape=False,
                               order=1, mode="constant", cval=0.0)
        mask = ndimage.rotate(mask, angle, axes=(2, 1), reshape=False,
                              order=0, mode="constant", cval=0.0)
        image = np.clip(image, 0.0, 1.0)
    return Sample(np.ascontiguousarray(image, dtype=np.float32),
                  np.ascontiguousarray(mask, dtype=np.float32), sample.id)


def batches(manifest: DatasetManifest, split: str, batch_size: int,
            seed: int = 0, epoch: int = 0, size=(256, 256),
            augment_train: bool = True, rotation_degrees: float = 360.0,
            hflip_p: float = 0.5, vflip_p: float = 0.5,
            mask_threshold: int = 127):
    """Yield ``Batch`` objects for one pass over a split.

    Train: per-epoch deterministic shuffle (seed derived from seed+epoch),
    per-sample augmentation rng derived from the sample's shuffled position,
    last partial batch kept. Test: manifest order, no augmentation.
    """
    if split not in ("train", "test"):
        raise DataError(f"unknown split {split!r}")
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")
    records = manifest.of_split(split)
    if not records:
        raise DataError(f"split {split!r} is empty")
    order = list(range(len(records)))
    if split == "train":
        rng = np.random.default_rng(derive_seed(seed, "shuffle", epoch))
        order = list(rng.permutation(len(records)))
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        images, masks, ids = [], [], []
        for pos, idx in enumerate(chunk):
            r = records[idx]
            s = load_sample(_resolve(manifest.root, r.image),
                            _resolve(manifest.root, r.mask),
                            size=size, mask_threshold=mask_threshold)
            if split == "train" and augment_train:
                arng = np.random.default_rng(
                    derive_seed(seed, "augment", epoch * 1_000_003 + start + pos))
                s = augment(s, arng, rotation_degrees=rotation_degrees,
                            hflip_p=hflip_p, vflip_p=vflip_p)
            images.append(s.image)
            masks.append(s.mask)
            ids.append(s.id)
        yield Batch(np.stack(images), np.stack(masks), ids)
