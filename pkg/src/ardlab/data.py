"""Dataset generation and ingestion: synthetic 2-D tasks plus an IDX loader.

Image features are stored normalized to [0, 1]; synthetic features are raw
coordinates. Datasets are immutable after construction and safe to share.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Normalization:
    """How raw features map to stored features."""

    kind: str = "none"  # none | pixel | standard
    scale: float = 1.0
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def normalize(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "pixel":
            return np.asarray(x, dtype=np.float64) / self.scale
        if self.kind == "standard":
            return (np.asarray(x, dtype=np.float64) - self.mean) / self.std
        return np.asarray(x, dtype=np.float64)

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "pixel":
            return np.asarray(x, dtype=np.float64) * self.scale
        if self.kind == "standard":
            return np.asarray(x, dtype=np.float64) * self.std + self.mean
        return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # [n, d] float64
    labels: np.ndarray    # [n] int64
    n_classes: int
    norm: Normalization = field(default_factory=Normalization)
    split: str = "train"

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if feats.ndim != 2 or feats.shape[0] == 0:
            raise ContractError(f"features must be nonempty [n, d], got {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise ContractError("labels must be one per row")
        if self.n_classes < 2:
            raise ContractError(f"need at least 2 classes, got {self.n_classes}")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise ContractError("labels outside [0, n_classes)")
        if not np.all(np.isfinite(feats)):
            raise ContractError("non-finite features")
        if self.norm.kind == "pixel" and (feats.min() < 0.0 or feats.max() > 1.0):
            raise ContractError("pixel features must lie in [0, 1]")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.n_classes,
                       self.norm, self.split)


def gen_two_moons(n: int, noise_sigma: float, seed: int,
                  split: str = "train") -> Dataset:
    """Two interleaved half-circle arcs, one class each, balanced.

    Class 0 sits on the unit circle around (0, 0) (upper half), class 1 on
    the unit circle around (1, 0.5) (lower half). noise_sigma = 0 puts every
    point exactly on its arc.
    """
    if n <= 0 or n % 2 != 0:
        raise ContractError(f"n must be positive and even, got {n}")
    if noise_sigma < 0:
        raise ContractError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    half = n // 2
    theta0 = rng.uniform(0.0, np.pi, half)
    theta1 = rng.uniform(0.0, np.pi, half)
    pts0 = np.stack([np.cos(theta0), np.sin(theta0)], axis=1)
    pts1 = np.stack([1.0 - np.cos(theta1), 0.5 - np.sin(theta1)], axis=1)
    feats = np.concatenate([pts0, pts1], axis=0)
    if noise_sigma > 0:
        feats = feats + noise_sigma * rng.standard_normal(feats.shape)
    labels = np.concatenate([np.zeros(half, dtype=np.int64),
                             np.ones(half, dtype=np.int64)])
    return Dataset(feats, labels, 2, Normalization("none"), split)


def gen_blobs(n: int, centers, sigma: float, seed: int,
              split: str = "train") -> Dataset:
    """Isotropic Gaussian clusters, one class per center."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    c = centers.shape[0]
    if c < 2:
        raise ContractError(f"need at least 2 centers, got {c}")
    if n < c:
        raise ContractError(f"n={n} smaller than class count {c}")
    if sigma < 0:
        raise ContractError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    counts = np.full(c, n // c, dtype=int)
    counts[: n % c] += 1
    feats, labels = [], []
    for k in range(c):
        feats.append(centers[k] + sigma * rng.standard_normal((counts[k],
                                                               centers.shape[1])))
        labels.append(np.full(counts[k], k, dtype=np.int64))
    return Dataset(np.concatenate(feats), np.concatenate(labels), c,
                   Normalization("none"), split)


def _open_maybe_gzip(path):
    f = open(path, "rb")
    head = f.read(2)
    f.seek(0)
    if head == b"\x1f\x8b":
        f.close()
        return gzip.open(path, "rb")
    return f


def _read_exact(f, n: int, what: str, path) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what} in {path}: expected {n} bytes, "
                          f"got {len(buf)}")
    return buf


def load_mnist_idx(images_path, labels_path, limit: int,
                   split: str = "train") -> Dataset:
    """Load an IDX image/label file pair, scale pixels to [0,1], flatten.

    Keeps min(file count, limit) samples. Header words are big-endian u32.
    """
    if limit <= 0:
        raise ContractError(f"limit must be positive, got {limit}")
    with _open_maybe_gzip(images_path) as f:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(f, 16, "image header", images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(
                f"bad image magic 0x{magic:08x} in {images_path} "
                f"(expected 0x{IDX_IMAGES_MAGIC:08x})")
        take = min(count, limit)
        pixels = np.frombuffer(
            _read_exact(f, take * rows * cols, "image payload", images_path),
            dtype=np.uint8)
    with _open_maybe_gzip(labels_path) as f:
        lmagic, lcount = struct.unpack(
            ">II", _read_exact(f, 8, "label header", labels_path))
        if lmagic != IDX_LABELS_MAGIC:
            raise FormatError(
                f"bad label magic 0x{lmagic:08x} in {labels_path} "
                f"(expected 0x{IDX_LABELS_MAGIC:08x})")
        if lcount != count:
            raise FormatError(f"image/label count mismatch: {count} images "
                              f"vs {lcount} labels")
        labels = np.frombuffer(_read_exact(f, take, "label payload", labels_path),
                               dtype=np.uint8).astype(np.int64)
    feats = pixels.astype(np.float64).reshape(take, rows * cols) / 255.0
    n_classes = max(int(labels.max()) + 1, 2)
    return Dataset(feats, labels, n_classes, Normalization("pixel", 255.0), split)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write uint8 images [n, rows, cols] in IDX format (big-endian header)."""
    images = np.asarray(images)
    if images.ndim != 3 or images.dtype != np.uint8:
        raise ContractError("images must be uint8 [n, rows, cols]")
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, images.shape[0],
                            images.shape[1], images.shape[2]))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.astype(np.uint8).tobytes())


def export_digits_corpus(out_dir, test_count: int = 500, seed: int = 0) -> dict:
    """Write the bundled sklearn digits corpus as local IDX files.

    Stand-in image corpus for environments without the full MNIST download:
    8x8 grayscale digits, pixel values rescaled to the 0..255 byte range.
    Returns the four file paths keyed train/test images/labels.
    """
    from sklearn.datasets import load_digits  # test/demo dependency

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    images = np.round(digits.images * (255.0 / 16.0)).astype(np.uint8)
    labels = digits.target.astype(np.uint8)
    order = np.random.default_rng(seed).permutation(images.shape[0])
    images, labels = images[order], labels[order]
    split = images.shape[0] - test_count
    paths = {
        "train_images": out_dir / "train-images-idx3-ubyte",
        "train_labels": out_dir / "train-labels-idx1-ubyte",
        "test_images": out_dir / "t10k-images-idx3-ubyte",
        "test_labels": out_dir / "t10k-labels-idx1-ubyte",
    }
    write_idx_images(paths["train_images"], images[:split])
    write_idx_labels(paths["train_labels"], labels[:split])
    write_idx_images(paths["test_images"], images[split:])
    write_idx_labels(paths["test_labels"], labels[split:])
    return {k: str(v) for k, v in paths.items()}
