"""Dataset loading (IDX image/label files) and a built-in synthetic digit set.

IDX files are big-endian: magic, dimension sizes, then raw payload. Images
load as float64 in [0, 1] shaped (n, 1, h, w); labels load as int64.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Malformed or truncated IDX file."""


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise IdxFormatError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return self.images.shape[0]


def _open_maybe_gzip(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise IdxFormatError(f"truncated file while reading {what}")
    return data


def load_idx_images(path) -> np.ndarray:
    """Read an IDX image file into (n, 1, h, w) float64 scaled to [0, 1]."""
    path = Path(path)
    with _open_maybe_gzip(path) as f:
        magic, n, h, w = struct.unpack(">IIII", _read_exact(f, 16, "image header"))
        if magic != IDX_IMAGE_MAGIC:
            raise IdxFormatError(
                f"bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        raw = _read_exact(f, n * h * w, "image payload")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n, 1, h, w)
    return pixels.astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    path = Path(path)
    with _open_maybe_gzip(path) as f:
        magic, n = struct.unpack(">II", _read_exact(f, 8, "label header"))
        if magic != IDX_LABEL_MAGIC:
            raise IdxFormatError(
                f"bad label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        raw = _read_exact(f, n, "label payload")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def save_idx_images(path, images) -> None:
    """Write (n, 1, h, w) or (n, h, w) values in [0, 1] as an IDX image file."""
    a = np.asarray(images, dtype=np.float64)
    if a.ndim == 4:
        if a.shape[1] != 1:
            raise IdxFormatError(f"IDX images are single-channel, got {a.shape[1]}")
        a = a[:, 0]
    if a.ndim != 3:
        raise IdxFormatError(f"images must be (n, h, w), got shape {a.shape}")
    n, h, w = a.shape
    payload = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, h, w))
        f.write(payload.tobytes())


def save_idx_labels(path, labels) -> None:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise IdxFormatError(f"labels must be 1-D, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() > 255):
        raise IdxFormatError("IDX labels must fit in a byte")
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, y.size))
        f.write(y.astype(np.uint8).tobytes())


def load_dataset(image_path, label_path) -> Dataset:
    images = load_idx_images(image_path)
    labels = load_idx_labels(label_path)
    num_classes = int(labels.max()) + 1 if labels.size else 0
    return Dataset(images, labels, num_classes)


_GLYPHS = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def glyph(digit: int) -> np.ndarray:
    """5x7 binary stencil for one digit, as float64 (7, 5)."""
    rows = _GLYPHS[int(digit)]
    return np.array([[float(ch) for ch in row] for row in rows])


def synthetic_digits(
    n_per_class: int = 20,
    size: int = 24,
    noise: float = 0.1,
    seed: int = 0,
    classes: tuple[int, ...] = tuple(range(10)),
) -> Dataset:
    """Noisy upscaled digit stencils, centered, one channel, values in [0, 1].

    Every sample of a class shares the same geometry; only the stroke
    intensity and the additive noise vary. Shift robustness experiments add
    their own translations on top.
    """
    if size < 21:
        raise ValueError(f"digits need size >= 21, got {size}")
    rng = np.random.default_rng(seed)
    images = []
    labels = []
    for cls_index, digit in enumerate(classes):
        stencil = np.kron(glyph(digit), np.ones((3, 3)))
        gh, gw = stencil.shape
        top = (size - gh) // 2
        left = (size - gw) // 2
        for _ in range(n_per_class):
            canvas = np.zeros((size, size))
            canvas[top : top + gh, left : left + gw] = stencil * rng.uniform(0.7, 1.0)
            canvas += rng.normal(0.0, noise, size=(size, size))
            images.append(np.clip(canvas, 0.0, 1.0))
            labels.append(cls_index)
    order = rng.permutation(len(images))
    x = np.stack(images)[order][:, np.newaxis]
    y = np.asarray(labels, dtype=np.int64)[order]
    return Dataset(x, y, len(classes))
