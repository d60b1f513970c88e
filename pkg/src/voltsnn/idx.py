"""IDX reader/writer for MNIST-style image and label files (optionally gzipped)."""

from __future__ import annotations

import gzip
import os
import struct

import numpy as np

from . import VoltsnnError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(VoltsnnError, ValueError):
    pass


def _open(path, mode: str):
    path = os.fspath(path)
    return gzip.open(path, mode) if path.endswith(".gz") else open(path, mode)


def read_idx(path) -> np.ndarray:
    """Unsigned-byte IDX file as an array of the declared shape."""
    with _open(path, "rb") as fh:
        header = fh.read(4)
        if len(header) < 4:
            raise IdxFormatError(f"{path}: truncated header")
        (magic,) = struct.unpack(">I", header)
        if magic not in (IMAGES_MAGIC, LABELS_MAGIC):
            raise IdxFormatError(f"{path}: unsupported magic 0x{magic:08x}")
        ndim = magic & 0xFF
        raw = fh.read(4 * ndim)
        if len(raw) < 4 * ndim:
            raise IdxFormatError(f"{path}: truncated dimension header")
        dims = struct.unpack(f">{ndim}I", raw)
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if data.size != int(np.prod(dims)):
        raise IdxFormatError(f"{path}: expected {int(np.prod(dims))} bytes of data, found {data.size}")
    return data.reshape(dims)


def write_idx(path, array) -> None:
    a = np.asarray(array)
    if a.ndim == 1:
        magic = LABELS_MAGIC
    elif a.ndim == 3:
        magic = IMAGES_MAGIC
    else:
        raise IdxFormatError("IDX arrays must be labels (1-D) or images (3-D)")
    if a.size and (a.min() < 0 or a.max() > 255):
        raise IdxFormatError("IDX unsigned-byte values must lie in [0, 255]")
    with _open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{a.ndim}I", *a.shape))
        fh.write(a.astype(np.uint8).tobytes())


def load_dataset(images_path, labels_path, limit: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Images flattened and scaled to [0, 1], plus integer labels."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise IdxFormatError("expected a 3-D image file and a 1-D label file")
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    return images.reshape(len(images), -1).astype(np.float64) / 255.0, labels.astype(np.int64)
