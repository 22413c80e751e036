"""
IDX Codec
Reader and writer for the big-endian IDX files MNIST ships in (plain or gzip)
"""

import gzip
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from config import settings
from data.datasets import Dataset, normalise

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

PathLike = Union[str, Path]


class IdxFormatError(ValueError):
    """Raised for malformed IDX content: bad magic, truncation, count mismatch"""


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def _write_bytes(path: PathLike, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as f:
        f.write(payload)


def parse_idx(raw: bytes, magic: int, source: str = "<bytes>") -> np.ndarray:
    """
    Decode one IDX payload of unsigned bytes.

    Layout: 4-byte magic (0x00, 0x00, type 0x08, ndim), ndim big-endian
    uint32 extents, then the row-major pixel bytes.
    """
    if len(raw) < 4:
        raise IdxFormatError(f"{source}: truncated header ({len(raw)} bytes)")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxFormatError(f"{source}: magic 0x{found:08x}, expected 0x{magic:08x}")

    ndim = magic & 0xFF
    header_size = 4 + 4 * ndim
    if len(raw) < header_size:
        raise IdxFormatError(f"{source}: truncated header ({len(raw)} of {header_size} bytes)")
    shape = struct.unpack(f">{ndim}I", raw[4:header_size])

    expected = int(np.prod(shape))
    body = raw[header_size:]
    if len(body) != expected:
        raise IdxFormatError(f"{source}: payload holds {len(body)} bytes, header promises {expected}")
    return np.frombuffer(body, dtype=np.uint8).reshape(shape).copy()


def encode_idx(array: np.ndarray, magic: int) -> bytes:
    array = np.asarray(array)
    ndim = magic & 0xFF
    if array.ndim != ndim:
        raise IdxFormatError(f"magic 0x{magic:08x} stores {ndim}-d arrays, got shape {array.shape}")
    if array.dtype != np.uint8:
        raise IdxFormatError(f"IDX payload must be uint8, got {array.dtype}")
    header = struct.pack(f">I{ndim}I", magic, *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def read_idx_images(path: PathLike) -> np.ndarray:
    """Raw uint8 pixels shaped (N, rows, cols)"""
    return parse_idx(_read_bytes(path), IMAGE_MAGIC, str(path))


def read_idx_labels(path: PathLike) -> np.ndarray:
    return parse_idx(_read_bytes(path), LABEL_MAGIC, str(path))


def write_idx(images_path: PathLike, labels_path: PathLike, pixels: np.ndarray, labels: np.ndarray) -> None:
    """
    Write uint8 pixels (N, rows, cols) and labels (N,) as an IDX pair.

    Paths ending in .gz are gzip-compressed.
    """
    if len(pixels) != len(labels):
        raise IdxFormatError(f"{len(pixels)} images but {len(labels)} labels")
    _write_bytes(images_path, encode_idx(pixels, IMAGE_MAGIC))
    _write_bytes(labels_path, encode_idx(np.asarray(labels, dtype=np.uint8), LABEL_MAGIC))
    logger.info(f"Wrote {len(labels)} samples to {images_path} / {labels_path}")


def to_pixels(dataset: Dataset) -> np.ndarray:
    """Quantise a single-channel dataset back to uint8 pixels, undoing normalisation"""
    images = dataset.images
    if images.ndim == 4:
        if images.shape[1] != 1:
            raise IdxFormatError(f"IDX stores single-channel images, got {images.shape[1]} channels")
        images = images[:, 0]
    if images.ndim != 3:
        raise IdxFormatError(f"IDX export needs (N, H, W) images, got {dataset.images.shape}")
    values = images * dataset.std + dataset.mean if dataset.normalised else images
    return np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8)


def export_idx(dataset: Dataset, images_path: PathLike, labels_path: PathLike) -> None:
    write_idx(images_path, labels_path, to_pixels(dataset), dataset.labels)


def load_idx(
    images_path: PathLike,
    labels_path: PathLike,
    num_classes: int = 10,
    split: str = "train",
    mean: float = settings.MNIST_MEAN,
    std: float = settings.MNIST_STD,
) -> Dataset:
    """
    Load an IDX image/label pair as a normalised Dataset.

    Pixels are scaled to [0, 1] and then normalised with (mean, std).

    Raises:
        IdxFormatError: Wrong magic, truncated file, count mismatch or
            labels outside [0, num_classes)
    """
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(pixels) != len(labels):
        raise IdxFormatError(f"{images_path} holds {len(pixels)} images but {labels_path} holds {len(labels)} labels")
    if len(labels) and labels.max() >= num_classes:
        raise IdxFormatError(f"{labels_path}: label {labels.max()} outside [0, {num_classes})")

    images = pixels.astype(np.float64)[:, None, :, :] / 255.0
    dataset = Dataset(images=images, labels=labels.astype(np.int64), num_classes=num_classes, split=split)
    logger.info(f"Loaded {len(dataset)} {split} samples of shape {dataset.sample_shape} from {images_path}")
    return normalise(dataset, mean, std)


def load_split(directory: PathLike, split: str, num_classes: int = 10) -> Dataset:
    """
    Load the standard MNIST file pair for `split` (train or test) from a directory.

    Both `<prefix>-images-idx3-ubyte` and the `.gz` variant are accepted.
    """
    prefix = "train" if split == "train" else "t10k"
    directory = Path(directory)
    found = []
    for kind, suffix in (("images", "idx3-ubyte"), ("labels", "idx1-ubyte")):
        plain = directory / f"{prefix}-{kind}-{suffix}"
        packed = plain.with_name(plain.name + ".gz")
        if plain.exists():
            found.append(plain)
        elif packed.exists():
            found.append(packed)
        else:
            raise FileNotFoundError(f"No {split} {kind} file in {directory} (looked for {plain.name}[.gz])")
    images_path, labels_path = found
    return load_idx(images_path, labels_path, num_classes=num_classes, split=split)

