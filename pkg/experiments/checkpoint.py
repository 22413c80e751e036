"""
Model Checkpoints
Versioned binary container: magic, version, JSON header, little-endian float64 payload
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from experiments.storage import atomic_write
from nn_core.model import Model

logger = logging.getLogger(__name__)

MAGIC = b"PRUNECKP"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sIQ")  # magic, version, header length


class CheckpointError(ValueError):
    pass


def _entries(model: Model) -> List[Tuple[str, np.ndarray]]:
    """Every array stored in a checkpoint, in payload order"""
    entries = []
    for name, param in model.named_parameters():
        entries.append((f"param/{name}", param.data))
    for name, mask in model.masks.items():
        entries.append((f"mask/{name}", mask))
    for idx, mask in model.node_masks.items():
        entries.append((f"node/{idx}", mask))
    for idx, layer in enumerate(model.layers):
        for name, buf in layer.buffers().items():
            entries.append((f"buffer/{idx}.{name}", buf))
    return entries


def encode_checkpoint(model: Model, metadata: Optional[Dict[str, Any]] = None) -> bytes:
    """Serialise architecture, parameters, masks, node masks and batch-norm statistics"""
    tensors = []
    chunks = []
    offset = 0
    for name, array in _entries(model):
        data = np.ascontiguousarray(array, dtype="<f8")
        tensors.append({"name": name, "shape": list(data.shape), "offset": offset})
        chunks.append(data.tobytes())
        offset += data.nbytes

    header = {
        "architecture": model.architecture(),
        "input_shape": list(model.input_shape),
        "num_classes": model.num_classes,
        "name": model.name,
        "width_scale": model.width_scale,
        "metadata": metadata or {},
        "tensors": tensors,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)) + header_bytes + b"".join(chunks)


def decode_checkpoint(raw: bytes, source: str = "<bytes>") -> Tuple[Model, Dict[str, Any]]:
    """
    Rebuild a model from checkpoint bytes.

    Returns:
        (model in eval mode, metadata dict)

    Raises:
        CheckpointError: Bad magic, unsupported version, truncated payload or
            a tensor that does not fit the stored architecture
    """
    if len(raw) < _PREAMBLE.size:
        raise CheckpointError(f"{source}: truncated preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {version}")
    start = _PREAMBLE.size + header_len
    if len(raw) < start:
        raise CheckpointError(f"{source}: truncated header")
    header = json.loads(raw[_PREAMBLE.size:start].decode("utf-8"))

    model = Model.from_architecture(header["architecture"], header["input_shape"], header["num_classes"],
                                    name=header["name"], width_scale=header["width_scale"])
    targets = dict(_entries(model))
    if set(targets) != {entry["name"] for entry in header["tensors"]}:
        raise CheckpointError(f"{source}: stored tensors do not match the stored architecture")

    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        lo = start + entry["offset"]
        hi = lo + 8 * count
        if hi > len(raw):
            raise CheckpointError(f"{source}: payload truncated at {entry['name']}")
        values = np.frombuffer(raw[lo:hi], dtype="<f8").reshape(entry["shape"])
        target = targets[entry["name"]]
        if target.shape != values.shape:
            raise CheckpointError(f"{source}: {entry['name']} has shape {values.shape}, expected {target.shape}")
        np.copyto(target, values)

    model.apply_masks()
    model.eval()
    return model, header["metadata"]


def save_checkpoint(path: Union[str, Path], model: Model, metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = atomic_write(Path(path), encode_checkpoint(model, metadata))
    logger.info(f"Saved checkpoint {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Model, Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No checkpoint at {path}")
    return decode_checkpoint(path.read_bytes(), source=str(path))
