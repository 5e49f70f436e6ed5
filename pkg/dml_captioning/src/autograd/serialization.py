"""Tensor blob storage: raw little-endian float64, addressed by a JSON index."""

import errno
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple

import numpy as np

from ..errors import CheckpointError

BLOB_DTYPE = np.dtype("<f8")


def pack_tensors(arrays: Mapping[str, np.ndarray]) -> Tuple[bytes, Dict[str, Dict[str, Any]]]:
    """Concatenate arrays row-major; return the blob and its name index."""
    index: Dict[str, Dict[str, Any]] = {}
    chunks = []
    offset = 0
    for name, array in arrays.items():
        raw = np.ascontiguousarray(array, dtype=BLOB_DTYPE).tobytes(order="C")
        index[name] = {"shape": list(np.shape(array)), "offset": offset}
        chunks.append(raw)
        offset += len(raw)
    return b"".join(chunks), index


def unpack_tensors(blob: bytes, index: Mapping[str, Mapping[str, Any]]) -> Dict[str, np.ndarray]:
    arrays: Dict[str, np.ndarray] = {}
    for name, entry in index.items():
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = int(entry["offset"])
        end = start + count * BLOB_DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError(f"tensor '{name}' runs past the end of the blob")
        arrays[name] = (
            np.frombuffer(blob[start:end], dtype=BLOB_DTYPE).astype(np.float64).reshape(shape)
        )
    return arrays


def write_bytes(path: Path, payload: bytes) -> None:
    try:
        Path(path).write_bytes(payload)
    except OSError as e:
        if e.errno == errno.ENOSPC:
            raise CheckpointError(f"disk full while writing {path}") from e
        raise CheckpointError(f"could not write {path}: {e}") from e


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    write_bytes(path, json.dumps(payload, indent=2).encode("utf-8"))
