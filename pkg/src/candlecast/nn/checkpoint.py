"""Named-tensor checkpoints: versioned text header plus little-endian
float64 payloads, written in sorted-name order for byte determinism."""
from __future__ import annotations

import numpy as np

from ..errors import ArtifactError
from .tensor import Tensor

_MAGIC = "candlecast-checkpoint v1"


def save_checkpoint(params: dict, path) -> None:
    """``params`` maps name -> Tensor or ndarray; names must be unique and
    may not contain '=' or newlines."""
    entries = []
    for name in sorted(params):
        if "=" in name or "\n" in name or not name:
            raise ArtifactError(f"bad parameter name {name!r}")
        value = params[name]
        data = value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float64)
        entries.append((name, np.ascontiguousarray(data, dtype="<f8")))
    with open(path, "wb") as fh:
        fh.write((_MAGIC + "\n").encode())
        fh.write(f"count={len(entries)}\n".encode())
        for name, data in entries:
            shape = ",".join(str(d) for d in data.shape)
            fh.write(f"{name}={shape}\n".encode())
        fh.write(b"\n")
        for _, data in entries:
            fh.write(data.tobytes())


def load_checkpoint(path) -> dict:
    """Returns name -> float64 ndarray, exactly as saved."""
    with open(path, "rb") as fh:
        blob = fh.read()
    cut = blob.find(b"\n\n")
    if cut < 0 or not blob.startswith(_MAGIC.encode()):
        raise ArtifactError(f"{path} is not a parameter checkpoint")
    lines = blob[:cut].decode().split("\n")[1:]
    if not lines or not lines[0].startswith("count="):
        raise ArtifactError(f"{path}: missing count header")
    count = int(lines[0][len("count="):])
    if len(lines) - 1 != count:
        raise ArtifactError(f"{path}: header lists {len(lines) - 1} tensors, expected {count}")
    out = {}
    offset = cut + 2
    for line in lines[1:]:
        name, _, shape_s = line.partition("=")
        shape = tuple(int(d) for d in shape_s.split(",")) if shape_s else ()
        size = int(np.prod(shape)) if shape else 1
        end = offset + size * 8
        if end > len(blob):
            raise ArtifactError(f"{path}: truncated payload at {name!r}")
        out[name] = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise ArtifactError(f"{path}: {len(blob) - offset} trailing bytes")
    return out


def restore_parameters(params: dict, state: dict) -> None:
    """Copy checkpoint arrays into live tensors, matching by name and shape."""
    missing = sorted(set(p for p in params) - set(state))
    if missing:
        raise ArtifactError(f"checkpoint is missing parameters {missing!r}")
    for name, tensor in params.items():
        data = state[name]
        if data.shape != tensor.data.shape:
            raise ArtifactError(f"{name}: checkpoint shape {data.shape} != model {tensor.data.shape}")
        tensor.data = data.astype(np.float64).copy()
