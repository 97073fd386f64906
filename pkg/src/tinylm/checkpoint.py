"""Versioned binary checkpoints with a JSON metadata sidecar.

Layout (all integers little-endian):

    magic   4 bytes  b"TLMC"
    version u32
    cfg_len u32, then cfg_len bytes of UTF-8 JSON (the model configuration)
    count   u32, then per tensor:
        name_len u16, name bytes (UTF-8)
        ndim     u8, ndim x u32 dims
        data     float64 raw bytes, C order

The sidecar at ``<path>.meta.json`` records provenance: dataset name, seed,
best validation loss, best epoch, and any extra keys the caller adds.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .errors import ConfigError
from .models import LanguageModel, ModelConfig, build_model

MAGIC = b"TLMC"
VERSION = 1


def meta_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def save_checkpoint(model: LanguageModel, path, meta: dict | None = None) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    cfg = json.dumps(asdict(model.config), sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(cfg)))
    chunks.append(cfg)
    items = list(model.params.items())
    chunks.append(struct.pack("<I", len(items)))
    for name, tensor in items:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        arr = np.ascontiguousarray(tensor.data, dtype="<f8")
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)
    if meta is not None:
        tmp = meta_path(path).with_suffix(".tmp")
        tmp.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        tmp.replace(meta_path(path))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ConfigError("truncated checkpoint file")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        vals = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return vals[0] if len(vals) == 1 else vals


def load_checkpoint(path) -> tuple[LanguageModel, dict]:
    """Rebuild a model from disk; returns (model, sidecar metadata)."""
    path = Path(path)
    r = _Reader(path.read_bytes())
    if r.take(4) != MAGIC:
        raise ConfigError(f"{path} is not a checkpoint (bad magic)")
    version = r.unpack("<I")
    if version != VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    cfg = json.loads(r.take(r.unpack("<I")).decode("utf-8"))
    model = build_model(ModelConfig(**cfg), seed=0)
    dtype = ad.default_dtype()
    for _ in range(r.unpack("<I")):
        name = r.take(r.unpack("<H")).decode("utf-8")
        ndim = r.unpack("<B")
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(r.take(count * 8), dtype="<f8").reshape(shape)
        if name not in model.params:
            raise ConfigError(f"checkpoint tensor {name!r} not in model")
        if model.params[name].data.shape != arr.shape:
            raise ConfigError(f"checkpoint tensor {name!r} has shape {arr.shape}, "
                              f"expected {model.params[name].data.shape}")
        model.params[name].data = arr.astype(dtype)
    sidecar = meta_path(path)
    meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    return model, meta
