"""Single-file checkpoints: a versioned header followed by named tensors.

Layout::

    b"RGBTCKPT"                 8-byte magic
    uint32 little-endian        format version
    uint64 little-endian        header length in bytes
    header                      UTF-8 JSON: kind, metadata, tensor index
    tensor data                 raw little-endian arrays, in index order

Each index entry records ``name``, ``dtype`` (numpy dtype string),
``shape``, ``offset`` (relative to the start of the data block) and
``nbytes``.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError

MAGIC = b"RGBTCKPT"
VERSION = 1


def save_tensors(path, tensors: dict, kind: str, metadata: dict | None = None) -> Path:
    path = Path(path)
    index, blobs, offset = [], [], 0
    for name, value in tensors.items():
        arr = value.detach().cpu().numpy() if isinstance(value, torch.Tensor) else np.asarray(value)
        arr = np.asarray(arr, dtype=arr.dtype.newbyteorder("<"), order="C")
        blob = arr.tobytes()
        index.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                      "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"kind": kind, "metadata": metadata or {}, "tensors": index},
                        sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)
    return path


def load_tensors(path) -> tuple[dict, dict]:
    """Return ``(header, {name: numpy array})``."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack_from("<IQ", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = 8 + struct.calcsize("<IQ")
    header = json.loads(data[start:start + header_len])
    base = start + header_len
    tensors = {}
    for entry in header["tensors"]:
        lo = base + entry["offset"]
        raw = data[lo:lo + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"{path}: truncated tensor {entry['name']}")
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        tensors[entry["name"]] = arr.copy()
    return header, tensors


def save_module(path, module: torch.nn.Module, kind: str, config=None, extra: dict | None = None):
    """Save a module's state dict; ``config`` (a dataclass) goes into the header."""
    metadata = {"config": dataclasses.asdict(config) if config is not None else None}
    tensors = {f"state/{k}": v for k, v in module.state_dict().items()}
    for k, v in (extra or {}).items():
        tensors[f"extra/{k}"] = v
    return save_tensors(path, tensors, kind, metadata)


def load_state(path, kind: str):
    header, tensors = load_tensors(path)
    if header["kind"] != kind:
        raise CheckpointError(f"{path}: expected a {kind!r} checkpoint, found {header['kind']!r}")
    state = {k[len("state/"):]: torch.from_numpy(v) for k, v in tensors.items()
             if k.startswith("state/")}
    extra = {k[len("extra/"):]: v for k, v in tensors.items() if k.startswith("extra/")}
    return header["metadata"], state, extra


def _tuple_fields(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def save_attention_net(path, net) -> Path:
    return save_module(path, net, "attention_net", net.cfg)


def load_attention_net(path):
    from .global_attention.network import AttentionNet, AttentionNetConfig

    metadata, state, _ = load_state(path, "attention_net")
    net = AttentionNet(AttentionNetConfig(**_tuple_fields(metadata["config"])))
    net.load_state_dict(state)
    return net.eval()


def save_tracker_net(path, net, regressor=None) -> Path:
    extra = {f"regressor/{k}": v for k, v in regressor.state_dict().items()} if regressor else None
    return save_module(path, net, "tracker_net", net.cfg, extra)


def load_tracker_net(path):
    """Return ``(net, regressor or None)``."""
    from .local_attention.bbox_reg import BBoxRegressor
    from .local_attention.network import NetworkConfig, TrackerNetwork

    metadata, state, extra = load_state(path, "tracker_net")
    net = TrackerNetwork(NetworkConfig(**_tuple_fields(metadata["config"])))
    dtype = next(iter(state.values())).dtype
    net = net.to(dtype)
    net.load_state_dict(state)
    reg_state = {k[len("regressor/"):]: v for k, v in extra.items() if k.startswith("regressor/")}
    regressor = BBoxRegressor.from_state_dict(reg_state) if reg_state else None
    return net.eval(), regressor
