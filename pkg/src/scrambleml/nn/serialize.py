"""Model files: format "scramble-model/1".

Layout: 8-byte little-endian header length, JSON header (config, step,
metadata, per-tensor name/shape/dtype/byte_length/crc32 in payload order),
then the concatenated raw little-endian tensor payload.  Parameters and
both Adam moment sets round-trip bit-exactly.
"""

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from .network import Network, NetworkConfig
from .optim import ModelState

MODEL_FORMAT = "scramble-model/1"

_DTYPES = {"float64": "<f8", "float32": "<f4"}


def _tensor_groups(state: ModelState):
    for group, tensors in (("param", state.params),
                           ("adam_m", state.adam_m),
                           ("adam_v", state.adam_v)):
        for name in sorted(tensors):
            yield f"{group}:{name}", tensors[name]


def save_model(state: ModelState, path) -> None:
    dtype = _DTYPES[state.config.precision]
    entries = []
    chunks = []
    for key, tensor in _tensor_groups(state):
        blob = np.ascontiguousarray(tensor, dtype=dtype).tobytes()
        entries.append({"name": key, "shape": list(tensor.shape), "dtype": dtype,
                        "byte_length": len(blob), "crc32": zlib.crc32(blob)})
        chunks.append(blob)
    header = {
        "format_version": MODEL_FORMAT,
        "config": state.config.to_json(),
        "step": state.step,
        "metadata": state.metadata,
        "tensors": entries,
    }
    head = json.dumps(header, sort_keys=True).encode()
    Path(path).write_bytes(struct.pack("<Q", len(head)) + head + b"".join(chunks))


def load_model(path) -> ModelState:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise DataFormatError(f"{path}: too short to hold a model header")
    (head_len,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + head_len:
        raise DataFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8 : 8 + head_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: corrupt model header: {exc}") from exc
    version = header.get("format_version")
    if version != MODEL_FORMAT:
        raise DataFormatError(
            f"unsupported model format {version!r}, expected {MODEL_FORMAT!r}")
    try:
        config = NetworkConfig.from_json(header["config"])
        entries = header["tensors"]
        step = int(header["step"])
        metadata = header.get("metadata", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed model header: {exc}") from exc

    groups = {"param": {}, "adam_m": {}, "adam_v": {}}
    offset = 8 + head_len
    for entry in entries:
        blob = raw[offset : offset + entry["byte_length"]]
        if len(blob) != entry["byte_length"]:
            raise DataFormatError(
                f"{path}: truncated payload at tensor {entry['name']!r}")
        crc = zlib.crc32(blob)
        if crc != entry["crc32"]:
            raise DataFormatError(
                f"{path}: checksum mismatch at tensor {entry['name']!r} "
                f"(offset {offset}): computed {crc:#010x}, "
                f"declared {entry['crc32']:#010x}")
        offset += entry["byte_length"]
        tensor = np.frombuffer(blob, dtype=entry["dtype"])
        shape = tuple(entry["shape"])
        if tensor.size != int(np.prod(shape, dtype=np.int64)):
            raise DataFormatError(f"{path}: tensor {entry['name']!r} size/shape mismatch")
        group, _, name = entry["name"].partition(":")
        if group not in groups or not name:
            raise DataFormatError(f"{path}: unknown tensor group in {entry['name']!r}")
        groups[group][name] = tensor.reshape(shape).copy()
    if offset != len(raw):
        raise DataFormatError(f"{path}: {len(raw) - offset} trailing bytes after payload")

    expected = Network(config).param_shapes()
    for group, tensors in groups.items():
        if set(tensors) != set(expected):
            missing = sorted(set(expected) ^ set(tensors))
            raise DataFormatError(f"{path}: {group} tensors do not match config: {missing}")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise DataFormatError(
                    f"{path}: {group}:{name} has shape {tensors[name].shape}, "
                    f"config implies {shape}")
    return ModelState(config=config, params=groups["param"],
                      adam_m=groups["adam_m"], adam_v=groups["adam_v"],
                      step=step, metadata=metadata)
