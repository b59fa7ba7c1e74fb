"""Checkpoint archive: text manifest followed by raw float32 arrays.

Layout of a checkpoint file::

    dtakit-checkpoint
    format_version=1
    epoch=<int>
    best_valid_mse=<repr float>
    adam_step=<int>
    rng=<json PCG64 state or ->
    config.<field>=<value>          (one line per ModelConfig field)
    array=<name>|<shape>|<offset>|<nbytes>
    ...
    ---
    <raw little-endian float32 data, arrays in manifest order>

Array names keep their roles recognizable: batch-norm running statistics
contain ``.running_`` and optimizer moments are prefixed ``adam.m.`` /
``adam.v.``; everything else is a trainable parameter.  The round trip is
bit-exact, so save -> load -> predict reproduces predictions bitwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from .model import ModelConfig

FORMAT_VERSION = 1
MAGIC = "dtakit-checkpoint"
_SEPARATOR = b"\n---\n"


class VersionMismatch(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    state: dict
    moments: dict
    adam_step: int = 0
    epoch: int = 0
    best_valid_mse: float = float("inf")
    rng_state: dict | None = None
    format_version: int = FORMAT_VERSION


def _encode_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _decode_value(text, example):
    if isinstance(example, bool):
        return text == "true"
    if isinstance(example, tuple):
        if text == "":
            return ()
        kind = type(example[0]) if example else int
        return tuple(kind(v) for v in text.split(","))
    return type(example)(text)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    arrays = {}
    arrays.update(ckpt.params)
    arrays.update(ckpt.state)
    arrays.update(ckpt.moments)
    for name, arr in arrays.items():
        if arr.dtype != np.float32:
            raise ValueError(
                f"checkpoint arrays must be float32, {name} is {arr.dtype}")

    lines = [MAGIC,
             f"format_version={ckpt.format_version}",
             f"epoch={ckpt.epoch}",
             f"best_valid_mse={ckpt.best_valid_mse!r}",
             f"adam_step={ckpt.adam_step}",
             "rng=" + (json.dumps(ckpt.rng_state) if ckpt.rng_state else "-")]
    for f in fields(ModelConfig):
        lines.append(f"config.{f.name}={_encode_value(getattr(ckpt.config, f.name))}")

    blob = bytearray()
    for name in arrays:
        arr = arrays[name]
        data = np.ascontiguousarray(arr).astype("<f4", copy=False).tobytes()
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"array={name}|{shape}|{len(blob)}|{len(data)}")
        blob.extend(data)

    with open(path, "wb") as handle:
        handle.write("\n".join(lines).encode("utf-8"))
        handle.write(_SEPARATOR)
        handle.write(bytes(blob))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as handle:
        raw = handle.read()
    sep = raw.find(_SEPARATOR)
    if sep < 0:
        raise VersionMismatch(f"{path}: not a dtakit checkpoint")
    manifest = raw[:sep].decode("utf-8").splitlines()
    blob = raw[sep + len(_SEPARATOR):]
    if not manifest or manifest[0] != MAGIC:
        raise VersionMismatch(f"{path}: not a dtakit checkpoint")

    meta = {}
    config_kv = {}
    array_index = []
    for line in manifest[1:]:
        key, _, value = line.partition("=")
        if key == "array":
            name, shape_text, offset, nbytes = value.split("|")
            shape = tuple(int(s) for s in shape_text.split(",") if s != "")
            array_index.append((name, shape, int(offset), int(nbytes)))
        elif key.startswith("config."):
            config_kv[key[len("config."):]] = value
        else:
            meta[key] = value

    if int(meta.get("format_version", -1)) != FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format_version {meta.get('format_version')} "
            f"(this build reads {FORMAT_VERSION})")

    defaults = ModelConfig()
    kwargs = {}
    for f in fields(ModelConfig):
        if f.name in config_kv:
            kwargs[f.name] = _decode_value(config_kv[f.name],
                                           getattr(defaults, f.name))
    config = ModelConfig(**kwargs)
    if config.feature_layout != defaults.feature_layout:
        raise VersionMismatch(
            f"{path}: feature layout {config.feature_layout!r} does not "
            f"match this build ({defaults.feature_layout!r})")
    if config.residue_table != defaults.residue_table:
        raise VersionMismatch(
            f"{path}: residue table {config.residue_table!r} does not "
            f"match this build ({defaults.residue_table!r})")

    params, state, moments = {}, {}, {}
    for name, shape, offset, nbytes in array_index:
        arr = np.frombuffer(blob[offset:offset + nbytes],
                            dtype="<f4").reshape(shape).copy()
        if name.startswith("adam.m.") or name.startswith("adam.v."):
            moments[name] = arr
        elif ".running_" in name:
            state[name] = arr
        else:
            params[name] = arr

    rng_text = meta.get("rng", "-")
    rng_state = None if rng_text in ("-", "") else json.loads(rng_text)
    return Checkpoint(
        config=config,
        params=params,
        state=state,
        moments=moments,
        adam_step=int(meta.get("adam_step", 0)),
        epoch=int(meta.get("epoch", 0)),
        best_valid_mse=float(meta.get("best_valid_mse", "inf")),
        rng_state=rng_state,
    )
