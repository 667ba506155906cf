"""NVCK checkpoint files.

Layout (little-endian)::

    b"NVCK"  u16 version
    record*  u16 name_len, name, u8 dtype, u8 rank, u32 extent * rank, payload
    u16 0    end of records
    u32 len  UTF-8 ``key=value`` lines (specs, counters, training config)
"""
from __future__ import annotations

import ast
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Scale
from .discriminator import Critic, CriticSpec
from .generative import GenerativeModel, GeneratorSpec
from .training import TrainConfig, Trainer

MAGIC = b"NVCK"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
DTYPE_CODES = {dt: code for code, dt in DTYPES.items()}


class CheckpointError(ValueError):
    """Malformed or inconsistent checkpoint."""


def encode_records(records: list[tuple[str, np.ndarray]], config: dict[str, str]) -> bytes:
    names = [name for name, _ in records]
    if len(set(names)) != len(names):
        raise CheckpointError("duplicate record names")
    out = [MAGIC, struct.pack("<H", VERSION)]
    for name, array in records:
        raw_name = name.encode("utf-8")
        if not raw_name or len(raw_name) > 0xFFFF:
            raise CheckpointError(f"bad record name {name!r}")
        array = np.asarray(array)
        dtype = array.dtype.newbyteorder("<")
        if dtype not in DTYPE_CODES:
            raise CheckpointError(f"{name}: unsupported dtype {array.dtype}")
        out.append(struct.pack("<H", len(raw_name)) + raw_name)
        out.append(struct.pack(f"<BB{array.ndim}I", DTYPE_CODES[dtype], array.ndim, *array.shape))
        out.append(np.ascontiguousarray(array, dtype=dtype).tobytes())
    out.append(struct.pack("<H", 0))
    text = "".join(f"{k}={v}\n" for k, v in config.items()).encode("utf-8")
    out.append(struct.pack("<I", len(text)) + text)
    return b"".join(out)


def decode_records(raw: bytes) -> tuple[list[tuple[str, np.ndarray]], dict[str, str]]:
    if raw[:4] != MAGIC:
        raise CheckpointError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    try:
        (version,) = struct.unpack_from("<H", raw, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos, records = 6, []
        while True:
            (length,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            if length == 0:
                break
            name = raw[pos:pos + length].decode("utf-8")
            pos += length
            code, rank = struct.unpack_from("<BB", raw, pos)
            pos += 2
            shape = struct.unpack_from(f"<{rank}I", raw, pos)
            pos += 4 * rank
            if code not in DTYPES:
                raise CheckpointError(f"{name}: unknown dtype code {code}")
            dtype = DTYPES[code]
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            if pos + nbytes > len(raw):
                raise CheckpointError(f"{name}: truncated payload")
            records.append((name, np.frombuffer(raw, dtype, int(np.prod(shape, dtype=np.int64)), pos).reshape(shape)))
            pos += nbytes
        (length,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        text = raw[pos:pos + length]
        if len(text) != length or pos + length != len(raw):
            raise CheckpointError("config block length does not match file size")
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    config = {}
    for line in text.decode("utf-8").splitlines():
        key, _, value = line.partition("=")
        config[key] = value
    return records, config


# ------------------------------------------------------------ trainer state
def _put_dict(config: dict, prefix: str, values: dict) -> None:
    for key, value in values.items():
        config[f"{prefix}{key}"] = repr(list(value) if isinstance(value, tuple) else value)


def _get_dict(config: dict, prefix: str) -> dict:
    return {k[len(prefix):]: ast.literal_eval(v) for k, v in config.items() if k.startswith(prefix)}


def trainer_state(trainer: Trainer) -> tuple[list, dict]:
    records = [(f"gen.{name}", p.data) for name, p in trainer.model.named_parameters()]
    names = [name for name, _ in trainer.model.named_parameters()]
    records += [(f"opt.gen.m.{n}", m) for n, m in zip(names, trainer.gen_opt.m)]
    records += [(f"opt.gen.v.{n}", v) for n, v in zip(names, trainer.gen_opt.v)]
    config = {"format": "neurovid-checkpoint"}
    _put_dict(config, "generator.", trainer.model.spec.as_dict())
    _put_dict(config, "train.", trainer.config.as_dict())
    config["state.iteration"] = str(trainer.iteration)
    config["state.critic_updates"] = str(trainer.critic_updates)
    config["opt.gen.step"] = str(trainer.gen_opt.step)
    config["critics"] = repr(sorted(trainer.critics))
    for key in sorted(trainer.critics):
        critic, opt = trainer.critics[key], trainer.critic_opts[key]
        _put_dict(config, f"critic.{key}.", critic.spec.as_dict())
        cnames = [n for n, _ in critic.named_parameters()]
        records += [(f"critic.{key}.{n}", p.data) for n, p in critic.named_parameters()]
        records += [(f"opt.critic.{key}.m.{n}", m) for n, m in zip(cnames, opt.m)]
        records += [(f"opt.critic.{key}.v.{n}", v) for n, v in zip(cnames, opt.v)]
        config[f"opt.critic.{key}.step"] = str(opt.step)
        for layer, stats in sorted(critic.stats.items()):
            records += [(f"stats.{key}.{layer}.mean", stats.mean), (f"stats.{key}.{layer}.var", stats.var)]
            config[f"stats.{key}.{layer}.updates"] = str(stats.updates)
    if trainer.scale is not None:
        config["data.center"] = repr(trainer.scale.center)
        config["data.half_range"] = repr(trainer.scale.half_range)
    return records, config


def save_checkpoint(path, trainer: Trainer) -> None:
    records, config = trainer_state(trainer)
    Path(path).write_bytes(encode_records(records, config))


def _assign(target: np.ndarray, value: np.ndarray, name: str) -> None:
    if target.shape != value.shape:
        raise CheckpointError(f"{name}: stored shape {value.shape} != model shape {target.shape}")
    target[...] = value


def load_checkpoint(path) -> Trainer:
    """Rebuild a trainer (model, critics, optimizers, counters) from a file."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    records, config = decode_records(raw)
    table = dict(records)
    spec = GeneratorSpec(**_get_dict(config, "generator."))
    train = TrainConfig.from_dict(_get_dict(config, "train."))
    critic_keys = ast.literal_eval(config.get("critics", "[]"))
    critics = {k: Critic(CriticSpec(**_get_dict(config, f"critic.{k}.")), 0) for k in critic_keys} or None
    scale = None
    if "data.center" in config:
        scale = Scale(float(config["data.center"]), float(config["data.half_range"]))
    trainer = Trainer(GenerativeModel(spec), train, critics, scale)

    def take(name):
        if name not in table:
            raise CheckpointError(f"checkpoint lacks record {name}")
        return table.pop(name)

    names = [n for n, _ in trainer.model.named_parameters()]
    for n, p in trainer.model.named_parameters():
        _assign(p.data, take(f"gen.{n}"), n)
    for n, m, v in zip(names, trainer.gen_opt.m, trainer.gen_opt.v):
        _assign(m, take(f"opt.gen.m.{n}"), n)
        _assign(v, take(f"opt.gen.v.{n}"), n)
    trainer.gen_opt.step = int(config["opt.gen.step"])
    for key, critic in trainer.critics.items():
        opt = trainer.critic_opts[key]
        for (n, p), m, v in zip(critic.named_parameters(), opt.m, opt.v):
            _assign(p.data, take(f"critic.{key}.{n}"), n)
            _assign(m, take(f"opt.critic.{key}.m.{n}"), n)
            _assign(v, take(f"opt.critic.{key}.v.{n}"), n)
        opt.step = int(config[f"opt.critic.{key}.step"])
        for layer, stats in critic.stats.items():
            stats.mean = take(f"stats.{key}.{layer}.mean").astype(np.float64)
            stats.var = take(f"stats.{key}.{layer}.var").astype(np.float64)
            stats.updates = int(config[f"stats.{key}.{layer}.updates"])
    if table:
        raise CheckpointError(f"unexpected records: {sorted(table)[:5]}")
    trainer.iteration = int(config["state.iteration"])
    trainer.critic_updates = int(config["state.critic_updates"])
    return trainer


def load_model(path) -> tuple[GenerativeModel, Optional[Scale], Trainer]:
    trainer = load_checkpoint(path)
    return trainer.model, trainer.scale, trainer
