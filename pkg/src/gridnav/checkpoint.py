"""Binary checkpoint files for policy parameters.

Layout (all integers little-endian):

    8s   magic  b"GNAVNET\\0"
    u32  format version (1)
    u32  cell code (0 = gru, 1 = none)
    u32  number of architecture dims
    u32* architecture dims: input, encoder dims..., hidden, n_actions
    u64  optimizer step counter
    u32  number of blocks
    per block:
        u16  name length, then utf-8 name
        u64  float count (length prefix)
        f64* block data

Parameter blocks use their plain names; Adam moments are stored as
"m:<name>" / "v:<name>" so a checkpoint can resume training. Loading
validates every block's length against the configured architecture.
"""

from __future__ import annotations

import struct

import numpy as np

from .nn import CELL_GRU, CELL_NONE, NetConfig, PolicyParams

MAGIC = b"GNAVNET\0"
VERSION = 1
_CELL_CODES = {CELL_GRU: 0, CELL_NONE: 1}
_CELL_NAMES = {v: k for k, v in _CELL_CODES.items()}


class CheckpointError(ValueError):
    pass


def _arch_dims(cfg: NetConfig):
    return [cfg.input_dim, *cfg.encoder_dims, cfg.hidden_size, cfg.n_actions]


def save(path, params: PolicyParams, include_moments=True):
    cfg = params.cfg
    dims = _arch_dims(cfg)
    blocks = list(params.blocks.items())
    if include_moments:
        blocks += [(f"m:{k}", v) for k, v in params.m.items()]
        blocks += [(f"v:{k}", v) for k, v in params.v.items()]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, _CELL_CODES[cfg.cell], len(dims)))
        f.write(struct.pack(f"<{len(dims)}I", *dims))
        f.write(struct.pack("<QI", params.step, len(blocks)))
        for name, arr in blocks:
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            data = np.ascontiguousarray(arr, dtype="<f8")
            f.write(struct.pack("<Q", data.size))
            f.write(data.tobytes())


def load(path, cfg: NetConfig) -> PolicyParams:
    """Read a checkpoint into a fresh PolicyParams, validating against cfg."""
    with open(path, "rb") as f:
        raw = f.read()
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise CheckpointError("truncated checkpoint")
        out = struct.unpack_from(fmt, raw, off)
        off += size
        return out

    if raw[:8] != MAGIC:
        raise CheckpointError("bad format tag")
    off = 8
    version, cell_code, ndims = take("<III")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    dims = list(take(f"<{ndims}I"))
    if cell_code not in _CELL_NAMES or _CELL_NAMES[cell_code] != cfg.cell:
        raise CheckpointError("cell type mismatch")
    if dims != _arch_dims(cfg):
        raise CheckpointError(
            f"architecture dims {dims} do not match configured {_arch_dims(cfg)}"
        )
    step, nblocks = take("<QI")

    params = PolicyParams(cfg, init=False)
    params.step = int(step)
    expected = cfg.block_shapes()
    seen = set()
    for _ in range(nblocks):
        (name_len,) = take("<H")
        name = raw[off : off + name_len].decode("utf-8")
        off += name_len
        (count,) = take("<Q")
        data = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(
            np.float64
        )
        off += count * 8
        base = name.split(":", 1)[-1]
        if base not in expected:
            raise CheckpointError(f"unknown block {name!r}")
        shape = expected[base]
        if count != int(np.prod(shape)):
            raise CheckpointError(
                f"block {name!r} has {count} values, expected shape {shape}"
            )
        target = params.blocks if ":" not in name else (
            params.m if name.startswith("m:") else params.v
        )
        target[base] = data.reshape(shape)
        seen.add(name)
    missing = [k for k in expected if k not in seen]
    if missing:
        raise CheckpointError(f"missing parameter blocks: {missing}")
    return params
