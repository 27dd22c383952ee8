"""FMCK checkpoint format: bit-exact save/load of a PolicyModel.

Layout (all integers little-endian):
    magic "FMCK" | version u32
    | kind (u16 len + utf8) | arch json (u32 len + utf8)
    | action normalizer: dim u16, mins f64[dim], maxs f64[dim]
    | state normalizer flag u8 (+ dim/mins/maxs when present)
    | schedule flag u8 (+ K u32 + betas f64[K] when present)
    | param count u32
    | per param: name (u16 len + utf8), dtype code u8 (0 = float32),
      rank u8, dims u32[rank], little-endian float32 payload
    | trailing CRC32 u32 over everything before it
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..policy.model import PolicyModel
from ..policy.normalizer import MinMaxNormalizer
from ..policy.schedule import NoiseSchedule
from ..policy.unet import ArchConfig, build_unet
from ..nn import ParamStore
from ..rng import RngStream

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
    "CrcError",
    "TruncatedError",
    "VersionError",
]

MAGIC = b"FMCK"
VERSION = 1
DTYPE_F32 = 0


class CheckpointError(ValueError):
    """Base class for malformed checkpoint files."""


class CrcError(CheckpointError):
    """Trailing CRC32 does not match the file contents."""


class TruncatedError(CheckpointError):
    """File ends before the declared contents."""


class VersionError(CheckpointError):
    """Unknown format version (or bad magic)."""


def _pack_str16(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<H", len(b)) + b


def _pack_norm(norm: MinMaxNormalizer) -> bytes:
    dim = norm.mins.size
    return (
        struct.pack("<H", dim)
        + norm.mins.astype("<f8").tobytes()
        + norm.maxs.astype("<f8").tobytes()
    )


def save_checkpoint(model: PolicyModel, path) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    parts.append(_pack_str16(model.kind))
    arch_json = model.arch.to_json().encode("utf-8")
    parts.append(struct.pack("<I", len(arch_json)) + arch_json)
    if not model.action_norm.fitted:
        raise ValueError("cannot checkpoint a model with unfitted action normalizer")
    parts.append(_pack_norm(model.action_norm))
    if model.state_norm is not None and model.state_norm.fitted:
        parts.append(b"\x01" + _pack_norm(model.state_norm))
    else:
        parts.append(b"\x00")
    if model.schedule is not None:
        betas = model.schedule.betas
        parts.append(b"\x01" + struct.pack("<I", betas.size) + betas.astype("<f8").tobytes())
    else:
        parts.append(b"\x00")

    names = sorted(model.store.params)
    parts.append(struct.pack("<I", len(names)))
    for name in names:
        arr = model.store.params[name].data
        if arr.dtype != np.float32:
            raise ValueError(f"parameter {name} is {arr.dtype}, only float32 is serializable")
        parts.append(_pack_str16(name))
        parts.append(struct.pack("<BB", DTYPE_F32, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).astype("<f4").tobytes())

    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.raw):
            raise TruncatedError(f"need {n} bytes at offset {self.off}, file has {len(self.raw)}")
        out = self.raw[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def str16(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    def f64_array(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def _read_norm(r: _Reader) -> MinMaxNormalizer:
    (dim,) = r.unpack("<H")
    mins = r.f64_array(dim)
    maxs = r.f64_array(dim)
    return MinMaxNormalizer(mins=mins, maxs=maxs)


def load_checkpoint(path) -> PolicyModel:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise TruncatedError(f"file is only {len(raw)} bytes")
    body, (crc_stored,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise CrcError("checkpoint CRC32 mismatch")

    r = _Reader(body)
    if r.take(4) != MAGIC:
        raise VersionError("not an FMCK file (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise VersionError(f"unsupported FMCK version {version}")

    kind = r.str16()
    (alen,) = r.unpack("<I")
    arch = ArchConfig.from_json(r.take(alen).decode("utf-8"))
    action_norm = _read_norm(r)
    (has_state,) = r.unpack("<B")
    state_norm = _read_norm(r) if has_state else None
    (has_sched,) = r.unpack("<B")
    schedule = None
    if has_sched:
        (k,) = r.unpack("<I")
        schedule = NoiseSchedule(r.f64_array(k), validate=False)

    net = build_unet(arch, RngStream(0).generator())
    store = ParamStore.from_module(net)
    (count,) = r.unpack("<I")
    if count != len(store.params):
        raise CheckpointError(f"checkpoint has {count} params, architecture expects {len(store.params)}")
    for _ in range(count):
        name = r.str16()
        dtype_code, rank = r.unpack("<BB")
        if dtype_code != DTYPE_F32:
            raise CheckpointError(f"unknown dtype code {dtype_code} for {name}")
        shape = r.unpack(f"<{rank}I")
        if name not in store.params:
            raise CheckpointError(f"unexpected parameter name {name!r}")
        param = store.params[name]
        if tuple(param.data.shape) != shape:
            raise CheckpointError(f"parameter {name} shape {shape} != expected {param.data.shape}")
        n = int(np.prod(shape)) if shape else 1
        param.data = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape).astype(np.float32)
    if r.off != len(body):
        raise CheckpointError(f"{len(body) - r.off} trailing bytes after parameters")

    return PolicyModel(
        kind=kind,
        arch=arch,
        net=net,
        store=store,
        action_norm=action_norm,
        state_norm=state_norm,
        schedule=schedule,
    )
