"""Demonstration dataset container and FMDS file format.

FMDS layout (all integers little-endian):
    magic "FMDS" | version u32 | task id (u16 len + utf8) | seed u64
    | n u32 | Tp u16 | ActD u16
    | layout: state_dim u16, image_channels u16, image_size u16, use_affordance u8
    | per-sample packed float32 payload (state, image, affordance, trajectory)
A textual manifest sidecar (<file>.manifest.txt) lists the sample count
and the CRC32 of the payload section.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..policy.observation import Observation, ObservationLayout

__all__ = ["DemoDataset", "DatasetFormatError"]

MAGIC = b"FMDS"
VERSION = 1


class DatasetFormatError(ValueError):
    """Corrupt, truncated or version-mismatched dataset file."""


@dataclass
class DemoDataset:
    """List of (observation, trajectory) pairs plus generation metadata."""

    task_id: str
    seed: int
    tp: int
    act_dim: int
    layout: ObservationLayout
    samples: list = field(default_factory=list)  # [(Observation, (Tp, ActD) float32)]

    def __post_init__(self):
        for obs, traj in self.samples:
            self._check_sample(obs, traj)

    def _check_sample(self, obs: Observation, traj: np.ndarray):
        if traj.shape != (self.tp, self.act_dim):
            raise ValueError(f"trajectory shape {traj.shape} != ({self.tp}, {self.act_dim})")
        self.layout.check(obs)

    def add(self, obs: Observation, traj: np.ndarray):
        traj = np.asarray(traj, dtype=np.float32)
        self._check_sample(obs, traj)
        self.samples.append((obs, traj))

    def __len__(self):
        return len(self.samples)

    def actions(self) -> np.ndarray:
        return np.stack([t for _, t in self.samples])

    def states(self) -> np.ndarray | None:
        if not self.layout.has_state:
            return None
        return np.stack([o.state for o, _ in self.samples])

    def split(self, holdout_fraction: float, stream) -> tuple:
        """Deterministic shuffled split into (train, holdout)."""
        order = stream.permutation(len(self.samples))
        n_hold = max(1, int(round(holdout_fraction * len(self.samples))))
        hold_idx = set(order[:n_hold].tolist())
        train = DemoDataset(self.task_id, self.seed, self.tp, self.act_dim, self.layout)
        hold = DemoDataset(self.task_id, self.seed, self.tp, self.act_dim, self.layout)
        for i, s in enumerate(self.samples):
            (hold if i in hold_idx else train).samples.append(s)
        return train, hold

    # -- serialization ---------------------------------------------------

    def _sample_bytes(self, obs: Observation, traj: np.ndarray) -> bytes:
        parts = []
        if self.layout.has_state:
            parts.append(obs.state.astype("<f4").tobytes())
        if self.layout.image_channels > 0:
            parts.append(obs.image.astype("<f4").tobytes())
        if self.layout.use_affordance:
            parts.append(obs.affordance.astype("<f4").tobytes())
        parts.append(traj.astype("<f4").tobytes())
        return b"".join(parts)

    def save(self, path) -> None:
        path = Path(path)
        lay = self.layout
        task = self.task_id.encode("utf-8")
        header = MAGIC + struct.pack("<I", VERSION)
        header += struct.pack("<H", len(task)) + task
        header += struct.pack("<QIHH", self.seed, len(self.samples), self.tp, self.act_dim)
        header += struct.pack("<HHHB", lay.state_dim, lay.image_channels, lay.image_size, int(lay.use_affordance))
        payload = b"".join(self._sample_bytes(o, t) for o, t in self.samples)
        path.write_bytes(header + payload)
        crc = zlib.crc32(payload) & 0xFFFFFFFF
        manifest = f"task = {self.task_id}\nsamples = {len(self.samples)}\npayload_crc32 = {crc:08x}\n"
        Path(str(path) + ".manifest.txt").write_text(manifest)

    @classmethod
    def load(cls, path) -> "DemoDataset":
        raw = Path(path).read_bytes()
        if raw[:4] != MAGIC:
            raise DatasetFormatError("not an FMDS file (bad magic)")
        off = 4
        (version,) = struct.unpack_from("<I", raw, off)
        off += 4
        if version != VERSION:
            raise DatasetFormatError(f"unsupported FMDS version {version}")
        (tlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        task_id = raw[off : off + tlen].decode("utf-8")
        off += tlen
        seed, n, tp, actd = struct.unpack_from("<QIHH", raw, off)
        off += struct.calcsize("<QIHH")
        sd, ic, isz, aff = struct.unpack_from("<HHHB", raw, off)
        off += struct.calcsize("<HHHB")
        layout = ObservationLayout(state_dim=sd, image_channels=ic, image_size=isz, use_affordance=bool(aff))

        per = tp * actd + sd + ic * isz * isz + (isz * isz if aff else 0)
        expected = n * per * 4
        payload = raw[off:]
        if len(payload) != expected:
            raise DatasetFormatError(f"payload length {len(payload)} != expected {expected}")

        ds = cls(task_id=task_id, seed=seed, tp=tp, act_dim=actd, layout=layout)
        vals = np.frombuffer(payload, dtype="<f4").reshape(n, per)
        for row in vals:
            pos = 0
            state = image = heat = None
            if sd:
                state = row[pos : pos + sd].copy()
                pos += sd
            if ic:
                image = row[pos : pos + ic * isz * isz].reshape(ic, isz, isz).copy()
                pos += ic * isz * isz
            if aff:
                heat = row[pos : pos + isz * isz].reshape(1, isz, isz).copy()
                pos += isz * isz
            traj = row[pos:].reshape(tp, actd).copy()
            ds.samples.append((Observation(state=state, image=image, affordance=heat), traj))
        return ds
