"""Pose sequences: loading, canonicalization, smoothing and speed."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from gmk import errors

KINDS = ("angle", "position_x", "position_y", "position_z")
REGIONS = ("head", "arms_shoulders", "hands_fingers", "torso", "legs_feet")
POSITION_KINDS = KINDS[1:]


@dataclass(frozen=True)
class ChannelDescriptor:
    joint_name: str
    kind: str
    body_region: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise errors.InputError(f"unknown channel kind {self.kind!r}")
        if self.body_region not in REGIONS:
            raise errors.InputError(f"unknown body region {self.body_region!r}")

    @property
    def is_position(self) -> bool:
        return self.kind in POSITION_KINDS

    def to_json(self) -> dict:
        return {"joint": self.joint_name, "kind": self.kind, "region": self.body_region}

    @classmethod
    def from_json(cls, obj: dict) -> "ChannelDescriptor":
        return cls(obj["joint"], obj["kind"], obj["region"])


@dataclass(frozen=True)
class PoseSequence:
    """A ``T x C`` matrix of joint values sampled at ``fps``."""

    data: np.ndarray
    fps: float
    channels: tuple[ChannelDescriptor, ...] = field(default=())

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise errors.ShapeMismatch(f"pose data must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1:
            raise errors.EmptyInput("pose sequence has no frames")
        if not self.fps > 0:
            raise errors.InputError(f"fps must be positive, got {self.fps}")
        channels = tuple(self.channels)
        if not channels:
            channels = tuple(ChannelDescriptor(f"ch{i}", "angle", "torso") for i in range(data.shape[1]))
        if len(channels) != data.shape[1]:
            raise errors.ColumnCountMismatch(0, len(channels), data.shape[1])
        keys = [(c.joint_name, c.kind) for c in channels]
        if len(set(keys)) != len(keys):
            raise errors.InputError("duplicate (joint, kind) channel descriptors")
        bad = np.argwhere(~np.isfinite(data))
        if len(bad):
            raise errors.NonFiniteValue(int(bad[0][0]), int(bad[0][1]))
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "channels", channels)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    def with_data(self, data) -> "PoseSequence":
        return PoseSequence(data, self.fps, self.channels)

    def channel_index(self, joint_name: str, kind: str) -> int:
        for i, c in enumerate(self.channels):
            if c.joint_name == joint_name and c.kind == kind:
                return i
        raise errors.RootChannelMissing(f"no channel ({joint_name}, {kind})")

    def root_channels(self, joint_name: str) -> list[int]:
        return [self.channel_index(joint_name, k) for k in POSITION_KINDS]


def read_manifest(path) -> tuple[float, list[ChannelDescriptor]]:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingFile(f"manifest not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        fps = float(obj["fps"])
        channels = [ChannelDescriptor.from_json(c) for c in obj["channels"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.InputError(f"invalid manifest {path}: {exc}") from exc
    return fps, channels


def write_manifest(path, fps: float, channels: Sequence[ChannelDescriptor]) -> None:
    obj = {"fps": fps, "channels": [c.to_json() for c in channels]}
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def default_manifest_path(pose_path) -> Path:
    return Path(pose_path).with_suffix(".json")


def load_pose_sequence(path, layout: Sequence[ChannelDescriptor], fps: float = 30.0) -> PoseSequence:
    """Parse a headerless CSV (one frame per row) into a :class:`PoseSequence`.

    Rows must all have ``len(layout)`` columns of finite decimals. NaN or Inf is
    rejected rather than imputed.
    """
    path = Path(path)
    if not path.is_file():
        raise errors.MissingFile(f"pose file not found: {path}")
    n_cols = len(layout)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for r, row in enumerate(csv.reader(fh)):
            if len(row) != n_cols:
                raise errors.ColumnCountMismatch(r, n_cols, len(row))
            vals = []
            for c, tok in enumerate(row):
                try:
                    v = float(tok)
                except ValueError as exc:
                    raise errors.InputError(f"row {r}, column {c}: not a number {tok!r}") from exc
                if not math.isfinite(v):
                    raise errors.NonFiniteValue(r, c)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise errors.MissingData(f"{path} contains no frames")
    return PoseSequence(np.array(rows), fps, tuple(layout))


def load_with_manifest(pose_path, manifest_path=None) -> PoseSequence:
    manifest_path = manifest_path or default_manifest_path(pose_path)
    fps, channels = read_manifest(manifest_path)
    return load_pose_sequence(pose_path, channels, fps)


def save_pose_sequence(seq: PoseSequence, path, precision: int = 6) -> None:
    fmt = f"{{:.{precision}f}}"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in seq.data:
            fh.write(",".join(fmt.format(v) for v in row) + "\n")


def canonicalize(seq: PoseSequence, root_channels: Sequence[int]) -> PoseSequence:
    """Express every position channel relative to the per-frame root position.

    ``root_channels`` are the x, y, z channel indices of the root joint. Angle
    channels pass through unchanged.
    """
    root_channels = list(root_channels)
    if len(root_channels) != 3:
        raise errors.RootChannelMissing("root must be given as 3 position channels")
    for i in root_channels:
        if not 0 <= i < seq.n_channels:
            raise errors.RootChannelMissing(f"root channel {i} not in sequence")
    kinds = [seq.channels[i].kind for i in root_channels]
    if sorted(kinds) != list(POSITION_KINDS):
        raise errors.RootChannelsNotPosition(f"root channels have kinds {kinds}")

    out = seq.data.copy()
    root = {seq.channels[i].kind: seq.data[:, i] for i in root_channels}
    for j, ch in enumerate(seq.channels):
        if ch.is_position:
            out[:, j] = seq.data[:, j] - root[ch.kind]
    return seq.with_data(out)


def default_smooth_window(fps: float) -> int:
    w = max(1, round(fps / 6.0))
    return w if w % 2 == 1 else w + 1


def smooth(y, window: int) -> np.ndarray:
    """Centered moving average with edge replication. Length is preserved."""
    y = np.asarray(y, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise errors.WindowEven(f"window must be odd and positive, got {window}")
    if window > len(y):
        raise errors.WindowTooLarge(f"window {window} exceeds length {len(y)}")
    if window == 1:
        return y.copy()
    half = window // 2
    padded = np.concatenate([np.full(half, y[0]), y, np.full(half, y[-1])])
    windows = np.lib.stride_tricks.sliding_window_view(padded, window)
    return windows.mean(axis=1)


@dataclass(frozen=True)
class SpeedSeries:
    values: np.ndarray
    fps: float


def speed(seq: PoseSequence, channel_subset: Sequence[int]) -> SpeedSeries:
    """``fps * ||row[t+1] - row[t]||`` over the chosen channels."""
    idx = list(channel_subset)
    if not idx:
        raise errors.EmptySubset("speed needs at least one channel")
    if seq.n_frames < 2:
        raise errors.TooFewFrames("speed needs at least 2 frames")
    diff = np.diff(seq.data[:, idx], axis=0)
    return SpeedSeries(seq.fps * np.linalg.norm(diff, axis=1), seq.fps)
