"""Word-timed windowing, per-region descriptors and keyframe selection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from gmk import errors
from gmk.motion import REGIONS, PoseSequence
from gmk.patterns import (
    ANGLE_THRESHOLDS,
    POSITION_THRESHOLDS,
    TIERS,
    MovementDescriptor,
    Thresholds,
    characterize,
)

MAGNITUDE_ORDER = ("static", "slow", "significant")


@dataclass(frozen=True)
class WordTiming:
    word: str
    start: float
    end: float

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise errors.InputError(f"bad word timing {self.word!r}: [{self.start}, {self.end}]")

    @classmethod
    def from_json(cls, obj: Mapping) -> "WordTiming":
        return cls(str(obj["word"]), float(obj["start"]), float(obj["end"]))


@dataclass(frozen=True)
class Window:
    words: tuple[WordTiming, ...]
    start: float
    end: float
    frame_span: tuple[int, int] | None = None
    residue: bool = False

    @property
    def duration(self) -> float:
        return self.end - self.start

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "words": [w.word for w in self.words],
            "frame_span": list(self.frame_span) if self.frame_span else None,
            "residue": self.residue,
        }


def read_words(path) -> list[WordTiming]:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingFile(f"word timing file not found: {path}")
    words = []
    with path.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                words.append(WordTiming.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise errors.MalformedJson(n, str(exc)) from exc
    return words


def check_words(words: Sequence[WordTiming]) -> None:
    for a, b in zip(words, words[1:]):
        if b.start < a.start:
            raise errors.UnsortedWords(f"{b.word!r} starts before {a.word!r}")
        if b.start < a.end:
            raise errors.OverlappingWords(f"{a.word!r} overlaps {b.word!r}")


def frame_span(start: float, end: float, fps: float) -> tuple[int, int]:
    # small slack so that exact frame times are not pushed across a boundary by rounding
    first = int(math.floor(start * fps + 1e-9))
    last = int(math.ceil(end * fps - 1e-9))
    return first, max(first, last)


def _bisect(start: float, end: float, max_len: float) -> list[tuple[float, float]]:
    if end - start <= max_len:
        return [(start, end)]
    mid = 0.5 * (start + end)
    return _bisect(start, mid, max_len) + _bisect(mid, end, max_len)


def _merge_tail(prev, tail, min_len, max_len):
    """Fold a short trailing span into its predecessor.

    The combined words are re-split at the word boundary giving the most
    balanced pair of in-range windows. Without such a boundary the two spans
    are merged outright if that fits ``max_len``, else left untouched.
    """
    pw, pa, _ = prev
    tw, _, b = tail
    words = pw + [w for w in tw if w not in pw]
    best = None
    for k in range(1, len(words)):
        cut = words[k - 1].end
        left, right = cut - pa, b - cut
        if min_len <= left <= max_len and min_len <= right <= max_len and pa < cut < b:
            score = abs(left - right)
            if best is None or score < best[0]:
                best = (score, k, cut)
    if best is not None:
        _, k, cut = best
        return [(words[:k], pa, cut), (words[k:], cut, b)]
    if b - pa <= max_len:
        return [(words, pa, b)]
    return [prev, tail]


def segment_windows(words: Sequence[WordTiming], min_len: float = 1.0, max_len: float = 2.0,
                    fps: float | None = None) -> list[Window]:
    """Group consecutive words into windows of ``min_len``..``max_len`` seconds.

    Words are accumulated greedily until the next word would push the window
    past ``max_len``. A word that alone exceeds ``max_len`` is bisected at its
    temporal midpoint until every piece fits. Windows tile the utterance
    without gaps: a closed window absorbs as much of the following pause as
    fits, and a pause too long to share becomes word-less windows. A short
    trailing window is folded into its predecessor (see ``_merge_tail``); any
    window still shorter than ``min_len`` is flagged ``residue``.
    """
    words = list(words)
    check_words(words)
    if not words:
        return []

    spans: list[tuple[list[WordTiming], float, float]] = []
    cur: list[WordTiming] = []
    cur_start = words[0].start
    for w in words:
        if cur and w.end - cur_start > max_len:
            # the closed window takes as much of the following pause as fits
            end = min(w.start, cur_start + max_len)
            spans.append((cur, cur_start, end))
            cur, cur_start = [], end
        if not cur and w.end - cur_start > max_len:
            if w.end - w.start > max_len:
                spans.extend(([w], a, b) for a, b in _bisect(cur_start, w.end, max_len))
                cur_start = w.end
                continue
            spans.extend(([], a, b) for a, b in _bisect(cur_start, w.start, max_len))
            cur_start = w.start
        cur.append(w)
    if cur:
        spans.append((cur, cur_start, cur[-1].end))

    if len(spans) > 1 and spans[-1][2] - spans[-1][1] < min_len:
        spans[-2:] = _merge_tail(spans[-2], spans[-1], min_len, max_len)

    out = []
    for ws, a, b in spans:
        span = frame_span(a, b, fps) if fps else None
        out.append(Window(tuple(ws), a, b, span, residue=(b - a) < min_len))
    return out


@dataclass
class RegionDescription:
    region: str
    descriptors: dict[str, MovementDescriptor]
    keyframes: tuple[int, int, int]
    magnitude: str = "static"
    tier: str = TIERS[0]
    pattern: str = "linear"

    def to_json(self) -> dict:
        return {
            "region": self.region,
            "magnitude": self.magnitude,
            "tier": self.tier,
            "pattern": self.pattern,
            "keyframes": list(self.keyframes),
            "channels": {k: d.to_json() for k, d in self.descriptors.items()},
        }


def _check_span(win: Window, seq: PoseSequence) -> tuple[int, int]:
    if win.frame_span is None:
        raise errors.EmptySpan("window has no frame span")
    first, last = win.frame_span
    if last < first:
        raise errors.EmptySpan(f"empty frame span {win.frame_span}")
    if first < 0 or last >= seq.n_frames:
        raise errors.FrameSpanOutOfBounds(
            f"frame span {win.frame_span} outside sequence of {seq.n_frames} frames")
    return first, last


def select_keyframes(win: Window, seq: PoseSequence) -> tuple[int, int, int]:
    """First, last and representative frame of the window.

    The representative frame is the one deviating most (summed absolute
    deviation over channels) from the straight-line interpolation between the
    first and last poses; ties go to the earliest frame.
    """
    first, last = _check_span(win, seq)
    block = seq.data[first:last + 1]
    n = len(block)
    if n <= 2:
        return first, last, first
    alpha = np.linspace(0.0, 1.0, n)[:, None]
    chord = (1 - alpha) * block[0] + alpha * block[-1]
    dev = np.abs(block - chord).sum(axis=1)
    return first, last, first + int(np.argmax(dev))


def thresholds_for(seq: PoseSequence, j: int, angle: Thresholds = ANGLE_THRESHOLDS,
                   position: Thresholds = POSITION_THRESHOLDS) -> Thresholds:
    return position if seq.channels[j].is_position else angle


def channel_key(seq: PoseSequence, j: int) -> str:
    c = seq.channels[j]
    return f"{c.joint_name}.{c.kind}"


def describe_window(win: Window, seq: PoseSequence, th, sigma_ref_per_channel: Sequence[float],
                    *, smooth_window: int = 1) -> list[RegionDescription]:
    """Characterize every channel inside ``win`` and group the results by body region.

    ``th`` is either one :class:`Thresholds` for all channels or a sequence
    with one entry per channel. Region magnitude and tier are the maxima over
    the region's channels; the region pattern is that of its largest-range
    channel. Regions without channels are omitted.
    """
    first, last = _check_span(win, seq)
    keyframes = select_keyframes(win, seq)
    if len(sigma_ref_per_channel) != seq.n_channels:
        raise errors.DimensionMismatch("need one sigma_ref per channel")
    per_channel_th = th if isinstance(th, (list, tuple)) else [th] * seq.n_channels

    out = []
    for region in REGIONS:
        idx = [j for j, c in enumerate(seq.channels) if c.body_region == region]
        if not idx:
            continue
        descs = {}
        for j in idx:
            y = seq.data[first:last + 1, j]
            descs[channel_key(seq, j)] = characterize(
                y, per_channel_th[j], sigma_ref_per_channel[j], smooth_window=smooth_window)
        ds = list(descs.values())
        magnitude = max((d.magnitude for d in ds), key=MAGNITUDE_ORDER.index)
        tier = max((d.tier for d in ds), key=TIERS.index)
        lead = max(ds, key=lambda d: d.range)
        out.append(RegionDescription(region, descs, keyframes, magnitude, tier, lead.pattern))
    return out


def sigma_ref_from_windows(seq: PoseSequence, windows: Iterable[Window], floor: Sequence[float]) -> list[float]:
    """Population std-dev of each channel's per-window range, floored at ``floor``."""
    ranges = []
    for w in windows:
        if w.frame_span is None:
            continue
        a, b = w.frame_span
        b = min(b, seq.n_frames - 1)
        if a > b:
            continue
        block = seq.data[a:b + 1]
        ranges.append(block.max(axis=0) - block.min(axis=0))
    if not ranges:
        return list(floor)
    std = np.std(np.array(ranges), axis=0)
    return [max(float(s), f) for s, f in zip(std, floor)]
