"""Seeded synthetic pose, word and annotation data for demos and tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from gmk.annotations import ONTOLOGY
from gmk.motion import ChannelDescriptor, PoseSequence, save_pose_sequence, write_manifest

WORDS = ("so", "this", "is", "really", "the", "point", "we", "never", "expected", "here", "and", "there")


def upper_body_layout() -> tuple[ChannelDescriptor, ...]:
    chans = [ChannelDescriptor("pelvis", k, "torso") for k in ("position_x", "position_y", "position_z")]
    chans += [
        ChannelDescriptor("spine", "angle", "torso"),
        ChannelDescriptor("head", "angle", "head"),
        ChannelDescriptor("l_elbow", "angle", "arms_shoulders"),
        ChannelDescriptor("r_elbow", "angle", "arms_shoulders"),
        ChannelDescriptor("l_wrist", "angle", "hands_fingers"),
        ChannelDescriptor("r_wrist", "angle", "hands_fingers"),
    ]
    for side in ("l_hand", "r_hand"):
        chans += [ChannelDescriptor(side, k, "hands_fingers") for k in ("position_x", "position_y", "position_z")]
    return tuple(chans)


def gesture_sequence(rng: np.random.Generator, seconds: float = 3.0, fps: float = 30.0,
                     amplitude: float = 1.0, drift: float = 0.0) -> PoseSequence:
    """Smooth random gestures: a few sinusoids per channel plus optional root drift."""
    lay = upper_body_layout()
    T = max(int(round(seconds * fps)), 1)
    t = np.arange(T) / fps
    data = np.zeros((T, len(lay)))
    for j, ch in enumerate(lay):
        scale = 0.1 if ch.is_position else 0.4
        for _ in range(3):
            f = rng.uniform(0.3, 2.5)
            data[:, j] += amplitude * scale * rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    root = drift * np.outer(t, rng.normal(size=3)) + rng.normal(size=3)
    for j, ch in enumerate(lay):
        if ch.is_position:
            data[:, j] += root[:, "xyz".index(ch.kind[-1])]
    return PoseSequence(data, fps, lay)


def static_sequence(seconds: float = 3.0, fps: float = 30.0) -> PoseSequence:
    lay = upper_body_layout()
    return PoseSequence(np.zeros((int(round(seconds * fps)), len(lay))), fps, lay)


def word_timings(rng: np.random.Generator, seconds: float) -> list[dict]:
    out, t = [], 0.0
    while True:
        dur = rng.uniform(0.15, 0.6)
        if t + dur > seconds:
            break
        out.append({"word": str(rng.choice(WORDS)), "start": round(t, 3), "end": round(t + dur, 3)})
        t += dur + rng.choice([0.0, 0.0, 0.05, 0.2])
    return out


def write_pose(seq: PoseSequence, path) -> Path:
    path = Path(path)
    save_pose_sequence(seq, path, precision=9)
    write_manifest(path.with_suffix(".json"), seq.fps, seq.channels)
    return path


def write_words(words: list[dict], path) -> Path:
    path = Path(path)
    path.write_text("".join(json.dumps(w) + "\n" for w in words), encoding="utf-8")
    return path


def annotation_corpus(rng: np.random.Generator, n: int = 200) -> list[dict]:
    """Records whose function count grows with utterance length."""
    out = []
    weights = np.linspace(2.0, 0.2, len(ONTOLOGY))
    weights /= weights.sum()
    for i in range(n):
        words = word_timings(rng, rng.uniform(1.0, 6.0))
        k = min(len(ONTOLOGY), max(0, len(words) // 3 + int(rng.integers(-1, 2))))
        fns = list(rng.choice(ONTOLOGY, size=k, replace=False, p=weights)) if k else []
        split = ("train", "val", "test")[int(rng.choice(3, p=[0.72, 0.08, 0.2]))]
        out.append({
            "id": f"utt{i:05d}",
            "transcript": " ".join(w["word"] for w in words),
            "words": words,
            "functions": fns,
            "intention": "synthetic",
            "mappings": [[f, "gesture"] for f in fns],
            "split": split,
        })
    return out
