"""Intention-annotation records and corpus statistics."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from gmk import errors
from gmk.windows import WordTiming

ONTOLOGY = (
    "Deixis",
    "Emphasis",
    "Mental State",
    "Process",
    "Quantification",
    "Spatial Relation",
    "Negation",
    "Affirmation",
    "Valence",
    "Modal",
    "Comparison",
    "Interrogative",
    "Contrast",
    "Intensifier",
    "Performance Factor",
    "Physical Relation",
)
SPLITS = ("train", "val", "test")


def _norm(label: str) -> str:
    return re.sub(r"\s+", " ", str(label)).strip().casefold()


_LOOKUP = {_norm(c): c for c in ONTOLOGY}


def canonical_function(label: str) -> str | None:
    return _LOOKUP.get(_norm(label))


@dataclass(frozen=True)
class AnnotationRecord:
    utterance_id: str
    transcript: str = ""
    words: tuple[WordTiming, ...] = ()
    functions: tuple[str, ...] = ()
    intention: str = ""
    mappings: tuple[tuple[str, str], ...] = ()
    split: str = "train"

    @property
    def word_count(self) -> int:
        return len(self.words) if self.words else len(self.transcript.split())

    @property
    def duration(self) -> float | None:
        if not self.words:
            return None
        return self.words[-1].end - self.words[0].start

    @property
    def speech_rate(self) -> float | None:
        dur = self.duration
        return self.word_count / dur if dur else None


def parse_record(obj: dict, line: int = 0) -> AnnotationRecord:
    if not isinstance(obj, dict):
        raise errors.MalformedJson(line, "(record is not an object)")
    functions = []
    for label in obj.get("functions", []):
        canon = canonical_function(label)
        if canon is None:
            raise errors.UnknownFunction(line, label)
        if canon not in functions:
            functions.append(canon)
    try:
        words = tuple(WordTiming.from_json(w) for w in obj.get("words", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.MalformedJson(line, f"(bad word timing: {exc})") from exc
    for a, b in zip(words, words[1:]):
        if b.start < a.start:
            raise errors.UnsortedWords(f"line {line}: words not sorted by start time")
    mappings = []
    for m in obj.get("mappings", []):
        fn, phrase = (m["function"], m["gesture"]) if isinstance(m, dict) else m
        canon = canonical_function(fn)
        if canon is None:
            raise errors.UnknownFunction(line, fn)
        mappings.append((canon, str(phrase)))
    split = str(obj.get("split", "train")).strip().lower()
    if split not in SPLITS:
        raise errors.MalformedJson(line, f"(unknown split {split!r})")
    return AnnotationRecord(
        utterance_id=str(obj.get("id", line)),
        transcript=str(obj.get("transcript", "")),
        words=words,
        functions=tuple(functions),
        intention=str(obj.get("intention", "")),
        mappings=tuple(mappings),
        split=split,
    )


def iter_annotations(path) -> Iterator[AnnotationRecord]:
    """Yield validated records from a JSON-lines file, one utterance at a time."""
    path = Path(path)
    if not path.is_file():
        raise errors.MissingFile(f"annotation file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise errors.MalformedJson(n, f"({exc.msg})") from exc
            yield parse_record(obj, n)


def parse_annotations(path) -> list[AnnotationRecord]:
    return list(iter_annotations(path))


def record_to_json(rec: AnnotationRecord) -> dict:
    return {
        "id": rec.utterance_id,
        "transcript": rec.transcript,
        "words": [{"word": w.word, "start": w.start, "end": w.end} for w in rec.words],
        "functions": list(rec.functions),
        "intention": rec.intention,
        "mappings": [list(m) for m in rec.mappings],
        "split": rec.split,
    }


@dataclass
class FunctionDistribution:
    share: dict[str, float]  # fraction of all function occurrences
    presence: dict[str, float]  # fraction of utterances containing the function
    counts: dict[str, int]
    n_records: int


@dataclass
class Cooccurrence:
    matrix: np.ndarray  # P(col | row)
    support: np.ndarray  # utterances containing each function
    joint: np.ndarray  # utterances containing both
    zero_support: list[str] = field(default_factory=list)


_POS = {c: i for i, c in enumerate(ONTOLOGY)}


class CorpusAccumulator:
    """Single-pass tally of function presence, joint presence and utterance features."""

    def __init__(self):
        k = len(ONTOLOGY)
        self.n_records = 0
        self.joint = np.zeros((k, k), dtype=np.int64)
        self.splits = Counter()
        self.n_functions: list[int] = []
        self.word_counts: list[int] = []
        self.timed: list[tuple[int, float, float]] = []  # (n_functions, duration, rate)

    def add(self, rec: AnnotationRecord) -> None:
        self.n_records += 1
        idx = sorted({_POS[f] for f in rec.functions})
        self.joint[np.ix_(idx, idx)] += 1
        self.splits[rec.split] += 1
        self.n_functions.append(len(rec.functions))
        self.word_counts.append(rec.word_count)
        if rec.duration:
            self.timed.append((len(rec.functions), rec.duration, rec.speech_rate))

    def distribution(self) -> FunctionDistribution:
        if not self.n_records:
            raise errors.EmptyCorpus("no records")
        counts = np.diag(self.joint)
        total = int(counts.sum())
        share = {c: (int(counts[i]) / total if total else 0.0) for i, c in enumerate(ONTOLOGY)}
        presence = {c: int(counts[i]) / self.n_records for i, c in enumerate(ONTOLOGY)}
        return FunctionDistribution(share, presence, {c: int(counts[i]) for i, c in enumerate(ONTOLOGY)},
                                    self.n_records)

    def cooccurrence(self) -> Cooccurrence:
        if not self.n_records:
            raise errors.EmptyCorpus("no records")
        support = np.diag(self.joint).copy()
        matrix = np.zeros(self.joint.shape)
        nz = support > 0
        matrix[nz] = self.joint[nz] / support[nz, None]
        return Cooccurrence(matrix, support, self.joint.copy(), [ONTOLOGY[i] for i in np.flatnonzero(~nz)])


def _accumulate(records: Iterable[AnnotationRecord]) -> CorpusAccumulator:
    acc = CorpusAccumulator()
    for r in records:
        acc.add(r)
    return acc


def function_distribution(records: Iterable[AnnotationRecord]) -> FunctionDistribution:
    return _accumulate(records).distribution()


def cooccurrence(records: Iterable[AnnotationRecord]) -> Cooccurrence:
    """``P(j | i)``: share of utterances containing ``i`` that also contain ``j``.

    Functions that never occur get an all-zero row and are listed in
    ``zero_support``.
    """
    return _accumulate(records).cooccurrence()


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise errors.LengthMismatch(f"lengths {len(x)} and {len(y)} differ")
    if len(x) < 2:
        raise errors.LengthMismatch("pearson needs at least 2 points")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise errors.ZeroVariance("pearson undefined for a constant input")
    return float(np.clip((xc @ yc) / np.sqrt(sxx * syy), -1.0, 1.0))


@dataclass
class CorpusStats:
    distribution: FunctionDistribution
    cooccur: Cooccurrence
    correlations: dict[str, float | None]
    split_counts: dict[str, int]
    n_records: int
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "split_counts": self.split_counts,
            "functions": list(ONTOLOGY),
            "share": self.distribution.share,
            "presence": self.distribution.presence,
            "counts": self.distribution.counts,
            "cooccurrence": self.cooccur.matrix.tolist(),
            "zero_support": self.cooccur.zero_support,
            "correlations": self.correlations,
            "flags": self.flags,
        }


def _safe_pearson(x, y, name, flags):
    try:
        return pearson(x, y)
    except (errors.ZeroVariance, errors.LengthMismatch) as exc:
        flags.append(f"{name}: {exc}")
        return None


def corpus_report(records: Iterable[AnnotationRecord]) -> CorpusStats:
    """Function distribution, co-occurrence, and correlations of per-utterance function count.

    Correlations are against word count, duration in seconds and speech rate
    (words per second); utterances without word timings only enter the word
    count correlation. A correlation that cannot be computed is ``None`` and
    the reason is listed in ``flags``. ``records`` may be a lazy iterator.
    """
    acc = _accumulate(records)
    dist = acc.distribution()
    co = acc.cooccurrence()
    flags: list[str] = []
    t_fn = [t[0] for t in acc.timed]
    corr = {
        "word_count": _safe_pearson(acc.n_functions, acc.word_counts, "word_count", flags),
        "duration": _safe_pearson(t_fn, [t[1] for t in acc.timed], "duration", flags),
        "speech_rate": _safe_pearson(t_fn, [t[2] for t in acc.timed], "speech_rate", flags),
    }
    split_counts = {s: acc.splits.get(s, 0) for s in SPLITS}
    return CorpusStats(dist, co, corr, split_counts, acc.n_records, flags)


def write_cooccurrence_csv(co: Cooccurrence, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("function," + ",".join(ONTOLOGY) + "\n")
        for name, row in zip(ONTOLOGY, co.matrix):
            fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")
