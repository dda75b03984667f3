"""Gesture evaluation metrics: FGD, L1 diversity, beat constancy and Recall@K."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gmk import errors
from gmk.motion import POSITION_KINDS, PoseSequence, canonicalize, smooth, speed

SYM_TOL = 1e-10
CLAMP_REL = 1e-8
DEFAULT_BC_SIGMA = 0.1


@dataclass(frozen=True)
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray
    count: int


def gaussian_stats(features) -> GaussianStats:
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    N = X.shape[0]
    if N < 2:
        raise errors.TooFewSamples(f"need at least 2 samples, got {N}")
    mu = X.mean(axis=0)
    Xc = X - mu
    S = Xc.T @ Xc / (N - 1)
    return GaussianStats(mu, (S + S.T) / 2, N)


def matrix_sqrt_psd(S) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix via eigendecomposition.

    Negative eigenvalues (round-off) are clamped to zero.
    """
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    scale = max(np.abs(S).max(), 1.0)
    if S.shape[0] != S.shape[1] or np.abs(S - S.T).max() > SYM_TOL * scale:
        raise errors.NotSymmetric("matrix is not symmetric")
    w, U = np.linalg.eigh((S + S.T) / 2)
    w = np.clip(w, 0.0, None)
    R = (U * np.sqrt(w)) @ U.T
    return (R + R.T) / 2


def fgd(r: GaussianStats, g: GaussianStats) -> float:
    """Fréchet distance between two Gaussian fits.

    The cross term uses ``tr((Sr^1/2 Sg Sr^1/2)^1/2)``, which equals
    ``tr((Sr Sg)^1/2)`` for PSD inputs but stays symmetric.
    """
    if r.mu.shape != g.mu.shape or r.sigma.shape != g.sigma.shape:
        raise errors.DimensionMismatch(f"feature dims differ: {r.mu.shape} vs {g.mu.shape}")
    diff = r.mu - g.mu
    root_r = matrix_sqrt_psd(r.sigma)
    M = root_r @ g.sigma @ root_r
    cross = np.trace(matrix_sqrt_psd((M + M.T) / 2))
    val = float(diff @ diff + np.trace(r.sigma) + np.trace(g.sigma) - 2.0 * cross)
    scale = max(1.0, float(np.trace(r.sigma) + np.trace(g.sigma)))
    if val < -CLAMP_REL * scale:
        raise errors.NumericalError(f"FGD came out negative: {val}")
    return max(val, 0.0)


def fgd_features(real, generated) -> float:
    return fgd(gaussian_stats(real), gaussian_stats(generated))


def remove_translation(seq: PoseSequence, root_channels: Sequence[int] | None = None) -> PoseSequence:
    """Strip global translation from the position channels.

    With ``root_channels`` the root trajectory is subtracted; otherwise the
    per-frame centroid of each axis's position channels is used.
    """
    if root_channels is not None:
        return canonicalize(seq, root_channels)
    out = seq.data.copy()
    for kind in POSITION_KINDS:
        idx = [j for j, c in enumerate(seq.channels) if c.kind == kind]
        if idx:
            out[:, idx] -= out[:, idx].mean(axis=1, keepdims=True)
    return seq.with_data(out)


def l1_diversity(sequences: Sequence[PoseSequence], remove_translation_flag: bool = True,
                 root_channels: Sequence[int] | None = None) -> float:
    """Pairwise L1 distance over ordered pairs, normalized by ``2N(N-1)``.

    Distances are summed over all frames and channels.
    """
    seqs = list(sequences)
    N = len(seqs)
    if N < 2:
        raise errors.TooFewSequences(f"need at least 2 sequences, got {N}")
    shape = seqs[0].data.shape
    for s in seqs:
        if s.data.shape != shape or s.channels != seqs[0].channels:
            raise errors.ShapeMismatch("sequences must share frame count and channel layout")
    if remove_translation_flag:
        seqs = [remove_translation(s, root_channels) for s in seqs]
    P = np.stack([s.data.reshape(-1) for s in seqs])
    total = 0.0
    for i in range(N):
        total += float(np.abs(P[i] - P).sum())
    return total / (2 * N * (N - 1))


@dataclass(frozen=True)
class BeatSet:
    times: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        if any(b <= a for a, b in zip(t, t[1:])):
            raise errors.InputError("beat times must be strictly increasing")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return len(self.times)


def local_minima(v) -> list[int]:
    """Indices of strict local minima; a flat-bottomed minimum reports its first index."""
    v = np.asarray(v, dtype=np.float64)
    out = []
    i = 1
    n = len(v)
    while i < n - 1:
        if v[i] < v[i - 1]:
            j = i
            while j + 1 < n and v[j + 1] == v[i]:
                j += 1
            if j + 1 < n and v[j + 1] > v[i]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return out


def extract_motion_beats(seq: PoseSequence, upper_body_channels: Sequence[int],
                         smooth_window: int = 1) -> BeatSet:
    """Beats at local minima of joint speed.

    Speed sample ``t`` lies between frames ``t`` and ``t+1`` and is time-stamped
    at ``(t + 0.5) / fps``.
    """
    if seq.n_frames < 3:
        raise errors.TooFewFrames("beat extraction needs at least 3 frames")
    v = speed(seq, upper_body_channels).values
    w = min(smooth_window, len(v) if len(v) % 2 else len(v) - 1)
    v = smooth(v, max(w, 1))
    return BeatSet(tuple((t + 0.5) / seq.fps for t in local_minima(v)))


def beat_constancy(g: BeatSet, a: BeatSet, sigma: float = DEFAULT_BC_SIGMA) -> float:
    """Mean Gaussian score of each gesture beat's distance to its nearest audio beat."""
    if len(g) == 0 or len(a) == 0:
        raise errors.EmptyBeats("beat constancy needs gesture and audio beats")
    if not sigma > 0:
        raise errors.NonPositiveSigma(f"sigma must be positive, got {sigma}")
    at = a.times
    total = 0.0
    for b in g.times:
        k = bisect.bisect_left(at, b)
        best = math.inf
        if k < len(at):
            best = at[k] - b
        if k > 0:
            best = min(best, b - at[k - 1])
        total += math.exp(-(best * best) / (2.0 * sigma * sigma))
    return total / len(g)


@dataclass(frozen=True)
class EmbeddingSet:
    queries: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.queries, dtype=np.float64))
        t = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        if q.shape != t.shape:
            raise errors.ShapeMismatch(f"queries {q.shape} vs targets {t.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise errors.InputError("embeddings contain non-finite values")
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "targets", t)

    def __len__(self):
        return self.queries.shape[0] if self.queries.size else 0


def _unit(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, n, out=np.zeros_like(x), where=n > 0)


def _hits(q: np.ndarray, t: np.ndarray, k: int) -> int:
    sim = _unit(q) @ _unit(t).T
    true = np.diag(sim)
    idx = np.arange(len(q))
    better = (sim > true[:, None]).sum(axis=1)
    tied_before = ((sim == true[:, None]) & (idx[None, :] < idx[:, None])).sum(axis=1)
    return int(((better + tied_before) < k).sum())


def recall_at_k(emb: EmbeddingSet, k: int, mode: str = "global", batch_size: int = 128) -> float:
    """Percentage of queries whose paired target ranks in the top ``k`` by cosine similarity.

    ``mode="per_batch"`` ranks each query only against targets in its own block
    of ``batch_size`` consecutive rows (the last block may be smaller);
    ``mode="global"`` ranks against all targets. Ties rank by target index.
    """
    N = len(emb)
    if N == 0:
        raise errors.EmptySet("no embeddings")
    if k < 1:
        raise errors.KTooLarge(f"k must be positive, got {k}")
    if mode == "global":
        if k > N:
            raise errors.KTooLarge(f"k={k} exceeds pool of {N}")
        return 100.0 * _hits(emb.queries, emb.targets, k) / N
    if mode != "per_batch":
        raise errors.ConfigError(f"unknown recall mode {mode!r}")
    if k > min(batch_size, N):
        raise errors.KTooLarge(f"k={k} exceeds batch pool of {min(batch_size, N)}")
    hits = 0
    for s in range(0, N, batch_size):
        hits += _hits(emb.queries[s:s + batch_size], emb.targets[s:s + batch_size], k)
    return 100.0 * hits / N
