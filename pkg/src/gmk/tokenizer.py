"""Multi-codebook vector quantization of motion latents.

The latent row is split into ``n`` contiguous chunks of ``d`` dims and chunk
``i`` is replaced by its nearest entry in codebook ``i``. Latents come from a
linear principal-component codec fitted on pose frames. Codebooks are learned
by Lloyd / EMA k-means with dead-code re-seeding.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from gmk import errors
from gmk.motion import PoseSequence

LAMBDA_VQ = 0.25
LAMBDA_SEM = 1.0


# ---------------------------------------------------------------------------
# linear codec


@dataclass(frozen=True)
class LinearCodec:
    mean: np.ndarray
    basis: np.ndarray  # C x D, orthonormal columns

    @property
    def D(self) -> int:
        return self.basis.shape[1]

    @property
    def C(self) -> int:
        return self.basis.shape[0]

    def encode(self, frames) -> np.ndarray:
        return (np.asarray(frames, dtype=np.float64) - self.mean) @ self.basis

    def decode(self, latents) -> np.ndarray:
        return np.asarray(latents, dtype=np.float64) @ self.basis.T + self.mean


def _frames(poses) -> np.ndarray:
    if isinstance(poses, PoseSequence):
        return poses.data
    if isinstance(poses, np.ndarray):
        return np.atleast_2d(poses)
    blocks = [p.data if isinstance(p, PoseSequence) else np.atleast_2d(p) for p in poses]
    if not blocks:
        raise errors.EmptyInput("no pose frames")
    return np.vstack(blocks)


def fit_codec(poses, D: int, *, reduce_rank: bool = False, rank_tol: float = 1e-10) -> LinearCodec:
    """Fit a PCA codec with ``D`` latent dims.

    Columns of the basis are covariance eigenvectors in descending eigenvalue
    order, each sign-fixed so that its largest-magnitude entry is positive.
    If the covariance has rank below ``D`` a :class:`RankDeficient` is raised,
    or ``D`` is reduced when ``reduce_rank`` is set.
    """
    X = _frames(poses)
    N, C = X.shape
    if D < 1 or D > C:
        raise errors.DimensionMismatch(f"latent dim {D} must be in [1, {C}]")
    if N < D:
        raise errors.InsufficientFrames(f"{N} frames cannot support {D} latent dims")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(N - 1, 1)
    w, V = np.linalg.eigh((cov + cov.T) / 2)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    rank = int(np.sum(w > rank_tol * max(w[0], np.finfo(float).tiny)))
    if rank < D and D < C:
        # a full-rank D == C codec is a pure rotation and stays exact regardless
        if not reduce_rank:
            raise errors.RankDeficient(f"covariance rank {rank} < requested latent dim {D}")
        D = max(rank, 1)
    basis = V[:, :D].copy()
    for j in range(D):
        k = np.argmax(np.abs(basis[:, j]))
        if basis[k, j] < 0:
            basis[:, j] = -basis[:, j]
    return LinearCodec(mean, basis)


# ---------------------------------------------------------------------------
# codebooks and quantization


@dataclass
class Codebooks:
    entries: np.ndarray  # n x K x d
    ema_counts: np.ndarray | None = None  # n x K
    ema_sums: np.ndarray | None = None  # n x K x d
    seed: int = 0
    history: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 3:
            raise errors.ShapeMismatch(f"codebook entries must be n x K x d, got {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise errors.NumericalError("codebook contains non-finite entries")
        n, K, d = self.entries.shape
        if self.ema_counts is None:
            self.ema_counts = np.zeros((n, K))
        if self.ema_sums is None:
            self.ema_sums = np.zeros((n, K, d))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]

    @property
    def d(self) -> int:
        return self.entries.shape[2]

    @property
    def D(self) -> int:
        return self.n * self.d


@dataclass(frozen=True)
class TokenSequence:
    codes: np.ndarray  # T x n int
    f_hat: np.ndarray  # T x D


def _chunks(f: np.ndarray, n: int, d: int) -> np.ndarray:
    """Split ``T x (n*d)`` latents into ``n x T x d`` row-contiguous chunks."""
    return f.reshape(f.shape[0], n, d).transpose(1, 0, 2)


def nearest_code(x: np.ndarray, codes: np.ndarray, block: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Index and squared distance of the nearest row of ``codes`` for each row of ``x``.

    Candidates are screened with the matrix-product expansion and the
    near-minimal ones re-scored with explicit differences, so the result is
    exact and ties go to the lowest index.
    """
    x = np.asarray(x, dtype=np.float64)
    T = len(x)
    idx = np.empty(T, dtype=np.int64)
    dist = np.empty(T)
    cn = np.einsum("kd,kd->k", codes, codes)
    for s in range(0, T, block):
        xb = x[s:s + block]
        xn = np.einsum("td,td->t", xb, xb)
        approx = xn[:, None] - 2.0 * (xb @ codes.T) + cn[None, :]
        lo = approx.min(axis=1)
        tol = 1e-9 * (xn + cn.max()) + 1e-300
        rows, cols = np.nonzero(approx <= (lo + tol)[:, None])
        exact = np.square(xb[rows] - codes[cols]).sum(axis=1)
        order = np.lexsort((cols, exact, rows))
        rows, cols, exact = rows[order], cols[order], exact[order]
        firsts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
        idx[s + rows[firsts]] = cols[firsts]
        dist[s + rows[firsts]] = exact[firsts]
    return idx, dist


def quantize(f, cb: Codebooks) -> TokenSequence:
    """Replace each latent chunk with its nearest code."""
    f = np.atleast_2d(np.asarray(f, dtype=np.float64))
    if f.shape[1] != cb.D:
        raise errors.DimensionMismatch(f"latent dim {f.shape[1]} != n*d = {cb.D}")
    parts = _chunks(f, cb.n, cb.d)
    codes = np.empty((f.shape[0], cb.n), dtype=np.int64)
    for i in range(cb.n):
        codes[:, i], _ = nearest_code(parts[i], cb.entries[i])
    f_hat = np.concatenate([cb.entries[i][codes[:, i]] for i in range(cb.n)], axis=1)
    return TokenSequence(codes, f_hat.reshape(f.shape[0], cb.D))


@dataclass(frozen=True)
class TrainConfig:
    n: int = 8
    d: int = 32
    K: int = 8192
    iters: int = 50
    ema_decay: float = 0.99
    dead_threshold: float = 1e-3
    seed: int = 0
    batch_size: int | None = None  # None: full batch


def _kmeanspp(x: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    N = len(x)
    centers = np.empty((K, x.shape[1]))
    centers[0] = x[rng.integers(N)]
    d2 = np.square(x - centers[0]).sum(axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            j = rng.integers(N)
        else:
            j = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            j = min(j, N - 1)
        centers[k] = x[j]
        np.minimum(d2, np.square(x - centers[k]).sum(axis=1), out=d2)
    return centers


def _train_one(x: np.ndarray, K: int, cfg: TrainConfig, rng: np.random.Generator):
    N, d = x.shape
    codes = _kmeanspp(x, K, rng)
    counts = np.zeros(K)
    sums = np.zeros((K, d))
    errs = []
    full = cfg.batch_size is None or cfg.batch_size >= N
    for _ in range(cfg.iters):
        xb = x if full else x[rng.choice(N, size=cfg.batch_size, replace=False)]
        assign, dist = nearest_code(xb, codes)
        errs.append(float(dist.mean()))
        n_k = np.bincount(assign, minlength=K).astype(np.float64)
        s_k = np.zeros((K, d))
        np.add.at(s_k, assign, xb)
        counts = cfg.ema_decay * counts + (1 - cfg.ema_decay) * n_k
        sums = cfg.ema_decay * sums + (1 - cfg.ema_decay) * s_k
        used = n_k > 0
        if full:
            # exact Lloyd step keeps the full-batch error non-increasing
            codes[used] = s_k[used] / n_k[used, None]
        else:
            live = counts > 0
            codes[live] = sums[live] / counts[live, None]
        dead = np.flatnonzero((counts < cfg.dead_threshold) & ~used)
        if len(dead):
            codes[dead] = xb[rng.choice(len(xb), size=len(dead), replace=len(dead) > len(xb))]
            counts[dead] = 0.0
            sums[dead] = 0.0
    return codes, counts, sums, errs


def train_codebooks(latents, cfg: TrainConfig) -> Codebooks:
    """Learn ``cfg.n`` independent codebooks on the chunks of ``latents``.

    Each codebook is initialized with k-means++ and refined for ``cfg.iters``
    iterations. In full-batch mode (``batch_size=None``) centers take the exact
    cluster mean; in mini-batch mode they follow the EMA of assigned sums and
    counts. Codes that are below ``dead_threshold`` EMA usage and received no
    points in the current batch are moved onto random training chunks.

    ``history`` on the result holds the mean squared quantization error per
    iteration (rows) and codebook (columns). When there are fewer chunks than
    ``cfg.K``, ``K`` is reduced to the number of chunks with a warning and the
    requested value is kept in ``meta["K_requested"]``.
    """
    x = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    if x.size == 0 or x.shape[0] == 0:
        raise errors.EmptyInput("no latents to train on")
    if x.shape[1] != cfg.n * cfg.d:
        raise errors.DimensionMismatch(f"latent dim {x.shape[1]} != n*d = {cfg.n * cfg.d}")
    N = x.shape[0]
    K = cfg.K
    meta = {}
    if N < K:
        warnings.warn(f"only {N} training rows for K={K}; reducing K to {N}", RuntimeWarning, stacklevel=2)
        meta["K_requested"] = K
        K = N
    parts = _chunks(x, cfg.n, cfg.d)
    entries = np.empty((cfg.n, K, cfg.d))
    counts = np.empty((cfg.n, K))
    sums = np.empty((cfg.n, K, cfg.d))
    hist = np.empty((cfg.iters, cfg.n))
    for i in range(cfg.n):
        rng = np.random.default_rng([cfg.seed, i])
        entries[i], counts[i], sums[i], errs = _train_one(parts[i], K, cfg, rng)
        hist[:, i] = errs
    return Codebooks(entries, counts, sums, seed=cfg.seed, history=hist, meta=meta)


def codebooks_from_latents(latents, n: int, d: int) -> Codebooks:
    """Codebooks whose entries are exactly the chunks of ``latents`` (one code per row)."""
    x = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    if x.shape[1] != n * d:
        raise errors.DimensionMismatch(f"latent dim {x.shape[1]} != n*d = {n * d}")
    return Codebooks(_chunks(x, n, d).copy())


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class LossReport:
    l_rec: float
    l_vq: float
    l_sem: float
    lambda_vq: float = LAMBDA_VQ
    lambda_sem: float = LAMBDA_SEM

    @property
    def total(self) -> float:
        return self.l_rec + self.lambda_vq * self.l_vq + self.lambda_sem * self.l_sem

    def to_json(self) -> dict:
        return {"l_rec": self.l_rec, "l_vq": self.l_vq, "l_sem": self.l_sem,
                "lambda_vq": self.lambda_vq, "lambda_sem": self.lambda_sem, "total": self.total}


def vq_loss(f, f_hat) -> float:
    f, f_hat = np.asarray(f, dtype=np.float64), np.asarray(f_hat, dtype=np.float64)
    if f.shape != f_hat.shape:
        raise errors.ShapeMismatch(f"{f.shape} vs {f_hat.shape}")
    if f.size == 0:
        return 0.0
    return float(np.mean(np.square(f - f_hat)))


def semantic_loss(z_prime, f_ref) -> float:
    """Mean over time of ``relu(1 - cos(z'_t, f_t))``.

    A zero-norm row has no direction; it counts as cosine 0 (term 1) and
    triggers a ``RuntimeWarning``.
    """
    z = np.atleast_2d(np.asarray(z_prime, dtype=np.float64))
    f = np.atleast_2d(np.asarray(f_ref, dtype=np.float64))
    if z.shape != f.shape:
        raise errors.ShapeMismatch(f"{z.shape} vs {f.shape}")
    if len(z) == 0:
        raise errors.EmptyInput("semantic loss over zero timesteps")
    # per-row rescale so norms of tiny or huge rows neither underflow nor overflow
    z = z / np.maximum(np.abs(z).max(axis=1, keepdims=True), np.finfo(float).tiny)
    f = f / np.maximum(np.abs(f).max(axis=1, keepdims=True), np.finfo(float).tiny)
    nz = np.linalg.norm(z, axis=1)
    nf = np.linalg.norm(f, axis=1)
    ok = (nz > 0) & (nf > 0)
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} zero-norm rows in semantic loss", RuntimeWarning, stacklevel=2)
    cos = np.zeros(len(z))
    cos[ok] = np.einsum("td,td->t", z[ok], f[ok]) / (nz[ok] * nf[ok])
    cos = np.clip(cos, -1.0, 1.0)
    return float(np.mean(np.maximum(0.0, 1.0 - cos)))


def combined_loss(l_rec: float, l_vq: float, l_sem: float,
                  lambda_vq: float = LAMBDA_VQ, lambda_sem: float = LAMBDA_SEM) -> LossReport:
    for name, v in (("l_rec", l_rec), ("l_vq", l_vq), ("l_sem", l_sem)):
        if v < 0:
            raise errors.NegativeComponent(f"{name} = {v} is negative")
    return LossReport(float(l_rec), float(l_vq), float(l_sem), lambda_vq, lambda_sem)


def codebook_utility(tokens: Sequence[TokenSequence], cb: Codebooks) -> float:
    """Mean over codebooks of the fraction of codes used at least once, in percent."""
    tokens = list(tokens)
    if not tokens:
        return 0.0
    used = np.zeros((cb.n, cb.K), dtype=bool)
    for ts in tokens:
        codes = np.asarray(ts.codes)
        if codes.size == 0:
            continue
        if codes.shape[1] != cb.n:
            raise errors.DimensionMismatch(f"tokens have {codes.shape[1]} codebooks, expected {cb.n}")
        if codes.min() < 0 or codes.max() >= cb.K:
            raise errors.IndexOutOfRange(f"code index outside [0, {cb.K})")
        for i in range(cb.n):
            used[i, codes[:, i]] = True
    return float(used.mean(axis=1).mean() * 100.0)


def reconstruct(seq, codec: LinearCodec, cb: Codebooks) -> tuple[PoseSequence | np.ndarray, LossReport]:
    """Encode, quantize and decode a pose sequence.

    ``l_rec`` is the mean absolute error over all pose entries and ``l_vq`` the
    quantization MSE in latent space; ``l_sem`` is 0.
    """
    frames = seq.data if isinstance(seq, PoseSequence) else np.asarray(seq, dtype=np.float64)
    if frames.size == 0 or frames.ndim != 2 or frames.shape[0] == 0:
        raise errors.EmptyInput("nothing to reconstruct")
    if codec.D != cb.D or frames.shape[1] != codec.C:
        raise errors.DimensionMismatch(
            f"pose C={frames.shape[1]}, codec C={codec.C} D={codec.D}, codebooks D={cb.D}")
    f = codec.encode(frames)
    tok = quantize(f, cb)
    rec = codec.decode(tok.f_hat)
    report = combined_loss(float(np.mean(np.abs(frames - rec))), vq_loss(f, tok.f_hat), 0.0)
    if isinstance(seq, PoseSequence):
        return seq.with_data(rec), report
    return rec, report


# ---------------------------------------------------------------------------
# files
#
# Binary layout: one line of JSON header, then the little-endian float64
# payload in row-major order.


def _write_blob(path, header: dict, arrays: Sequence[np.ndarray]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    tmp.replace(path)


def _read_blob(path) -> tuple[dict, bytes]:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingFile(f"file not found: {path}")
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise errors.InputError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise errors.InputError(f"{path}: bad header: {exc}") from exc
    return header, raw[nl + 1:]


def save_codebooks(cb: Codebooks, path) -> None:
    header = {"format": "gmk-codebooks", "n": cb.n, "d": cb.d, "K": cb.K, "seed": cb.seed}
    header.update(cb.meta)
    _write_blob(path, header, [cb.entries])


def load_codebooks(path) -> Codebooks:
    header, payload = _read_blob(path)
    try:
        n, d, K = int(header["n"]), int(header["d"]), int(header["K"])
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.InputError(f"{path}: codebook header lacks n/d/K") from exc
    expected = n * K * d * 8
    if len(payload) != expected:
        raise errors.InputError(f"{path}: payload {len(payload)} bytes, expected {expected}")
    entries = np.frombuffer(payload, dtype="<f8").reshape(n, K, d).astype(np.float64)
    meta = {k: v for k, v in header.items() if k not in ("format", "n", "d", "K", "seed")}
    return Codebooks(entries, seed=int(header.get("seed", 0)), meta=meta)


def save_codec(codec: LinearCodec, path) -> None:
    _write_blob(path, {"format": "gmk-codec", "C": codec.C, "D": codec.D}, [codec.mean, codec.basis])


def load_codec(path) -> LinearCodec:
    header, payload = _read_blob(path)
    C, D = int(header["C"]), int(header["D"])
    arr = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if arr.size != C + C * D:
        raise errors.InputError(f"{path}: payload size does not match C={C}, D={D}")
    return LinearCodec(arr[:C].copy(), arr[C:].reshape(C, D).copy())


def save_tokens_csv(tokens: TokenSequence, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in np.asarray(tokens.codes):
            fh.write(",".join(str(int(v)) for v in row) + "\n")
