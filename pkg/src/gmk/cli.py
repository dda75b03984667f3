"""``gmk`` command line: analyze, windows, train-codebook, tokenize, evaluate, stats.

Exit codes: 0 success, 2 input error, 3 config error, 4 numerical failure.
Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from gmk import __version__, annotations, errors, metrics, tokenizer
from gmk.config import RunConfig, load_config
from gmk.motion import canonicalize, default_smooth_window, load_with_manifest
from gmk.windows import (
    describe_window,
    read_words,
    segment_windows,
    select_keyframes,
    sigma_ref_from_windows,
    thresholds_for,
)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data.encode("utf-8") if isinstance(data, str) else data)
    os.replace(tmp, path)


def emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.__post_init__()
    return cfg


def _load_pose(path, manifest=None):
    return load_with_manifest(path, manifest)


def _read_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingFile(f"file not found: {path}")
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2))
    except ValueError as exc:
        raise errors.InputError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def analyze_report(pose_path, words_path, cfg: RunConfig, manifest=None) -> dict:
    seq = _load_pose(pose_path, manifest)
    canonical = False
    try:
        root = seq.root_channels(cfg.windows.root_joint)
    except errors.RootChannelMissing:
        root = None
    if root is not None:
        seq = canonicalize(seq, root)
        canonical = True

    words = read_words(words_path)
    wins = segment_windows(words, cfg.windows.min_len, cfg.windows.max_len, fps=seq.fps)
    last = seq.n_frames - 1
    wins = [replace(w, frame_span=(min(w.frame_span[0], last), min(w.frame_span[1], last))) for w in wins]

    ang, pos = cfg.thresholds.angle(), cfg.thresholds.position()
    th = [thresholds_for(seq, j, ang, pos) for j in range(seq.n_channels)]
    sigma = sigma_ref_from_windows(seq, wins, [t.eps_slow for t in th])
    sw = cfg.windows.smooth_window or default_smooth_window(seq.fps)

    out_windows = []
    for w in wins:
        regions = describe_window(w, seq, th, sigma, smooth_window=sw)
        entry = w.to_json()
        entry["keyframes"] = list(select_keyframes(w, seq))
        entry["regions"] = [r.to_json() for r in regions]
        out_windows.append(entry)
    return {
        "tool": f"gmk {__version__}",
        "config": cfg.to_dict(),
        "pose": str(pose_path),
        "words": str(words_path),
        "fps": seq.fps,
        "n_frames": seq.n_frames,
        "canonicalized": canonical,
        "smooth_window": sw,
        "sigma_ref": {f"{c.joint_name}.{c.kind}": s for c, s in zip(seq.channels, sigma)},
        "windows": out_windows,
    }


def cmd_analyze(args) -> int:
    cfg = _resolve_config(args)
    emit(dump_json(analyze_report(args.pose, args.words, cfg, args.manifest)), args.out)
    return 0


def cmd_windows(args) -> int:
    cfg = _resolve_config(args)
    wins = segment_windows(read_words(args.words), cfg.windows.min_len, cfg.windows.max_len, fps=args.fps)
    emit(dump_json({"config": cfg.to_dict(), "windows": [w.to_json() for w in wins]}), args.out)
    return 0


def train_codebook(cfg: RunConfig, out, poses=(), latents=None) -> dict:
    """Fit the codec (for pose input), train codebooks and write them next to ``out``."""
    tcfg = cfg.tokenizer.train_config(cfg.seed)
    D = tcfg.n * tcfg.d
    out = Path(out)
    written = {"codebook": str(out)}
    if latents is not None:
        X = _read_matrix(latents)
    else:
        if not poses:
            raise errors.InputError("train-codebook needs --poses or --latents")
        seqs = [_load_pose(p) for p in poses]
        C = seqs[0].n_channels
        if any(s.n_channels != C for s in seqs):
            raise errors.InputError("pose files have differing channel counts")
        if D > C:
            raise errors.ConfigError(f"n*d = {D} exceeds pose channel count {C}; lower tokenizer.n or tokenizer.d")
        codec = tokenizer.fit_codec(seqs, D)
        codec_path = out.with_name(out.name + ".codec")
        tokenizer.save_codec(codec, codec_path)
        written["codec"] = str(codec_path)
        X = codec.encode(np.vstack([s.data for s in seqs]))
    if X.shape[1] != D:
        raise errors.ConfigError(f"latent dim {X.shape[1]} != n*d = {D}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cb = tokenizer.train_codebooks(X, tcfg)
    for w in caught:
        sys.stderr.write(json.dumps({"warning": str(w.message)}) + "\n")
    tokenizer.save_codebooks(cb, out)

    log_path = out.with_name(out.name + ".log.jsonl")
    lines = [json.dumps({"iter": i, "mean_error": float(r.mean()), "per_codebook": [float(v) for v in r]})
             for i, r in enumerate(cb.history)]
    write_atomic(log_path, "\n".join(lines) + ("\n" if lines else ""))
    written["log"] = str(log_path)
    return {"config": cfg.to_dict(), "n": cb.n, "d": cb.d, "K": cb.K, "meta": cb.meta,
            "final_error": float(cb.history[-1].mean()) if len(cb.history) else None, "files": written}


def cmd_train_codebook(args) -> int:
    cfg = _resolve_config(args)
    summary = train_codebook(cfg, args.out, args.poses or (), args.latents)
    sys.stdout.write(dump_json(summary))
    return 0


def cmd_tokenize(args) -> int:
    cb = tokenizer.load_codebooks(args.codebook)
    if args.latents:
        f = _read_matrix(args.latents)
    else:
        codec = tokenizer.load_codec(args.codec or args.codebook + ".codec")
        seq = _load_pose(args.pose, args.manifest)
        if seq.n_channels != codec.C:
            raise errors.DimensionMismatch(f"pose has {seq.n_channels} channels, codec expects {codec.C}")
        f = codec.encode(seq.data)
    tok = tokenizer.quantize(f, cb)
    text = "".join(",".join(str(int(v)) for v in row) + "\n" for row in tok.codes)
    emit(text, args.out)
    return 0


def _upper_body(seq, regions) -> list[int]:
    return [j for j, c in enumerate(seq.channels) if c.body_region in regions]


def _read_beats(path) -> list[list[float]]:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingFile(f"beat file not found: {path}")
    obj = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(obj, dict):
        obj = obj.get("beats", [])
    if obj and all(isinstance(x, (int, float)) for x in obj):
        return [list(obj)]
    return [list(x) for x in obj]


def evaluate_report(cfg: RunConfig, real_paths, gen_paths, codebook=None, codec=None,
                    audio_beats=None, queries=None, targets=None) -> dict:
    m = cfg.metrics
    real = [_load_pose(p) for p in real_paths]
    gen = [_load_pose(p) for p in gen_paths]
    if not real or not gen:
        raise errors.InputError("evaluate needs at least one real and one generated sequence")
    if any(s.n_channels != real[0].n_channels for s in real + gen):
        raise errors.ShapeMismatch("real and generated sequences must share a channel layout")
    flags = []
    report: dict = {"config": cfg.to_dict()}

    real_frames = np.vstack([s.data for s in real])
    gen_frames = np.vstack([s.data for s in gen])
    report["fgd"] = metrics.fgd_features(real_frames, gen_frames)

    root = None
    try:
        root = real[0].root_channels(cfg.windows.root_joint)
    except errors.RootChannelMissing:
        pass

    def diversity(seqs, name):
        try:
            return metrics.l1_diversity(seqs, m.remove_translation, root)
        except (errors.TooFewSequences, errors.ShapeMismatch) as exc:
            flags.append(f"{name}: {exc}")
            return None

    report["l1_diversity"] = diversity(gen, "l1_diversity")
    report["l1_diversity_real"] = diversity(real, "l1_diversity_real")

    audio = _read_beats(audio_beats) if audio_beats else None
    scores = []
    for i, g in enumerate(gen):
        ub = _upper_body(g, m.upper_body_regions)
        if not ub or g.n_frames < 3:
            continue
        gb = metrics.extract_motion_beats(g, ub, m.beat_smooth_window)
        if audio is not None:
            ref = metrics.BeatSet(tuple(sorted(set(audio[min(i, len(audio) - 1)]))))
        elif i < len(real) and real[i].n_frames >= 3:
            ref = metrics.extract_motion_beats(real[i], ub, m.beat_smooth_window)
        else:
            continue
        if len(gb) and len(ref):
            scores.append(metrics.beat_constancy(gb, ref, m.bc_sigma))
    report["bc"] = float(np.mean(scores)) if scores else None
    if not scores:
        flags.append("bc: no sequence had both gesture and reference beats")

    report["rfgd"] = None
    if codebook:
        cb = tokenizer.load_codebooks(codebook)
        cdc = tokenizer.load_codec(codec or str(codebook) + ".codec")
        recs, l1s, toks = [], [], []
        for s in real:
            rec, loss = tokenizer.reconstruct(s, cdc, cb)
            recs.append(rec.data)
            l1s.append(loss.l_rec)
            toks.append(tokenizer.quantize(cdc.encode(s.data), cb))
        report["rfgd"] = metrics.fgd_features(real_frames, np.vstack(recs))
        report["tokenizer"] = {"l1": float(np.mean(l1s)),
                               "codebook_utility": tokenizer.codebook_utility(toks, cb)}

    report["recall"] = None
    if queries and targets:
        emb = metrics.EmbeddingSet(_read_matrix(queries), _read_matrix(targets))
        rec = {}
        for mode in ("per_batch", "global"):
            rec[mode] = {}
            for k in m.k_list:
                try:
                    rec[mode][f"r{k}"] = metrics.recall_at_k(emb, k, mode, m.batch_size)
                except errors.KTooLarge as exc:
                    rec[mode][f"r{k}"] = None
                    flags.append(f"recall {mode} r{k}: {exc}")
        report["recall"] = rec
    report["flags"] = flags
    return report


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    report = evaluate_report(cfg, args.real, args.generated, args.codebook, args.codec,
                             args.audio_beats, args.queries, args.targets)
    emit(dump_json(report), args.out)
    return 0


def cmd_stats(args) -> int:
    cfg = _resolve_config(args)
    stats = annotations.corpus_report(annotations.iter_annotations(args.annotations))
    report = {"config": cfg.to_dict(), **stats.to_json()}
    emit(dump_json(report), args.out)
    if args.cooccur_csv:
        annotations.write_cooccurrence_csv(stats.cooccur, args.cooccur_csv)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output path (default: stdout)")

    p = argparse.ArgumentParser(prog="gmk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="window-level motion descriptions")
    a.add_argument("pose", help="pose CSV")
    a.add_argument("--words", required=True, help="word timings (JSON lines)")
    a.add_argument("--manifest", help="manifest JSON (default: pose path with .json suffix)")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("windows", parents=[common], help="segment word timings into windows")
    w.add_argument("--words", required=True)
    w.add_argument("--fps", type=float, default=None)
    w.set_defaults(func=cmd_windows)

    t = sub.add_parser("train-codebook", parents=[common], help="fit codec and train codebooks")
    t.add_argument("--poses", nargs="+", help="pose CSVs (manifests alongside)")
    t.add_argument("--latents", help="latent matrix CSV instead of poses")
    t.set_defaults(func=cmd_train_codebook)

    k = sub.add_parser("tokenize", parents=[common], help="quantize a pose sequence to code indices")
    k.add_argument("pose", nargs="?")
    k.add_argument("--manifest")
    k.add_argument("--codebook", required=True)
    k.add_argument("--codec", help="codec file (default: <codebook>.codec)")
    k.add_argument("--latents", help="latent matrix CSV instead of a pose file")
    k.set_defaults(func=cmd_tokenize)

    e = sub.add_parser("evaluate", parents=[common], help="FGD, rFGD, diversity, BC, recall")
    e.add_argument("--real", nargs="+", required=True)
    e.add_argument("--generated", nargs="+", required=True)
    e.add_argument("--codebook")
    e.add_argument("--codec")
    e.add_argument("--audio-beats", help="JSON list of beat times, or one list per generated file")
    e.add_argument("--queries", help="query embeddings CSV")
    e.add_argument("--targets", help="target embeddings CSV")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("stats", parents=[common], help="annotation corpus statistics")
    s.add_argument("annotations")
    s.add_argument("--cooccur-csv", help="also write the co-occurrence matrix as CSV")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train-codebook" and not args.out:
        parser.error("train-codebook requires --out")
    if args.command == "tokenize" and not (args.pose or args.latents):
        parser.error("tokenize needs a pose file or --latents")
    try:
        return args.func(args)
    except errors.GmkError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 4}) + "\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
