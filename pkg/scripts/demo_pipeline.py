"""Synthetic end-to-end run: generate data, analyze, train, tokenize, evaluate, stats.

Usage: python scripts/demo_pipeline.py --workdir /tmp/gmk_demo [--seed 0]
"""

import argparse
import contextlib
import io
import json
from pathlib import Path

import numpy as np

from gmk import synth
from gmk.cli import main


def run(argv):
    with contextlib.redirect_stdout(io.StringIO()):
        code = main([str(a) for a in argv])
    if code != 0:
        raise SystemExit(f"step failed ({code}): {' '.join(map(str, argv))}")


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workdir", type=Path, default=Path("demo_out"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-seqs", type=int, default=6)
    return p.parse_args()


def main_():
    args = parse_args()
    wd = args.workdir
    wd.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    real = [synth.write_pose(synth.gesture_sequence(rng, 4.0), wd / f"real{i}.csv") for i in range(args.n_seqs)]
    gen = [synth.write_pose(synth.gesture_sequence(rng, 4.0, amplitude=0.7), wd / f"gen{i}.csv")
           for i in range(args.n_seqs)]
    words = synth.write_words(synth.word_timings(rng, 4.0), wd / "words.jsonl")
    ann = wd / "annotations.jsonl"
    ann.write_text("".join(json.dumps(r) + "\n" for r in synth.annotation_corpus(rng, 300)))
    cfg = wd / "config.json"
    cfg.write_text(json.dumps({"seed": args.seed, "tokenizer": {"n": 3, "d": 4, "K": 64, "iters": 30}}))

    run(["analyze", real[0], "--words", words, "--config", cfg, "--out", wd / "analysis.json"])
    run(["train-codebook", "--poses", *real, "--config", cfg, "--out", wd / "codebook.bin"])
    run(["tokenize", real[0], "--codebook", wd / "codebook.bin", "--out", wd / "codes.csv"])
    run(["evaluate", "--real", *real, "--generated", *gen, "--codebook", wd / "codebook.bin",
         "--config", cfg, "--out", wd / "eval.json"])
    run(["stats", ann, "--out", wd / "stats.json", "--cooccur-csv", wd / "cooccur.csv"])

    analysis = json.loads((wd / "analysis.json").read_text())
    ev = json.loads((wd / "eval.json").read_text())
    print(f"windows: {len(analysis['windows'])}")
    for w in analysis["windows"][:3]:
        print(f"  [{w['start']:.2f}, {w['end']:.2f}] {' '.join(w['words'])}")
        for r in w["regions"]:
            print(f"    {r['region']}: {r['magnitude']} {r['pattern']}")
    print(f"FGD {ev['fgd']:.4f}  div {ev['l1_diversity']:.4f} (real {ev['l1_diversity_real']:.4f})  BC {ev['bc']:.4f}")
    print(f"tokenizer L1 {ev['tokenizer']['l1']:.4f}  utility {ev['tokenizer']['codebook_utility']:.1f}%  rFGD {ev['rfgd']:.4f}")
    print(f"outputs in {wd}")


if __name__ == "__main__":
    main_()
