"""Reconstruction error and codebook utility across codebook sizes and counts.

Usage: python scripts/tokenizer_ablation.py [--seed 0] [--out ablation.json]
"""

import argparse
import json
import time

import numpy as np

from gmk import synth
from gmk.metrics import fgd_features
from gmk.tokenizer import TrainConfig, codebook_utility, fit_codec, quantize, reconstruct, train_codebooks


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=20)
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--out", default=None)
    return p.parse_args()


def main():
    args = parse_args()
    rng = np.random.default_rng(args.seed)
    train = [synth.gesture_sequence(rng, 4.0) for _ in range(args.n_train)]
    test = [synth.gesture_sequence(rng, 4.0) for _ in range(5)]
    X = np.vstack([s.data for s in train])
    Y = np.vstack([s.data for s in test])
    C = X.shape[1]

    rows = []
    for n, d in ((1, 12), (3, 4), (6, 2), (12, 1)):
        codec = fit_codec(X, n * d)
        lat = codec.encode(X)
        for K in (8, 32, 128):
            t0 = time.perf_counter()
            cb = train_codebooks(lat, TrainConfig(n=n, d=d, K=K, iters=args.iters, seed=args.seed))
            rec, rep = reconstruct(Y, codec, cb)
            util = codebook_utility([quantize(codec.encode(s.data), cb) for s in test], cb)
            rows.append({"n": n, "d": d, "K": K, "D": n * d, "C": C, "test_l1": rep.l_rec, "test_vq": rep.l_vq,
                         "rfgd": fgd_features(Y, rec), "utility": util, "seconds": time.perf_counter() - t0})

    print(f"{'n':>3} {'d':>3} {'K':>4} {'L1':>8} {'rFGD':>8} {'util%':>6}")
    for r in rows:
        print(f"{r['n']:>3} {r['d']:>3} {r['K']:>4} {r['test_l1']:>8.4f} {r['rfgd']:>8.4f} {r['utility']:>6.1f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
