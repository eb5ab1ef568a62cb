#!/usr/bin/env python3
"""Trend experiments on synthetic model pairs: algorithm comparison at fixed
(K, L), plus sweeps over K and L. Writes plot-ready CSVs and prints a small
ordering report with paired confidence intervals.
"""

import argparse
import json
import sys

from speclab.harness import RunConfig, compare_algorithms, run_experiment


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--vocab", type=int, default=8)
    ap.add_argument("--order", type=int, default=1)
    ap.add_argument("--similarity", type=float, default=0.6)
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--L", type=int, default=8)
    ap.add_argument("--pairs", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=16)
    ap.add_argument("--out-prefix", default="trends")
    args = ap.parse_args()

    # paired algorithm comparison on each model pair
    reports = []
    for i in range(args.pairs):
        base = RunConfig(
            algo="spectr-gbv", K=args.K, L=args.L, vocab_size=args.vocab,
            order=args.order, model_seed=900 + i, concentration=1.0,
            similarity=args.similarity, prompts=2, max_tokens=6 * args.L,
        )
        rep = compare_algorithms(base, seeds=list(range(args.seeds)))
        reports.append(rep)
        taus = {a: rep["algos"][a]["mean_tau"] for a in rep["algos"]}
        print(f"pair {i}: " + "  ".join(f"{a}={v:.3f}" for a, v in taus.items())
              + (f"  violations: {rep['order_violations']}" if rep["order_violations"] else ""))
    with open(f"{args.out_prefix}_compare.json", "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)

    # sweep rows for K and L trends, shared master seed for pairing
    sweep_cfgs = []
    for K in (1, 3, 5, 7):
        sweep_cfgs.append(RunConfig(
            algo="spectr-gbv", K=K, L=args.L, vocab_size=args.vocab, order=args.order,
            model_seed=900, concentration=1.0, similarity=args.similarity,
            prompts=2, max_tokens=6 * args.L, seed=41, trials=args.seeds,
        ))
    for L in (2, 4, 8):
        sweep_cfgs.append(RunConfig(
            algo="spectr-gbv", K=args.K, L=L, vocab_size=args.vocab, order=args.order,
            model_seed=900, concentration=1.0, similarity=args.similarity,
            prompts=2, max_tokens=48, seed=42, trials=args.seeds,
        ))
    out = f"{args.out_prefix}_sweep.csv"
    run_experiment(sweep_cfgs, out)
    print(f"wrote {out} and {args.out_prefix}_compare.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
