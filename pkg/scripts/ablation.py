"""Six-row ablation on the mixed noisy corpus; prints the table as CSV.

    python scripts/ablation.py --seeds 0 1 2 3 4 --steps 500 --out runs/ablation.csv
"""

import argparse
import dataclasses
from pathlib import Path

from weakalign.trainer import ABLATION_BASE, ABLATION_CORPUS, ablation_corpus, ablation_csv, run_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--steps", type=int, default=ABLATION_BASE.steps)
    ap.add_argument("--dummy-cost", type=float, default=ABLATION_BASE.dummy_cost)
    ap.add_argument("--train-per-kind", type=int, default=ABLATION_CORPUS["train_per_kind"])
    ap.add_argument("--test-per-kind", type=int, default=ABLATION_CORPUS["test_per_kind"])
    ap.add_argument("--noise", type=float, default=ABLATION_CORPUS["noise"])
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    base = dataclasses.replace(ABLATION_BASE, steps=args.steps, dummy_cost=args.dummy_cost)
    corpus = dict(ABLATION_CORPUS, train_per_kind=args.train_per_kind, test_per_kind=args.test_per_kind, noise=args.noise)
    rows = run_ablation(lambda s: ablation_corpus(s, **corpus), base, seeds=tuple(args.seeds))
    text = ablation_csv(rows)
    print(text, end="")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)


if __name__ == "__main__":
    main()
