"""Positives-only versus contrastive training: embedding collapse and retrieval.

    python scripts/collapse.py --seeds 0 1 2 --steps 1000
"""

import argparse
import json

from weakalign.experiments import collapse_pair, end_to_end


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--with-end-to-end", action="store_true", help="also run the noiseless retrieval check")
    args = ap.parse_args()
    for s in args.seeds:
        print(json.dumps(collapse_pair(s, steps=args.steps)))
        if args.with_end_to_end:
            r = end_to_end(s)
            print(json.dumps({"seed": s, "initial": r["initial"], "final": r["final"]}))


if __name__ == "__main__":
    main()
