"""Soft alignment paths with and without dummy elements on one synthetic pair.

Writes, for a partial_irrelevant and an entire_irrelevant pair seen through the
oracle encoder, the raw distances plus the S2DTW and Soft-DTW path matrices as
CSV and PGM, and prints the mass on the irrelevant captions.

    python scripts/skip_heatmaps.py --seed 0 --out runs/heatmaps
"""

import argparse
import json
from pathlib import Path

from weakalign.experiments import skip_case
from weakalign.matio import write_matrix, write_pgm


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--dummy-cost", type=float, default=0.5)
    ap.add_argument("--gamma", type=float, default=0.1)
    ap.add_argument("--order", choices=["smooth-first", "merge-first"], default="smooth-first")
    ap.add_argument("--out", type=Path, default=Path("runs/heatmaps"))
    args = ap.parse_args()

    summary = {}
    for kind in ("partial_irrelevant", "entire_irrelevant"):
        r = skip_case(kind, args.seed, args.n, args.dummy_cost, args.gamma, args.order)
        d = args.out / kind
        d.mkdir(parents=True, exist_ok=True)
        for name in ("delta", "m_hat", "m_soft"):
            write_matrix(d / f"{name}.csv", r[name])
        # distances: dark = close; paths: bright = on the path
        write_pgm(d / "delta.pgm", r["delta"].max() - r["delta"])
        write_pgm(d / "m_hat.pgm", r["m_hat"])
        write_pgm(d / "m_soft.pgm", r["m_soft"])
        summary[kind] = {
            k: r[k] for k in ("irrelevant_captions", "s2dtw_mass", "softdtw_mass", "s2dtw_total", "softdtw_total")
        }
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
