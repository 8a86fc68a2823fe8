"""Whole-stream runtime as the number of hash rows grows from 2 to 10.

    python scripts/hash_scaling.py --out results/hash_scaling.csv
"""

import argparse
import csv
import sys
from pathlib import Path

from edgesketch.evaluation import bench_depths, linear_fit_r2
from edgesketch.stream_io import SyntheticConfig, generate_synthetic


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-edges", type=int, default=1_000_000)
    ap.add_argument("--min-rows", type=int, default=2)
    ap.add_argument("--max-rows", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = ap.parse_args(argv)

    u, v, t, _ = generate_synthetic(SyntheticConfig(n_edges=args.n_edges))
    results = bench_depths(u, v, t, range(args.min_rows, args.max_rows + 1), repeats=args.repeats)

    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(fh)
    writer.writerow(["rows", "exec_seconds"])
    for d, seconds in results:
        writer.writerow([d, f"{seconds:.6f}"])
    if fh is not sys.stdout:
        fh.close()
    slope, _, r2 = linear_fit_r2(*zip(*results))
    print(f"{slope * 1e3:.2f} ms per extra row, r2 {r2:.4f}", file=sys.stderr)


if __name__ == "__main__":
    main()
