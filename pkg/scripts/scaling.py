"""Runtime against stream length on the synthetic stream.

    python scripts/scaling.py --out results/scaling.csv
"""

import argparse
import csv
import sys
from pathlib import Path

from edgesketch.evaluation import bench, linear_fit_r2
from edgesketch.sketch import SketchParams
from edgesketch.stream_io import SyntheticConfig, generate_synthetic


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-edges", type=int, default=1_000_000)
    ap.add_argument("--rows", type=int, default=2)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = ap.parse_args(argv)

    u, v, t, _ = generate_synthetic(SyntheticConfig(n_edges=args.n_edges, seed=args.seed))
    steps = [1_000, 10_000, 100_000] + [args.n_edges * k // 4 for k in (1, 2, 3, 4)]
    prefixes = sorted({p for p in steps if p <= args.n_edges})
    rows = bench(u, v, t, SketchParams(d=args.rows), prefixes=prefixes, repeats=args.repeats)

    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(fh)
    writer.writerow(["n_edges", "exec_seconds", "avg_time_per_edge_s"])
    for r in rows:
        writer.writerow([r.n_edges, f"{r.exec_seconds:.6f}", f"{r.avg_time_per_edge:.6e}"])
    if fh is not sys.stdout:
        fh.close()
    slope, _, r2 = linear_fit_r2([r.n_edges for r in rows], [r.exec_seconds for r in rows])
    print(f"slope {slope:.3e} s/edge, r2 {r2:.4f}", file=sys.stderr)


if __name__ == "__main__":
    main()
