"""AUC over a parameter grid on the synthetic stream (or a labelled edge file).

    python scripts/param_sweep.py --out results/sweep.csv
    python scripts/param_sweep.py --edges darpa.csv --labels darpa.labels --workers 4
"""

import argparse
import sys
from pathlib import Path

from edgesketch.evaluation import sweep, write_sweep
from edgesketch.stream_io import SyntheticConfig, generate_synthetic, load_stream

# ranges that cover the settings used on the public IDS benchmarks
GRID = {
    "rows": [2, 4, 6, 8, 10],
    "cols": [64, 512, 1300],
    "gamma": [0.95, 0.99],
    "delta_shift": [10.0, 15.0],
    "lambda": [0.65, 0.8, 0.95],
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--edges")
    ap.add_argument("--labels")
    ap.add_argument("--n-edges", type=int, default=200_000, help="synthetic stream length")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = ap.parse_args(argv)

    if args.edges:
        stream = load_stream(args.edges, args.labels)
    else:
        stream = generate_synthetic(SyntheticConfig(n_edges=args.n_edges, n_bins=200,
                                                    burst_count=10, burst_size=300))
    rows = sweep(GRID, stream, repeats=args.repeats, workers=args.workers)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            write_sweep(rows, fh)
    else:
        write_sweep(rows, sys.stdout)
    best = max((r for r in rows if r.error is None), key=lambda r: r.auc_mean)
    print(f"best auc {best.auc_mean:.4f} at {best.params}", file=sys.stderr)


if __name__ == "__main__":
    main()
