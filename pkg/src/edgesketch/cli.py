"""Command-line front end: ``run``, ``synth``, ``bench`` and ``sweep``.

Every option can also come from a ``--config`` file of ``key=value``
lines (``#`` starts a comment); options given on the command line win.
Exit status is 0 on success, 1 for usage or parameter errors and 2 for
data errors (missing or malformed files, out-of-order streams).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np

from . import evaluation as ev
from . import stream_io as sio
from .errors import LengthError, OrderingError, ParameterError, ParseError, UndefinedAUCError

log = logging.getLogger("edgesketch")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# name -> (type, default, help)
OPTIONS: dict[str, tuple[Any, Any, str]] = {
    "edges": (str, None, "edge file (u,v,t per line)"),
    "labels": (str, None, "label file (0/1 per line)"),
    "out": (str, None, "output path"),
    "format": (str, "comma", "edge file separator: comma or space"),
    "rows": (int, 4, "hash rows d"),
    "cols": (int, 512, "columns per row w"),
    "window": (int, 16, "live time bins W"),
    "bin_width": (float, 1.0, "time-bin width"),
    "gamma": (float, 0.95, "per-bin decay factor"),
    "delta_shift": (float, 10.0, "mean shift of the anomaly hypothesis"),
    "prior": (float, 0.05, "prior anomaly probability"),
    "lambda": (float, 0.8, "EWMA weight of the newest score"),
    "k": (float, 3.0, "threshold sensitivity (standard deviations)"),
    "score_mode": (str, "posterior", "score fed to the detector: posterior or raw"),
    "flag_mode": (str, "smoothed", "compare the smoothed or raw score to the threshold"),
    "alpha": (float, None, "constant threshold replacing mean + k*std (ablation)"),
    "seed": (int, 42, "hash seed (synth: generator seed)"),
    "repeats": (int, 5, "repeats per sweep cell / bench prefix"),
    # synth
    "n_nodes": (int, sio.SyntheticConfig.n_nodes, "synthetic node pool size"),
    "n_edges": (int, sio.SyntheticConfig.n_edges, "synthetic stream length"),
    "n_bins": (int, sio.SyntheticConfig.n_bins, "synthetic time bins"),
    "burst_count": (int, sio.SyntheticConfig.burst_count, "injected bursts"),
    "burst_size": (int, sio.SyntheticConfig.burst_size, "events per burst"),
    "burst_fanout": (int, sio.SyntheticConfig.burst_fanout, "destinations per burst"),
    "background_rate": (float, sio.SyntheticConfig.background_rate, "background events per key per bin"),
    # sweep
    "grid": (str, None, "grid file: key=v1,v2,... per line"),
    "workers": (int, 1, "parallel sweep workers"),
}

PIPELINE_KEYS = ("rows", "cols", "window", "bin_width", "gamma", "delta_shift", "prior",
                 "lambda", "k", "score_mode", "flag_mode", "alpha", "seed")
SYNTH_KEYS = ("n_nodes", "n_edges", "n_bins", "burst_count", "burst_size", "burst_fanout",
              "background_rate")

# parameter-record field -> flag name, for error messages
FIELD_TO_FLAG = {"d": "rows", "w": "cols", "W": "window", "delta": "bin_width", "lam": "lambda"}

COMMAND_KEYS = {
    "run": ("edges", "labels", "out", "format", *PIPELINE_KEYS),
    "synth": ("out", "labels", "format", "seed", *SYNTH_KEYS),
    "bench": ("edges", "out", "format", "repeats", *PIPELINE_KEYS, *SYNTH_KEYS),
    "sweep": ("edges", "labels", "out", "format", "grid", "repeats", "workers", *PIPELINE_KEYS,
              *SYNTH_KEYS),
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edgesketch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command, keys in COMMAND_KEYS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("-v", "--verbose", action="store_true")
        for key in keys:
            typ, default, help_ = OPTIONS[key]
            flags = [f"--{key}"]
            if "_" in key:
                flags.append(f"--{key.replace('_', '-')}")
            p.add_argument(*flags, dest=key, type=str, default=argparse.SUPPRESS,
                           help=f"{help_} (default: {default})")
    return parser


def _convert(key: str, raw: str) -> Any:
    typ = OPTIONS[key][0]
    try:
        return typ(raw)
    except ValueError:
        raise UsageError(f"--{key}: cannot parse {raw!r} as {typ.__name__}") from None


def read_config(path: str | Path, allowed) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path} line {n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise UsageError(f"{path} line {n}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then config file, then command-line flags."""
    keys = COMMAND_KEYS[args.command]
    raw = {k: OPTIONS[k][1] for k in keys}
    given = {}
    if getattr(args, "config", None):
        given.update(read_config(args.config, keys))
    given.update({k: getattr(args, k) for k in keys if hasattr(args, k)})
    for k, value in given.items():
        raw[k] = _convert(k, value)
    if raw.get("format") not in (None, *sio.SEPARATORS):
        raise UsageError(f"--format must be comma or space, got {raw['format']!r}")
    return raw


def pipeline_params(cfg: dict[str, Any]):
    try:
        return ev.split_params({k: cfg[k] for k in PIPELINE_KEYS})
    except ParameterError as exc:
        flag = FIELD_TO_FLAG.get(exc.key, exc.key)
        raise UsageError(f"--{flag}: {exc}" if flag else str(exc)) from None


def synth_config(cfg: dict[str, Any]) -> sio.SyntheticConfig:
    try:
        return sio.SyntheticConfig(**{k: cfg[k] for k in SYNTH_KEYS}, seed=cfg["seed"])
    except ParameterError as exc:
        raise UsageError(str(exc)) from None


@contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _load(cfg: dict[str, Any], need_labels: bool = False):
    if cfg.get("edges") is None:
        raise UsageError("--edges is required")
    start = time.perf_counter()
    u, v, t, labels = sio.load_stream(cfg["edges"], cfg.get("labels"), cfg["format"])
    return (u, v, t, labels), time.perf_counter() - start


def _stream_or_synthetic(cfg: dict[str, Any]):
    if cfg.get("edges") is not None:
        return _load(cfg)[0]
    return sio.generate_synthetic(synth_config(cfg))


def cmd_run(cfg: dict[str, Any]) -> int:
    sk, sc, dp, mode = pipeline_params(cfg)
    (u, v, t, labels), load_s = _load(cfg)
    scored, report = ev.run_pipeline(u, v, t, sk, sc, dp, mode, labels=labels)
    report.load_seconds = load_s
    report.params = {k: cfg[k] for k in COMMAND_KEYS["run"]}
    with _output(cfg["out"]) as fh:
        scored.write_csv(fh)
    prefix = "# " if cfg["out"] is None else ""
    for line in report.lines():
        print(prefix + line)
    return EXIT_OK


def cmd_synth(cfg: dict[str, Any]) -> int:
    if cfg["out"] is None:
        raise UsageError("--out is required for synth")
    config = synth_config(cfg)
    u, v, t, labels = sio.generate_synthetic(config)
    sio.write_edges(cfg["out"], u, v, t, cfg["format"])
    labels_path = cfg["labels"] or str(Path(cfg["out"]).with_suffix(".labels"))
    sio.write_labels(labels_path, labels)
    sio.write_meta(cfg["out"], len(u), int(labels.sum()), asdict(config))
    print(f"wrote {len(u)} edges to {cfg['out']} and labels to {labels_path}")
    return EXIT_OK


def cmd_bench(cfg: dict[str, Any]) -> int:
    sk, sc, dp, _ = pipeline_params(cfg)
    u, v, t, _labels = _stream_or_synthetic(cfg)
    rows = ev.bench(u, v, t, sk, sc, dp, repeats=cfg["repeats"])
    with _output(cfg["out"]) as fh:
        fh.write("n_edges,exec_seconds,avg_time_per_edge_s\n")
        for r in rows:
            fh.write(f"{r.n_edges},{r.exec_seconds:.6f},{r.avg_time_per_edge:.6e}\n")
        if len(rows) >= 2:
            slope, _, r2 = ev.linear_fit_r2([r.n_edges for r in rows],
                                            [r.exec_seconds for r in rows])
            fh.write(f"# linear fit: {slope:.3e} s/edge, r2={r2:.4f}\n")
    return EXIT_OK


def read_grid(path: str | Path) -> dict[str, list[Any]]:
    allowed = set(PIPELINE_KEYS)
    grid = {k: [_convert(k, x.strip()) for x in v.split(",") if x.strip()]
            for k, v in read_config(path, allowed).items()}
    if not grid or any(not v for v in grid.values()):
        raise UsageError(f"{path}: grid is empty")
    return grid


def cmd_sweep(cfg: dict[str, Any]) -> int:
    if cfg["grid"] is None:
        raise UsageError("--grid is required for sweep")
    grid = read_grid(cfg["grid"])
    base = {k: cfg[k] for k in PIPELINE_KEYS}
    pipeline_params(base)
    stream = _stream_or_synthetic(cfg)
    full = {**{k: [v] for k, v in base.items() if k not in grid and v is not None}, **grid}
    rows = ev.sweep(full, stream, repeats=cfg["repeats"], workers=cfg["workers"])
    with _output(cfg["out"]) as fh:
        ev.write_sweep(rows, fh)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "synth": cmd_synth, "bench": cmd_bench, "sweep": cmd_sweep}


def dispatch(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"edgesketch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ParseError, OrderingError, LengthError, UndefinedAUCError) as exc:
        print(f"edgesketch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
