"""Edge/label file readers and the synthetic burst generator.

Edge files hold one ``u<sep>v<sep>t`` triple per line with ``sep`` a
comma or a space and no header. Label files hold one ``0`` or ``1`` per
line, aligned with the edge file.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import LengthError, ParameterError, ParseError

log = logging.getLogger(__name__)

SEPARATORS = {"comma": ",", "space": None}


class EdgeEvent(NamedTuple):
    u: int
    v: int
    t: int
    label: bool | None = None


class NodeInterner:
    """Maps string node ids to dense integers in order of first appearance."""

    def __init__(self) -> None:
        self.ids: dict[str, int] = {}

    def __call__(self, token: str) -> int:
        i = self.ids.get(token)
        if i is None:
            i = self.ids[token] = len(self.ids)
        return i

    def __len__(self) -> int:
        return len(self.ids)


def _parse_uint(token: str) -> int:
    x = int(token)
    if x < 0:
        raise ValueError(token)
    return x


def read_edges(path: str | Path, format: str = "comma", node_ids: str = "auto",
               interner: NodeInterner | None = None) -> Iterator[EdgeEvent]:
    """Yield edges from ``path`` in file order.

    ``node_ids`` is ``"int"``, ``"str"`` or ``"auto"`` (decided from the
    first line: integers if both ids parse as integers). String ids are
    interned to dense integers. Timestamps that go backwards are clamped
    to the latest timestamp seen, with a single warning.
    """
    if format not in SEPARATORS:
        raise ParameterError(f"format must be one of {sorted(SEPARATORS)}, got {format!r}")
    if node_ids not in ("auto", "int", "str"):
        raise ParameterError(f"node_ids must be auto, int or str, got {node_ids!r}")
    sep = SEPARATORS[format]
    intern = interner if interner is not None else NodeInterner()
    mode = node_ids
    last_t = -1
    warned = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(sep)
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}: {line!r}", lineno)
            su, sv, st = (p.strip() for p in parts)
            try:
                t = _parse_uint(st)
            except ValueError:
                raise ParseError(f"timestamp is not a non-negative integer: {st!r}", lineno) from None
            if mode == "auto":
                mode = "int" if su.isdigit() and sv.isdigit() else "str"
            if mode == "int":
                try:
                    u, v = _parse_uint(su), _parse_uint(sv)
                except ValueError:
                    raise ParseError(f"node ids are not non-negative integers: {line!r}", lineno) from None
            else:
                u, v = intern(su), intern(sv)
            if t < last_t:
                if not warned:
                    log.warning("%s line %d: timestamp %d decreases (previous %d); clamping",
                                path, lineno, t, last_t)
                    warned = True
                t = last_t
            last_t = t
            yield EdgeEvent(u, v, t)


def read_labels(path: str | Path) -> Iterator[int]:
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.strip()
            if not token:
                continue
            if token not in ("0", "1"):
                raise ParseError(f"label must be 0 or 1, got {token!r}", lineno)
            yield int(token)


def to_arrays(edges: Iterable[EdgeEvent]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    us, vs, ts = [], [], []
    for e in edges:
        us.append(e.u)
        vs.append(e.v)
        ts.append(e.t)
    return (np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64),
            np.asarray(ts, dtype=np.int64))


def load_stream(edges_path: str | Path, labels_path: str | Path | None = None,
                format: str = "comma", node_ids: str = "auto"):
    """Read an edge file (and optional label file) into arrays.

    Returns ``(u, v, t, labels)`` with ``labels`` None when no label file
    is given.
    """
    u, v, t = to_arrays(read_edges(edges_path, format, node_ids))
    meta = read_meta(edges_path)
    if meta is not None and "n_edges" in meta:
        pair_check(len(u), int(meta["n_edges"]), what="metadata line count")
    labels = None
    if labels_path is not None:
        labels = np.fromiter(read_labels(labels_path), dtype=np.int8)
        pair_check(len(u), len(labels))
    return u, v, t, labels


def pair_check(n_edges: int, n_labels: int, what: str = "labels") -> None:
    if n_edges != n_labels:
        raise LengthError(f"{n_labels} {what} for {n_edges} edges")


def meta_path(edges_path: str | Path) -> Path:
    return Path(str(edges_path) + ".meta")


def write_meta(edges_path: str | Path, n_edges: int, n_anomalous: int, config: dict) -> None:
    """Side-car ``key=value`` record next to a generated edge file."""
    lines = [f"n_edges={n_edges}", f"n_anomalous={n_anomalous}"]
    lines += [f"{k}={v}" for k, v in config.items()]
    meta_path(edges_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_meta(edges_path: str | Path) -> dict[str, str] | None:
    path = meta_path(edges_path)
    if not path.exists():
        return None
    pairs = (line.split("=", 1) for line in path.read_text(encoding="utf-8").splitlines() if "=" in line)
    return {k.strip(): v.strip() for k, v in pairs}


def write_edges(path: str | Path, u, v, t, format: str = "comma") -> None:
    sep = "," if format == "comma" else " "
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{a}{sep}{b}{sep}{c}\n" for a, b, c in zip(u.tolist(), v.tolist(), t.tolist()))


def write_labels(path: str | Path, labels) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.writelines(f"{int(x)}\n" for x in labels)


@dataclass(frozen=True)
class SyntheticConfig:
    """Background traffic over a fixed key pool plus injected microcluster bursts.

    Background keys are drawn from the node pool once; there are as many
    of them as makes each key average ``background_rate`` events per bin.
    Each burst sends ``burst_size`` events from one source to
    ``burst_fanout`` destinations inside a single bin.
    """

    n_nodes: int = 1000
    n_edges: int = 1_000_000
    n_bins: int = 1000
    burst_count: int = 20
    burst_size: int = 500
    burst_fanout: int = 5
    background_rate: float = 1.0
    seed: int = 42

    def __post_init__(self) -> None:
        for name in ("n_nodes", "n_edges", "n_bins", "burst_size", "burst_fanout"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.burst_count < 0:
            raise ParameterError(f"burst_count must be non-negative, got {self.burst_count}")
        if self.n_nodes < 2:
            raise ParameterError("n_nodes must be at least 2")
        if self.burst_count * self.burst_size > self.n_edges:
            raise ParameterError(
                f"burst_count*burst_size = {self.burst_count * self.burst_size} exceeds n_edges = {self.n_edges}")
        if self.burst_fanout > self.n_nodes - 1:
            raise ParameterError(f"burst_fanout must be below n_nodes, got {self.burst_fanout}")
        if self.burst_fanout > self.burst_size:
            raise ParameterError("burst_fanout cannot exceed burst_size")
        if not (self.background_rate > 0):
            raise ParameterError(f"background_rate must be positive, got {self.background_rate}")


def generate_synthetic(config: SyntheticConfig | None = None):
    """Labelled synthetic stream as ``(u, v, t, labels)`` arrays, sorted by time.

    Timestamps are bin indices, so a bin width of 1 recovers the
    generator's bins exactly.
    """
    cfg = config or SyntheticConfig()
    rng = np.random.default_rng(cfg.seed)
    n_burst = cfg.burst_count * cfg.burst_size
    n_bg = cfg.n_edges - n_burst

    per_bin = n_bg / cfg.n_bins
    n_keys = int(max(1, min(round(per_bin / cfg.background_rate), cfg.n_nodes * (cfg.n_nodes - 1))))
    pool_u = rng.integers(0, cfg.n_nodes, size=n_keys)
    pool_v = (pool_u + rng.integers(1, cfg.n_nodes, size=n_keys)) % cfg.n_nodes
    pick = rng.integers(0, n_keys, size=n_bg)
    bg_u, bg_v = pool_u[pick], pool_v[pick]
    bg_t = rng.integers(0, cfg.n_bins, size=n_bg)

    bu = np.empty(n_burst, dtype=np.int64)
    bv = np.empty(n_burst, dtype=np.int64)
    bt = np.empty(n_burst, dtype=np.int64)
    for i in range(cfg.burst_count):
        src = rng.integers(0, cfg.n_nodes)
        others = np.delete(np.arange(cfg.n_nodes), src)
        dsts = rng.choice(others, size=cfg.burst_fanout, replace=False)
        sl = slice(i * cfg.burst_size, (i + 1) * cfg.burst_size)
        bu[sl] = src
        bv[sl] = dsts[np.arange(cfg.burst_size) % cfg.burst_fanout]
        bt[sl] = rng.integers(0, cfg.n_bins)

    u = np.concatenate([bg_u, bu]).astype(np.int64)
    v = np.concatenate([bg_v, bv]).astype(np.int64)
    t = np.concatenate([bg_t, bt]).astype(np.int64)
    labels = np.concatenate([np.zeros(n_bg, np.int8), np.ones(n_burst, np.int8)])
    # shuffle within bins, then order by bin
    perm = rng.permutation(cfg.n_edges)
    order = perm[np.argsort(t[perm], kind="stable")]
    return u[order], v[order], t[order], labels[order]
