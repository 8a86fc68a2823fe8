"""Temporal count-min sketch with conservative updates.

The sketch keeps ``W`` time-bin planes of ``d x w`` counters in a ring
(slot ``bin % W``) plus one cumulative ``d x w`` plane that is never
decayed or pruned. Every edge touches ``d`` counters in the current
plane and ``d`` counters in the cumulative plane.

Decay is lazy. A past plane is only ever written while it is the
current bin, so its logical value at bin ``b`` is the stored count
times ``gamma ** (b - stamp)``. Nothing has to be rescaled on a bin
transition; the factor is applied when a past plane is read. Planes
that fall out of the window are zeroed when the window moves past
them.

The per-edge loops are compiled with numba. ``TensorSketch`` wraps the
arrays and exposes the single-edge operations; ``update_many`` and the
fused pipeline in :mod:`edgesketch.evaluation` run the same kernels
over whole arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import OrderingError, ParameterError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)

# clock layout: [current_bin, bins_elapsed, started]
_CUR, _ELAPSED, _STARTED = 0, 1, 2


@dataclass(frozen=True)
class SketchParams:
    """Shape and temporal behaviour of a :class:`TensorSketch`.

    ``d`` hash rows, ``w`` columns per row, ``W`` live time bins of
    width ``delta``; live bins are multiplied by ``gamma`` per bin
    advanced. ``seed`` fixes the hash family.
    """

    d: int = 4
    w: int = 512
    W: int = 16
    delta: float = 1
    gamma: float = 0.95
    seed: int = 42

    def __post_init__(self) -> None:
        for name in ("d", "w", "W"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}", key=name)
        if not (self.delta > 0) or not math.isfinite(self.delta):
            raise ParameterError(f"delta must be positive, got {self.delta!r}", key="delta")
        if not (0 < self.gamma <= 1):
            raise ParameterError(f"gamma must lie in (0, 1], got {self.gamma!r}", key="gamma")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not (
            0 <= self.seed < 2**64
        ):
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}",
                                 key="seed")


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _mix64(x):
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


@numba.njit(cache=True)
def _row_seed(seed, row):
    return _mix64(seed + np.uint64(row + 1) * _GOLDEN)


@numba.njit(cache=True)
def _column(row_seed, u, v, w):
    h = _mix64(row_seed ^ np.uint64(u))
    h = _mix64(h ^ np.uint64(v) ^ _GOLDEN)
    return np.int64(h % np.uint64(w))


@numba.njit(cache=True)
def _row_seeds(seed, d):
    out = np.empty(d, dtype=np.uint64)
    for i in range(d):
        out[i] = _row_seed(seed, i)
    return out


@numba.njit(cache=True)
def _bin_of(t, delta_int, delta_f):
    if delta_int > 0:
        return t // delta_int
    return np.int64(math.floor(t / delta_f))


@numba.njit(cache=True)
def _zero_slot(planes, s):
    plane = planes[s]
    for i in range(plane.shape[0]):
        for j in range(plane.shape[1]):
            plane[i, j] = 0.0


@numba.njit(cache=True, inline="always")
def _advance(planes, stamp, clock, b):
    """Move the clock to bin ``b``; returns bins advanced or -1 if ``b`` is in the past."""
    n_slots = stamp.shape[0]
    if clock[_STARTED] == 0:
        slot = b % n_slots
        _zero_slot(planes, slot)
        stamp[slot] = b
        clock[_CUR] = b
        clock[_ELAPSED] = 1
        clock[_STARTED] = 1
        return 0
    cur = clock[_CUR]
    if b < cur:
        return -1
    if b == cur:
        return 0
    for s in range(n_slots):
        # a slot exactly n_slots old is the one about to be reused
        if stamp[s] >= 0 and b - stamp[s] >= n_slots:
            _zero_slot(planes, s)
            stamp[s] = -1
    slot = b % n_slots
    stamp[slot] = b
    clock[_CUR] = b
    clock[_ELAPSED] += b - cur
    return b - cur


@numba.njit(cache=True, inline="always")
def _cu_increment(plane, cols):
    """Conservative update of one ``d x w`` plane; returns the new minimum."""
    d = cols.shape[0]
    m = plane[0, cols[0]]
    for i in range(1, d):
        c = plane[i, cols[i]]
        if c < m:
            m = c
    for i in range(d):
        if plane[i, cols[i]] == m:
            plane[i, cols[i]] = m + 1.0
    return m + 1.0


@numba.njit(cache=True, inline="always")
def _insert(planes, total, stamp, clock, row_seeds, cols, u, v, b):
    """Advance to bin ``b`` and count one ``(u, v)``; returns (a_hat, s_hat, ok)."""
    if _advance(planes, stamp, clock, b) < 0:
        return 0.0, 0.0, False
    w = total.shape[1]
    for i in range(row_seeds.shape[0]):
        cols[i] = _column(row_seeds[i], u, v, w)
    a = _cu_increment(planes[clock[_CUR] % stamp.shape[0]], cols)
    s = _cu_increment(total, cols)
    return a, s, True


@numba.njit(cache=True)
def _insert_many(planes, total, stamp, clock, row_seeds, delta_int, delta_f, us, vs, ts,
                 a_out, s_out, t_out):
    cols = np.empty(row_seeds.shape[0], dtype=np.int64)
    for n in range(us.shape[0]):
        b = _bin_of(ts[n], delta_int, delta_f)
        a, s, ok = _insert(planes, total, stamp, clock, row_seeds, cols, us[n], vs[n], b)
        if not ok:
            return n
        a_out[n] = a
        s_out[n] = s
        t_out[n] = clock[_ELAPSED]
    return -1


@numba.njit(cache=True)
def _min_at(plane, row_seeds, u, v):
    w = plane.shape[1]
    m = plane[0, _column(row_seeds[0], u, v, w)]
    for i in range(1, row_seeds.shape[0]):
        c = plane[i, _column(row_seeds[i], u, v, w)]
        if c < m:
            m = c
    return m


# ---------------------------------------------------------------- public API


def hash_edge(seed: int, row: int, u: int, v: int, w: int) -> int:
    """Column of edge ``(u, v)`` in hash row ``row``, in ``[0, w)``."""
    if w < 1:
        raise ParameterError(f"w must be positive, got {w}")
    row_seed = np.uint64(_row_seed(np.uint64(seed), row))
    return int(_column(row_seed, np.uint64(u), np.uint64(v), np.uint64(w)))


def _check_node(name: str, x: int) -> None:
    if x < 0:
        raise ParameterError(f"node id {name} must be non-negative, got {x}")


class TensorSketch:
    """Ring of ``W`` count-min planes plus a cumulative plane.

    >>> sk = TensorSketch(SketchParams(d=2, w=8, W=4, delta=10, gamma=0.9))
    >>> sk.update(1, 2, t=0)
    (1.0, 1.0, 1)
    """

    def __init__(self, params: SketchParams) -> None:
        self.params = params
        p = params
        self._planes = np.zeros((p.W, p.d, p.w), dtype=np.float64)
        self.total = np.zeros((p.d, p.w), dtype=np.float64)
        self._stamp = np.full(p.W, -1, dtype=np.int64)
        self._clock = np.zeros(3, dtype=np.int64)
        self._row_seeds = _row_seeds(np.uint64(p.seed), p.d)
        self._cols = np.empty(p.d, dtype=np.int64)
        delta = float(p.delta)
        self._delta_int = np.int64(delta) if delta.is_integer() else np.int64(0)
        self._delta_f = delta

    # -- state ---------------------------------------------------------

    @property
    def current_bin(self) -> int | None:
        return int(self._clock[_CUR]) if self._clock[_STARTED] else None

    @property
    def bins_elapsed(self) -> int:
        return int(self._clock[_ELAPSED])

    @property
    def bin_stamp(self) -> np.ndarray:
        """Absolute bin held by each ring slot, -1 for empty slots."""
        return self._stamp.copy()

    @property
    def n_counters(self) -> int:
        return self._planes.size + self.total.size

    @property
    def current(self) -> np.ndarray:
        """Decayed per-bin counters as a ``d x w x W`` array indexed by ring slot."""
        out = np.zeros((self.params.d, self.params.w, self.params.W))
        for slot in range(self.params.W):
            out[:, :, slot] = self._planes[slot] * self._slot_factor(slot)
        return out

    def _slot_factor(self, slot: int) -> float:
        stamp = int(self._stamp[slot])
        if stamp < 0 or not self._clock[_STARTED]:
            return 0.0
        age = int(self._clock[_CUR]) - stamp
        if age >= self.params.W:
            return 0.0
        return self.params.gamma**age

    def time_bin(self, t: int) -> int:
        if t < 0:
            raise ParameterError(f"timestamp must be non-negative, got {t}")
        return int(_bin_of(np.int64(t), self._delta_int, self._delta_f))

    def columns(self, u: int, v: int) -> list[int]:
        return [int(_column(s, np.uint64(u), np.uint64(v), np.uint64(self.params.w)))
                for s in self._row_seeds]

    # -- operations ----------------------------------------------------

    def advance_time(self, t: int) -> int:
        """Move to the bin of ``t``; returns the number of bins advanced."""
        b = self.time_bin(t)
        moved = int(_advance(self._planes, self._stamp, self._clock, np.int64(b)))
        if moved < 0:
            raise OrderingError(f"timestamp {t} (bin {b}) precedes current bin {self.current_bin}")
        return moved

    def update(self, u: int, v: int, t: int) -> tuple[float, float, int]:
        """Count edge ``(u, v)`` at time ``t``.

        Returns the current-bin estimate, the cumulative estimate and the
        number of bins elapsed (1-based).
        """
        _check_node("u", u)
        _check_node("v", v)
        b = self.time_bin(t)
        a, s, ok = _insert(self._planes, self.total, self._stamp, self._clock, self._row_seeds,
                           self._cols, np.uint64(u), np.uint64(v), np.int64(b))
        if not ok:
            raise OrderingError(f"timestamp {t} (bin {b}) precedes current bin {self.current_bin}")
        return float(a), float(s), self.bins_elapsed

    def update_many(self, us, vs, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised :meth:`update` over aligned arrays."""
        us = np.ascontiguousarray(us, dtype=np.int64)
        vs = np.ascontiguousarray(vs, dtype=np.int64)
        ts = np.ascontiguousarray(ts, dtype=np.int64)
        if not (us.shape == vs.shape == ts.shape):
            raise ParameterError("u, v and t arrays must have the same length")
        if us.size and (us.min() < 0 or vs.min() < 0 or ts.min() < 0):
            raise ParameterError("node ids and timestamps must be non-negative")
        n = us.shape[0]
        a = np.empty(n)
        s = np.empty(n)
        tb = np.empty(n, dtype=np.int64)
        bad = _insert_many(self._planes, self.total, self._stamp, self._clock, self._row_seeds,
                           self._delta_int, self._delta_f, us, vs, ts, a, s, tb)
        if bad >= 0:
            raise OrderingError(f"edge {bad}: timestamp {ts[bad]} precedes current bin {self.current_bin}")
        return a, s, tb

    def estimate_current(self, u: int, v: int, bin: int | None = None) -> float:
        """Estimated count of ``(u, v)`` in the current bin.

        ``bin`` selects an earlier bin still inside the window; its value
        carries the decay accumulated since it was current.
        """
        if not self._clock[_STARTED]:
            return 0.0
        b = int(self._clock[_CUR]) if bin is None else bin
        slot = b % self.params.W
        if self._stamp[slot] != b:
            return 0.0
        factor = self._slot_factor(slot)
        if factor == 0.0:
            return 0.0
        raw = _min_at(self._planes[slot], self._row_seeds, np.uint64(u), np.uint64(v))
        return float(raw * factor)

    def estimate_total(self, u: int, v: int) -> float:
        """Estimated count of ``(u, v)`` over the whole stream."""
        return float(_min_at(self.total, self._row_seeds, np.uint64(u), np.uint64(v)))

    def counter(self, row: int, col: int, bin: int) -> float:
        """Decayed value of one per-bin counter; 0 once ``bin`` left the window."""
        slot = bin % self.params.W
        if self._stamp[slot] != bin:
            return 0.0
        return float(self._planes[slot, row, col] * self._slot_factor(slot))


def new_sketch(params: SketchParams) -> TensorSketch:
    return TensorSketch(params)
