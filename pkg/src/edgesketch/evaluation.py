"""End-to-end scoring, ROC-AUC, timing and parameter sweeps."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import logging
import time
from collections.abc import Callable, Iterator, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, NamedTuple

import numba
import numpy as np

from .detector import DetectorState, _classify
from .errors import LengthError, OrderingError, ParameterError, UndefinedAUCError
from .scoring import ScoringParams, _posterior, _raw_score
from .sketch import SketchParams, TensorSketch, _ELAPSED, _bin_of, _insert

log = logging.getLogger(__name__)

SCORE_MODES = ("posterior", "raw")
FLAG_MODES = ("smoothed", "raw")
SCORE_HEADER = ("u", "v", "t", "a_hat", "s_hat", "raw", "posterior", "z", "tau", "flag")


@dataclass(frozen=True)
class DetectorParams:
    lam: float = 0.8
    k: float = 3.0
    flag_mode: str = "smoothed"
    alpha: float | None = None  # constant threshold in place of mean + k*std

    def __post_init__(self) -> None:
        if self.flag_mode not in FLAG_MODES:
            raise ParameterError(f"flag_mode must be one of {FLAG_MODES}, got {self.flag_mode!r}",
                                 key="flag_mode")
        DetectorState(self.lam, self.k, fixed_threshold=self.alpha)  # validates the values


class ScoredEdge(NamedTuple):
    u: int
    v: int
    t: int
    a_hat: float
    s_hat: float
    raw: float
    posterior: float
    z: float
    tau: float
    flag: bool


@dataclass
class ScoredStream:
    """Column-oriented per-edge output; indexing yields :class:`ScoredEdge`."""

    u: np.ndarray
    v: np.ndarray
    t: np.ndarray
    a_hat: np.ndarray
    s_hat: np.ndarray
    raw: np.ndarray
    posterior: np.ndarray
    z: np.ndarray
    tau: np.ndarray
    flag: np.ndarray
    score_mode: str = "posterior"

    def __len__(self) -> int:
        return len(self.u)

    def __getitem__(self, i: int) -> ScoredEdge:
        return ScoredEdge(int(self.u[i]), int(self.v[i]), int(self.t[i]), float(self.a_hat[i]),
                          float(self.s_hat[i]), float(self.raw[i]), float(self.posterior[i]),
                          float(self.z[i]), float(self.tau[i]), bool(self.flag[i]))

    def __iter__(self) -> Iterator[ScoredEdge]:
        return (self[i] for i in range(len(self)))

    @property
    def score(self) -> np.ndarray:
        """The score fed to the detector (and used for AUC)."""
        return self.posterior if self.score_mode == "posterior" else self.raw

    @classmethod
    def concat(cls, parts: Sequence[ScoredStream]) -> ScoredStream:
        cols = {name: np.concatenate([getattr(p, name) for p in parts]) for name in SCORE_HEADER}
        return cls(**cols, score_mode=parts[0].score_mode)

    def write_csv(self, fh) -> None:
        """Rows with 9 significant digits; ``fh`` is a text stream."""
        fh.write(",".join(SCORE_HEADER) + "\n")
        cols = (self.u.tolist(), self.v.tolist(), self.t.tolist(), self.a_hat.tolist(),
                self.s_hat.tolist(), self.raw.tolist(), self.posterior.tolist(), self.z.tolist(),
                self.tau.tolist(), self.flag.astype(np.int8).tolist())
        for u, v, t, a, s, r, p, z, tau, f in zip(*cols):
            fh.write(f"{u},{v},{t},{a:.9g},{s:.9g},{r:.9g},{p:.9g},{z:.9g},{tau:.9g},{f}\n")


@dataclass
class RunReport:
    n_edges: int
    exec_seconds: float
    avg_time_per_edge: float
    auc: float | None = None
    load_seconds: float | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [f"n_edges={self.n_edges}", f"exec_seconds={self.exec_seconds:.6f}",
               f"avg_time_per_edge={self.avg_time_per_edge:.6e}"]
        if self.load_seconds is not None:
            out.append(f"load_seconds={self.load_seconds:.6f}")
        out.append("auc=" + ("NA" if self.auc is None else f"{self.auc:.6f}"))
        out += [f"{k}={v}" for k, v in self.params.items()]
        return out


@numba.njit(cache=True)
def _score_kernel(planes, total, stamp, clock, row_seeds, delta_int, delta_f, us, vs, ts,
                  shift, prior, floor, var_factor, use_raw, det, lam, k, flag_on_raw, fixed,
                  a_out, s_out, raw_out, post_out, z_out, tau_out, flag_out):
    cols = np.empty(row_seeds.shape[0], dtype=np.int64)
    for n in range(us.shape[0]):
        b = _bin_of(ts[n], delta_int, delta_f)
        a, s, ok = _insert(planes, total, stamp, clock, row_seeds, cols, us[n], vs[n], b)
        if not ok:
            return n
        tb = np.float64(clock[_ELAPSED])
        raw = _raw_score(a, s, tb)
        post = _posterior(a, s, tb, shift, prior, floor, var_factor)
        x = raw if use_raw else post
        z, tau, flag = _classify(det, x, lam, k, flag_on_raw, fixed)
        a_out[n] = a
        s_out[n] = s
        raw_out[n] = raw
        post_out[n] = post
        z_out[n] = z
        tau_out[n] = tau
        flag_out[n] = flag
    return -1


class Pipeline:
    """Sketch, scoring and detector state for one stream, fed in chunks."""

    def __init__(self, sketch_params: SketchParams | None = None,
                 scoring_params: ScoringParams | None = None,
                 detector_params: DetectorParams | None = None,
                 score_mode: str = "posterior") -> None:
        if score_mode not in SCORE_MODES:
            raise ParameterError(f"score_mode must be one of {SCORE_MODES}, got {score_mode!r}",
                                 key="score_mode")
        self.sketch = TensorSketch(sketch_params or SketchParams())
        self.scoring = scoring_params or ScoringParams()
        dp = detector_params or DetectorParams()
        self.detector = DetectorState(dp.lam, dp.k, flag_on_raw=dp.flag_mode == "raw",
                                      fixed_threshold=dp.alpha)
        self.score_mode = score_mode

    def process(self, u, v, t) -> ScoredStream:
        u = np.ascontiguousarray(u, dtype=np.int64)
        v = np.ascontiguousarray(v, dtype=np.int64)
        t = np.ascontiguousarray(t, dtype=np.int64)
        if not (u.shape == v.shape == t.shape):
            raise ParameterError("u, v and t arrays must have the same length")
        if u.size and (u.min() < 0 or v.min() < 0 or t.min() < 0):
            raise ParameterError("node ids and timestamps must be non-negative")
        n = len(u)
        out = {name: np.empty(n) for name in ("a_hat", "s_hat", "raw", "posterior", "z", "tau")}
        flag = np.empty(n, dtype=np.bool_)
        sk, sp, det = self.sketch, self.scoring, self.detector
        bad = _score_kernel(sk._planes, sk.total, sk._stamp, sk._clock, sk._row_seeds,
                            sk._delta_int, sk._delta_f, u, v, t,
                            float(sp.delta_shift), float(sp.prior), float(sp.variance_floor),
                            float(sp.anomaly_variance_factor),
                            self.score_mode == "raw", det._buf, det.lam, det.k, det.flag_on_raw,
                            det._fixed, out["a_hat"], out["s_hat"], out["raw"], out["posterior"],
                            out["z"], out["tau"], flag)
        if bad >= 0:
            raise OrderingError(f"edge {bad}: timestamp {t[bad]} precedes the current bin "
                                f"{sk.current_bin}")
        return ScoredStream(u, v, t, flag=flag, score_mode=self.score_mode, **out)


def warmup() -> None:
    """Compile the kernels so later timings exclude JIT cost."""
    Pipeline(SketchParams(d=1, w=2, W=1)).process([0, 1], [1, 0], [0, 1])


def run_pipeline(u, v, t, sketch_params: SketchParams | None = None,
                 scoring_params: ScoringParams | None = None,
                 detector_params: DetectorParams | None = None,
                 score_mode: str = "posterior", labels=None) -> tuple[ScoredStream, RunReport]:
    """Score a whole stream; the report's timing covers the processing loop only."""
    sk = sketch_params or SketchParams()
    sc = scoring_params or ScoringParams()
    dp = detector_params or DetectorParams()
    pipe = Pipeline(sk, sc, dp, score_mode)
    warmup()
    start = time.perf_counter()
    scored = pipe.process(u, v, t)
    elapsed = time.perf_counter() - start
    n = len(scored)
    auc = None
    if labels is not None:
        labels = np.asarray(labels)
        if len(labels) != n:
            raise LengthError(f"{len(labels)} labels for {n} edges")
        if n and 0 < labels.sum() < n:
            auc = roc_auc(scored.score, labels)
    params = {**asdict(sk), **asdict(sc), **asdict(dp), "score_mode": score_mode}
    report = RunReport(n, elapsed, avg_time(elapsed, n) if n else 0.0, auc, params=params)
    return scored, report


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve by the trapezoid rule over all thresholds.

    Tied scores form a single threshold step, which credits tied
    positive/negative pairs with one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise LengthError(f"{len(scores)} scores for {len(labels)} labels")
    pos = labels.astype(bool)
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative label")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    p = pos[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(p)[ends].astype(np.float64)
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def avg_time(exec_seconds: float, n_edges: int) -> float:
    if n_edges < 1:
        raise ParameterError("average time per edge needs at least one edge")
    return exec_seconds / n_edges


# ---------------------------------------------------------------- sweeps

SKETCH_KEYS = {"rows": "d", "cols": "w", "window": "W", "bin_width": "delta", "gamma": "gamma",
               "seed": "seed"}
SCORING_KEYS = {"delta_shift": "delta_shift", "prior": "prior"}
DETECTOR_KEYS = {"lambda": "lam", "k": "k", "flag_mode": "flag_mode", "alpha": "alpha"}


def split_params(flat: Mapping[str, Any]) -> tuple[SketchParams, ScoringParams, DetectorParams, str]:
    """Build the three parameter records from flat command-line style keys."""
    sk = {SKETCH_KEYS[k]: v for k, v in flat.items() if k in SKETCH_KEYS}
    sc = {SCORING_KEYS[k]: v for k, v in flat.items() if k in SCORING_KEYS}
    dp = {DETECTOR_KEYS[k]: v for k, v in flat.items() if k in DETECTOR_KEYS}
    mode = flat.get("score_mode", "posterior")
    return SketchParams(**sk), ScoringParams(**sc), DetectorParams(**dp), mode


@dataclass
class SweepRow:
    params: dict[str, Any]
    auc_mean: float
    auc_std: float
    runtime_mean_s: float
    avg_time_per_edge_s: float
    error: str | None = None


def expand_grid(grid: Mapping[str, Sequence[Any]]) -> list[dict[str, Any]]:
    if not grid:
        raise ParameterError("parameter grid is empty")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _run_cell(cell: dict[str, Any], stream, repeats: int) -> SweepRow:
    u, v, t, labels = stream
    aucs, times = [], []
    try:
        base_seed = int(cell.get("seed", SketchParams().seed))
        for r in range(repeats):
            sk, sc, dp, mode = split_params({**cell, "seed": base_seed + r})
            scored, report = run_pipeline(u, v, t, sk, sc, dp, mode, labels=labels)
            times.append(report.exec_seconds)
            aucs.append(np.nan if report.auc is None else report.auc)
    except Exception as exc:  # one bad cell must not abort the sweep
        log.warning("sweep cell %s failed: %s", cell, exc)
        return SweepRow(cell, np.nan, np.nan, np.nan, np.nan, error=str(exc))
    runtime = float(np.mean(times))
    n = len(u)
    aucs = np.asarray(aucs)
    # shifting by the first value keeps identical repeats at exactly zero spread
    return SweepRow(cell, float(np.mean(aucs)), float(np.std(aucs - aucs[0])), runtime,
                    runtime / n if n else np.nan)


def sweep(grid: Mapping[str, Sequence[Any]], stream, repeats: int = 5,
          workers: int = 1) -> list[SweepRow]:
    """Run every grid cell ``repeats`` times with hash seeds ``seed, seed+1, ...``.

    ``stream`` is ``(u, v, t, labels)``; labels may be None, in which
    case the AUC columns are NaN.
    """
    if repeats < 1:
        raise ParameterError("repeats must be at least 1")
    cells = expand_grid(grid)
    if workers <= 1:
        return [_run_cell(c, stream, repeats) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_cell, c, stream, repeats) for c in cells]
        return [f.result() for f in futures]


def write_sweep(rows: Sequence[SweepRow], fh) -> None:
    keys = list(rows[0].params) if rows else []
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(keys + ["auc_mean", "auc_std", "runtime_mean_s", "avg_time_per_edge_s"])
    for r in rows:
        writer.writerow([r.params[k] for k in keys]
                        + [f"{r.auc_mean:.6f}", f"{r.auc_std:.6f}", f"{r.runtime_mean_s:.6f}",
                           f"{r.avg_time_per_edge_s:.6e}"])


# ---------------------------------------------------------------- scaling

@dataclass
class BenchRow:
    n_edges: int
    exec_seconds: float
    avg_time_per_edge: float


def _best_times(jobs: Sequence[Callable[[], Any]], repeats: int,
                clock: Callable[[], float]) -> list[float]:
    # rounds visit every job once, so slow drift on a shared machine hits all jobs alike
    best = [np.inf] * len(jobs)
    for _ in range(repeats):
        for i, job in enumerate(jobs):
            start = clock()
            job()
            best[i] = min(best[i], clock() - start)
    return best


def bench(u, v, t, sketch_params: SketchParams | None = None,
          scoring_params: ScoringParams | None = None,
          detector_params: DetectorParams | None = None,
          prefixes: Sequence[int] | None = None, repeats: int = 3,
          clock: Callable[[], float] = time.perf_counter) -> list[BenchRow]:
    """Time the pipeline on growing prefixes of a stream (best of ``repeats``)."""
    n = len(u)
    if prefixes is None:
        # decades up to the stream length, then the whole stream
        prefixes = [10**p for p in range(1, 7) if 10**p < n] + [n]
    prefixes = [p for p in prefixes if p <= n] or [n]
    warmup()

    def job(p):
        return lambda: Pipeline(sketch_params, scoring_params, detector_params).process(
            u[:p], v[:p], t[:p])

    times = _best_times([job(p) for p in prefixes], repeats, clock)
    return [BenchRow(p, s, avg_time(s, p)) for p, s in zip(prefixes, times)]


def bench_depths(u, v, t, depths: Sequence[int], sketch_params: SketchParams | None = None,
                 scoring_params: ScoringParams | None = None,
                 detector_params: DetectorParams | None = None, repeats: int = 5,
                 clock: Callable[[], float] = time.perf_counter) -> list[tuple[int, float]]:
    """Whole-stream runtime for each number of hash rows (best of ``repeats``)."""
    base = sketch_params or SketchParams()
    warmup()

    def job(d):
        params = dataclasses.replace(base, d=d)
        return lambda: Pipeline(params, scoring_params, detector_params).process(u, v, t)

    return list(zip(depths, _best_times([job(d) for d in depths], repeats, clock)))


def linear_fit_r2(x, y) -> tuple[float, float, float]:
    """Least-squares ``y = a*x + b``; returns ``(a, b, r2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2
