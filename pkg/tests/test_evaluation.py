import io
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import pair_count_auc
from edgesketch.detector import DetectorState
from edgesketch.errors import LengthError, OrderingError, ParameterError, UndefinedAUCError
from edgesketch.evaluation import (DetectorParams, Pipeline, avg_time, expand_grid, roc_auc,
                                   run_pipeline, sweep, write_sweep)
from edgesketch.scoring import ScoringParams, posterior_anomaly, raw_score
from edgesketch.sketch import SketchParams, TensorSketch
from edgesketch.stream_io import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="module")
def small_stream():
    return generate_synthetic(SyntheticConfig(n_nodes=200, n_edges=60_000, n_bins=200,
                                              burst_count=6, burst_size=300, burst_fanout=4))


@pytest.fixture(scope="module")
def default_stream():
    return generate_synthetic(SyntheticConfig(seed=42))


# ---------------------------------------------------------------- AUC

def test_auc_perfect():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_auc_all_tied():
    assert roc_auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5


@pytest.mark.parametrize("scores,labels,expected", [([0.9, 0.4, 0.6, 0.1], [1, 0, 1, 0], 1.0),
                                                    ([0.4, 0.9, 0.1, 0.6], [1, 0, 1, 0], 0.0),
                                                    ([0.6, 0.4, 0.9, 0.1], [1, 1, 0, 0], 0.5)])
def test_auc_small_cases(scores, labels, expected):
    # expected values come from pair counting: 0.6 and 0.4 both lose to 0.9 and beat 0.1
    assert pair_count_auc(scores, labels) == expected
    assert roc_auc(scores, labels) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=200))
def test_auc_matches_pair_counting(pairs):
    scores, labels = zip(*pairs)
    if len(set(labels)) < 2:
        with pytest.raises(UndefinedAUCError):
            roc_auc(scores, labels)
        return
    assert roc_auc(scores, labels) == pytest.approx(pair_count_auc(scores, labels), abs=1e-12)


def test_auc_errors():
    with pytest.raises(LengthError):
        roc_auc([0.1, 0.2], [1])
    with pytest.raises(UndefinedAUCError):
        roc_auc([0.1, 0.2], [1, 1])


# ---------------------------------------------------------------- timing

def test_avg_time():
    assert avg_time(2.0, 10**6) == pytest.approx(2e-6)
    assert avg_time(0.0, 5) == 0.0
    # full CIC-DDoS2019 run: 3.36 s over 20,364,525 edges
    assert avg_time(3.36, 20_364_525) == pytest.approx(1.65e-7, rel=1e-3)
    with pytest.raises(ParameterError):
        avg_time(1.0, 0)


# ---------------------------------------------------------------- pipeline

def test_empty_stream():
    scored, report = run_pipeline([], [], [], labels=[])
    assert len(scored) == 0
    assert report.n_edges == 0 and report.auc is None


def test_single_edge():
    scored, report = run_pipeline([5], [6], [0])
    e = scored[0]
    assert (e.a_hat, e.s_hat, e.raw, e.flag) == (1.0, 1.0, 0.0, False)
    assert 0.0 <= e.posterior <= 1.0
    assert report.n_edges == 1 and report.auc is None


def test_pipeline_equals_composed_operations(small_stream):
    u, v, t, _ = small_stream
    u, v, t = u[:3000], v[:3000], t[:3000]
    sk_p = SketchParams(d=3, w=64, W=5, gamma=0.9, seed=9)
    sc_p = ScoringParams(delta_shift=12.0)
    scored, _ = run_pipeline(u, v, t, sk_p, sc_p, DetectorParams(lam=0.7, k=2.0))
    sketch = TensorSketch(sk_p)
    det = DetectorState(lam=0.7, k=2.0)
    for i, e in enumerate(scored):
        a, s, tb = sketch.update(int(u[i]), int(v[i]), int(t[i]))
        post = posterior_anomaly(a, s, tb, sc_p)
        z, tau, flag = det.classify(post)
        assert (e.a_hat, e.s_hat) == (a, s)
        assert e.raw == raw_score(a, s, tb)
        assert e.posterior == post
        assert (e.z, e.tau, e.flag) == (z, tau, flag)


def test_raw_score_mode_feeds_detector(small_stream):
    u, v, t, labels = small_stream
    scored, report = run_pipeline(u, v, t, score_mode="raw", labels=labels)
    det = DetectorState()
    z = [det.classify(x)[0] for x in scored.raw[:500]]
    np.testing.assert_array_equal(scored.z[:500], z)
    assert report.auc == pytest.approx(roc_auc(scored.raw, labels))


def test_scored_edge_invariants(small_stream):
    u, v, t, _ = small_stream
    scored, _ = run_pipeline(u, v, t)
    assert np.all((scored.posterior >= 0) & (scored.posterior <= 1))
    assert np.all(scored.raw >= 0)
    np.testing.assert_array_equal(scored.flag, scored.z > scored.tau)


def test_chunked_equals_single_pass(small_stream):
    u, v, t, _ = small_stream
    whole = Pipeline().process(u, v, t)
    pipe = Pipeline()
    parts = [pipe.process(u[i:i + 7000], v[i:i + 7000], t[i:i + 7000]) for i in range(0, len(u), 7000)]
    joined = type(whole).concat(parts)
    for name in ("a_hat", "s_hat", "raw", "posterior", "z", "tau", "flag"):
        np.testing.assert_array_equal(getattr(whole, name), getattr(joined, name))


def test_pipeline_rejects_out_of_order():
    with pytest.raises(OrderingError):
        run_pipeline([1, 1], [2, 2], [5, 3])


def test_pipeline_rejects_bad_mode():
    with pytest.raises(ParameterError):
        Pipeline(score_mode="flags")
    with pytest.raises(ParameterError):
        DetectorParams(flag_mode="sometimes")


def test_label_length_checked():
    with pytest.raises(LengthError):
        run_pipeline([1, 2], [2, 3], [0, 0], labels=[1])


def test_score_file_format():
    scored, _ = run_pipeline([1, 1, 2], [2, 2, 3], [0, 1, 1])
    buf = io.StringIO()
    scored.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "u,v,t,a_hat,s_hat,raw,posterior,z,tau,flag"
    assert len(lines) == 4
    fields = lines[2].split(",")
    assert fields[:5] == ["1", "2", "1", "1", "2"]
    assert fields[-1] in ("0", "1")
    # 9 significant digits
    assert float(fields[6]) == pytest.approx(scored.posterior[1], rel=1e-8)


def test_default_synthetic_auc_golden(default_stream):
    u, v, t, labels = default_stream
    params = (SketchParams(d=4, w=512, W=16, gamma=0.95), ScoringParams(delta_shift=10, prior=0.05),
              DetectorParams(lam=0.8, k=3))
    _, first = run_pipeline(u, v, t, *params, labels=labels)
    _, second = run_pipeline(u, v, t, *params, labels=labels)
    # pinned on first computation
    assert first.auc == pytest.approx(0.9799635853030304, abs=1e-12)
    assert second.auc == first.auc


def test_report_params_echo():
    _, report = run_pipeline([1], [2], [0], SketchParams(d=3), ScoringParams(prior=0.1),
                             DetectorParams(k=2.5), "raw")
    assert report.params["d"] == 3 and report.params["prior"] == 0.1
    assert report.params["k"] == 2.5 and report.params["score_mode"] == "raw"
    assert report.avg_time_per_edge == report.exec_seconds / report.n_edges


def test_throughput_flat(default_stream):
    u, v, t, _ = default_stream
    pipe = Pipeline()
    pipe.process(u[:1000], v[:1000], t[:1000])  # compile
    pipe = Pipeline()
    chunk = 100_000
    times = []
    for i in range(0, len(u), chunk):
        start = time.perf_counter()
        pipe.process(u[i:i + chunk], v[i:i + chunk], t[i:i + chunk])
        times.append(time.perf_counter() - start)
    assert len(times) == 10
    assert max(times[0], times[-1]) / min(times[0], times[-1]) < 2.0


# ---------------------------------------------------------------- sweeps

def test_expand_grid():
    cells = expand_grid({"rows": [2, 4], "k": [2.0, 3.0, 4.0]})
    assert len(cells) == 6 and cells[0] == {"rows": 2, "k": 2.0}
    with pytest.raises(ParameterError):
        expand_grid({})


def test_sweep_single_cell(small_stream):
    rows = sweep({"rows": [2]}, small_stream, repeats=1)
    assert len(rows) == 1 and rows[0].error is None
    assert 0.5 < rows[0].auc_mean <= 1.0 and rows[0].auc_std == 0.0


def test_sweep_collision_free_stream_has_zero_std():
    # a single key cannot collide with anything, so hash seeds cannot matter
    t = np.repeat(np.arange(40), 3)
    t = np.concatenate([t, np.full(30, 40)])
    u = np.zeros(len(t), dtype=np.int64)
    v = np.ones(len(t), dtype=np.int64)
    labels = np.r_[np.zeros(120, np.int8), np.ones(30, np.int8)]
    rows = sweep({"cols": [64]}, (u, v, t, labels), repeats=5)
    assert rows[0].auc_std == 0.0


def test_sweep_survives_bad_cell(small_stream):
    rows = sweep({"gamma": [0.9, 1.5]}, small_stream, repeats=1)
    assert rows[0].error is None and np.isfinite(rows[0].auc_mean)
    assert rows[1].error is not None and np.isnan(rows[1].auc_mean)
    buf = io.StringIO()
    write_sweep(rows, buf)
    header = buf.getvalue().splitlines()[0]
    assert header == "gamma,auc_mean,auc_std,runtime_mean_s,avg_time_per_edge_s"


def test_sweep_parallel_matches_serial(small_stream):
    grid = {"rows": [2, 3], "cols": [128]}
    serial = sweep(grid, small_stream, repeats=2)
    parallel = sweep(grid, small_stream, repeats=2, workers=2)
    assert [r.auc_mean for r in serial] == [r.auc_mean for r in parallel]


def test_sweep_distinct_seeds_vary_auc(small_stream):
    row = sweep({"cols": [16]}, small_stream, repeats=3)[0]
    assert row.auc_std > 0
