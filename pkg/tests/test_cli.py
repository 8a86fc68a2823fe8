import pytest

from edgesketch.cli import dispatch
from edgesketch.stream_io import SyntheticConfig, generate_synthetic, write_edges, write_labels

SMALL = ["--n_nodes", "100", "--n_edges", "20000", "--n_bins", "50", "--burst_count", "4",
         "--burst_size", "200"]


@pytest.fixture
def stream_files(tmp_path):
    u, v, t, labels = generate_synthetic(SyntheticConfig(n_nodes=100, n_edges=20_000, n_bins=50,
                                                         burst_count=4, burst_size=200))
    e, lab = tmp_path / "edges.csv", tmp_path / "labels.csv"
    write_edges(e, u, v, t)
    write_labels(lab, labels)
    return e, lab


def report(text):
    return dict(line.lstrip("# ").split("=", 1) for line in text.splitlines() if "=" in line)


def test_run_writes_scores_and_auc(stream_files, tmp_path, capsys):
    e, lab = stream_files
    out = tmp_path / "scores.csv"
    assert dispatch(["run", "--edges", str(e), "--labels", str(lab), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "u,v,t,a_hat,s_hat,raw,posterior,z,tau,flag"
    assert len(lines) == 20_001
    rep = report(capsys.readouterr().out)
    assert 0.5 < float(rep["auc"]) <= 1.0
    assert int(rep["n_edges"]) == 20_000
    assert float(rep["avg_time_per_edge"]) > 0


def test_run_to_stdout_prefixes_report(stream_files, capsys):
    e, _ = stream_files
    assert dispatch(["run", "--edges", str(e)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("u,v,t")
    assert all(line.startswith("# ") for line in out[20_001:])


def test_run_echoes_parameters(stream_files, capsys):
    e, _ = stream_files
    assert dispatch(["run", "--edges", str(e), "--out", "/dev/null", "--rows", "3", "--gamma",
                     "0.9", "--lambda", "0.5", "--score-mode", "raw"]) == 0
    rep = report(capsys.readouterr().out)
    assert rep["rows"] == "3" and rep["gamma"] == "0.9" and rep["lambda"] == "0.5"
    assert rep["score_mode"] == "raw" and rep["cols"] == "512"


def test_bad_gamma_is_usage_error(stream_files, capsys):
    e, _ = stream_files
    assert dispatch(["run", "--edges", str(e), "--gamma", "1.5"]) == 1
    assert "--gamma" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["run", "--bogus", "1"], ["run", "--rows", "two"], ["explode"],
                                  ["run"], ["run", "--edges", "x", "--format", "tab"]])
def test_usage_errors(argv, capsys):
    assert dispatch(argv) == 1
    assert "error" in capsys.readouterr().err


def test_missing_file_is_data_error(tmp_path, capsys):
    assert dispatch(["run", "--edges", str(tmp_path / "nope.csv")]) == 2
    assert "data error" in capsys.readouterr().err


def test_malformed_file_is_data_error(tmp_path, capsys):
    e = tmp_path / "e.csv"
    e.write_text("1,2,3\n1,2\n")
    assert dispatch(["run", "--edges", str(e)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_label_mismatch_is_data_error(stream_files, tmp_path):
    e, _ = stream_files
    lab = tmp_path / "short.csv"
    lab.write_text("0\n1\n")
    assert dispatch(["run", "--edges", str(e), "--labels", str(lab)]) == 2


def test_config_file_and_override(stream_files, tmp_path, capsys):
    e, _ = stream_files
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# comment\nedges = {e}\nrows=2\ngamma = 0.8  # inline\n")
    assert dispatch(["run", "--config", str(cfg), "--out", "/dev/null", "--rows", "5"]) == 0
    rep = report(capsys.readouterr().out)
    assert rep["rows"] == "5" and rep["gamma"] == "0.8"


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    assert dispatch(["run", "--config", str(cfg)]) == 1


def test_synth_then_run(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert dispatch(["synth", "--out", str(out), *SMALL]) == 0
    assert (tmp_path / "s.labels").exists() and (tmp_path / "s.csv.meta").exists()
    capsys.readouterr()
    assert dispatch(["run", "--edges", str(out), "--labels", str(tmp_path / "s.labels"),
                     "--out", str(tmp_path / "scores.csv")]) == 0
    assert float(report(capsys.readouterr().out)["auc"]) > 0.5


def test_synth_requires_out():
    assert dispatch(["synth"]) == 1


def test_synth_infeasible_is_usage_error(tmp_path):
    assert dispatch(["synth", "--out", str(tmp_path / "x.csv"), "--n_edges", "100"]) == 1


def test_run_is_deterministic(stream_files, tmp_path):
    e, lab = stream_files
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert dispatch(["run", "--edges", str(e), "--labels", str(lab), "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bench(stream_files, tmp_path):
    e, _ = stream_files
    out = tmp_path / "bench.csv"
    assert dispatch(["bench", "--edges", str(e), "--out", str(out), "--repeats", "1"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n_edges,exec_seconds,avg_time_per_edge_s"
    sizes = [int(x.split(",")[0]) for x in lines[1:] if not x.startswith("#")]
    assert sizes == sorted(sizes) and sizes[-1] == 20_000
    assert lines[-1].startswith("# linear fit")


def test_sweep(stream_files, tmp_path):
    e, lab = stream_files
    grid = tmp_path / "grid.txt"
    grid.write_text("rows=2,4\nk=2.0,3.0\n")
    out = tmp_path / "sweep.csv"
    assert dispatch(["sweep", "--edges", str(e), "--labels", str(lab), "--grid", str(grid),
                     "--repeats", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    header = lines[0].split(",")
    assert header[-4:] == ["auc_mean", "auc_std", "runtime_mean_s", "avg_time_per_edge_s"]
    assert "rows" in header and "k" in header
    assert len(lines) == 5
    col = header.index("auc_mean")
    assert all(0.0 <= float(x.split(",")[col]) <= 1.0 for x in lines[1:])


def test_sweep_requires_grid(stream_files):
    e, _ = stream_files
    assert dispatch(["sweep", "--edges", str(e)]) == 1


def test_sweep_bad_grid_value_reported_not_fatal(stream_files, tmp_path):
    e, lab = stream_files
    grid = tmp_path / "grid.txt"
    grid.write_text("gamma=0.9,1.5\n")
    out = tmp_path / "sweep.csv"
    assert dispatch(["sweep", "--edges", str(e), "--labels", str(lab), "--grid", str(grid),
                     "--repeats", "1", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == 2 and "nan" in rows[1].lower() and "nan" not in rows[0].lower()


def test_constant_threshold_flag(stream_files, tmp_path, capsys):
    e, _ = stream_files
    out = tmp_path / "scores.csv"
    assert dispatch(["run", "--edges", str(e), "--out", str(out), "--alpha", "0.5"]) == 0
    assert report(capsys.readouterr().out)["alpha"] == "0.5"
    rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
    assert {r[8] for r in rows} == {"0.5"}
    assert all((r[9] == "1") == (float(r[7]) > 0.5) for r in rows)
