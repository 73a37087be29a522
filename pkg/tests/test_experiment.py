import csv
import math

import numpy as np
import pytest

from sfgft import experiment as ex
from sfgft.errors import ConfigError, NumericalError
from sfgft.experiment import (
    ExperimentConfig,
    ExperimentResult,
    derive_seed,
    load_config,
    parse_config_text,
    read_raw_csv,
    replay_row,
    run_sweep,
    run_table1,
    run_verify,
    summarize,
    write_results,
)

SMALL = dict(n_sensors=60, knn_k=6, sample_sizes=(16,), n_trials=3, master_seed=5)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- config

def test_config_defaults():
    c = ExperimentConfig()
    assert (c.n_sensors, c.knn_k, c.sigma_d) == (500, 8, 0.3)
    assert c.sampling_scheme == ("random", "uniform")
    assert c.methods == ("BL_I", "BL_D", "SF_Q")
    assert c.n_trials == 100


def test_sweep_defaults():
    c = load_config(command="sweep")
    assert c.omega_list == (0.5, 1.0, 2.0, 3.0)
    assert c.sigma_list == (0.1, 0.2, 0.4)
    assert c.sample_sizes == (50, 75, 100, 125, 150)
    assert c.sampling_scheme == ("uniform",)


def test_parse_config_text_with_aliases_and_comments(tmp_path):
    text = """
    # comment line
    n-sensors = 80
    omega = 1, 2.5   # trailing comment
    sizes = 10,20
    scheme = uniform
    trials = 4
    seed = 9
    out = somewhere
    """
    path = tmp_path / "cfg.txt"
    path.write_text(text)
    c = load_config(path, n_trials=7)
    assert c.n_sensors == 80
    assert c.omega_list == (1.0, 2.5)
    assert c.sample_sizes == (10, 20)
    assert c.sampling_scheme == ("uniform",)
    assert c.n_trials == 7  # explicit override wins
    assert c.master_seed == 9 and c.output_path == "somewhere"


@pytest.mark.parametrize("text, match", [
    ("bogus = 1", "unknown key"),
    ("no equals sign", "expected 'key = value'"),
    ("n_sensors = many", "bad value"),
])
def test_parse_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


@pytest.mark.parametrize("changes", [
    dict(n_sensors=1), dict(knn_k=0), dict(knn_k=500), dict(sigma_d=0.0),
    dict(sample_sizes=(500,)), dict(sampling_scheme=("grid",)), dict(methods=("XX",)),
    dict(omega_list=(-1.0,)), dict(sigma_list=(math.nan,)), dict(n_trials=0),
    dict(field_policy="sometimes"), dict(omega_list=()),
])
def test_config_validation(changes):
    with pytest.raises(ConfigError):
        ExperimentConfig(**changes)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "absent.cfg")


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    seeds = {derive_seed(0, a, b) for a in range(20) for b in range(20)}
    assert len(seeds) == 400
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
    assert 0 <= derive_seed(2**70, -1) < 2**64


# ---------------------------------------------------------------- runs

@pytest.fixture(scope="module")
def small_table1():
    return run_table1(ExperimentConfig(**SMALL))


def test_table1_row_layout(small_table1):
    rows = small_table1.rows
    assert len(rows) == 2 * 3 * 3  # schemes x trials x methods
    assert all(r.sigma == 0.0 for r in rows)
    assert all(r.ok for r in rows), [r.diagnostic for r in rows if not r.ok]
    for r in rows:
        if r.scheme == "random":
            assert r.sample_seed is not None and r.sample_size_actual == 16
        else:
            assert r.sample_seed is None and 1 <= r.sample_size_actual <= 16


def test_table1_field_policies(small_table1):
    rows = small_table1.rows
    random_fields = {r.field_seed for r in rows if r.scheme == "random"}
    uniform_fields = {r.field_seed for r in rows if r.scheme == "uniform"}
    assert len(random_fields) == 1
    assert len(uniform_fields) == 3
    random_samples = {r.sample_seed for r in rows if r.scheme == "random"}
    assert len(random_samples) == 3


def test_table1_rerun_is_byte_identical(tmp_path, small_table1):
    again = run_table1(ExperimentConfig(**SMALL))
    a = write_results(small_table1, tmp_path / "a")
    b = write_results(again, tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_written_files_and_columns(tmp_path, small_table1):
    paths = write_results(small_table1, tmp_path)
    names = [p.name for p in paths]
    assert names[:2] == ["raw.csv", "summary.csv"]
    assert "plot_random_sigma0_omega1.csv" in names and "plot_uniform_sigma0_omega1.csv" in names
    with open(tmp_path / "raw.csv") as fh:
        assert fh.readline().strip().split(",") == ex.RAW_COLUMNS
    with open(tmp_path / "summary.csv") as fh:
        assert fh.readline().strip().split(",") == ex.SUMMARY_COLUMNS
    with open(tmp_path / "plot_uniform_sigma0_omega1.csv") as fh:
        assert fh.readline().strip().split(",") == ex.PLOT_COLUMNS


def test_summary_means_match_raw(tmp_path, small_table1):
    write_results(small_table1, tmp_path)
    raw = read_csv(tmp_path / "raw.csv")
    for s in read_csv(tmp_path / "summary.csv"):
        vals = [float(r["snr_db"]) for r in raw
                if (r["method"], r["scheme"]) == (s["method"], s["scheme"]) and r["status"] == "ok"]
        assert abs(float(s["mean_snr_db"]) - np.mean(vals)) <= 1e-12
        assert abs(float(s["std_snr_db"]) - np.std(vals, ddof=1)) <= 1e-12
        assert int(s["n_trials"]) == len(vals) and int(s["n_failed"]) == 0


def test_raw_round_trip_and_replay(tmp_path, small_table1):
    write_results(small_table1, tmp_path)
    rows = read_raw_csv(tmp_path / "raw.csv")
    assert rows == small_table1.rows
    cfg = ExperimentConfig(**SMALL)
    for row in (rows[0], rows[4], rows[-1]):
        again = replay_row(cfg, row)
        assert again.snr_db == row.snr_db
        assert again.sample_size_actual == row.sample_size_actual


def test_sf_reconstruction_quality_on_uniform_grid(small_table1):
    by = {}
    for r in small_table1.rows:
        by.setdefault((r.scheme, r.method), []).append(r.snr_db)
    assert np.mean(by[("uniform", "SF_Q")]) > 5.0


def test_empty_result_writes_headers(tmp_path):
    res = ExperimentResult("table1", ExperimentConfig(**SMALL), [])
    paths = write_results(res, tmp_path)
    assert len(paths) == 2
    assert (tmp_path / "raw.csv").read_text() == ",".join(ex.RAW_COLUMNS) + "\n"
    assert (tmp_path / "summary.csv").read_text() == ",".join(ex.SUMMARY_COLUMNS) + "\n"


def test_single_trial_summary_has_zero_std():
    res = run_table1(ExperimentConfig(**dict(SMALL, n_trials=1, sampling_scheme=("random",))))
    for s in summarize(res):
        assert s["std_snr_db"] == 0.0 and s["n_trials"] == 1


def test_write_results_reports_bad_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    res = ExperimentResult("table1", ExperimentConfig(**SMALL), [])
    with pytest.raises(OSError, match="cannot create output directory"):
        write_results(res, blocker / "sub")


def test_sweep_zero_noise_matches_noiseless_trial():
    cfg = ExperimentConfig(**dict(SMALL, sampling_scheme=("uniform",), sigma_list=(0.0, 0.2),
                                  n_trials=2))
    res = run_sweep(cfg)
    clean = [r for r in res.rows if r.sigma == 0.0]
    noisy = [r for r in res.rows if r.sigma == 0.2]
    assert len({r.field_seed for r in res.rows}) == 1
    # noiseless trials agree across noise seeds
    by_method = {}
    for r in clean:
        by_method.setdefault(r.method, set()).add(r.snr_db)
    assert all(len(v) == 1 for v in by_method.values())
    sf_clean = next(iter(by_method["SF_Q"]))
    assert all(r.snr_db < sf_clean for r in noisy if r.method == "SF_Q")
    assert len({r.noise_seed for r in noisy if r.method == "SF_Q"}) == 2


def test_failed_method_is_recorded(monkeypatch):
    def boom(gft, xs):
        raise NumericalError("synthetic failure")
    monkeypatch.setattr(ex, "interpolate_sf", boom)
    res = run_table1(ExperimentConfig(**dict(SMALL, sampling_scheme=("random",))))
    sf = [r for r in res.rows if r.method == "SF_Q"]
    assert all(r.status == "failed" and "synthetic failure" in r.diagnostic and r.snr_db is None
               for r in sf)
    assert all(r.ok for r in res.rows if r.method != "SF_Q")
    summary = {s["method"]: s for s in summarize(res)}
    assert summary["SF_Q"]["n_failed"] == 3 and summary["SF_Q"]["mean_snr_db"] is None
    assert summary["BL_I"]["n_failed"] == 0


def test_inadmissible_partition_fails_every_method(monkeypatch):
    from sfgft.graph import Admissibility
    monkeypatch.setattr(ex, "check_partition_admissible",
                        lambda lap, part: Admissibility(False, "block L_SS is singular"))
    res = run_table1(ExperimentConfig(**dict(SMALL, sampling_scheme=("random",), n_trials=1)))
    assert all(r.status == "failed" and "inadmissible partition" in r.diagnostic for r in res.rows)


def test_two_node_degenerate_config():
    cfg = ExperimentConfig(n_sensors=2, knn_k=1, sample_sizes=(1,), n_trials=3, methods=("SF_Q",),
                           omega_list=(0.0,))
    res = run_table1(cfg)
    assert len(res.rows) == 6
    # omega = 0 gives a constant signal, reproduced exactly
    assert all(r.ok and r.snr_db == 300.0 for r in res.rows)


def test_progress_callback_counts_trials():
    calls = []
    run_table1(ExperimentConfig(**dict(SMALL, n_trials=2)), progress=lambda *a: calls.append(a))
    assert len(calls) == 4


# ---------------------------------------------------------------- verify

def test_verify_passes_on_small_run():
    report = run_verify(ExperimentConfig(verify_instances=8))
    assert report.ok, [c.line() for c in report.failures]
    assert {c.name for c in report.checks} >= {
        "parseval", "folding", "sample_gram", "energy_split", "perfect_reconstruction",
        "sample_consistency", "oracle"}
    assert {c.instance for c in report.checks} == set(range(8))


def test_verify_fault_injection_names_pair():
    report = run_verify(ExperimentConfig(verify_instances=3), fault="eigenvalue")
    fails = report.failures
    assert fails and all(c.name == "folding" for c in fails)
    assert all("pair" in c.detail for c in fails)
    assert fails[0].line().startswith("FAIL folding instance=")


def test_random_instance_reproducible():
    g1, p1 = ex.random_instance(123)
    g2, p2 = ex.random_instance(123)
    assert np.array_equal(g1.weights, g2.weights)
    assert np.array_equal(p1.sample_set, p2.sample_set)
    g, p = ex.random_instance(1, n=2)
    assert g.n == 2 and p.size == 1
