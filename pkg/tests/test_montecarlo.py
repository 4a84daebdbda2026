import math

import numpy as np
import pytest
from scipy import stats

from lamp import rng
from lamp.kernels import BoxcarKernel, ExponentialKernel
from lamp.montecarlo import (
    FIGURES,
    ExperimentConfig,
    calibrate_threshold,
    estimate_power,
    estimate_size,
    figure_config,
    limit_curve,
    null_statistics,
    order_statistic_index,
    power_csv,
    replicate_values,
    run_experiment,
    worker_count,
)
from lamp.testing import limiting_power_nonparam, limiting_power_param

SMALL = ExperimentConfig(horizons=(50.0, 100.0), replicates=400, grid=(0.0, 1.0, 2.0))


def test_split_streams_are_distinct_and_reproducible():
    a = np.random.Generator(rng.split(1, 0)).random(4)
    b = np.random.Generator(rng.split(1, 0)).random(4)
    c = np.random.Generator(rng.split(1, 1)).random(4)
    d = np.random.Generator(rng.split(2, 0)).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    with pytest.raises(ValueError):
        rng.split(-1, 0)


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_replicate_values_independent_of_threads(threads):
    def fn(bg):
        return float(np.random.Generator(bg).random())

    serial = replicate_values(fn, 1000, 7, threads=1)
    assert np.array_equal(serial, replicate_values(fn, 1000, 7, threads=threads))


def test_worker_count(monkeypatch):
    monkeypatch.setenv("LAMP_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("LAMP_THREADS", "0")
    assert worker_count() == 1
    monkeypatch.setenv("LAMP_THREADS", "many")
    with pytest.raises(ValueError):
        worker_count()


def test_power_at_zero_equals_size():
    size = estimate_size(SMALL)
    power = estimate_power(SMALL)
    for row, curve in zip(size.rows, power):
        zero = curve.rows[0]
        assert zero.grid_value == 0.0
        assert zero.frequency == row.frequency and zero.se == row.se


def test_single_replicate_is_degenerate():
    res = estimate_size(SMALL.replace(replicates=1))
    for row in res.rows:
        assert row.frequency in (0.0, 1.0) and row.se == 0.0 and row.m_effective == 1


def test_standard_error_is_binomial():
    res = estimate_size(SMALL)
    for row in res.rows:
        p = row.frequency
        assert row.se == pytest.approx(math.sqrt(p * (1 - p) / 400), rel=1e-15)


def test_unstable_points_are_flagged():
    cfg = ExperimentConfig(family="nonparam", horizons=(4.0,), replicates=50, grid=(0.0, 1.0, 2.0, 3.0), N=5.0)
    rows = estimate_power(cfg)[0].rows
    assert [r.valid for r in rows] == [True, True, False, False]
    assert math.isnan(rows[2].frequency) and rows[2].m_effective == 0
    assert ",false," in power_csv(cfg, estimate_power(cfg))


def test_limit_curve_families():
    assert limit_curve(SMALL) == [limiting_power_param(u, 1.25, 0.05) for u in SMALL.grid]
    npc = SMALL.replace(family="nonparam")
    assert limit_curve(npc) == [limiting_power_nonparam(r, 1.0, 0.05) for r in npc.grid]
    dep = SMALL.replace(family="dep", s_star=2.0, s_y=1.0, kernel=BoxcarKernel(1.0, 5.0))
    assert limit_curve(dep)[1] == pytest.approx(0.6746, abs=1e-4)


def test_power_monotone_within_two_se():
    cfg = ExperimentConfig(horizons=(300.0,), replicates=2000, grid=(0.0, 0.5, 1.0, 1.5, 2.0, 3.0))
    rows = estimate_power(cfg)[0].rows
    for a, b in zip(rows, rows[1:]):
        assert b.frequency >= a.frequency - 2 * math.hypot(a.se, b.se)


def test_dep_family_runs_and_is_sized():
    cfg = ExperimentConfig(family="dep", horizons=(200.0,), replicates=2000, grid=(0.0, 2.0))
    rows = estimate_power(cfg)[0].rows
    assert abs(rows[0].frequency - 0.05) < 4 * math.sqrt(0.05 * 0.95 / 2000) + 0.02
    assert rows[1].frequency > rows[0].frequency


def test_exact_threshold_size_is_conservative():
    cfg = ExperimentConfig(family="nonparam", horizons=(10.0, 100.0), replicates=20_000, exact_threshold=True)
    for row in estimate_size(cfg).rows:
        # exact sizes are 0.0487 and 0.0428
        assert row.frequency <= 0.05 + 3 * row.se


def test_order_statistic_index():
    assert order_statistic_index(0.05, 100) == 94
    assert order_statistic_index(0.05, 100_000) == 94_999
    assert order_statistic_index(0.5, 4) == 1
    assert order_statistic_index(0.999, 10) == 0


def test_calibrate_threshold_quantiles():
    cfg = ExperimentConfig(horizons=(100.0,), replicates=1000, eps_grid=(0.001, 0.05, 0.5))
    table = calibrate_threshold(cfg)
    z = table.z_emp[100.0]
    assert z[0] > z[1] > z[2]
    assert table.low_m == [True, False, False]
    assert table.z_gauss[1] == pytest.approx(1.6449, abs=1e-4)


@pytest.mark.xfail(
    strict=True,
    reason="the null statistic is right-skewed (skewness about 7.5/sqrt(T)), so at T=1000 "
    "its median sits near -skew/6 = -0.04, outside +-0.02",
)
def test_median_of_null_statistic_near_zero():
    cfg = ExperimentConfig(horizons=(1000.0,), replicates=40_000, eps_grid=(0.5,))
    assert abs(calibrate_threshold(cfg).z_emp[1000.0][0]) < 0.02


def test_null_median_shift_matches_skewness():
    medians = []
    for horizon in (100.0, 1000.0):
        x = null_statistics(ExperimentConfig(horizons=(horizon,), replicates=40_000), horizon)
        med = float(np.median(x))
        skew = float(stats.skew(x))
        # Cornish-Fisher: median = -skew / 6 + O(1/T); median SE about 1.25 / sqrt(M)
        assert abs(med + skew / 6) < 4 * 1.2533 / math.sqrt(x.size) + 0.01
        medians.append(abs(med))
    assert medians[1] < medians[0]


@pytest.mark.xfail(
    strict=True,
    reason="finite-T excess power of about +0.03 at T=1000 (see the acceptance notes); "
    "the +-0.02 band around the limit is not met",
)
def test_power_at_u2_close_to_limit():
    cfg = ExperimentConfig(horizons=(1000.0,), replicates=10_000, grid=(2.0,))
    row = estimate_power(cfg)[0].rows[0]
    assert abs(row.frequency - 0.7228) < 0.02


def test_size_at_t1000_above_nominal():
    # finite-T thresholds exceed z_0.05, so the asymptotic test over-rejects slightly
    cfg = ExperimentConfig(horizons=(1000.0,), replicates=100_000)
    alpha = estimate_size(cfg).rows[0].frequency
    assert abs(alpha - 0.055) < 0.004


def test_config_round_trip_and_validation():
    cfg = ExperimentConfig(family="nonparam", kernel=BoxcarKernel(1.0, 5.0), exact_threshold=True)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.replace(replicates=5).digest() != cfg.digest()
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"replicate": 5})
    bad = [
        dict(family="other"), dict(replicates=0), dict(horizons=()), dict(horizons=(100.0, 10.0)),
        dict(eps=1.5), dict(grid=(-1.0,)), dict(master_seed=-3), dict(method="euler"),
    ]
    for kwargs in bad:
        with pytest.raises(ValueError):
            ExperimentConfig(**kwargs)


def test_run_experiment_errors(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope"):
        run_experiment(SMALL, "size", tmp_path / "nope")
    with pytest.raises(ValueError):
        run_experiment(SMALL, "banana", tmp_path)


def test_csv_schemas(tmp_path):
    _, path = run_experiment(SMALL, "size", tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# {") and lines[1] == "T,alpha,se"
    _, path = run_experiment(SMALL, "power", tmp_path)
    header = path.read_text().splitlines()[1].split(",")
    assert header[:5] == ["u", "beta_T50", "beta_T100", "beta_limit", "valid"]
    _, path = run_experiment(SMALL.replace(eps_grid=(0.05, 0.1)), "threshold", tmp_path)
    assert path.read_text().splitlines()[1] == "eps,z_emp_T50,z_emp_T100,z_gauss,low_m"


def test_rerun_is_byte_identical(tmp_path, monkeypatch):
    texts = []
    for threads in ("1", "4"):
        monkeypatch.setenv("LAMP_THREADS", threads)
        out = tmp_path / threads
        out.mkdir()
        texts.append(run_experiment(SMALL, "power", out)[1].read_bytes())
    assert texts[0] == texts[1]


def test_figure_presets():
    assert set(FIGURES) == {f"fig{k}" for k in range(1, 7)}
    kind, cfg = figure_config("fig2")
    assert kind == "power" and cfg.horizons == (100.0, 300.0, 1000.0)
    assert cfg.kernel == ExponentialKernel(0.5, 0.5) and cfg.s_star == 1.0 and cfg.replicates == 10_000
    kind, cfg = figure_config("fig6", "paper")
    assert kind == "power" and cfg.family == "nonparam" and cfg.N == 50.0 and cfg.replicates == 1_000_000
    assert figure_config("fig5")[1].N == 5.0
    assert figure_config("fig3")[1].replicates == 100_000
    assert figure_config("fig1")[1].horizons[-1] == 1000.0
    with pytest.raises(ValueError, match="fig1"):
        figure_config("fig9")
    with pytest.raises(ValueError):
        figure_config("fig1", "huge")
