import io
import math

import numpy as np
import pytest
from scipy import stats

from crcure import (
    CalibrationFailedError,
    ScenarioConfig,
    calibrate_censoring,
    generate_dataset,
    latent_time,
    parse_scenario_file,
    run_monte_carlo,
    write_mc_csv,
)
from crcure.simulate import _draw_sample, parse_model_name


def test_latent_time_closed_forms():
    assert latent_time(0, 0.5, 0.0, 1.0) == pytest.approx(math.log(2.0), abs=1e-12)
    assert latent_time(1, 0.5, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert latent_time(0, 0.5, 1.0, 1.0) == pytest.approx(math.log(2.0) * math.exp(-1.0), abs=1e-12)


def test_generate_dataset_structure_and_determinism():
    cfg = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=200, censor_target=0.2, seed=11)
    ds1 = generate_dataset(cfg, 1.6)
    ds2 = generate_dataset(cfg, 1.6)
    assert np.array_equal(ds1.times, ds2.times)
    assert np.array_equal(ds1.cause, ds2.cause)
    assert set(np.unique(ds1.cause)).issubset({0, 1, 2})
    assert np.all(np.isfinite(ds1.times))
    assert np.array_equal(ds1.status == 0, ds1.cause == 0)
    assert set(np.unique(ds1.covariates)).issubset({0.0, 1.0})


def test_cause_symmetry_under_equal_betas():
    cfg = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=20000, censor_target=0.2, seed=99)
    time, delta, cause, z = _draw_sample(cfg, 1.67, np.random.default_rng(3))
    n1 = int(np.sum(cause == 1))
    n2 = int(np.sum(cause == 2))
    assert stats.chisquare([n1, n2]).pvalue > 0.001


def test_cured_subjects_are_always_censored():
    cfg = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=5000, censor_target=0.5, cure_mass=0.3, seed=1)
    ds = generate_dataset(cfg, 2.0)
    assert np.mean(ds.status == 0) > 0.3  # cure mass is a floor on censoring
    assert np.all(np.isfinite(ds.times))


def test_calibration_hits_target_on_fresh_sample():
    cfg = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=500, censor_target=0.2, seed=123)
    c = calibrate_censoring(cfg)
    fresh = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=200000, censor_target=0.2, seed=321)
    _, delta, _, _ = _draw_sample(fresh, c, np.random.default_rng(77))
    achieved = 1.0 - float(delta.mean())
    assert 0.195 <= achieved <= 0.205


def test_larger_bound_censors_less():
    cfg = ScenarioConfig(model=1, true_betas=(1.0, 2.0), n=100000, censor_target=0.3, seed=5)
    rng_a = np.random.default_rng(8)
    rng_b = np.random.default_rng(8)
    _, delta_a, _, _ = _draw_sample(cfg, 1.0, rng_a)
    _, delta_b, _, _ = _draw_sample(cfg, 2.0, rng_b)
    assert (1.0 - delta_b.mean()) < (1.0 - delta_a.mean())


def test_calibration_boundary_policies():
    with pytest.raises(CalibrationFailedError):
        calibrate_censoring(ScenarioConfig(model=0, n=100, censor_target=0.005, seed=0))
    # Cure mass is a floor on the attainable censoring rate.
    with pytest.raises(CalibrationFailedError):
        calibrate_censoring(ScenarioConfig(model=0, n=100, censor_target=0.2, cure_mass=0.5, seed=0))


def test_scenario_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(model=2)
    with pytest.raises(ValueError):
        ScenarioConfig(model=0, n=5)
    with pytest.raises(ValueError):
        ScenarioConfig(model=0, censor_target=1.0)
    with pytest.raises(ValueError):
        ScenarioConfig(model=0, replications=0)
    with pytest.raises(ValueError):
        ScenarioConfig(model=0, true_betas=(1.0,))


def test_run_monte_carlo_smoke_and_determinism():
    cfg = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=120, censor_target=0.2, replications=20, seed=42)
    a = run_monte_carlo(cfg)
    b = run_monte_carlo(cfg)
    assert a.bias == b.bias and a.mse == b.mse and a.censoring_achieved == b.censoring_achieved
    assert a.failures == 0
    for i in range(2):
        assert a.mse[i] >= a.bias[i] ** 2
    assert 0.1 <= a.censoring_achieved <= 0.3


def test_run_monte_carlo_workers_equivalence():
    cfg = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=100, censor_target=0.2, replications=12, seed=7)
    serial = run_monte_carlo(cfg, workers=1)
    threaded = run_monte_carlo(cfg, workers=4)
    assert serial.bias == threaded.bias
    assert serial.mse == threaded.mse


def test_run_monte_carlo_po_smoke():
    cfg = ScenarioConfig(model=1, true_betas=(1.0, 1.0), n=120, censor_target=0.2, replications=10, seed=13)
    summary = run_monte_carlo(cfg)
    assert summary.failures == 0
    assert all(b < 0.6 for b in summary.bias)


def test_mc_csv_format():
    cfg = ScenarioConfig(model=0, true_betas=(1.0, 1.0), n=120, censor_target=0.2, replications=5, seed=21)
    summary = run_monte_carlo(cfg)
    buf = io.StringIO()
    write_mc_csv([summary], buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "scenario,coef,bias,mse,censoring_achieved,failures"
    assert len(lines) == 3
    assert lines[1].startswith(f"{summary.scenario},beta1,")


def test_scenario_file_round_trip(tmp_path):
    path = tmp_path / "scenario.txt"
    path.write_text(
        "# comment\n"
        "model = po\n"
        "true_betas = 1, 2\n"
        "n = 250\n"
        "censor_target = 0.4\n"
        "replications = 3\n"
        "seed = 17\n"
    )
    cfg = parse_scenario_file(path)
    assert cfg.model == 1
    assert cfg.true_betas == (1.0, 2.0)
    assert cfg.n == 250
    assert cfg.censor_target == 0.4
    assert cfg.replications == 3
    assert cfg.seed == 17


def test_scenario_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("model = ph\nwindow = 3\n")
    with pytest.raises(ValueError, match="unknown scenario key"):
        parse_scenario_file(bad)
    missing = tmp_path / "missing.txt"
    missing.write_text("n = 100\n")
    with pytest.raises(ValueError, match="must set 'model'"):
        parse_scenario_file(missing)


def test_parse_model_name():
    assert parse_model_name("ph") == 0
    assert parse_model_name("PO") == 1
    assert parse_model_name("0") == 0
    with pytest.raises(ValueError):
        parse_model_name("weibull")
