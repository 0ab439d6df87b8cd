import math
import os
import pathlib

import numpy as np
import pytest

import scalesense as ss

CONFIGS = pathlib.Path(os.environ.get("SCALESENSE_CONFIG_DIR", pathlib.Path(__file__).resolve().parents[2] / "configs"))

BOTTLE = '{"classes":[{"id":0,"bins":[{"height_m":0.3,"prob":1}]}]}'


def small_config(preset, frames, seed=3):
    doc = (
        f'{{"seed": {seed}, "scene": {{"preset": "{preset}", "trajectory": {{"frames": {frames}}}}},'
        f' "noise": {{"preset": "{preset}"}}}}'
    )
    return ss.parse_run_config(doc)


def test_projection_round_trip():
    K = ss.CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
    pose = ss.CameraPose()
    u, v = ss.project(np.array([0.1, -0.2, 2.0]), pose, K)
    origin, direction = ss.back_project(u, v, pose, K)
    p = origin + direction * (2.0 / direction[2])
    assert np.allclose(p, [0.1, -0.2, 2.0], atol=1e-12)


def test_dimensionless_height_and_sigma():
    top, bottom = np.array([0.0, 0.0, 0.4]), np.array([0.0, 0.0, 0.1])
    assert ss.dimensionless_height(top, bottom) == pytest.approx(0.3)
    sigma = ss.height_sigma(top, bottom, np.eye(3) * 1e-4)
    assert sigma == pytest.approx(math.sqrt(2e-4))


def test_delta_prior_posterior_peaks_at_truth():
    priors = ss.load_priors(BOTTLE)
    grid = ss.ScaleGrid.uniform(0.05, 20.0, 4096)
    obs = ss.HeightObservation(0.15, 0.02)
    grid.apply_likelihood(ss.observation_likelihood(obs, priors, grid))
    masses = np.asarray(grid.masses())
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert ss.map_estimate(grid) == pytest.approx(2.0, rel=2e-3)


def test_errors_carry_a_code():
    with pytest.raises(ss.ScaleSenseError) as info:
        ss.load_priors('{"classes":[{"id":0,"bins":[{"height_m":0.3,"prob":-1}]}]}')
    assert info.value.code
    with pytest.raises(ss.ScaleSenseError):
        ss.ScaleGrid.uniform(2.0, 1.0, 16)


def test_noiseless_pipeline_recovers_scale():
    config = small_config("noiseless", 300)
    sim = ss.simulate(config)
    est = ss.estimate(config, sim, ss.load_priors(BOTTLE))
    assert est.update_count >= 50
    assert est.final["map_d"] == pytest.approx(2.0, rel=2e-3)
    ev = ss.evaluate(est, sim, config.burn_in_fraction)
    assert ev.converged_at == 1
    assert np.allclose(ev.baseline_errors, 50.0)


def test_feed_and_in_memory_estimates_agree():
    config = small_config("exp1", 120)
    sim = ss.simulate(config)
    priors = ss.load_priors(BOTTLE)
    a = ss.estimate(config, sim, priors)
    b = ss.estimate_feed(config, sim.frame_feed(), priors)
    assert a.posterior_csv() == b.posterior_csv()
    assert a.posterior_csv().startswith("update,")


@pytest.mark.skipif(not (CONFIGS / "exp1.json").exists(), reason="configs not available")
def test_run_all_on_shipped_config():
    sim, est, ev = ss.run_all(CONFIGS / "exp1.json", seed=2)
    assert sim.frame_count > 0
    assert ev.report["median_rel"] < 5.0
