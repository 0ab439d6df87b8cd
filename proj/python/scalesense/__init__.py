"""Metric scale estimation for monocular SLAM maps from object detections."""

from ._core import (
    CameraIntrinsics,
    CameraPose,
    DetectionBox,
    FeatureEstimate,
    GridSpacing,
    HeightObservation,
    PixelRect,
    PriorRegistry,
    RunConfig,
    ScaleGrid,
    ScaleSenseError,
    VerticalDirection,
    back_project,
    dimensionless_height,
    estimate,
    estimate_feed,
    evaluate,
    height_sigma,
    load_priors,
    load_priors_file,
    load_run_config,
    make_observation,
    map_estimate,
    observation_likelihood,
    parse_run_config,
    posterior_stats,
    project,
    run_config_schema,
    simulate,
    vertical_vanishing_point,
)


def run_all(config_path, seed=None):
    """Simulate, estimate and evaluate one configuration file."""
    config = load_run_config(config_path)
    if seed is not None:
        config.seed = seed
    sim = simulate(config)
    est = estimate(config, sim, load_priors_file(config.priors))
    return sim, est, evaluate(est, sim, config.burn_in_fraction)


__all__ = [name for name in dir() if not name.startswith("_")]
