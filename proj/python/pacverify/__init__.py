"""PAC-model robustness verification for black-box classifiers."""

import json as _json

from ._pacverify import (
    DimensionError,
    Error,
    ModelFormatError,
    OracleError,
    ParameterError,
    SolverError,
    Model,
    achieved_epsilon,
    baseline_sample_count,
    max_key_features,
    maximize_affine_on_ball,
    required_samples_full,
    required_samples_margin,
    run_cli,
    solve_chebyshev_lp,
    _verify_json,
)


def verify(model_path, center, radius, **options):
    """Learn a PAC model on the ball and return the report as a dict."""
    return _json.loads(_verify_json(model_path, list(map(float, center)), float(radius), options))


__all__ = [
    "DimensionError",
    "Error",
    "ModelFormatError",
    "OracleError",
    "ParameterError",
    "SolverError",
    "Model",
    "achieved_epsilon",
    "baseline_sample_count",
    "max_key_features",
    "maximize_affine_on_ball",
    "required_samples_full",
    "required_samples_margin",
    "run_cli",
    "solve_chebyshev_lp",
    "verify",
]
