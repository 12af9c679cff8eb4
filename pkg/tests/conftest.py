"""Shared fixtures: a seeded generator, representative parameters and light settings."""

import numpy as np
import pytest

from carnot47.config import CarnotSettings
from carnot47.extremals import GeodesicParams, normalize


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


@pytest.fixture
def offcn_params():
    return normalize(GeodesicParams([0.8, -0.3, 0.5, 0.2], [0.9, 0.4, -0.3]))


@pytest.fixture
def incn_params():
    return normalize(GeodesicParams([0.6, 0.8, 0.0, 0.0], [0.0, 0.6, 0.8]))


@pytest.fixture
def line_params():
    return GeodesicParams([0.5, 0.5, 0.5, 0.5], [0.0, 0.0, 0.0])


@pytest.fixture
def small_settings():
    return CarnotSettings.model_validate({
        "verify": {"draws": 5, "round_trips": 2, "equivariance_draws": 2,
                   "discriminant_points": 20000, "oracle_t_max": 2.0},
        "tau_grid": {"tau_max": 20.0, "step": 1e-3},
    })
