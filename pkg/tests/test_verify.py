"""Property suite: cheap checks pass, the injected fault is caught."""

import pytest

from carnot47.config import CarnotSettings
from carnot47.errors import PreconditionError
from carnot47.verify import CHECKS, run_checks

CHEAP = ["oracle", "hamiltonian", "discriminant", "f_positive", "f_local_bound",
         "f_global_bound", "f_derivative", "f_derivative_difference", "determinant_cross",
         "offcn_never_collinear", "incn_cut_time", "maxwell", "incn_planar", "heisenberg_frame",
         "sphere_profile", "lines_on_sphere", "jacobian", "brackets",
         "equivariant_geodesics", "invariants_under_rotation"]


def test_every_cheap_name_is_a_check():
    names = {c.__name__[len("check_"):] for c in CHECKS}
    assert set(CHEAP) <= names


def test_cheap_checks_pass(small_settings):
    results = run_checks(small_settings, only=CHEAP)
    assert len(results) == len(CHEAP)
    failed = [(r.check, r.min_value) for r in results if not r.passed]
    assert not failed


def test_round_trip_checks_pass(small_settings):
    results = run_checks(small_settings, only=["round_trip", "equivariance"])
    assert all(r.passed for r in results), [(r.check, r.min_value) for r in results]


def test_round_trips_pass_at_default_size():
    settings = CarnotSettings()
    assert settings.verify.round_trips == 200
    results = run_checks(settings, only=["round_trip", "equivariance"])
    assert [r.check for r in results] == ["connect_round_trip", "connect_equivariance"]
    assert all(r.passed for r in results), [(r.check, r.min_value) for r in results]


def test_injected_fault_is_detected(small_settings):
    results = run_checks(small_settings, fault="d11-sign", only=["offcn_never_collinear", "determinant_cross"])
    assert not any(r.passed for r in results)


def test_unknown_fault_rejected(small_settings):
    with pytest.raises(PreconditionError):
        run_checks(small_settings, fault="nonsense")


def test_report_serializes_pass_alias(small_settings):
    result = run_checks(small_settings, only=["incn_cut_time"])[0]
    data = result.model_dump(by_alias=True)
    assert data["pass"] is True
    assert data["check"] == "cut_time_and_vertical_endpoint"
