"""Collinearity determinant, cut times and the Heisenberg reduction."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from carnot47.errors import DegenerateParams, LineBranch, PreconditionError
from carnot47.extremals import GeodesicParams, geodesic_points, normalize
from carnot47.group_core import GroupPoint
from carnot47.optimality import (SERIES_CUTOFF, GeodesicTag, classify, collinearity_det,
                                 collinearity_det_direct, cut_endpoint, cut_time,
                                 det_coeffs, discriminant, f_and_bounds, f_derivative,
                                 f_value, heisenberg_frame, heisenberg_geodesic,
                                 heisenberg_project, in_cn_params, maxwell_family,
                                 tau_grid, tau_minus_sin)
from carnot47.symmetry import CanonicalParams, Rotation, in_cn


def test_collinearity_det_at_pi():
    cp = CanonicalParams(1.0, 0.0, 1.0, 1.0 / math.sqrt(2.0))
    assert float(collinearity_det(math.pi, cp)) == pytest.approx(-0.5 * math.pi ** 2, rel=1e-12)


def test_quadratic_form_matches_representative(rng):
    taus = np.concatenate((np.linspace(0.05, 1.99, 40), np.linspace(2.01, 30.0, 200)))
    for _ in range(5):
        C1, C2, c3 = rng.normal(size=3)
        cp = CanonicalParams(C1, C2, abs(c3), 1.0)
        direct = collinearity_det_direct(taus, cp)
        assert_allclose(collinearity_det(taus, cp), direct, rtol=1e-9, atol=1e-12)


def test_discriminant_identity():
    taus = np.linspace(0.1, 40.0, 500)
    d11, d12, d22 = det_coeffs(taus)
    assert_allclose(discriminant(taus), 4.0 * (d12 ** 2 - d11 * d22), rtol=1e-9, atol=1e-12)


def test_discriminant_negative_on_long_grid():
    taus = tau_grid(100.0, 1e-3)
    assert np.all(discriminant(taus) < 0.0)
    assert np.all(f_value(taus) > 0.0)


def test_series_near_zero():
    assert float(tau_minus_sin(1e-4)) == pytest.approx(1e-12 / 6.0, rel=1e-12)
    assert float(f_value(1e-3)) == pytest.approx(1e-18 / 360.0, rel=1e-6)
    d11, _, d22 = det_coeffs(1e-3)
    assert float(d11) < 0.0 and float(d22) < 0.0


def test_series_agree_with_closed_form_at_cutoff():
    below = SERIES_CUTOFF - 1e-12
    above = SERIES_CUTOFF + 1e-12
    for fn in (tau_minus_sin, f_value, f_derivative):
        assert float(fn(below)) == pytest.approx(float(fn(above)), abs=1e-10)
    for lo, hi in zip(det_coeffs(below), det_coeffs(above)):
        assert float(lo) == pytest.approx(float(hi), abs=1e-10)


def test_f_bounds():
    taus = np.linspace(0.01, 3.5, 400)
    f, local, _ = f_and_bounds(taus)
    assert np.all(f > local)
    taus = np.linspace(3.4, 80.0, 400)
    f, _, quadratic = f_and_bounds(taus)
    assert np.all(f > quadratic)
    with pytest.raises(PreconditionError):
        f_and_bounds(0.0)


def test_f_derivative_positive_and_consistent():
    taus = np.linspace(0.5, 30.0, 300)
    h = 1e-6
    fd = (f_value(taus + h) - f_value(taus - h)) / (2 * h)
    assert_allclose(f_derivative(taus), fd, rtol=1e-6, atol=1e-8)
    assert np.all(f_derivative(tau_grid(30.0, 1e-2)) > 0.0)


def test_tau_grid_excludes_zero():
    grid = tau_grid(1.0, 0.25)
    assert_allclose(grid, [0.25, 0.5, 0.75, 1.0])
    with pytest.raises(PreconditionError):
        tau_grid(0.0)


def test_cut_time_and_vertical_endpoint():
    cp = CanonicalParams(1.0, 0.0, 0.0, 1.0)
    assert cut_time(cp) == pytest.approx(2.0 * math.pi)
    assert_allclose(cut_endpoint(cp).as_array(), [0.0, 0.0, 0.0, 0.0, math.pi, 0.0, 0.0], atol=1e-14)
    with pytest.raises(PreconditionError):
        cut_time(CanonicalParams(1.0, 0.0, 0.3, 1.0))


def test_maxwell_family_meets_at_one_point(rng):
    R = Rotation.random(rng)
    family = maxwell_family(0.7, 6, R)
    ends = np.stack([cut_endpoint(cp).as_array() for cp in family])
    assert_allclose(ends, np.broadcast_to(ends[0], ends.shape), atol=1e-12)
    assert_allclose(ends[0][4:], math.pi * 0.49 * R.apply([1.0, 0.0, 0.0]), atol=1e-12)
    assert len({(round(cp.C1, 9), round(cp.C2, 9)) for cp in family}) == 6


def test_classify_line(line_params):
    cls = classify(line_params)
    assert cls.tag is GeodesicTag.LINE
    assert cls.cut_time == math.inf


def test_classify_incn(incn_params):
    cls = classify(incn_params)
    assert cls.tag is GeodesicTag.INCN
    assert cls.cut_time == pytest.approx(2.0 * math.pi / incn_params.K)
    assert cls.to_dict()["class"] == "incn"


def test_classify_offcn(offcn_params):
    cls = classify(offcn_params, tau_max=20.0)
    assert cls.tag is GeodesicTag.OFFCN
    assert cls.cut_time is None
    assert cls.min_abs_det > 0.0
    # the geodesic never meets C_n
    for t in np.linspace(0.5, 20.0 / offcn_params.K, 200):
        assert not in_cn(GroupPoint.from_array(geodesic_points(t, offcn_params)))


def test_classify_rejects_off_level_and_degenerate():
    with pytest.raises(PreconditionError):
        classify(GeodesicParams([2.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0]))
    with pytest.raises(DegenerateParams):
        classify(GeodesicParams([0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0]))


def test_in_cn_params(incn_params, offcn_params, line_params):
    assert in_cn_params(incn_params)
    assert not in_cn_params(offcn_params)
    with pytest.raises(LineBranch):
        in_cn_params(line_params)


def test_heisenberg_projection():
    assert_allclose(heisenberg_project(GroupPoint(1.0, [0, 2, 0], [0, 3, 0])).as_array(), [1.0, 2.0, 3.0])
    assert_allclose(heisenberg_project(GroupPoint(1.0, [0, -2, 0], [0, 3, 0])).as_array(), [1.0, 2.0, -3.0])
    assert_allclose(heisenberg_project(GroupPoint(1.0, [0, 0, 0], [0, 0, -4])).as_array(), [1.0, 0.0, 4.0])
    with pytest.raises(PreconditionError):
        heisenberg_project(GroupPoint(1.0, [1, 0, 0], [0, 1, 0]))


def test_incn_geodesic_projects_to_heisenberg_geodesic(incn_params):
    p = incn_params
    times = np.linspace(0.1, 2.0, 10)
    pts = geodesic_points(times, p)
    unit = p.Kvec / p.K
    # signed length along the K direction keeps the projection smooth
    projected = np.column_stack((pts[:, 0], pts[:, 1:4] @ unit, pts[:, 4:7] @ unit))
    assert_allclose(projected, heisenberg_geodesic(times, p.C[0], p.C[1], p.K), atol=1e-12)


def test_heisenberg_geodesic_is_horizontal():
    h = 1e-6
    for t in (0.4, 1.5, 3.0):
        ahead, behind = heisenberg_geodesic(t + h, 0.6, -0.8), heisenberg_geodesic(t - h, 0.6, -0.8)
        velocity = (ahead - behind) / (2 * h)
        frame = heisenberg_frame(heisenberg_geodesic(t, 0.6, -0.8))
        assert_allclose(velocity[0] * frame[0] + velocity[1] * frame[1], velocity, atol=1e-8)


def test_heisenberg_vertical_point():
    assert_allclose(heisenberg_geodesic(2.0 * math.pi, 1.0, 0.0), [0.0, 0.0, math.pi], atol=1e-14)


def test_normalized_incn_cut_time_is_two_pi_rho():
    p = normalize(GeodesicParams([0.3, 0.4, 0.0, 0.0], [0.0, 0.0, 1.5]))
    cls = classify(p)
    rho = math.hypot(p.C[0], p.C[1])
    assert cls.cut_time == pytest.approx(2.0 * math.pi * rho)
