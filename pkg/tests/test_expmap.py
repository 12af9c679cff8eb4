"""Factorized exponential map, its inversion and connect()."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from carnot47.errors import CollinearFrame, CollinearTarget, PreconditionError
from carnot47.expmap import (DEGREES, ExpParams, GeodesicAnswer, SeedGrid, brute_force_profile,
                             connect, connect_points, exp_factored, exp_jacobian,
                             first_critical_time, heisenberg_ratio, heisenberg_solve,
                             heisenberg_sphere, heisenberg_sphere_profile, homogeneous_norm,
                             invert_exp, jacobian_fd, recover_rotation, reduced_scan, sample_round_trip,
                             sphere_sample, sphere_to_heisenberg)
from carnot47.extremals import geodesic_point, geodesic_points, random_params
from carnot47.group_core import GroupPoint, dilate, multiply
from carnot47.optimality import GeodesicTag, heisenberg_geodesic
from carnot47.symmetry import (InvariantTuple, Rotation, act, in_cn, invariant_components,
                               representative_point)


def test_exp_params_validation():
    with pytest.raises(PreconditionError):
        ExpParams(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(PreconditionError):
        ExpParams(1.0, 0.0, 1.0, -0.1)
    p = ExpParams(0.6, 0.0, 0.8, 2.0)
    assert p.K == pytest.approx(1.0)
    assert p.length == pytest.approx(2.0)


@pytest.mark.parametrize("values", [(0.6, -0.2, 0.4, 1.3), (1.5, 0.7, 0.1, 4.0), (-0.3, 0.9, 2.0, 0.4)])
def test_jacobian_matches_finite_differences(values):
    p = ExpParams(*values)
    J = exp_jacobian(p)
    assert_allclose(J, jacobian_fd(p), rtol=1e-6, atol=1e-7 * max(1.0, np.max(np.abs(J))))


def test_invariants_are_homogeneous():
    base = invariant_components(0.4, -0.6, 0.3, 1.7)
    scaled = invariant_components(2.5 * 0.4, 2.5 * -0.6, 2.5 * 0.3, 1.7)
    assert_allclose(scaled, base * 2.5 ** DEGREES, rtol=1e-12)
    assert homogeneous_norm(base * 2.5 ** DEGREES) == pytest.approx(2.5 * homogeneous_norm(base))


def test_invariants_even_in_c3bar():
    a = exp_factored(ExpParams(0.4, 0.2, 0.7, 2.2)).as_array()
    b = exp_factored(ExpParams(0.4, 0.2, -0.7, 2.2)).as_array()
    assert_allclose(a, b, rtol=1e-13)


def test_first_critical_time_positive():
    crit = first_critical_time(0.6, 0.3, 0.5)
    assert 0.0 < crit <= math.inf


def test_invert_exp_round_trip(rng):
    grid = SeedGrid()
    for _ in range(3):
        p, crit = sample_round_trip(rng, grid)
        assert 0.1 * crit - 1e-12 <= p.tau <= 0.8 * crit + 1e-12
        result = invert_exp(exp_factored(p), grid)
        assert result.residual < 1e-9
        assert result.params.c3bar >= 0.0
        assert result.params.length <= p.length + 1e-8
        assert_allclose(exp_factored(result.params).as_array(), exp_factored(p).as_array(),
                        rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("values", [(-0.838, -0.394, 0.378, 0.788), (0.2, -0.9, 0.35, 0.3),
                                    (0.9, 0.1, 0.45, 0.6)])
def test_invert_exp_small_tau(values):
    p = ExpParams(*values)
    result = invert_exp(exp_factored(p))
    assert result.residual < 1e-9
    assert result.params.length <= p.length + 1e-8


def test_reduced_scan_passes_near_the_root():
    p = ExpParams(0.5, -0.3, 0.6, 1.4)
    grid = SeedGrid()
    target = exp_factored(p).as_array()
    params, residual = reduced_scan(target, grid)
    A = p.C1 * math.sin(p.tau) + p.C2 * (1.0 - math.cos(p.tau))
    beta = math.atan2(p.c3bar * p.tau, A)
    i = int(round(p.tau / grid.scan_step)) - 1
    j = int(round(beta / math.pi * (grid.n_beta - 1)))
    assert params[i, j, 3] == pytest.approx(p.tau)
    # x and ll are matched exactly everywhere on the scan
    values = invariant_components(*params[i, j])
    assert_allclose(values[:2], target[:2], rtol=1e-10, atol=1e-12)
    assert residual[i, j] < 0.05 * max(1.0, float(np.max(np.abs(target))))


def test_invert_exp_rejects_bad_targets():
    with pytest.raises(PreconditionError):
        invert_exp(InvariantTuple(0.0, 0.0, 0.0, 0.0))
    with pytest.raises(PreconditionError):
        invert_exp(InvariantTuple(0.0, 1.0, 3.0, 1.0))
    with pytest.raises(CollinearTarget):
        invert_exp(InvariantTuple(0.1, 1.0, 2.0, 4.0))


def test_recover_rotation(rng):
    q_bar = GroupPoint.from_array(rng.normal(size=7))
    R = Rotation.random(rng)
    assert recover_rotation(act(R, q_bar), q_bar).isclose(R, atol=1e-10)
    collinear = GroupPoint(0.1, [1.0, 0.0, 0.0], [2.0, 0.0, 0.0])
    with pytest.raises(CollinearFrame):
        recover_rotation(collinear, collinear)
    with pytest.raises(PreconditionError):
        recover_rotation(GroupPoint(5.0, q_bar.ell, q_bar.y), q_bar)


def test_heisenberg_solve_inverts_geodesic():
    C1, C2, tau = 0.7, -0.4, 3.0
    x, l, y = heisenberg_geodesic(tau, C1, C2, 1.0)
    got = heisenberg_solve(x, l, y)
    assert_allclose(got, (C1, C2, tau, math.hypot(C1, C2)), atol=1e-9)
    assert float(heisenberg_ratio(tau)) == pytest.approx(y / (x * x + l * l))


def test_heisenberg_solve_vertical():
    C1, C2, tau, rho = heisenberg_solve(0.0, 0.0, math.pi)
    assert (tau, rho) == (pytest.approx(2.0 * math.pi), pytest.approx(1.0))
    with pytest.raises(PreconditionError):
        heisenberg_solve(1.0, 0.0, 0.0)


def test_connect_line():
    answer = connect(GroupPoint(0.6, [0.0, 0.8, 0.0], [0.0, 0.0, 0.0]))
    assert answer.branch is GeodesicTag.LINE
    assert answer.T == pytest.approx(1.0)
    assert_allclose(answer.geodesic_params().C, [0.6, 0.0, 0.8, 0.0])


def test_connect_vertical_maxwell_point():
    answer = connect(GroupPoint(0.0, [0.0, 0.0, 0.0], [0.0, 0.0, math.pi]))
    assert answer.branch is GeodesicTag.INCN
    assert answer.maxwell
    assert answer.T == pytest.approx(2.0 * math.pi)
    assert_allclose(answer.endpoint.as_array(), [0, 0, 0, 0, 0, 0, math.pi], atol=1e-12)


def test_connect_incn_before_cut_time(rng):
    for _ in range(5):
        p = random_params(rng, "incn")
        t = float(rng.uniform(0.2, 0.9)) * 2.0 * math.pi / p.K
        q = geodesic_point(t, p)
        answer = connect(q)
        assert answer.branch is GeodesicTag.INCN
        assert not answer.maxwell
        assert answer.T == pytest.approx(t, rel=1e-8)
        assert answer.endpoint.isclose(q, atol=1e-9)


def test_connect_offcn(rng):
    p, _ = sample_round_trip(rng)
    R = Rotation.random(rng)
    q = act(R, representative_point(p.tau, p.canonical()))
    answer = connect(q)
    assert answer.branch is GeodesicTag.OFFCN
    assert answer.endpoint.isclose(q, atol=1e-6)
    assert answer.T <= p.length + 1e-8
    assert answer.roots and answer.tau_crit > answer.params.tau
    times = np.linspace(0.0, answer.T, 5)
    assert_allclose(geodesic_points(times, answer.geodesic_params())[-1], q.as_array(), atol=1e-6)


def test_connect_small_endpoint_off_cn(rng):
    p, _ = sample_round_trip(rng)
    base = act(Rotation.random(rng), representative_point(p.tau, p.canonical()))
    reference = connect(base)
    for lam in (1e-2, 1e-3):
        q = dilate(base, lam)
        assert not in_cn(dilate(q, 1.0 / lam))
        answer = connect(q)
        assert answer.branch is GeodesicTag.OFFCN
        assert answer.T == pytest.approx(lam * reference.T, rel=1e-8)
        assert_allclose(answer.endpoint.as_array(), q.as_array(), atol=1e-8 * lam)


def test_connect_points_uses_left_translation(rng):
    q1 = GroupPoint.from_array(rng.normal(size=7))
    step = GroupPoint(0.3, [0.0, 0.4, 0.0], [0.0, 0.0, 0.0])
    q2 = multiply(q1, step)
    answer = connect_points(q1, q2)
    assert answer.point(answer.T, start=q1).isclose(q2, atol=1e-10)
    assert answer.T == pytest.approx(0.5)


def test_connect_origin_rejected():
    with pytest.raises(PreconditionError):
        connect(GroupPoint.origin())


def test_answer_dict_for_vertical_point():
    answer = connect(GroupPoint(0.0, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]))
    data = answer.to_dict()
    assert data["branch"] == "incn"
    assert data["params"]["C3bar"] == 0.0
    assert isinstance(answer, GeodesicAnswer)


def test_sphere_sample_lines(rng):
    sample = sphere_sample(50, rng, stratum="line")
    assert sample.points.shape == (50, 7)
    assert_allclose(np.linalg.norm(sample.points[:, :4], axis=1), 1.0)
    assert_allclose(sample.points[:, 4:], 0.0)


def test_sphere_sample_slice_and_band(rng):
    sample = sphere_sample(200, rng, slice_spec="x,l1,y2", band=0.3)
    assert sample.columns == ("x", "l1", "y2")
    assert sample.projected().shape[1] == 3
    others = sample.points[:, [2, 3, 4, 6]]
    assert np.all(np.abs(others) <= 0.3)
    with pytest.raises(PreconditionError):
        sphere_sample(10, rng, slice_spec="x,z")
    with pytest.raises(PreconditionError):
        sphere_sample(10, rng, stratum="bogus")


def test_sphere_sample_align(rng):
    sample = sphere_sample(20, rng, align=True)
    assert_allclose(sample.points[:, 2:4], 0.0, atol=1e-12)
    assert_allclose(sample.points[:, 6], 0.0, atol=1e-12)


def test_incn_sphere_matches_heisenberg_profile(rng):
    sample = sphere_sample(100, rng, stratum="incn")
    heis = sphere_to_heisenberg(sample.points)
    r2 = heis[:, 0] ** 2 + heis[:, 1] ** 2
    assert_allclose(np.abs(heis[:, 2]), heisenberg_sphere_profile(r2), atol=1e-7)


def test_heisenberg_sphere_profile():
    assert heisenberg_sphere_profile(0.0)[0] == pytest.approx(1.0 / (4.0 * math.pi))
    assert heisenberg_sphere_profile(1.0)[0] == 0.0
    r2 = np.linspace(0.01, 0.99, 50)
    assert_allclose(heisenberg_sphere_profile(r2), brute_force_profile(r2), atol=1e-7)
    with pytest.raises(PreconditionError):
        heisenberg_sphere_profile(1.5)


def test_heisenberg_sphere_points():
    pts = heisenberg_sphere(400)
    r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    assert_allclose(np.abs(pts[:, 2]), heisenberg_sphere_profile(np.minimum(r2, 1.0)), atol=1e-6)
