"""SO(3) action, canonical representatives and invariants."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from carnot47.errors import DegenerateParams, LineBranch, PreconditionError
from carnot47.extremals import GeodesicParams, geodesic_point, geodesic_points
from carnot47.group_core import GroupPoint, multiply
from carnot47.symmetry import (E1, InvariantTuple, Rotation, SymmetryGenerator,
                               act, act_arrays, act_on_params, canonical_rotation_of,
                               canonicalize, fixed_point_set, in_cn,
                               invariants_curve, invariants_of_point, isotropy_field,
                               representative_point, so3_bracket_residual,
                               subgroup_closed, symmetry_field)


def test_rotation_validation():
    with pytest.raises(PreconditionError):
        Rotation(2.0 * np.eye(3))
    with pytest.raises(PreconditionError):
        Rotation(np.diag([1.0, 1.0, -1.0]))


@pytest.mark.parametrize("target", [[0.0, 0.0, 2.0], [-1.0, 0.0, 0.0], [1.0, 1.0, 1.0], [3.0, 0.0, 0.0]])
def test_minimal_rotation(target):
    R = Rotation.minimal(target)
    target = np.asarray(target) / np.linalg.norm(target)
    assert_allclose(R.apply(E1), target, atol=1e-14)


def test_action_is_automorphism(rng):
    for _ in range(10):
        R = Rotation.random(rng)
        a, b = (GroupPoint.from_array(rng.normal(size=7)) for _ in range(2))
        assert act(R, multiply(a, b)).isclose(multiply(act(R, a), act(R, b)))
        assert act(R.T, act(R, a)).isclose(a)


def test_act_arrays_matches_act(rng):
    R = Rotation.random(rng)
    pts = rng.normal(size=(4, 7))
    out = act_arrays(R, pts)
    for row, q in zip(out, pts):
        assert_allclose(row, act(R, GroupPoint.from_array(q)).as_array(), atol=1e-14)


def test_rotated_geodesic_parameters(rng, offcn_params):
    R = Rotation.random(rng)
    rotated = act_on_params(R, offcn_params)
    assert rotated.K == pytest.approx(offcn_params.K)
    for t in (0.5, 2.0, 7.0):
        expected = act(R, geodesic_point(t, offcn_params))
        assert geodesic_point(t, rotated).isclose(expected, atol=1e-10)


def test_act_on_params_needs_k1():
    p = GeodesicParams([1.0, 0.0, 0.5, 0.0], [1.0, 0.0, 0.0])
    R = Rotation.about_axis([0.0, 0.0, 1.0], math.pi / 2)
    with pytest.raises(PreconditionError):
        act_on_params(R, p)


def test_canonicalize_frame(offcn_params):
    cp = canonicalize(offcn_params)
    assert cp.c3bar > 0
    assert cp.K == pytest.approx(offcn_params.K)
    assert_allclose(cp.R.T.apply(offcn_params.z1), [cp.K, 0.0, 0.0], atol=1e-12)
    assert_allclose(cp.R.T.apply(offcn_params.z2), [0.0, cp.c3bar * cp.K, 0.0], atol=1e-12)
    assert abs(cp.level_residual()) < 1e-12


def test_canonical_representative_reproduces_geodesic(offcn_params, incn_params):
    for p in (offcn_params, incn_params):
        cp = canonicalize(p)
        for t in np.linspace(0.0, 12.0, 25):
            rep = act(cp.R, representative_point(cp.K * t, cp))
            assert rep.isclose(GroupPoint.from_array(geodesic_points(t, p)), atol=1e-10)


def test_canonicalize_rejects_lines_and_constant_controls(line_params):
    with pytest.raises(LineBranch):
        canonicalize(line_params)
    with pytest.raises(DegenerateParams):
        canonicalize(GeodesicParams([0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0]))


def test_representative_y1_has_half_factor():
    cp = canonicalize(GeodesicParams([1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0]))
    q = representative_point(math.pi, cp)
    assert q.y[0] == pytest.approx(0.5 * math.pi)


def test_invariants_curve_matches_point(offcn_params):
    cp = canonicalize(offcn_params)
    for tau in (0.1, 1.0, 4.0, 9.0):
        direct = invariants_of_point(representative_point(tau, cp)).as_array()
        assert_allclose(invariants_curve(tau, cp).as_array(), direct, rtol=1e-12, atol=1e-14)


def test_invariants_are_rotation_invariant(rng):
    q = GroupPoint.from_array(rng.normal(size=7))
    inv = invariants_of_point(q)
    for _ in range(5):
        assert_allclose(invariants_of_point(act(Rotation.random(rng), q)).as_array(), inv.as_array(),
                        rtol=1e-12)
    assert inv.satisfies_cauchy_schwarz()
    assert inv.gram() == pytest.approx(float(np.dot(np.cross(q.ell, q.y), np.cross(q.ell, q.y))))


def test_invariant_tuple_cauchy_schwarz():
    assert not InvariantTuple(0.0, 1.0, 3.0, 1.0).satisfies_cauchy_schwarz()
    assert InvariantTuple(0.0, 1.0, 1.0, 1.0).satisfies_cauchy_schwarz()


def test_isotropy_fields_generate_rotations(rng):
    q = GroupPoint.from_array(rng.normal(size=7))
    axis = rng.normal(size=3)
    h = 1e-6
    plus = act(Rotation.about_axis(axis, h), q).as_array()
    minus = act(Rotation.about_axis(axis, -h), q).as_array()
    unit = axis / np.linalg.norm(axis)
    # rotating by +h about a moves l along a x l = -(l x a)
    assert_allclose((plus - minus) / (2 * h), -isotropy_field(unit, q), atol=1e-8)


def test_symmetry_field_combines_parts(rng):
    q = GroupPoint.from_array(rng.normal(size=7))
    g = SymmetryGenerator(axis=[0.0, 1.0, 0.0], translation=np.eye(7)[0])
    expected = isotropy_field([0.0, 1.0, 0.0], q)
    expected[0] += 1.0
    expected[4:7] += 0.5 * q.ell
    assert_allclose(symmetry_field(g, q), expected)


def test_so3_bracket_table(rng):
    q = GroupPoint.from_array(rng.normal(size=7))
    assert so3_bracket_residual(q) < 1e-6
    assert so3_bracket_residual(q, action_convention=True) < 1e-6


def test_cn_membership():
    assert in_cn(GroupPoint(1.0, [0, 0, 0], [1, 2, 3]))
    assert in_cn(GroupPoint(1.0, [1, 2, 3], [-2, -4, -6]))
    assert not in_cn(GroupPoint(1.0, [1, 0, 0], [0, 1, 0]))
    with pytest.raises(PreconditionError):
        in_cn(GroupPoint.origin(), tol=0.0)


def test_fixed_point_set_is_fixed(rng):
    axis = np.array([1.0, 2.0, 2.0]) / 3.0
    q = fixed_point_set(axis, 0.4, 1.5, -0.7)
    R = Rotation.about_axis(axis, 1.234)
    assert act(R, q).isclose(q, atol=1e-14)
    assert subgroup_closed(q, fixed_point_set(axis, -1.0, 0.2, 3.0))


def test_canonical_rotation_of_point(rng):
    q = GroupPoint.from_array(rng.normal(size=7))
    R = canonical_rotation_of(q)
    aligned = act(R.T, q)
    assert aligned.ell[0] > 0
    assert_allclose(aligned.ell[1:], 0.0, atol=1e-12)
    assert abs(aligned.y[2]) < 1e-12
    assert canonical_rotation_of(GroupPoint.origin()) is None
