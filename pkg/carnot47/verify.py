"""
Numerical property suite.

Every check reduces to a margin that is positive exactly when the check
passes: a minimum over a grid of a quantity that must stay positive, or
a tolerance minus the largest observed error.
"""

import logging
import math
from typing import Callable, List, Optional

import numpy as np

from .config import CarnotSettings
from .errors import CarnotError, PreconditionError
from .expmap import (ExpParams, SeedGrid, brute_force_profile, connect, exp_jacobian,
                     jacobian_fd, sample_round_trip, sphere_sample,
                     sphere_to_heisenberg)
from .extremals import (controls, geodesic_points, initial_state,
                        integrate_batch, random_params)
from .group_core import (GroupPoint, frame_left, lie_bracket_fd, left_field,
                         right_field)
from .optimality import (cut_endpoint, cut_time, det_coeffs, discriminant,
                         f_and_bounds, f_derivative, f_value,
                         collinearity_det_direct, heisenberg_frame,
                         heisenberg_project, maxwell_family, tau_grid)
from .schemas import CheckResult
from .symmetry import (CanonicalParams, Rotation, act, act_on_params,
                       canonicalize, invariants_of_point,
                       representative_point, representative_points,
                       so3_bracket_residual)

logger = logging.getLogger(__name__)

FAULTS = ("d11-sign",)


class VerifyContext:
    def __init__(self, settings: CarnotSettings, fault: Optional[str] = None):
        if fault is not None and fault not in FAULTS:
            raise PreconditionError(f"Unknown fault {fault!r}; choose from {FAULTS}")
        self.settings = settings
        self.fault = fault
        self.rng = np.random.default_rng(settings.seed)
        self.grid = SeedGrid(**settings.seed_grid.model_dump())

    def quadratic_det(self, tau, cp: CanonicalParams) -> np.ndarray:
        """collinearity_det with the injected fault applied, if any."""
        d11, d12, d22 = det_coeffs(tau)
        if self.fault == "d11-sign":
            d11 = -d11
        return 0.5 * cp.c3bar * (d11 * cp.C1 ** 2 + 2.0 * d12 * cp.C1 * cp.C2 + d22 * cp.C2 ** 2)


def _result(name: str, grid: str, margin: float) -> CheckResult:
    return CheckResult(check=name, grid=grid, min_value=float(margin),
                       passed=bool(np.isfinite(margin) and margin > 0))


def check_oracle(ctx: VerifyContext) -> CheckResult:
    s = ctx.settings
    kinds = ("line", "incn", "offcn")
    params = [random_params(ctx.rng, kinds[i % 3]) for i in range(s.verify.draws)]
    initial = np.stack([initial_state(p).as_array() for p in params])
    traj = integrate_batch(initial, s.verify.oracle_t_max, s.integrator.step, sample_every=100)
    worst = 0.0
    for i, p in enumerate(params):
        closed = np.concatenate((geodesic_points(traj.times, p), controls(traj.times, p)), axis=1)
        worst = max(worst, float(np.max(np.abs(traj.states[:, i, :11] - closed))))
        if np.any(traj.states[:, i, 11:] != p.Kvec):
            worst = math.inf
    return _result("oracle_equivalence",
                   f"{len(params)} draws, t in [0, {s.verify.oracle_t_max:g}], step {s.integrator.step:g}",
                   s.tolerances.oracle - worst)


def check_hamiltonian(ctx: VerifyContext) -> CheckResult:
    s = ctx.settings
    worst = 0.0
    for i in range(s.verify.draws):
        p = random_params(ctx.rng, ("incn", "offcn")[i % 2])
        h = controls(ctx.rng.uniform(0.0, s.verify.oracle_t_max, 100), p)
        worst = max(worst, float(np.max(np.abs(0.5 * np.sum(h * h, axis=1) - 0.5))))
    return _result("hamiltonian_level", f"{s.verify.draws} draws x 100 times", s.tolerances.level - worst)


def _dense_grid(ctx: VerifyContext) -> np.ndarray:
    v = ctx.settings.verify
    return tau_grid(v.discriminant_tau_max, v.discriminant_tau_max / v.discriminant_points)


def check_discriminant(ctx: VerifyContext) -> CheckResult:
    taus = _dense_grid(ctx)
    return _result("discriminant_negative", f"{taus.size} points in (0, {taus[-1]:g}]",
                   float(np.min(-discriminant(taus))))


def check_f_positive(ctx: VerifyContext) -> CheckResult:
    taus = _dense_grid(ctx)
    return _result("f_positive", f"{taus.size} points in (0, {taus[-1]:g}]", float(np.min(f_value(taus))))


def check_f_local_bound(ctx: VerifyContext) -> CheckResult:
    taus = _dense_grid(ctx)
    taus = taus[taus < math.sqrt(14.0)]
    f, local, _ = f_and_bounds(taus)
    return _result("f_above_taylor_bound", f"{taus.size} points in (0, sqrt(14))", float(np.min(f - local)))


def check_f_global_bound(ctx: VerifyContext) -> CheckResult:
    taus = _dense_grid(ctx)
    taus = taus[taus > 0.5 * (1.0 + math.sqrt(33.0))]
    f, _, global_bound = f_and_bounds(taus)
    return _result("f_above_quadratic_bound", f"{taus.size} points in ((1+sqrt(33))/2, {taus[-1]:g}]",
                   float(np.min(f - global_bound)))


def check_f_derivative(ctx: VerifyContext) -> CheckResult:
    taus = _dense_grid(ctx)
    return _result("f_increasing", f"{taus.size} points", float(np.min(f_derivative(taus))))


def check_f_derivative_difference(ctx: VerifyContext) -> CheckResult:
    taus = np.linspace(0.5, 100.0, 2000)
    h = 1e-5
    fd = (f_value(taus + h) - f_value(taus - h)) / (2.0 * h)
    err = np.max(np.abs(fd - f_derivative(taus)) / np.maximum(1.0, np.abs(fd)))
    return _result("f_derivative_matches_difference", "2000 points in [0.5, 100]", 1e-6 - float(err))


def check_determinant_cross(ctx: VerifyContext) -> CheckResult:
    taus = np.linspace(0.5, 20.0, 400)
    worst = 0.0
    for _ in range(ctx.settings.verify.draws):
        C1, C2, c3 = ctx.rng.normal(size=3)
        cp = CanonicalParams(C1, C2, c3, 1.0 / math.sqrt(C1 * C1 + C2 * C2 + c3 * c3))
        direct = collinearity_det_direct(taus, cp)
        form = ctx.quadratic_det(taus, cp)
        worst = max(worst, float(np.max(np.abs(form - direct) / np.maximum(1.0, np.abs(direct)))))
    return _result("determinant_cross_check", f"{ctx.settings.verify.draws} draws x 400 tau in [0.5, 20]",
                   1e-9 - worst)


def check_offcn_never_collinear(ctx: VerifyContext) -> CheckResult:
    s = ctx.settings
    taus = tau_grid(s.tau_grid.tau_max, s.tau_grid.step)
    margin = math.inf
    for _ in range(s.verify.draws):
        cp = canonicalize(random_params(ctx.rng, "offcn"))
        # C3bar > 0 and a negative definite form keep the determinant strictly negative
        margin = min(margin, float(np.min(-ctx.quadratic_det(taus, cp))))
    return _result("offcn_never_collinear", f"{s.verify.draws} draws x {taus.size} tau in (0, {taus[-1]:g}]",
                   margin)


def check_incn_cut_time(ctx: VerifyContext) -> CheckResult:
    cp = CanonicalParams(1.0, 0.0, 0.0, 1.0)
    expected = GroupPoint(0.0, np.zeros(3), [math.pi, 0.0, 0.0])
    err = max(abs(cut_time(cp) - 2.0 * math.pi),
              float(np.max(np.abs(cut_endpoint(cp).as_array() - expected.as_array()))))
    return _result("cut_time_and_vertical_endpoint", "C1=1, C2=0, K=1", 1e-9 - err)


def check_maxwell(ctx: VerifyContext) -> CheckResult:
    worst = 0.0
    for _ in range(10):
        radius = float(ctx.rng.uniform(0.2, 3.0))
        family = maxwell_family(radius, 8, Rotation.random(ctx.rng))
        ends = np.stack([cut_endpoint(cp).as_array() for cp in family])
        worst = max(worst, float(np.max(np.abs(ends - ends[0]))))
    return _result("maxwell_endpoints_coincide", "10 radii x 8 geodesics", 1e-9 - worst)


def check_incn_planar(ctx: VerifyContext) -> CheckResult:
    taus = np.linspace(0.0, 4.0 * math.pi, 500)
    worst = 0.0
    for _ in range(ctx.settings.verify.draws):
        cp = canonicalize(random_params(ctx.rng, "incn"))
        pts = representative_points(taus, cp)
        worst = max(worst, float(np.max(np.abs(pts[:, [2, 3, 5, 6]]))))
    return _result("incn_stays_planar", "500 tau in [0, 4 pi]", 1e-12 - worst)


def check_heisenberg_frame(ctx: VerifyContext) -> CheckResult:
    h = 1e-5
    worst = 0.0
    for _ in range(20):
        p = random_params(ctx.rng, "incn")
        for t in np.linspace(0.05, 2.0 * math.pi / p.K - 0.05, 40):
            pts = [heisenberg_project(GroupPoint.from_array(geodesic_points(s, p))).as_array()
                   for s in (t - h, t, t + h)]
            if min(pts[0][1], pts[1][1], pts[2][1]) < 1e-2:
                continue
            velocity = (pts[2] - pts[0]) / (2.0 * h)
            frame = heisenberg_frame(pts[1])
            predicted = velocity[0] * frame[0] + velocity[1] * frame[1]
            worst = max(worst, float(np.max(np.abs(predicted - velocity))))
    return _result("heisenberg_reduction_horizontal", "20 draws x 40 times, step 1e-5", 1e-6 - worst)


def check_sphere_profile(ctx: VerifyContext) -> CheckResult:
    sample = sphere_sample(ctx.settings.verify.draws, ctx.rng, stratum="incn")
    heis = sphere_to_heisenberg(sample.points)
    r2 = heis[:, 0] ** 2 + heis[:, 1] ** 2
    err = float(np.max(np.abs(np.abs(heis[:, 2]) - brute_force_profile(r2))))
    return _result("heisenberg_sphere_profile", f"{len(r2)} in-C_n samples", 1e-6 - err)


def check_lines_on_sphere(ctx: VerifyContext) -> CheckResult:
    sample = sphere_sample(ctx.settings.verify.draws, ctx.rng, stratum="line")
    pts = sample.points
    err = max(float(np.max(np.abs(np.linalg.norm(pts[:, :4], axis=1) - 1.0))),
              float(np.max(np.abs(pts[:, 4:]))))
    return _result("lines_on_unit_sphere", f"{len(pts)} line samples", 1e-12 - err)


def check_jacobian(ctx: VerifyContext) -> CheckResult:
    worst = 0.0
    for _ in range(ctx.settings.verify.draws):
        C1, C2, c3 = ctx.rng.normal(size=3)
        p = ExpParams(C1, C2, c3, float(ctx.rng.uniform(0.1, 6.0)))
        J = exp_jacobian(p)
        worst = max(worst, float(np.max(np.abs(J - jacobian_fd(p))) / max(1.0, np.max(np.abs(J)))))
    return _result("jacobian_matches_difference", f"{ctx.settings.verify.draws} draws", 1e-6 - worst)


def check_brackets(ctx: VerifyContext) -> CheckResult:
    worst = 0.0
    for _ in range(10):
        arr = ctx.rng.normal(size=7)
        q = GroupPoint.from_array(arr)
        worst = max(worst, so3_bracket_residual(q), so3_bracket_residual(q, action_convention=True))
        for i in range(1, 4):
            left = lie_bracket_fd(left_field(0), left_field(i), arr)
            right = lie_bracket_fd(right_field(0), right_field(i), arr)
            worst = max(worst, float(np.max(np.abs(left - frame_left(q)[3 + i]))),
                        float(np.max(np.abs(right + frame_left(q)[3 + i]))))
    return _result("bracket_tables", "10 random points, all generator pairs", 1e-5 - worst)


def check_equivariant_geodesics(ctx: VerifyContext) -> CheckResult:
    times = np.linspace(0.0, 10.0, 50)
    worst = 0.0
    for _ in range(ctx.settings.verify.draws):
        p = random_params(ctx.rng, "offcn")
        R = Rotation.random(ctx.rng)
        rotated = np.stack([act(R, GroupPoint.from_array(q)).as_array() for q in geodesic_points(times, p)])
        worst = max(worst, float(np.max(np.abs(rotated - geodesic_points(times, act_on_params(R, p))))))
        cp = canonicalize(p)
        rep = np.stack([act(cp.R, representative_point(cp.K * t, cp)).as_array() for t in times])
        worst = max(worst, float(np.max(np.abs(rep - geodesic_points(times, p)))))
    return _result("rotation_equivariance_of_geodesics", f"{ctx.settings.verify.draws} draws x 50 times",
                   1e-9 - worst)


def _forward_endpoint(ctx: VerifyContext):
    p, _ = sample_round_trip(ctx.rng, ctx.grid)
    R = Rotation.random(ctx.rng)
    return p, act(R, representative_point(p.tau, p.canonical()))


def check_round_trip(ctx: VerifyContext) -> CheckResult:
    s = ctx.settings
    worst = 0.0
    for _ in range(s.verify.round_trips):
        p, q = _forward_endpoint(ctx)
        try:
            answer = connect(q, s.tolerances.connect, ctx.grid, s.tolerances.collinearity, s.tolerances.newton)
        except CarnotError as e:
            logger.warning("Round trip failed for %r: %s", p, e)
            return _result("connect_round_trip", f"{s.verify.round_trips} forward endpoints", -math.inf)
        # a shorter root than the one sampled is a valid answer
        err = max(float(np.max(np.abs(answer.endpoint.as_array() - q.as_array()))), answer.T - p.length)
        worst = max(worst, err)
    return _result("connect_round_trip", f"{s.verify.round_trips} forward endpoints",
                   s.tolerances.connect - worst)


def check_invariants_under_rotation(ctx: VerifyContext) -> CheckResult:
    worst = 0.0
    for _ in range(ctx.settings.verify.equivariance_draws):
        R = Rotation.random(ctx.rng)
        q = GroupPoint.from_array(ctx.rng.normal(size=7))
        a, b = invariants_of_point(q).as_array(), invariants_of_point(act(R, q)).as_array()
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    return _result("invariants_under_rotation", f"{ctx.settings.verify.equivariance_draws} rotations",
                   1e-12 - worst)


def check_equivariance(ctx: VerifyContext) -> CheckResult:
    s = ctx.settings
    worst = 0.0
    for _ in range(s.verify.equivariance_draws):
        R = Rotation.random(ctx.rng)
        _, q = _forward_endpoint(ctx)
        try:
            first = connect(q, s.tolerances.connect, ctx.grid, s.tolerances.collinearity, s.tolerances.newton)
            second = connect(act(R, q), s.tolerances.connect, ctx.grid, s.tolerances.collinearity,
                             s.tolerances.newton)
        except CarnotError as e:
            logger.warning("Equivariance solve failed: %s", e)
            return _result("connect_equivariance", f"{s.verify.equivariance_draws} rotations", -math.inf)
        worst = max(worst, float(np.max(np.abs(first.params.as_array() - second.params.as_array()))),
                    float(np.max(np.abs(R.matrix @ first.R.matrix - second.R.matrix))))
    return _result("connect_equivariance", f"{s.verify.equivariance_draws} rotations", 1e-8 - worst)


CHECKS: List[Callable[[VerifyContext], CheckResult]] = [
    check_oracle,
    check_hamiltonian,
    check_discriminant,
    check_f_positive,
    check_f_local_bound,
    check_f_global_bound,
    check_f_derivative,
    check_f_derivative_difference,
    check_determinant_cross,
    check_offcn_never_collinear,
    check_incn_cut_time,
    check_maxwell,
    check_incn_planar,
    check_heisenberg_frame,
    check_sphere_profile,
    check_lines_on_sphere,
    check_jacobian,
    check_brackets,
    check_equivariant_geodesics,
    check_round_trip,
    check_invariants_under_rotation,
    check_equivariance,
]


def run_checks(settings: CarnotSettings, fault: Optional[str] = None,
               only: Optional[List[str]] = None) -> List[CheckResult]:
    ctx = VerifyContext(settings, fault)
    results = []
    for check in CHECKS:
        name = check.__name__[len("check_"):]
        if only and name not in only:
            continue
        try:
            result = check(ctx)
        except CarnotError as e:
            logger.error("Check %s raised %s", name, e)
            result = _result(name, "aborted", -math.inf)
        logger.info("%s: min_value=%.3e pass=%s", result.check, result.min_value, result.passed)
        results.append(result)
    return results
