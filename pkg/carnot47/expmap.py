"""
Factorized exponential map and the boundary value problem

The invariants (x, (l,l), (l,y), (y,y)) of a geodesic endpoint depend only
on the reduced parameters (C1, C2, C3bar, tau). Inverting that map finds
the reduced parameters of a geodesic to a given endpoint; the rotation
carrying the representative to the endpoint then follows from two
orthonormal frames.

The map commutes with dilations: scaling (C1, C2, C3bar) by lam scales
the invariants by (lam, lam^2, lam^3, lam^4) at the same tau. Targets are
rescaled to unit homogeneous norm before Newton; seeds come from a scan of
the (tau, beta) plane on which x and ll already match the target.

Author: carnot47
Created: 2026
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import minimum_filter
from scipy.optimize import brentq, least_squares

from .errors import (CollinearFrame, CollinearTarget, NoConvergence,
                     OutOfValidatedRange, PreconditionError, SingularJacobian)
from .extremals import GeodesicParams, geodesic_points, normalize
from .group_core import COORD_LABELS, GroupPoint, dilate, inverse, multiply
from .optimality import GeodesicTag, heisenberg_geodesic, tau_minus_sin
from .symmetry import (COLLINEARITY_TOL, CanonicalParams, InvariantTuple,
                       Rotation, act, act_arrays, act_on_params,
                       canonical_rotation_of, in_cn, invariant_components,
                       invariants_of_point, representative_point)

logger = logging.getLogger(__name__)

# homogeneous degrees of (x, ll, ly, yy) under dilations
DEGREES = np.array([1.0, 2.0, 3.0, 4.0])
SINGULAR_DET = 1e-14
ROOT_MATCH = 1e-6


@dataclass(frozen=True)
class ExpParams:
    """Reduced parameters (C1, C2, C3bar, tau) of the factorized exponential map."""
    C1: float
    C2: float
    c3bar: float
    tau: float

    def __post_init__(self):
        values = (self.C1, self.C2, self.c3bar, self.tau)
        if not all(math.isfinite(v) for v in values):
            raise PreconditionError(f"ExpParams must be finite, got {values}")
        if self.C1 == 0.0 and self.C2 == 0.0:
            raise PreconditionError("ExpParams need (C1, C2) != (0, 0)")
        if self.tau < 0.0:
            raise PreconditionError(f"tau must be >= 0, got {self.tau}")

    @classmethod
    def from_array(cls, values) -> "ExpParams":
        return cls(*(float(v) for v in np.asarray(values, dtype=float).reshape(4)))

    def as_array(self) -> np.ndarray:
        return np.array([self.C1, self.C2, self.c3bar, self.tau])

    @property
    def norm(self) -> float:
        return math.sqrt(self.C1 ** 2 + self.C2 ** 2 + self.c3bar ** 2)

    @property
    def K(self) -> float:
        """K from the unit level set K^2 (C1^2 + C2^2 + C3bar^2) = 1."""
        return 1.0 / self.norm

    @property
    def length(self) -> float:
        """T = tau sqrt(C1^2 + C2^2 + C3bar^2)."""
        return self.tau * self.norm

    def canonical(self, R: Optional[Rotation] = None) -> CanonicalParams:
        return CanonicalParams(self.C1, self.C2, self.c3bar, self.K, R or Rotation.identity())

    def to_dict(self) -> dict:
        return {"C1": self.C1, "C2": self.C2, "C3bar": self.c3bar, "tau": self.tau}


@dataclass(frozen=True)
class SeedGrid:
    """Starting points for the inversion of the factorized exponential map."""
    n_beta: int = 181
    n_starts: int = 12
    max_iter: int = 50
    max_halvings: int = 20
    scan_max: float = 4.0 * math.pi
    scan_step: float = 0.02

    def __post_init__(self):
        if min(self.n_starts, self.max_iter) < 1 or self.n_beta < 3:
            raise PreconditionError("Seed grid needs n_starts, max_iter >= 1 and n_beta >= 3")
        if self.scan_max <= 0 or self.scan_step <= 0:
            raise PreconditionError("Critical time scan needs positive range and step")


@dataclass(frozen=True)
class InversionResult:
    """Best root of the inversion, all distinct roots found and the critical time of the best one."""
    params: ExpParams
    roots: Tuple[ExpParams, ...]
    residual: float
    tau_crit: float


@dataclass(frozen=True)
class GeodesicAnswer:
    """
    Geodesic from the origin to a requested endpoint.

    Curved branches are t -> act(R, representative_point(K t)); the line
    branch is t -> t * direction.
    """
    branch: GeodesicTag
    T: float
    K: float
    R: Rotation
    params: Optional[ExpParams] = None
    direction: Optional[np.ndarray] = None
    roots: Tuple[ExpParams, ...] = ()
    maxwell: bool = False
    residual: float = 0.0
    tau_crit: Optional[float] = None

    def point(self, t: float, start: Optional[GroupPoint] = None) -> GroupPoint:
        if self.branch is GeodesicTag.LINE:
            q = GroupPoint.from_array(np.concatenate((t * self.direction, np.zeros(3))))
        else:
            q = act(self.R, representative_point(self.K * t, self.params.canonical()))
        return q if start is None else multiply(start, q)

    @property
    def endpoint(self) -> GroupPoint:
        return self.point(self.T)

    def geodesic_params(self) -> GeodesicParams:
        """
        The seven constants (C1..C4, K1..K3) of the answer.

        Raises:
            PreconditionError: the rotated geodesic has K1 = 0, which the
                seven-constant family does not cover
        """
        if self.branch is GeodesicTag.LINE:
            return GeodesicParams(self.direction, np.zeros(3))
        p = self.params
        base = GeodesicParams([p.C1, p.C2, 0.0, p.c3bar], [self.K, 0.0, 0.0])
        return act_on_params(self.R, base)

    def to_dict(self) -> dict:
        data = {
            "branch": self.branch.value,
            "length": self.T,
            "K": self.K,
            "R": self.R.to_list(),
            "residual": self.residual,
            "maxwell": self.maxwell,
        }
        if self.params is not None:
            data["params"] = self.params.to_dict()
        if self.direction is not None:
            data["direction"] = self.direction.tolist()
        if self.roots:
            data["roots"] = [r.to_dict() | {"length": r.length} for r in self.roots]
        if self.tau_crit is not None:
            data["tau_crit"] = self.tau_crit
        return data


def exp_factored(p: ExpParams) -> InvariantTuple:
    return InvariantTuple.from_array(invariant_components(p.C1, p.C2, p.c3bar, p.tau))


def _values_and_jacobians(C1, C2, c3, tau) -> Tuple[np.ndarray, np.ndarray]:
    """Invariants (..., 4) and their Jacobian (..., 4, 4) w.r.t. (C1, C2, C3bar, tau)."""
    C1, C2, c3, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (C1, C2, c3, tau)))
    s, c = np.sin(tau), np.cos(tau)
    zero = np.zeros_like(tau)
    P = tau_minus_sin(tau)
    rho2 = C1 * C1 + C2 * C2

    x = C1 * (c - 1.0) + C2 * s
    dx = np.stack((c - 1.0, s, zero, -C1 * s + C2 * c), axis=-1)
    A = C1 * s + C2 * (1.0 - c)
    dA = np.stack((s, 1.0 - c, zero, C1 * c + C2 * s), axis=-1)
    B = c3 * tau
    dB = np.stack((zero, zero, tau, c3), axis=-1)
    Y1 = 0.5 * rho2 * P
    dY1 = np.stack((C1 * P, C2 * P, zero, 0.5 * rho2 * (1.0 - c)), axis=-1)
    g1 = 2.0 * s - tau * c - tau
    g2 = 2.0 - 2.0 * c - tau * s
    G = C1 * g1 + C2 * g2
    G_tau = C1 * (c + tau * s - 1.0) + C2 * (s - tau * c)
    Y2 = 0.5 * c3 * G
    dY2 = np.stack((0.5 * c3 * g1, 0.5 * c3 * g2, 0.5 * G, 0.5 * c3 * G_tau), axis=-1)

    def col(v):
        return v[..., None]

    values = np.stack((x, A * A + B * B, A * Y1 + B * Y2, Y1 * Y1 + Y2 * Y2), axis=-1)
    jac = np.stack((
        dx,
        2.0 * col(A) * dA + 2.0 * col(B) * dB,
        dA * col(Y1) + col(A) * dY1 + dB * col(Y2) + col(B) * dY2,
        2.0 * col(Y1) * dY1 + 2.0 * col(Y2) * dY2,
    ), axis=-2)
    return values, jac


def exp_jacobian(p: ExpParams) -> np.ndarray:
    """4x4 Jacobian; rows are (x, ll, ly, yy), columns (C1, C2, C3bar, tau)."""
    return _values_and_jacobians(p.C1, p.C2, p.c3bar, p.tau)[1]


def jacobian_fd(p: ExpParams, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of exp_factored."""
    u = p.as_array()
    cols = []
    for i in range(4):
        du = np.zeros(4)
        du[i] = eps
        plus = invariant_components(*(u + du))
        minus = invariant_components(*(u - du))
        cols.append((plus - minus) / (2.0 * eps))
    return np.stack(cols, axis=1)


def normalized_det(C1, C2, c3, tau) -> np.ndarray:
    """Determinant of the Jacobian after scaling rows and columns to unit norm; same sign."""
    _, jac = _values_and_jacobians(C1, C2, c3, tau)
    rows = np.linalg.norm(jac, axis=-1, keepdims=True)
    jac = jac / np.where(rows > 0, rows, 1.0)
    cols = np.linalg.norm(jac, axis=-2, keepdims=True)
    jac = jac / np.where(cols > 0, cols, 1.0)
    return np.linalg.det(jac)


def first_critical_time(C1: float, C2: float, c3bar: float,
                        scan_max: float = 4.0 * math.pi, step: float = 0.02) -> float:
    """
    First tau > 0 where the Jacobian determinant changes sign, or +inf within scan_max.

    The scan starts at tau = step and the bracket is refined with brentq.
    """
    taus = np.arange(step, scan_max + 0.5 * step, step)
    dets = normalized_det(C1, C2, c3bar, taus)
    sign0 = np.sign(dets[0])
    flips = np.flatnonzero(np.sign(dets[1:]) != sign0)
    if sign0 == 0.0 or not flips.size:
        return math.inf
    k = flips[0] + 1
    if dets[k] == 0.0:
        return float(taus[k])
    return float(brentq(lambda t: float(normalized_det(C1, C2, c3bar, t)), taus[k - 1], taus[k],
                        xtol=1e-13))


def homogeneous_norm(values):
    """(x^4 + ll^2 + |ly|^(4/3) + yy)^(1/4) over the last axis; degree one under dilations."""
    v = np.asarray(values, dtype=float)
    x, ll, ly, yy = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    norm = (x ** 4 + ll * ll + np.abs(ly) ** (4.0 / 3.0) + np.abs(yy)) ** 0.25
    return float(norm) if norm.ndim == 0 else norm


def _dilate(values: np.ndarray, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return values * lam[..., None] ** DEGREES


def reduced_scan(target: np.ndarray, grid: SeedGrid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parameters on the surface where x and ll already match the target.

    With A = sqrt(ll) cos beta and C3bar tau = sqrt(ll) sin beta, beta in [0, pi],
    the relation x + iA = (C1 - i C2)(e^{i tau} - 1) fixes (C1, C2), so every
    root with C3bar >= 0 lies on the (tau, beta) plane. The residual left on
    that plane is the misfit in (ly, yy).

    Returns:
        params of shape (n_tau, n_beta, 4) and the max-abs residual (n_tau, n_beta)
    """
    x_t, ll_t = float(target[0]), float(target[1])
    taus = np.arange(grid.scan_step, grid.scan_max + 0.5 * grid.scan_step, grid.scan_step)
    betas = np.linspace(0.0, math.pi, grid.n_beta)
    tau, beta = np.meshgrid(taus, betas, indexing="ij")
    ell = math.sqrt(max(ll_t, 0.0))
    A = ell * np.cos(beta)
    den = np.exp(1j * tau) - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (x_t + 1j * A) / den
        C1, C2 = w.real, -w.imag
        c3 = ell * np.sin(beta) / tau
        values = invariant_components(C1, C2, c3, tau)
        residual = np.max(np.abs(values - target), axis=-1)
    bad = (np.abs(den) < 1e-8) | (C1 * C1 + C2 * C2 == 0.0) | ~np.isfinite(residual)
    residual = np.where(bad, np.inf, residual)
    return np.stack((C1, C2, c3, tau), axis=-1), residual


def _seeds(target: np.ndarray, grid: SeedGrid) -> np.ndarray:
    """Local minima of the reduced residual, best first."""
    params, residual = reduced_scan(target, grid)
    lowest = minimum_filter(residual, size=3, mode="nearest")
    mask = np.isfinite(residual) & (residual <= lowest)
    order = np.argsort(residual[mask], kind="stable")
    return params[mask][order]


def solve_exp(target, seed, grid: SeedGrid = SeedGrid(), tol: float = 1e-12) -> np.ndarray:
    """
    Damped Newton for exp_factored(u) = target from one seed.

    Returns:
        Converged (C1, C2, C3bar, tau)

    Raises:
        SingularJacobian: |det J| < 1e-14 at an iterate
        NoConvergence: iteration or step-halving budget exhausted
    """
    target = np.asarray(target, dtype=float)
    u = np.asarray(seed, dtype=float).copy()
    values, jac = _values_and_jacobians(*u)
    F = values - target
    for _ in range(grid.max_iter):
        err = float(np.max(np.abs(F)))
        if err <= tol:
            return u
        if abs(np.linalg.det(jac)) < SINGULAR_DET:
            raise SingularJacobian(f"Singular Jacobian at {u.tolist()}")
        delta = np.linalg.solve(jac, -F)
        alpha = 1.0
        norm_F = float(np.linalg.norm(F))
        for _ in range(grid.max_halvings + 1):
            trial = u + alpha * delta
            if trial[3] > 0.0:
                t_values, t_jac = _values_and_jacobians(*trial)
                t_F = t_values - target
                if np.linalg.norm(t_F) < norm_F:
                    break
            alpha *= 0.5
        else:
            raise NoConvergence(f"Step halving failed at {u.tolist()} (residual {err:.3e})")
        u, jac, F = trial, t_jac, t_F
    if float(np.max(np.abs(F))) <= tol:
        return u
    raise NoConvergence(f"Newton did not converge within {grid.max_iter} iterations")


def _polish(target: np.ndarray, seed: np.ndarray, grid: SeedGrid, tol: float) -> np.ndarray:
    """Newton from seed; when that fails, Levenberg-Marquardt first and Newton from its result."""
    try:
        return solve_exp(target, seed, grid, tol)
    except NoConvergence as first:
        try:
            fit = least_squares(lambda u: invariant_components(*u) - target, seed,
                                jac=lambda u: _values_and_jacobians(*u)[1], method="lm",
                                xtol=1e-14, ftol=1e-14, gtol=1e-14)
        except ValueError as e:
            raise NoConvergence(f"Least squares failed from {seed.tolist()}: {e}") from None
        if not np.all(np.isfinite(fit.x)) or fit.x[3] <= 0.0:
            raise first
        return solve_exp(target, fit.x, grid, tol)


def invert_exp(target: InvariantTuple, grid: SeedGrid = SeedGrid(), tol: float = 1e-12,
               collinear_tol: float = COLLINEARITY_TOL) -> InversionResult:
    """
    Reduced parameters of the shortest geodesic whose endpoint has the given invariants.

    Only roots with tau before the first critical time of the map are accepted;
    C3bar is returned non-negative since the invariants are even in it.

    Raises:
        PreconditionError: target is the origin or violates Cauchy-Schwarz
        CollinearTarget: l and y are dependent; use the Heisenberg branch
        OutOfValidatedRange: roots exist only past the first critical time
        NoConvergence, SingularJacobian: no start converged
    """
    if not target.satisfies_cauchy_schwarz():
        raise PreconditionError(f"Invariants {target.to_dict()} violate Cauchy-Schwarz")
    raw = target.as_array()
    scale = homogeneous_norm(raw)
    if scale == 0.0:
        raise PreconditionError("Target is the origin")
    unit = _dilate(raw, 1.0 / scale)
    ll, ly, yy = unit[1], unit[2], unit[3]
    if ll * yy - ly * ly <= collinear_tol * max(ll * yy, 1e-300):
        raise CollinearTarget("Target lies in C_n; use the Heisenberg branch")

    accepted, beyond = [], []
    failures = []
    seeds = _seeds(unit, grid)
    for k, seed in enumerate(seeds):
        # past the first n_starts minima, keep going only until one root is accepted
        if k >= grid.n_starts and accepted:
            break
        try:
            u = _polish(unit, seed, grid, tol)
        except NoConvergence as e:
            failures.append(e)
            continue
        if u[3] <= 0.0 or (u[0] == 0.0 and u[1] == 0.0):
            continue
        u[2] = abs(u[2])
        crit = first_critical_time(u[0], u[1], u[2], grid.scan_max, grid.scan_step)
        bucket = accepted if u[3] < crit else beyond
        if not any(np.allclose(u, v, rtol=0.0, atol=ROOT_MATCH) for v, _ in bucket):
            bucket.append((u, crit))

    if not accepted:
        if beyond:
            raise OutOfValidatedRange(
                f"All {len(beyond)} roots lie past the first critical time of the exponential map")
        if failures and all(isinstance(e, SingularJacobian) for e in failures):
            raise SingularJacobian("Every Newton start met a singular Jacobian")
        raise NoConvergence(f"None of {len(seeds)} Newton starts converged")

    roots = []
    for u, crit in accepted:
        C = u[:3] * scale
        roots.append((ExpParams(C[0], C[1], C[2], u[3]), crit))
    roots.sort(key=lambda r: (r[0].length, r[0].C1, r[0].C2, r[0].c3bar))
    best, crit = roots[0]
    residual = float(np.max(np.abs(_dilate(exp_factored(best).as_array() - raw, 1.0 / scale))))
    if len(roots) > 1:
        logger.info("Inversion found %d roots below the critical time, lengths %s",
                    len(roots), [round(r.length, 9) for r, _ in roots])
    return InversionResult(best, tuple(r for r, _ in roots), residual, crit)


def _orthonormal_frame(ell: np.ndarray, y: np.ndarray) -> np.ndarray:
    e1 = ell / np.linalg.norm(ell)
    perp = y - np.dot(y, e1) * e1
    perp = perp - np.dot(perp, e1) * e1
    e2 = perp / np.linalg.norm(perp)
    return np.column_stack((e1, e2, np.cross(e1, e2)))


def recover_rotation(q: GroupPoint, q_bar: GroupPoint, tol: float = 1e-6) -> Rotation:
    """
    The unique R with R l_bar = l and R y_bar = y.

    Raises:
        CollinearFrame: l_bar and y_bar are dependent
        PreconditionError: the two points have different invariants
    """
    inv, inv_bar = invariants_of_point(q).as_array(), invariants_of_point(q_bar).as_array()
    scale = max(1.0, float(np.max(np.abs(inv_bar))))
    if np.max(np.abs(inv - inv_bar)) > tol * scale:
        raise PreconditionError("Points have different SO(3)-invariants")
    for ell, y in ((q_bar.ell, q_bar.y), (q.ell, q.y)):
        if np.linalg.norm(np.cross(ell, y)) <= 1e-12 * max(np.linalg.norm(ell) * np.linalg.norm(y), 1e-300):
            raise CollinearFrame("l and y are collinear; the rotation is not unique")
    F = _orthonormal_frame(q.ell, q.y)
    F_bar = _orthonormal_frame(q_bar.ell, q_bar.y)
    return Rotation.from_frame(F @ F_bar.T)


def heisenberg_ratio(tau) -> np.ndarray:
    """(tau - sin tau) / (8 sin^2(tau/2)); equals y / (x^2 + l^2) along Heisenberg geodesics."""
    tau = np.asarray(tau, dtype=float)
    return tau_minus_sin(tau) / (8.0 * np.sin(0.5 * tau) ** 2)


def heisenberg_solve(x: float, l: float, y: float, vertical_tol: float = 1e-12):
    """
    (C1, C2, tau, rho) of the shortest Heisenberg geodesic to (x, l, y), y > 0.

    rho = sqrt(C1^2 + C2^2) = 1/K, so the length is tau * rho. On the vertical
    line x = l = 0 the answer is tau = 2 pi with (C1, C2) = (rho, 0), one
    member of a circle of minimizers.
    """
    if y <= 0.0:
        raise PreconditionError("heisenberg_solve needs y > 0")
    r2 = x * x + l * l
    if r2 <= vertical_tol * y:
        rho = math.sqrt(y / math.pi)
        return rho, 0.0, 2.0 * math.pi, rho
    ratio = y / r2
    lo, hi = 1e-12, 2.0 * math.pi - 1e-9
    if ratio <= float(heisenberg_ratio(lo)):
        tau = 12.0 * ratio
    else:
        try:
            tau = brentq(lambda t: float(heisenberg_ratio(t)) - ratio, lo, hi, xtol=1e-15, rtol=1e-15)
        except (ValueError, RuntimeError) as e:
            raise NoConvergence(f"Heisenberg time solve failed for y/r^2 = {ratio:.6g}: {e}") from None
    rho = math.sqrt(r2) / (2.0 * math.sin(0.5 * tau))
    z = complex(x, l) / (complex(math.cos(tau), math.sin(tau)) - 1.0)
    return z.real, -z.imag, tau, rho


def _line_answer(q: GroupPoint) -> GeodesicAnswer:
    horizontal = q.as_array()[:4]
    T = float(np.linalg.norm(horizontal))
    return GeodesicAnswer(GeodesicTag.LINE, T=T, K=0.0, R=Rotation.identity(),
                          direction=horizontal / T, residual=float(np.linalg.norm(q.y)))


def _incn_answer(q: GroupPoint, line_tol: float) -> GeodesicAnswer:
    norm_y = float(np.linalg.norm(q.y))
    r2 = q.x ** 2 + float(np.dot(q.ell, q.ell))
    if norm_y <= line_tol * r2:
        return _line_answer(q)
    u = q.y / norm_y
    l = float(np.dot(q.ell, u))
    C1, C2, tau, rho = heisenberg_solve(q.x, l, norm_y)
    params = ExpParams(C1, C2, 0.0, tau)
    maxwell = tau >= 2.0 * math.pi
    if maxwell:
        logger.warning("Endpoint %r is a Maxwell point: a circle of geodesics of length %.6g reaches it",
                       q, params.length)
    answer = GeodesicAnswer(GeodesicTag.INCN, T=params.length, K=params.K, R=Rotation.minimal(u),
                            params=params, maxwell=maxwell)
    return _with_residual(answer, q)


def _with_residual(answer: GeodesicAnswer, q: GroupPoint) -> GeodesicAnswer:
    residual = float(np.max(np.abs(answer.endpoint.as_array() - q.as_array())))
    return GeodesicAnswer(answer.branch, answer.T, answer.K, answer.R, answer.params, answer.direction,
                          answer.roots, answer.maxwell, residual, answer.tau_crit)


def connect(q: GroupPoint, tol: float = 1e-7, grid: SeedGrid = SeedGrid(),
            collinear_tol: float = COLLINEARITY_TOL, newton_tol: float = 1e-12) -> GeodesicAnswer:
    """
    Geodesic from the origin to q.

    Points of C_n go through the Heisenberg reduction (lines when y = 0);
    all others through invert_exp and recover_rotation.

    Raises:
        PreconditionError: q is the origin
        NoConvergence: the endpoint could not be reproduced within tol
        OutOfValidatedRange: propagated from invert_exp
    """
    if q.is_origin():
        raise PreconditionError("The origin is joined to itself by the constant curve")
    # collinearity is judged at unit homogeneous norm so tiny endpoints are not all in C_n
    unit = dilate(q, 1.0 / homogeneous_norm(invariants_of_point(q).as_array()))
    if in_cn(unit, collinear_tol):
        answer = _incn_answer(q, line_tol=collinear_tol)
    else:
        try:
            result = invert_exp(invariants_of_point(q), grid, newton_tol, collinear_tol)
        except CollinearTarget:
            answer = _incn_answer(q, line_tol=collinear_tol)
        else:
            p = result.params
            q_bar = representative_point(p.tau, p.canonical())
            R = recover_rotation(q, q_bar)
            answer = _with_residual(
                GeodesicAnswer(GeodesicTag.OFFCN, T=p.length, K=p.K, R=R, params=p,
                               roots=result.roots, tau_crit=result.tau_crit), q)
    scale = max(1.0, float(np.max(np.abs(q.as_array()))))
    if answer.residual > tol * scale:
        raise NoConvergence(f"Endpoint reproduced only to {answer.residual:.3e}")
    logger.info("Connected %r: branch=%s T=%.9g", q, answer.branch.value, answer.T)
    return answer


def connect_points(q1: GroupPoint, q2: GroupPoint, **kwargs) -> GeodesicAnswer:
    """Geodesic from q1 to q2; evaluate it with answer.point(t, start=q1)."""
    return connect(multiply(inverse(q1), q2), **kwargs)


@dataclass
class SphereSample:
    """Endpoints at t = 1 of unit-speed geodesics with the parameters that produced them."""
    params: np.ndarray
    points: np.ndarray
    columns: Tuple[str, ...] = COORD_LABELS
    metadata: dict = field(default_factory=dict)

    def projected(self) -> np.ndarray:
        idx = [COORD_LABELS.index(c) for c in self.columns]
        return self.points[:, idx]


def _parse_slice(slice_spec) -> Tuple[str, ...]:
    if slice_spec is None:
        return COORD_LABELS
    if isinstance(slice_spec, str):
        slice_spec = [s.strip() for s in slice_spec.split(",") if s.strip()]
    unknown = [s for s in slice_spec if s not in COORD_LABELS]
    if unknown or not slice_spec:
        raise PreconditionError(f"Unknown slice coordinates {unknown}; choose from {COORD_LABELS}")
    return tuple(slice_spec)


def sphere_sample(count: int, rng: np.random.Generator, stratum: str = "generic",
                  slice_spec=None, band: Optional[float] = None,
                  align: bool = False) -> SphereSample:
    """
    Points of the unit sub-Riemannian sphere.

    Parameters are drawn uniformly on the Euclidean sphere of R^7 (or of
    the stratum's subspace) and rescaled onto the unit level set.

    Args:
        count: number of draws
        rng: numpy random generator
        stratum: 'generic', 'line' (Kvec = 0) or 'incn' (C3 = C4 = 0)
        slice_spec: coordinates to emit, e.g. 'x,l1,y2'
        band: keep only points whose other coordinates are within band of 0
        align: rotate each point so that l is along e1 and y lies in the (e1, e2) plane
    """
    if count <= 0:
        raise PreconditionError("count must be positive")
    columns = _parse_slice(slice_spec)
    raw = rng.normal(size=(count, 7))
    if stratum == "line":
        raw[:, 4:] = 0.0
    elif stratum == "incn":
        raw[:, 2:4] = 0.0
    elif stratum != "generic":
        raise PreconditionError(f"Unknown stratum {stratum!r}")
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)

    params, points = [], []
    for row in raw:
        p = GeodesicParams(row[:4], row[4:])
        if not p.is_line and p.is_constant_control:
            continue
        p = normalize(p)
        q = geodesic_points(1.0, p)
        if align:
            R = canonical_rotation_of(GroupPoint.from_array(q))
            if R is not None:
                q = act_arrays(R.T, q)
        params.append(p.as_array())
        points.append(q)
    params, points = np.array(params).reshape(-1, 7), np.array(points).reshape(-1, 7)

    if band is not None:
        others = [i for i, c in enumerate(COORD_LABELS) if c not in columns]
        keep = np.all(np.abs(points[:, others]) <= band, axis=1)
        params, points = params[keep], points[keep]
    logger.debug("Sphere sample: %d of %d draws kept", len(points), count)
    return SphereSample(params, points, columns,
                        {"count": count, "stratum": stratum, "slice": ",".join(columns),
                         "band": band, "align": align})


def heisenberg_sphere(count: int) -> np.ndarray:
    """
    (x, l, y) on the unit Heisenberg sphere from the geodesic family.

    Geodesics of unit speed have (C1, C2) = (cos phi, sin phi)/|K|; the
    sphere is swept by K in [-2 pi, 2 pi] and phi in [0, 2 pi).
    """
    if count <= 0:
        raise PreconditionError("count must be positive")
    n = max(2, int(math.isqrt(count)))
    Ks = np.linspace(-2.0 * math.pi, 2.0 * math.pi, 2 * n + 1)
    phis = 2.0 * math.pi * np.arange(n) / n
    out = []
    for K in Ks:
        for phi in phis:
            if K == 0.0:
                out.append((math.cos(phi), math.sin(phi), 0.0))
                continue
            sign = math.copysign(1.0, K)
            point = heisenberg_geodesic(1.0, math.cos(phi) / abs(K), math.sin(phi) / abs(K), abs(K))
            out.append((point[0], point[1], sign * point[2]))
    return np.array(out)


def heisenberg_sphere_profile(r2) -> np.ndarray:
    """|y| on the unit Heisenberg sphere as a function of x^2 + l^2 in [0, 1]."""
    r2 = np.atleast_1d(np.asarray(r2, dtype=float))
    if np.any((r2 < 0.0) | (r2 > 1.0 + 1e-12)):
        raise PreconditionError("x^2 + l^2 on the unit sphere lies in [0, 1]")
    out = np.empty_like(r2)
    for i, value in enumerate(r2):
        if value >= 1.0:
            out[i] = 0.0
            continue
        if value <= 0.0:
            tau = 2.0 * math.pi
        else:
            # r(tau) = 2 sin(tau/2) / tau decreases from 1 to 0 on (0, 2 pi]
            tau = brentq(lambda t: (2.0 * math.sin(0.5 * t) / t) ** 2 - value,
                         1e-9, 2.0 * math.pi, xtol=1e-15)
        out[i] = 0.5 * float(tau_minus_sin(tau)) / (tau * tau)
    return out


def brute_force_profile(r2, samples: int = 200001) -> np.ndarray:
    """Same profile by dense evaluation of the geodesic family and interpolation."""
    taus = np.linspace(1e-6, 2.0 * math.pi, samples)
    radius2 = (2.0 * np.sin(0.5 * taus) / taus) ** 2
    height = 0.5 * tau_minus_sin(taus) / taus ** 2
    order = np.argsort(radius2)
    return np.interp(np.asarray(r2, dtype=float), radius2[order], height[order])


def sphere_to_heisenberg(points: np.ndarray) -> np.ndarray:
    """Project sphere points of C_n to (x, |l|, (l, y)/|l|), shape (n, 3)."""
    points = np.asarray(points, dtype=float)
    ell, y = points[:, 1:4], points[:, 4:7]
    norm_l = np.linalg.norm(ell, axis=1)
    safe = np.where(norm_l > 0, norm_l, 1.0)
    ly = np.einsum("ij,ij->i", ell, y) / safe
    return np.column_stack((points[:, 0], norm_l, np.where(norm_l > 0, ly, np.linalg.norm(y, axis=1))))


def sample_round_trip(rng: np.random.Generator, grid: SeedGrid = SeedGrid(),
                      fraction: Sequence[float] = (0.1, 0.8)) -> Tuple[ExpParams, float]:
    """Random unit-level ExpParams with tau inside fraction * first critical time."""
    while True:
        direction = rng.normal(size=3)
        direction[2] = abs(direction[2]) + 0.05
        direction /= np.linalg.norm(direction)
        crit = first_critical_time(*direction, grid.scan_max, grid.scan_step)
        crit = min(crit, grid.scan_max)
        tau = float(rng.uniform(*fraction)) * crit
        if tau > 0.05:
            return ExpParams(direction[0], direction[1], direction[2], tau), crit
