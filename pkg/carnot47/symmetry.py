"""
Symmetries of the (4,7) control system

SO(3) acts on N by rotating ell and y simultaneously and leaves x fixed.
This module holds that action, the infinitesimal symmetries (transvections
plus the so(3) isotropy fields), the fixed-point subgroup C_n, the
canonical representative of a geodesic orbit and the SO(3)-invariants of
the factor space N/SO(3).

The representative curve is obtained by integrating the base system, which
puts a factor 1/2 in front of both y-components. The invariant curve is
derived from it directly, with (tau - sin tau) in the y1 factor.

Author: carnot47
Created: 2026
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from .errors import DegenerateParams, LineBranch, PreconditionError
from .extremals import GeodesicParams
from .group_core import GroupPoint, frame_right, lie_bracket_fd, multiply

logger = logging.getLogger(__name__)

ROTATION_TOL = 1e-12
COLLINEARITY_TOL = 1e-9
E1 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True, eq=False)
class Rotation:
    """An element R of SO(3) stored as a 3x3 matrix."""
    matrix: np.ndarray

    def __post_init__(self):
        R = np.array(self.matrix, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(R)):
            raise PreconditionError("Rotation matrix must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ROTATION_TOL:
            raise PreconditionError("Rotation matrix is not orthogonal")
        if abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
            raise PreconditionError("Rotation matrix does not have determinant 1")
        R.flags.writeable = False
        object.__setattr__(self, "matrix", R)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        return cls(ScipyRotation.random(random_state=rng).as_matrix())

    @classmethod
    def about_axis(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise PreconditionError("Rotation axis must be non-zero")
        return cls(ScipyRotation.from_rotvec(axis / norm * angle).as_matrix())

    @classmethod
    def from_frame(cls, columns) -> "Rotation":
        """Rotation whose columns are the given orthonormal frame, re-orthonormalized."""
        q, r = np.linalg.qr(np.asarray(columns, dtype=float))
        q = q * np.sign(np.diag(r))
        return cls(q)

    @classmethod
    def minimal(cls, target) -> "Rotation":
        """Smallest-angle rotation taking e1 to the unit vector along ``target``."""
        u = np.asarray(target, dtype=float)
        u = u / np.linalg.norm(u)
        axis = np.cross(E1, u)
        sin_angle = np.linalg.norm(axis)
        cos_angle = float(np.dot(E1, u))
        if sin_angle < 1e-15:
            if cos_angle > 0:
                return cls.identity()
            return cls.about_axis([0.0, 0.0, 1.0], math.pi)
        return cls.about_axis(axis, math.atan2(sin_angle, cos_angle))

    @property
    def T(self) -> "Rotation":
        return Rotation(self.matrix.T)

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix)

    def isclose(self, other: "Rotation", atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol))

    def to_list(self):
        return self.matrix.tolist()


@dataclass(frozen=True, eq=False)
class SymmetryGenerator:
    """
    Infinitesimal symmetry: isotropy axis a plus transvection coefficients.

    The field is a1 v1 + a2 v2 + a3 v3 + sum_j translation[j] X_j where X_j
    are the right-invariant fields.
    """
    axis: np.ndarray = field(default_factory=lambda: np.zeros(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(7))

    def __post_init__(self):
        object.__setattr__(self, "axis", np.array(self.axis, dtype=float).reshape(3))
        object.__setattr__(self, "translation", np.array(self.translation, dtype=float).reshape(7))

    @classmethod
    def isotropy(cls, index: int) -> "SymmetryGenerator":
        """The generator v_index, index in 1..3."""
        axis = np.zeros(3)
        axis[index - 1] = 1.0
        return cls(axis=axis)


@dataclass(frozen=True, eq=False)
class CanonicalParams:
    """Parameters (C1, C2, C3bar, K) of the representative geodesic and its rotation."""
    C1: float
    C2: float
    c3bar: float
    K: float
    R: Rotation = field(default_factory=Rotation.identity)

    @property
    def rho2(self) -> float:
        return self.C1 * self.C1 + self.C2 * self.C2

    def level_residual(self) -> float:
        return self.K * self.K * (self.rho2 + self.c3bar * self.c3bar) - 1.0


@dataclass(frozen=True)
class InvariantTuple:
    """SO(3)-invariants x, (l,l), (l,y), (y,y) of a point of N."""
    x: float
    ll: float
    ly: float
    yy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.ll, self.ly, self.yy])

    @classmethod
    def from_array(cls, values) -> "InvariantTuple":
        x, ll, ly, yy = (float(v) for v in np.asarray(values, dtype=float).reshape(4))
        return cls(x, ll, ly, yy)

    def to_dict(self) -> Dict[str, float]:
        return {"x": self.x, "ll": self.ll, "ly": self.ly, "yy": self.yy}

    def gram(self) -> float:
        """(l,l)(y,y) - (l,y)^2, the squared norm of l x y."""
        return self.ll * self.yy - self.ly * self.ly

    def satisfies_cauchy_schwarz(self, tol: float = 1e-12) -> bool:
        return (self.ll >= -tol and self.yy >= -tol
                and self.ly * self.ly <= self.ll * self.yy + tol * max(1.0, self.ll * self.yy))


def act(R: Rotation, q: GroupPoint) -> GroupPoint:
    """(x, l, y) -> (x, R l, R y); an automorphism of N."""
    if not isinstance(R, Rotation):
        R = Rotation(R)
    return GroupPoint(q.x, R.apply(q.ell), R.apply(q.y))


def act_arrays(R: Rotation, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    out = points.copy()
    out[..., 1:4] = points[..., 1:4] @ R.matrix.T
    out[..., 4:7] = points[..., 4:7] @ R.matrix.T
    return out


def act_on_params(R: Rotation, p: GeodesicParams) -> GeodesicParams:
    """
    Parameters of the rotated geodesic: Kvec' = R Kvec and z2' = R z2.

    z2 = C3 (-K3, 0, K1) + C4 (-K2, K1, 0), so (C3', C4') is found by least
    squares; this needs K1' != 0.
    """
    if p.is_line:
        C = p.C.copy()
        C[1:] = R.apply(p.C[1:])
        return GeodesicParams(C, np.zeros(3))
    Kvec = R.apply(p.Kvec)
    K1, K2, K3 = Kvec
    basis = np.array([[-K3, 0.0, K1], [-K2, K1, 0.0]]).T
    target = R.apply(p.z2)
    (C3, C4), *_ = np.linalg.lstsq(basis, target, rcond=None)
    if np.linalg.norm(basis @ np.array([C3, C4]) - target) > 1e-9 * max(1.0, np.linalg.norm(target)):
        raise PreconditionError("Rotated z2 is not representable: K1' = 0")
    return GeodesicParams([p.C[0], p.C[1], C3, C4], Kvec)


def isotropy_field(axis, q: GroupPoint) -> np.ndarray:
    """a1 v1 + a2 v2 + a3 v3 at q; equals (0, l x a, y x a)."""
    axis = np.asarray(axis, dtype=float)
    out = np.zeros(7)
    out[1:4] = np.cross(q.ell, axis)
    out[4:7] = np.cross(q.y, axis)
    return out


def symmetry_field(g: SymmetryGenerator, q: GroupPoint) -> np.ndarray:
    """Coordinate components of the infinitesimal symmetry g at q."""
    return isotropy_field(g.axis, q) + g.translation @ frame_right(q)


# [v_i, v_j] = sign * v_k with [X, Y] = DY.X - DX.Y, under which [N0, Ni] = N0i.
# The group-action convention flips every sign.
SO3_BRACKETS = {(1, 2): (1.0, 3), (1, 3): (-1.0, 2), (2, 3): (1.0, 1)}


def so3_field(index: int):
    """v_index as a field on 7-arrays, for finite-difference brackets."""
    axis = SymmetryGenerator.isotropy(index).axis
    return lambda arr: isotropy_field(axis, GroupPoint.from_array(arr))


def so3_bracket_residual(q: GroupPoint, eps: float = 1e-5,
                         action_convention: bool = False) -> float:
    """
    Largest deviation of the finite-difference brackets of v1, v2, v3 from SO3_BRACKETS.

    With ``action_convention`` the table is checked with all signs flipped
    against -[X, Y].
    """
    worst = 0.0
    arr = q.as_array()
    for (i, j), (sign, k) in SO3_BRACKETS.items():
        got = lie_bracket_fd(so3_field(i), so3_field(j), arr, eps)
        if action_convention:
            got, sign = -got, -sign
        worst = max(worst, float(np.max(np.abs(got - sign * so3_field(k)(arr)))))
    return worst


def in_cn(q: GroupPoint, tol: float = COLLINEARITY_TOL) -> bool:
    """True iff l and y are collinear; l = 0 or y = 0 counts as collinear."""
    if tol <= 0:
        raise PreconditionError("Collinearity tolerance must be positive")
    cross = np.linalg.norm(np.cross(q.ell, q.y))
    scale = max(1.0, float(np.linalg.norm(q.ell) * np.linalg.norm(q.y)))
    return bool(cross <= tol * scale)


def fixed_point_set(axis, x: float, k: float, l: float) -> GroupPoint:
    """The point (x, k a, l a) fixed by rotations about a."""
    axis = np.asarray(axis, dtype=float)
    return GroupPoint(x, k * axis, l * axis)


def canonicalize(p: GeodesicParams) -> CanonicalParams:
    """
    Rotation R with R^T z1 = (K, 0, 0), R^T z2 = (0, C, 0) and the reduced parameters.

    Raises:
        LineBranch: K = 0
        DegenerateParams: C1 = C2 = 0
    """
    if p.is_line:
        raise LineBranch("K = 0: straight lines have no canonical form")
    if p.is_constant_control:
        raise DegenerateParams("C1 = C2 = 0 gives constant controls")
    z1, z2 = p.z1, p.z2
    K = float(np.linalg.norm(z1))
    C = float(np.linalg.norm(z2))
    if C > 1e-14 * max(1.0, K):
        e1 = z1 / K
        e2 = z2 / C
        R = Rotation.from_frame(np.column_stack((e1, e2, np.cross(e1, e2))))
    else:
        C = 0.0
        R = Rotation.minimal(z1)
    return CanonicalParams(float(p.C[0]), float(p.C[1]), C / K, K, R)


def _y_factor(tau, C1: float, C2: float) -> np.ndarray:
    """C1 (2 sin - tau cos - tau) + C2 (2 - 2 cos - tau sin)."""
    s, c = np.sin(tau), np.cos(tau)
    return C1 * (2.0 * s - tau * c - tau) + C2 * (2.0 - 2.0 * c - tau * s)


def representative_points(tau, cp: CanonicalParams) -> np.ndarray:
    """Vectorized representative_point; coordinates of shape (..., 7)."""
    tau = np.asarray(tau, dtype=float)
    C1, C2, c3 = cp.C1, cp.C2, cp.c3bar
    s, c = np.sin(tau), np.cos(tau)
    out = np.zeros(tau.shape + (7,))
    out[..., 0] = C1 * (c - 1.0) + C2 * s
    out[..., 1] = C1 * s + C2 * (1.0 - c)
    out[..., 2] = c3 * tau
    out[..., 4] = 0.5 * cp.rho2 * (tau - s)
    out[..., 5] = 0.5 * c3 * _y_factor(tau, C1, C2)
    return out


def representative_point(tau: float, cp: CanonicalParams) -> GroupPoint:
    """Point of the canonical representative at reduced time tau = K t."""
    return GroupPoint.from_array(representative_points(float(tau), cp))


def invariants_of_point(q: GroupPoint) -> InvariantTuple:
    return InvariantTuple(q.x, float(np.dot(q.ell, q.ell)),
                          float(np.dot(q.ell, q.y)), float(np.dot(q.y, q.y)))


def invariant_components(C1, C2, c3, tau) -> np.ndarray:
    """Invariant curve on broadcast arrays; returns shape (..., 4)."""
    C1, C2, c3, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (C1, C2, c3, tau)))
    s, c = np.sin(tau), np.cos(tau)
    x = C1 * (c - 1.0) + C2 * s
    A = C1 * s + C2 * (1.0 - c)
    B = c3 * tau
    Y1 = 0.5 * (C1 * C1 + C2 * C2) * (tau - s)
    Y2 = 0.5 * c3 * _y_factor(tau, C1, C2)
    return np.stack((x, A * A + B * B, A * Y1 + B * Y2, Y1 * Y1 + Y2 * Y2), axis=-1)


def invariants_curve(tau: float, cp: CanonicalParams) -> InvariantTuple:
    """Invariants of representative_point(tau, cp) in closed form."""
    return InvariantTuple.from_array(invariant_components(cp.C1, cp.C2, cp.c3bar, tau))


def canonical_rotation_of(q: GroupPoint) -> Optional[Rotation]:
    """Rotation bringing l to the e1 axis and y into the (e1, e2) half plane, if defined."""
    norm_l = np.linalg.norm(q.ell)
    if norm_l == 0.0:
        return None
    e1 = q.ell / norm_l
    perp = q.y - np.dot(q.y, e1) * e1
    norm_p = np.linalg.norm(perp)
    if norm_p == 0.0:
        return Rotation.minimal(e1)
    e2 = perp / norm_p
    return Rotation.from_frame(np.column_stack((e1, e2, np.cross(e1, e2))))


def subgroup_closed(a: GroupPoint, b: GroupPoint, tol: float = COLLINEARITY_TOL) -> bool:
    """True when a, b and a.b all lie in C_n."""
    return in_cn(a, tol) and in_cn(b, tol) and in_cn(multiply(a, b), tol)
