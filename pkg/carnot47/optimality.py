"""
Optimality of geodesics and the fixed-point subgroup C_n

A geodesic with canonical parameters (C1, C2, C3bar) meets C_n at reduced
time tau exactly when l1 y2 - l2 y1 of its representative vanishes. That
determinant is C3bar/2 times a quadratic form in (C1, C2) whose
discriminant is negative for all tau > 0, so geodesics with C3bar != 0
never enter C_n while those with C3bar = 0 stay inside it. The latter
reduce to Heisenberg geodesics and lose optimality at tau = 2 pi, where the
whole circle of (C1, C2) with the same radius meets at one vertical point.

Near tau = 0 every quantity here is a difference of O(1) terms cancelling
to high order, so power series are used below SERIES_CUTOFF.

Author: carnot47
Created: 2026
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .errors import LineBranch, PreconditionError, TheoremViolation
from .extremals import GeodesicParams, level_residual
from .group_core import GroupPoint
from .symmetry import (CanonicalParams, Rotation, act, canonicalize, in_cn,
                       representative_points)

logger = logging.getLogger(__name__)

SERIES_CUTOFF = 2.0
_N_TERMS = 30
_N = np.arange(_N_TERMS, dtype=float)
_FACT = np.array([math.factorial(k) for k in range(2 * _N_TERMS + 8)], dtype=float)

DEFAULT_TAU_MAX = 50.0
DEFAULT_TAU_STEP = 1e-3


class GeodesicTag(str, Enum):
    LINE = "line"
    INCN = "incn"
    OFFCN = "offcn"


@dataclass(frozen=True)
class GeodesicClass:
    """
    Classification result.

    cut_time is +inf for lines, 2 pi / K inside C_n and None off C_n,
    where no closed form is known.
    """
    tag: GeodesicTag
    cut_time: Optional[float] = None
    canonical: Optional[CanonicalParams] = None
    min_abs_det: Optional[float] = None

    def to_dict(self) -> dict:
        data = {"class": self.tag.value, "cut_time": self.cut_time}
        if self.canonical is not None:
            data["canonical"] = {
                "C1": self.canonical.C1, "C2": self.canonical.C2,
                "C3bar": self.canonical.c3bar, "K": self.canonical.K,
                "R": self.canonical.R.to_list(),
            }
        if self.min_abs_det is not None:
            data["min_abs_det"] = self.min_abs_det
        return data


@dataclass(frozen=True)
class HeisenbergPoint:
    """Point (x, l, y) of the Heisenberg group H3."""
    x: float
    l: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.l, self.y])


def _series(tau, coeffs_of_n, power_of_n) -> np.ndarray:
    """sum_n coeffs[n] * tau^power[n] evaluated on an array of tau."""
    tau = np.asarray(tau, dtype=float)
    return np.sum(coeffs_of_n * tau[..., None] ** power_of_n, axis=-1)


def _small(tau, series_fn, closed_fn) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    flat = np.atleast_1d(tau)
    small = np.abs(flat) < SERIES_CUTOFF
    out = np.empty_like(flat)
    out[small] = series_fn(flat[small])
    out[~small] = closed_fn(flat[~small])
    return out.reshape(tau.shape)


# tau - sin tau = sum_{n>=1} (-1)^(n+1) tau^(2n+1) / (2n+1)!
_TMS_POW = 2 * _N + 3
_TMS_COEF = np.array([(-1.0) ** (k + 2) / _FACT[2 * k + 3] for k in range(_N_TERMS)])

# f = sum_{n>=3} (-1)^(n+1) 2(n-2) tau^(2n) / (2n)!
_F_POW = 2 * (_N + 3)
_F_COEF = np.array([(-1.0) ** (k + 4) * 2.0 * (k + 1) / _FACT[2 * k + 6] for k in range(_N_TERMS - 1)] + [0.0])

# f' = sum_{n>=3} (-1)^(n+1) 2(n-2) tau^(2n-1) / (2n-1)!
_FD_POW = 2 * (_N + 3) - 1
_FD_COEF = np.array([(-1.0) ** (k + 4) * 2.0 * (k + 1) / _FACT[2 * k + 5] for k in range(_N_TERMS - 1)] + [0.0])

# d11 = sum_{n>=3} (-1)^n 2 4^(n-1) (n-2) tau^(2n) / (2n)!
_D11_COEF = np.array([(-1.0) ** (k + 3) * 2.0 * 4.0 ** (k + 2) * (k + 1) / _FACT[2 * k + 6]
                      for k in range(_N_TERMS - 1)] + [0.0])

# d12 = -sin tau * g, g = 2 cos - 2 + tau sin = sum_{n>=2} (-1)^(n+1) 2(n-1) tau^(2n) / (2n)!
_G_POW = 2 * (_N + 2)
_G_COEF = np.array([(-1.0) ** (k + 3) * 2.0 * (k + 1) / _FACT[2 * k + 4] for k in range(_N_TERMS - 1)] + [0.0])

# d22 = sum_{n>=2} (-1)^n (4^(n-1) (4 - 2n) - 4) tau^(2n) / (2n)!
_D22_POW = 2 * (_N + 2)
_D22_COEF = np.array([(-1.0) ** (k + 2) * (4.0 ** (k + 1) * (4.0 - 2.0 * (k + 2)) - 4.0) / _FACT[2 * k + 4]
                      for k in range(_N_TERMS - 1)] + [0.0])


def tau_minus_sin(tau) -> np.ndarray:
    return _small(tau, lambda t: _series(t, _TMS_COEF, _TMS_POW), lambda t: t - np.sin(t))


def det_coeffs(tau) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Coefficients of the quadratic form d11 C1^2 + 2 d12 C1 C2 + d22 C2^2.

    d11 = -tau^2 - tau sin cos - 2 cos^2 + 2
    d12 = -sin (2 cos - 2 + tau sin)
    d22 = 2 cos^2 + tau cos sin - 4 cos - tau^2 + 2
    """
    tau = np.asarray(tau, dtype=float)

    def d11_closed(t):
        s, c = np.sin(t), np.cos(t)
        return -t * t - t * s * c - 2.0 * c * c + 2.0

    def g_closed(t):
        return 2.0 * np.cos(t) - 2.0 + t * np.sin(t)

    def d22_closed(t):
        s, c = np.sin(t), np.cos(t)
        return 2.0 * c * c + t * c * s - 4.0 * c - t * t + 2.0

    d11 = _small(tau, lambda t: _series(t, _D11_COEF, _F_POW), d11_closed)
    d12 = -np.sin(tau) * _small(tau, lambda t: _series(t, _G_COEF, _G_POW), g_closed)
    d22 = _small(tau, lambda t: _series(t, _D22_COEF, _D22_POW), d22_closed)
    return d11, d12, d22


def collinearity_det(tau, cp: CanonicalParams) -> np.ndarray:
    """l1 y2 - l2 y1 of the representative at tau, as C3bar/2 times the quadratic form."""
    d11, d12, d22 = det_coeffs(tau)
    C1, C2 = cp.C1, cp.C2
    return 0.5 * cp.c3bar * (d11 * C1 * C1 + 2.0 * d12 * C1 * C2 + d22 * C2 * C2)


def collinearity_det_direct(tau, cp: CanonicalParams) -> np.ndarray:
    """l1 y2 - l2 y1 evaluated on representative_point."""
    pts = representative_points(tau, cp)
    return pts[..., 1] * pts[..., 5] - pts[..., 2] * pts[..., 4]


def f_value(tau) -> np.ndarray:
    """f(tau) = tau^2 + tau sin tau + 4 cos tau - 4."""
    return _small(tau, lambda t: _series(t, _F_COEF, _F_POW),
                  lambda t: t * t + t * np.sin(t) + 4.0 * np.cos(t) - 4.0)


def discriminant(tau) -> np.ndarray:
    """d = 4 (d12^2 - d11 d22) = -4 tau (tau - sin tau) f(tau)."""
    tau = np.asarray(tau, dtype=float)
    return -4.0 * tau * tau_minus_sin(tau) * f_value(tau)


def f_and_bounds(tau):
    """
    f together with its Taylor lower bound -tau^6 (tau^2 - 14)/5040 and the bound tau^2 - tau - 8.

    Raises:
        PreconditionError: tau <= 0
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise PreconditionError("f_and_bounds needs tau > 0")
    local = -tau ** 6 * (tau * tau - 14.0) / 5040.0
    return f_value(tau), local, tau * tau - tau - 8.0


def f_derivative(tau) -> np.ndarray:
    """f'(tau) = (2 + cos tau)(tau - 3 sin tau / (2 + cos tau))."""
    def closed(t):
        c = np.cos(t)
        return (2.0 + c) * (t - 3.0 * np.sin(t) / (2.0 + c))
    return _small(tau, lambda t: _series(t, _FD_COEF, _FD_POW), closed)


def tau_grid(tau_max: float = DEFAULT_TAU_MAX, step: float = DEFAULT_TAU_STEP) -> np.ndarray:
    """Grid of the open interval (0, tau_max]; 0 is never included."""
    if tau_max <= 0 or step <= 0:
        raise PreconditionError("Need tau_max > 0 and step > 0")
    n = max(1, int(round(tau_max / step)))
    return np.linspace(tau_max / n, tau_max, n)


def cut_time(cp: CanonicalParams, tol: float = 1e-9) -> float:
    """
    Cut time 2 pi / K of a geodesic inside C_n (equal to 2 pi sqrt(C1^2 + C2^2) on the unit level).

    Raises:
        PreconditionError: C3bar != 0 or C1 = C2 = 0
    """
    if abs(cp.c3bar) > tol:
        raise PreconditionError(f"No closed-form cut time off C_n (C3bar = {cp.c3bar:g})")
    if cp.rho2 == 0.0:
        raise PreconditionError("C1 = C2 = 0 has no cut time")
    return 2.0 * math.pi / cp.K


def cut_endpoint(cp: CanonicalParams) -> GroupPoint:
    """Endpoint at the cut time; lies in the vertical set {(0, 0, y)}."""
    pts = representative_points(2.0 * math.pi, cp)
    return act(cp.R, GroupPoint.from_array(pts))


def maxwell_family(radius: float, count: int, R: Optional[Rotation] = None) -> List[CanonicalParams]:
    """
    ``count`` unit-level geodesics in C_n with C1^2 + C2^2 = radius^2.

    They are distinct curves of equal length that all reach the vertical
    point (0, 0, pi radius^2 R e1) at the common cut time 2 pi radius.
    """
    if radius <= 0 or count < 1:
        raise PreconditionError("maxwell_family needs radius > 0 and count >= 1")
    R = R or Rotation.identity()
    angles = 2.0 * math.pi * np.arange(count) / count
    return [CanonicalParams(radius * math.cos(a), radius * math.sin(a), 0.0, 1.0 / radius, R)
            for a in angles]


def classify(p: GeodesicParams, tol: float = 1e-9, tau_max: float = DEFAULT_TAU_MAX,
             tau_step: float = DEFAULT_TAU_STEP) -> GeodesicClass:
    """
    Line, in C_n (with cut time) or off C_n.

    For off-C_n geodesics the collinearity determinant is scanned on
    (0, tau_max]; it must keep the strict sign of -C3bar there.

    Raises:
        PreconditionError: level residual above tol
        DegenerateParams: C1 = C2 = 0
        TheoremViolation: the determinant vanishes or changes sign on the grid
    """
    residual = level_residual(p)
    if abs(residual) > tol:
        raise PreconditionError(f"Parameters are off the unit level set (residual {residual:.3e})")
    if p.is_line:
        return GeodesicClass(GeodesicTag.LINE, cut_time=math.inf)

    cp = canonicalize(p)
    if cp.c3bar <= tol:
        return GeodesicClass(GeodesicTag.INCN, cut_time=cut_time(cp, tol), canonical=cp)

    taus = tau_grid(tau_max, tau_step)
    dets = collinearity_det(taus, cp)
    if not np.all(dets < 0.0):
        bad = taus[np.argmax(dets >= 0.0)]
        raise TheoremViolation(f"Collinearity determinant lost its sign at tau = {bad:.6g} for {p!r}")
    min_abs = float(np.min(np.abs(dets)))
    logger.debug("OffCn geodesic, min |det| = %.3e on (0, %g]", min_abs, tau_max)
    return GeodesicClass(GeodesicTag.OFFCN, canonical=cp, min_abs_det=min_abs)


def heisenberg_project(q: GroupPoint, tol: float = 1e-9) -> HeisenbergPoint:
    """
    (x, |l|, lam |l|) for q = (x, l, lam l) in C_n.

    lam is the least-squares ratio (l, y)/(l, l); for l = 0 the point is (x, 0, |y|).

    Raises:
        PreconditionError: q not in C_n
    """
    if not in_cn(q, tol):
        raise PreconditionError(f"{q!r} is not in C_n")
    norm_l = float(np.linalg.norm(q.ell))
    if norm_l == 0.0:
        return HeisenbergPoint(q.x, 0.0, float(np.linalg.norm(q.y)))
    lam = float(np.dot(q.ell, q.y)) / (norm_l * norm_l)
    return HeisenbergPoint(q.x, norm_l, lam * norm_l)


def heisenberg_geodesic(t, C1: float, C2: float, K: float = 1.0) -> np.ndarray:
    """
    Heisenberg geodesic through the origin, shape (..., 3) for (x, l, y).

    x = C1 (cos Kt - 1) + C2 sin Kt, l = C1 sin Kt + C2 (1 - cos Kt),
    y = (C1^2 + C2^2)(Kt - sin Kt) / 2.
    """
    s = K * np.asarray(t, dtype=float)
    sin, cos = np.sin(s), np.cos(s)
    return np.stack((C1 * (cos - 1.0) + C2 * sin,
                     C1 * sin + C2 * (1.0 - cos),
                     0.5 * (C1 * C1 + C2 * C2) * tau_minus_sin(s)), axis=-1)


def heisenberg_frame(point) -> np.ndarray:
    """Rows N0 = d_x - (l/2) d_y and N1 = d_l + (x/2) d_y at (x, l, y)."""
    x, l, _ = np.asarray(point, dtype=float).reshape(3)
    return np.array([[1.0, 0.0, -0.5 * l], [0.0, 1.0, 0.5 * x]])


def in_cn_params(p: GeodesicParams, tol: float = 1e-9) -> bool:
    """True when the whole geodesic lies in C_n (z2 = 0)."""
    if p.is_line:
        raise LineBranch("Lines are classified separately")
    return bool(np.linalg.norm(p.z2) <= tol * max(1.0, p.K))
