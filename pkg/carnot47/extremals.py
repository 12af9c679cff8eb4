"""
Normal Pontryagin extremals of the (4,7) control problem

Closed-form fiber and base solutions together with a fixed-step classical
Runge-Kutta integrator of the Hamiltonian system. The integrator is kept
independent of the closed forms so it can serve as their oracle.

Author: carnot47
Created: 2026
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LineBranch, PreconditionError
from .group_core import ALGEBRA, GroupPoint, frame_left, multiply

logger = logging.getLogger(__name__)

# |Kvec| below this selects the straight-line branch
K_ZERO = 1e-12
DEFAULT_STEP = 1e-3

TRAJECTORY_COLUMNS = ("t", "x", "l1", "l2", "l3", "y1", "y2", "y3",
                      "h0", "h1", "h2", "h3", "w1", "w2", "w3")


@dataclass(frozen=True, eq=False)
class CotangentState:
    """Left-invariant fiber coordinates h = (h0..h3), w = (w1..w3)."""
    h: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h", np.array(self.h, dtype=float).reshape(4))
        object.__setattr__(self, "w", np.array(self.w, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class FullState:
    """A point of T*N: base point q and covector lam."""
    q: GroupPoint
    lam: CotangentState

    @classmethod
    def from_array(cls, values) -> "FullState":
        arr = np.asarray(values, dtype=float).reshape(14)
        return cls(GroupPoint.from_array(arr[:7]), CotangentState(arr[7:11], arr[11:14]))

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.q.as_array(), self.lam.h, self.lam.w))


@dataclass(frozen=True, eq=False)
class GeodesicParams:
    """
    Constants (C1, C2, C3, C4) and (K1, K2, K3) of a geodesic from the origin.

    For K = |Kvec| = 0 the geodesic is the line t -> (C1 t, C2 t, C3 t, C4 t, 0, 0, 0).
    """
    C: np.ndarray
    Kvec: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=float).reshape(4)
        Kvec = np.array(self.Kvec, dtype=float).reshape(3)
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(Kvec))):
            raise PreconditionError("Geodesic parameters must be finite")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Kvec", Kvec)

    @classmethod
    def from_sequence(cls, values) -> "GeodesicParams":
        values = [float(v) for v in values]
        if len(values) != 7:
            raise PreconditionError(f"Expected 7 parameters C1..C4,K1..K3, got {len(values)}")
        return cls(values[:4], values[4:])

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.C, self.Kvec))

    @property
    def K(self) -> float:
        return float(np.linalg.norm(self.Kvec))

    @property
    def is_line(self) -> bool:
        return self.K < K_ZERO

    @property
    def z1(self) -> np.ndarray:
        return self.Kvec.copy()

    @property
    def z2(self) -> np.ndarray:
        C3, C4 = self.C[2], self.C[3]
        K1, K2, K3 = self.Kvec
        return np.array([-C3 * K3 - C4 * K2, C4 * K1, C3 * K1])

    @property
    def is_constant_control(self) -> bool:
        """C1 = C2 = 0 with K > 0: h is constant and irrelevant as a control."""
        return not self.is_line and self.C[0] == 0.0 and self.C[1] == 0.0

    def __repr__(self) -> str:
        return f"GeodesicParams(C={self.C.tolist()!r}, Kvec={self.Kvec.tolist()!r})"


def hamiltonian(s: CotangentState) -> float:
    return 0.5 * float(np.dot(s.h, s.h))


def _rhs(state: np.ndarray) -> np.ndarray:
    """Hamiltonian vector field on arrays of shape (..., 14)."""
    x = state[..., 0:1]
    ell = state[..., 1:4]
    h = state[..., 7:11]
    w = state[..., 11:14]
    h0 = h[..., 0:1]
    hv = h[..., 1:4]
    out = np.zeros_like(state)
    out[..., 0] = h[..., 0]
    out[..., 1:4] = hv
    out[..., 4:7] = 0.5 * (x * hv - h0 * ell)
    # hdot_j = -sum_{l,k} c_{jl}^k h_l w_k over the first layer
    c = ALGEBRA.structure_constants[:4, :4, 4:]
    out[..., 7:11] = -np.einsum("jlk,...l,...k->...j", c, h, w)
    return out


def ode_rhs(s: FullState) -> np.ndarray:
    """
    Derivative of the full state under the normal Hamiltonian flow.

    Returns:
        14-array ordered as FullState.as_array(); the w block is exactly 0
    """
    return _rhs(s.as_array())


def omega_matrix(w) -> np.ndarray:
    """The matrix Omega_w with hdot = -Omega_w h."""
    K1, K2, K3 = np.asarray(w, dtype=float).reshape(3)
    return np.array([
        [0.0, K1, K2, K3],
        [-K1, 0.0, 0.0, 0.0],
        [-K2, 0.0, 0.0, 0.0],
        [-K3, 0.0, 0.0, 0.0],
    ])


@dataclass
class Trajectory:
    """Sampled states: times (n,) and states (n, 14) or (n, batch, 14)."""
    times: np.ndarray
    states: np.ndarray

    def points(self) -> np.ndarray:
        return self.states[..., :7]

    def rows(self) -> np.ndarray:
        """Rows in TRAJECTORY_COLUMNS order (unbatched trajectories only)."""
        return np.column_stack((self.times, self.states))


def integrate_batch(initial: np.ndarray, T: float, step: float = DEFAULT_STEP,
                    sample_every: int = 1) -> Trajectory:
    """
    Classical RK4 for a batch of initial states of shape (..., 14).

    The step is shrunk to T / ceil(T / step) so that the last sample is at T.
    Only the 11 moving components are integrated; w is carried unchanged.
    """
    initial = np.asarray(initial, dtype=float)
    if not np.all(np.isfinite(initial)) or not math.isfinite(T) or not math.isfinite(step):
        raise PreconditionError("integrate_numeric needs finite inputs")
    if T <= 0 or step <= 0:
        raise PreconditionError(f"Need T > 0 and step > 0, got T={T}, step={step}")
    if sample_every < 1:
        raise PreconditionError("sample_every must be a positive integer")

    n_steps = max(1, int(math.ceil(T / step - 1e-9)))
    dt = T / n_steps
    logger.debug("RK4: %d steps of %.3e up to T=%.3f", n_steps, dt, T)

    state = initial.copy()
    w = initial[..., 11:14].copy()
    times = [0.0]
    samples = [state.copy()]

    def f(s):
        return _rhs(s)[..., :11]

    for k in range(1, n_steps + 1):
        k1 = f(state)
        k2 = f(_with_moving(state, state[..., :11] + 0.5 * dt * k1))
        k3 = f(_with_moving(state, state[..., :11] + 0.5 * dt * k2))
        k4 = f(_with_moving(state, state[..., :11] + dt * k3))
        moving = state[..., :11] + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        state = np.concatenate((moving, w), axis=-1)
        if k % sample_every == 0 or k == n_steps:
            times.append(k * dt)
            samples.append(state.copy())

    return Trajectory(np.asarray(times), np.stack(samples))


def _with_moving(state: np.ndarray, moving: np.ndarray) -> np.ndarray:
    return np.concatenate((moving, state[..., 11:14]), axis=-1)


def integrate_numeric(initial: FullState, T: float, step: float = DEFAULT_STEP,
                      sample_every: int = 1) -> Trajectory:
    """RK4 trajectory of ode_rhs starting at ``initial``."""
    return integrate_batch(initial.as_array(), T, step, sample_every)


def initial_state(p: GeodesicParams) -> FullState:
    """Full state at t = 0 of the extremal described by p (q(0) = origin)."""
    if p.is_line:
        h = p.C.copy()
    else:
        h = fiber_solution(0.0, p)
    return FullState(GroupPoint.origin(), CotangentState(h, p.Kvec))


def fiber_solution(t, p: GeodesicParams) -> np.ndarray:
    """
    h(t) for non-zero K.

    Args:
        t: scalar or array of times
        p: geodesic parameters

    Returns:
        Array of shape (..., 4)

    Raises:
        LineBranch: K = 0, where h(t) = h(0) is constant
    """
    if p.is_line:
        raise LineBranch("K = 0: use the constant solution h(t) = h(0)")
    K = p.K
    C1, C2 = p.C[0], p.C[1]
    s = K * np.asarray(t, dtype=float)
    a = C1 * np.cos(s) + C2 * np.sin(s)
    h0 = K * (-C1 * np.sin(s) + C2 * np.cos(s))
    hv = a[..., None] * p.Kvec + p.z2
    return np.concatenate((h0[..., None], hv), axis=-1)


def controls(t, p: GeodesicParams) -> np.ndarray:
    """Optimal controls u_j(t) = h_j(t), lines included."""
    if p.is_line:
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(p.C, t.shape + (4,)).copy()
    return fiber_solution(t, p)


def geodesic_points(t, p: GeodesicParams) -> np.ndarray:
    """Vectorized geodesic_point; returns coordinates of shape (..., 7)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (7,))
    C1, C2 = p.C[0], p.C[1]
    if p.is_line:
        out[..., 0:4] = t[..., None] * p.C
        return out

    K = p.K
    z1, z2 = p.z1, p.z2
    s = K * t
    sin, cos = np.sin(s), np.cos(s)
    out[..., 0] = C1 * cos + C2 * sin - C1
    out[..., 1:4] = ((C1 * sin - C2 * cos + C2) / K)[..., None] * z1 + t[..., None] * z2
    rho2 = C1 * C1 + C2 * C2
    coef1 = rho2 * (s - sin) / (2.0 * K)
    coef2 = ((2.0 * C1 - C2 * s) * sin - (C1 * s + 2.0 * C2) * cos + 2.0 * C2 - s * C1) / (2.0 * K)
    out[..., 4:7] = coef1[..., None] * z1 + coef2[..., None] * z2
    return out


def geodesic_point(t: float, p: GeodesicParams) -> GroupPoint:
    """Point at time t of the geodesic from the origin with parameters p."""
    if p.is_constant_control:
        logger.debug("Evaluating constant-control family C1 = C2 = 0")
    return GroupPoint.from_array(geodesic_points(float(t), p))


def geodesic_from(q0: GroupPoint, t: float, p: GeodesicParams) -> GroupPoint:
    """The same geodesic left-translated to start at q0."""
    return multiply(q0, geodesic_point(t, p))


def level_lhs(p: GeodesicParams) -> float:
    C = p.C
    if p.is_line:
        return float(np.dot(C, C))
    C1, C2, C3, C4 = C
    K1, K2, K3 = p.Kvec
    K = p.K
    return float(K * K * (C1 * C1 + C2 * C2) + (C3 * K3 + C4 * K2) ** 2
                 + C4 * C4 * K1 * K1 + C3 * C3 * K1 * K1)


def level_residual(p: GeodesicParams) -> float:
    """Left hand side of the unit level-set equation minus one."""
    if not np.any(p.as_array()):
        raise PreconditionError("All-zero parameters describe no curve")
    return level_lhs(p) - 1.0


def normalize(p: GeodesicParams) -> GeodesicParams:
    """
    Rescale C so that the level residual vanishes; Kvec is kept.

    Kvec fixes the time scale tau = K t, and the level equation is homogeneous
    of degree two in C at fixed Kvec.
    """
    lhs = level_residual(p) + 1.0
    if lhs <= 0.0:
        raise PreconditionError(f"Cannot normalize {p!r}: level-set left hand side is 0")
    return GeodesicParams(p.C / math.sqrt(lhs), p.Kvec)


def closed_form_trajectory(p: GeodesicParams, t_max: float, samples: int) -> Trajectory:
    """Closed-form states sampled on ``samples`` equally spaced times in [0, t_max]."""
    if samples < 2 or t_max <= 0:
        raise PreconditionError("Need t_max > 0 and at least two samples")
    times = np.linspace(0.0, t_max, samples)
    h = controls(times, p)
    w = np.broadcast_to(p.Kvec, (samples, 3))
    states = np.concatenate((geodesic_points(times, p), h, w), axis=1)
    return Trajectory(times, states)


def _quadrature(values_at, T: float, step: float) -> float:
    # RK4 on a right-hand side independent of the state is Simpson's rule
    n = max(1, int(math.ceil(T / step - 1e-9)))
    dt = T / n
    t = np.arange(n) * dt
    f0 = values_at(t)
    fm = values_at(t + 0.5 * dt)
    f1 = values_at(t + dt)
    return float(np.sum(dt / 6.0 * (f0 + 4.0 * fm + f1)))


def arclength(p: GeodesicParams, T: float, step: float = DEFAULT_STEP) -> float:
    """Sub-Riemannian length of the geodesic on [0, T], i.e. the integral of |h|."""
    return _quadrature(lambda t: np.linalg.norm(controls(t, p), axis=-1), T, step)


def control_cost(p: GeodesicParams, T: float, step: float = DEFAULT_STEP) -> float:
    """Cost functional 1/2 int_0^T |u|^2 dt of the optimal controls."""
    return _quadrature(lambda t: 0.5 * np.sum(controls(t, p) ** 2, axis=-1), T, step)


def velocity_from_controls(t: float, p: GeodesicParams) -> np.ndarray:
    """sum_j h_j(t) N_j(q(t)) in coordinates."""
    h = controls(t, p)
    frame = frame_left(geodesic_point(t, p))
    return h @ frame[:4]


def random_params(rng: np.random.Generator, kind: str = "offcn",
                  k_max: Optional[float] = 2.0) -> GeodesicParams:
    """
    Random unit-level parameters of a given class.

    Args:
        rng: numpy random generator
        kind: 'line', 'incn' (z2 = 0) or 'offcn'
        k_max: K is drawn uniformly from (0.2, k_max]
    """
    if kind == "line":
        C = rng.normal(size=4)
        return GeodesicParams(C / np.linalg.norm(C), np.zeros(3))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    Kvec = rng.uniform(0.2, k_max) * direction
    C = rng.normal(size=4)
    if kind == "incn":
        C[2:] = 0.0
    elif kind != "offcn":
        raise PreconditionError(f"Unknown parameter class {kind!r}")
    return normalize(GeodesicParams(C, Kvec))
