"""
Arithmetic of the Carnot group N with growth vector (4,7)

Points are kept in global exponential coordinates (x, l1, l2, l3, y1, y2, y3).
The Lie algebra has the ordered basis (N0, N1, N2, N3, N01, N02, N03) whose
only non-trivial brackets are [N0, Ni] = N0i.

Author: carnot47
Created: 2026
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .errors import PreconditionError

logger = logging.getLogger(__name__)

FRAME_LABELS = ("N0", "N1", "N2", "N3", "N01", "N02", "N03")
COORD_LABELS = ("x", "l1", "l2", "l3", "y1", "y2", "y3")
DIM = 7


def _frozen(values, size: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(size)
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} must be finite, got {arr.tolist()}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point (x, ell, y) of N identified with R^7."""
    x: float
    ell: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.x):
            raise PreconditionError(f"x must be finite, got {self.x}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "ell", _frozen(self.ell, 3, "ell"))
        object.__setattr__(self, "y", _frozen(self.y, 3, "y"))

    @classmethod
    def origin(cls) -> "GroupPoint":
        return cls(0.0, np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, values) -> "GroupPoint":
        arr = np.asarray(values, dtype=float).reshape(DIM)
        return cls(arr[0], arr[1:4], arr[4:7])

    @classmethod
    def from_dict(cls, data: Dict) -> "GroupPoint":
        try:
            return cls(data["x"], data["ell"], data["y"])
        except (KeyError, TypeError, ValueError) as e:
            raise PreconditionError(f"Malformed group point {data!r}: {e}") from None

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.x], self.ell, self.y))

    def to_dict(self) -> Dict:
        return {"x": self.x, "ell": self.ell.tolist(), "y": self.y.tolist()}

    def is_origin(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.as_array()) <= atol))

    def isclose(self, other: "GroupPoint", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"GroupPoint(x={self.x!r}, ell={self.ell.tolist()!r}, y={self.y.tolist()!r})"


def multiply(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    """Group law: y-part is y + y~ + (x l~ - x~ l) / 2."""
    return GroupPoint(
        a.x + b.x,
        a.ell + b.ell,
        a.y + b.y + 0.5 * (a.x * b.ell - b.x * a.ell),
    )


def inverse(a: GroupPoint) -> GroupPoint:
    # the half terms cancel by bilinearity, so the inverse is plain negation
    return GroupPoint(-a.x, -a.ell, -a.y)


def dilate(a: GroupPoint, lam: float) -> GroupPoint:
    """Dilation (x, l, y) -> (lam x, lam l, lam^2 y); an automorphism scaling lengths by lam."""
    return GroupPoint(lam * a.x, lam * a.ell, lam * lam * a.y)


def multiply_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized group law on arrays of shape (..., 7)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = a + b
    out[..., 4:7] += 0.5 * (a[..., :1] * b[..., 1:4] - b[..., :1] * a[..., 1:4])
    return out


def frame_left(q: GroupPoint) -> np.ndarray:
    """
    Coordinate components of the left-invariant frame at q.

    Returns:
        7x7 array; row j holds the components of FRAME_LABELS[j]
    """
    frame = np.eye(DIM)
    frame[0, 4:7] = -0.5 * q.ell
    for i in range(3):
        frame[1 + i, 4 + i] = 0.5 * q.x
    return frame


def frame_right(q: GroupPoint) -> np.ndarray:
    """Right-invariant fields generating the transvections; rows as in frame_left."""
    frame = np.eye(DIM)
    frame[0, 4:7] = 0.5 * q.ell
    for i in range(3):
        frame[1 + i, 4 + i] = -0.5 * q.x
    return frame


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector at ``base`` stored by its coefficients in the left frame."""
    base: GroupPoint
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen(self.coefficients, DIM, "coefficients"))

    @classmethod
    def from_coordinates(cls, base: GroupPoint, components) -> "TangentVector":
        components = np.asarray(components, dtype=float).reshape(DIM)
        coeffs = np.linalg.solve(frame_left(base).T, components)
        return cls(base, coeffs)

    def to_coordinates(self) -> np.ndarray:
        return self.coefficients @ frame_left(self.base)


class LieAlgebra:
    """
    Structure constants c[j, l, k] of the Lie algebra n.

    [E_j, E_l] = sum_k c[j, l, k] E_k in the ordered basis FRAME_LABELS.
    """

    def __init__(self):
        c = np.zeros((DIM, DIM, DIM))
        for i in range(1, 4):
            c[0, i, 3 + i] = 1.0
            c[i, 0, 3 + i] = -1.0
        c.flags.writeable = False
        self.structure_constants = c

    def bracket(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(DIM)
        v = np.asarray(v, dtype=float).reshape(DIM)
        return np.einsum("j,l,jlk->k", u, v, self.structure_constants)

    def basis(self, label: str) -> np.ndarray:
        vec = np.zeros(DIM)
        vec[FRAME_LABELS.index(label)] = 1.0
        return vec

    def nonzero_brackets(self) -> Dict[tuple, str]:
        table = {}
        for j in range(DIM):
            for l in range(DIM):
                k = np.flatnonzero(self.structure_constants[j, l])
                if k.size:
                    sign = "" if self.structure_constants[j, l, k[0]] > 0 else "-"
                    table[(FRAME_LABELS[j], FRAME_LABELS[l])] = sign + FRAME_LABELS[k[0]]
        return table


ALGEBRA = LieAlgebra()


def bracket(u, v) -> np.ndarray:
    """Bracket of two algebra elements given by their frame coefficients."""
    return ALGEBRA.bracket(u, v)


def jacobian_fd(field: Callable[[np.ndarray], np.ndarray], q: np.ndarray,
                eps: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of a vector field on R^7."""
    q = np.asarray(q, dtype=float)
    cols = []
    for i in range(q.size):
        dq = np.zeros_like(q)
        dq[i] = eps
        cols.append((field(q + dq) - field(q - dq)) / (2.0 * eps))
    return np.stack(cols, axis=1)


def lie_bracket_fd(X: Callable[[np.ndarray], np.ndarray],
                   Y: Callable[[np.ndarray], np.ndarray],
                   q, eps: float = 1e-6) -> np.ndarray:
    """
    Coordinate bracket [X, Y] = DY.X - DX.Y evaluated by finite differences.

    Args:
        X, Y: vector fields mapping a 7-array to its 7 coordinate components
        q: evaluation point as a 7-array
        eps: difference step

    Returns:
        Components of [X, Y] at q
    """
    q = np.asarray(q, dtype=float)
    return jacobian_fd(Y, q, eps) @ X(q) - jacobian_fd(X, q, eps) @ Y(q)


def left_field(index: int) -> Callable[[np.ndarray], np.ndarray]:
    return lambda arr: frame_left(GroupPoint.from_array(arr))[index]


def right_field(index: int) -> Callable[[np.ndarray], np.ndarray]:
    return lambda arr: frame_right(GroupPoint.from_array(arr))[index]


def left_translation_differential(g: GroupPoint, q: GroupPoint, eps: float = 1e-6) -> np.ndarray:
    """Finite-difference differential of q -> g.q at q (7x7, columns are inputs)."""
    return jacobian_fd(lambda arr: multiply(g, GroupPoint.from_array(arr)).as_array(),
                       q.as_array(), eps)
