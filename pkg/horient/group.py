"""Heisenberg group H^n: points, automorphisms, Korányi metric and the frame.

Points are stored in exponential coordinates (x, y, t) with the product

    (x, y, t) * (x', y', t') = (x + x', y + y', t + t' + ½ Σ_j (x_j y'_j − y_j x'_j)).

Tangent vectors are stored in the left-invariant frame X_1..X_n, Y_1..Y_n, T
where X_j = ∂_{x_j} − ½ y_j ∂_t, Y_j = ∂_{y_j} + ½ x_j ∂_t and T = ∂_t.
"""

from __future__ import annotations

from typing import ClassVar, Final

import dataclasses
import math

import numpy as np
import numpy.typing as npt
from typing_extensions import override

from horient.custom_types import BasisDirection, FloatArray


__all__ = [
    "Automorphism",
    "Dilation",
    "DimensionMismatchError",
    "FrameVector",
    "GroupElement",
    "LeftTranslation",
    "apply_automorphism",
    "change_basis",
    "change_basis_array",
    "group_inv",
    "group_mul",
    "identity",
    "koranyi_distance",
    "koranyi_norm",
]


class DimensionMismatchError(ValueError):
    """Operands live in Heisenberg groups of different dimension."""


def _as_vector(values: npt.ArrayLike, what: str) -> FloatArray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must have finite coordinates, got {arr!r}")
    arr.flags.writeable = False
    return arr


class GroupElement:
    """A point (x, y, t) of H^n."""

    __slots__: ClassVar[tuple[str, ...]] = ("coords",)
    coords: FloatArray

    def __init__(self, x: npt.ArrayLike, y: npt.ArrayLike, t: float) -> None:
        x_ = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y_ = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if x_.shape != y_.shape or x_.ndim != 1 or x_.size < 1:
            raise DimensionMismatchError(
                f"x and y must be vectors of one length n >= 1, got {x_.shape} and {y_.shape}",
            )
        self.coords = _as_vector(np.concatenate([x_, y_, [t]]), "GroupElement")

    @classmethod
    def from_coords(cls, coords: npt.ArrayLike) -> GroupElement:
        """Build from a flat (x_1..x_n, y_1..y_n, t) vector of odd length."""
        c = np.asarray(coords, dtype=np.float64).reshape(-1)
        if c.size < 3 or c.size % 2 == 0:
            raise DimensionMismatchError(
                f"coordinate vector must have length 2n+1 >= 3, got {c.size}",
            )
        n = (c.size - 1) // 2
        return cls(c[:n], c[n : 2 * n], float(c[-1]))

    @property
    def n(self) -> int:
        return (self.coords.size - 1) // 2

    @property
    def x(self) -> FloatArray:
        return self.coords[: self.n]

    @property
    def y(self) -> FloatArray:
        return self.coords[self.n : 2 * self.n]

    @property
    def t(self) -> float:
        return float(self.coords[-1])

    @override
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return bool(np.array_equal(self.coords, other.coords))

    @override
    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    @override
    def __repr__(self) -> str:
        if self.n == 1:
            return f"GroupElement({float(self.x[0])!r}, {float(self.y[0])!r}, {self.t!r})"
        return f"GroupElement({self.x.tolist()!r}, {self.y.tolist()!r}, {self.t!r})"

    def __mul__(self, other: GroupElement) -> GroupElement:
        return group_mul(self, other)

    def __reduce__(self) -> tuple[object, tuple[object, ...]]:
        return (GroupElement.from_coords, (self.coords.tolist(),))


def identity(n: int) -> GroupElement:
    """Neutral element (0, 0, 0) of H^n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return GroupElement(np.zeros(n), np.zeros(n), 0.0)


def _check_same_n(*points: GroupElement) -> int:
    ns = {p.n for p in points}
    if len(ns) != 1:
        raise DimensionMismatchError(f"operands live in different groups: n in {sorted(ns)}")
    return ns.pop()


def group_mul(p: GroupElement, q: GroupElement) -> GroupElement:
    """Group product p * q."""
    _check_same_n(p, q)
    t = p.t + q.t + 0.5 * float(np.dot(p.x, q.y) - np.dot(p.y, q.x))
    return GroupElement(p.x + q.x, p.y + q.y, t)


def group_inv(p: GroupElement) -> GroupElement:
    """Group inverse; the bilinear term cancels so this is plain negation."""
    return GroupElement(-p.x, -p.y, -p.t)


def koranyi_norm(p: GroupElement) -> float:
    """Korányi gauge (|(x, y)|^4 + 16 t^2)^(1/4)."""
    h2 = float(np.dot(p.coords[:-1], p.coords[:-1]))
    return (h2 * h2 + 16.0 * p.t * p.t) ** 0.25


def koranyi_distance(p: GroupElement, q: GroupElement) -> float:
    """Left-invariant distance d_H(p, q) = ||q^{-1} * p||_H."""
    return koranyi_norm(group_mul(group_inv(q), p))


@dataclasses.dataclass(frozen=True, slots=True)
class LeftTranslation:
    """τ_q: p ↦ q * p."""

    q: GroupElement

    kind: ClassVar[str] = "translation"

    @property
    def n(self) -> int:
        return self.q.n

    def jacobian(self) -> FloatArray:
        """Coordinate Jacobian of τ_q (constant in p)."""
        n = self.q.n
        jac = np.eye(2 * n + 1)
        jac[-1, :n] = -0.5 * self.q.y
        jac[-1, n : 2 * n] = 0.5 * self.q.x
        return jac

    def apply_coords(self, coords: FloatArray) -> FloatArray:
        """Vectorised τ_q on an array whose leading axis holds (x, y, t)."""
        n = self.q.n
        q = self.q.coords.reshape((-1,) + (1,) * (coords.ndim - 1))
        out = coords + q
        x, y = coords[:n], coords[n : 2 * n]
        out[-1] = coords[-1] + q[-1] + 0.5 * (
            np.sum(q[:n] * y, axis=0) - np.sum(q[n : 2 * n] * x, axis=0)
        )
        return out


@dataclasses.dataclass(frozen=True, slots=True)
class Dilation:
    """δ_r: (x, y, t) ↦ (r x, r y, r² t), r > 0."""

    r: float

    kind: ClassVar[str] = "dilation"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"dilation factor must be a positive real, got {self.r!r}")

    def jacobian(self, n: int) -> FloatArray:
        return np.diag([self.r] * (2 * n) + [self.r * self.r])

    def apply_coords(self, coords: FloatArray) -> FloatArray:
        out = coords * self.r
        out[-1] = coords[-1] * (self.r * self.r)
        return out


Automorphism = LeftTranslation | Dilation


def automorphism_jacobian(m: Automorphism, n: int) -> FloatArray:
    """Coordinate Jacobian of m on H^n; both automorphisms have constant Jacobians."""
    if isinstance(m, LeftTranslation):
        if m.n != n:
            raise DimensionMismatchError(f"translation lives in H^{m.n}, not H^{n}")
        return m.jacobian()
    return m.jacobian(n)


def apply_automorphism(m: Automorphism, p: GroupElement) -> GroupElement:
    """Apply τ_q (q * p) or δ_r ((r x, r y, r² t))."""
    if isinstance(m, LeftTranslation):
        return group_mul(m.q, p)
    r = m.r
    return GroupElement(r * p.x, r * p.y, r * r * p.t)


class FrameVector:
    """Tangent vector Σ a_j X_j + b_j Y_j + c T in the left-invariant frame.

    The frame scalar product makes X_j, Y_j, T orthonormal. The horizontal
    product ⟨·,·⟩_H is only defined on horizontal vectors (c = 0).
    """

    __slots__: ClassVar[tuple[str, ...]] = ("coeffs",)
    coeffs: FloatArray

    def __init__(self, a: npt.ArrayLike, b: npt.ArrayLike, c: float = 0.0) -> None:
        a_ = np.atleast_1d(np.asarray(a, dtype=np.float64))
        b_ = np.atleast_1d(np.asarray(b, dtype=np.float64))
        if a_.shape != b_.shape or a_.ndim != 1 or a_.size < 1:
            raise DimensionMismatchError(
                f"a and b must be vectors of one length n >= 1, got {a_.shape} and {b_.shape}",
            )
        self.coeffs = _as_vector(np.concatenate([a_, b_, [c]]), "FrameVector")

    @classmethod
    def from_coeffs(cls, coeffs: npt.ArrayLike) -> FrameVector:
        c = np.asarray(coeffs, dtype=np.float64).reshape(-1)
        if c.size < 3 or c.size % 2 == 0:
            raise DimensionMismatchError(
                f"frame coefficient vector must have length 2n+1 >= 3, got {c.size}",
            )
        n = (c.size - 1) // 2
        return cls(c[:n], c[n : 2 * n], float(c[-1]))

    @classmethod
    def horizontal(cls, components: npt.ArrayLike) -> FrameVector:
        """Horizontal vector from its 2n components (a_1..a_n, b_1..b_n)."""
        h = np.asarray(components, dtype=np.float64).reshape(-1)
        if h.size < 2 or h.size % 2:
            raise DimensionMismatchError(f"need 2n horizontal components, got {h.size}")
        return cls.from_coeffs(np.append(h, 0.0))

    @classmethod
    def basis(cls, n: int, index: int) -> FrameVector:
        """W_index with 1-based index into (X_1..X_n, Y_1..Y_n, T)."""
        if not 1 <= index <= 2 * n + 1:
            raise ValueError(f"basis index must be in 1..{2 * n + 1}, got {index}")
        e = np.zeros(2 * n + 1)
        e[index - 1] = 1.0
        return cls.from_coeffs(e)

    @property
    def n(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def a(self) -> FloatArray:
        return self.coeffs[: self.n]

    @property
    def b(self) -> FloatArray:
        return self.coeffs[self.n : 2 * self.n]

    @property
    def c(self) -> float:
        return float(self.coeffs[-1])

    @property
    def horizontal_part(self) -> FloatArray:
        return self.coeffs[:-1]

    @property
    def is_horizontal(self) -> bool:
        return self.c == 0.0

    def dot(self, other: FrameVector) -> float:
        """Frame scalar product ⟨·,·⟩."""
        self._check(other)
        return float(np.dot(self.coeffs, other.coeffs))

    def dot_h(self, other: FrameVector) -> float:
        """Horizontal scalar product ⟨·,·⟩_H; both operands must be horizontal."""
        self._check(other)
        if not (self.is_horizontal and other.is_horizontal):
            raise ValueError("⟨·,·⟩_H is only defined between horizontal vectors")
        return float(np.dot(self.horizontal_part, other.horizontal_part))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def norm_h(self) -> float:
        """|v|_H of the horizontal part."""
        return float(np.linalg.norm(self.horizontal_part))

    def cross(self, other: FrameVector) -> FrameVector:
        """3×3 determinant cross product in the frame basis (H^1 only)."""
        self._check(other)
        if self.n != 1:
            raise DimensionMismatchError("frame cross product is only defined in H^1")
        return FrameVector.from_coeffs(np.cross(self.coeffs, other.coeffs))

    def _check(self, other: FrameVector) -> None:
        if self.n != other.n:
            raise DimensionMismatchError(f"frame vectors in H^{self.n} and H^{other.n}")

    def __add__(self, other: FrameVector) -> FrameVector:
        self._check(other)
        return FrameVector.from_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: FrameVector) -> FrameVector:
        self._check(other)
        return FrameVector.from_coeffs(self.coeffs - other.coeffs)

    def __rmul__(self, scalar: float) -> FrameVector:
        return FrameVector.from_coeffs(scalar * self.coeffs)

    def __truediv__(self, scalar: float) -> FrameVector:
        return FrameVector.from_coeffs(self.coeffs / scalar)

    def __neg__(self) -> FrameVector:
        return FrameVector.from_coeffs(-self.coeffs)

    @override
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrameVector):
            return NotImplemented
        return bool(np.array_equal(self.coeffs, other.coeffs))

    @override
    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())

    @override
    def __repr__(self) -> str:
        return f"FrameVector({self.a.tolist()!r}, {self.b.tolist()!r}, {self.c!r})"

    def isclose(self, other: FrameVector, atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))


_EUCLIDEAN_TO_FRAME: Final = "euclidean-to-frame"
_FRAME_TO_EUCLIDEAN: Final = "frame-to-euclidean"


def change_basis_array(
    v: FloatArray,
    p: FloatArray,
    direction: BasisDirection,
) -> FloatArray:
    """Vectorised change of basis; leading axes of `v` and `p` hold 2n+1 components.

    Coordinate components (u, v, w) and frame components (a, b, c) relate by
    a = u, b = v, c = w + ½⟨y, u⟩ − ½⟨x, v⟩.
    """
    v = np.asarray(v, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if v.shape[0] != p.shape[0] or v.shape[0] % 2 == 0:
        raise DimensionMismatchError(
            f"vector and point must share 2n+1 components, got {v.shape[0]} and {p.shape[0]}",
        )
    n = (v.shape[0] - 1) // 2
    x, y = p[:n], p[n : 2 * n]
    u, w = v[:n], v[n : 2 * n]
    shift = 0.5 * (np.sum(y * u, axis=0) - np.sum(x * w, axis=0))
    out = np.array(v, dtype=np.float64, copy=True)
    if direction == _EUCLIDEAN_TO_FRAME:
        out[-1] = v[-1] + shift
    elif direction == _FRAME_TO_EUCLIDEAN:
        out[-1] = v[-1] - shift
    else:
        raise ValueError(f"unknown basis direction {direction!r}")
    return out


def change_basis(
    v: npt.ArrayLike | FrameVector,
    p: GroupElement,
    direction: BasisDirection,
) -> FloatArray | FrameVector:
    """Convert a tangent vector at p between coordinate and frame components.

    `euclidean-to-frame` takes coordinate components and returns a FrameVector;
    `frame-to-euclidean` takes a FrameVector (or raw frame components) and
    returns coordinate components.
    """
    raw = v.coeffs if isinstance(v, FrameVector) else np.asarray(v, dtype=np.float64)
    out = change_basis_array(raw, p.coords, direction)
    if direction == _EUCLIDEAN_TO_FRAME:
        return FrameVector.from_coeffs(out)
    return out
