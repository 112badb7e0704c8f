"""1-codimensional surfaces in H^n and their characteristic points.

Two representations are supported:

* `ParametrizedPatch`: a map (r, s) ↦ H^1 on [r0, r1) × [s0, s1], optionally
  glued along the seam (r1, s) ~ (r0, φ(s)).
* `LevelSetSurface`: {f = 0} inside an axis-aligned box of R^{2n+1}.

Patch maps are vectorised: `evaluate(r, s)` broadcasts its arguments and
returns an array with the (x, y, t) coordinates on the leading axis.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from typing import Final

import copy
import dataclasses
import itertools
import logging
import math
import warnings

import numpy as np
import numpy.typing as npt
import scipy.optimize
from typing_extensions import Self, override

from horient.calculus import (
    DerivativeUnavailableError,
    FrameDerivativeField,
    PolynomialField,
    ScalarField,
    frame_derivatives,
)
from horient.custom_types import FloatArray
from horient.fig import Fig
from horient.group import (
    DimensionMismatchError,
    FrameVector,
    GroupElement,
    change_basis_array,
)
from horient.solvers import NewtonSolver, project_onto_zero_set


__all__ = [
    "CatalogSurface",
    "CharacteristicPoint",
    "CharacteristicPointError",
    "CharacteristicSearch",
    "LevelSetSample",
    "LevelSetSurface",
    "MobiusStrip",
    "ParametrizedPatch",
    "Seam",
    "Surface",
    "catalog_surface",
    "find_characteristic_points",
    "level_set_nodes",
    "levelset_horizontal_normal",
    "make_mobius",
    "mobius_characteristic_parameter",
    "parameter_grid",
    "patch_euclidean_normal",
    "patch_euclidean_normal_array",
    "patch_normal",
    "patch_normal_array",
    "patch_tangents",
    "patch_tangents_array",
    "sample_level_set",
    "seam_index_map",
]

logger = logging.getLogger(__name__)

_GRAD_STEP: Final = float(np.finfo(np.float64).eps) ** (1.0 / 3.0)
SEAM_TOL: Final = 1e-9
CATALOG_NAMES: Final = ("mobius", "plane-t", "plane-x", "poly")


class CharacteristicPointError(ValueError):
    """The horizontal normal is undefined because ∇_H f vanishes."""


@dataclasses.dataclass(frozen=True, slots=True)
class Seam:
    """Affine involution φ(s) = scale·s + offset gluing (r1, s) to (r0, φ(s)).

    `scale` is ±1; for scale = 1 only the identity is an involution.
    """

    scale: float = -1.0
    offset: float = 0.0

    def __post_init__(self) -> None:
        if self.scale not in (1.0, -1.0):
            raise ValueError(f"seam scale must be +1 or -1, got {self.scale}")
        if self.scale == 1.0 and self.offset != 0.0:
            raise ValueError("s ↦ s + b is an involution only for b = 0")

    def __call__(self, s: npt.ArrayLike) -> FloatArray:
        return self.scale * np.asarray(s, dtype=np.float64) + self.offset

    @property
    def flips(self) -> bool:
        """Whether crossing the seam reverses the orientation of (∂_r, ∂_s)."""
        return self.scale < 0


class ParametrizedPatch:
    """A parametrised piece of surface in H^1.

    Args:
      point_fn: Vectorised (r, s) ↦ array of shape (3, ...).
      r_range: Half-open parameter interval [r0, r1).
      s_range: Closed parameter interval [s0, s1].
      seam: Optional gluing (r1, s) ~ (r0, φ(s)).
      jacobian_fn: Optional exact (γ_r, γ_s) in coordinates; finite
        differences are used otherwise.
      name: Catalog name, used in reports.
      params: Parameters reported alongside results.

    """

    def __init__(
        self,
        point_fn: Callable[[FloatArray, FloatArray], FloatArray],
        *,
        r_range: tuple[float, float],
        s_range: tuple[float, float],
        seam: Seam | None = None,
        jacobian_fn: Callable[[FloatArray, FloatArray], tuple[FloatArray, FloatArray]]
        | None = None,
        name: str = "patch",
        params: Mapping[str, float] | None = None,
    ) -> None:
        r0, r1 = (float(v) for v in r_range)
        s0, s1 = (float(v) for v in s_range)
        if not (r0 < r1 and s0 < s1):
            raise ValueError(f"empty parameter rectangle {r_range} x {s_range}")
        self.r_range = (r0, r1)
        self.s_range = (s0, s1)
        self.seam = seam
        self.name = name
        self.params = dict(params or {})
        self._point_fn = point_fn
        self._jacobian_fn = jacobian_fn
        if seam is not None:
            self._check_seam()

    @property
    def n(self) -> int:
        return 1

    @property
    def has_exact_jacobian(self) -> bool:
        return self._jacobian_fn is not None

    def _check_seam(self) -> None:
        assert self.seam is not None
        s0, s1 = self.s_range
        ends = sorted(float(v) for v in self.seam(np.array([s0, s1])))
        if not np.allclose(ends, [s0, s1], rtol=0.0, atol=1e-12):
            raise ValueError(f"seam φ must map [{s0}, {s1}] onto itself, got {ends}")
        s = np.linspace(s0, s1, 17)
        gap = np.abs(
            self.evaluate(np.full_like(s, self.r_range[1]), s)
            - self.evaluate(np.full_like(s, self.r_range[0]), self.seam(s))
        )
        if float(gap.max()) > SEAM_TOL:
            raise ValueError(
                f"patch {self.name!r} does not close up across its seam (gap {gap.max():.3g})",
            )

    def evaluate(self, r: npt.ArrayLike, s: npt.ArrayLike) -> FloatArray:
        """γ(r, s); arguments outside the rectangle are passed through unchanged."""
        r_, s_ = np.broadcast_arrays(
            np.asarray(r, dtype=np.float64), np.asarray(s, dtype=np.float64)
        )
        out = np.asarray(self._point_fn(r_, s_), dtype=np.float64)
        if out.shape[0] != 3:
            raise DimensionMismatchError(
                f"parametrised patches live in H^1; map returned {out.shape[0]} coordinates",
            )
        return out

    def point(self, r: float, s: float) -> GroupElement:
        return GroupElement.from_coords(self.evaluate(r, s))

    def canonical(
        self,
        r: npt.ArrayLike,
        s: npt.ArrayLike,
    ) -> tuple[FloatArray, FloatArray]:
        """Wrap r into [r0, r1) applying φ once per seam crossing.

        Without a seam the parameters are returned unchanged.
        """
        r_ = np.asarray(r, dtype=np.float64)
        s_ = np.asarray(s, dtype=np.float64)
        if self.seam is None:
            return r_, s_
        r0, r1 = self.r_range
        period = r1 - r0
        k = np.floor((r_ - r0) / period)
        r_out = r_ - k * period
        odd = (k.astype(np.int64) % 2) == 1
        s_out = np.where(odd, self.seam(s_), s_)
        # Rounding can leave r_out == r1.
        wrap = r_out >= r1
        r_out = np.where(wrap, r_out - period, r_out)
        s_out = np.where(wrap, self.seam(s_out), s_out)
        return r_out, s_out

    def jacobian(
        self,
        r: npt.ArrayLike,
        s: npt.ArrayLike,
    ) -> tuple[FloatArray, FloatArray]:
        """(γ_r, γ_s) in the coordinate basis."""
        r_, s_ = np.broadcast_arrays(
            np.asarray(r, dtype=np.float64), np.asarray(s, dtype=np.float64)
        )
        if self._jacobian_fn is not None:
            gr, gs = self._jacobian_fn(r_, s_)
            return (
                np.asarray(gr, dtype=np.float64),
                np.asarray(gs, dtype=np.float64),
            )
        return self._fd_jacobian(r_, s_)

    def _fd_jacobian(
        self,
        r: FloatArray,
        s: FloatArray,
    ) -> tuple[FloatArray, FloatArray]:
        if self.seam is not None:

            def along_r(u: FloatArray) -> FloatArray:
                return self.evaluate(*self.canonical(u, s))

            gr = _central(along_r, r)
        else:
            gr = _bounded_derivative(lambda u: self.evaluate(u, s), r, self.r_range, "r")
        gs = _bounded_derivative(lambda u: self.evaluate(r, u), s, self.s_range, "s")
        return gr, gs

    @override
    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({self.name!r}{', ' if params else ''}{params})"


def _central(fn: Callable[[FloatArray], FloatArray], u: FloatArray) -> FloatArray:
    h = _GRAD_STEP * np.maximum(1.0, np.abs(u))
    plus, minus = u + h, u - h
    return (fn(plus) - fn(minus)) / (plus - minus)


def _bounded_derivative(
    fn: Callable[[FloatArray], FloatArray],
    u: FloatArray,
    bounds: tuple[float, float],
    axis: str,
) -> FloatArray:
    """Central differences inside the interval, second-order one-sided at its ends."""
    lo, hi = bounds
    h = _GRAD_STEP * np.maximum(1.0, np.abs(u))
    central = (u - h >= lo) & (u + h <= hi)
    forward = ~central & (u >= lo) & (u + 2 * h <= hi)
    backward = ~central & ~forward & (u <= hi) & (u - 2 * h >= lo)
    if not np.all(central | forward | backward):
        raise DerivativeUnavailableError(
            f"no finite-difference stencil fits in the {axis}-range [{lo}, {hi}]",
        )
    # Unused stencil points are parked at u so the map is never called outside.
    f0 = fn(u)
    f_p1 = fn(np.where(central | forward, u + h, u))
    f_m1 = fn(np.where(central | backward, u - h, u))
    f_p2 = fn(np.where(forward, u + 2 * h, u))
    f_m2 = fn(np.where(backward, u - 2 * h, u))
    d_central = (f_p1 - f_m1) / (2 * h)
    d_forward = (-3 * f0 + 4 * f_p1 - f_p2) / (2 * h)
    d_backward = (3 * f0 - 4 * f_m1 + f_m2) / (2 * h)
    return np.where(central, d_central, np.where(forward, d_forward, d_backward))


class MobiusStrip(ParametrizedPatch):
    """γ(r, s) = ([R + s cos(r/2)] cos r, [R + s cos(r/2)] sin r, s sin(r/2)).

    Defined on [0, 2π) × [−w, w] with the seam (2π, s) ~ (0, −s).
    """

    def __init__(self, R: float, w: float) -> None:  # noqa: N803
        if not (math.isfinite(R) and math.isfinite(w) and 0.0 < w < R):
            raise ValueError(f"Möbius strip needs 0 < w < R, got R={R}, w={w}")
        self.R = float(R)
        self.w = float(w)
        super().__init__(
            self._map,
            r_range=(0.0, 2.0 * math.pi),
            s_range=(-self.w, self.w),
            seam=Seam(-1.0, 0.0),
            jacobian_fn=self._exact_jacobian,
            name="mobius",
            params={"R": self.R, "w": self.w},
        )

    def _map(self, r: FloatArray, s: FloatArray) -> FloatArray:
        a = self.R + s * np.cos(r / 2)
        return np.stack([a * np.cos(r), a * np.sin(r), s * np.sin(r / 2)])

    def _exact_jacobian(
        self,
        r: FloatArray,
        s: FloatArray,
    ) -> tuple[FloatArray, FloatArray]:
        z, sigma = np.cos(r / 2), np.sin(r / 2)
        a = self.R + s * z
        gr = np.stack([
            -0.5 * s * sigma * np.cos(r) - a * np.sin(r),
            -0.5 * s * sigma * np.sin(r) + a * np.cos(r),
            0.5 * s * z,
        ])
        gs = np.stack([z * np.cos(r), z * np.sin(r), sigma])
        return gr, gs

    def closed_form_normal(self, r: npt.ArrayLike, s: npt.ArrayLike) -> FloatArray:
        """(N1, N2, N3) of γ_r ×_H γ_s written out in r, s.

        With A = R + s cos(r/2), z = cos(r/2), σ = sin(r/2):
          N1 = −½ s sin r + A σ cos r + ½ A² z sin r
          N2 = ½ s cos r − ½ A² z cos r + A σ sin r
          N3 = −A z
        """
        r_, s_ = np.broadcast_arrays(
            np.asarray(r, dtype=np.float64), np.asarray(s, dtype=np.float64)
        )
        z, sigma = np.cos(r_ / 2), np.sin(r_ / 2)
        a = self.R + s_ * z
        return np.stack([
            -0.5 * s_ * np.sin(r_) + a * sigma * np.cos(r_) + 0.5 * a * a * z * np.sin(r_),
            0.5 * s_ * np.cos(r_) - 0.5 * a * a * z * np.cos(r_) + a * sigma * np.sin(r_),
            -a * z,
        ])

    def characteristic_parameter(self) -> tuple[float, float] | None:
        """Closed-form characteristic parameter, or None if it is not on the strip."""
        s = mobius_characteristic_parameter(self.R)
        if s is None or abs(s) > self.w:
            return None
        return 0.0, s


def make_mobius(R: float, w: float) -> MobiusStrip:  # noqa: N803
    return MobiusStrip(R, w)


def mobius_characteristic_parameter(R: float) -> float | None:  # noqa: N803
    """s* = (1 − 2R − √(1 − 4R)) / 2, the root of N2(0, s) nearest the midcircle.

    The other root (1 − 2R + √(1 − 4R)) / 2 exceeds ¼ > R, so no strip of
    half-width w < R reaches it. Returns None for R ≥ ¼.
    """
    if not 0.0 < R < 0.25:
        return None
    return (1.0 - 2.0 * R - math.sqrt(1.0 - 4.0 * R)) / 2.0


def patch_tangents_array(
    S: ParametrizedPatch,
    r: npt.ArrayLike,
    s: npt.ArrayLike,
) -> tuple[FloatArray, FloatArray]:
    """γ_r and γ_s in frame components at γ(r, s), vectorised."""
    pts = S.evaluate(r, s)
    gr, gs = S.jacobian(r, s)
    return (
        change_basis_array(gr, pts, "euclidean-to-frame"),
        change_basis_array(gs, pts, "euclidean-to-frame"),
    )


def patch_tangents(
    S: ParametrizedPatch,
    r: float,
    s: float,
) -> tuple[FrameVector, FrameVector]:
    gr, gs = patch_tangents_array(S, r, s)
    return FrameVector.from_coeffs(gr), FrameVector.from_coeffs(gs)


def patch_normal_array(
    S: ParametrizedPatch,
    r: npt.ArrayLike,
    s: npt.ArrayLike,
) -> FloatArray:
    """Frame cross product γ_r ×_H γ_s, vectorised, shape (3, ...)."""
    gr, gs = patch_tangents_array(S, r, s)
    return np.cross(gr, gs, axis=0)


def patch_normal(S: ParametrizedPatch, r: float, s: float) -> FrameVector:
    return FrameVector.from_coeffs(patch_normal_array(S, r, s))


def patch_euclidean_normal_array(
    S: ParametrizedPatch,
    r: npt.ArrayLike,
    s: npt.ArrayLike,
) -> FloatArray:
    """Coordinate cross product γ_r × γ_s."""
    gr, gs = S.jacobian(r, s)
    return np.cross(gr, gs, axis=0)


def patch_euclidean_normal(S: ParametrizedPatch, r: float, s: float) -> FloatArray:
    return patch_euclidean_normal_array(S, r, s)


class LevelSetSurface:
    """{f = 0} ∩ box."""

    def __init__(
        self,
        f: ScalarField,
        box: tuple[npt.ArrayLike, npt.ArrayLike],
        *,
        name: str = "level-set",
        params: Mapping[str, float] | None = None,
        surface_tol: float = 1e-8,
    ) -> None:
        lo = np.asarray(box[0], dtype=np.float64).reshape(-1)
        hi = np.asarray(box[1], dtype=np.float64).reshape(-1)
        if lo.size != f.dim or hi.size != f.dim:
            raise DimensionMismatchError(f"box must live in R^{f.dim}")
        if np.any(lo >= hi):
            raise ValueError(f"empty box [{lo}, {hi}]")
        self.f = f
        self.box = (lo, hi)
        self.name = name
        self.params = dict(params or {})
        self.surface_tol = surface_tol

    @property
    def n(self) -> int:
        return self.f.n

    def contains(self, p: GroupElement, slack: float = 0.0) -> bool:
        lo, hi = self.box
        return bool(np.all(p.coords >= lo - slack) and np.all(p.coords <= hi + slack))

    @override
    def __repr__(self) -> str:
        return f"LevelSetSurface({self.name!r}, f={self.f!r})"


Surface = ParametrizedPatch | LevelSetSurface


def levelset_horizontal_normal(
    S: LevelSetSurface,
    p: GroupElement,
    *,
    normalize: bool = True,
    tol: float = 1e-12,
) -> FrameVector:
    """∇_H f(p), divided by its length when `normalize`.

    Raises:
      ValueError: If p is not on the surface.
      CharacteristicPointError: If normalising and |∇_H f(p)| < tol.

    """
    value = S.f(p)
    if abs(value) > S.surface_tol:
        raise ValueError(f"point is not on the surface: f(p) = {value:.3g}")
    grad = FrameVector.horizontal(frame_derivatives(S.f, p.coords)[:-1])
    if not normalize:
        return grad
    norm = grad.norm_h()
    if norm < tol:
        raise CharacteristicPointError(
            f"vanishing horizontal gradient at {p!r} (|∇_H f| = {norm:.3g})",
        )
    return grad / norm


@dataclasses.dataclass(frozen=True, slots=True)
class CharacteristicPoint:
    """A point where the horizontal normal vanishes.

    `params` is (r, s) for patches and None for level sets.
    """

    point: GroupElement
    residual: float
    refined: bool
    params: tuple[float, float] | None = None


def parameter_grid(
    S: ParametrizedPatch,
    m: int,
    k: int,
    *,
    include_end: bool = False,
) -> tuple[FloatArray, FloatArray]:
    """m r-nodes r0 + i (r1 − r0)/m (i = 0..m−1, or 0..m) and k s-nodes."""
    r0, r1 = S.r_range
    count = m + 1 if include_end else m
    r = r0 + (r1 - r0) * np.arange(count) / m
    s = np.linspace(S.s_range[0], S.s_range[1], k)
    return r, s


def seam_index_map(S: ParametrizedPatch, s_nodes: FloatArray) -> npt.NDArray[np.intp]:
    """For each s-node, the index of the node nearest φ(s)."""
    if S.seam is None:
        return np.arange(s_nodes.size)
    target = S.seam(s_nodes)
    return np.abs(s_nodes[np.newaxis, :] - target[:, np.newaxis]).argmin(axis=1)


class CharacteristicSearch:
    """Grid scan followed by local refinement.

    Patches: candidate nodes are local minima of |(N1, N2)| small compared
    with how fast (N1, N2) varies to their neighbours; each is refined by
    Newton on (N1, N2) = 0 in raw parameters and then wrapped across the seam.

    Level sets: cells where f changes sign are projected onto {f = 0}, the
    same test picks candidates, SLSQP minimises |∇_H f|² on {f = 0} and a
    Newton polish solves (f, ∇_H f) = 0.
    """

    class Config(Fig["CharacteristicSearch"]):
        grid: tuple[int, int] = (720, 160)
        tol: float = 1e-10
        candidate_factor: float = 2.0
        level_set_nodes: int = 48
        level_set_max_nodes: int = 2_000_000
        newton: NewtonSolver.Config = dataclasses.field(
            default_factory=NewtonSolver.Config,
        )

        def finalize(self) -> Self:
            cfg = super().finalize()
            m, k = cfg.grid
            if m < 16 or k < 16:
                raise ValueError(f"grid must be at least 16x16, got {m}x{k}")
            if not 0.0 < cfg.tol <= 1e-2:
                raise ValueError(f"tol must be in (0, 1e-2], got {cfg.tol}")
            if cfg.candidate_factor <= 0.0:
                raise ValueError("candidate_factor must be positive")
            if cfg.level_set_nodes < 4:
                raise ValueError("level_set_nodes must be >= 4")
            cfg.newton.tol = cfg.tol
            return cfg

    def __init__(self, config: Config) -> None:
        self.config = config
        self.solver = config.newton.make()

    def run(self, S: Surface) -> list[CharacteristicPoint]:
        if isinstance(S, LevelSetSurface):
            return self._level_set(S)
        return self._patch(S)

    # Patches.

    def _patch(self, S: ParametrizedPatch) -> list[CharacteristicPoint]:
        cfg = self.config
        m, k = cfg.grid
        r, s = parameter_grid(S, m, k)
        rr, ss = np.meshgrid(r, s, indexing="ij")
        nh = patch_normal_array(S, rr, ss)[:2]
        candidates = self._patch_candidates(S, nh, s)
        logger.debug("%s: %d candidate nodes on a %dx%d grid", S.name, len(candidates), m, k)

        def residual(x: FloatArray) -> FloatArray:
            return patch_normal_array(S, x[0], x[1])[:2]

        refined: list[CharacteristicPoint] = []
        suspects: list[CharacteristicPoint] = []
        for i, j in candidates:
            start = np.array([r[i], s[j]])
            try:
                result = self.solver.solve(residual, start)
            except DerivativeUnavailableError as e:
                logger.debug("refinement from (%g, %g) failed: %s", *start, e)
                result = None
            if result is not None and result.converged:
                params = self._canonical_root(S, result.x)
                if params is None:
                    logger.debug("root %s lies outside the parameter rectangle, dropped", result.x)
                    continue
                res = float(np.linalg.norm(residual(np.array(params))))
                refined.append(
                    CharacteristicPoint(S.point(*params), res, res <= cfg.tol, params)
                )
            else:
                params = (float(r[i]), float(s[j]))
                res = float(np.linalg.norm(nh[:, i, j]))
                suspects.append(CharacteristicPoint(S.point(*params), res, False, params))
        points = _dedupe(refined, 10 * cfg.tol)
        cell = max((S.r_range[1] - S.r_range[0]) / m, (S.s_range[1] - S.s_range[0]) / (k - 1))
        for p in _dedupe(suspects, 2 * cell):
            logger.warning(
                "%s: characteristic suspect at (r, s) = %s did not refine (residual %.3g)",
                S.name, p.params, p.residual,
            )
            points.append(p)
        return points

    def _patch_candidates(
        self,
        S: ParametrizedPatch,
        nh: FloatArray,
        s_nodes: FloatArray,
    ) -> list[tuple[int, int]]:
        _, m, k = nh.shape
        jmap = seam_index_map(S, s_nodes)
        sign = S.seam.scale if S.seam is not None else 1.0
        mag = np.linalg.norm(nh, axis=0)
        ii, jj = np.meshgrid(np.arange(m), np.arange(k), indexing="ij")
        is_min = np.ones((m, k), dtype=bool)
        spread = np.zeros((m, k))
        has_nb = np.zeros((m, k), dtype=bool)
        for di, dj in itertools.product((-1, 0, 1), repeat=2):
            if di == dj == 0:
                continue
            ni, nj = ii + di, jj + dj
            valid = (nj >= 0) & (nj < k)
            nj = np.clip(nj, 0, k - 1)
            crossed = (ni < 0) | (ni >= m)
            if S.seam is None:
                valid &= ~crossed
            else:
                nj = np.where(crossed, jmap[nj], nj)
            ni = ni % m
            nb = nh[:, ni, nj] * np.where(crossed, sign, 1.0)
            nb_mag = mag[ni, nj]
            is_min &= ~valid | (mag <= nb_mag)
            spread = np.where(valid, np.maximum(spread, np.linalg.norm(nb - nh, axis=0)), spread)
            has_nb |= valid
        mask = has_nb & is_min & (mag <= self.config.candidate_factor * spread)
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(mask), strict=True)]

    def _canonical_root(
        self,
        S: ParametrizedPatch,
        x: FloatArray,
    ) -> tuple[float, float] | None:
        snap = 10 * self.config.tol
        r, s = (float(v) for v in S.canonical(x[0], x[1]))
        r0, r1 = S.r_range
        if S.seam is not None and r1 - r <= snap:
            r, s = r0, float(S.seam(s))
        s0, s1 = S.s_range
        if not s0 - snap <= s <= s1 + snap:
            return None
        if S.seam is None and not r0 - snap <= r <= r1 + snap:
            return None
        return min(max(r, r0), r1), min(max(s, s0), s1)

    # Level sets.

    def _level_set(self, S: LevelSetSurface) -> list[CharacteristicPoint]:
        cfg = self.config
        f = S.f
        d = f.dim
        nodes = level_set_nodes(d, max(cfg.grid), cfg.level_set_nodes, cfg.level_set_max_nodes)
        sample = sample_level_set(S, nodes)
        if sample.points.shape[1] == 0:
            return []
        grad = f.gradient(sample.points)
        if np.any(np.linalg.norm(grad, axis=0) <= cfg.tol):
            raise ValueError(f"{S.name}: ∇f vanishes on the surface; it is not a regular level set")
        cell_shape = (nodes - 1,) * d
        width = sample.width
        hgrad = np.full((d - 1, *cell_shape), np.nan)
        hgrad[(slice(None), *sample.cells)] = frame_derivatives(f, sample.points)[:-1]
        points_at = np.full((d, *cell_shape), np.nan)
        points_at[(slice(None), *sample.cells)] = sample.points
        candidates = self._cell_candidates(hgrad)
        logger.debug("%s: %d candidate cells", S.name, len(candidates))
        refined: list[CharacteristicPoint] = []
        suspects: list[CharacteristicPoint] = []
        for cell in candidates:
            start = points_at[(slice(None), *cell)]
            cp = self._refine_level_set(S, start)
            if cp is None:
                continue
            (refined if cp.refined else suspects).append(cp)
        points = _dedupe(refined, 10 * cfg.tol)
        for p in _dedupe(suspects, float(np.linalg.norm(width))):
            logger.warning(
                "%s: characteristic suspect near %r did not refine (residual %.3g)",
                S.name, p.point, p.residual,
            )
            points.append(p)
        return points

    def _cell_candidates(self, hgrad: FloatArray) -> list[tuple[int, ...]]:
        d = hgrad.ndim - 1
        mag = np.linalg.norm(hgrad, axis=0)
        finite = np.isfinite(mag)
        is_min = finite.copy()
        spread = np.zeros(mag.shape)
        has_nb = np.zeros(mag.shape, dtype=bool)
        for axis in range(d):
            for shift in (-1, 1):
                nb = _shifted(hgrad, shift, axis + 1)
                nb_mag = np.linalg.norm(nb, axis=0)
                valid = finite & np.isfinite(nb_mag)
                with np.errstate(invalid="ignore"):
                    is_min &= ~valid | (mag <= nb_mag)
                    diff = np.linalg.norm(nb - hgrad, axis=0)
                spread = np.where(valid, np.maximum(spread, np.nan_to_num(diff)), spread)
                has_nb |= valid
        with np.errstate(invalid="ignore"):
            mask = has_nb & is_min & (mag <= self.config.candidate_factor * spread)
        return [tuple(int(v) for v in c) for c in zip(*np.nonzero(mask), strict=True)]

    def _refine_level_set(
        self,
        S: LevelSetSurface,
        start: FloatArray,
    ) -> CharacteristicPoint | None:
        cfg = self.config
        f = S.f
        d = f.dim
        components = [FrameDerivativeField(f, i) for i in range(1, d)]
        lo, hi = S.box

        def objective(x: FloatArray) -> float:
            h = frame_derivatives(f, x)[:-1]
            return float(h @ h)

        def objective_grad(x: FloatArray) -> FloatArray:
            h = frame_derivatives(f, x)[:-1]
            return 2.0 * sum(
                (hi_ * c.gradient(x) for hi_, c in zip(h, components, strict=True)),
                start=np.zeros(d),
            )

        x0 = np.clip(start, lo, hi)
        with warnings.catch_warnings():
            # SLSQP may step onto the box faces; its clipping notices are not errors here.
            warnings.simplefilter("ignore", RuntimeWarning)
            opt = scipy.optimize.minimize(
                objective,
                x0,
                jac=objective_grad,
                method="SLSQP",
                bounds=list(zip(lo, hi, strict=True)),
                constraints=[{
                    "type": "eq",
                    "fun": lambda x: float(f.value(x)),
                    "jac": f.gradient,
                }],
                options={"maxiter": 200, "ftol": 1e-16},
            )
        x_opt = np.asarray(opt.x, dtype=np.float64)

        def system(x: FloatArray) -> FloatArray:
            fd = frame_derivatives(f, x)
            return np.concatenate([[float(f.value(x))], fd[:-1]])

        def system_jac(x: FloatArray) -> FloatArray:
            return np.stack([f.gradient(x), *(c.gradient(x) for c in components)])

        try:
            result = self.solver.solve(
                system, x_opt, jac=system_jac if f.exact_hessian else None
            )
        except DerivativeUnavailableError as e:
            logger.debug("level-set polish from %s failed: %s", x_opt, e)
            result = None
        if result is not None and result.converged:
            x = result.x
            p = GroupElement.from_coords(x)
            if not S.contains(p, slack=10 * cfg.tol):
                logger.debug("root %r lies outside the box, dropped", p)
                return None
            res = float(np.linalg.norm(frame_derivatives(f, x)[:-1]))
            return CharacteristicPoint(p, res, res <= cfg.tol)
        res = float(np.sqrt(objective(x_opt)))
        return CharacteristicPoint(GroupElement.from_coords(x_opt), res, False)


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class LevelSetSample:
    """Points of {f = 0}, one per grid cell the surface crosses.

    `cells` holds the multi-indices of those cells as one index array per
    axis, aligned with the columns of `points`.
    """

    points: FloatArray
    cells: tuple[npt.NDArray[np.intp], ...]
    width: FloatArray


def level_set_nodes(dim: int, requested: int, cap: int, max_total: int) -> int:
    """Nodes per axis: the request, capped per axis and in total."""
    return max(2, min(requested, cap, int(round(max_total ** (1.0 / dim), 9))))


def sample_level_set(S: LevelSetSurface, nodes: int) -> LevelSetSample:
    """Project the centres of sign-change cells of f onto {f = 0}.

    Cells whose projection fails or leaves the box (padded by one cell) are
    skipped.
    """
    f = S.f
    d = f.dim
    lo, hi = S.box
    axes = [np.linspace(lo[i], hi[i], nodes) for i in range(d)]
    width = np.array([a[1] - a[0] for a in axes])
    values = f.value(np.stack(np.meshgrid(*axes, indexing="ij")))
    cell_shape = (nodes - 1,) * d
    lo_v = np.full(cell_shape, np.inf)
    hi_v = np.full(cell_shape, -np.inf)
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(c, c + nodes - 1) for c in corner)
        lo_v = np.minimum(lo_v, values[sl])
        hi_v = np.maximum(hi_v, values[sl])
    idx = np.nonzero((lo_v <= 0.0) & (hi_v >= 0.0))
    logger.debug("%s: %d cells cross f = 0", S.name, idx[0].size)
    if idx[0].size == 0:
        return LevelSetSample(np.empty((d, 0)), tuple(idx), width)
    centres = np.stack([axes[i][idx[i]] + 0.5 * width[i] for i in range(d)])
    projected, ok = _project_many(f, centres)
    ok &= np.all(
        (projected >= (lo - width)[:, None]) & (projected <= (hi + width)[:, None]),
        axis=0,
    )
    return LevelSetSample(projected[:, ok], tuple(i[ok] for i in idx), width)


def _shifted(a: FloatArray, shift: int, axis: int) -> FloatArray:
    """`a` shifted by ±1 along `axis`, NaN-padded."""
    out = np.full(a.shape, np.nan)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if shift > 0:
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
    else:
        src[axis], dst[axis] = slice(None, -1), slice(1, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _project_many(f: ScalarField, pts: FloatArray, iters: int = 8) -> tuple[FloatArray, npt.NDArray[np.bool_]]:
    """Vectorised Newton-along-gradient projection onto {f = 0}."""
    x = np.array(pts, dtype=np.float64, copy=True)
    for _ in range(iters):
        fv = f.value(x)
        g = f.gradient(x)
        gg = np.sum(g * g, axis=0)
        safe = gg > 0.0
        x = x - np.where(safe, fv / np.where(safe, gg, 1.0), 0.0) * g
    ok = np.abs(f.value(x)) <= 1e-8
    # Stragglers get the scalar projector, which iterates to tolerance.
    for i in np.nonzero(~ok)[0]:
        xi, done = project_onto_zero_set(
            lambda v: float(f.value(v)), f.gradient, x[:, i], tol=1e-10
        )
        x[:, i] = xi
        ok[i] = done
    return x, ok


def _dedupe(points: list[CharacteristicPoint], radius: float) -> list[CharacteristicPoint]:
    """Keep the lowest-residual representative of each cluster."""
    kept: list[CharacteristicPoint] = []
    for p in sorted(points, key=lambda q: q.residual):
        key = np.array(p.params) if p.params is not None else p.point.coords
        if all(
            np.linalg.norm(
                key - (np.array(q.params) if q.params is not None else q.point.coords)
            )
            > radius
            for q in kept
        ):
            kept.append(p)
    return sorted(kept, key=_sort_key)


def _sort_key(p: CharacteristicPoint) -> tuple[float, ...]:
    return (0.0 if p.refined else 1.0, *(p.params or ()), *p.point.coords.tolist())


def find_characteristic_points(
    S: Surface,
    grid: tuple[int, int] = (720, 160),
    tol: float = 1e-10,
    *,
    config: CharacteristicSearch.Config | None = None,
) -> list[CharacteristicPoint]:
    """Locate the characteristic set of a patch or level set.

    Refined points come first; unrefined suspects (refinement diverged) are
    flagged with `refined=False` rather than dropped.
    """
    cfg = (copy.deepcopy(config) if config is not None else CharacteristicSearch.Config()).update(
        grid=grid, tol=tol
    )
    return cfg.make().run(S)


@dataclasses.dataclass(frozen=True, slots=True)
class CatalogSurface:
    """A named surface with whichever representations it has."""

    name: str
    params: Mapping[str, float]
    patch: ParametrizedPatch | None = None
    level_set: LevelSetSurface | None = None

    @property
    def characteristic_surface(self) -> Surface:
        """The representation searched for characteristic points."""
        if self.name == "mobius" or self.level_set is None:
            assert self.patch is not None
            return self.patch
        return self.level_set

    @property
    def orientability_surface(self) -> Surface:
        if self.patch is not None:
            return self.patch
        assert self.level_set is not None
        return self.level_set


def _plane_t_patch(c: float) -> ParametrizedPatch:
    def fn(r: FloatArray, s: FloatArray) -> FloatArray:
        return np.stack([r, s, np.full_like(r, c)])

    def jac(r: FloatArray, s: FloatArray) -> tuple[FloatArray, FloatArray]:
        one, zero = np.ones_like(r), np.zeros_like(r)
        return np.stack([one, zero, zero]), np.stack([zero, one, zero])

    return ParametrizedPatch(
        fn, r_range=(-1.0, 1.0), s_range=(-1.0, 1.0), jacobian_fn=jac,
        name="plane-t", params={"c": c},
    )


def _plane_x_patch(c: float) -> ParametrizedPatch:
    def fn(r: FloatArray, s: FloatArray) -> FloatArray:
        return np.stack([np.full_like(r, c), r, s])

    def jac(r: FloatArray, s: FloatArray) -> tuple[FloatArray, FloatArray]:
        one, zero = np.ones_like(r), np.zeros_like(r)
        return np.stack([zero, one, zero]), np.stack([zero, zero, one])

    return ParametrizedPatch(
        fn, r_range=(-1.0, 1.0), s_range=(-1.0, 1.0), jacobian_fn=jac,
        name="plane-x", params={"c": c},
    )


def catalog_surface(
    name: str,
    *,
    R: float | None = None,  # noqa: N803
    w: float | None = None,
    c: float = 0.0,
    poly: PolynomialField | None = None,
    box: tuple[npt.ArrayLike, npt.ArrayLike] | None = None,
) -> CatalogSurface:
    """Build a catalog surface by name.

    mobius: the strip of radius R and half-width w.
    plane-t: {t = c}, as a level set and as the graph (r, s, c).
    plane-x: {x_1 = c}, as a level set and as the graph (c, r, s).
    poly: {g = 0} for a polynomial g, level set only.
    """
    if name == "mobius":
        if R is None or w is None:
            raise ValueError("mobius needs both R and w")
        patch = MobiusStrip(R, w)
        return CatalogSurface(name, dict(patch.params), patch=patch)
    if name in {"plane-t", "plane-x"}:
        index = 3 if name == "plane-t" else 1
        f = PolynomialField(1, [
            ((0, 0, 1) if index == 3 else (1, 0, 0), 1.0),
            ((0, 0, 0), -c),
        ])
        centre = np.array([0.0, 0.0, c]) if index == 3 else np.array([c, 0.0, 0.0])
        level = LevelSetSurface(
            f, (centre - 1.0, centre + 1.0) if box is None else box, name=name, params={"c": c}
        )
        patch = _plane_t_patch(c) if index == 3 else _plane_x_patch(c)
        return CatalogSurface(name, {"c": c}, patch=patch, level_set=level)
    if name == "poly":
        if poly is None:
            raise ValueError("poly needs a polynomial")
        dim = poly.dim
        level = LevelSetSurface(
            poly,
            (np.full(dim, -1.0), np.full(dim, 1.0)) if box is None else box,
            name=name,
        )
        return CatalogSurface(name, {"n": float(poly.n)}, level_set=level)
    raise ValueError(f"unknown surface {name!r}; expected one of {', '.join(CATALOG_NAMES)}")
