"""Euclidean and Heisenberg orientability, tangent frames and normal conversions.

A patch with a seam is orientable in a given sense when the unit normal
(the full frame normal for the Euclidean sense, its normalised horizontal
part for the Heisenberg sense), carried continuously over the parameter
grid, comes back to itself across the seam. Carrying it back with the
opposite sign at every seam sample makes the patch non-orientable.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Final
from typing_extensions import Self

import copy
import dataclasses
import logging
import math

import numpy as np
import numpy.typing as npt
import scipy.sparse
import scipy.sparse.csgraph

from horient.calculus import (
    DerivativeUnavailableError,
    FrameDerivativeField,
    ScalarField,
    frame_derivatives,
)
from horient.custom_types import FloatArray, Mode, NormalDirection, Verdict
from horient.exterior import MultiForm, MultiVector, hodge
from horient.fig import Fig
from horient.group import (
    Automorphism,
    Dilation,
    DimensionMismatchError,
    FrameVector,
    GroupElement,
    LeftTranslation,
    apply_automorphism,
)
from horient.surfaces import (
    CharacteristicPoint,
    CharacteristicSearch,
    LevelSetSurface,
    ParametrizedPatch,
    Surface,
    level_set_nodes,
    parameter_grid,
    patch_normal_array,
    sample_level_set,
    seam_index_map,
)
from horient.transformed import transform_patch


__all__ = [
    "InvarianceReport",
    "OrientabilityReport",
    "SeamTransport",
    "degenerate_set_check",
    "describe_automorphism",
    "euclidean_to_horizontal",
    "horizontal_normal_fields",
    "horizontal_to_euclidean",
    "invariance_audit",
    "normal_convert",
    "orientability_verdict",
    "tangent_frame",
    "tangent_frame_residuals",
    "volume_form",
]

logger = logging.getLogger(__name__)

MODES: Final[tuple[Mode, ...]] = ("euclidean", "heisenberg")
_UNIT_TOL: Final = 1e-12


@dataclasses.dataclass(frozen=True, slots=True)
class OrientabilityReport:
    """Outcome of seam transport for one sense of orientability.

    `seam_mismatch` is the mean cosine between transported and identified
    unit normals over the seam samples and is None for surfaces without a
    seam; `seam_cosines` holds its (min, max).
    """

    mode: Mode
    verdict: Verdict
    seam_mismatch: float | None
    min_normal_norm: float
    samples: int
    seam_samples: int = 0
    seam_cosines: tuple[float, float] | None = None
    excised: int = 0
    offending: tuple[float, ...] | None = None
    reason: str = ""


class SeamTransport:
    """Decides orientability of patches and level sets on a sample grid."""

    class Config(Fig["SeamTransport"]):
        grid: tuple[int, int] = (720, 160)
        char_tol: float = 1e-8
        match_threshold: float = 0.9
        flip_threshold: float = -0.9
        excise_radius: float = 0.0
        search: CharacteristicSearch.Config = dataclasses.field(
            default_factory=CharacteristicSearch.Config,
        )

        def finalize(self) -> Self:
            cfg = super().finalize()
            m, k = cfg.grid
            if m < 16 or k < 16:
                raise ValueError(f"grid must be at least 16x16, got {m}x{k}")
            if not 0.0 < cfg.char_tol <= 1e-2:
                raise ValueError(f"char_tol must be in (0, 1e-2], got {cfg.char_tol}")
            if not -1.0 < cfg.flip_threshold < 0.0 < cfg.match_threshold < 1.0:
                raise ValueError("thresholds must satisfy -1 < flip < 0 < match < 1")
            if cfg.excise_radius < 0.0:
                raise ValueError(f"excise_radius must be >= 0, got {cfg.excise_radius}")
            cfg.search = cfg.search.update(grid=cfg.grid).finalize()
            return cfg

    def __init__(self, config: Config) -> None:
        self.config = config
        self.search = config.search.make()

    def verdict(
        self,
        S: Surface,
        mode: Mode,
        *,
        characteristic: Sequence[CharacteristicPoint] | None = None,
        base: tuple[float, float] | None = None,
    ) -> OrientabilityReport:
        """Orientability of S in the given sense.

        Args:
          S: Patch or level set.
          mode: "euclidean" or "heisenberg".
          characteristic: Precomputed characteristic points of S; searched
            for when omitted.
          base: Parameter at which the normal's sign is fixed (patches).

        Returns:
          report: Inconclusive whenever C(S) is nonempty and not excised, or
            a sampled normal is numerically undefined.

        """
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        if characteristic is None:
            characteristic = self.search.run(S)
        if characteristic and self.config.excise_radius == 0.0:
            logger.warning("%s: %d characteristic points; verdict is inconclusive",
                           getattr(S, "name", "surface"), len(characteristic))
            first = characteristic[0]
            return OrientabilityReport(
                mode=mode,
                verdict="inconclusive",
                seam_mismatch=None,
                min_normal_norm=first.residual,
                samples=0,
                offending=first.params if first.params is not None
                else tuple(first.point.coords.tolist()),
                reason="surface has characteristic points",
            )
        if isinstance(S, LevelSetSurface):
            return self._level_set(S, mode, characteristic)
        return self._patch(S, mode, characteristic, base)

    def _patch(
        self,
        S: ParametrizedPatch,
        mode: Mode,
        characteristic: Sequence[CharacteristicPoint],
        base: tuple[float, float] | None,
    ) -> OrientabilityReport:
        cfg = self.config
        m, k = cfg.grid
        r, s = parameter_grid(S, m, k, include_end=True)
        rr, ss = np.meshgrid(r, s, indexing="ij")
        normal = patch_normal_array(S, rr, ss)
        vec = normal if mode == "euclidean" else normal[:2]
        norms = np.linalg.norm(vec, axis=0)
        keep = ~self._excision_mask(S, rr, ss, characteristic)
        excised = int((~keep).sum())
        if not keep.any():
            return OrientabilityReport(mode, "inconclusive", None, math.nan, 0,
                                       excised=excised, reason="every sample was excised")
        masked = np.where(keep, norms, np.inf)
        flat_min = int(np.argmin(masked))
        min_norm = float(masked.flat[flat_min])
        if min_norm <= cfg.char_tol:
            i, j = np.unravel_index(flat_min, masked.shape)
            logger.warning("%s: normal vanishes at (r, s) = (%g, %g)", S.name, r[i], s[j])
            return OrientabilityReport(
                mode, "inconclusive", None, min_norm, int(keep.sum()),
                excised=excised, offending=(float(r[i]), float(s[j])),
                reason="normal is numerically undefined at a sample",
            )
        unit = vec / np.where(keep, norms, 1.0)
        signs, reason = self._transport(unit, keep, r, s, base)
        if signs is None:
            return OrientabilityReport(mode, "inconclusive", None, min_norm,
                                       int(keep.sum()), excised=excised, reason=reason)
        samples = int(keep.sum())
        if S.seam is None:
            return OrientabilityReport(mode, "orientable", None, min_norm, samples,
                                       excised=excised)
        jmap = seam_index_map(S, s)
        last = r.size - 1
        both = keep[last, :] & keep[0, jmap]
        cos = (
            signs[last, :] * signs[0, jmap]
            * np.sum(unit[:, last, :] * unit[:, 0, jmap], axis=0)
        )[both]
        if cos.size == 0:
            return OrientabilityReport(mode, "inconclusive", None, min_norm, samples,
                                       excised=excised, reason="no seam samples survive excision")
        lo, hi = float(cos.min()), float(cos.max())
        if lo > cfg.match_threshold:
            verdict: Verdict = "orientable"
        elif hi < cfg.flip_threshold:
            verdict = "non-orientable"
        else:
            verdict = "inconclusive"
        logger.info("%s (%s): %s, seam cosines in [%.6f, %.6f]", S.name, mode, verdict, lo, hi)
        return OrientabilityReport(
            mode=mode,
            verdict=verdict,
            seam_mismatch=float(cos.mean()),
            min_normal_norm=min_norm,
            samples=samples,
            seam_samples=int(cos.size),
            seam_cosines=(lo, hi),
            excised=excised,
            reason="" if verdict != "inconclusive" else "seam cosines between thresholds",
        )

    def _excision_mask(
        self,
        S: ParametrizedPatch,
        rr: FloatArray,
        ss: FloatArray,
        characteristic: Sequence[CharacteristicPoint],
    ) -> npt.NDArray[np.bool_]:
        """Samples within excise_radius of a characteristic parameter, across the seam too."""
        mask = np.zeros(rr.shape, dtype=bool)
        radius = self.config.excise_radius
        if radius == 0.0:
            return mask
        period = S.r_range[1] - S.r_range[0]
        for cp in characteristic:
            if cp.params is None:
                continue
            rc, sc = cp.params
            images = [(rc, sc)]
            if S.seam is not None:
                images += [(rc + period, float(S.seam(sc))), (rc - period, float(S.seam(sc)))]
            for ri, si in images:
                mask |= np.hypot(rr - ri, ss - si) < radius
        return mask

    def _transport(
        self,
        unit: FloatArray,
        keep: npt.NDArray[np.bool_],
        r: FloatArray,
        s: FloatArray,
        base: tuple[float, float] | None,
    ) -> tuple[npt.NDArray[np.float64] | None, str]:
        """Propagate the normal's sign breadth-first over the 4-neighbour grid graph."""
        rows, cols = keep.shape
        index = np.arange(rows * cols).reshape(rows, cols)
        flat = unit.reshape(unit.shape[0], -1)
        edges = []
        for a, b in (
            (index[:-1, :], index[1:, :]),
            (index[:, :-1], index[:, 1:]),
        ):
            ok = keep.flat[a.ravel()] & keep.flat[b.ravel()]
            edges.append(np.stack([a.ravel()[ok], b.ravel()[ok]]))
        ab = np.concatenate(edges, axis=1)
        n_nodes = rows * cols
        graph = scipy.sparse.coo_matrix(
            (np.ones(ab.shape[1]), (ab[0], ab[1])), shape=(n_nodes, n_nodes)
        ).tocsr()
        _, labels = scipy.sparse.csgraph.connected_components(graph, directed=False)
        if np.unique(labels[keep.ravel()]).size > 1:
            return None, "sampled surface is disconnected after excision"
        if base is None:
            start = int(np.flatnonzero(keep.ravel())[0])
        else:
            dist = np.hypot(*np.meshgrid(r - base[0], s - base[1], indexing="ij"))
            start = int(np.argmin(np.where(keep, dist, np.inf)))
        order, pred = scipy.sparse.csgraph.breadth_first_order(
            graph, start, directed=False, return_predecessors=True
        )
        dots = np.sum(flat[:, order[1:]] * flat[:, pred[order[1:]]], axis=0)
        if np.any(np.abs(dots) < self.config.match_threshold):
            return None, "normal turns too fast between neighbouring samples; refine the grid"
        signs = np.zeros(n_nodes)
        signs[start] = 1.0
        step = np.sign(dots)
        for node, parent, sg in zip(order[1:], pred[order[1:]], step, strict=True):
            signs[node] = signs[parent] * sg
        edge_cos = signs[ab[0]] * signs[ab[1]] * np.sum(flat[:, ab[0]] * flat[:, ab[1]], axis=0)
        if edge_cos.size and float(edge_cos.min()) < self.config.match_threshold:
            return None, "transported normal is discontinuous inside the parameter rectangle"
        return signs.reshape(rows, cols), ""

    def _level_set(
        self,
        S: LevelSetSurface,
        mode: Mode,
        characteristic: Sequence[CharacteristicPoint],
    ) -> OrientabilityReport:
        """A global defining function orients its level set: n_E = ∇f, n_H = ∇_H f."""
        cfg = self.config
        d = S.f.dim
        search = cfg.search
        nodes = level_set_nodes(
            d, max(cfg.grid), search.level_set_nodes, search.level_set_max_nodes
        )
        pts = sample_level_set(S, nodes).points
        keep = np.ones(pts.shape[1], dtype=bool)
        for cp in characteristic:
            keep &= np.linalg.norm(pts - cp.point.coords[:, None], axis=0) >= cfg.excise_radius
        pts = pts[:, keep]
        excised = int((~keep).sum())
        if pts.shape[1] == 0:
            return OrientabilityReport(mode, "inconclusive", None, math.nan, 0,
                                       excised=excised, reason="no samples on the surface")
        vec = S.f.gradient(pts) if mode == "euclidean" else frame_derivatives(S.f, pts)[:-1]
        norms = np.linalg.norm(vec, axis=0)
        i = int(np.argmin(norms))
        if norms[i] <= cfg.char_tol:
            return OrientabilityReport(
                mode, "inconclusive", None, float(norms[i]), int(pts.shape[1]),
                excised=excised, offending=tuple(pts[:, i].tolist()),
                reason="normal is numerically undefined at a sample",
            )
        return OrientabilityReport(mode, "orientable", None, float(norms[i]),
                                   int(pts.shape[1]), excised=excised)


def orientability_verdict(
    S: Surface,
    mode: Mode,
    grid: tuple[int, int] = (720, 160),
    char_tol: float = 1e-8,
    *,
    excise_radius: float = 0.0,
    characteristic: Sequence[CharacteristicPoint] | None = None,
    base: tuple[float, float] | None = None,
    config: SeamTransport.Config | None = None,
) -> OrientabilityReport:
    """Decide orientability of S in the Euclidean or Heisenberg sense."""
    cfg = (copy.deepcopy(config) if config is not None else SeamTransport.Config()).update(
        grid=grid, char_tol=char_tol, excise_radius=excise_radius
    )
    return cfg.make().verdict(S, mode, characteristic=characteristic, base=base)


def _check_unit_horizontal(n_h: FrameVector) -> None:
    if n_h.n != 1:
        raise DimensionMismatchError("tangent frames are built in H^1 only")
    if not n_h.is_horizontal:
        raise ValueError("n_H must be horizontal")
    if abs(n_h.norm_h() - 1.0) > _UNIT_TOL:
        raise ValueError(f"n_H must have unit length, got |n_H| = {n_h.norm_h()!r}")


def tangent_frame(n_h: FrameVector) -> tuple[FrameVector, FrameVector]:
    """(r, s) = (T, n_2 X − n_1 Y) for a unit horizontal normal in H^1."""
    _check_unit_horizontal(n_h)
    n1, n2 = n_h.horizontal_part
    return FrameVector(0.0, 0.0, 1.0), FrameVector(n2, -n1, 0.0)


def tangent_frame_residuals(
    n_h: FrameVector,
    frame: tuple[FrameVector, FrameVector] | None = None,
) -> dict[str, float]:
    """How far (r, s) is from satisfying the seven tangent-frame conditions.

    Products involving r = T use the full frame scalar product, since T is
    not horizontal.
    """
    r, s = frame if frame is not None else tangent_frame(n_h)
    cross = r.cross(s)
    wedge = MultiVector.from_frame_vector(r).wedge(MultiVector.from_frame_vector(s))
    t_h = hodge(MultiVector.from_frame_vector(n_h))
    diff = wedge - t_h
    return {
        "r_dot_s": abs(r.dot(s)),
        "r_dot_n": abs(r.dot(n_h)),
        "s_dot_n": abs(s.dot(n_h)),
        "r_unit": abs(r.norm() - 1.0),
        "s_unit": abs(s.norm() - 1.0),
        "cross_is_normal": float(np.max(np.abs(cross.coeffs - n_h.coeffs))),
        "wedge_is_t_h": max((abs(v) for _, v in diff.items()), default=0.0),
    }


def volume_form(n_h: FrameVector) -> tuple[MultiVector, MultiForm]:
    """t_H = *n_H and ω_H = (n_1 dy∧θ − n_2 dx∧θ) / |n_H|², so ⟨ω_H | t_H⟩ = 1."""
    if n_h.n != 1:
        raise DimensionMismatchError("volume_form is built in H^1 only")
    if not n_h.is_horizontal:
        raise ValueError("n_H must be horizontal")
    n1, n2 = (float(v) for v in n_h.horizontal_part)
    norm2 = n1 * n1 + n2 * n2
    if norm2 == 0.0:
        raise ValueError("n_H must be nonzero")
    t_h = hodge(MultiVector.from_frame_vector(n_h))
    omega = MultiForm(1, 2, {(2, 3): n1 / norm2, (1, 3): -n2 / norm2})
    return t_h, omega


def euclidean_to_horizontal(n_e: npt.ArrayLike, p: GroupElement) -> FrameVector:
    """n_H,i = n_E,i − ½ y_i n_E,2n+1 and n_H,n+i = n_E,n+i + ½ x_i n_E,2n+1."""
    v = np.asarray(n_e, dtype=np.float64).reshape(-1)
    if v.size != p.coords.size:
        raise DimensionMismatchError(
            f"n_E needs {p.coords.size} components, got {v.size}",
        )
    n = p.n
    last = v[-1]
    out = np.concatenate([v[:n] - 0.5 * p.y * last, v[n : 2 * n] + 0.5 * p.x * last])
    return FrameVector.horizontal(out)


def horizontal_to_euclidean(
    fields: Sequence[ScalarField],
    p: GroupElement,
) -> FloatArray:
    """Rebuild n_E from the component fields (n_H,1 .. n_H,2n) of a horizontal normal.

    n_E,2n+1 = (1/n) Σ_j (X_j n_H,n+j − Y_j n_H,j); the horizontal components
    then invert the forward conversion. The fields need exact gradients.
    """
    n = p.n
    if len(fields) != 2 * n:
        raise DimensionMismatchError(f"need {2 * n} component fields, got {len(fields)}")
    for f in fields:
        if f.n != n:
            raise DimensionMismatchError(f"component field on H^{f.n}, point in H^{n}")
        if not f.exact_gradient:
            raise DerivativeUnavailableError(
                "reverse normal conversion needs component fields with exact derivatives",
            )
    frame = [frame_derivatives(f, p.coords) for f in fields]
    values = np.array([f(p) for f in fields])
    vertical = sum(frame[n + j][j] - frame[j][n + j] for j in range(n)) / n
    return np.concatenate([
        values[:n] + 0.5 * p.y * vertical,
        values[n:] - 0.5 * p.x * vertical,
        [vertical],
    ])


def horizontal_normal_fields(g: ScalarField) -> list[FrameDerivativeField]:
    """(X_1 g, .., X_n g, Y_1 g, .., Y_n g): the unnormalised n_H of {g = 0}."""
    return [FrameDerivativeField(g, i) for i in range(1, 2 * g.n + 1)]


def normal_convert(
    direction: NormalDirection,
    p: GroupElement,
    *,
    n_e: npt.ArrayLike | None = None,
    fields: Sequence[ScalarField] | None = None,
) -> FrameVector | FloatArray:
    """Convert normal representatives between the coordinate and horizontal pictures.

    `euclidean-to-h` takes the coordinate normal `n_e`; `h-to-euclidean`
    takes the horizontal normal as differentiable component `fields`.
    Neither side is normalised.
    """
    if direction == "euclidean-to-h":
        if n_e is None:
            raise ValueError("euclidean-to-h needs n_e")
        return euclidean_to_horizontal(n_e, p)
    if direction == "h-to-euclidean":
        if fields is None:
            raise DerivativeUnavailableError("h-to-euclidean needs differentiable component fields")
        return horizontal_to_euclidean(fields, p)
    raise ValueError(f"unknown direction {direction!r}")


def degenerate_set_check(g: ScalarField, p: GroupElement, tol: float) -> bool:
    """Whether p lies in the set excluded by the Euclidean-to-Heisenberg implication.

    That set is {∂_t g ≠ 0, x_i = −2 ∂_{y_i} g / ∂_t g, y_i = 2 ∂_{x_i} g / ∂_t g}.
    """
    grad = g.gradient(p.coords)
    n = p.n
    dt = float(grad[-1])
    if abs(dt) <= tol:
        return False
    return bool(
        np.all(np.abs(p.x + 2.0 * grad[n : 2 * n] / dt) <= tol)
        and np.all(np.abs(p.y - 2.0 * grad[:n] / dt) <= tol)
    )


@dataclasses.dataclass(frozen=True, slots=True)
class InvarianceReport:
    """Comparison of a patch with its image under an automorphism."""

    automorphism: str
    original: tuple[CharacteristicPoint, ...]
    transformed: tuple[CharacteristicPoint, ...]
    max_param_shift: float
    max_ambient_error: float
    verdicts: dict[str, tuple[Verdict, Verdict]]
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def describe_automorphism(m: Automorphism) -> str:
    if isinstance(m, LeftTranslation):
        return "translate(" + ",".join(repr(float(v)) for v in m.q.coords) + ")"
    assert isinstance(m, Dilation)
    return f"dilate({float(m.r)!r})"


def invariance_audit(
    S: ParametrizedPatch,
    m: Automorphism,
    grid: tuple[int, int] = (720, 160),
    tol: float = 1e-10,
    *,
    config: SeamTransport.Config | None = None,
    ambient_tol: float = 1e-10,
    original: Sequence[CharacteristicPoint] | None = None,
    original_verdicts: dict[Mode, OrientabilityReport] | None = None,
) -> InvarianceReport:
    """Check that m ∘ S has the same characteristic set (mapped by m) and verdicts.

    Characteristic parameters must agree within 10·tol and ambient points
    must satisfy m(p) = p' within `ambient_tol`·(1 + |p'|).
    """
    cfg = (copy.deepcopy(config) if config is not None else SeamTransport.Config()).update(grid=grid)
    cfg.search.tol = tol
    transport = cfg.make()
    image = transform_patch(S, m)
    before = list(original) if original is not None else transport.search.run(S)
    after = transport.search.run(image)
    failures: list[str] = []
    shift = 0.0
    ambient = 0.0
    ref_before = [p for p in before if p.refined]
    ref_after = [p for p in after if p.refined]
    if len(ref_before) != len(ref_after):
        failures.append(
            f"characteristic count changed: {len(ref_before)} -> {len(ref_after)}",
        )
    else:
        for p, q in zip(ref_before, ref_after, strict=True):
            assert p.params is not None and q.params is not None
            d = float(np.hypot(p.params[0] - q.params[0], p.params[1] - q.params[1]))
            shift = max(shift, d)
            if d > 10 * tol:
                failures.append(f"characteristic parameter moved by {d:.3g}: {p.params} -> {q.params}")
            mapped = apply_automorphism(m, p.point).coords
            err = float(np.linalg.norm(mapped - q.point.coords))
            ambient = max(ambient, err)
            if err > ambient_tol * (1.0 + float(np.linalg.norm(q.point.coords))):
                failures.append(f"ambient point off by {err:.3g} after mapping")
    verdicts: dict[str, tuple[Verdict, Verdict]] = {}
    for mode in MODES:
        v0 = (
            original_verdicts[mode]
            if original_verdicts is not None and mode in original_verdicts
            else transport.verdict(S, mode, characteristic=before)
        )
        v1 = transport.verdict(image, mode, characteristic=after)
        verdicts[mode] = (v0.verdict, v1.verdict)
        if v0.verdict != v1.verdict:
            failures.append(f"{mode} verdict changed: {v0.verdict} -> {v1.verdict}")
    for f in failures:
        logger.warning("invariance under %s: %s", describe_automorphism(m), f)
    return InvarianceReport(
        automorphism=describe_automorphism(m),
        original=tuple(before),
        transformed=tuple(after),
        max_param_shift=shift,
        max_ambient_error=ambient,
        verdicts=verdicts,
        failures=tuple(failures),
    )
