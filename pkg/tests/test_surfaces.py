from __future__ import annotations

import math

import numpy as np

import pytest

from horient.calculus import DerivativeUnavailableError, PolynomialField
from horient.group import DimensionMismatchError, FrameVector, GroupElement
from horient.surfaces import (
    CharacteristicPointError,
    CharacteristicSearch,
    LevelSetSurface,
    ParametrizedPatch,
    Seam,
    catalog_surface,
    find_characteristic_points,
    level_set_nodes,
    levelset_horizontal_normal,
    make_mobius,
    mobius_characteristic_parameter,
    parameter_grid,
    patch_euclidean_normal,
    patch_normal,
    patch_normal_array,
    patch_tangents,
    sample_level_set,
    seam_index_map,
)


S_STAR = (1.0 - 2 * 0.2 - math.sqrt(1.0 - 4 * 0.2)) / 2


def _fd_copy(S: ParametrizedPatch) -> ParametrizedPatch:
    """The same map without its exact Jacobian."""
    return ParametrizedPatch(
        S.evaluate, r_range=S.r_range, s_range=S.s_range, seam=S.seam, name=S.name
    )


def _box(lo: float, hi: float, dim: int = 3) -> tuple[np.ndarray, np.ndarray]:
    return np.full(dim, lo), np.full(dim, hi)


def test_mobius_map_values():
    """γ(0, s) = (R + s, 0, 0) and γ(π, 0) = (−R, 0, 0)."""
    S = make_mobius(0.5, 0.2)
    np.testing.assert_allclose(S.evaluate(0.0, 0.1), [0.6, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(S.evaluate(math.pi, 0.0), [-0.5, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(S.point(0.0, -0.2).coords, [0.3, 0.0, 0.0], atol=1e-15)


def test_mobius_seam_closes():
    """γ(2π⁻, s) = (R − s, 0, 0) = γ(0, −s)."""
    S = make_mobius(0.5, 0.2)
    s = np.linspace(-0.2, 0.2, 41)
    end = S.evaluate(np.full_like(s, 2 * math.pi), s)
    start = S.evaluate(np.zeros_like(s), -s)
    assert float(np.abs(end - start).max()) <= 1e-9
    np.testing.assert_allclose(end[0], 0.5 - s, atol=1e-12)


@pytest.mark.parametrize(("R", "w"), [(0.2, 0.2), (0.2, 0.3), (0.0, -0.1), (math.nan, 0.1)])
def test_mobius_rejects_wide_strips(R: float, w: float):  # noqa: N803
    """0 < w < R is required."""
    with pytest.raises(ValueError, match="0 < w < R"):
        make_mobius(R, w)


def test_mobius_tangents_in_frame():
    """γ_s has frame components (z cos r, z sin r, σ); γ_r(0, 0) = (0, R, −R²/2)."""
    S = make_mobius(0.5, 0.2)
    rng = np.random.default_rng(40)
    for r, s in zip(rng.uniform(0, 2 * math.pi, 20), rng.uniform(-0.2, 0.2, 20), strict=True):
        _, gs = patch_tangents(S, float(r), float(s))
        z, sigma = math.cos(r / 2), math.sin(r / 2)
        np.testing.assert_allclose(gs.coeffs, [z * math.cos(r), z * math.sin(r), sigma], atol=1e-14)
        gr, _ = patch_tangents(S, float(r), float(s))
        a = 0.5 + s * z
        assert gr.c == pytest.approx(s * 0.5 * z - 0.5 * a * a, abs=1e-14)
    gr, _ = patch_tangents(S, 0.0, 0.0)
    np.testing.assert_allclose(gr.coeffs, [0.0, 0.5, -0.125], atol=1e-15)


def test_fd_tangents_match_exact():
    """Finite-difference tangents agree with the exact Jacobian, seam and edges included."""
    S = make_mobius(0.5, 0.2)
    fd = _fd_copy(S)
    assert not fd.has_exact_jacobian
    r, s = parameter_grid(S, 64, 17, include_end=True)
    rr, ss = np.meshgrid(r, s, indexing="ij")
    for exact, approx in zip(S.jacobian(rr, ss), fd.jacobian(rr, ss), strict=True):
        np.testing.assert_allclose(approx, exact, atol=1e-8)


def test_mobius_normal_special_values():
    """N3(π, 0) = 0 and N1(0, 0) = 0."""
    S = make_mobius(0.5, 0.2)
    assert abs(patch_normal(S, math.pi, 0.0).c) <= 1e-15
    assert abs(patch_normal(S, 0.0, 0.0).a[0]) <= 1e-15


def test_closed_form_normal_matches_cross_product():
    """The written-out normal equals γ_r ×_H γ_s on the full grid."""
    for R, w in ((0.5, 0.2), (0.2, 0.1), (1.0, 0.9)):  # noqa: N806
        S = make_mobius(R, w)
        r, s = parameter_grid(S, 720, 160)
        rr, ss = np.meshgrid(r, s, indexing="ij")
        closed = S.closed_form_normal(rr, ss)
        assert float(np.abs(closed - patch_normal_array(S, rr, ss)).max()) <= 1e-10
        fd = patch_normal_array(_fd_copy(S), rr, ss)
        assert float(np.abs(closed - fd).max()) <= 1e-6


def test_n3_vanishes_on_r_equals_pi():
    """N3 is zero along r = π."""
    S = make_mobius(0.5, 0.2)
    s = np.linspace(-0.2, 0.2, 101)
    n3 = patch_normal_array(S, np.full_like(s, math.pi), s)[2]
    assert float(np.abs(n3).max()) <= 1e-12
    elsewhere = patch_normal_array(S, np.full_like(s, 1.0), s)[2]
    assert float(np.abs(elsewhere).min()) > 1e-3


def test_euclidean_normal_is_coordinate_cross_product():
    """γ_r × γ_s at (0, 0) is (0, 0, −R)."""
    S = make_mobius(0.5, 0.2)
    np.testing.assert_allclose(patch_euclidean_normal(S, 0.0, 0.0), [0.0, 0.0, -0.5], atol=1e-15)


def test_characteristic_parameter_closed_form():
    """s* = (1 − 2R − √(1 − 4R)) / 2 for R < ¼ and nothing beyond."""
    assert mobius_characteristic_parameter(0.2) == pytest.approx(0.0763932022500210, abs=1e-15)
    assert mobius_characteristic_parameter(0.25) is None
    assert make_mobius(0.2, 0.1).characteristic_parameter() == (0.0, S_STAR)
    assert make_mobius(0.24, 0.12).characteristic_parameter() is None


def test_find_mobius_characteristic_point():
    """R = 0.2, w = 0.1 has exactly one characteristic point, at (0, s*)."""
    S = make_mobius(0.2, 0.1)
    points = find_characteristic_points(S, (720, 160), 1e-10)
    assert len(points) == 1
    (cp,) = points
    assert cp.refined
    assert cp.params is not None
    r, s = cp.params
    assert abs(r) <= 1e-8
    assert abs(s - S_STAR) <= 1e-8
    np.testing.assert_allclose(cp.point.coords, [0.2 + S_STAR, 0.0, 0.0], atol=1e-8)
    assert cp.point.x[0] == pytest.approx(0.5 - math.sqrt(0.25 - 0.2), abs=1e-8)
    # Re-evaluated from scratch.
    assert float(np.linalg.norm(patch_normal_array(S, r, s)[:2])) <= 1e-10
    assert cp.residual <= 1e-10


@pytest.mark.parametrize(
    ("R", "w", "expected"),
    [
        (0.10, 0.05, 1),
        (0.15, 0.075, 1),
        (0.20, 0.10, 1),
        (0.24, 0.20, 1),
        (0.24, 0.12, 0),
        (0.25, 0.125, 0),
        (0.30, 0.15, 0),
        (0.50, 0.25, 0),
        (1.00, 0.50, 0),
    ],
)
def test_characteristic_count_across_radii(R: float, w: float, expected: int):  # noqa: N803
    """At most one point, and only when R < ¼ and s* fits in the strip."""
    points = find_characteristic_points(make_mobius(R, w), (720, 160), 1e-10)
    refined = [p for p in points if p.refined]
    assert len(refined) == expected


def test_no_points_for_wide_radius():
    """R = 0.5, w = 0.2 has an empty characteristic set."""
    assert find_characteristic_points(make_mobius(0.5, 0.2)) == []


def test_found_point_is_seam_invariant():
    """Beyond the seam the found point is reached at (r + 2π, −s)."""
    S = make_mobius(0.2, 0.1)
    (cp,) = find_characteristic_points(S, (720, 160), 1e-10)
    assert cp.params is not None
    r, s = cp.params
    beyond = S.evaluate(r + 2 * math.pi, -s)
    np.testing.assert_allclose(beyond, cp.point.coords, atol=1e-9)
    back_r, back_s = S.canonical(r + 2 * math.pi, -s)
    assert float(back_r) == pytest.approx(r, abs=1e-12)
    assert float(back_s) == s


def test_level_set_t_has_origin():
    """{t = 0} in [−1, 1]³ is characteristic only at the origin."""
    S = LevelSetSurface(PolynomialField.coordinate(1, 3), _box(-1.0, 1.0))
    points = find_characteristic_points(S, (720, 160), 1e-10)
    assert len(points) == 1
    assert points[0].refined
    assert points[0].params is None
    np.testing.assert_allclose(points[0].point.coords, 0.0, atol=1e-8)


def test_level_set_x_has_none():
    """{x = 0} has no characteristic points."""
    S = LevelSetSurface(PolynomialField.coordinate(1, 1), _box(-1.0, 1.0))
    assert find_characteristic_points(S, (720, 160), 1e-10) == []


def test_level_set_in_h2():
    """{t = 0} in H^2 is characteristic only at the origin."""
    S = LevelSetSurface(PolynomialField.coordinate(2, 5), _box(-1.0, 1.0, 5))
    cfg = CharacteristicSearch.Config(grid=(16, 16), level_set_nodes=10)
    points = find_characteristic_points(S, (16, 16), 1e-10, config=cfg)
    assert len(points) == 1
    np.testing.assert_allclose(points[0].point.coords, 0.0, atol=1e-8)


def test_sample_level_set_points_on_surface():
    """Sampled points lie on the surface, one per crossed cell."""
    f = PolynomialField(1, [((2, 0, 0), 1.0), ((0, 2, 0), 1.0), ((0, 0, 0), -0.25)])
    S = LevelSetSurface(f, _box(-1.0, 1.0))
    sample = sample_level_set(S, 12)
    assert sample.points.shape[0] == 3
    assert sample.points.shape[1] == sample.cells[0].size > 0
    assert float(np.abs(f.value(sample.points)).max()) <= 1e-8


def test_level_set_nodes_capped():
    """Nodes per axis respect the per-axis and total caps."""
    assert level_set_nodes(3, 720, 48, 2_000_000) == 48
    assert level_set_nodes(5, 720, 48, 2_000_000) == 18
    assert level_set_nodes(3, 10, 48, 2_000_000) == 10


def test_horizontal_normal_examples():
    """f = x gives X; f = t gives ½Y at (1, 0, 0) and fails at the origin."""
    plane_x = LevelSetSurface(PolynomialField.coordinate(1, 1), _box(-1.0, 1.0))
    n = levelset_horizontal_normal(plane_x, GroupElement(0.0, 0.3, -0.2))
    assert n.isclose(FrameVector.basis(1, 1))
    plane_t = LevelSetSurface(PolynomialField.coordinate(1, 3), _box(-2.0, 2.0))
    half_y = levelset_horizontal_normal(plane_t, GroupElement(1.0, 0.0, 0.0), normalize=False)
    assert half_y.isclose(0.5 * FrameVector.basis(1, 2))
    with pytest.raises(CharacteristicPointError, match="vanishing horizontal gradient"):
        levelset_horizontal_normal(plane_t, GroupElement(0.0, 0.0, 0.0))
    with pytest.raises(ValueError, match="not on the surface"):
        levelset_horizontal_normal(plane_t, GroupElement(0.0, 0.0, 0.5))


def test_canonical_wraps_across_seam():
    """Each seam crossing applies φ(s) = −s once."""
    S = make_mobius(0.5, 0.2)
    two_pi = 2 * math.pi
    cases = [
        ((0.3, 0.1), (0.3, 0.1)),
        ((two_pi + 0.3, 0.1), (0.3, -0.1)),
        ((2 * two_pi + 0.3, 0.1), (0.3, 0.1)),
        ((-0.3, 0.1), (two_pi - 0.3, -0.1)),
        ((two_pi, 0.1), (0.0, -0.1)),
    ]
    for (r, s), (r_out, s_out) in cases:
        got_r, got_s = S.canonical(r, s)
        assert float(got_r) == pytest.approx(r_out, abs=1e-12)
        assert float(got_s) == pytest.approx(s_out, abs=1e-15)
        np.testing.assert_allclose(S.evaluate(got_r, got_s), S.evaluate(r, s), atol=1e-12)


def test_canonical_without_seam_is_identity():
    """Patches without a seam keep their parameters."""
    S = catalog_surface("plane-x").patch
    assert S is not None
    r, s = S.canonical(5.0, -3.0)
    assert (float(r), float(s)) == (5.0, -3.0)


def test_seam_validation():
    """Seams must be ±1 involutions that actually glue the patch."""
    with pytest.raises(ValueError, match="scale"):
        Seam(2.0)
    with pytest.raises(ValueError, match="involution"):
        Seam(1.0, 0.5)
    assert Seam().flips
    assert not Seam(1.0).flips
    with pytest.raises(ValueError, match="does not close up"):
        ParametrizedPatch(
            lambda r, s: np.stack([r, s, np.zeros_like(r)]),
            r_range=(0.0, 1.0),
            s_range=(-1.0, 1.0),
            seam=Seam(),
        )
    with pytest.raises(ValueError, match="onto itself"):
        ParametrizedPatch(
            lambda r, s: np.stack([r, s, np.zeros_like(r)]),
            r_range=(0.0, 1.0),
            s_range=(0.0, 1.0),
            seam=Seam(),
        )


def test_seam_index_map_reverses_s():
    """For φ(s) = −s on a symmetric grid node j meets node k − 1 − j."""
    S = make_mobius(0.5, 0.2)
    _, s = parameter_grid(S, 16, 9)
    np.testing.assert_array_equal(seam_index_map(S, s), np.arange(8, -1, -1))
    plane = catalog_surface("plane-t").patch
    assert plane is not None
    np.testing.assert_array_equal(seam_index_map(plane, s), np.arange(9))


def test_parameter_grid():
    """r-nodes exclude the end unless asked; s-nodes include both ends."""
    S = make_mobius(0.5, 0.2)
    r, s = parameter_grid(S, 4, 3)
    np.testing.assert_allclose(r, [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
    np.testing.assert_allclose(s, [-0.2, 0.0, 0.2])
    r_end, _ = parameter_grid(S, 4, 3, include_end=True)
    assert r_end[-1] == pytest.approx(2 * math.pi)


def test_fd_jacobian_needs_room():
    """A rectangle narrower than the stencil has no finite-difference tangents."""
    S = ParametrizedPatch(
        lambda r, s: np.stack([r, s, np.zeros_like(r)]),
        r_range=(0.0, 1e-7),
        s_range=(0.0, 1.0),
    )
    with pytest.raises(DerivativeUnavailableError, match="r-range"):
        patch_tangents(S, 0.0, 0.5)


def test_patch_must_live_in_h1():
    """Parametrised maps must return three coordinates."""
    S = ParametrizedPatch(
        lambda r, s: np.stack([r, s, r, s, r]), r_range=(0.0, 1.0), s_range=(0.0, 1.0)
    )
    with pytest.raises(DimensionMismatchError):
        S.evaluate(0.5, 0.5)
    with pytest.raises(ValueError, match="empty parameter rectangle"):
        ParametrizedPatch(lambda r, s: r, r_range=(1.0, 0.0), s_range=(0.0, 1.0))


def test_catalog():
    """Catalog names build the right representations."""
    mobius = catalog_surface("mobius", R=0.5, w=0.2)
    assert mobius.level_set is None
    assert mobius.characteristic_surface is mobius.patch
    assert dict(mobius.params) == {"R": 0.5, "w": 0.2}
    plane = catalog_surface("plane-t", c=0.5)
    assert plane.characteristic_surface is plane.level_set
    assert plane.orientability_surface is plane.patch
    assert plane.level_set is not None
    assert plane.level_set.f(GroupElement(0.0, 0.0, 0.5)) == 0.0
    poly = catalog_surface("poly", poly=PolynomialField.coordinate(1, 1))
    assert poly.patch is None
    assert poly.orientability_surface is poly.level_set
    with pytest.raises(ValueError, match="unknown surface"):
        catalog_surface("torus")
    with pytest.raises(ValueError, match="needs both R and w"):
        catalog_surface("mobius", R=0.5)
    with pytest.raises(ValueError, match="needs a polynomial"):
        catalog_surface("poly")


def test_level_set_box_checked():
    """Boxes must match the field's dimension and be nonempty."""
    f = PolynomialField.coordinate(1, 1)
    with pytest.raises(DimensionMismatchError):
        LevelSetSurface(f, _box(-1.0, 1.0, 5))
    with pytest.raises(ValueError, match="empty box"):
        LevelSetSurface(f, (np.zeros(3), np.array([1.0, 0.0, 1.0])))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
