from __future__ import annotations

import itertools

import numpy as np

import pytest

from horient.exterior import (
    MultiForm,
    MultiVector,
    contact_form,
    hodge,
    hodge_sign,
    pair,
    pair_coordinate_vectors,
    pair_frame_vectors,
    permutation_sign,
)
from horient.group import DimensionMismatchError, FrameVector, GroupElement


def _index_sets(n: int, grade: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(1, 2 * n + 2), grade))


def test_permutation_sign():
    """Inversion parity, zero on repeats."""
    assert permutation_sign((1, 2, 3)) == 1
    assert permutation_sign((2, 1, 3)) == -1
    assert permutation_sign((3, 1, 2)) == 1
    assert permutation_sign((1, 1)) == 0
    assert permutation_sign(()) == 1


def test_hodge_h1_examples():
    """*X = Y∧T, *Y = −X∧T, *T = X∧Y."""
    x, y, t = (MultiVector.basis(1, i) for i in (1, 2, 3))
    assert hodge(x) == MultiVector.basis(1, 2, 3)
    assert hodge(y) == -MultiVector.basis(1, 1, 3)
    assert hodge(t) == MultiVector.basis(1, 1, 2)
    assert hodge(y).coefficient(1, 3) == -1.0


@pytest.mark.parametrize("n", [1, 2])
def test_hodge_sign_exhaustive(n: int):
    """Every basis element gets the sign of sorting I followed by its complement."""
    for grade in range(1, 2 * n + 1):
        for index in _index_sets(n, grade):
            star = tuple(i for i in range(1, 2 * n + 2) if i not in index)
            expected = permutation_sign(index + star)
            assert hodge_sign(n, index) == expected
            out = hodge(MultiVector.basis(n, *index))
            assert out.grade == 2 * n + 1 - grade
            assert dict(out.terms) == {star: float(expected)}


@pytest.mark.parametrize("n", [1, 2])
def test_hodge_is_an_involution(n: int):
    """In odd total dimension ** is the identity."""
    rng = np.random.default_rng(n)
    for grade in range(1, 2 * n + 1):
        terms = {k: float(rng.normal()) for k in _index_sets(n, grade)}
        v = MultiVector(n, grade, terms)
        assert hodge(hodge(v)).isclose(v)


def test_hodge_of_horizontal_normal():
    """*(n1 X + n2 Y) = n1 Y∧T − n2 X∧T."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        n1, n2 = (float(c) for c in rng.normal(size=2))
        v = MultiVector.from_frame_vector(FrameVector(n1, n2, 0.0))
        expected = n1 * MultiVector.basis(1, 2, 3) - n2 * MultiVector.basis(1, 1, 3)
        assert hodge(v).isclose(expected, atol=0.0)


def test_hodge_rejects_extreme_grades():
    """Grades 0 and 2n+1 are outside the operator's domain."""
    with pytest.raises(ValueError, match="grades 1..2"):
        hodge(MultiVector.basis(1, 1, 2, 3))


@pytest.mark.parametrize("grade", [1, 2])
def test_pairing_is_kronecker(grade: int):
    """⟨θ_I | W_J⟩ = δ_IJ on basis elements of H^1."""
    sets = _index_sets(1, grade)
    for i, j in itertools.product(sets, sets):
        value = pair(MultiForm.basis(1, *i), MultiVector.basis(1, *j))
        assert value == (1.0 if i == j else 0.0)


def test_pairing_wedge_of_forms():
    """⟨dy∧θ | Y∧T⟩ = 1."""
    form = MultiForm.basis(1, 2) ^ contact_form(1)
    assert pair(form, MultiVector.basis(1, 2, 3)) == 1.0
    assert pair(form, MultiVector.basis(1, 1, 3)) == 0.0


def test_pairing_errors():
    """Grade and dimension must match."""
    with pytest.raises(ValueError, match="grade mismatch"):
        pair(MultiForm.basis(1, 1), MultiVector.basis(1, 1, 2))
    with pytest.raises(DimensionMismatchError):
        pair(MultiForm.basis(1, 1), MultiVector.basis(2, 1))


def test_determinant_convention():
    """⟨α∧β | v∧w⟩ = α(v)β(w) − α(w)β(v)."""
    rng = np.random.default_rng(12)
    for _ in range(20):
        a, b = MultiForm.from_components(rng.normal(size=3)), MultiForm.from_components(
            rng.normal(size=3)
        )
        v, w = FrameVector.from_coeffs(rng.normal(size=3)), FrameVector.from_coeffs(
            rng.normal(size=3)
        )
        av = pair_frame_vectors(a, [v])
        aw = pair_frame_vectors(a, [w])
        bv = pair_frame_vectors(b, [v])
        bw = pair_frame_vectors(b, [w])
        assert pair_frame_vectors(a ^ b, [v, w]) == pytest.approx(av * bw - aw * bv, abs=1e-12)
        wedge = MultiVector.from_frame_vector(v) ^ MultiVector.from_frame_vector(w)
        assert pair(a ^ b, wedge) == pytest.approx(av * bw - aw * bv, abs=1e-12)


def test_contact_form_on_coordinate_vectors():
    """θ(∂_x) at (0, 1, 0) is ½ and θ(∂_t) is 1."""
    p = GroupElement(0.0, 1.0, 0.0)
    theta = contact_form(1)
    assert pair_coordinate_vectors(theta, [[1.0, 0.0, 0.0]], p) == 0.5
    assert pair_coordinate_vectors(theta, [[0.0, 0.0, 1.0]], p) == 1.0
    assert pair_coordinate_vectors(theta, [[0.0, 1.0, 0.0]], p) == 0.0


def test_wedge_sign_and_vanishing():
    """Wedge is antisymmetric, squares to zero and vanishes past top grade."""
    x, y = MultiVector.basis(1, 1), MultiVector.basis(1, 2)
    assert (x ^ y) == -(y ^ x)
    assert not (x ^ x).terms
    top = MultiVector.basis(1, 1, 2, 3)
    zero = top.wedge(x)
    assert not zero.terms
    assert zero.grade == 4
    assert not (x ^ top).terms
    with pytest.raises(ValueError, match="grade must be in 0..3"):
        MultiVector(1, 4, {(1, 2, 3, 3): 1.0})
    with pytest.raises(ValueError, match="hodge is defined"):
        hodge(zero)


def test_linear_structure_and_repr():
    """Sums combine coefficients and repr names the frame."""
    v = MultiVector.basis(1, 1) + 2.0 * MultiVector.basis(1, 3)
    assert v.coefficient(3) == 2.0
    assert repr(v) == "MultiVector(n=1, grade=1, 1.0*X + 2.0*T)"
    assert repr(contact_form(1)) == "MultiForm(n=1, grade=1, 1.0*θ)"
    assert v.to_frame_vector() == FrameVector(1.0, 0.0, 2.0)
    with pytest.raises(TypeError):
        MultiForm.basis(1, 1) + MultiVector.basis(1, 1)  # pyright: ignore[reportOperatorIssue]


@pytest.mark.parametrize(
    ("terms", "match"),
    [
        ({(2, 1): 1.0}, "strictly increasing"),
        ({(1,): 1.0}, "does not have grade"),
        ({(1, 4): 1.0}, "out of range"),
        ({(1, 2): float("nan")}, "finite"),
    ],
)
def test_bad_terms_rejected(terms: dict[tuple[int, ...], float], match: str):
    """Index sets must be increasing, in range and of the right grade."""
    with pytest.raises(ValueError, match=match):
        MultiVector(1, 2, terms)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
