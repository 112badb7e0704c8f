"""Exterior algebra of the Heisenberg Lie algebra.

Multivectors are sparse maps from strictly increasing 1-based index tuples
over (X_1..X_n, Y_1..Y_n, T) to coefficients. Forms use the dual basis
θ_1..θ_{2n+1}; θ_j = dx_j, θ_{n+j} = dy_j and θ_{2n+1} is the contact form
θ = dt − ½ Σ_j (x_j dy_j − y_j dx_j).
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from typing import ClassVar

import itertools
import math

import numpy as np
import numpy.typing as npt
from typing_extensions import Self, override

from horient.group import (
    DimensionMismatchError,
    FrameVector,
    GroupElement,
    change_basis,
)


__all__ = [
    "MultiForm",
    "MultiVector",
    "contact_form",
    "hodge",
    "hodge_sign",
    "pair",
    "pair_coordinate_vectors",
    "pair_frame_vectors",
    "permutation_sign",
]


IndexSet = tuple[int, ...]


def permutation_sign(indices: Sequence[int]) -> int:
    """Sign of the permutation sorting `indices`; 0 if an index repeats."""
    if len(set(indices)) != len(indices):
        return 0
    inversions = sum(
        1 for a, b in itertools.combinations(indices, 2) if a > b
    )
    return -1 if inversions % 2 else 1


def _complement(n: int, index: IndexSet) -> IndexSet:
    return tuple(i for i in range(1, 2 * n + 2) if i not in index)


def hodge_sign(n: int, index: IndexSet) -> int:
    """(−1)^σ(I), σ counting pairs (i ∈ I, l ∈ I*) with i > l."""
    star = _complement(n, index)
    sigma = sum(1 for i in index for l in star if i > l)
    return -1 if sigma % 2 else 1


class _Graded:
    """Shared storage and linear structure of MultiVector and MultiForm."""

    __slots__: ClassVar[tuple[str, ...]] = ("grade", "n", "terms")
    _symbols: ClassVar[str] = "W"

    n: int
    grade: int
    terms: Mapping[IndexSet, float]

    def __init__(
        self,
        n: int,
        grade: int,
        terms: Mapping[Sequence[int], float] | None = None,
    ) -> None:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        # Past top grade only the zero element exists.
        if grade < 0 or (grade > 2 * n + 1 and terms):
            raise ValueError(f"grade must be in 0..{2 * n + 1}, got {grade}")
        self.n = n
        self.grade = grade
        clean: dict[IndexSet, float] = {}
        for key, coeff in (terms or {}).items():
            index = tuple(int(i) for i in key)
            if len(index) != grade:
                raise ValueError(f"index set {index} does not have grade {grade}")
            if any(b <= a for a, b in itertools.pairwise(index)):
                raise ValueError(f"index set {index} must be strictly increasing")
            if index and not (1 <= index[0] and index[-1] <= 2 * n + 1):
                raise ValueError(f"index set {index} out of range 1..{2 * n + 1}")
            if not math.isfinite(coeff):
                raise ValueError(f"coefficient of {index} must be finite")
            if coeff != 0.0:
                clean[index] = clean.get(index, 0.0) + float(coeff)
        self.terms = clean

    @classmethod
    def basis(cls, n: int, *index: int) -> Self:
        """Basis element for an increasing index set (W_I or θ_I)."""
        return cls(n, len(index), {tuple(index): 1.0})

    @classmethod
    def from_components(cls, components: npt.ArrayLike) -> Self:
        """Grade-1 element from its 2n+1 components."""
        c = np.asarray(components, dtype=np.float64).reshape(-1)
        if c.size < 3 or c.size % 2 == 0:
            raise DimensionMismatchError(f"need 2n+1 components, got {c.size}")
        n = (c.size - 1) // 2
        return cls(n, 1, {(i + 1,): float(v) for i, v in enumerate(c)})

    def coefficient(self, *index: int) -> float:
        return self.terms.get(tuple(index), 0.0)

    def items(self) -> Iterator[tuple[IndexSet, float]]:
        yield from sorted(self.terms.items())

    def _check(self, other: _Graded) -> None:
        if type(self) is not type(other):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if self.n != other.n:
            raise DimensionMismatchError(f"operands in H^{self.n} and H^{other.n}")

    def __add__(self, other: Self) -> Self:
        self._check(other)
        if self.grade != other.grade:
            raise ValueError(f"cannot add grades {self.grade} and {other.grade}")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return type(self)(self.n, self.grade, terms)

    def __neg__(self) -> Self:
        return type(self)(self.n, self.grade, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: Self) -> Self:
        return self + (-other)

    def __rmul__(self, scalar: float) -> Self:
        return type(self)(
            self.n, self.grade, {k: scalar * v for k, v in self.terms.items()}
        )

    def wedge(self, other: Self) -> Self:
        """Exterior product; index sets are re-sorted with the permutation sign."""
        self._check(other)
        if self.grade + other.grade > 2 * self.n + 1:
            return type(self)(self.n, self.grade + other.grade)
        terms: dict[IndexSet, float] = {}
        for (i, a), (j, b) in itertools.product(self.terms.items(), other.terms.items()):
            joined = i + j
            sign = permutation_sign(joined)
            if sign:
                key = tuple(sorted(joined))
                terms[key] = terms.get(key, 0.0) + sign * a * b
        return type(self)(self.n, self.grade + other.grade, terms)

    def __xor__(self, other: Self) -> Self:
        return self.wedge(other)

    def isclose(self, other: Self, atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return self.grade == other.grade and all(
            abs(self.coefficient(*k) - other.coefficient(*k)) <= atol for k in keys
        )

    @override
    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        assert isinstance(other, _Graded)
        return (
            self.n == other.n
            and self.grade == other.grade
            and dict(self.terms) == dict(other.terms)
        )

    @override
    def __hash__(self) -> int:
        return hash((type(self).__name__, self.n, self.grade, tuple(self.items())))

    def _name(self, i: int) -> str:
        return f"{self._symbols}{i}"

    @override
    def __repr__(self) -> str:
        if not self.terms:
            return f"{type(self).__name__}(n={self.n}, grade={self.grade}, 0)"
        body = " + ".join(
            f"{v!r}*" + "∧".join(self._name(i) for i in k) for k, v in self.items()
        )
        return f"{type(self).__name__}(n={self.n}, grade={self.grade}, {body})"


class MultiVector(_Graded):
    """Element of Λ_k 𝔥 on the basis W_I = W_{i_1} ∧ ... ∧ W_{i_k}."""

    __slots__: ClassVar[tuple[str, ...]] = ()

    @classmethod
    def from_frame_vector(cls, v: FrameVector) -> MultiVector:
        return cls.from_components(v.coeffs)

    def to_frame_vector(self) -> FrameVector:
        if self.grade != 1:
            raise ValueError(f"only grade-1 multivectors are frame vectors, got {self.grade}")
        return FrameVector.from_coeffs(
            [self.coefficient(i) for i in range(1, 2 * self.n + 2)]
        )

    @override
    def _name(self, i: int) -> str:
        n = self.n
        if i == 2 * n + 1:
            return "T"
        letter = "X" if i <= n else "Y"
        j = i if i <= n else i - n
        return letter if n == 1 else f"{letter}{j}"


class MultiForm(_Graded):
    """Element of Λ^k 𝔥 on the dual basis θ_I."""

    __slots__: ClassVar[tuple[str, ...]] = ()

    @override
    def _name(self, i: int) -> str:
        n = self.n
        if i == 2 * n + 1:
            return "θ"
        letter = "dx" if i <= n else "dy"
        j = i if i <= n else i - n
        return letter if n == 1 else f"{letter}{j}"


def contact_form(n: int) -> MultiForm:
    """θ = θ_{2n+1}."""
    return MultiForm.basis(n, 2 * n + 1)


def hodge(v: MultiVector) -> MultiVector:
    """Hodge star *W_I = (−1)^σ(I) W_{I*}, extended linearly."""
    n = v.n
    if not 1 <= v.grade <= 2 * n:
        raise ValueError(f"hodge is defined for grades 1..{2 * n}, got {v.grade}")
    return MultiVector(
        n,
        2 * n + 1 - v.grade,
        {_complement(n, k): hodge_sign(n, k) * c for k, c in v.terms.items()},
    )


def pair(omega: MultiForm, v: MultiVector) -> float:
    """⟨ω | v⟩ with ⟨θ_I | W_J⟩ = δ_IJ."""
    if omega.n != v.n:
        raise DimensionMismatchError(f"form in H^{omega.n}, multivector in H^{v.n}")
    if omega.grade != v.grade:
        raise ValueError(f"grade mismatch: form {omega.grade}, multivector {v.grade}")
    return math.fsum(c * v.coefficient(*k) for k, c in omega.terms.items())


def pair_frame_vectors(omega: MultiForm, vectors: Sequence[FrameVector]) -> float:
    """⟨ω | v_1 ∧ ... ∧ v_k⟩ for frame vectors, by the determinant convention."""
    if len(vectors) != omega.grade:
        raise ValueError(f"form of grade {omega.grade} needs {omega.grade} vectors, got {len(vectors)}")
    if any(v.n != omega.n for v in vectors):
        raise DimensionMismatchError("vectors and form live in different groups")
    if not vectors:
        return omega.coefficient()
    cols = np.stack([v.coeffs for v in vectors], axis=-1)
    return math.fsum(
        c * float(np.linalg.det(cols[[i - 1 for i in k], :]))
        for k, c in omega.terms.items()
    )


def pair_coordinate_vectors(
    omega: MultiForm,
    vectors: Sequence[npt.ArrayLike],
    p: GroupElement,
) -> float:
    """Pair ω with coordinate-basis tangent vectors at p.

    The vectors are first rewritten in the frame at p, so e.g. θ applied to
    ∂_x at (0, 1, 0) gives ½.
    """
    frame = [change_basis(v, p, "euclidean-to-frame") for v in vectors]
    return pair_frame_vectors(omega, [f for f in frame if isinstance(f, FrameVector)])
