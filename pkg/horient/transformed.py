"""Images of patches under Heisenberg automorphisms."""

from __future__ import annotations

from typing import Generic, TypeVar

import numpy as np
import numpy.typing as npt
from typing_extensions import override

import wrapt

from horient.custom_types import FloatArray
from horient.group import Automorphism, GroupElement, automorphism_jacobian
from horient.surfaces import ParametrizedPatch


__all__ = ["TransformedPatch", "transform_patch"]

_P = TypeVar("_P", bound=ParametrizedPatch)


# wrapt.ObjectProxy is generic in the stubs only; Generic carries the parameter.
class TransformedPatch(wrapt.ObjectProxy, Generic[_P]):  # pyright: ignore[reportMissingTypeArgument]
    """m ∘ S, reusing the ranges, seam and metadata of S.

    Points go through m and tangents through its (constant) Jacobian, so the
    proxy is still an `isinstance` match for the patch class it wraps.
    """

    __wrapped__: _P

    _self_automorphism: Automorphism
    _self_jacobian: FloatArray

    def __init__(self, wrapped: _P, automorphism: Automorphism) -> None:
        super().__init__(wrapped)  # pyright: ignore[reportUnknownMemberType]
        self._self_automorphism = automorphism
        self._self_jacobian = automorphism_jacobian(automorphism, wrapped.n)

    @property
    def automorphism(self) -> Automorphism:
        return self._self_automorphism

    @property
    def original(self) -> _P:
        return self.__wrapped__

    def evaluate(self, r: npt.ArrayLike, s: npt.ArrayLike) -> FloatArray:
        return self._self_automorphism.apply_coords(self.__wrapped__.evaluate(r, s))

    def jacobian(
        self,
        r: npt.ArrayLike,
        s: npt.ArrayLike,
    ) -> tuple[FloatArray, FloatArray]:
        gr, gs = self.__wrapped__.jacobian(r, s)
        jac = self._self_jacobian
        return np.tensordot(jac, gr, axes=1), np.tensordot(jac, gs, axes=1)

    def point(self, r: float, s: float) -> GroupElement:
        return GroupElement.from_coords(self.evaluate(r, s))

    @override
    def __repr__(self) -> str:
        return f"TransformedPatch({self.__wrapped__!r}, {self._self_automorphism!r})"


def transform_patch(S: ParametrizedPatch, m: Automorphism) -> ParametrizedPatch:
    """The patch (r, s) ↦ m(γ(r, s))."""
    return TransformedPatch(S, m)  # pyright: ignore[reportReturnType]
