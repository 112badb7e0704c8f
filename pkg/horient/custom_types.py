"""Shared protocols, literals and array aliases."""

from __future__ import annotations

from typing import (
    ClassVar,
    Literal,
    Protocol,
    TypeAlias,
    runtime_checkable,
)

import dataclasses

import numpy as np
import numpy.typing as npt
from typing_extensions import Self, TypeVar


__all__ = [
    "BasisDirection",
    "DataclassLike",
    "FloatArray",
    "Makeable",
    "Mode",
    "NormalDirection",
    "Verdict",
]

_T_co = TypeVar("_T_co", covariant=True, default=object)

FloatArray: TypeAlias = npt.NDArray[np.float64]

Mode: TypeAlias = Literal["euclidean", "heisenberg"]
Verdict: TypeAlias = Literal["orientable", "non-orientable", "inconclusive"]
BasisDirection: TypeAlias = Literal["euclidean-to-frame", "frame-to-euclidean"]
NormalDirection: TypeAlias = Literal["euclidean-to-h", "h-to-euclidean"]


@runtime_checkable
class DataclassLike(Protocol):
    """Protocol for objects that behave like dataclasses."""

    __dataclass_fields__: ClassVar[dict[str, dataclasses.Field[object]]]


@runtime_checkable
class Makeable(Protocol[_T_co]):
    """Protocol for configs with make(), finalize() and update()."""

    _finalized: bool

    @property
    def parent_class(self) -> type[_T_co] | None: ...

    def make(self) -> _T_co: ...
    def finalize(self) -> Self: ...
    def update(
        self,
        source: DataclassLike | Makeable[object] | None = None,
        *,
        skip_missing: bool = False,
        **kwargs: object,
    ) -> Self: ...
