"""Dataclass metaclasses and Maker base for the nested Config pattern.

Every tunable component in horient owns a nested `Config(Fig)`:

    class NewtonSolver:
        class Config(Fig["NewtonSolver"]):
            max_iter: int = 50

        def __init__(self, config: Config) -> None: ...

    solver = NewtonSolver.Config(max_iter=20).make()

`finalize()` is where derived defaults are filled in and values validated;
`make()` always finalizes first.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from types import CellType, MethodType
from typing import (
    TYPE_CHECKING,
    Any,
    ClassVar,
    Generic,
    Protocol,
    cast,
    runtime_checkable,
)

import copy
import dataclasses

from typing_extensions import Self, TypeVar, dataclass_transform


if TYPE_CHECKING:
    from horient.custom_types import DataclassLike, Makeable


__all__ = [
    "Fig",
    "Maker",
]


_T = TypeVar("_T")
_ParentT = TypeVar("_ParentT", default=Any)


@runtime_checkable
class _HasFinalize(Protocol):
    def finalize(self) -> Self: ...


class MakerMeta(type):
    """Metaclass capturing the enclosing class of a nested Config.

    __set_name__ runs when `class Config(Fig)` is defined inside `Owner`, so
    `Owner.Config.parent_class is Owner` and `make()` knows what to build.
    """

    def _parent_class(cls) -> type | None:
        return None

    def __set_name__(cls, owner: type[_ParentT], name: str) -> None:
        def _parent_class(cls: MakerMeta) -> type[_ParentT]:
            del cls
            return owner

        # MethodType keeps the binding picklable.
        cls._parent_class = MethodType(_parent_class, cls)  # ty: ignore[invalid-assignment]
        if owner_name := getattr(owner, "__name__", ""):
            cls.__name__ = f"{owner_name}.{name}"

    @property
    def parent_class(cls) -> type | None:
        return cls._parent_class()


class Maker(Generic[_ParentT], metaclass=MakerMeta):
    """Base class providing make/finalize/update for configs."""

    __slots__: ClassVar[tuple[str, ...]] = ("_finalized",)

    def __init__(self) -> None:
        self._finalized = False

    @property
    def parent_class(self) -> type[_ParentT] | None:
        return type(self)._parent_class()

    def make(self) -> _ParentT:
        """Finalize config and instantiate the parent class.

        Returns:
          instance: Instance of the parent class.

        Raises:
          ValueError: If not nested in a parent class, or if finalize()
            rejects the values.

        """
        config = self.finalize()
        cls = config.parent_class
        if cls is None:
            raise ValueError("Maker must be nested in a parent class")
        return cls(config)  # pyright: ignore[reportCallIssue]

    def finalize(self) -> Self:
        """Create a finalized copy with nested configs finalized.

        Override to derive defaults or validate; call super() first.

        Returns:
          finalized: A shallow copy with _finalized=True.

        """
        r = copy.copy(self)
        for name in _field_names(r):
            value = getattr(r, name)
            finalized_value = _finalize_value(value)
            if finalized_value is not value:
                object.__setattr__(r, name, finalized_value)
        object.__setattr__(r, "_finalized", True)
        return r

    def update(
        self,
        source: DataclassLike | Makeable[object] | None = None,
        *,
        skip_missing: bool = False,
        **kwargs: Any,
    ) -> Self:
        """Update config attributes from source and/or kwargs.

        Args:
          source: Optional config whose fields are copied first.
          skip_missing: If True, ignore keys this config does not define.
          **kwargs: Field overrides; these win over `source`.

        Returns:
          self: Updated instance for method chaining.

        """
        valid = set(_field_names(self))
        if source is not None:
            for name in _field_names(source):
                if name in kwargs or (skip_missing and name not in valid):
                    continue
                setattr(self, name, getattr(source, name))
        for k, v in kwargs.items():
            if skip_missing and k not in valid:
                continue
            setattr(self, k, v)
        return self


class _DataclassMeta(type):
    __classcell__: CellType | None = None

    def __new__(
        mcls: type[_DataclassMeta],
        name: str,
        bases: tuple[type, ...],
        attrs: dict[str, object],
        *,
        frozen: bool = False,
        eq: bool = True,
        slots: bool = True,
        require_defaults: bool = True,
    ) -> _DataclassMeta:
        cls = super().__new__(mcls, name, bases, attrs)
        # Carried into the slotted re-creation so zero-arg super() binds to it.
        if classcell := attrs.get("__classcell__"):
            cls.__classcell__ = cast(CellType, classcell)
        if "__slots__" in cls.__dict__:
            return cls
        cls = dataclasses.dataclass(
            cls,
            kw_only=True,
            frozen=frozen,
            eq=eq,
            slots=slots,
            weakref_slot=slots,
        )
        if require_defaults:
            annotations = cast(dict[str, object], attrs.get("__annotations__", {}))
            for field in dataclasses.fields(cls):  # pyright: ignore[reportArgumentType]
                if field.name not in annotations:
                    continue
                if (
                    field.default is dataclasses.MISSING
                    and field.default_factory is dataclasses.MISSING
                ):
                    raise TypeError(
                        f"{name}.{field.name} must have a default value. "
                        f"Use require_defaults=False to disable this check.",
                    )
        return cast(_DataclassMeta, cls)


@dataclass_transform(kw_only_default=True)
class FigMeta(_DataclassMeta, MakerMeta):
    """Combined metaclass: automatic dataclass plus parent-class tracking."""


class Fig(Maker[_ParentT], metaclass=FigMeta):
    """Dataclass with make/finalize/update for the nested Config pattern."""

    __slots__: ClassVar[tuple[str, ...]] = ()


def _field_names(obj: object) -> Iterator[str]:
    if dataclasses.is_dataclass(obj):
        for field in dataclasses.fields(obj):
            yield field.name


def _finalize_value(value: _T) -> _T:
    """Finalize nested configs inside fields, preserving container types."""
    if isinstance(value, _HasFinalize) and not getattr(value, "_finalized", False):
        return value.finalize()  # ty: ignore[invalid-return-type]
    if isinstance(value, type):
        return value
    if isinstance(value, Sequence) and not isinstance(value, (str, bytes)):
        items = [_finalize_value(v) for v in value]
        if all(a is b for a, b in zip(items, value, strict=True)):
            return value
        if isinstance(value, tuple) and type(value) is not tuple:
            return type(value)(*items)  # pyright: ignore[reportArgumentType]
        return type(value)(items)  # pyright: ignore[reportCallIssue]
    if isinstance(value, Mapping):
        finalized = {k: _finalize_value(v) for k, v in value.items()}  # pyright: ignore[reportUnknownVariableType]
        return type(value)(finalized)  # pyright: ignore[reportCallIssue]
    return value
