"""Pretty printing for configs and analysis reports."""

from __future__ import annotations

from pprint import PrettyPrinter as _PrettyPrinter
from typing import IO, Protocol, TypeVar, runtime_checkable

import copy
import dataclasses
import io
import re
import warnings

import numpy as np
from typing_extensions import Self, override

from horient.exterior import MultiForm, MultiVector
from horient.group import FrameVector, GroupElement


__all__ = [
    "ReportPrinter",
    "pformat",
    "pprint",
]

_T = TypeVar("_T")
_T_contra = TypeVar("_T_contra", contravariant=True)


@runtime_checkable
class _HasFinalize(Protocol):
    def finalize(self) -> Self: ...


class SupportsWrite(Protocol[_T_contra]):
    def write(self, s: _T_contra, /) -> object: ...


# Lines in a field value before continuation pipes are drawn.
_DEFAULT_CONTINUATION_PIPE_THRESHOLD = 50

# Sequences narrower than this always stay on one line.
_SHORT_SEQUENCE_MAX_WIDTH = 40


def pformat(
    obj: object,
    indent: int = 2,
    width: int = 88,
    depth: int | None = None,
    *,
    float_digits: int | None = 12,
    finalize: bool = True,
    continuation_pipe: int = _DEFAULT_CONTINUATION_PIPE_THRESHOLD,
    hide_default_values: bool = True,
    short_sequence_max_width: int = _SHORT_SEQUENCE_MAX_WIDTH,
) -> str:
    """Format configs, reports and numeric results for humans.

    Args:
      obj: Object to format.
      indent: Spaces per nesting level.
      width: Maximum line width.
      depth: Maximum nesting depth (None for unlimited).
      float_digits: Significant digits for floats; None keeps full repr.
      finalize: Finalize unfinalized configs before printing.
      continuation_pipe: Lines threshold for continuation pipes (0=always, -1=never).
      hide_default_values: Omit dataclass fields equal to their defaults.
      short_sequence_max_width: Max width for single-line sequences.

    Returns:
      formatted: Pretty-printed string.

    """
    return ReportPrinter(
        indent=indent,
        width=width,
        depth=depth,
        float_digits=float_digits,
        finalize=finalize,
        continuation_pipe=continuation_pipe,
        hide_default_values=hide_default_values,
        short_sequence_max_width=short_sequence_max_width,
    ).pformat(obj)


def pprint(
    obj: object,
    stream: IO[str] | None = None,
    indent: int = 2,
    width: int = 88,
    depth: int | None = None,
    *,
    float_digits: int | None = 12,
    finalize: bool = True,
    continuation_pipe: int = _DEFAULT_CONTINUATION_PIPE_THRESHOLD,
    hide_default_values: bool = True,
    short_sequence_max_width: int = _SHORT_SEQUENCE_MAX_WIDTH,
) -> None:
    """Write `pformat(obj)` to `stream` (sys.stdout by default)."""
    ReportPrinter(
        stream=stream,
        indent=indent,
        width=width,
        depth=depth,
        float_digits=float_digits,
        finalize=finalize,
        continuation_pipe=continuation_pipe,
        hide_default_values=hide_default_values,
        short_sequence_max_width=short_sequence_max_width,
    ).pprint(obj)


def _plain(obj: object) -> object:
    """Numpy and group objects as builtin numbers and lists."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, GroupElement):
        return tuple(obj.coords.tolist())
    if isinstance(obj, FrameVector):
        return tuple(obj.coeffs.tolist())
    if isinstance(obj, (MultiVector, MultiForm)):
        return repr(obj)
    return obj


class ReportPrinter(_PrettyPrinter):
    """PrettyPrinter that lays dataclasses out one field per line.

    Floats are rounded to `float_digits` significant digits and numpy
    values print as plain Python numbers.
    """

    def __init__(
        self,
        stream: IO[str] | None = None,
        indent: int = 2,
        width: int = 88,
        depth: int | None = None,
        *,
        float_digits: int | None = 12,
        finalize: bool = True,
        continuation_pipe: int = _DEFAULT_CONTINUATION_PIPE_THRESHOLD,
        hide_default_values: bool = True,
        short_sequence_max_width: int = _SHORT_SEQUENCE_MAX_WIDTH,
    ):
        super().__init__(
            indent=indent,
            width=width,
            depth=depth,
            stream=stream,
            sort_dicts=False,
        )
        # Mirrors of the parent's private attributes, for type checkers.
        self._indent_per_level: int = indent
        self._width: int = width
        self._float_digits = float_digits
        self._finalize = finalize
        self._continuation_pipe = continuation_pipe
        self._hide_default_values = hide_default_values
        self._short_sequence_max_width = short_sequence_max_width

    @override
    def pprint(self, object: object) -> None:
        return super().pprint(self._try_to_finalize(object))

    @override
    def pformat(self, object: object) -> str:
        return super().pformat(self._try_to_finalize(object))

    @override
    def format(
        self,
        object: object,
        context: dict[int, int],
        maxlevels: int,
        level: int,
    ) -> tuple[str, bool, bool]:
        object = _plain(object)
        if isinstance(object, float) and self._float_digits is not None:
            return _format_float(object, self._float_digits), True, False
        if (
            self._finalize
            and callable(getattr(object, "make", None))
            and callable(getattr(object, "finalize", None))
            and not getattr(object, "_finalized", False)
        ):
            warnings.warn(f"Found potentially unfinalized config: {object}.", stacklevel=2)
        return super().format(object, context, maxlevels, level)

    def _format(
        self,
        object: object,
        stream: SupportsWrite[str],
        indent: int,
        allowance: int,
        context: dict[int, int],
        level: int,
    ) -> None:
        obj = _plain(object)
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type) and id(obj) not in context:
            # Always one field per line, even when the repr would fit.
            context[id(obj)] = 1
            self._pprint_dataclass(obj, stream, indent, allowance, context, level + 1)
            del context[id(obj)]
            return
        super()._format(  # pyright: ignore[reportAttributeAccessIssue,reportUnknownMemberType]
            obj, stream, indent, allowance, context, level
        )

    def _try_to_finalize(self, obj: _T) -> _T:
        """Deep-copy and finalize obj if it is an unfinalized config."""
        if (
            self._finalize
            and isinstance(obj, _HasFinalize)
            and not getattr(obj, "_finalized", False)
        ):
            try:
                obj = copy.deepcopy(obj).finalize()  # ty: ignore[invalid-assignment]
            except Exception as e:  # noqa: BLE001
                warnings.warn(str(e), stacklevel=2)
        return obj

    def _pprint_dataclass(
        self,
        obj: object,
        stream: SupportsWrite[str],
        indent: int,
        allowance: int,
        context: dict[int, int],
        level: int,
    ) -> None:
        cls_name = obj.__class__.__qualname__
        items = [
            (f.name, getattr(obj, f.name))
            for f in dataclasses.fields(obj)  # pyright: ignore[reportArgumentType]  # ty: ignore[invalid-argument-type]
            if f.repr
        ]
        if self._hide_default_values:
            items = _filter_default_items(obj, items)
        stream.write(cls_name + "(")
        self._format_namespace_items(items, stream, indent, allowance, context, level)
        stream.write(")")

    def _format_namespace_items(
        self,
        items: list[tuple[str, object]],
        stream: SupportsWrite[str],
        indent: int,
        allowance: int,
        context: dict[int, int],
        level: int,
    ) -> None:
        if not items:
            return
        write = stream.write
        write("\n")
        item_indent, base_indent = _get_level_indents(level, self._indent_per_level)
        for i, (key, ent) in enumerate(items):
            last = i == len(items) - 1
            write(" " * item_indent + key + "=")
            if id(ent) in context:
                write("...")
            else:
                write(
                    self._format_namespace_value(
                        ent, context, level, item_indent, allowance if last else 1, len(items)
                    )
                )
            if not last:
                write(",\n")
        write("\n" + " " * base_indent)

    def _format_namespace_value(
        self,
        value: object,
        context: dict[int, int],
        level: int,
        item_indent: int,
        allowance: int,
        num_items: int,
    ) -> str:
        temp = io.StringIO()
        self._format(value, temp, item_indent, allowance, context, level)
        formatted = _collapse_multiline_value(temp.getvalue(), self._short_sequence_max_width)
        if _should_add_continuation_pipes(formatted, num_items, self._continuation_pipe):
            formatted = "\n".join(_add_pipes_to_lines(formatted.split("\n"), item_indent))
        return formatted

    @override
    def _pprint_list(
        self,
        object: list[object],
        stream: SupportsWrite[str],
        indent: int,
        allowance: int,
        context: dict[int, int],
        level: int,
    ) -> None:
        stream.write("[")
        if object:
            self._format_items(object, stream, indent, allowance + 1, context, level)
        stream.write("]")

    @override
    def _format_items(
        self,
        items: list[object],
        stream: SupportsWrite[str],
        indent: int,
        allowance: int,
        context: dict[int, int],
        level: int,
    ) -> None:
        one_line = io.StringIO()
        delim = ""
        for item in items:
            one_line.write(delim)
            self._format(item, one_line, 0, 0, context, level)
            delim = ", "
        text = one_line.getvalue()
        width = len(text) + 2
        if (
            "\n" not in text
            and (width < self._short_sequence_max_width or indent + width + allowance <= self._width)
        ):
            stream.write(text)
            return
        write = stream.write
        write("\n")
        item_indent, base_indent = _get_level_indents(level, self._indent_per_level)
        for i, ent in enumerate(items):
            write(" " * item_indent)
            if id(ent) in context:
                write("...")
            else:
                temp = io.StringIO()
                self._format(ent, temp, item_indent, 1, context, level)
                write(_collapse_multiline_value(temp.getvalue(), self._short_sequence_max_width))
            if i < len(items) - 1:
                write(",\n")
        write("\n" + " " * base_indent)


def _format_float(value: float, digits: int) -> str:
    short = f"{value:.{digits}g}"
    if not np.isfinite(value) or float(short) == value:
        return repr(value)
    return short


def _get_level_indents(level: int, indent_per_level: int) -> tuple[int, int]:
    """(item_indent, base_indent) at a nesting level."""
    item_indent = indent_per_level * level
    return item_indent, item_indent - indent_per_level


def _collapse_multiline_value(formatted: str, max_width: int) -> str:
    if "\n" not in formatted:
        return formatted
    oneline = re.sub(r"\s+", " ", formatted.replace("\n", ""))
    oneline = oneline.replace("( ", "(").replace(" )", ")").replace("[ ", "[").replace(" ]", "]")
    return oneline if len(oneline) <= max_width else formatted


def _add_pipes_to_lines(lines: list[str], column: int) -> list[str]:
    out = lines[:1]
    for i, line in enumerate(lines[1:], 1):
        char = " " if i == len(lines) - 1 else "│"
        if len(line) > column and line[column].isspace():
            line = line[:column] + char + line[column + 1 :]
        out.append(line)
    return out


def _should_add_continuation_pipes(formatted: str, num_items: int, threshold: int) -> bool:
    if threshold < 0 or num_items <= 1 or "\n" not in formatted:
        return False
    return threshold == 0 or formatted.count("\n") + 1 >= threshold


def _filter_default_items(
    obj: object,
    items: list[tuple[str, object]],
) -> list[tuple[str, object]]:
    """Drop fields whose value equals the field's declared default."""
    fields = {f.name: f for f in dataclasses.fields(obj)}  # pyright: ignore[reportArgumentType]  # ty: ignore[invalid-argument-type]
    kept: list[tuple[str, object]] = []
    for name, value in items:
        f = fields[name]
        if f.default is not dataclasses.MISSING:
            default = f.default
        elif f.default_factory is not dataclasses.MISSING:
            default = f.default_factory()
        else:
            kept.append((name, value))
            continue
        try:
            same = bool(value == default)
        except (TypeError, ValueError):
            same = False
        if not same:
            kept.append((name, value))
    return kept
