"""Scalar fields on H^n and their left-invariant frame derivatives.

Every field is vectorised: points are arrays whose leading axis holds the
2n+1 coordinates (x_1..x_n, y_1..y_n, t); `value` drops that axis,
`gradient` keeps it and `hessian` doubles it.

    f = parse_polynomial("1 2 0 0\\n1 0 2 0")       # x² + y²
    horizontal_gradient(f, GroupElement(1.0, 2.0, 0.0))
    # FrameVector([2.0], [4.0], 0.0)
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from pathlib import Path
from typing import ClassVar, Final

import abc
import logging
import re

import numpy as np
import numpy.typing as npt
from typing_extensions import override

from horient.custom_types import FloatArray
from horient.group import (
    Automorphism,
    DimensionMismatchError,
    FrameVector,
    GroupElement,
    automorphism_jacobian,
)


__all__ = [
    "ComposedField",
    "DerivativeUnavailableError",
    "FrameDerivativeField",
    "OpaqueField",
    "PolynomialField",
    "PolynomialParseError",
    "ScalarField",
    "directional_derivative",
    "frame_derivatives",
    "frame_index",
    "horizontal_gradient",
    "load_polynomial",
    "parse_polynomial",
]

logger = logging.getLogger(__name__)

_EPS: Final = float(np.finfo(np.float64).eps)
_GRAD_STEP: Final = _EPS ** (1.0 / 3.0)
_HESS_STEP: Final = _EPS**0.25


class DerivativeUnavailableError(ValueError):
    """No exact derivative and no admissible finite-difference stencil."""


class PolynomialParseError(ValueError):
    """Malformed polynomial term file."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def _coords(pts: npt.ArrayLike, n: int) -> FloatArray:
    arr = np.asarray(pts, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[0] != 2 * n + 1:
        raise DimensionMismatchError(
            f"points must have {2 * n + 1} coordinates on the leading axis, got shape {arr.shape}",
        )
    return arr


class ScalarField(abc.ABC):
    """Function U ⊂ H^n → R with first and second coordinate derivatives.

    Subclasses implement `value`; the finite-difference `gradient` and
    `hessian` here are overridden wherever exact rules exist.
    """

    kind: ClassVar[str] = "field"

    n: int
    domain: tuple[FloatArray, FloatArray] | None = None
    exact_gradient: bool = False
    exact_hessian: bool = False

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @abc.abstractmethod
    def value(self, pts: npt.ArrayLike) -> FloatArray:
        """Field values; shape is `pts.shape[1:]`."""

    def gradient(self, pts: npt.ArrayLike) -> FloatArray:
        """Coordinate gradient by central differences, h = cbrt(eps)·max(1, |x|)."""
        x = _coords(pts, self.n)
        out = np.empty_like(x)
        for i in range(self.dim):
            plus, minus, step = self._stencil(x, i, _GRAD_STEP)
            out[i] = (self.value(plus) - self.value(minus)) / (2.0 * step)
        return out

    def hessian(self, pts: npt.ArrayLike) -> FloatArray:
        """Second coordinate derivatives, symmetrised.

        Differentiates the exact gradient when there is one; otherwise uses
        the four-point mixed stencil with h = eps^(1/4)·max(1, |x|).
        """
        x = _coords(pts, self.n)
        d = self.dim
        out = np.empty((d, d, *x.shape[1:]))
        if self.exact_gradient:
            for j in range(d):
                plus, minus, step = self._stencil(x, j, _GRAD_STEP)
                out[:, j] = (self.gradient(plus) - self.gradient(minus)) / (2.0 * step)
        else:
            for i in range(d):
                for j in range(i, d):
                    xi_p, xi_m, hi = self._stencil(x, i, _HESS_STEP)
                    pp, pm, hj = self._stencil(xi_p, j, _HESS_STEP)
                    mp, mm, _ = self._stencil(xi_m, j, _HESS_STEP)
                    out[i, j] = (
                        self.value(pp) - self.value(pm) - self.value(mp) + self.value(mm)
                    ) / (4.0 * hi * hj)
                    out[j, i] = out[i, j]
        return 0.5 * (out + np.swapaxes(out, 0, 1))

    def _stencil(
        self,
        x: FloatArray,
        i: int,
        rel: float,
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        h = rel * np.maximum(1.0, np.abs(x[i]))
        plus = x.copy()
        minus = x.copy()
        plus[i] = x[i] + h
        minus[i] = x[i] - h
        step = 0.5 * (plus[i] - minus[i])
        if self.domain is not None:
            lo, hi = self.domain
            if np.any(plus[i] > hi[i]) or np.any(minus[i] < lo[i]):
                raise DerivativeUnavailableError(
                    f"finite-difference stencil along coordinate {i + 1} leaves the field's domain",
                )
        return plus, minus, step

    def __call__(self, p: GroupElement) -> float:
        self._check_point(p)
        return float(self.value(p.coords))

    def _check_point(self, p: GroupElement) -> None:
        if p.n != self.n:
            raise DimensionMismatchError(f"field on H^{self.n} evaluated at a point of H^{p.n}")


def _monomials(exponents: npt.NDArray[np.int64], x: FloatArray) -> FloatArray:
    e = exponents.reshape(exponents.shape + (1,) * (x.ndim - 1))
    return np.prod(x[np.newaxis] ** e, axis=1)


class PolynomialField(ScalarField):
    """Σ c · Π x_i^{e_i} with exact derivative rules."""

    kind: ClassVar[str] = "polynomial"
    exact_gradient = True
    exact_hessian = True

    def __init__(self, n: int, terms: Iterable[tuple[Sequence[int], float]]) -> None:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        self.n = n
        merged: dict[tuple[int, ...], float] = {}
        for exps, coeff in terms:
            key = tuple(int(e) for e in exps)
            if len(key) != 2 * n + 1:
                raise DimensionMismatchError(
                    f"exponent tuple {key} needs {2 * n + 1} entries",
                )
            if any(e < 0 for e in key):
                raise ValueError(f"negative exponent in {key}")
            merged[key] = merged.get(key, 0.0) + float(coeff)
        self.terms: tuple[tuple[tuple[int, ...], float], ...] = tuple(
            (k, c) for k, c in sorted(merged.items()) if c != 0.0
        )
        self._exponents = np.array(
            [k for k, _ in self.terms], dtype=np.int64
        ).reshape(len(self.terms), 2 * n + 1)
        self._coeffs = np.array([c for _, c in self.terms], dtype=np.float64)
        self._derivatives: dict[int, PolynomialField] = {}

    @classmethod
    def coordinate(cls, n: int, index: int) -> PolynomialField:
        """The coordinate function with 1-based index into (x, y, t)."""
        exps = [0] * (2 * n + 1)
        exps[index - 1] = 1
        return cls(n, [(exps, 1.0)])

    @classmethod
    def constant(cls, n: int, c: float) -> PolynomialField:
        return cls(n, [((0,) * (2 * n + 1), c)])

    @property
    def degree(self) -> int:
        return max((sum(k) for k, _ in self.terms), default=0)

    def derivative(self, i: int) -> PolynomialField:
        """∂/∂(coordinate i), 0-based."""
        if i not in self._derivatives:
            terms = []
            for k, c in self.terms:
                if k[i]:
                    d = list(k)
                    d[i] -= 1
                    terms.append((d, c * k[i]))
            self._derivatives[i] = PolynomialField(self.n, terms)
        return self._derivatives[i]

    @override
    def value(self, pts: npt.ArrayLike) -> FloatArray:
        x = _coords(pts, self.n)
        if not self.terms:
            return np.zeros(x.shape[1:])
        coeffs = self._coeffs.reshape((-1,) + (1,) * (x.ndim - 1))
        return np.sum(coeffs * _monomials(self._exponents, x), axis=0)

    @override
    def gradient(self, pts: npt.ArrayLike) -> FloatArray:
        x = _coords(pts, self.n)
        return np.stack([self.derivative(i).value(x) for i in range(self.dim)])

    @override
    def hessian(self, pts: npt.ArrayLike) -> FloatArray:
        x = _coords(pts, self.n)
        return np.stack(
            [self.derivative(i).gradient(x) for i in range(self.dim)]
        )

    @override
    def __repr__(self) -> str:
        return f"PolynomialField(n={self.n}, terms={list(self.terms)!r})"


class OpaqueField(ScalarField):
    """User-supplied vectorised function, optionally with exact derivatives.

    `fn` (and `grad`, `hess` when given) receive arrays with the coordinates
    on the leading axis and must be safe to call concurrently.
    """

    kind: ClassVar[str] = "opaque"

    def __init__(
        self,
        fn: Callable[[FloatArray], FloatArray],
        n: int,
        *,
        grad: Callable[[FloatArray], FloatArray] | None = None,
        hess: Callable[[FloatArray], FloatArray] | None = None,
        domain: tuple[npt.ArrayLike, npt.ArrayLike] | None = None,
    ) -> None:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        self.n = n
        self._fn = fn
        self._grad = grad
        self._hess = hess
        self.exact_gradient = grad is not None
        self.exact_hessian = hess is not None
        if domain is not None:
            lo = np.asarray(domain[0], dtype=np.float64).reshape(-1)
            hi = np.asarray(domain[1], dtype=np.float64).reshape(-1)
            if lo.size != self.dim or hi.size != self.dim or np.any(lo >= hi):
                raise ValueError(f"domain must be a nonempty box in R^{self.dim}")
            self.domain = (lo, hi)

    @override
    def value(self, pts: npt.ArrayLike) -> FloatArray:
        return np.asarray(self._fn(_coords(pts, self.n)), dtype=np.float64)

    @override
    def gradient(self, pts: npt.ArrayLike) -> FloatArray:
        if self._grad is None:
            return super().gradient(pts)
        return np.asarray(self._grad(_coords(pts, self.n)), dtype=np.float64)

    @override
    def hessian(self, pts: npt.ArrayLike) -> FloatArray:
        if self._hess is None:
            return super().hessian(pts)
        return np.asarray(self._hess(_coords(pts, self.n)), dtype=np.float64)


class ComposedField(ScalarField):
    """f ∘ m for an automorphism m; derivatives by the chain rule.

    Both automorphisms have constant coordinate Jacobians J, so
    ∇(f∘m) = Jᵀ (∇f)∘m and Hess(f∘m) = Jᵀ (Hess f ∘ m) J exactly.
    """

    kind: ClassVar[str] = "composed"

    def __init__(self, field: ScalarField, automorphism: Automorphism) -> None:
        self.field = field
        self.automorphism = automorphism
        self.n = field.n
        self.exact_gradient = field.exact_gradient
        self.exact_hessian = field.exact_hessian
        self._jac = automorphism_jacobian(automorphism, field.n)

    def _mapped(self, pts: npt.ArrayLike) -> FloatArray:
        return self.automorphism.apply_coords(_coords(pts, self.n))

    @override
    def value(self, pts: npt.ArrayLike) -> FloatArray:
        return self.field.value(self._mapped(pts))

    @override
    def gradient(self, pts: npt.ArrayLike) -> FloatArray:
        return np.tensordot(self._jac.T, self.field.gradient(self._mapped(pts)), axes=1)

    @override
    def hessian(self, pts: npt.ArrayLike) -> FloatArray:
        h = self.field.hessian(self._mapped(pts))
        return np.einsum("ki,kl...,lj->ij...", self._jac, h, self._jac)


def frame_index(which: int | str, n: int) -> int:
    """Normalise a frame direction ("X", "Y2", "T" or a 1-based int) to 1-based."""
    if isinstance(which, int):
        index = which
    else:
        m = re.fullmatch(r"([XYT])(\d*)", which.strip())
        if m is None:
            raise ValueError(f"unknown frame direction {which!r}")
        letter, j = m.group(1), int(m.group(2) or 1)
        if letter == "T":
            if m.group(2):
                raise ValueError(f"T takes no index, got {which!r}")
            index = 2 * n + 1
        elif not 1 <= j <= n:
            raise ValueError(f"{which!r} needs an index in 1..{n}")
        else:
            index = j if letter == "X" else n + j
    if not 1 <= index <= 2 * n + 1:
        raise ValueError(f"frame index must be in 1..{2 * n + 1}, got {index}")
    return index


def _frame_from_gradient(grad: FloatArray, x: FloatArray, n: int) -> FloatArray:
    out = np.array(grad, copy=True)
    dt = grad[-1]
    out[:n] = grad[:n] - 0.5 * x[n : 2 * n] * dt
    out[n : 2 * n] = grad[n : 2 * n] + 0.5 * x[:n] * dt
    return out


def frame_derivatives(f: ScalarField, pts: npt.ArrayLike) -> FloatArray:
    """(X_1 f, .., X_n f, Y_1 f, .., Y_n f, T f), vectorised over points."""
    x = _coords(pts, f.n)
    return _frame_from_gradient(f.gradient(x), x, f.n)


class FrameDerivativeField(ScalarField):
    """W f for a frame field W ∈ {X_j, Y_j, T}.

    Its gradient is exact whenever f has an exact Hessian; this is what the
    reverse normal conversion and the commutator law rely on.
    """

    kind: ClassVar[str] = "frame-derivative"

    def __init__(self, field: ScalarField, which: int | str) -> None:
        self.field = field
        self.n = field.n
        self.index = frame_index(which, field.n)
        self.domain = field.domain
        self.exact_gradient = field.exact_hessian

    @override
    def value(self, pts: npt.ArrayLike) -> FloatArray:
        return frame_derivatives(self.field, pts)[self.index - 1]

    @override
    def gradient(self, pts: npt.ArrayLike) -> FloatArray:
        if not self.field.exact_hessian:
            return super().gradient(pts)
        x = _coords(pts, self.n)
        n, i = self.n, self.index - 1
        hess = self.field.hessian(x)
        if i == 2 * n:
            return hess[-1]
        dt = self.field.gradient(x)[-1]
        if i < n:
            out = hess[i] - 0.5 * x[n + i] * hess[-1]
            out[n + i] = out[n + i] - 0.5 * dt
        else:
            j = i - n
            out = hess[i] + 0.5 * x[j] * hess[-1]
            out[j] = out[j] + 0.5 * dt
        return out


def directional_derivative(f: ScalarField, which: int | str, p: GroupElement) -> float:
    """(X_j f)(p), (Y_j f)(p) or (T f)(p)."""
    f._check_point(p)  # noqa: SLF001
    return float(frame_derivatives(f, p.coords)[frame_index(which, f.n) - 1])


def horizontal_gradient(f: ScalarField, p: GroupElement) -> FrameVector:
    """∇_H f(p) = Σ_j (X_j f)(p) X_j + (Y_j f)(p) Y_j."""
    f._check_point(p)  # noqa: SLF001
    return FrameVector.horizontal(frame_derivatives(f, p.coords)[:-1])


def parse_polynomial(text: str) -> PolynomialField:
    """Parse one `coeff i_1..i_n j_1..j_n k` term per line.

    Blank lines and `#` comments are ignored; n is inferred from the first
    term and every later line must agree with it.
    """
    terms: list[tuple[list[int], float]] = []
    width: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if width is None:
            if len(fields) < 4 or (len(fields) - 1) % 2 == 0:
                raise PolynomialParseError(
                    lineno,
                    f"expected a coefficient and 2n+1 exponents, got {len(fields)} fields",
                )
            width = len(fields)
        elif len(fields) != width:
            raise PolynomialParseError(
                lineno, f"expected {width} fields like the first term, got {len(fields)}"
            )
        try:
            coeff = float(fields[0])
        except ValueError:
            raise PolynomialParseError(lineno, f"bad coefficient {fields[0]!r}") from None
        if not np.isfinite(coeff):
            raise PolynomialParseError(lineno, f"coefficient must be finite, got {fields[0]!r}")
        exps = []
        for tok in fields[1:]:
            if not (tok.isascii() and tok.isdigit()):
                raise PolynomialParseError(
                    lineno, f"exponent must be a nonnegative integer, got {tok!r}"
                )
            exps.append(int(tok))
        terms.append((exps, coeff))
    if width is None:
        raise PolynomialParseError(1, "no polynomial terms found")
    n = (width - 2) // 2
    logger.debug("parsed polynomial with %d terms on H^%d", len(terms), n)
    return PolynomialField(n, terms)


def load_polynomial(path: str | Path) -> PolynomialField:
    """Read a polynomial term file; OSError propagates to the caller."""
    return parse_polynomial(Path(path).read_text(encoding="utf-8"))
