"""Small nonlinear solvers used by characteristic-point refinement."""

from __future__ import annotations

from collections.abc import Callable
from typing import Final, Literal
from typing_extensions import Self

import dataclasses
import logging

import numpy as np
import numpy.typing as npt

from horient.custom_types import FloatArray
from horient.fig import Fig


__all__ = [
    "NewtonResult",
    "NewtonSolver",
    "finite_difference_jacobian",
    "project_onto_zero_set",
]

logger = logging.getLogger(__name__)

_GRAD_STEP: Final = float(np.finfo(np.float64).eps) ** (1.0 / 3.0)
# Condition number beyond which a Newton step is treated as singular.
_SINGULAR_COND: Final = 1e12

VectorFn = Callable[[FloatArray], FloatArray]


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class NewtonResult:
    x: FloatArray
    residual: float
    converged: bool
    iterations: int
    method: Literal["newton", "gradient"]


def _singular(j: FloatArray) -> bool:
    if not np.all(np.isfinite(j)):
        return True
    with np.errstate(divide="ignore", invalid="ignore"):
        return not np.linalg.cond(j) <= _SINGULAR_COND


def finite_difference_jacobian(fn: VectorFn, x: FloatArray) -> FloatArray:
    """Central-difference Jacobian, h = cbrt(eps)·max(1, |x_i|)."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        h = _GRAD_STEP * max(1.0, abs(float(x[i])))
        plus, minus = x.copy(), x.copy()
        plus[i] += h
        minus[i] -= h
        cols.append((fn(plus) - fn(minus)) / (plus[i] - minus[i]))
    return np.stack(cols, axis=-1)


class NewtonSolver:
    """Damped Newton iteration for square systems F(x) = 0.

    Each step starts at full length and is multiplied by `damping` until the
    residual norm decreases. A singular step hands over to backtracking
    gradient descent on ½|F|², which reports non-convergence once it stalls.
    """

    class Config(Fig["NewtonSolver"]):
        damping: float = 0.5
        max_iter: int = 50
        tol: float = 1e-10
        max_halvings: int = 40
        gradient_max_iter: int = 500
        polish_steps: int = 1

        def finalize(self) -> Self:
            cfg = super().finalize()
            if not 0.0 < cfg.damping < 1.0:
                raise ValueError(f"damping must be in (0, 1), got {cfg.damping}")
            if cfg.max_iter < 1:
                raise ValueError(f"max_iter must be >= 1, got {cfg.max_iter}")
            if not 0.0 < cfg.tol <= 1e-2:
                raise ValueError(f"tol must be in (0, 1e-2], got {cfg.tol}")
            if cfg.max_halvings < 1:
                raise ValueError(f"max_halvings must be >= 1, got {cfg.max_halvings}")
            if cfg.gradient_max_iter < 0 or cfg.polish_steps < 0:
                raise ValueError("gradient_max_iter and polish_steps must be >= 0")
            return cfg

    def __init__(self, config: Config) -> None:
        self.config = config

    def solve(
        self,
        fn: VectorFn,
        x0: npt.ArrayLike,
        *,
        jac: VectorFn | None = None,
    ) -> NewtonResult:
        """Refine `x0` towards a root of `fn`.

        Args:
          fn: Residual map R^k → R^k.
          x0: Starting point.
          jac: Exact Jacobian; finite differences otherwise.

        Returns:
          result: Final iterate, its residual norm and whether it is ≤ tol.

        """
        cfg = self.config
        x = np.array(x0, dtype=np.float64)
        f = fn(x)
        res = float(np.linalg.norm(f))
        jacobian = jac or (lambda v: finite_difference_jacobian(fn, v))
        for it in range(cfg.max_iter):
            if res <= cfg.tol:
                x, res = self._polish(fn, jacobian, x, res)
                return NewtonResult(x, res, True, it, "newton")
            j = jacobian(x)
            if _singular(j):
                logger.debug("singular Newton step at %s, switching to gradient descent", x)
                return self._gradient_descent(fn, jacobian, x, it)
            step = np.linalg.solve(j, -f)
            lam = 1.0
            for _ in range(cfg.max_halvings):
                trial = x + lam * step
                f_trial = fn(trial)
                res_trial = float(np.linalg.norm(f_trial))
                if res_trial < res:
                    break
                lam *= cfg.damping
            else:
                logger.debug("line search failed at %s, switching to gradient descent", x)
                return self._gradient_descent(fn, jacobian, x, it)
            x, f, res = trial, f_trial, res_trial
            logger.debug("newton iter %d: residual %.3e (step %.3g)", it, res, lam)
        if res <= cfg.tol:
            x, res = self._polish(fn, jacobian, x, res)
        return NewtonResult(x, res, res <= cfg.tol, cfg.max_iter, "newton")

    def _polish(
        self,
        fn: VectorFn,
        jacobian: VectorFn,
        x: FloatArray,
        res: float,
    ) -> tuple[FloatArray, float]:
        """Extra full Newton steps past tolerance, kept only while they help."""
        for _ in range(self.config.polish_steps):
            if res == 0.0:
                break
            j = jacobian(x)
            if _singular(j):
                break
            trial = x + np.linalg.solve(j, -fn(x))
            res_trial = float(np.linalg.norm(fn(trial)))
            if not res_trial < res:
                break
            x, res = trial, res_trial
        return x, res

    def _gradient_descent(
        self,
        fn: VectorFn,
        jacobian: VectorFn,
        x: FloatArray,
        start: int,
    ) -> NewtonResult:
        cfg = self.config
        f = fn(x)
        phi = 0.5 * float(f @ f)
        it = start
        for it in range(start, start + cfg.gradient_max_iter):
            if np.sqrt(2.0 * phi) <= cfg.tol:
                break
            g = jacobian(x).T @ f
            gg = float(g @ g)
            if gg == 0.0 or not np.isfinite(gg):
                break
            lam = 1.0
            for _ in range(cfg.max_halvings):
                trial = x - lam * g
                f_trial = fn(trial)
                phi_trial = 0.5 * float(f_trial @ f_trial)
                if phi_trial <= phi - 1e-4 * lam * gg:
                    break
                lam *= cfg.damping
            else:
                logger.debug("gradient descent stalled at residual %.3e", np.sqrt(2.0 * phi))
                break
            x, f, phi = trial, f_trial, phi_trial
        res = float(np.sqrt(2.0 * phi))
        return NewtonResult(x, res, res <= cfg.tol, it, "gradient")


def project_onto_zero_set(
    value: Callable[[FloatArray], float],
    gradient: VectorFn,
    x0: npt.ArrayLike,
    *,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> tuple[FloatArray, bool]:
    """Newton along the gradient: x ← x − f(x) ∇f(x) / |∇f(x)|².

    Returns the final point and whether |f| ≤ tol was reached.
    """
    x = np.array(x0, dtype=np.float64)
    for _ in range(max_iter):
        fx = value(x)
        if abs(fx) <= tol:
            return x, True
        g = gradient(x)
        gg = float(g @ g)
        if gg == 0.0 or not np.isfinite(gg):
            return x, False
        x = x - fx * g / gg
    return x, abs(value(x)) <= tol
