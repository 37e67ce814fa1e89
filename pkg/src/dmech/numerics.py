"""Finite-difference derivatives and damped Newton root finding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import EvaluationError, NoConvergenceError, SingularSystemError

SINGULAR_CONDITION = 1e14
MAX_HALVINGS = 20


@dataclass(frozen=True)
class DerivativeScheme:
    """How slot derivatives are evaluated.

    ``mode`` is ``"analytic-if-available"`` (registered partials win) or
    ``"central-difference"`` (always difference, even when partials exist).
    """

    mode: str = "analytic-if-available"
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("analytic-if-available", "central-difference"):
            raise ValueError(f"unknown derivative mode {self.mode!r}")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")

    @property
    def use_analytic(self) -> bool:
        return self.mode == "analytic-if-available"


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-12
    max_iter: int = 50
    damping: str = "backtracking"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.damping not in ("none", "backtracking"):
            raise ValueError(f"unknown damping {self.damping!r}")


DEFAULT_SCHEME = DerivativeScheme()
DEFAULT_NEWTON = NewtonConfig()


class NewtonResult(NamedTuple):
    root: np.ndarray
    iterations: int
    residual_norm: float


def as_vector(x, name="vector") -> np.ndarray:
    """Copy ``x`` into a 1-d float array, rejecting NaN/Inf."""
    v = np.array(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"{name} has non-finite entries: {v}")
    return v


def _finite(value, what):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"non-finite value while evaluating {what}")
    return arr


def gradient(f: Callable, x, scheme: DerivativeScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Central-difference gradient of a scalar function of one vector."""
    x = np.asarray(x, dtype=float)
    eps = scheme.fd_step
    out = np.empty(x.size)
    xp = x.copy()
    for i in range(x.size):
        xp[i] = x[i] + eps
        fp = _finite(f(xp.copy()), "gradient stencil")
        xp[i] = x[i] - eps
        fm = _finite(f(xp.copy()), "gradient stencil")
        xp[i] = x[i]
        out[i] = (fp - fm) / (2.0 * eps)
    return out


def slot_gradient(f: Callable, slot: int, point, scheme: DerivativeScheme = DEFAULT_SCHEME,
                  analytic: Optional[Callable] = None) -> np.ndarray:
    """Partial derivative of ``f(a, b)`` with respect to slot 1 (``a``) or 2 (``b``).

    ``analytic(a, b)``, when given and the scheme allows it, is returned instead
    of the difference quotient.
    """
    if slot not in (1, 2):
        raise ValueError("slot must be 1 or 2")
    a = np.asarray(point[0], dtype=float)
    b = np.asarray(point[1], dtype=float)
    if analytic is not None and scheme.use_analytic:
        return _finite(analytic(a, b), "analytic slot derivative").reshape(-1)
    if slot == 1:
        return gradient(lambda x: f(x, b), a, scheme)
    return gradient(lambda x: f(a, x), b, scheme)


def jacobian(F: Callable, x, scheme: DerivativeScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Central-difference Jacobian, shape ``(len(F(x)), len(x))``."""
    x = np.asarray(x, dtype=float)
    eps = scheme.fd_step
    cols = []
    xp = x.copy()
    for i in range(x.size):
        xp[i] = x[i] + eps
        fp = np.array(_finite(F(xp.copy()), "jacobian stencil"), dtype=float).reshape(-1)
        xp[i] = x[i] - eps
        fm = np.array(_finite(F(xp.copy()), "jacobian stencil"), dtype=float).reshape(-1)
        xp[i] = x[i]
        cols.append((fp - fm) / (2.0 * eps))
    if not cols:
        m = _finite(F(x), "jacobian").reshape(-1).size
        return np.zeros((m, 0))
    return np.column_stack(cols)


def condition_number(J) -> float:
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if J.size == 0:
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.linalg.cond(J)
    return float(c) if np.isfinite(c) else float("inf")


def _inf_norm(r) -> float:
    return float(np.max(np.abs(r))) if r.size else 0.0


def newton_solve(R: Callable, x0, cfg: NewtonConfig = DEFAULT_NEWTON,
                 scheme: DerivativeScheme = DEFAULT_SCHEME,
                 jac: Optional[Callable] = None) -> NewtonResult:
    """Solve ``R(x) = 0`` by Newton's method with optional halving backtracking.

    Converged when the infinity norm of the residual is at most ``cfg.tol``.
    Raises :class:`SingularSystemError` when the Jacobian condition estimate
    exceeds 1e14 and :class:`NoConvergenceError` (carrying the best iterate)
    when ``cfg.max_iter`` updates do not reach the tolerance.
    """
    x = as_vector(x0, "initial guess")
    r = _finite(R(x), "residual").reshape(-1)
    norm = _inf_norm(r)
    best, best_norm = x.copy(), norm
    it = 0
    while norm > cfg.tol:
        if it >= cfg.max_iter:
            raise NoConvergenceError(
                f"Newton did not converge in {cfg.max_iter} iterations "
                f"(residual {best_norm:.3e})", best=best, residual_norm=best_norm)
        J = jac(x) if jac is not None else jacobian(R, x, scheme)
        J = np.atleast_2d(J)
        cond = condition_number(J)
        if cond > SINGULAR_CONDITION:
            raise SingularSystemError(
                f"singular Jacobian (condition estimate {cond:.3e})", condition=cond)
        dx = np.linalg.solve(J, -r)
        t = 1.0
        x_new = x + dx
        r_new = _finite(R(x_new), "residual").reshape(-1)
        n_new = _inf_norm(r_new)
        if cfg.damping == "backtracking":
            halvings = 0
            while not n_new < norm and halvings < MAX_HALVINGS:
                t *= 0.5
                halvings += 1
                x_new = x + t * dx
                r_new = _finite(R(x_new), "residual").reshape(-1)
                n_new = _inf_norm(r_new)
            if not n_new < norm:
                raise NoConvergenceError(
                    f"line search stalled at residual {best_norm:.3e}",
                    best=best, residual_norm=best_norm)
        x, r, norm = x_new, r_new, n_new
        it += 1
        if norm < best_norm:
            best, best_norm = x.copy(), norm
    return NewtonResult(x, it, norm)
