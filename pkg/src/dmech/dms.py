"""Discrete mechanical systems on ``Q x Q``: action, DEL residual, Legendre
transforms, regularity, the Newton flow and discrete momentum."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DmechError, EvaluationError, SimulationError
from .numerics import (DEFAULT_NEWTON, DEFAULT_SCHEME, DerivativeScheme, NewtonConfig,
                       as_vector, condition_number, jacobian, newton_solve, slot_gradient)

log = logging.getLogger(__name__)

REGULARITY_CONDITION = 1e12


@dataclass(frozen=True)
class DiscreteMechanicalSystem:
    """``(Q, L_d)`` with ``Q`` an open set of ``R^n`` in flat coordinates.

    ``D1``/``D2`` are optional analytic slot derivatives. ``bundle`` records the
    symmetry (if any); its angle coordinates are kept in ``[0, 2*pi)`` by the
    stepper and extrapolated along shortest arcs.
    """

    L: Callable
    n: int
    D1: Optional[Callable] = None
    D2: Optional[Callable] = None
    bundle: Optional[object] = None
    scheme: DerivativeScheme = DEFAULT_SCHEME
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def with_scheme(self, scheme: DerivativeScheme) -> "DiscreteMechanicalSystem":
        return replace(self, scheme=scheme)

    @property
    def angle_mask(self) -> np.ndarray:
        if self.bundle is None:
            return np.zeros(self.n, dtype=bool)
        return self.bundle.angle_mask

    def lagrangian(self, q0, q1) -> float:
        val = float(self.L(np.asarray(q0, dtype=float), np.asarray(q1, dtype=float)))
        if not np.isfinite(val):
            raise EvaluationError(f"L_d not finite at {q0}, {q1}")
        return val

    def d1(self, q0, q1) -> np.ndarray:
        return slot_gradient(self.L, 1, (q0, q1), self.scheme, self.D1)

    def d2(self, q0, q1) -> np.ndarray:
        return slot_gradient(self.L, 2, (q0, q1), self.scheme, self.D2)

    # geometry of the chart ----------------------------------------------
    def chart_delta(self, q0, q1) -> np.ndarray:
        d = np.asarray(q1, dtype=float) - np.asarray(q0, dtype=float)
        m = self.angle_mask
        if m.any():
            d[..., m] = np.pi - np.mod(np.pi - d[..., m], 2 * np.pi)
        return d

    def canonical(self, q) -> np.ndarray:
        q = np.array(q, dtype=float)
        m = self.angle_mask
        if m.any():
            q[..., m] = np.mod(q[..., m], 2 * np.pi)
            q[..., m] = np.where(q[..., m] >= 2 * np.pi, q[..., m] - 2 * np.pi, q[..., m])
        return q

    def extrapolate(self, q0, q1) -> np.ndarray:
        """Initial guess ``2 q1 - q0`` (on angles: ``q1 + shortest(q1 - q0)``)."""
        return np.asarray(q1, dtype=float) + self.chart_delta(q0, q1)


@dataclass
class TrajectoryDiagnostics:
    """Per-interior-index residual norms and Newton counts, plus optional momentum."""

    residuals: np.ndarray
    iterations: np.ndarray
    momentum: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


def _inf(v) -> float:
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


# ----------------------------------------------------------------------------
# action and residuals


def action(sys: DiscreteMechanicalSystem, curve) -> float:
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 2 or curve.shape[0] < 2:
        raise ValueError("a discrete curve needs at least two points")
    return float(sum(sys.lagrangian(curve[k], curve[k + 1]) for k in range(curve.shape[0] - 1)))


def del_residual(sys: DiscreteMechanicalSystem, q0, q1, q2) -> np.ndarray:
    return sys.d2(q0, q1) + sys.d1(q1, q2)


def legendre_plus(sys: DiscreteMechanicalSystem, q0, q1) -> np.ndarray:
    return sys.d2(q0, q1)


def legendre_minus(sys: DiscreteMechanicalSystem, q0, q1) -> np.ndarray:
    return -sys.d1(q0, q1)


def regularity_check(sys: DiscreteMechanicalSystem, q0, q1):
    """Condition numbers of ``q0 -> F+L_d(q0,q1)`` and ``q1 -> F-L_d(q0,q1)``."""
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    Jp = jacobian(lambda z: legendre_plus(sys, z, q1), q0, sys.scheme)
    Jm = jacobian(lambda z: legendre_minus(sys, q0, z), q1, sys.scheme)
    conds = (condition_number(Jp), condition_number(Jm))
    regular = conds[0] < REGULARITY_CONDITION and conds[1] < REGULARITY_CONDITION
    log.info("regularity of %s at %s, %s: cond=%s regular=%s", sys.name, q0, q1, conds, regular)
    return regular, conds


# ----------------------------------------------------------------------------
# the flow


def solve_next(residual: Callable, sys: DiscreteMechanicalSystem, q0, q1,
               cfg: NewtonConfig = DEFAULT_NEWTON, guess=None):
    """Newton solve of ``residual(q2) = 0`` from the extrapolated guess."""
    x0 = sys.extrapolate(q0, q1) if guess is None else as_vector(guess, "guess")
    res = newton_solve(residual, x0, cfg, sys.scheme)
    return sys.canonical(res.root), res


def step(sys: DiscreteMechanicalSystem, q0, q1, cfg: NewtonConfig = DEFAULT_NEWTON,
         guess=None) -> np.ndarray:
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    q2, _ = solve_next(lambda z: del_residual(sys, q0, q1, z), sys, q0, q1, cfg, guess)
    return q2


def march(stepper: Callable, q0, q1, steps: int):
    """Iterate ``stepper(q_prev, q_cur) -> (q_next, NewtonResult)``.

    Returns ``(curve, residual_norms, iterations)``; a failure at any step is
    re-raised as :class:`SimulationError` carrying the index of the point
    being solved for.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    curve = np.empty((steps + 2, q0.size))
    curve[0], curve[1] = q0, q1
    norms = np.empty(steps)
    iters = np.empty(steps, dtype=int)
    for k in range(steps):
        try:
            curve[k + 2], res = stepper(curve[k], curve[k + 1])
        except DmechError as exc:
            raise SimulationError(k + 2, exc) from exc
        norms[k] = res.residual_norm
        iters[k] = res.iterations
    return curve, norms, iters


def simulate(sys: DiscreteMechanicalSystem, q0, q1, steps: int,
             cfg: NewtonConfig = DEFAULT_NEWTON, symmetry=None):
    """Iterate :func:`step`; returns ``(curve, TrajectoryDiagnostics)``.

    ``curve`` has ``steps + 2`` rows. When ``symmetry`` (a bundle) is given the
    momentum of every consecutive pair is recorded.
    """

    def stepper(a, b):
        return solve_next(lambda z: del_residual(sys, a, b, z), sys, a, b, cfg)

    curve, norms, iters = march(stepper, q0, q1, steps)
    # residual recomputed at the canonical points, which is what gets reported
    for k in range(steps):
        norms[k] = _inf(del_residual(sys, curve[k], curve[k + 1], curve[k + 2]))
    diag = TrajectoryDiagnostics(norms, iters)
    if symmetry is not None:
        diag.momentum = momentum_along(sys, symmetry, curve)
    return curve, diag


# ----------------------------------------------------------------------------
# symmetry


def momentum(sys: DiscreteMechanicalSystem, symmetry, q0, q1, basis=None) -> np.ndarray:
    """``J_d(q0,q1)(xi) = -D1 L_d(q0,q1) . xi_Q(q0)`` on a basis of the algebra.

    ``symmetry`` is a bundle; ``basis`` (columns) defaults to the coordinate basis.
    """
    G = symmetry.generators(q0)
    if basis is not None:
        G = G @ np.asarray(basis, dtype=float)
    return -sys.d1(q0, q1) @ G


def momentum_along(sys, symmetry, curve, basis=None) -> np.ndarray:
    curve = np.asarray(curve, dtype=float)
    return np.array([momentum(sys, symmetry, curve[k], curve[k + 1], basis)
                     for k in range(curve.shape[0] - 1)])


def noether_drift(sys, symmetry, curve, basis=None) -> float:
    J = momentum_along(sys, symmetry, curve, basis)
    return _inf(J - J[0])
