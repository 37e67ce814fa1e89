"""Forced discrete mechanical systems ``(Q, L_d, f_d)`` with ``f_d = f- (+) f+``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dms import (DiscreteMechanicalSystem, TrajectoryDiagnostics, _inf, del_residual, march,
                  momentum_along, solve_next)
from .errors import EvaluationError
from .numerics import DEFAULT_NEWTON, NewtonConfig, as_vector


def zero_force(q0, q1):
    return np.zeros(np.asarray(q0).size)


@dataclass(frozen=True)
class ForcedDMS:
    """``f_minus(q0,q1)`` is a covector at ``q0``, ``f_plus(q0,q1)`` one at ``q1``."""

    base: DiscreteMechanicalSystem
    f_minus: Callable = zero_force
    f_plus: Callable = zero_force

    @property
    def n(self):
        return self.base.n

    @property
    def name(self):
        return self.base.name

    def fm(self, q0, q1) -> np.ndarray:
        v = np.asarray(self.f_minus(np.asarray(q0, float), np.asarray(q1, float)), dtype=float)
        if not np.all(np.isfinite(v)):
            raise EvaluationError("f- not finite")
        return v.reshape(-1)

    def fp(self, q0, q1) -> np.ndarray:
        v = np.asarray(self.f_plus(np.asarray(q0, float), np.asarray(q1, float)), dtype=float)
        if not np.all(np.isfinite(v)):
            raise EvaluationError("f+ not finite")
        return v.reshape(-1)

    def pairing(self, q0, q1, dq0, dq1) -> float:
        """``f_d(q0,q1)(dq0,dq1)``."""
        return float(self.fm(q0, q1) @ np.asarray(dq0, float) + self.fp(q0, q1) @ np.asarray(dq1, float))


def forced_del_residual(fsys: ForcedDMS, q0, q1, q2) -> np.ndarray:
    return del_residual(fsys.base, q0, q1, q2) + fsys.fp(q0, q1) + fsys.fm(q1, q2)


def forced_legendre_plus(fsys: ForcedDMS, q0, q1) -> np.ndarray:
    return fsys.base.d2(q0, q1) + fsys.fp(q0, q1)


def forced_legendre_minus(fsys: ForcedDMS, q0, q1) -> np.ndarray:
    return -fsys.base.d1(q0, q1) - fsys.fm(q0, q1)


def forced_step(fsys: ForcedDMS, q0, q1, cfg: NewtonConfig = DEFAULT_NEWTON, guess=None):
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    q2, _ = solve_next(lambda z: forced_del_residual(fsys, q0, q1, z), fsys.base, q0, q1, cfg, guess)
    return q2


def forced_simulate(fsys: ForcedDMS, q0, q1, steps: int, cfg: NewtonConfig = DEFAULT_NEWTON,
                    symmetry=None):
    sys = fsys.base

    def stepper(a, b):
        return solve_next(lambda z: forced_del_residual(fsys, a, b, z), sys, a, b, cfg)

    curve, norms, iters = march(stepper, q0, q1, steps)
    for k in range(steps):
        norms[k] = _inf(forced_del_residual(fsys, curve[k], curve[k + 1], curve[k + 2]))
    diag = TrajectoryDiagnostics(norms, iters)
    if symmetry is not None:
        diag.momentum = momentum_along(sys, symmetry, curve)
    return curve, diag


def forced_variational_check(fsys: ForcedDMS, curve, trials: int = 100, rng=None,
                             eps: float = None, zero: bool = False) -> float:
    """Max over random fixed-endpoint variations of ``dS_d(dq) + sum f_d(dq_k, dq_{k+1})``.

    ``dS_d`` is a sum of per-segment central differences, which keeps the
    roundoff of each term at the scale of one Lagrangian value.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    curve = np.asarray(curve, dtype=float)
    N = curve.shape[0] - 1
    eps = fsys.base.scheme.fd_step if eps is None else eps
    worst = 0.0
    for _ in range(trials):
        dq = np.zeros_like(curve) if zero else rng.standard_normal(curve.shape)
        dq[0] = 0.0
        dq[-1] = 0.0
        total = 0.0
        for k in range(N):
            a, b = curve[k], curve[k + 1]
            if not (dq[k].any() or dq[k + 1].any()):
                continue
            lp = fsys.base.lagrangian(a + eps * dq[k], b + eps * dq[k + 1])
            lm = fsys.base.lagrangian(a - eps * dq[k], b - eps * dq[k + 1])
            total += (lp - lm) / (2 * eps) + fsys.pairing(a, b, dq[k], dq[k + 1])
        worst = max(worst, abs(total))
    return worst


def check_force_equivariance(fsys: ForcedDMS, bundle, samples: int = 100, rng=None,
                             point_sampler=None) -> float:
    """Sampled ``|f(g q0, g q1) - f(q0, q1)|`` (the tangent action is the identity in the chart)."""
    rng = np.random.default_rng(1) if rng is None else rng
    worst = 0.0
    for _ in range(samples):
        if point_sampler is None:
            q0 = rng.standard_normal(fsys.n)
            q1 = q0 + 0.1 * rng.standard_normal(fsys.n)
        else:
            q0, q1 = point_sampler(rng)
        g = bundle.group.random(rng)
        a, b = bundle.act_flat(g, q0), bundle.act_flat(g, q1)
        worst = max(worst, _inf(fsys.fm(a, b) - fsys.fm(q0, q1)), _inf(fsys.fp(a, b) - fsys.fp(q0, q1)))
    return worst
