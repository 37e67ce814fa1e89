"""Nonholonomic discrete mechanical systems ``(Q, L_d, D, D_d)``.

``D`` is given by a spanning basis ``E(q)`` (``n x d``) and its annihilator
``omega(q)`` (``(n-d) x n``); ``D_d`` is the zero set of ``chi(q0, q1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dms import (DiscreteMechanicalSystem, TrajectoryDiagnostics, _inf, del_residual, march,
                  solve_next)
from .errors import ConstraintViolationError, NoConvergenceError, PreconditionError
from .numerics import (DEFAULT_NEWTON, NewtonConfig, as_vector, condition_number, jacobian,
                       newton_solve)

SEED_TOL = 1e-10
MEMBERSHIP_TOL = 1e-10


@dataclass(frozen=True)
class NonholonomicDMS:
    base: DiscreteMechanicalSystem
    basis: Callable
    annihilator: Callable
    chi: Optional[Callable] = None

    @property
    def n(self):
        return self.base.n

    @property
    def name(self):
        return self.base.name

    def E(self, q) -> np.ndarray:
        return np.asarray(self.basis(np.asarray(q, float)), dtype=float).reshape(self.n, -1)

    def omega(self, q) -> np.ndarray:
        return np.asarray(self.annihilator(np.asarray(q, float)), dtype=float).reshape(-1, self.n)

    def constraints(self, q0, q1) -> np.ndarray:
        if self.chi is None:
            return np.zeros(0)
        return np.asarray(self.chi(np.asarray(q0, float), np.asarray(q1, float)), dtype=float).reshape(-1)

    def check_consistency(self, points) -> float:
        """Max ``|<omega^a(q), E_i(q)>|`` over the points; rank and count checks raise."""
        worst = 0.0
        for q in points:
            E, W = self.E(q), self.omega(q)
            d = E.shape[1]
            if np.linalg.matrix_rank(E) != d:
                raise PreconditionError(f"variational basis is rank deficient at {q}")
            if W.shape[0] != self.n - d:
                raise PreconditionError("annihilator count does not match the codimension")
            if self.constraints(q, q).size != self.n - d:
                raise PreconditionError("kinematic constraint count does not match the codimension")
            worst = max(worst, _inf(W @ E))
        return worst


def unconstrained(base: DiscreteMechanicalSystem) -> NonholonomicDMS:
    """``D = TQ`` and ``D_d = Q x Q``."""
    n = base.n
    return NonholonomicDMS(base, lambda q: np.eye(n), lambda q: np.zeros((0, n)), None)


def dla_residual(nsys: NonholonomicDMS, q0, q1, q2):
    """``(<DEL(q0,q1,q2), E_i(q1)>, chi(q1, q2))``."""
    r = del_residual(nsys.base, q0, q1, q2)
    return r @ nsys.E(q1), nsys.constraints(q1, q2)


def _check_seed(nsys, q0, q1):
    c = nsys.constraints(q0, q1)
    if c.size and _inf(c) > SEED_TOL:
        raise ConstraintViolationError(f"seed pair violates the kinematic constraints by {_inf(c):.3e}")


def _nh_system(nsys, q0, q1):
    # unit basis columns keep the projected block at the scale of the DEL
    # residual when the basis coefficients grow along a trajectory
    E = nsys.E(q1)
    E = E / np.linalg.norm(E, axis=0)

    def R(z):
        r = del_residual(nsys.base, q0, q1, z)
        return np.concatenate([r @ E, nsys.constraints(q1, z)])
    return R


def nh_step(nsys: NonholonomicDMS, q0, q1, cfg: NewtonConfig = DEFAULT_NEWTON, guess=None):
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    _check_seed(nsys, q0, q1)
    q2, _ = _nh_solve(nsys, q0, q1, cfg, guess)
    return q2


def _nh_solve(nsys, q0, q1, cfg, guess=None):
    R = _nh_system(nsys, q0, q1)
    try:
        return solve_next(R, nsys.base, q0, q1, cfg, guess)
    except NoConvergenceError as exc:
        d = nsys.E(q1).shape[1]
        r = R(exc.best)
        block = "projected" if _inf(r[:d]) >= _inf(r[d:]) else "constraint"
        raise NoConvergenceError(f"{exc} ({block} block stalled)", best=exc.best,
                                 residual_norm=exc.residual_norm) from exc


def nh_simulate(nsys: NonholonomicDMS, q0, q1, steps: int, cfg: NewtonConfig = DEFAULT_NEWTON):
    """Returns ``(curve, diagnostics)``; ``diagnostics.extra['constraints']`` holds ``chi`` per pair."""
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    _check_seed(nsys, q0, q1)
    curve, norms, iters = march(lambda a, b: _nh_solve(nsys, a, b, cfg), q0, q1, steps)
    for k in range(steps):
        norms[k] = _inf(_nh_system(nsys, curve[k], curve[k + 1])(curve[k + 2]))
    chis = np.array([nsys.constraints(curve[k], curve[k + 1]) for k in range(curve.shape[0] - 1)])
    return curve, TrajectoryDiagnostics(norms, iters, extra={"constraints": chis})


def multiplier_oracle(nsys: NonholonomicDMS, q0, q1, cfg: NewtonConfig = DEFAULT_NEWTON):
    """Solve ``DEL(q0,q1,q2) = lambda_a omega^a(q1)``, ``chi(q1,q2) = 0`` for ``(q2, lambda)``."""
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    _check_seed(nsys, q0, q1)
    n = nsys.n
    W = nsys.omega(q1)

    def R(z):
        q2, lam = z[:n], z[n:]
        return np.concatenate([del_residual(nsys.base, q0, q1, q2) - lam @ W,
                               nsys.constraints(q1, q2)])

    z0 = np.concatenate([nsys.base.extrapolate(q0, q1), np.zeros(W.shape[0])])
    res = newton_solve(R, z0, cfg, nsys.base.scheme)
    return nsys.base.canonical(res.root[:n]), res.root[n:]


def nh_regularity_test(nsys: NonholonomicDMS, q0, q1, q2, threshold: float = 1e12) -> bool:
    """Nonsingularity of the Jacobian of the combined step system at ``q2``."""
    J = jacobian(_nh_system(nsys, as_vector(q0), as_vector(q1)), as_vector(q2), nsys.base.scheme)
    return condition_number(J) < threshold


# ----------------------------------------------------------------------------
# nonholonomic momentum


def _section_generator(nsys, bundle, section, q):
    xi = np.asarray(section(np.asarray(q, float)), dtype=float).reshape(-1)
    v = bundle.generators(q) @ xi
    W = nsys.omega(q)
    if W.size and _inf(W @ v) > MEMBERSHIP_TOL:
        raise PreconditionError(f"section value {xi} at {q} is not in g^D")
    return xi


def nh_momentum(nsys: NonholonomicDMS, bundle, section: Callable, q0, q1) -> float:
    """``-D1 L_d(q0,q1) . (section(q0))_Q(q0)``."""
    xi = _section_generator(nsys, bundle, section, q0)
    return float(-nsys.base.d1(q0, q1) @ (bundle.generators(q0) @ xi))


def nh_momentum_evolution_residual(nsys: NonholonomicDMS, bundle, section: Callable,
                                  qm, q, qp) -> float:
    """Left side minus right side of the momentum evolution law at ``q``."""
    lhs = nh_momentum(nsys, bundle, section, q, qp) - nh_momentum(nsys, bundle, section, qm, q)
    dxi = _section_generator(nsys, bundle, section, q) - _section_generator(nsys, bundle, section, qm)
    rhs = float(-nsys.base.d1(qm, q) @ (bundle.generators(qm) @ dxi))
    return lhs - rhs
