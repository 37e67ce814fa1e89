"""Discrete Routh reduction for abelian symmetry groups.

The momentum level ``J_mu = mu`` defines an affine discrete connection
``A_mu``; the shape curve of a momentum-``mu`` trajectory then satisfies forced
DEL equations for the Routh Lagrangian ``L_mu(tau0, tau1)`` with the Routh force.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bundle import AffineDiscreteConnection, PrincipalConnection, TrivialBundle
from .dms import DiscreteMechanicalSystem, _inf, momentum
from .errors import MomentumMismatchError, NoConvergenceError, NotMuGoodError, PreconditionError
from .numerics import (DEFAULT_NEWTON, NewtonConfig, as_vector, condition_number, gradient,
                       jacobian, newton_solve)

MOMENTUM_TOL = 1e-9
MULTISTART = 8
AGREE_TOL = 1e-8
POLISH_ITERS = 3


@dataclass
class RouthSetup:
    sys: DiscreteMechanicalSystem
    bundle: TrivialBundle
    mu: np.ndarray
    cfg: NewtonConfig = DEFAULT_NEWTON
    conn: Optional["RouthConnection"] = field(default=None, repr=False)

    def __post_init__(self):
        self.mu = as_vector(self.mu, "mu")
        if self.mu.size != self.bundle.group.dim:
            raise PreconditionError("mu does not match the group dimension")
        # isotropy of mu is all of G for abelian groups
        if self.conn is None:
            self.conn = RouthConnection(self)
        self.principal = PrincipalConnection(self.bundle)


def j_mu(setup: RouthSetup, q0, q1) -> np.ndarray:
    return momentum(setup.sys, setup.bundle, q0, q1)


def _start_points(group, base, count=MULTISTART):
    """``count`` spread guesses: evenly around circles (off the cut), a grid on lines."""
    mask = group.circle_mask
    out = []
    for j in range(count):
        g = np.array(base, dtype=float) + (j - (count - 1) / 2) * 0.5
        g[mask] = 2 * np.pi * (j + 0.5) / count
        out.append(g)
    return out


def _polished(R, x0, cfg, scheme, jac_fn=None):
    res = newton_solve(R, x0, cfg, scheme, jac_fn)
    x = res.root
    # a few extra Newton updates push the solution to roundoff, which keeps
    # finite differences of quantities defined through it clean
    for _ in range(POLISH_ITERS):
        r = R(x)
        if not np.any(r):
            break
        J = jac_fn(x) if jac_fn is not None else jacobian(R, x, scheme)
        dx = np.linalg.lstsq(np.atleast_2d(J), -r, rcond=None)[0]
        xn = x + dx
        if _inf(R(xn)) <= _inf(r):
            x = xn
        else:
            break
    return x, res


def mu_good_check(setup: RouthSetup, q, cfg: Optional[NewtonConfig] = None):
    """Solve ``J_mu(q, g q) = mu`` from spread starts; returns ``(g, unique)``."""
    cfg = setup.cfg if cfg is None else cfg
    b, grp, sys = setup.bundle, setup.bundle.group, setup.sys
    q = as_vector(q, "q")

    # G_mu-regularity: fiber-fiber block of the mixed Hessian at (q, q) must be invertible
    D = jacobian(lambda z: sys.d1(q, z), q, sys.scheme)
    block = b.generators().T @ D @ b.generators()
    if condition_number(block) > 1e12:
        raise NotMuGoodError("the fiber block of D2 D1 L_d is singular")

    def R(g):
        return j_mu(setup, q, b.act_flat(g, q)) - setup.mu

    roots = []
    for g0 in _start_points(grp, grp.identity()):
        try:
            g, _ = _polished(R, g0, cfg, sys.scheme)
        except (NoConvergenceError, PreconditionError, ArithmeticError):
            continue
        except Exception:
            continue
        roots.append(grp.canonical(g))
    if not roots:
        raise NoConvergenceError("no multistart solve of the momentum equation converged")
    ref = roots[0]
    unique = all(_inf(grp.difference(ref, r)) <= AGREE_TOL for r in roots[1:])
    return ref, unique


class RouthConnection(AffineDiscreteConnection):
    """``A_mu(q0, q1)``: the unique ``g`` with ``J_mu(q0, g^-1 q1) = mu``."""

    tag = "routh"

    def __init__(self, setup: RouthSetup):
        super().__init__(setup.bundle, setup.sys.scheme)
        self.setup = setup

    def _J(self, x0, x1):
        return j_mu(self.setup, x0, x1)

    def level(self, x):
        return mu_good_check(self.setup, x)[0]

    def lift_fiber(self, x0, tau1, guess=None) -> np.ndarray:
        """Fiber ``g`` of the horizontal lift: ``J_mu(x0, (tau1, g)) = mu``."""
        b = self.bundle
        x0 = np.asarray(x0, dtype=float)
        tau1 = np.asarray(tau1, dtype=float)
        g0 = b.fiber_of(x0) if guess is None else np.asarray(guess, dtype=float)

        def R(g):
            return self._J(x0, b.flat(tau1, g)) - self.setup.mu

        g, _ = _polished(R, g0, self.setup.cfg, self.scheme)
        return g

    def lift(self, x0, tau1):
        return self.bundle.flat(tau1, self.lift_fiber(x0, tau1))

    def form(self, x0, x1):
        b = self.bundle
        g = self.lift_fiber(x0, b.shape_of(x1), guess=b.fiber_of(x1))
        return self.group.mul(b.fiber_of(x1), self.group.inv(g))

    def ftilde1(self, x0, w, tau1):
        return self.bundle.act_flat(w, self.lift(x0, tau1))

    def _lift_tangents(self, x0, tau1):
        """Implicit-function derivatives of the lift fiber in ``x0`` and ``tau1``."""
        b = self.bundle
        x1 = self.lift(x0, tau1)
        M0 = jacobian(lambda z: self._J(z, x1), x0, self.scheme)
        M1 = jacobian(lambda z: self._J(x0, z), x1, self.scheme)
        Mg = M1[:, b.fiber_indices]
        Ms = M1[:, b.shape_indices]
        dg_dx0 = -np.linalg.solve(Mg, M0)
        dg_ds1 = -np.linalg.solve(Mg, Ms) if Ms.size else np.zeros((self.group.dim, 0))
        return x1, dg_dx0, dg_ds1

    def form_jacobians(self, x0, x1):
        b = self.bundle
        _, dg_dx0, dg_ds1 = self._lift_tangents(x0, b.shape_of(x1))
        G = b.generators().T
        J0 = -dg_dx0
        J1 = G.copy()
        J1[:, b.shape_indices] -= dg_ds1
        return J0, J1

    def ftilde1_jacobians(self, x0, w, tau1):
        b = self.bundle
        _, dg_dx0, dg_ds1 = self._lift_tangents(x0, tau1)
        Jq = np.zeros((b.n, b.n))
        Jq[b.fiber_indices, :] = dg_dx0
        Jt = b.shape_embedding().copy()
        Jt[b.fiber_indices, :] = dg_ds1
        return Jq, b.generators().copy(), Jt


def a_mu(setup: RouthSetup, q0, q1, cfg: Optional[NewtonConfig] = None) -> np.ndarray:
    return setup.bundle.group.canonical(setup.conn.form(as_vector(q0, "q0"), as_vector(q1, "q1")))


def _rep(setup, tau):
    return setup.bundle.flat(np.asarray(tau, dtype=float), setup.bundle.group.identity())


def routh_lagrangian(setup: RouthSetup, tau0, tau1) -> float:
    """``L_d`` on the momentum-level pair over ``(tau0, tau1)``."""
    x0 = _rep(setup, tau0)
    return setup.sys.lagrangian(x0, setup.conn.lift(x0, np.asarray(tau1, dtype=float)))


def routh_force_covectors(setup: RouthSetup, tau0, tau1):
    """``(f-, f+)``: the Routh force with the other variation set to zero."""
    b, conn = setup.bundle, setup.conn
    x0 = _rep(setup, tau0)
    x1 = conn.lift(x0, np.asarray(tau1, dtype=float))
    d2check = setup.sys.d2(x0, x1) @ b.generators()
    J0, J1 = conn.form_jacobians(x0, x1)
    H0 = setup.principal.lift_matrix(x0)
    H1 = setup.principal.lift_matrix(x1)
    return d2check @ J0 @ H0, d2check @ J1 @ H1


def routh_force(setup: RouthSetup, tau0, tau1, dtau0, dtau1) -> float:
    fm, fp = routh_force_covectors(setup, tau0, tau1)
    return float(fm @ np.asarray(dtau0, dtype=float) + fp @ np.asarray(dtau1, dtype=float))


def routh_slot_derivatives(setup: RouthSetup, tau0, tau1):
    """Central differences of the Routh Lagrangian in each slot."""
    tau0 = np.asarray(tau0, dtype=float)
    tau1 = np.asarray(tau1, dtype=float)
    sch = setup.sys.scheme
    d1 = gradient(lambda t: routh_lagrangian(setup, t, tau1), tau0, sch)
    d2 = gradient(lambda t: routh_lagrangian(setup, tau0, t), tau1, sch)
    return d1, d2


def routh_lagrangian_lemma(setup: RouthSetup, tau0, tau1):
    """Slot derivatives of the Routh Lagrangian through the check-Lagrangian:
    ``D1 Lcheck o h`` and ``D3 Lcheck`` at ``(q0, e, tau1)``."""
    b, conn = setup.bundle, setup.conn
    x0 = _rep(setup, tau0)
    e = b.group.identity()
    tau1 = np.asarray(tau1, dtype=float)
    x1 = conn.ftilde1(x0, e, tau1)
    Jq, _, Jt = conn.ftilde1_jacobians(x0, e, tau1)
    a, c = setup.sys.d1(x0, x1), setup.sys.d2(x0, x1)
    return (a + c @ Jq) @ setup.principal.lift_matrix(x0), c @ Jt


def routh_residual(setup: RouthSetup, tau_prev, tau_k, tau_next) -> np.ndarray:
    d1, _ = routh_slot_derivatives(setup, tau_k, tau_next)
    _, d2 = routh_slot_derivatives(setup, tau_prev, tau_k)
    _, fp = routh_force_covectors(setup, tau_prev, tau_k)
    fm, _ = routh_force_covectors(setup, tau_k, tau_next)
    return d1 + d2 + fp + fm


def check_momentum(setup: RouthSetup, curve, tol: float = MOMENTUM_TOL) -> float:
    curve = np.asarray(curve, dtype=float)
    worst = max(_inf(j_mu(setup, curve[k], curve[k + 1]) - setup.mu) for k in range(curve.shape[0] - 1))
    if worst > tol:
        raise MomentumMismatchError(f"trajectory momentum differs from mu by {worst:.3e}")
    return worst


def verify_routh(setup: RouthSetup, curve) -> float:
    """Max ``|Routh forced DEL residual|_inf`` along the shape projection of ``curve``."""
    check_momentum(setup, curve)
    curve = np.asarray(curve, dtype=float)
    taus = [setup.bundle.shape_of(q) for q in curve]
    worst = 0.0
    for k in range(1, len(taus) - 1):
        worst = max(worst, _inf(routh_residual(setup, taus[k - 1], taus[k], taus[k + 1])))
    return worst
