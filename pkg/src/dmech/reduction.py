"""Symmetry reduction on trivial bundles: reduced Lagrangian, the four-point
residuals, reduced stepping, reconstruction and the two-stage check.

Reduced data are anchored at representatives ``q_k = (tau_k, e)``; for the
abelian groups shipped here ``v_rep = w``. Cotangent translations are still
spelled out so the formulas read the same for a nonabelian group.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bundle import AffineDiscreteConnection, PrincipalConnection, TrivialBundle, TrivialDiscreteConnection
from .dms import DiscreteMechanicalSystem, _inf, simulate
from .errors import ConstraintViolationError, DmechError, PreconditionError, SimulationError
from .forced import ForcedDMS
from .lie import LieGroup
from .nonholonomic import NonholonomicDMS
from .numerics import DEFAULT_NEWTON, NewtonConfig, as_vector, newton_solve

CONSTRAINT_TOL = 1e-8


@dataclass(frozen=True)
class ReducedPoint:
    """``rho(q, w)`` stored as (shape anchor, ``h^-1 w h``) for ``q = (anchor, h)``."""

    tau: np.ndarray
    v_rep: np.ndarray


@dataclass
class ReducedCurve:
    """Anchor shapes ``taus[0..N]`` and group parts ``v_reps[0..N-1]``.

    The ``k``-th reduced pair is ``(v_k, tau_{k+1})`` with ``v_k`` anchored at ``taus[k]``.
    """

    taus: np.ndarray
    v_reps: np.ndarray

    def __len__(self):
        return self.v_reps.shape[0]

    def point(self, k) -> ReducedPoint:
        return ReducedPoint(self.taus[k], self.v_reps[k])


def check_invariance(sys: DiscreteMechanicalSystem, bundle: TrivialBundle, samples: int = 100,
                     rng=None, point_sampler=None) -> float:
    """Max sampled ``|L_d(g q0, g q1) - L_d(q0, q1)|``."""
    rng = np.random.default_rng(2) if rng is None else rng
    worst = 0.0
    for _ in range(samples):
        if point_sampler is None:
            q0 = bundle.join(bundle.random_point(rng))
            q1 = q0 + 0.1 * rng.standard_normal(bundle.n)
        else:
            q0, q1 = point_sampler(rng)
        g = bundle.group.random(rng)
        a, b = bundle.act_flat(g, q0), bundle.act_flat(g, q1)
        worst = max(worst, abs(sys.lagrangian(a, b) - sys.lagrangian(q0, q1)))
    return worst


class ReducedSystem:
    """A (forced / nonholonomic) system together with a connection pair.

    ``source`` may be a :class:`DiscreteMechanicalSystem`, :class:`ForcedDMS` or
    :class:`NonholonomicDMS`; ``conn`` defaults to the trivial discrete connection.
    """

    def __init__(self, source, bundle: Optional[TrivialBundle] = None,
                 conn: Optional[AffineDiscreteConnection] = None,
                 principal: Optional[PrincipalConnection] = None):
        self.source = source
        self.forced = source if isinstance(source, ForcedDMS) else None
        self.nh = source if isinstance(source, NonholonomicDMS) else None
        self.sys = source.base if isinstance(source, (ForcedDMS, NonholonomicDMS)) else source
        if bundle is None:
            bundle = conn.bundle if conn is not None else self.sys.bundle
        if bundle is None:
            raise PreconditionError("reduction needs a bundle")
        self.bundle = bundle
        self.group = bundle.group
        self.conn = conn if conn is not None else TrivialDiscreteConnection(bundle, self.sys.scheme)
        self.principal = principal if principal is not None else PrincipalConnection(bundle)

    # representatives ------------------------------------------------------
    def rep(self, tau, g=None) -> np.ndarray:
        g = self.group.identity() if g is None else np.asarray(g, dtype=float)
        return self.bundle.flat(np.asarray(tau, dtype=float), g)

    # reduced Lagrangian and its slot derivatives -------------------------
    def lcheck(self, x, w, tau1) -> float:
        """``L_d(q, ftilde1(q, w, tau1))``."""
        return self.sys.lagrangian(x, self.conn.ftilde1(x, w, tau1))

    def lhat(self, v: ReducedPoint, tau1) -> float:
        return self.lcheck(self.rep(v.tau), v.v_rep, tau1)

    def _slots(self, x, w, tau1):
        """Slot covectors of ``Lcheck`` and of the pulled-back force at ``(x, w, tau1)``."""
        x1 = self.conn.ftilde1(x, w, tau1)
        Jq, Jw, Jt = self.conn.ftilde1_jacobians(x, w, tau1)
        a, b = self.sys.d1(x, x1), self.sys.d2(x, x1)
        L = (a + b @ Jq, b @ Jw, b @ Jt)
        if self.forced is None:
            return x1, L, None
        fm, fp = self.forced.fm(x, x1), self.forced.fp(x, x1)
        return x1, L, (fm + fp @ Jq, fp @ Jw, fp @ Jt)

    # four-point residuals ---------------------------------------------------
    def four_point(self, v_prev: ReducedPoint, tau_k, v_rep_k, tau_next, gauge=None,
                   with_force: bool = True):
        """``(phi, psi)`` at index ``k``; ``gauge`` moves both representatives by ``g``."""
        grp, b = self.group, self.bundle
        g = grp.identity() if gauge is None else grp.canonical(gauge)
        tau_k = np.asarray(tau_k, dtype=float)
        tau_next = np.asarray(tau_next, dtype=float)
        xa = self.rep(v_prev.tau, g)
        wa = grp.conjugate(g, v_prev.v_rep)
        xb = self.rep(tau_k, g)
        wb = grp.conjugate(g, np.asarray(v_rep_k, dtype=float))

        xba, (l1a, l2a, l3a), fa = self._slots(xa, wa, tau_k)
        xc, (l1b, l2b, l3b), fb = self._slots(xb, wb, tau_next)
        J0b, _ = self.conn.form_jacobians(xb, xc)
        _, J1a = self.conn.form_jacobians(xa, xba)
        Hb = self.principal.lift_matrix(xb)
        Hba = self.principal.lift_matrix(xba)
        Vb = b.generators(xb)
        Vba = b.generators(xba)

        phi = l1b @ Hb + l3a + l2b @ J0b @ Hb + l2a @ J1a @ Hba
        psi = (grp.cotangent_translate("right", wa, l2a)
               - grp.cotangent_translate("right", wb, l2b))
        if with_force and fa is not None:
            f1a, f2a, f3a = fa
            f1b, f2b, f3b = fb
            phi = phi + f1b @ Hb + f3a + f2b @ J0b @ Hb + f2a @ J1a @ Hba
            psi = psi + (f1b + f2b @ J0b) @ Vb + f2a @ J1a @ Vba
        return phi, psi

    # nonholonomic data ---------------------------------------------------------
    def reduced_distribution(self, x, rank_tol: float = 1e-10) -> np.ndarray:
        """Orthonormal basis (columns) of ``T pi(D_q)`` in shape coordinates."""
        P = self.nh.E(x)[self.bundle.shape_indices, :]
        return _range_basis(P, rank_tol)

    def algebra_distribution(self, x, rank_tol: float = 1e-10) -> np.ndarray:
        """Orthonormal basis (columns) of ``{xi : xi_Q(q) in D_q}``."""
        W = self.nh.omega(x)
        V = self.bundle.generators(x)
        if W.size == 0:
            return np.eye(self.group.dim)
        return _null_basis(W @ V, rank_tol)


def _range_basis(P, tol):
    if P.size == 0:
        return np.zeros((P.shape[0], 0))
    U, s, _ = np.linalg.svd(P, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return U[:, :r]


def _null_basis(M, tol):
    k = M.shape[1]
    if M.size == 0:
        return np.eye(k)
    _, s, Vt = np.linalg.svd(M)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return Vt[r:].T


# ----------------------------------------------------------------------------
# module-level API


def reduce_curve(rsys: ReducedSystem, curve) -> ReducedCurve:
    curve = np.asarray(curve, dtype=float)
    b, grp = rsys.bundle, rsys.group
    taus = np.array([b.shape_of(q) for q in curve]).reshape(curve.shape[0], b.shape_dim)
    v = []
    for k in range(curve.shape[0] - 1):
        w = rsys.conn.form(curve[k], curve[k + 1])
        h = b.fiber_of(curve[k])
        v.append(grp.conjugate(grp.inv(h), w))
    return ReducedCurve(taus, np.array(v).reshape(len(v), grp.dim))


def reconstruct(rsys: ReducedSystem, reduced: ReducedCurve, q0) -> np.ndarray:
    b, grp = rsys.bundle, rsys.group
    q0 = as_vector(q0, "q0")
    if b.shape_dim and _inf(b.shape_of(q0) - reduced.taus[0]) > 1e-12:
        raise PreconditionError("q0 does not project to the anchor of the reduced curve")
    out = [b.canonical_flat(q0)]
    for k in range(len(reduced)):
        h = b.fiber_of(out[-1])
        w = grp.conjugate(h, reduced.v_reps[k])
        out.append(b.canonical_flat(rsys.conn.ftilde1(out[-1], w, reduced.taus[k + 1])))
    return np.array(out)


def phi_residual(rsys: ReducedSystem, v_prev: ReducedPoint, tau_k, v_k, tau_next, gauge=None):
    return rsys.four_point(v_prev, tau_k, _vrep(v_k), tau_next, gauge, with_force=False)[0]


def psi_residual(rsys: ReducedSystem, v_prev: ReducedPoint, tau_k, v_k, tau_next, gauge=None):
    return rsys.four_point(v_prev, tau_k, _vrep(v_k), tau_next, gauge, with_force=False)[1]


def forced_phi_residual(rsys: ReducedSystem, v_prev, tau_k, v_k, tau_next, gauge=None):
    return rsys.four_point(v_prev, tau_k, _vrep(v_k), tau_next, gauge)[0]


def forced_psi_residual(rsys: ReducedSystem, v_prev, tau_k, v_k, tau_next, gauge=None):
    return rsys.four_point(v_prev, tau_k, _vrep(v_k), tau_next, gauge)[1]


def _vrep(v):
    return v.v_rep if isinstance(v, ReducedPoint) else np.asarray(v, dtype=float)


def nh_reduced_residuals(rsys: ReducedSystem, v_prev: ReducedPoint, tau_k, v_k, tau_next):
    """Pairings of ``phi`` with a basis of the reduced distribution and of ``psi``
    with a basis of the fiber algebra data, both at ``q_k = (tau_k, e)``."""
    if rsys.nh is None:
        return rsys.four_point(v_prev, tau_k, _vrep(v_k), tau_next)
    b = rsys.bundle
    for anchor, w, tau1 in ((v_prev.tau, v_prev.v_rep, tau_k), (tau_k, _vrep(v_k), tau_next)):
        x0 = rsys.rep(anchor)
        c = rsys.nh.constraints(x0, rsys.conn.ftilde1(x0, w, tau1))
        if c.size and _inf(c) > CONSTRAINT_TOL:
            raise ConstraintViolationError(f"reduced pair violates the kinematic constraints by {_inf(c):.3e}")
    phi, psi = rsys.four_point(v_prev, tau_k, _vrep(v_k), tau_next)
    xk = rsys.rep(tau_k)
    return phi @ rsys.reduced_distribution(xk), psi @ rsys.algebra_distribution(xk)


def reduced_residual(rsys: ReducedSystem, v_prev: ReducedPoint, tau_k, v_rep_k, tau_next):
    """Stacked equations used by the reduced stepper (nonholonomic: the
    pairings plus the reduced kinematic constraint)."""
    if rsys.nh is None:
        phi, psi = rsys.four_point(v_prev, tau_k, v_rep_k, tau_next)
        return np.concatenate([phi, psi])
    p, s = nh_reduced_residuals_unchecked(rsys, v_prev, tau_k, v_rep_k, tau_next)
    x0 = rsys.rep(tau_k)
    c = rsys.nh.constraints(x0, rsys.conn.ftilde1(x0, v_rep_k, tau_next))
    return np.concatenate([p, s, c])


def nh_reduced_residuals_unchecked(rsys, v_prev, tau_k, v_rep_k, tau_next):
    phi, psi = rsys.four_point(v_prev, tau_k, v_rep_k, tau_next)
    xk = rsys.rep(tau_k)
    return phi @ rsys.reduced_distribution(xk), psi @ rsys.algebra_distribution(xk)


def reduced_step(rsys: ReducedSystem, v_prev: ReducedPoint, tau_k, cfg: NewtonConfig = DEFAULT_NEWTON,
                 guess=None):
    """Solve ``phi = 0, psi = 0`` jointly for ``(v_k, tau_{k+1})``.

    Returns ``(ReducedPoint(tau_k, v_rep_k), tau_next, NewtonResult)``.
    """
    grp, m = rsys.group, rsys.bundle.shape_dim
    tau_k = as_vector(tau_k, "tau_k") if m else np.zeros(0)
    if guess is None:
        z0 = np.concatenate([grp.log(v_prev.v_rep), 2 * tau_k - v_prev.tau])
    else:
        z0 = as_vector(guess, "guess")

    def R(z):
        return reduced_residual(rsys, v_prev, tau_k, z[:grp.dim], z[grp.dim:])

    res = newton_solve(R, z0, cfg, rsys.sys.scheme)
    v_rep = grp.canonical(res.root[:grp.dim])
    return ReducedPoint(tau_k, v_rep), res.root[grp.dim:], res


def reduced_simulate(rsys: ReducedSystem, v0: ReducedPoint, tau1, steps: int,
                     cfg: NewtonConfig = DEFAULT_NEWTON):
    """``steps`` reduced steps from the seed ``(v_0, tau_1)``; returns ``(ReducedCurve, norms)``."""
    m = rsys.bundle.shape_dim
    taus = [np.asarray(v0.tau, dtype=float).reshape(m), np.asarray(tau1, dtype=float).reshape(m)]
    vreps = [rsys.group.canonical(v0.v_rep)]
    norms = np.empty(steps)
    for k in range(steps):
        try:
            vk, tn, res = reduced_step(rsys, ReducedPoint(taus[-2], vreps[-1]), taus[-1], cfg)
        except DmechError as exc:
            raise SimulationError(k + 2, exc) from exc
        vreps.append(vk.v_rep)
        taus.append(tn)
        norms[k] = res.residual_norm
    rc = ReducedCurve(np.array(taus).reshape(len(taus), m), np.array(vreps).reshape(len(vreps), rsys.group.dim))
    return rc, norms


def reduced_equivalence(rsys: ReducedSystem, reduced: ReducedCurve, gauge=None):
    """Per interior index ``(|phi|_inf, |psi|_inf)`` along a reduced curve."""
    out = []
    for k in range(1, len(reduced)):
        if rsys.nh is not None:
            phi, psi = nh_reduced_residuals(rsys, reduced.point(k - 1), reduced.taus[k],
                                            reduced.v_reps[k], reduced.taus[k + 1])
        else:
            phi, psi = rsys.four_point(reduced.point(k - 1), reduced.taus[k], reduced.v_reps[k],
                                       reduced.taus[k + 1], gauge)
        out.append((_inf(phi), _inf(psi)))
    return np.array(out).reshape(len(out), 2)


# ----------------------------------------------------------------------------
# variational identity


def variational_identity_check(rsys: ReducedSystem, curve, trials: int = 100, rng=None,
                               eps: Optional[float] = None, zero: bool = False) -> float:
    """Compare ``dS_d(q.)(dq.)`` with ``dS^_d(v., tau.)(dv., dtau.)``.

    The reduced variation is built from ``dq.`` as ``dtau_k = T pi(dq_k)`` and
    ``dv_k = (dtau_k, T A_d(dq_k, dq_{k+1}))``; both sides are sums of
    per-segment central differences.
    """
    rng = np.random.default_rng(3) if rng is None else rng
    curve = np.asarray(curve, dtype=float)
    b, grp, sys = rsys.bundle, rsys.group, rsys.sys
    eps = sys.scheme.fd_step if eps is None else eps
    red = reduce_curve(rsys, curve)
    N = curve.shape[0] - 1
    worst = 0.0
    for _ in range(trials):
        dq = np.zeros_like(curve) if zero else rng.standard_normal(curve.shape)
        dq[0] = 0.0
        dq[-1] = 0.0
        full = 0.0
        hat = 0.0
        for k in range(N):
            a, c = curve[k], curve[k + 1]
            if not (dq[k].any() or dq[k + 1].any()):
                continue
            full += (sys.lagrangian(a + eps * dq[k], c + eps * dq[k + 1])
                     - sys.lagrangian(a - eps * dq[k], c - eps * dq[k + 1])) / (2 * eps)
            dtau0 = b.shape_of(dq[k])
            dtau1 = b.shape_of(dq[k + 1])
            dw = rsys.conn.tangent_form(a, c, dq[k], dq[k + 1])
            h = b.fiber_of(a)
            dv = grp.tangent_translate("left", grp.inv(h), grp.tangent_translate("right", h, dw))
            tau0, v0, tau1 = red.taus[k], red.v_reps[k], red.taus[k + 1]

            def lh(t):
                return rsys.lhat(ReducedPoint(tau0 + t * dtau0, v0 + t * dv), tau1 + t * dtau1)

            hat += (lh(eps) - lh(-eps)) / (2 * eps)
        worst = max(worst, abs(full - hat))
    return worst


# ----------------------------------------------------------------------------
# reduction by stages


def stage_bundle(bundle: TrivialBundle, split: int) -> tuple:
    """``(B_H, K)``: the bundle of the first ``split`` factors with the remaining
    fiber coordinates moved into the shape (appended after the old shape)."""
    G = bundle.group
    factors = G.factors if G.kind == "product" else (G,)
    if not 0 < split <= len(factors):
        raise ValueError("split must select a nonempty prefix of the factors")
    H = LieGroup.product(*factors[:split])
    K = LieGroup.product(*factors[split:])
    fH = bundle.fiber_indices[:H.dim]
    fK = bundle.fiber_indices[H.dim:]
    BH = TrivialBundle(H, bundle.shape_dim + K.dim,
                       shape_indices=np.concatenate([bundle.shape_indices, fK]),
                       fiber_indices=fH)
    return BH, K


def two_stage_check(sys: DiscreteMechanicalSystem, bundle: TrivialBundle, q0, q1, steps: int,
                    cfg: NewtonConfig = DEFAULT_NEWTON, split: int = 1) -> dict:
    """Reduce by ``H`` (first ``split`` factors of ``G``), then by the rest ``K``,
    and compare the reconstructed trajectory with one-shot reduction by ``G``
    and with the full simulation.

    Stage two solves the stage-one residuals in the local ``K``-gauge where the
    ``K`` shape coordinate of ``tau_{k-1}`` is the identity; ``K``-invariance of the
    stage-one reduced Lagrangian makes this the reduced equation of stage two.
    """
    q0 = as_vector(q0, "q0")
    q1 = as_vector(q1, "q1")
    full, _ = simulate(sys, q0, q1, steps, cfg)

    # one shot by G
    rg = ReducedSystem(sys, bundle)
    seed = reduce_curve(rg, np.array([q0, q1]))
    red_g, _ = reduced_simulate(rg, seed.point(0), seed.taus[1], steps, cfg)
    one_shot = reconstruct(rg, red_g, q0)

    # stage one by H
    BH, K = stage_bundle(bundle, split)
    rh = ReducedSystem(sys, BH)
    m, kd, hd = bundle.shape_dim, K.dim, BH.group.dim
    seed_h = reduce_curve(rh, np.array([q0, q1]))
    s = [bundle.shape_of(q0), bundle.shape_of(q1)]
    kappa01 = K.difference(bundle.fiber_of(q0)[hd:], bundle.fiber_of(q1)[hd:])
    vH = [seed_h.v_reps[0]]
    vK = [kappa01]

    def R(z, vh_prev, vk_prev, s_prev, s_k):
        vh, vk, s_next = z[:hd], z[hd:hd + kd], z[hd + kd:]
        t_prev = np.concatenate([s_prev, np.zeros(kd)])
        t_k = np.concatenate([s_k, vk_prev])
        t_next = np.concatenate([s_next, vk_prev + vk])
        phi, psi = rh.four_point(ReducedPoint(t_prev, vh_prev), t_k, vh, t_next)
        return np.concatenate([phi, psi])

    for k in range(steps):
        z0 = np.concatenate([vH[-1], vK[-1], 2 * s[-1] - s[-2]])
        try:
            res = newton_solve(lambda z: R(z, vH[-1], vK[-1], s[-2], s[-1]), z0, cfg, sys.scheme)
        except DmechError as exc:
            raise SimulationError(k + 2, exc) from exc
        vH.append(res.root[:hd])
        vK.append(res.root[hd:hd + kd])
        s.append(res.root[hd + kd:])

    # undo stage two: accumulate the K coordinate, then reconstruct stage one
    kappa = [bundle.fiber_of(q0)[hd:]]
    for dk in vK:
        kappa.append(kappa[-1] + dk)
    taus_h = np.array([np.concatenate([s[k], kappa[k]]) for k in range(len(s))])
    staged = reconstruct(rh, ReducedCurve(taus_h, np.array(vH)), q0)

    def dist(A, B):
        return max(bundle.distance(a, c) for a, c in zip(A, B))

    return {
        "staged_vs_one_shot": dist(staged, one_shot),
        "staged_vs_full": dist(staged, full),
        "one_shot_vs_full": dist(one_shot, full),
        "staged": staged,
        "one_shot": one_shot,
        "full": full,
    }
