"""Trivial principal bundles ``Q = S x G`` and their (discrete) connections.

Points of ``Q`` travel through the library as flat coordinate vectors of
length ``n``; a :class:`TrivialBundle` knows which flat indices are shape
coordinates and which are the group chart, and converts to and from
:class:`ConfigPoint`. The group acts by left multiplication on the fiber.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DescriptorMismatchError, NotInSameFiberError, PreconditionError
from .lie import LieGroup
from .numerics import DEFAULT_SCHEME, DerivativeScheme, as_vector

SAME_FIBER_TOL = 1e-12


@dataclass(frozen=True)
class ConfigPoint:
    shape: np.ndarray
    fiber: np.ndarray


class TrivialBundle:
    """``Q = S x G`` with ``S`` an open subset of ``R^m``.

    ``shape_indices`` and ``fiber_indices`` place the shape and group chart
    coordinates inside flat vectors; they default to shape first, fiber last.
    """

    def __init__(self, group: LieGroup, shape_dim: int,
                 shape_indices: Optional[Sequence[int]] = None,
                 fiber_indices: Optional[Sequence[int]] = None,
                 shape_domain: Optional[Callable[[np.ndarray], bool]] = None):
        self.group = group
        self.shape_dim = int(shape_dim)
        self.n = self.shape_dim + group.dim
        if shape_indices is None and fiber_indices is None:
            shape_indices = range(self.shape_dim)
            fiber_indices = range(self.shape_dim, self.n)
        elif shape_indices is None or fiber_indices is None:
            raise ValueError("give both shape_indices and fiber_indices or neither")
        self.shape_indices = np.array(list(shape_indices), dtype=int)
        self.fiber_indices = np.array(list(fiber_indices), dtype=int)
        if self.shape_indices.size != self.shape_dim or self.fiber_indices.size != group.dim:
            raise ValueError("index lists do not match shape/group dimensions")
        if sorted(np.concatenate([self.shape_indices, self.fiber_indices]).tolist()) != list(range(self.n)):
            raise ValueError("shape and fiber indices must partition range(n)")
        self.shape_domain = shape_domain
        # flat-coordinate mask of angle coordinates, for circle-aware distances
        self.angle_mask = np.zeros(self.n, dtype=bool)
        self.angle_mask[self.fiber_indices] = group.circle_mask
        self._gen = np.zeros((self.n, group.dim))
        self._gen[self.fiber_indices, np.arange(group.dim)] = 1.0
        self._shape_emb = np.zeros((self.n, self.shape_dim))
        self._shape_emb[self.shape_indices, np.arange(self.shape_dim)] = 1.0

    def __repr__(self):
        return (f"TrivialBundle(group={self.group}, shape_dim={self.shape_dim}, "
                f"shape_indices={self.shape_indices.tolist()}, "
                f"fiber_indices={self.fiber_indices.tolist()})")

    # coordinates --------------------------------------------------------
    def point(self, shape, fiber) -> ConfigPoint:
        shape = as_vector(shape, "shape")
        fiber = as_vector(fiber, "fiber")
        if shape.size != self.shape_dim:
            raise DescriptorMismatchError(f"shape of size {shape.size}, expected {self.shape_dim}")
        if self.shape_domain is not None and not self.shape_domain(shape):
            raise PreconditionError(f"shape {shape} outside the shape domain")
        return ConfigPoint(shape, self.group.canonical(fiber))

    def split(self, x) -> ConfigPoint:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise DescriptorMismatchError(f"flat point of size {x.size}, expected {self.n}")
        return self.point(x[self.shape_indices], x[self.fiber_indices])

    def join(self, q: ConfigPoint) -> np.ndarray:
        x = np.empty(self.n)
        x[self.shape_indices] = q.shape
        x[self.fiber_indices] = q.fiber
        return x

    def flat(self, shape, fiber) -> np.ndarray:
        """Flat vector from shape and fiber coordinates, without canonicalizing."""
        x = np.empty(self.n)
        x[self.shape_indices] = shape
        x[self.fiber_indices] = fiber
        return x

    def shape_of(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.shape_indices]

    def fiber_of(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.fiber_indices]

    def project(self, q: ConfigPoint) -> np.ndarray:
        return q.shape.copy()

    def canonical_flat(self, x) -> np.ndarray:
        x = np.array(x, dtype=float)
        x[self.fiber_indices] = self.group.canonical(x[self.fiber_indices])
        return x

    def distance(self, x, y) -> float:
        """Infinity-norm distance between flat points, shortest arcs on angles."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        d[..., self.angle_mask] = np.pi - np.mod(np.pi - d[..., self.angle_mask], 2 * np.pi)
        return float(np.max(np.abs(d))) if d.size else 0.0

    # action ---------------------------------------------------------------
    def act(self, g, q: ConfigPoint) -> ConfigPoint:
        return ConfigPoint(q.shape.copy(), self.group.mul(g, q.fiber))

    def act_flat(self, g, x) -> np.ndarray:
        """Left action on a flat point (fiber coordinates are not canonicalized)."""
        g = np.asarray(g, dtype=float).reshape(-1)
        if g.size != self.group.dim:
            raise DescriptorMismatchError(f"group element of size {g.size} for {self.group}")
        y = np.array(x, dtype=float)
        y[self.fiber_indices] = y[self.fiber_indices] + g
        return y

    def generators(self, x=None) -> np.ndarray:
        """Matrix ``n x dim G`` whose columns are the generators of a basis of the algebra."""
        return self._gen

    def inf_generator(self, xi, q: Optional[ConfigPoint] = None) -> np.ndarray:
        """Flat tangent vector ``xi_Q(q)``."""
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.size != self.group.dim:
            raise DescriptorMismatchError(f"algebra element of size {xi.size} for {self.group}")
        fib = xi if q is None else self.group.tangent_translate("right", q.fiber, xi)
        v = np.zeros(self.n)
        v[self.fiber_indices] = fib
        return v

    def shape_embedding(self) -> np.ndarray:
        """Matrix ``n x m`` embedding shape tangent vectors with zero fiber part."""
        return self._shape_emb

    def group_difference(self, q: ConfigPoint, q1: ConfigPoint) -> np.ndarray:
        """The ``g`` with ``act(g, q) = q1``."""
        if q.shape.size and np.max(np.abs(q.shape - q1.shape)) > SAME_FIBER_TOL:
            raise NotInSameFiberError(f"shapes {q.shape} and {q1.shape} differ")
        return self.group.mul(q1.fiber, self.group.inv(q.fiber))

    def random_point(self, rng: np.random.Generator, shape_sampler=None) -> ConfigPoint:
        s = shape_sampler(rng) if shape_sampler is not None else rng.standard_normal(self.shape_dim)
        return self.point(s, self.group.random(rng))


# ----------------------------------------------------------------------------
# principal connection


class PrincipalConnection:
    """Connection one-form ``A(s,h)(ds,dh) = dh h^-1 + shape_form(s) ds``.

    With ``shape_form=None`` this is the trivial (Maurer-Cartan) connection whose
    horizontal vectors are ``(ds, 0)``.
    """

    def __init__(self, bundle: TrivialBundle, shape_form: Optional[Callable] = None):
        self.bundle = bundle
        self.shape_form = shape_form

    def _A(self, s):
        if self.shape_form is None:
            return np.zeros((self.bundle.group.dim, self.bundle.shape_dim))
        return np.asarray(self.shape_form(s), dtype=float).reshape(self.bundle.group.dim,
                                                                    self.bundle.shape_dim)

    def __call__(self, x, dq) -> np.ndarray:
        b = self.bundle
        dq = np.asarray(dq, dtype=float)
        fib = b.group.tangent_translate("right", b.group.inv(b.fiber_of(x)), dq[b.fiber_indices])
        return fib + self._A(b.shape_of(x)) @ dq[b.shape_indices]

    def lift_matrix(self, x) -> np.ndarray:
        """``n x m`` matrix of the horizontal lift ``h^x``."""
        b = self.bundle
        H = b.shape_embedding().copy()
        if self.shape_form is not None:
            H[b.fiber_indices, :] = -self._A(b.shape_of(x))
        return H

    def horizontal_lift(self, x, dtau) -> np.ndarray:
        return self.lift_matrix(x) @ np.asarray(dtau, dtype=float)


# ----------------------------------------------------------------------------
# affine discrete connections


class AffineDiscreteConnection:
    """Base class for group-valued two-point forms on a trivial bundle.

    Subclasses implement :meth:`form`, :meth:`level` and :meth:`lift`; tangent
    maps default to central differences and may be overridden with exact ones.
    All methods take and return flat coordinate vectors.
    """

    tag = "generic"

    def __init__(self, bundle: TrivialBundle, scheme: DerivativeScheme = DEFAULT_SCHEME):
        self.bundle = bundle
        self.group = bundle.group
        self.scheme = scheme

    def form(self, x0, x1) -> np.ndarray:
        raise NotImplementedError

    def level(self, x) -> np.ndarray:
        raise NotImplementedError

    def lift(self, x0, tau1) -> np.ndarray:
        """Flat ``x1`` with ``form(x0, x1) = e`` and shape ``tau1``."""
        raise NotImplementedError

    def ftilde1(self, x0, w, tau1) -> np.ndarray:
        return self.bundle.act_flat(w, self.lift(x0, tau1))

    # tangent maps -------------------------------------------------------------
    def _form_local(self, x0, x1, ref):
        # chart coordinates of form() near ``ref``, free of the 2*pi cut
        return ref + self.group.difference(ref, self.form(x0, x1))

    def form_jacobians(self, x0, x1):
        """Matrices ``(dim G x n, dim G x n)`` of the two slot derivatives, chart coordinates."""
        ref = self.form(x0, x1)
        eps = self.scheme.fd_step
        n = self.bundle.n
        J0 = np.empty((self.group.dim, n))
        J1 = np.empty((self.group.dim, n))
        for J, slot in ((J0, 0), (J1, 1)):
            for i in range(n):
                xp = [np.array(x0, dtype=float), np.array(x1, dtype=float)]
                xm = [xp[0].copy(), xp[1].copy()]
                xp[slot][i] += eps
                xm[slot][i] -= eps
                J[:, i] = (self._form_local(*xp, ref) - self._form_local(*xm, ref)) / (2 * eps)
        return J0, J1

    def ftilde1_jacobians(self, x0, w, tau1):
        """Jacobians of ``ftilde1`` in ``x0`` (n x n), ``w`` (n x dim G), ``tau1`` (n x m)."""
        base = self.ftilde1(x0, w, tau1)
        eps = self.scheme.fd_step
        b = self.bundle

        def local(x):
            # unwrap angles relative to ``base`` so differences stay small
            d = x - base
            d[b.angle_mask] = np.pi - np.mod(np.pi - d[b.angle_mask], 2 * np.pi)
            return base + d

        def jac(fun, z):
            z = np.asarray(z, dtype=float)
            cols = []
            for i in range(z.size):
                zp, zm = z.copy(), z.copy()
                zp[i] += eps
                zm[i] -= eps
                cols.append((local(fun(zp)) - local(fun(zm))) / (2 * eps))
            return np.column_stack(cols) if cols else np.zeros((b.n, 0))

        x0 = np.asarray(x0, dtype=float)
        w = np.asarray(w, dtype=float)
        tau1 = np.asarray(tau1, dtype=float)
        Jq = jac(lambda z: self.ftilde1(z, w, tau1), x0)
        Jw = jac(lambda z: self.ftilde1(x0, z, tau1), w)
        Jt = jac(lambda z: self.ftilde1(x0, w, z), tau1)
        return Jq, Jw, Jt

    def tangent_form(self, x0, x1, dx0, dx1) -> np.ndarray:
        """Derivative of the form along ``(dx0, dx1)``, right-translated to the identity."""
        J0, J1 = self.form_jacobians(x0, x1)
        d = J0 @ np.asarray(dx0, dtype=float) + J1 @ np.asarray(dx1, dtype=float)
        return self.group.tangent_translate("right", self.group.inv(self.form(x0, x1)), d)

    # reduction isomorphism ---------------------------------------------------
    def upsilon(self, x0, x1):
        """``(v_rep, anchor, tau1)``: the reduced point of the pair and the new shape."""
        b = self.bundle
        w = self.form(x0, x1)
        h = b.fiber_of(x0)
        v_rep = self.group.conjugate(self.group.inv(h), w)
        return v_rep, b.shape_of(x0), b.shape_of(x1)


class TrivialDiscreteConnection(AffineDiscreteConnection):
    """``A_d((s0,h0),(s1,h1)) = h1 h0^-1`` with level ``e``."""

    tag = "trivial"

    def form(self, x0, x1):
        b = self.bundle
        return self.group.mul(b.fiber_of(x1), self.group.inv(b.fiber_of(x0)))

    def level(self, x):
        return self.group.identity()

    def lift(self, x0, tau1):
        b = self.bundle
        return b.flat(tau1, b.fiber_of(x0))

    def ftilde1(self, x0, w, tau1):
        b = self.bundle
        return b.flat(tau1, b.fiber_of(x0) + np.asarray(w, dtype=float))

    def form_jacobians(self, x0, x1):
        G = self.bundle.generators().T
        return -G, G.copy()

    def ftilde1_jacobians(self, x0, w, tau1):
        b = self.bundle
        Jq = np.zeros((b.n, b.n))
        Jq[np.ix_(b.fiber_indices, b.fiber_indices)] = np.eye(b.group.dim)
        return Jq, b.generators().copy(), b.shape_embedding().copy()


class ShapeShiftConnection(AffineDiscreteConnection):
    """``A_d((s0,h0),(s1,h1)) = h1 h0^-1 exp(-offset(s0, s1))`` for abelian groups.

    ``offset(s, s) = 0`` keeps the level trivial; ``offset_jac(s0, s1)`` returns
    the pair of ``dim G x m`` partial derivatives and makes the tangent maps exact.
    """

    tag = "shape-shift"

    def __init__(self, bundle, offset, offset_jac=None, scheme=DEFAULT_SCHEME):
        super().__init__(bundle, scheme)
        self.offset = offset
        self.offset_jac = offset_jac

    def _off(self, s0, s1):
        return np.asarray(self.offset(s0, s1), dtype=float).reshape(self.group.dim)

    def form(self, x0, x1):
        b = self.bundle
        g = self.group.mul(b.fiber_of(x1), self.group.inv(b.fiber_of(x0)))
        return self.group.mul(g, self.group.exp(-self._off(b.shape_of(x0), b.shape_of(x1))))

    def level(self, x):
        return self.group.identity()

    def lift(self, x0, tau1):
        b = self.bundle
        return b.flat(tau1, b.fiber_of(x0) + self._off(b.shape_of(x0), tau1))

    def ftilde1(self, x0, w, tau1):
        b = self.bundle
        return b.flat(tau1, b.fiber_of(x0) + np.asarray(w, dtype=float)
                      + self._off(b.shape_of(x0), tau1))

    def form_jacobians(self, x0, x1):
        if self.offset_jac is None:
            return super().form_jacobians(x0, x1)
        b = self.bundle
        A0, A1 = (np.atleast_2d(a) for a in self.offset_jac(b.shape_of(x0), b.shape_of(x1)))
        G = b.generators().T
        J0, J1 = -G.copy(), G.copy()
        J0[:, b.shape_indices] -= A0
        J1[:, b.shape_indices] -= A1
        return J0, J1

    def ftilde1_jacobians(self, x0, w, tau1):
        if self.offset_jac is None:
            return super().ftilde1_jacobians(x0, w, tau1)
        b = self.bundle
        A0, A1 = (np.atleast_2d(a) for a in self.offset_jac(b.shape_of(x0), tau1))
        Jq = np.zeros((b.n, b.n))
        Jq[np.ix_(b.fiber_indices, b.fiber_indices)] = np.eye(b.group.dim)
        Jq[np.ix_(b.fiber_indices, b.shape_indices)] = A0
        Jt = b.shape_embedding().copy()
        Jt[b.fiber_indices, :] = A1
        return Jq, b.generators().copy(), Jt


# ----------------------------------------------------------------------------
# module-level operations on ConfigPoints


def act(bundle: TrivialBundle, g, q: ConfigPoint) -> ConfigPoint:
    return bundle.act(g, q)


def inf_generator(bundle: TrivialBundle, xi, q: ConfigPoint) -> np.ndarray:
    return bundle.inf_generator(xi, q)


def group_difference(bundle: TrivialBundle, q: ConfigPoint, q1: ConfigPoint) -> np.ndarray:
    return bundle.group_difference(q, q1)


def discrete_conn(conn: AffineDiscreteConnection, q0: ConfigPoint, q1: ConfigPoint) -> np.ndarray:
    b = conn.bundle
    return conn.group.canonical(conn.form(b.join(q0), b.join(q1)))


def discrete_horizontal_lift(conn: AffineDiscreteConnection, q0: ConfigPoint, tau1) -> ConfigPoint:
    b = conn.bundle
    return b.split(conn.lift(b.join(q0), as_vector(tau1, "tau1")))


def tangent_discrete_conn(conn: AffineDiscreteConnection, q0: ConfigPoint, q1: ConfigPoint,
                          dq0, dq1) -> np.ndarray:
    b = conn.bundle
    return conn.tangent_form(b.join(q0), b.join(q1), dq0, dq1)


def upsilon(conn: AffineDiscreteConnection, q0: ConfigPoint, q1: ConfigPoint):
    """Reduced image of a pair: ``(ReducedPoint-like (anchor, v_rep), tau1)``."""
    from .reduction import ReducedPoint

    b = conn.bundle
    v_rep, anchor, tau1 = conn.upsilon(b.join(q0), b.join(q1))
    return ReducedPoint(anchor, conn.group.canonical(v_rep)), tau1


def ftilde1(conn: AffineDiscreteConnection, q0: ConfigPoint, w, tau1) -> ConfigPoint:
    b = conn.bundle
    return b.split(conn.ftilde1(b.join(q0), as_vector(w, "w"), as_vector(tau1, "tau1")))
