"""Builtin example systems with analytic slot derivatives."""

from __future__ import annotations

import numpy as np

from .bundle import TrivialBundle
from .dms import DiscreteMechanicalSystem
from .forced import ForcedDMS
from .lie import LieGroup, shortest_angle
from .nonholonomic import NonholonomicDMS
from .numerics import DEFAULT_SCHEME


def _v(x):
    return np.asarray(x, dtype=float)


def free_particle(n: int = 1, h: float = 0.1, scheme=DEFAULT_SCHEME) -> DiscreteMechanicalSystem:
    """``|q1 - q0|^2 / (2h)``, symmetric under all translations (empty shape)."""
    bundle = TrivialBundle(LieGroup.vector(n), 0)

    def L(q0, q1):
        d = _v(q1) - _v(q0)
        return float(d @ d) / (2 * h)

    return DiscreteMechanicalSystem(
        L, n, D1=lambda q0, q1: -(_v(q1) - _v(q0)) / h, D2=lambda q0, q1: (_v(q1) - _v(q0)) / h,
        bundle=bundle, scheme=scheme, name="free_particle", params={"n": n, "h": h})


def free_particle_staged(h: float = 0.1, scheme=DEFAULT_SCHEME) -> DiscreteMechanicalSystem:
    """Planar free particle with ``G = R x R`` as a product (for staging)."""
    base = free_particle(2, h, scheme)
    bundle = TrivialBundle(LieGroup.product(LieGroup.vector(1), LieGroup.vector(1)), 0)
    return DiscreteMechanicalSystem(base.L, 2, base.D1, base.D2, bundle, scheme,
                                    "free_particle_staged", {"h": h})


def harmonic_oscillator(h: float = 0.1, omega: float = 1.0, n: int = 1,
                        scheme=DEFAULT_SCHEME) -> DiscreteMechanicalSystem:
    """Midpoint rule ``|q1-q0|^2/(2h) - h w^2 |(q0+q1)/2|^2 / 2``."""
    w2 = omega * omega

    def L(q0, q1):
        d = _v(q1) - _v(q0)
        m = 0.5 * (_v(q0) + _v(q1))
        return float(d @ d) / (2 * h) - 0.5 * h * w2 * float(m @ m)

    def D1(q0, q1):
        return -(_v(q1) - _v(q0)) / h - h * w2 * (_v(q0) + _v(q1)) / 4

    def D2(q0, q1):
        return (_v(q1) - _v(q0)) / h - h * w2 * (_v(q0) + _v(q1)) / 4

    return DiscreteMechanicalSystem(L, n, D1, D2, None, scheme, "harmonic_oscillator",
                                    {"h": h, "omega": omega, "n": n})


class _CentralForce:
    """Polar central-force Lagrangian on ``(r, theta)`` (optionally with ``z``).

    ``V(r) = -k/r + b r^2 / 2``; ``asymmetry`` adds ``eps (cos th0 + cos th1)/2``,
    which breaks the rotation symmetry. The angle increment enters through its
    shortest representative.
    """

    def __init__(self, h, k, b, asymmetry, with_z):
        self.h, self.k, self.b, self.eps, self.with_z = h, k, b, asymmetry, with_z

    def V(self, r):
        return -self.k / r + 0.5 * self.b * r * r

    def dV(self, r):
        return self.k / (r * r) + self.b * r

    def L(self, q0, q1):
        h = self.h
        r0, t0, r1, t1 = q0[0], q0[1], q1[0], q1[1]
        d = float(shortest_angle(t1 - t0))
        rb = 0.5 * (r0 + r1)
        val = (r1 - r0) ** 2 / (2 * h) + 0.5 * rb * rb * d * d / h - 0.5 * h * (self.V(r0) + self.V(r1))
        if self.eps:
            val += 0.5 * self.eps * (np.cos(t0) + np.cos(t1))
        if self.with_z:
            val += (q1[2] - q0[2]) ** 2 / (2 * h)
        return float(val)

    def _parts(self, q0, q1):
        h = self.h
        r0, t0, r1, t1 = q0[0], q0[1], q1[0], q1[1]
        d = float(shortest_angle(t1 - t0))
        rb = 0.5 * (r0 + r1)
        return h, r0, t0, r1, t1, d, rb

    def D1(self, q0, q1):
        q0, q1 = _v(q0), _v(q1)
        h, r0, t0, r1, t1, d, rb = self._parts(q0, q1)
        out = np.zeros(q0.size)
        out[0] = -(r1 - r0) / h + 0.5 * rb * d * d / h - 0.5 * h * self.dV(r0)
        out[1] = -rb * rb * d / h - 0.5 * self.eps * np.sin(t0)
        if self.with_z:
            out[2] = -(q1[2] - q0[2]) / h
        return out

    def D2(self, q0, q1):
        q0, q1 = _v(q0), _v(q1)
        h, r0, t0, r1, t1, d, rb = self._parts(q0, q1)
        out = np.zeros(q0.size)
        out[0] = (r1 - r0) / h + 0.5 * rb * d * d / h - 0.5 * h * self.dV(r1)
        out[1] = rb * rb * d / h - 0.5 * self.eps * np.sin(t1)
        if self.with_z:
            out[2] = (q1[2] - q0[2]) / h
        return out


def central_force(h: float = 0.1, k: float = 1.0, b: float = 0.0, asymmetry: float = 0.0,
                  scheme=DEFAULT_SCHEME) -> DiscreteMechanicalSystem:
    """Planar particle in a central potential, coordinates ``(r, theta)``; ``SO(2)`` acts on ``theta``."""
    cf = _CentralForce(h, k, b, asymmetry, False)
    bundle = TrivialBundle(LieGroup.circle(), 1, shape_domain=lambda s: s[0] > 0)
    return DiscreteMechanicalSystem(cf.L, 2, cf.D1, cf.D2, bundle, scheme, "central_force",
                                    {"h": h, "k": k, "b": b, "asymmetry": asymmetry})


def central_force_product(h: float = 0.1, k: float = 1.0, b: float = 0.0,
                          scheme=DEFAULT_SCHEME) -> DiscreteMechanicalSystem:
    """Central force in ``(r, theta)`` times a free line ``z``; ``G = R x SO(2)`` acting on ``(z, theta)``."""
    cf = _CentralForce(h, k, b, 0.0, True)
    bundle = TrivialBundle(LieGroup.product(LieGroup.vector(1), LieGroup.circle()), 1,
                           shape_indices=[0], fiber_indices=[2, 1])
    return DiscreteMechanicalSystem(cf.L, 3, cf.D1, cf.D2, bundle, scheme, "central_force_product",
                                    {"h": h, "k": k, "b": b})


def damped_particle(h: float = 0.1, c: float = 1.0, n: int = 1, scheme=DEFAULT_SCHEME) -> ForcedDMS:
    """Free particle with ``f- = f+ = -(c/2)(q1 - q0)``.

    The symmetry is translation of coordinate 0; for ``n > 1`` the other
    coordinates form the shape.
    """
    base = free_particle(n, h, scheme)
    bundle = TrivialBundle(LieGroup.vector(1), n - 1, shape_indices=range(1, n), fiber_indices=[0])
    base = DiscreteMechanicalSystem(base.L, n, base.D1, base.D2, bundle, scheme, "damped_particle",
                                    {"h": h, "c": c, "n": n})

    def f(q0, q1):
        return -0.5 * c * (_v(q1) - _v(q0))

    return ForcedDMS(base, f, f)


def nonholonomic_particle(h: float = 0.1, scheme=DEFAULT_SCHEME) -> NonholonomicDMS:
    """Free particle in ``(x, y, z)`` with ``D = span{(1,0,y), (0,1,0)}`` and the
    midpoint constraint ``(z1 - z0) - ((y0 + y1)/2)(x1 - x0) = 0``.

    The bundle is translations of ``(x, z)`` with shape ``y``.
    """
    fp = free_particle(3, h, scheme)
    bundle = TrivialBundle(LieGroup.vector(2), 1, shape_indices=[1], fiber_indices=[0, 2])
    base = DiscreteMechanicalSystem(fp.L, 3, fp.D1, fp.D2, bundle, scheme, "nonholonomic_particle",
                                    {"h": h})

    def basis(q):
        return np.array([[1.0, 0.0], [0.0, 1.0], [q[1], 0.0]])

    def annihilator(q):
        return np.array([[-q[1], 0.0, 1.0]])

    def chi(q0, q1):
        return np.array([(q1[2] - q0[2]) - 0.5 * (q0[1] + q1[1]) * (q1[0] - q0[0])])

    return NonholonomicDMS(base, basis, annihilator, chi)


def y_translation_bundle() -> TrivialBundle:
    """Translations of ``y`` on the nonholonomic particle (generator ``(0,1,0)`` lies in ``D``)."""
    return TrivialBundle(LieGroup.vector(1), 2, shape_indices=[0, 2], fiber_indices=[1])


def zero_lagrangian(n: int = 1, scheme=DEFAULT_SCHEME) -> DiscreteMechanicalSystem:
    return DiscreteMechanicalSystem(lambda q0, q1: 0.0, n, lambda q0, q1: np.zeros(n),
                                    lambda q0, q1: np.zeros(n), None, scheme, "zero")


BUILTINS = {
    "free_particle": free_particle,
    "harmonic_oscillator": harmonic_oscillator,
    "central_force": central_force,
    "central_force_product": central_force_product,
    "damped_particle": damped_particle,
    "nonholonomic_particle": nonholonomic_particle,
}
