"""Abelian Lie groups in chart coordinates: vector groups, the circle, products.

Elements, algebra elements and covectors are plain 1-d numpy arrays; the
:class:`LieGroup` descriptor owns the group law and validates dimensions.
Circle coordinates are canonicalized to ``[0, 2*pi)`` after every operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DescriptorMismatchError

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Map angles to ``[0, 2*pi)``."""
    a = np.mod(a, TWO_PI)
    return np.where(a >= TWO_PI, a - TWO_PI, a)


def shortest_angle(a):
    """Representative of ``a`` modulo ``2*pi`` in ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), TWO_PI)


@dataclass(frozen=True)
class LieGroup:
    kind: str
    k: int = 0
    factors: Tuple["LieGroup", ...] = ()

    def __post_init__(self):
        if self.kind not in ("vector", "circle", "product"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.kind == "vector" and self.k < 0:
            raise ValueError("vector group dimension must be nonnegative")

    # construction -----------------------------------------------------
    @staticmethod
    def vector(k: int) -> "LieGroup":
        return LieGroup("vector", k=int(k))

    @staticmethod
    def circle() -> "LieGroup":
        return LieGroup("circle", k=1)

    @staticmethod
    def product(*factors: "LieGroup") -> "LieGroup":
        return LieGroup("product", k=sum(f.dim for f in factors), factors=tuple(factors))

    @property
    def dim(self) -> int:
        if self.kind == "product":
            return sum(f.dim for f in self.factors)
        return self.k

    @property
    def is_abelian(self) -> bool:
        return True

    @property
    def circle_mask(self) -> np.ndarray:
        """Boolean mask of chart coordinates that are angles."""
        if self.kind == "circle":
            return np.array([True])
        if self.kind == "vector":
            return np.zeros(self.k, dtype=bool)
        if not self.factors:
            return np.zeros(0, dtype=bool)
        return np.concatenate([f.circle_mask for f in self.factors])

    def factor_slices(self):
        """Chart slices of the factors of a product (the whole chart otherwise)."""
        if self.kind != "product":
            return [slice(0, self.dim)]
        out, start = [], 0
        for f in self.factors:
            out.append(slice(start, start + f.dim))
            start += f.dim
        return out

    def __str__(self):
        if self.kind == "vector":
            return f"vector({self.k})"
        if self.kind == "circle":
            return "circle"
        return "product(" + ", ".join(str(f) for f in self.factors) + ")"

    # validation -------------------------------------------------------
    def _check(self, *elems):
        out = []
        for e in elems:
            a = np.asarray(e, dtype=float).reshape(-1)
            if a.size != self.dim:
                raise DescriptorMismatchError(
                    f"element of size {a.size} does not belong to {self} (dim {self.dim})")
            out.append(a)
        return out

    def canonical(self, g) -> np.ndarray:
        (g,) = self._check(g)
        mask = self.circle_mask
        if mask.any():
            g = g.copy()
            g[mask] = wrap_angle(g[mask])
        return g

    # group law --------------------------------------------------------
    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def mul(self, g, h) -> np.ndarray:
        g, h = self._check(g, h)
        return self.canonical(g + h)

    def inv(self, g) -> np.ndarray:
        (g,) = self._check(g)
        return self.canonical(-g)

    def exp(self, xi) -> np.ndarray:
        (xi,) = self._check(xi)
        return self.canonical(xi)

    def log(self, g) -> np.ndarray:
        (g,) = self._check(g)
        out = g.copy()
        mask = self.circle_mask
        out[mask] = shortest_angle(g[mask])
        return out

    def difference(self, g, h) -> np.ndarray:
        """``log(h g^-1)`` with angles taken as shortest representatives."""
        g, h = self._check(g, h)
        return self.log(h - g)

    def equal(self, g, h, tol=1e-12) -> bool:
        d = self.difference(g, h)
        return bool(np.all(np.abs(d) <= tol)) if d.size else True

    def conjugate(self, g, w) -> np.ndarray:
        """``g w g^-1``."""
        return self.mul(self.mul(g, w), self.inv(g))

    # adjoint actions (identities on abelian groups) --------------------
    def adjoint(self, g, xi) -> np.ndarray:
        g, xi = self._check(g, xi)
        return xi.copy()

    def coadjoint(self, g, mu) -> np.ndarray:
        g, mu = self._check(g, mu)
        return mu.copy()

    def bracket(self, xi, eta) -> np.ndarray:
        self._check(xi, eta)
        return np.zeros(self.dim)

    # translations of tangent and cotangent vectors in chart coordinates
    def tangent_translate(self, side: str, w1, dw0) -> np.ndarray:
        """``w1 dw0`` (side='left') or ``dw0 w1`` (side='right')."""
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        w1, dw0 = self._check(w1, dw0)
        return dw0.copy()

    def cotangent_translate(self, side: str, w1, alpha0) -> np.ndarray:
        """``w1 alpha0`` (side='left') or ``alpha0 w1`` (side='right')."""
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        w1, alpha0 = self._check(w1, alpha0)
        return alpha0.copy()

    # sampling ---------------------------------------------------------
    def random(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        g = scale * rng.standard_normal(self.dim)
        mask = self.circle_mask
        g[mask] = rng.uniform(0.0, TWO_PI, mask.sum())
        return self.canonical(g)
