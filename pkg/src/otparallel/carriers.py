"""Discrete carriers of embedded submanifolds.

A carrier samples a submanifold S of a model manifold at finitely many
points and knows the tangent/normal frames of its parametrization. Curve
carriers (circles in the torus, graphs over the cylinder's base circle)
provide one-dimensional tangential calculus: central-difference
derivatives, loop integrals and cumulative potentials. The point carrier
and the full-grid carrier cover the zero-dimensional and codimension-zero
extremes.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from . import grids
from .manifolds import Cylinder, FlatTorus, Manifold


class SubmanifoldCarrier(ABC):
    """Finite sample of a submanifold with frame and calculus hooks."""

    manifold: Manifold
    points: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]

    @property
    @abstractmethod
    def normal_dim(self):
        """Dimension of the normal spaces along the carrier."""

    @abstractmethod
    def tangential_gradient(self, values):
        """Discrete gradient of a sampled function along the carrier."""

    def same_carrier(self, other, tol=1e-12):
        return (
            type(self) is type(other)
            and self.manifold == other.manifold
            and self.points.shape == other.points.shape
            and np.max(np.abs(self.points - other.points)) <= tol
        )


@dataclass(frozen=True)
class PointCarrier(SubmanifoldCarrier):
    """A single point; the normal space is the whole tangent space."""

    manifold: Manifold
    point: np.ndarray

    def __post_init__(self):
        pt = np.asarray(self.point, dtype=float)
        self.manifold.validate_points(pt)
        object.__setattr__(self, "point", pt)
        object.__setattr__(self, "points", pt[None, :])

    @property
    def normal_dim(self):
        # chart/tangent dimension of the ambient model
        if isinstance(self.manifold, FlatTorus):
            return self.manifold.dim
        return 2

    def tangential_gradient(self, values):
        return np.zeros((1, 0))


class _ClosedCurveCarrier(SubmanifoldCarrier):
    """Shared calculus for closed curves sampled at equispaced parameters."""

    #: parameter spacing (not arclength unless the speed is one)
    param_step: float

    def tangent_frame(self):
        raise NotImplementedError

    def normal_frame(self):
        raise NotImplementedError

    def speed(self):
        """|ds/dparam| per sample."""
        raise NotImplementedError

    @property
    def normal_dim(self):
        return 1

    def tangential_gradient(self, values):
        """Central-difference derivative with respect to arclength."""
        values = np.asarray(values, dtype=float)
        dparam = (np.roll(values, -1) - np.roll(values, 1)) / (2 * self.param_step)
        return dparam / self.speed()

    def arclength_weights(self):
        return self.speed() * self.param_step

    def loop_integral(self, scalars):
        """Closed-loop integral of a tangential scalar field (arclength)."""
        return float(np.sum(np.asarray(scalars) * self.arclength_weights()))

    def cumulative_potential(self, scalars):
        """Trapezoid antiderivative of a tangential field, mean-centered.

        Integrates d(pot)/ds = scalars around the loop starting at the
        first sample; sensible when the loop integral vanishes.
        """
        integrand = np.asarray(scalars, dtype=float) * self.arclength_weights()
        pot = np.concatenate(
            [[0.0], np.cumsum(0.5 * (integrand[:-1] + integrand[1:]))]
        )
        return pot - pot.mean()

    def split(self, index, v):
        """Orthogonal split of an ambient tangent vector at sample ``index``."""
        tau = self.tangent_frame()[index]
        nor = self.normal_frame()[index]
        v = np.asarray(v, dtype=float)
        vt = float(v @ tau)
        vn = float(v @ nor)
        return vt * tau, vn * nor

    def tangential_component(self, vectors):
        """Scalar tangential components of per-sample ambient vectors."""
        return np.einsum("ij,ij->i", np.asarray(vectors, dtype=float), self.tangent_frame())

    def normal_component(self, vectors):
        return np.einsum("ij,ij->i", np.asarray(vectors, dtype=float), self.normal_frame())


@dataclass(frozen=True)
class CircleInTorus(_ClosedCurveCarrier):
    """Horizontal circle ``y = height`` in a 2-d flat torus, sampled at
    ``n`` equispaced arcs."""

    manifold: FlatTorus
    height: float
    n: int

    def __post_init__(self):
        if self.manifold.dim != 2:
            raise ValueError("circle carrier needs a 2-d torus")
        period = self.manifold.periods[0]
        xs = np.arange(self.n) * (period / self.n)
        pts = np.stack([xs, np.full(self.n, self.height % self.manifold.periods[1])], axis=-1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "param_step", period / self.n)

    def tangent_frame(self):
        return np.tile(np.array([1.0, 0.0]), (self.n, 1))

    def normal_frame(self):
        return np.tile(np.array([0.0, 1.0]), (self.n, 1))

    def speed(self):
        return np.ones(self.n)


@dataclass(frozen=True)
class GraphOnCylinder(_ClosedCurveCarrier):
    """Graph ``height = profile(arc)`` over the cylinder's base circle.

    The profile is sampled at ``n`` equispaced arcs; its derivative is
    computed spectrally, which is exact for band-limited profiles.
    """

    manifold: Cylinder
    profile: np.ndarray

    def __post_init__(self):
        prof = np.asarray(self.profile, dtype=float)
        n = prof.shape[0]
        c = self.manifold.circumference
        xs = np.arange(n) * (c / n)
        pts = np.stack([xs, prof], axis=-1)
        slope = grids.grad(prof, (c,))[:, 0]
        object.__setattr__(self, "profile", prof)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "param_step", c / n)
        object.__setattr__(self, "_slope", slope)

    @property
    def slope(self):
        return self._slope

    def tangent_frame(self):
        s = np.sqrt(1.0 + self._slope**2)
        return np.stack([1.0 / s, self._slope / s], axis=-1)

    def normal_frame(self):
        s = np.sqrt(1.0 + self._slope**2)
        return np.stack([-self._slope / s, 1.0 / s], axis=-1)

    def speed(self):
        return np.sqrt(1.0 + self._slope**2)


@dataclass(frozen=True)
class BaseCircleOnCylinder(_ClosedCurveCarrier):
    """The base circle ``height = h0`` of a cylinder."""

    manifold: Cylinder
    n: int
    height: float = 0.0

    def __post_init__(self):
        c = self.manifold.circumference
        xs = np.arange(self.n) * (c / self.n)
        pts = np.stack([xs, np.full(self.n, self.height)], axis=-1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "param_step", c / self.n)

    def tangent_frame(self):
        return np.tile(np.array([1.0, 0.0]), (self.n, 1))

    def normal_frame(self):
        return np.tile(np.array([0.0, 1.0]), (self.n, 1))

    def speed(self):
        return np.ones(self.n)


@dataclass(frozen=True)
class TorusGridCarrier(SubmanifoldCarrier):
    """The whole 2-d torus sampled on its uniform grid (codimension zero)."""

    manifold: FlatTorus
    shape: tuple

    def __post_init__(self):
        pts = grids.grid_points(self.shape, self.manifold.periods).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    @property
    def normal_dim(self):
        return 0

    def tangential_gradient(self, values):
        field = np.asarray(values, dtype=float).reshape(self.shape)
        return grids.grad(field, self.manifold.periods).reshape(-1, 2)


def loop_integral_periodic(positions, values, period):
    """Trapezoid loop integral of samples at sorted positions on a circle.

    Used for carriers whose sample positions are no longer equispaced
    (particles moved by a transport plan).
    """
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(positions, kind="stable")
    x = positions[order]
    v = values[order]
    gaps = np.diff(np.concatenate([x, [x[0] + period]]))
    vnext = np.roll(v, -1)
    return float(np.sum(0.5 * (v + vnext) * gaps))
