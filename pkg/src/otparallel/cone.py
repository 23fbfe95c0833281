"""Tangent-cone elements at curve-supported measures and the weighted
gradient projection.

A cone element over a base measure on a carrier S consists of a
potential on S (its tangential gradient is the directional data along S)
and one fiber measure per carrier point living in the flat normal space.
Squared cone distances add the tangential L^2(mu) gradient difference
and the fiberwise quadratic Wasserstein distances.

The module also hosts the weighted Helmholtz projection used by the
smooth transport machinery: the L^2(rho)-orthogonal projection of a grid
vector field onto gradients, computed by solving the weighted Poisson
problem div(rho grad g) = div(rho V) with preconditioned conjugate
gradients.
"""

from dataclasses import dataclass

import numpy as np

from . import grids
from .carriers import SubmanifoldCarrier
from .errors import BaseMismatchError, SolverDivergedError
from .ot import ParticleMeasure, wasserstein2_flat

FIBER_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class FiberMeasure:
    """Weighted particle cloud in a flat normal space."""

    vectors: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if vectors.shape[0] != weights.shape[0]:
            raise ValueError("one weight per fiber vector required")
        if np.any(weights <= 0):
            raise ValueError("fiber weights must be positive")
        if abs(weights.sum() - 1.0) > FIBER_WEIGHT_TOL:
            raise ValueError("fiber weights must sum to one within 1e-12")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def delta(cls, vector):
        return cls(np.atleast_1d(np.asarray(vector, dtype=float))[None, :], np.array([1.0]))

    def scaled(self, lam):
        """Pushforward under radial rescaling v -> lam * v."""
        return FiberMeasure(lam * self.vectors, self.weights)

    def second_moment(self):
        return float(np.sum(self.weights * np.sum(self.vectors**2, axis=-1)))


@dataclass(frozen=True)
class ConeElement:
    """Element of the tangent cone at a carrier-supported measure.

    The potential is stored mean-centered against the base weights; all
    fiber measures match the carrier's normal dimension. Full support of
    the base on the carrier is enforced by ParticleMeasure.
    """

    carrier: SubmanifoldCarrier
    base: ParticleMeasure
    potential: np.ndarray
    fibers: tuple

    def __post_init__(self):
        pot = np.asarray(self.potential, dtype=float)
        if pot.shape[0] != self.carrier.size:
            raise ValueError("potential must be sampled on the carrier")
        if self.base.points.shape != self.carrier.points.shape or np.max(
            np.abs(self.base.points - self.carrier.points)
        ) > 1e-12:
            raise ValueError("base measure must be supported on the carrier")
        fibers = tuple(self.fibers)
        if len(fibers) != self.carrier.size:
            raise ValueError("one fiber measure per carrier point required")
        ndim = self.carrier.normal_dim
        for fm in fibers:
            if fm.vectors.shape[1] != ndim:
                raise ValueError(f"fiber vectors must have dimension {ndim}")
        centered = pot - float(np.dot(pot, self.base.weights))
        object.__setattr__(self, "potential", centered)
        object.__setattr__(self, "fibers", fibers)

    @classmethod
    def vertex(cls, carrier, base):
        """The cone vertex: zero potential, delta-at-origin fibers."""
        zero = np.zeros(carrier.normal_dim)
        fibers = tuple(FiberMeasure.delta(zero) for _ in range(carrier.size))
        return cls(carrier, base, np.zeros(carrier.size), fibers)

    def scaled(self, lam):
        """Radial rescaling: potential and fibers both scale by lam."""
        return ConeElement(
            self.carrier,
            self.base,
            lam * self.potential,
            tuple(fm.scaled(lam) for fm in self.fibers),
        )


@dataclass(frozen=True)
class ConeDistanceTerms:
    """Decomposition of a squared cone distance.

    ``tangential_sq`` uses the squared gradient difference (the value
    entering the metric); ``gradient_pairing`` is the plain L^2(mu)
    inner product of the two tangential gradients, recorded as a
    diagnostic alongside it. ``fiber_sq`` sums the fiberwise squared
    Wasserstein distances against the base weights.
    """

    tangential_sq: float
    fiber_sq: float
    gradient_pairing: float

    @property
    def distance(self):
        return float(np.sqrt(self.tangential_sq + self.fiber_sq))


def cone_distance_terms(a: ConeElement, b: ConeElement) -> ConeDistanceTerms:
    if not a.carrier.same_carrier(b.carrier):
        raise BaseMismatchError("cone elements live over different carriers")
    if np.max(np.abs(a.base.weights - b.base.weights)) > 1e-12:
        raise BaseMismatchError("cone elements have different base weights")
    w = a.base.weights
    ga = np.asarray(a.carrier.tangential_gradient(a.potential))
    gb = np.asarray(b.carrier.tangential_gradient(b.potential))
    if ga.ndim == 1:
        ga = ga[:, None]
        gb = gb[:, None]
    if ga.size:
        diff = ga - gb
        tangential = float(np.sum(w * np.sum(diff * diff, axis=-1)))
        pairing = float(np.sum(w * np.sum(ga * gb, axis=-1)))
    else:
        tangential = 0.0
        pairing = 0.0
    fiber = 0.0
    for wi, fa, fb in zip(w, a.fibers, b.fibers):
        fiber += wi * wasserstein2_flat(fa.vectors, fa.weights, fb.vectors, fb.weights) ** 2
    return ConeDistanceTerms(tangential, fiber, pairing)


def cone_distance(a: ConeElement, b: ConeElement) -> float:
    """Cone metric between two elements over the same base measure."""
    return cone_distance_terms(a, b).distance


def tangential_normal_split(carrier, index, v):
    """Split an ambient tangent vector at carrier point ``index`` into
    tangential and normal parts; their sum reproduces ``v`` and they are
    orthogonal."""
    return carrier.split(index, v)


def project_gradient(rho, v, periods=None, rtol=1e-12, residual_cap=1e-10,
                     maxiter=400, x0=None):
    """L^2(rho)-orthogonal projection of a grid field onto gradients.

    Solves ``div(rho grad g) = div(rho V)`` on the periodic grid with
    conjugate gradients, preconditioned by the unweighted inverse
    Laplacian (spectral). Returns the mean-centered potential and its
    spectral gradient; the residual makes ``<V - grad g, grad h>_rho``
    vanish for every grid potential h up to the solver tolerance.

    Raises SolverDivergedError when the relative residual is still above
    ``residual_cap`` at the iteration cap.
    """
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    if periods is None:
        periods = (1.0,) * rho.ndim
    if np.any(rho <= 0):
        raise ValueError("density must be positive on the grid")
    rho = rho / rho.mean()
    if v.shape[:-1] != rho.shape:
        grids.check_same_shape(v[..., 0], rho)

    def op(g):
        return -grids.divergence(rho[..., None] * grids.grad(g, periods), periods)

    b = -grids.divergence(rho[..., None] * v, periods)
    b = b - b.mean()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        g = np.zeros_like(rho)
        return g, np.zeros_like(v)

    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float) - np.mean(x0)
    r = b - op(x)
    z = -grids.solve_poisson(r, periods)
    p = z
    rz = float(np.sum(r * z))
    for _ in range(maxiter):
        if np.linalg.norm(r) <= rtol * bnorm:
            break
        ap = op(p)
        alpha = rz / float(np.sum(p * ap))
        x = x + alpha * p
        r = r - alpha * ap
        z = -grids.solve_poisson(r, periods)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        if np.linalg.norm(r) > residual_cap * bnorm:
            raise SolverDivergedError(
                "weighted Poisson CG stalled at relative residual "
                f"{np.linalg.norm(r) / bnorm:.3e}"
            )
    x = x - x.mean()
    return x, grids.grad(x, periods)
