"""Parallel transport along a geodesic of delta measures.

A geodesic of deltas sits over a single manifold geodesic ``t ->
exp_p(t v)``; its tangent elements are probability measures of tangent
vectors at the moving point. The segmentwise construction pushes a
tangent measure backward through the inverse differential of the
exponential map, one subsegment at a time; composing Q such steps
approximates the pushforward under reverse parallel transport, which is
also available in closed form for cross-checking.
"""

from dataclasses import dataclass

import numpy as np

from .manifolds import Manifold, Sphere2
from .ot import wasserstein2_flat

_TANGENCY_TOL = 1e-12


@dataclass(frozen=True)
class TangentCloud:
    """Weighted particle measure of tangent vectors at one base point."""

    manifold: Manifold
    base: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.manifold.validate_points(base)
        if vectors.shape[0] != weights.shape[0]:
            raise ValueError("one weight per vector required")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to one")
        if isinstance(self.manifold, Sphere2):
            if np.max(np.abs(vectors @ base)) > _TANGENCY_TOL:
                raise ValueError("sphere tangent vectors must be orthogonal to the base")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, manifold, base, vectors):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        n = vectors.shape[0]
        return cls(manifold, base, vectors, np.full(n, 1.0 / n))

    def mean_norm(self):
        return float(np.sum(self.weights * np.linalg.norm(self.vectors, axis=-1)))


def w2_between_clouds(a: TangentCloud, b: TangentCloud) -> float:
    """Flat quadratic Wasserstein distance between tangent measures at a
    common base point."""
    if a.manifold != b.manifold or not np.allclose(a.base, b.base, atol=1e-12):
        raise ValueError("clouds must share a base point")
    return wasserstein2_flat(a.vectors, a.weights, b.vectors, b.weights)


def petrunin_delta_step(manifold, p, v, cloud: TangentCloud) -> TangentCloud:
    """One backward step: pushforward through ``(d exp_p at v)^{-1}``.

    ``cloud`` lives at ``exp_p(v)``; the result lives at ``p``. Weights
    are unchanged. Raises ConjugatePointError when ``|v|`` reaches the
    conjugate radius.
    """
    q = manifold.exp(p, v)
    if not np.allclose(cloud.base, q, atol=1e-9):
        raise ValueError("cloud is not based at the segment endpoint")
    pulled = manifold.dexp_inverse(
        np.broadcast_to(p, cloud.vectors.shape),
        np.broadcast_to(v, cloud.vectors.shape),
        cloud.vectors,
    )
    return TangentCloud(manifold, np.asarray(p, dtype=float), pulled, cloud.weights)


def _segment(manifold, p, v, i, q_steps):
    """Base point and velocity of the i-th of Q equal subsegments."""
    t0 = i / q_steps
    base = manifold.exp(p, t0 * np.asarray(v))
    vel = manifold.dexp(p, t0 * np.asarray(v), np.asarray(v)) / q_steps
    return base, vel


def petrunin_delta_transport(manifold, p, v, cloud_end: TangentCloud,
                             q_steps: int) -> TangentCloud:
    """Composition of Q backward steps along ``t -> exp_p(t v)``.

    The geodesic is assumed to sit inside a longer minimizing geodesic;
    on the flat models the composition is exact for any Q, on the sphere
    it converges to the parallel-transport pushforward at first order
    in 1/Q.
    """
    cloud = cloud_end
    for i in range(q_steps - 1, -1, -1):
        base, vel = _segment(manifold, p, v, i, q_steps)
        cloud = petrunin_delta_step(manifold, base, vel, cloud)
    return cloud


def exact_delta_transport(manifold, p, v, cloud_end: TangentCloud) -> TangentCloud:
    """Pushforward of a tangent measure under reverse parallel transport.

    Reverse transport along ``t -> exp_p(t v)`` is forward transport
    along the reversed geodesic, i.e. transport with velocity ``-v'`` at
    the endpoint.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    q = manifold.exp(p, v)
    if not np.allclose(cloud_end.base, q, atol=1e-9):
        raise ValueError("cloud is not based at the geodesic endpoint")
    v_end = manifold.dexp(p, v, v)
    moved = manifold.transport(
        np.broadcast_to(q, cloud_end.vectors.shape),
        np.broadcast_to(-v_end, cloud_end.vectors.shape),
        cloud_end.vectors,
    )
    return TangentCloud(manifold, p, moved, cloud_end.weights)
