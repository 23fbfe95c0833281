"""Closed-form Riemannian primitives on three model manifolds.

Supported models: the flat torus ``R^d / (period Z)^d`` for d in {1, 2},
the unit round sphere S^2, and the flat cylinder S^1 x R. Every geodesic,
distance, parallel transport and exponential-map differential has a closed
form, so the operations below are exact up to floating point.

Chart conventions:

* torus points: coordinates reduced to ``[0, period)`` per axis,
* sphere points: unit 3-vectors (no polar-coordinate singularities),
* cylinder points: ``(arc, height)`` with arc reduced mod circumference.

All array-level methods are vectorized over leading axes; the thin
``ManifoldPoint`` / ``TangentVec`` wrappers carry validation for the
single-point API.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import ConjugatePointError, CutLocusError

# Logs are refused this close to the cut locus; dexp inverses this close
# to the conjugate radius.
CUT_TOL = 1e-9
_SPHERE_NORM_TOL = 1e-12


class Manifold(ABC):
    """Base class; concrete models implement the chart-level operations."""

    #: dimension of the chart / tangent coordinates
    dim: int

    @abstractmethod
    def canon(self, coords):
        """Reduce coordinates to the canonical chart representative."""

    @abstractmethod
    def validate_points(self, coords):
        """Raise ValueError if ``coords`` are not valid chart points."""

    @abstractmethod
    def exp(self, p, v):
        """Time-1 point of the geodesic from ``p`` with velocity ``v``."""

    @abstractmethod
    def log(self, p, q):
        """Initial velocity of the minimizing geodesic from p to q."""

    @abstractmethod
    def dist(self, p, q):
        """Geodesic distance."""

    @abstractmethod
    def pairwise_dist(self, xs, ys):
        """Distance matrix between point arrays (n, dim) and (m, dim)."""

    @abstractmethod
    def transport(self, p, v, w):
        """Parallel transport of w along t -> exp(p, t v) to t = 1."""

    @abstractmethod
    def dexp(self, p, v, w):
        """Differential of exp_p at v applied to w (Jacobi-field form)."""

    @abstractmethod
    def dexp_inverse(self, p, v, u):
        """Inverse of ``dexp(p, v, .)`` applied to u at exp(p, v)."""

    @abstractmethod
    def injectivity_radius(self):
        """Radius below which log is well defined everywhere."""

    @abstractmethod
    def random_points(self, rng, n):
        """Sample n points (for tests and experiment drivers)."""

    def velocity_along(self, p, v, t):
        """Velocity of the geodesic t -> exp(p, t v) at time t."""
        return self.dexp(p, np.asarray(t)[..., None] * v if np.ndim(t) else t * v, v)


@dataclass(frozen=True)
class FlatTorus(Manifold):
    """Flat torus with rectangular fundamental domain."""

    periods: tuple

    def __post_init__(self):
        periods = tuple(float(p) for p in self.periods)
        if len(periods) not in (1, 2):
            raise ValueError("torus dimension must be 1 or 2")
        if any(p <= 0 for p in periods):
            raise ValueError("periods must be positive")
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "dim", len(periods))

    @property
    def _p(self):
        return np.asarray(self.periods)

    def canon(self, coords):
        return np.mod(np.asarray(coords, dtype=float), self._p)

    def validate_points(self, coords):
        coords = np.asarray(coords)
        if coords.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates")
        if np.any(coords < 0) or np.any(coords >= self._p):
            raise ValueError("torus coordinates must lie in [0, period)")

    def exp(self, p, v):
        return self.canon(np.asarray(p) + np.asarray(v))

    def _wrap(self, delta):
        p = self._p
        return np.mod(np.asarray(delta) + p / 2, p) - p / 2

    def log(self, p, q):
        v = self._wrap(np.asarray(q) - np.asarray(p))
        r = np.sqrt(np.sum(v * v, axis=-1))
        if np.any(r > self.injectivity_radius() - CUT_TOL):
            raise CutLocusError(
                "log undefined: target at or beyond half the shortest period"
            )
        return v

    def dist(self, p, q):
        v = self._wrap(np.asarray(q) - np.asarray(p))
        return np.sqrt(np.sum(v * v, axis=-1))

    def pairwise_dist(self, xs, ys):
        diff = self._wrap(np.asarray(xs)[:, None, :] - np.asarray(ys)[None, :, :])
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def transport(self, p, v, w):
        return np.array(w, dtype=float)

    def dexp(self, p, v, w):
        return np.array(w, dtype=float)

    def dexp_inverse(self, p, v, u):
        return np.array(u, dtype=float)

    def injectivity_radius(self):
        return min(self.periods) / 2

    def random_points(self, rng, n):
        return rng.random((n, self.dim)) * self._p


@dataclass(frozen=True)
class Sphere2(Manifold):
    """Unit round sphere embedded in R^3."""

    dim: int = field(default=3, init=False)

    def canon(self, coords):
        coords = np.asarray(coords, dtype=float)
        return coords / np.linalg.norm(coords, axis=-1, keepdims=True)

    def validate_points(self, coords):
        coords = np.asarray(coords)
        if coords.shape[-1] != 3:
            raise ValueError("sphere points are 3-vectors")
        norms = np.linalg.norm(coords, axis=-1)
        if np.any(np.abs(norms - 1.0) > _SPHERE_NORM_TOL):
            raise ValueError("sphere points must have unit norm within 1e-12")

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        theta = np.linalg.norm(v, axis=-1, keepdims=True)
        small = theta < 1e-300
        direction = np.where(small, 0.0, v / np.where(small, 1.0, theta))
        q = np.cos(theta) * p + np.sin(theta) * direction
        return self.canon(q)

    def log(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        c = np.clip(np.sum(p * q, axis=-1, keepdims=True), -1.0, 1.0)
        theta = np.arccos(c)
        if np.any(theta > np.pi - CUT_TOL):
            raise CutLocusError("log undefined at the antipode")
        w = q - c * p
        n = np.linalg.norm(w, axis=-1, keepdims=True)
        tiny = n < 1e-300
        return np.where(tiny, 0.0, theta * w / np.where(tiny, 1.0, n))

    def dist(self, p, q):
        c = np.clip(np.sum(np.asarray(p) * np.asarray(q), axis=-1), -1.0, 1.0)
        return np.arccos(c)

    def pairwise_dist(self, xs, ys):
        g = np.clip(np.asarray(xs) @ np.asarray(ys).T, -1.0, 1.0)
        return np.arccos(g)

    def _frame(self, p, v):
        """Unit geodesic direction and binormal; zero rows where v = 0."""
        theta = np.linalg.norm(v, axis=-1, keepdims=True)
        small = theta < 1e-300
        t_hat = np.where(small, 0.0, v / np.where(small, 1.0, theta))
        b_hat = np.cross(p, t_hat)
        return theta, t_hat, b_hat

    def transport(self, p, v, w):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        theta, t_hat, b_hat = self._frame(p, v)
        if np.all(theta < 1e-300):
            return np.array(w)
        a = np.sum(w * t_hat, axis=-1, keepdims=True)
        b = np.sum(w * b_hat, axis=-1, keepdims=True)
        t_end = -np.sin(theta) * p + np.cos(theta) * t_hat
        out = a * t_end + b * b_hat
        # rows with zero velocity transport trivially
        zero = theta < 1e-300
        return np.where(zero, w, out)

    def dexp(self, p, v, w):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        theta, t_hat, b_hat = self._frame(p, v)
        zero = theta < 1e-300
        a = np.sum(w * t_hat, axis=-1, keepdims=True)
        b = np.sum(w * b_hat, axis=-1, keepdims=True)
        t_end = -np.sin(theta) * p + np.cos(theta) * t_hat
        sinc = np.where(zero, 1.0, np.sin(theta) / np.where(zero, 1.0, theta))
        out = a * t_end + b * sinc * b_hat
        return np.where(zero, w, out)

    def dexp_inverse(self, p, v, u):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        u = np.asarray(u, dtype=float)
        theta, t_hat, b_hat = self._frame(p, v)
        if np.any(theta >= np.pi - CUT_TOL):
            raise ConjugatePointError(
                "dexp is singular at radius pi on the sphere"
            )
        zero = theta < 1e-300
        t_end = -np.sin(theta) * p + np.cos(theta) * t_hat
        a = np.sum(u * t_end, axis=-1, keepdims=True)
        b = np.sum(u * b_hat, axis=-1, keepdims=True)
        sinc = np.where(zero, 1.0, np.sin(theta) / np.where(zero, 1.0, theta))
        out = a * t_hat + (b / sinc) * b_hat
        return np.where(zero, u, out)

    def injectivity_radius(self):
        return np.pi

    def random_points(self, rng, n):
        return self.canon(rng.normal(size=(n, 3)))

    def random_tangents(self, rng, points, scale=1.0):
        raw = rng.normal(size=points.shape) * scale
        return raw - np.sum(raw * points, axis=-1, keepdims=True) * points


@dataclass(frozen=True)
class Cylinder(Manifold):
    """Flat cylinder S^1 x R; coordinates (arc, height).

    Noncompact: the height factor is all of R. Used only by the
    hypersurface experiments, where supports stay bounded.
    """

    circumference: float
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.circumference <= 0:
            raise ValueError("circumference must be positive")

    def canon(self, coords):
        coords = np.array(coords, dtype=float)
        coords[..., 0] = np.mod(coords[..., 0], self.circumference)
        return coords

    def validate_points(self, coords):
        coords = np.asarray(coords)
        if coords.shape[-1] != 2:
            raise ValueError("cylinder points are (arc, height) pairs")
        if np.any(coords[..., 0] < 0) or np.any(coords[..., 0] >= self.circumference):
            raise ValueError("arc coordinate must lie in [0, circumference)")

    def exp(self, p, v):
        return self.canon(np.asarray(p) + np.asarray(v))

    def _wrap_arc(self, delta):
        c = self.circumference
        return np.mod(delta + c / 2, c) - c / 2

    def log(self, p, q):
        delta = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        arc = self._wrap_arc(delta[..., 0])
        if np.any(np.abs(arc) > self.circumference / 2 - CUT_TOL):
            raise CutLocusError(
                "log undefined: angular separation at half the circumference"
            )
        out = np.array(delta)
        out[..., 0] = arc
        return out

    def dist(self, p, q):
        delta = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        arc = self._wrap_arc(delta[..., 0])
        return np.sqrt(arc * arc + delta[..., 1] ** 2)

    def pairwise_dist(self, xs, ys):
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        arc = self._wrap_arc(xs[:, None, 0] - ys[None, :, 0])
        dh = xs[:, None, 1] - ys[None, :, 1]
        return np.sqrt(arc * arc + dh * dh)

    def transport(self, p, v, w):
        return np.array(w, dtype=float)

    def dexp(self, p, v, w):
        return np.array(w, dtype=float)

    def dexp_inverse(self, p, v, u):
        return np.array(u, dtype=float)

    def injectivity_radius(self):
        return self.circumference / 2

    def random_points(self, rng, n, height_range=(-1.0, 1.0)):
        arcs = rng.random(n) * self.circumference
        lo, hi = height_range
        heights = lo + rng.random(n) * (hi - lo)
        return np.stack([arcs, heights], axis=-1)


@dataclass(frozen=True)
class ManifoldPoint:
    """A validated chart point on a model manifold."""

    manifold: Manifold
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        self.manifold.validate_points(coords)
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class TangentVec:
    """A tangent vector attached to a base point.

    On the sphere the components must be orthogonal to the base point
    within 1e-12; on the flat models any chart vector is tangent.
    """

    base: ManifoldPoint
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.shape != self.base.coords.shape:
            raise ValueError("tangent components must match the chart shape")
        if isinstance(self.base.manifold, Sphere2):
            if abs(float(np.dot(comps, self.base.coords))) > _SPHERE_NORM_TOL:
                raise ValueError("sphere tangent must be orthogonal to the base")
        object.__setattr__(self, "components", comps)

    @property
    def norm(self):
        return float(np.linalg.norm(self.components))


def exp(p: ManifoldPoint, v: TangentVec) -> ManifoldPoint:
    """Exponential map; requires ``v`` to be based at ``p``."""
    _check_based(p, v)
    return ManifoldPoint(p.manifold, p.manifold.exp(p.coords, v.components))


def log(p: ManifoldPoint, q: ManifoldPoint) -> TangentVec:
    """Logarithm map; raises CutLocusError at or beyond the cut locus."""
    _check_same_manifold(p, q)
    return TangentVec(p, p.manifold.log(p.coords, q.coords))


def dist(p: ManifoldPoint, q: ManifoldPoint) -> float:
    _check_same_manifold(p, q)
    return float(p.manifold.dist(p.coords, q.coords))


def transport_along_geodesic(p: ManifoldPoint, v: TangentVec, w: TangentVec) -> TangentVec:
    """Parallel transport of w along t -> exp(p, t v); a linear isometry."""
    _check_based(p, v)
    _check_based(p, w)
    endpoint = exp(p, v)
    return TangentVec(endpoint, p.manifold.transport(p.coords, v.components, w.components))


def dexp(p: ManifoldPoint, v: TangentVec, w: TangentVec) -> TangentVec:
    """Derivative of exp_p at v in direction w."""
    _check_based(p, v)
    _check_based(p, w)
    endpoint = exp(p, v)
    return TangentVec(endpoint, p.manifold.dexp(p.coords, v.components, w.components))


def dexp_inverse(p: ManifoldPoint, v: TangentVec, u: TangentVec) -> TangentVec:
    """Inverse of dexp; ``u`` lives at exp(p, v)."""
    _check_based(p, v)
    return TangentVec(p, p.manifold.dexp_inverse(p.coords, v.components, u.components))


def _check_same_manifold(p, q):
    if p.manifold != q.manifold:
        raise ValueError("points live on different manifolds")


def _check_based(p, v):
    if v.base.manifold != p.manifold or not np.array_equal(v.base.coords, p.coords):
        raise ValueError("tangent vector is not based at the given point")
