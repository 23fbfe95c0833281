"""Exact optimal transport and parallel transport of tangent cones on
model manifolds.

The package computes, on the flat torus, the round sphere and the flat
cylinder:

* exact Kantorovich optimal transport between particle measures with
  quadratic geodesic cost, displacement interpolation, and the
  c-transform / c-convexity calculus for measures carried by embedded
  curves,
* the cone metric on tangent elements at a curve-supported measure
  (gradient potentials on the carrier plus fiber measures in the normal
  spaces),
* parallel transport along geodesics of delta measures via the inverse
  differential of the exponential map, checked against the closed-form
  pushforward,
* the parallel transport PDE along torus geodesics of positive smooth
  densities, plus its segmentwise iterative approximation and a
  weak-form residual checker tying the two together,
* hypersurface transport experiments (vertical projection on the
  cylinder, tangential-gradient criteria, Euler-Lagrange diagnostics).
"""

__version__ = "0.1.0"

from .errors import (
    BaseMismatchError,
    ConfigError,
    ConjugatePointError,
    CutLocusError,
    MapDegenerateError,
    MaxIterationsError,
    NotContractiveError,
    OTParallelError,
    ResolutionMismatchError,
    ScaleNotFoundError,
    SizeCapExceededError,
    SolverDivergedError,
    UnknownCommandError,
)
from .manifolds import (
    Cylinder,
    FlatTorus,
    ManifoldPoint,
    Sphere2,
    TangentVec,
    dexp,
    dexp_inverse,
    dist,
    exp,
    log,
    transport_along_geodesic,
)

__all__ = [
    "__version__",
    "BaseMismatchError",
    "ConfigError",
    "ConjugatePointError",
    "CutLocusError",
    "Cylinder",
    "FlatTorus",
    "ManifoldPoint",
    "MapDegenerateError",
    "MaxIterationsError",
    "NotContractiveError",
    "OTParallelError",
    "ResolutionMismatchError",
    "ScaleNotFoundError",
    "SizeCapExceededError",
    "SolverDivergedError",
    "Sphere2",
    "TangentVec",
    "UnknownCommandError",
    "dexp",
    "dexp_inverse",
    "dist",
    "exp",
    "log",
    "transport_along_geodesic",
]
