"""Weak-form residual of the transport identity against test functions.

A transported triple is a weak solution when, for every smooth
space-time test function f, the boundary pairing difference

    <grad f(1), grad eta1>_{mu_1} - <grad f(0), grad eta0>_{mu_0}

equals the time integral of ``<grad df/dt, grad eta> + Hess f(grad eta,
grad phi)`` against the moving density. The residual (left minus right)
is evaluated with spectral space derivatives and Simpson quadrature in
time; it is linear both in the triple and in the test function, so a
finite test family bounds the defect on its span.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import grids
from .errors import ResolutionMismatchError
from .smooth import SmoothGeodesic, TransportTriple


def _time_derivative(f_nodes, times):
    """Fourth-order finite-difference time derivative on the node grid."""
    k = f_nodes.shape[0] - 1
    if k < 4:
        raise ValueError("need at least 4 time steps for the stencil")
    h = times[1] - times[0]
    out = np.empty_like(f_nodes)
    out[2:-2] = (f_nodes[:-4] - 8 * f_nodes[1:-3] + 8 * f_nodes[3:-1] - f_nodes[4:]) / (12 * h)
    fwd = np.array([-25.0 / 12, 4.0, -3.0, 4.0 / 3, -0.25]) / h
    off = np.array([-0.25, -5.0 / 6, 1.5, -0.5, 1.0 / 12]) / h
    out[0] = np.tensordot(fwd, f_nodes[:5], axes=(0, 0))
    out[1] = np.tensordot(off, f_nodes[:5], axes=(0, 0))
    out[-1] = -np.tensordot(fwd, f_nodes[-5:][::-1], axes=(0, 0))
    out[-2] = -np.tensordot(off, f_nodes[-5:][::-1], axes=(0, 0))
    return out


def weak_residual(g: SmoothGeodesic, triple: TransportTriple, f_nodes,
                  dtf_nodes=None) -> float:
    """Residual of the weak transport identity for one test function.

    ``f_nodes`` samples f on the geodesic's time grid; ``dtf_nodes``
    supplies the exact time derivative when available (otherwise a
    fourth-order finite difference is used).
    """
    f_nodes = np.asarray(f_nodes, dtype=float)
    if f_nodes.shape != (g.steps + 1,) + g.shape:
        raise ResolutionMismatchError(
            f"test function shape {f_nodes.shape} does not match the geodesic"
        )
    if triple.eta.shape != f_nodes.shape:
        raise ResolutionMismatchError("triple and test function grids differ")
    if dtf_nodes is None:
        dtf_nodes = _time_derivative(f_nodes, triple.times)
    else:
        dtf_nodes = np.asarray(dtf_nodes, dtype=float)

    gf1 = grids.grad(f_nodes[-1], g.periods)
    gf0 = grids.grad(f_nodes[0], g.periods)
    ge1 = grids.grad(triple.eta1, g.periods)
    ge0 = grids.grad(triple.eta0, g.periods)
    lhs = float(np.mean(np.sum(gf1 * ge1, axis=-1) * g.rho[-1])) - float(
        np.mean(np.sum(gf0 * ge0, axis=-1) * g.rho[0])
    )

    integrand = np.empty(g.steps + 1)
    for k in range(g.steps + 1):
        ge = grids.grad(triple.eta[k], g.periods)
        gdt = grids.grad(dtf_nodes[k], g.periods)
        vel = g.drift + grids.grad(g.psi[k], g.periods)
        hess_term = grids.grid_hessian_quadratic(f_nodes[k], ge, vel, g.periods)
        integrand[k] = float(
            np.mean((np.sum(gdt * ge, axis=-1) + hess_term) * g.rho[k])
        )
    rhs = float(simpson(integrand, x=triple.times))
    return lhs - rhs


@dataclass(frozen=True)
class ResidualRow:
    freq_x: int
    freq_y: int
    kind: str
    degree: int
    residual: float


@dataclass(frozen=True)
class ResidualTable:
    """Residuals over a tensor family of test functions."""

    rows: tuple
    max_frequency: int
    time_degree: int

    @property
    def max_abs(self):
        return max(abs(r.residual) for r in self.rows)

    def as_csv_rows(self):
        for r in self.rows:
            yield (r.freq_x, r.freq_y, r.kind, r.degree, r.residual)


def _spatial_family(shape, periods, max_frequency):
    """Nonzero Fourier modes up to the cutoff, one representative per
    conjugate pair, as (kx, ky, kind, field) tuples."""
    pts = grids.grid_points(shape, periods)
    d = len(shape)
    out = []
    if d == 1:
        freqs = [(k, 0) for k in range(1, max_frequency + 1)]
    else:
        freqs = []
        for kx in range(0, max_frequency + 1):
            for ky in range(-max_frequency, max_frequency + 1):
                if kx == 0 and ky <= 0:
                    continue
                freqs.append((kx, ky))
    for kx, ky in freqs:
        phase = kx * pts[..., 0] / periods[0]
        if d == 2:
            phase = phase + ky * pts[..., 1] / periods[1]
        phase = 2 * np.pi * phase
        out.append((kx, ky, "cos", np.cos(phase)))
        out.append((kx, ky, "sin", np.sin(phase)))
    return out


def residual_suite(g: SmoothGeodesic, triple: TransportTriple,
                   max_frequency: int, time_degree: int) -> ResidualTable:
    """Residuals for the family ``{Fourier modes} x {t^d monomials}``.

    The separable structure lets the two pairing sequences of each
    spatial mode be computed once and recombined for every monomial;
    the time derivative of a monomial is analytic. The quadrature
    matches :func:`weak_residual` exactly.
    """
    times = triple.times
    k_nodes = g.steps + 1
    grad_eta = np.empty((k_nodes,) + g.shape + (g.d,))
    for k in range(k_nodes):
        grad_eta[k] = grids.grad(triple.eta[k], g.periods)

    rows = []
    for kx, ky, kind, h in _spatial_family(g.shape, g.periods, max_frequency):
        gh = grids.grad(h, g.periods)
        hess_h = grids.hessian(h, g.periods)
        pair_seq = np.empty(k_nodes)
        hess_seq = np.empty(k_nodes)
        for k in range(k_nodes):
            vel = g.drift + grids.grad(g.psi[k], g.periods)
            pair_seq[k] = float(
                np.mean(np.sum(gh * grad_eta[k], axis=-1) * g.rho[k])
            )
            hess_seq[k] = float(
                np.mean(
                    np.einsum("...ij,...i,...j->...", hess_h, grad_eta[k], vel)
                    * g.rho[k]
                )
            )
        for degree in range(time_degree + 1):
            t_pow = times**degree
            dt_pow = degree * times ** (degree - 1) if degree > 0 else np.zeros_like(times)
            lhs = t_pow[-1] * pair_seq[-1] - t_pow[0] * pair_seq[0]
            rhs = float(simpson(dt_pow * pair_seq + t_pow * hess_seq, x=times))
            rows.append(ResidualRow(kx, ky, kind, degree, lhs - rhs))
    return ResidualTable(tuple(rows), max_frequency, time_degree)
