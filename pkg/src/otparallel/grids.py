"""Spectral calculus and interpolation on periodic grids.

Scalar fields are arrays of shape ``(N,)`` or ``(N, N)`` sampling a flat
torus on the uniform grid ``x_i = i * period / N`` (axis 0 is x, axis 1
is y). Vector fields carry one trailing component axis. Derivatives are
computed in Fourier space, so they are exact for band-limited fields.
"""

import numpy as np
from scipy import ndimage, signal

from .errors import ResolutionMismatchError

_SPLINE_ORDER = 5


def wavenumbers(shape, periods, zero_nyquist=True):
    """Angular wavenumber grids, one per axis, broadcastable to ``shape``.

    Derivative operators zero the Nyquist wavenumber on even grids
    (``zero_nyquist=True``): odd-order spectral derivatives are not
    closed on that mode for real fields, and dropping it consistently
    makes gradient, divergence and the gradient-potential inversion
    exact inverses of each other on the discrete grid.
    """
    ks = []
    for axis, (n, period) in enumerate(zip(shape, periods)):
        k = 2 * np.pi * np.fft.fftfreq(n, d=period / n)
        if zero_nyquist and n % 2 == 0:
            k[n // 2] = 0.0
        ks.append(k.reshape([-1 if ax == axis else 1 for ax in range(len(shape))]))
    return ks


def grad(f, periods):
    """Spectral gradient, shape ``f.shape + (d,)``."""
    f = np.asarray(f, dtype=float)
    fh = np.fft.fftn(f)
    ks = wavenumbers(f.shape, periods)
    comps = [np.fft.ifftn(1j * k * fh).real for k in ks]
    return np.stack(comps, axis=-1)


def divergence(v, periods):
    """Spectral divergence of a vector field with trailing component axis."""
    v = np.asarray(v, dtype=float)
    ks = wavenumbers(v.shape[:-1], periods)
    out = np.zeros(v.shape[:-1])
    for j, k in enumerate(ks):
        out += np.fft.ifftn(1j * k * np.fft.fftn(v[..., j])).real
    return out


def hessian(f, periods):
    """Spectral Hessian, shape ``f.shape + (d, d)``."""
    f = np.asarray(f, dtype=float)
    fh = np.fft.fftn(f)
    ks = wavenumbers(f.shape, periods)
    d = len(ks)
    out = np.zeros(f.shape + (d, d))
    for i in range(d):
        for j in range(i, d):
            entry = np.fft.ifftn(-ks[i] * ks[j] * fh).real
            out[..., i, j] = entry
            out[..., j, i] = entry
    return out


def laplacian(f, periods):
    f = np.asarray(f, dtype=float)
    fh = np.fft.fftn(f)
    ks = wavenumbers(f.shape, periods)
    k2 = sum(k * k for k in ks)
    return np.fft.ifftn(-k2 * fh).real


def solve_poisson(rhs, periods):
    """Zero-mean solution of ``laplacian(u) = rhs`` (kernel modes dropped)."""
    rhs = np.asarray(rhs, dtype=float)
    fh = np.fft.fftn(rhs)
    ks = wavenumbers(rhs.shape, periods)
    k2 = sum(k * k for k in ks)
    kernel = k2 == 0
    k2safe = np.where(kernel, 1.0, k2)
    uh = -fh / k2safe
    uh[kernel] = 0.0
    return np.fft.ifftn(uh).real


def potential_of_gradient(v, periods):
    """Least-squares spectral potential with ``grad(pot) ~ v``, zero mean.

    Exact when ``v`` is the spectral gradient of a grid function; for
    general fields it returns the potential of the curl-free, mean-free
    part.
    """
    v = np.asarray(v, dtype=float)
    shape = v.shape[:-1]
    ks = wavenumbers(shape, periods)
    k2 = sum(k * k for k in ks)
    kernel = k2 == 0
    k2safe = np.where(kernel, 1.0, k2)
    num = sum(-1j * ks[j] * np.fft.fftn(v[..., j]) for j in range(len(ks)))
    ph = num / k2safe
    ph[kernel] = 0.0
    return np.fft.ifftn(ph).real


def shift(f, delta, periods):
    """Exact spectral translation: returns ``x -> f(x + delta)``."""
    f = np.asarray(f, dtype=float)
    fh = np.fft.fftn(f)
    ks = wavenumbers(f.shape, periods, zero_nyquist=False)
    phase = np.ones(f.shape, dtype=complex)
    for d, k in zip(np.atleast_1d(delta), ks):
        phase = phase * np.exp(1j * k * d)
    return np.fft.ifftn(fh * phase).real


def grid_points(shape, periods):
    """Node coordinates, shape ``shape + (d,)``."""
    axes = [np.arange(n) * (p / n) for n, p in zip(shape, periods)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def integral(f, periods):
    """Integral over the torus (uniform-grid quadrature, exact for
    trigonometric polynomials below the Nyquist band)."""
    return float(np.mean(f)) * float(np.prod(periods))


def grid_hessian_quadratic(f, x_field, y_field, periods):
    """Pointwise Hessian form ``Hess f(X, Y)`` on a flat-torus grid.

    The Hessian is computed spectrally, so the result is exact for
    band-limited ``f``. Raises ResolutionMismatchError when the fields
    do not share the grid.
    """
    f = np.asarray(f, dtype=float)
    x_field = np.asarray(x_field, dtype=float)
    y_field = np.asarray(y_field, dtype=float)
    if x_field.shape[:-1] != f.shape or y_field.shape[:-1] != f.shape:
        raise ResolutionMismatchError("vector fields must live on the grid of f")
    if x_field.shape[-1] != f.ndim or y_field.shape[-1] != f.ndim:
        raise ResolutionMismatchError("component count must match the grid dimension")
    h = hessian(f, periods)
    return np.einsum("...ij,...i,...j->...", h, x_field, y_field)


def spectral_upsample(field, factor):
    """Trigonometric refinement of a periodic field by an integer factor."""
    if factor == 1:
        return np.asarray(field, dtype=float)
    out = np.asarray(field, dtype=float)
    for axis in range(out.ndim):
        out = signal.resample(out, out.shape[axis] * factor, axis=axis)
    return out


class PeriodicInterpolator:
    """Quintic spline interpolation of a periodic grid field.

    The field is first refined on a ``upsample``-times finer grid by
    trigonometric interpolation (exact below the original Nyquist band),
    then spline coefficients are precomputed once so repeated evaluation
    at new point sets stays cheap. The spline error for smooth fields is
    O((h / upsample)^6); exact translations should use :func:`shift`
    instead.
    """

    def __init__(self, field, periods, upsample=1):
        field = np.asarray(field, dtype=float)
        self.periods = tuple(float(p) for p in periods)
        self._scalar = field.ndim == len(self.periods)
        comps = field[..., None] if self._scalar else field
        self.n_comp = comps.shape[-1]
        fine = [spectral_upsample(comps[..., j], upsample) for j in range(self.n_comp)]
        self.grid_shape = fine[0].shape
        self._coeffs = [
            ndimage.spline_filter(f, order=_SPLINE_ORDER, mode="grid-wrap")
            for f in fine
        ]

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, len(self.periods))
        idx = np.empty_like(flat.T)
        for ax, (n, p) in enumerate(zip(self.grid_shape, self.periods)):
            idx[ax] = np.mod(flat[:, ax], p) * (n / p)
        values = [
            ndimage.map_coordinates(
                c, idx, order=_SPLINE_ORDER, mode="grid-wrap", prefilter=False
            )
            for c in self._coeffs
        ]
        out = np.stack(values, axis=-1).reshape(points.shape[:-1] + (self.n_comp,))
        if self._scalar:
            return out[..., 0]
        return out


def check_same_shape(*fields):
    shapes = {np.asarray(f).shape for f in fields}
    if len(shapes) > 1:
        raise ResolutionMismatchError(f"grid shapes differ: {sorted(shapes)}")
