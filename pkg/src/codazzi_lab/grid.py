"""Finite-difference derivatives and quadrature on chart grids.

Fields are arrays whose leading axes are the grid axes.  Periodic axes wrap;
on the others a derivative is NaN wherever its stencil leaves the grid, and
NaN propagates so downstream maxima can skip boundary cells.
"""
from __future__ import annotations

import numpy as np

from .errors import ChartError, ResolutionError

_FIRST = {
    2: {-1: -1 / 2, 1: 1 / 2},
    4: {-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12},
    6: {-3: -1 / 60, -2: 3 / 20, -1: -3 / 4, 1: 3 / 4, 2: -3 / 20, 3: 1 / 60},
}


def stencil(order: int) -> dict[int, float]:
    """Offsets and weights of the central first-derivative stencil."""
    try:
        return dict(_FIRST[order])
    except KeyError:
        raise ValueError(f"unsupported stencil order {order}") from None


def spectral_diff(field: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourier derivative along a periodic axis (the Nyquist mode is dropped)."""
    n = field.shape[axis]
    k = 2j * np.pi * np.fft.fftfreq(n, d=h)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * field.ndim
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(field, axis=axis) * k.reshape(shape), axis=axis).real


def diff(field: np.ndarray, axis: int, h: float, periodic: bool, order: int | str = 4) -> np.ndarray:
    """Central first derivative along a grid axis with the given accuracy order.

    ``order="spectral"`` differentiates periodic axes in Fourier space and
    uses the order-6 stencil elsewhere.
    """
    if order == "spectral":
        if periodic:
            return spectral_diff(field, axis, h)
        order = 6
    try:
        stencil = _FIRST[order]
    except KeyError:
        raise ValueError(f"unsupported stencil order {order}") from None
    n = field.shape[axis]
    width = max(stencil)
    if n < 2 * width + 1:
        raise ResolutionError(f"grid of {n} cells too coarse for order-{order} stencil", stage="fd")
    if periodic:
        out = np.zeros_like(field, dtype=float)
        for s, w in stencil.items():
            out += w * np.roll(field, -s, axis=axis)
        return out / h
    out = np.full(field.shape, np.nan)
    core = [slice(None)] * field.ndim
    core[axis] = slice(width, n - width)
    acc = 0.0
    for s, w in stencil.items():
        sl = [slice(None)] * field.ndim
        sl[axis] = slice(width + s, n - width + s)
        acc = acc + w * field[tuple(sl)]
    out[tuple(core)] = acc / h
    return out


def gradient(field: np.ndarray, spacing, periodic, order: int = 4) -> np.ndarray:
    """All coordinate partials, stacked on a new trailing axis."""
    return np.stack([diff(field, a, h, p, order) for a, (h, p) in enumerate(zip(spacing, periodic))], axis=-1)


def nanmax_abs(x) -> float:
    """Max |x| over finite entries; raises when nothing is finite."""
    x = np.abs(np.asarray(x, dtype=float))
    finite = np.isfinite(x)
    if not finite.any():
        raise ResolutionError("no interior points left for the residual", stage="fd")
    return float(x[finite].max())


def integrate(field: np.ndarray, volume_element: np.ndarray, spacing, chart) -> float:
    """Integral over the chart: product trapezoid (periodic) / midpoint (weighted) rule.

    On a periodic axis the trapezoid rule is spectrally accurate for smooth
    integrands; a weighted axis carries the latitude weight inside
    ``volume_element``.
    """
    if not chart.closed:
        raise ChartError("not a closed chart", stage="quadrature")
    vals = field * volume_element.reshape(volume_element.shape + (1,) * (field.ndim - volume_element.ndim))
    if not np.all(np.isfinite(vals)):
        raise ResolutionError("integrand has non-finite samples", stage="quadrature")
    cell = float(np.prod(spacing))
    return float(vals.sum(axis=tuple(range(chart.dim))).sum() * cell) if vals.ndim > chart.dim else float(
        vals.sum() * cell)
