"""Chebyshev interpolation on first-kind nodes and Clenshaw evaluation.

Series use the half-weight convention ``f(x) = a_0/2 + sum_{n>=1} a_n T_n(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.typing import ArrayLike, NDArray
from scipy.fft import dct


@dataclass(frozen=True)
class ChebyshevGrid:
    """First-kind Chebyshev nodes of degree ``P`` mapped to ``[lo, hi]``."""

    P: int
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if self.P < 1:
            raise ValueError(f"P must be >= 1, got {self.P}")
        if not self.hi > self.lo:
            raise ValueError("empty interval")

    @property
    def nodes(self) -> NDArray[np.float64]:
        """Reference nodes ``cos((i - 1/2) pi / P)``, ``i = 1..P`` (decreasing)."""
        i = np.arange(1, self.P + 1)
        return np.cos((i - 0.5) * np.pi / self.P)

    @property
    def points(self) -> NDArray[np.float64]:
        return self.to_physical(self.nodes)

    def to_reference(self, z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=np.float64)
        return (2.0 * z - (self.hi + self.lo)) / (self.hi - self.lo)

    def to_physical(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * (self.hi + self.lo) + 0.5 * (self.hi - self.lo) * x


@dataclass(frozen=True)
class ChebyshevSeries:
    """Coefficients along ``axis`` of ``coeffs`` on the interval of ``grid``."""

    coeffs: NDArray
    grid: ChebyshevGrid
    axis: int = 0


def interpolate(samples: ArrayLike, grid: ChebyshevGrid | None = None, axis: int = 0) -> ChebyshevSeries:
    """Coefficients of the interpolant through samples at the first-kind nodes.

    ``a_n = (2/P) sum_i f_i T_n(x_i)``, computed with a type-II cosine
    transform (equal to inverting the Vandermonde matrix).
    """
    f = np.asarray(samples)
    P = f.shape[axis]
    if grid is None:
        grid = ChebyshevGrid(P)
    elif grid.P != P:
        raise ValueError(f"{P} samples for a degree-{grid.P} grid")
    a = dct(f, type=2, axis=axis) / P
    return ChebyshevSeries(a, grid, axis)


def _check_inside(x: NDArray, slack: float = 1e-12) -> None:
    if x.size and (np.max(x) > 1 + slack or np.min(x) < -1 - slack):
        raise ValueError("evaluation points lie outside the interpolation interval")


def basis(grid: ChebyshevGrid, z: ArrayLike) -> NDArray[np.float64]:
    """Matrix ``B[i, n] = c_n T_n(x_i)`` with ``c_0 = 1/2``, so that ``f = B @ a``."""
    x = grid.to_reference(z)
    _check_inside(x)
    V = C.chebvander(np.clip(x, -1.0, 1.0), grid.P - 1)
    V[:, 0] *= 0.5
    return V


def evaluate(series: ChebyshevSeries, z: ArrayLike) -> NDArray:
    """Clenshaw evaluation at physical points ``z``.

    The result has the coefficient axis replaced by the shape of ``z``.
    """
    x = series.grid.to_reference(z)
    _check_inside(x)
    a = np.moveaxis(np.array(series.coeffs, copy=True), series.axis, 0)
    a[0] = 0.5 * a[0]
    out = C.chebval(np.clip(x, -1.0, 1.0), a, tensor=True)
    # chebval puts the evaluation shape last; move it to where the coefficient axis was
    ax = series.axis if series.axis >= 0 else series.axis + a.ndim
    nz = np.ndim(x)
    return np.moveaxis(out, list(range(out.ndim - nz, out.ndim)), list(range(ax, ax + nz)))


def gaussian_cheb_bound(eta: float, P: int) -> float:
    """Bound ``1 / (sqrt(P!) (2 sqrt(2) eta)^P)`` on Chebyshev interpolation of a Gaussian.

    The Gaussian width is ``eta`` times the interval length.
    """
    if not eta > 0 or P < 1:
        raise ValueError("need eta > 0 and P >= 1")
    return math.exp(-0.5 * math.lgamma(P + 1) - P * math.log(2.0 * math.sqrt(2.0) * eta))
