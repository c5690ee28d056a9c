"""Spectral solver for the mid-range Gaussians (3D FFT with zero padding in z)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import fft as sfft

from .geometry import ParticleSystem
from .gridding import as_index, gather3d, spread3d
from .sog import SogDecomposition
from .windows import WindowKind, WindowSpec, axis_weights, window_hat

PI32 = math.pi**1.5


class PlanError(ValueError):
    """Raised for inconsistent solver plans."""


def default_delta_factor(kind: WindowKind) -> float:
    """Extension ``delta_z / H_z``: 2 for the Gaussian, 2.6 for KB and ES."""
    return 2.0 if WindowKind(kind) is WindowKind.GAUSSIAN else 2.6


def even_ceil(x: float) -> int:
    return 2 * int(math.ceil(x / 2.0 - 1e-12))


@dataclass(frozen=True)
class GridSpec:
    """Grid counts for the periodic box plus the zero-padded free direction.

    ``delta_z`` is the extension of the free direction; with ``lambda_z`` it
    gives ``I_z* = 2 ceil(lambda_z (I_z + ceil(delta_z / h_z)) / 2)``.
    """

    counts: tuple[int, int, int]
    box: tuple[float, float, float]
    lambda_z: float = 1.0
    delta_z: float = 0.0

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if any(c < 2 or c % 2 for c in counts):
            raise PlanError(f"grid counts must be even and >= 2, got {counts}")
        if self.lambda_z < 1:
            raise PlanError(f"lambda_z must be >= 1, got {self.lambda_z}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "box", tuple(float(b) for b in self.box))

    @property
    def mesh(self) -> tuple[float, float, float]:
        return tuple(L / I for L, I in zip(self.box, self.counts))  # type: ignore[return-value]

    @property
    def delta_Iz(self) -> int:
        return int(math.ceil(self.delta_z / self.mesh[2] - 1e-9))

    @property
    def Iz_star(self) -> int:
        return even_ceil(self.lambda_z * (self.counts[2] + self.delta_Iz))

    @property
    def Lz_star(self) -> float:
        return self.mesh[2] * self.Iz_star

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.counts[0], self.counts[1], self.Iz_star)

    @property
    def origin(self) -> tuple[float, float, float]:
        return (-0.5 * self.box[0], -0.5 * self.box[1], -0.5 * self.Lz_star)

    def wavenumbers(self) -> tuple[NDArray, NDArray, NDArray]:
        """Angular wavenumbers in rfft layout (last axis halved)."""
        nx, ny, nz = self.shape
        hx, hy, hz = self.mesh
        return (
            2 * np.pi * np.fft.fftfreq(nx, hx),
            2 * np.pi * np.fft.fftfreq(ny, hy),
            2 * np.pi * np.fft.rfftfreq(nz, hz),
        )


@dataclass(frozen=True)
class MidRangePlan:
    """Decomposition, window and grid for the mid-range solver, with the spectral multiplier."""

    decomp: SogDecomposition
    window: WindowSpec
    grid: GridSpec
    workers: int = 1
    strict: bool = True
    multiplier: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.window.ndim != 3:
            raise PlanError("mid-range window needs three axes")
        if not np.allclose(self.window.mesh, self.grid.mesh, rtol=1e-12):
            raise PlanError("window mesh does not match the grid")
        m = self.decomp.split_index
        if m >= 0:
            s0 = float(self.decomp.nodes[0])
            if self.strict and not self.window.bandwidth_ok(s0):
                raise PlanError("window too wide for the narrowest Gaussian (H^2/S >= s_0^2)")
            H = self.window.half_width(2)
            if self.grid.Lz_star < self.grid.box[2] + 2 * H - 1e-12:
                raise PlanError("extended z box does not contain the window support")
        object.__setattr__(self, "multiplier", self._multiplier() if m >= 0 else np.zeros(0))

    def _multiplier(self) -> NDArray[np.float64]:
        """``G(k) / |W(k)|^2`` with ``G(k) = pi^{3/2} sum_{l<=m} w_l s_l^3 exp(-s_l^2 k^2 / 4)``."""
        kx, ky, kz = self.grid.wavenumbers()
        sl = self.decomp.mid_slice
        w = self.decomp.weights[sl]
        s = self.decomp.nodes[sl]
        ex = np.exp(-np.outer(s**2, kx**2) / 4)
        ey = np.exp(-np.outer(s**2, ky**2) / 4)
        ez = np.exp(-np.outer(s**2, kz**2) / 4)
        G = PI32 * np.einsum("l,lx,ly,lz->xyz", w * s**3, ex, ey, ez, optimize=True)
        wx = window_hat(self.window, 0, kx)
        wy = window_hat(self.window, 1, ky)
        wz = window_hat(self.window, 2, kz)
        return G / (wx[:, None, None] ** 2 * wy[None, :, None] ** 2 * wz[None, None, :] ** 2)


def _stencils(system: ParticleSystem, plan: MidRangePlan):
    origin = plan.grid.origin
    out = []
    for d in range(3):
        first, w = axis_weights(plan.window, d, system.positions[:, d], origin[d])
        out.extend([as_index(first), np.ascontiguousarray(w)])
    fz = out[4]
    if fz.min() < 0 or fz.max() + plan.window.support[2] > plan.grid.Iz_star:
        raise PlanError("window support leaves the extended z grid")
    return out


def gridding(system: ParticleSystem, plan: MidRangePlan, stencils=None) -> NDArray[np.float64]:
    """Spread charges onto the extended grid: ``S(x_g) = sum_j q_j W(x_g - r_j)``."""
    st = stencils if stencils is not None else _stencils(system, plan)
    nx, ny, nz = plan.grid.shape
    return spread3d(np.ascontiguousarray(system.charges), *st, nx, ny, nz, False)


def scale_spectrum(spectrum: NDArray, plan: MidRangePlan) -> NDArray:
    return spectrum * plan.multiplier


def gather(scaled: NDArray, system: ParticleSystem, plan: MidRangePlan, stencils=None) -> NDArray[np.float64]:
    """``Phi_i = h_x h_y h_z sum_g W(r_i - x_g) S_scal(x_g)``."""
    st = stencils if stencils is not None else _stencils(system, plan)
    vol = float(np.prod(plan.grid.mesh))
    return vol * gather3d(np.ascontiguousarray(scaled), *st, False)


def mid_range_potential(system: ParticleSystem, plan: MidRangePlan) -> NDArray[np.float64]:
    """Grid, transform, scale, transform back and gather; zero if there are no mid-range Gaussians."""
    if plan.decomp.split_index < 0:
        return np.zeros(system.n)
    st = _stencils(system, plan)
    S = gridding(system, plan, st)
    shape = plan.grid.shape
    Sk = sfft.rfftn(S, workers=plan.workers)
    Sk = scale_spectrum(Sk, plan)
    scaled = sfft.irfftn(Sk, s=shape, workers=plan.workers)
    return gather(scaled, system, plan, st)


def make_mid_plan(
    decomp: SogDecomposition,
    box,
    counts: tuple[int, int, int],
    support: int | tuple[int, int, int],
    kind: WindowKind | str = WindowKind.GAUSSIAN,
    lambda_z: float = 1.0,
    delta_factor: float | None = None,
    shape: float | tuple | None = None,
    poly_degree: int = 0,
    workers: int = 1,
    strict: bool = True,
) -> MidRangePlan:
    """Assemble a :class:`MidRangePlan` with ``delta_z = delta_factor * H_z``."""
    kind = WindowKind(kind)
    sup = (support,) * 3 if np.isscalar(support) else tuple(support)
    box = tuple(float(b) for b in box)
    mesh = tuple(L / I for L, I in zip(box, counts))
    window = WindowSpec(kind, sup, mesh, shape=shape, poly_degree=poly_degree)
    if delta_factor is None:
        delta_factor = default_delta_factor(kind)
    grid = GridSpec(counts, box, lambda_z, delta_factor * window.half_width(2))
    return MidRangePlan(decomp, window, grid, workers, strict)
