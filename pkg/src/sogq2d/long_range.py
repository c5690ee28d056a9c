"""Fourier-Chebyshev solver for the long-range Gaussians.

Two variants share one plan type:

* ``DIRECT`` samples the 2D Fourier transform of each long-range Gaussian
  field at Chebyshev nodes in z for every mode in a disk ``|k| <= K_max`` and
  sums the modes explicitly at the targets.
* ``FFT`` spreads charges onto a uniform x-y grid (window functions in x and
  y only) times Chebyshev proxy points in z, and uses 2D FFTs.  The sum over
  Gaussians is folded into ``Q`` Taylor layers, or done per Gaussian when
  ``taylor_order`` is ``None`` (reference path).

With ``A = Lx Ly`` the target quantity is

    Phi_i = (pi/A) sum_k e^{ik.rho_i} sum_{l>m} w_l s_l^2 e^{-s_l^2 k^2/4}
            sum_j q_j e^{-ik.rho_j} e^{-(z_i - z_j)^2 / s_l^2}

which includes ``j = i``; the self term is removed by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy import fft as sfft

from .chebyshev import ChebyshevGrid, basis, interpolate
from .geometry import ParticleSystem
from .gridding import as_index, gather2d_layers, spread2d_layers
from .mid_range import PlanError
from .sog import SogDecomposition
from .windows import WindowKind, WindowSpec, axis_weights, window_hat


class LongMode(str, Enum):
    DIRECT = "direct"
    FFT = "fft"


def long_kmax(decomp: SogDecomposition, eps: float) -> float:
    """``K_max ~ sqrt(log(1/eps)) / s_{m+1}``, times 2 so that ``e^{-s^2 K^2/4} <= eps``."""
    s = float(decomp.nodes[decomp.split_index + 1])
    return 2.0 * math.sqrt(math.log(1.0 / eps)) / s


def long_counts(k_max: float, box) -> tuple[int, int]:
    """Even grid counts ``I_d = 2 ceil(K_max L_d / (2 pi))``."""
    return tuple(max(2, 2 * math.ceil(k_max * L / (2 * math.pi) - 1e-12)) for L in box[:2])  # type: ignore[return-value]


def kmax_from_counts(counts, box) -> float:
    """Disk radius covered by ``I_d`` modes per axis: ``min_d pi I_d / L_d``."""
    return min(math.pi * I / L for I, L in zip(counts, box[:2]))


def taylor_bound(eta: float, Q: int) -> float:
    """Remainder bound ``1 / (Q! (2 eta)^{2Q})`` of the ``Q``-term Taylor expansion."""
    return math.exp(-math.lgamma(Q + 1) - 2 * Q * math.log(2.0 * eta))


@dataclass(frozen=True)
class LongRangePlan:
    """Parameters of the long-range solver.

    Parameters
    ----------
    decomp : SogDecomposition
        Supplies the long-range Gaussians ``l > m``.
    box : tuple of float
    mode : LongMode
    cheb_degree : int
        Number ``P`` of Chebyshev nodes in z.
    k_max : float, optional
        Disk radius of the DIRECT mode set.
    counts : tuple of int, optional
        FFT grid ``(I_x, I_y)``.
    window : WindowSpec, optional
        Two-axis window for FFT mode.
    taylor_order : int or None
        Taylor terms ``Q`` in FFT mode; ``None`` loops over the Gaussians.
    """

    decomp: SogDecomposition
    box: tuple[float, float, float]
    mode: LongMode = LongMode.DIRECT
    cheb_degree: int = 8
    k_max: float | None = None
    counts: tuple[int, int] | None = None
    window: WindowSpec | None = None
    taylor_order: int | None = 16
    workers: int = 1
    strict: bool = True
    cheb: ChebyshevGrid = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", LongMode(self.mode))
        object.__setattr__(self, "box", tuple(float(b) for b in self.box))
        if self.cheb_degree < 1:
            raise PlanError(f"Chebyshev degree must be >= 1, got {self.cheb_degree}")
        Lz = self.box[2]
        object.__setattr__(self, "cheb", ChebyshevGrid(self.cheb_degree, -0.5 * Lz, 0.5 * Lz))
        if self.mode is LongMode.DIRECT:
            if self.k_max is None or self.k_max < 0:
                raise PlanError("DIRECT mode needs k_max >= 0")
            return
        if self.counts is None or self.window is None:
            raise PlanError("FFT mode needs grid counts and a window")
        counts = tuple(int(c) for c in self.counts)
        if any(c < 2 or c % 2 for c in counts):
            raise PlanError(f"FFT grid counts must be even and >= 2, got {counts}")
        object.__setattr__(self, "counts", counts)
        if self.taylor_order is not None and self.taylor_order < 1:
            raise PlanError(f"Taylor order must be >= 1, got {self.taylor_order}")
        if self.window.ndim != 2:
            raise PlanError("long-range window needs two axes")
        if not np.allclose(self.window.mesh, self.mesh, rtol=1e-12):
            raise PlanError("window mesh does not match the grid")
        if self.strict and self.has_long and not self.window.bandwidth_ok(self.s_first):
            raise PlanError("window too wide for the narrowest long-range Gaussian")

    @property
    def has_long(self) -> bool:
        return self.decomp.split_index < self.decomp.M

    @property
    def s_first(self) -> float:
        """Width ``s_{m+1}`` of the narrowest long-range Gaussian."""
        return float(self.decomp.nodes[self.decomp.split_index + 1])

    @property
    def eta_eff(self) -> float:
        """``s_{m+1} / L_z``, the largest admissible splitting factor for this set."""
        return self.s_first / self.box[2]

    @property
    def mesh(self) -> tuple[float, float]:
        assert self.counts is not None
        return (self.box[0] / self.counts[0], self.box[1] / self.counts[1])

    @property
    def I_long(self) -> tuple[int, int]:
        if self.mode is LongMode.FFT:
            assert self.counts is not None
            return self.counts
        assert self.k_max is not None
        return tuple(int(math.floor(self.k_max * L / math.pi + 1e-12)) for L in self.box[:2])  # type: ignore[return-value]


def make_long_plan(
    decomp: SogDecomposition,
    box,
    mode: LongMode | str,
    cheb_degree: int,
    *,
    I_long: int | tuple[int, int] | None = None,
    k_max: float | None = None,
    support: int = 9,
    kind: WindowKind | str = WindowKind.KB,
    shape_coeff: float | None = None,
    taylor_order: int | None = 16,
    workers: int = 1,
    strict: bool = True,
) -> LongRangePlan:
    """Build a plan from grid-count style arguments.

    ``I_long`` means the FFT grid in FFT mode and the disk radius
    ``min_d pi I_d / L_d`` in DIRECT mode, so both read the same way.
    """
    mode = LongMode(mode)
    box = tuple(float(b) for b in box)
    counts = None
    if I_long is not None:
        counts = (I_long, I_long) if np.isscalar(I_long) else tuple(I_long)
    if mode is LongMode.DIRECT:
        if k_max is None:
            if counts is None:
                raise PlanError("need I_long or k_max")
            k_max = kmax_from_counts(counts, box)
        return LongRangePlan(decomp, box, mode, cheb_degree, k_max=k_max, workers=workers)
    if counts is None:
        if k_max is None:
            raise PlanError("need I_long or k_max")
        counts = long_counts(k_max, box)
    kind = WindowKind(kind)
    mesh = (box[0] / counts[0], box[1] / counts[1])
    window = WindowSpec(kind, (support, support), mesh, shape_coeff=shape_coeff)
    return LongRangePlan(
        decomp, box, mode, cheb_degree, counts=counts, window=window,
        taylor_order=taylor_order, workers=workers, strict=strict,
    )


def _long_params(decomp: SogDecomposition) -> tuple[NDArray, NDArray]:
    sl = decomp.long_slice
    return decomp.weights[sl], decomp.nodes[sl]


def wl_s2_exp(w: NDArray, s: NDArray, k2: NDArray) -> NDArray:
    """``w_l s_l^2 e^{-s_l^2 k^2 / 4}`` with a leading Gaussian axis."""
    return (w * s**2)[(...,) + (None,) * np.ndim(k2)] * np.exp(-np.multiply.outer(s**2, k2) / 4)


def disk_modes(box, k_max: float) -> tuple[NDArray, NDArray, NDArray]:
    """Half-plane of the disk ``|k| <= k_max`` with multiplicity weights.

    Returns ``(kx, ky, mult)``; ``mult`` is 1 for ``k = 0`` and 2 otherwise,
    since the conjugate mode contributes the complex conjugate.
    """
    Lx, Ly = box[0], box[1]
    nx = int(math.floor(k_max * Lx / (2 * math.pi) + 1e-9))
    ny = int(math.floor(k_max * Ly / (2 * math.pi) + 1e-9))
    ix, iy = np.meshgrid(np.arange(-nx, nx + 1), np.arange(0, ny + 1), indexing="ij")
    ix, iy = ix.ravel(), iy.ravel()
    kx = 2 * np.pi * ix / Lx
    ky = 2 * np.pi * iy / Ly
    keep = (kx**2 + ky**2 <= k_max**2 * (1 + 1e-12)) & ((iy > 0) | (ix >= 0))
    kx, ky, ix, iy = kx[keep], ky[keep], ix[keep], iy[keep]
    mult = np.where((ix == 0) & (iy == 0), 1.0, 2.0)
    return kx, ky, mult


def _check_long(system: ParticleSystem, plan: LongRangePlan, mode: LongMode) -> None:
    if plan.mode is not mode:
        raise PlanError(f"plan is in {plan.mode.value} mode")
    if not plan.has_long:
        raise PlanError("no long-range Gaussians (m = M)")
    if not np.allclose(system.box, plan.box, rtol=1e-12):
        raise PlanError("system box does not match the plan")


def long_direct(system: ParticleSystem, plan: LongRangePlan) -> NDArray[np.float64]:
    """Long-range potential with explicit Fourier modes and Chebyshev interpolation in z."""
    _check_long(system, plan, LongMode.DIRECT)
    w, s = _long_params(plan.decomp)
    kx, ky, mult = disk_modes(plan.box, plan.k_max)
    pos = system.positions
    # e^{-i k.rho_j}, shape (K, N)
    E = np.exp(-1j * (np.outer(kx, pos[:, 0]) + np.outer(ky, pos[:, 1])))
    Eq = E * system.charges
    k2 = kx**2 + ky**2
    zc = plan.cheb.points
    dz2 = (zc[:, None] - pos[None, :, 2]) ** 2
    # e^{-x} = expm1(-x) + 1; the constant part is added once per mode and
    # dropped at k = 0, where it is sum_j q_j = 0 times a huge w s^2
    scale = wl_s2_exp(w, s, k2)
    samples = np.zeros((kx.size, zc.size), dtype=complex)
    for l, sl in enumerate(s):
        G = np.expm1(-dz2 / sl**2)
        samples += scale[l][:, None] * (Eq @ G.T)
    const = scale.sum(axis=0) * Eq.sum(axis=1)
    const[k2 == 0] = 0.0
    samples += const[:, None]
    coef = interpolate(samples, plan.cheb, axis=1).coeffs
    B = basis(plan.cheb, pos[:, 2])
    field = coef @ B.T
    area = plan.box[0] * plan.box[1]
    return (np.pi / area) * np.real(np.einsum("k,kn,kn->n", mult, np.conj(E), field))


def _fft_stencils(system: ParticleSystem, plan: LongRangePlan):
    out = []
    for d in range(2):
        first, wts = axis_weights(plan.window, d, system.positions[:, d], -0.5 * plan.box[d])
        out.extend([as_index(first), np.ascontiguousarray(wts)])
    return out


def _fft_wavenumbers(plan: LongRangePlan) -> tuple[NDArray, NDArray]:
    nx, ny = plan.counts
    hx, hy = plan.mesh
    return 2 * np.pi * np.fft.fftfreq(nx, hx), 2 * np.pi * np.fft.rfftfreq(ny, hy)


def _inv_window_sq(plan: LongRangePlan, kx: NDArray, ky: NDArray) -> NDArray:
    wx = window_hat(plan.window, 0, kx)
    wy = window_hat(plan.window, 1, ky)
    return 1.0 / (wx[:, None] ** 2 * wy[None, :] ** 2)


def taylor_coefficients(plan: LongRangePlan) -> NDArray[np.float64]:
    """``A_p(k) = (-1)^p / p! |W(k)|^{-2} sum_{l>m} w_l s_l^2 (L_z/s_l)^{2p} e^{-s_l^2 k^2/4}``.

    Shape ``(Q, I_x, I_y//2 + 1)`` in rfft layout.
    """
    Q = plan.taylor_order
    w, s = _long_params(plan.decomp)
    kx, ky = _fft_wavenumbers(plan)
    Lz = plan.box[2]
    ex = np.exp(-np.outer(s**2, kx**2) / 4)
    ey = np.exp(-np.outer(s**2, ky**2) / 4)
    p = np.arange(Q)
    coef = (-1.0) ** p / np.exp([math.lgamma(k + 1) for k in p])
    ratio = (Lz / s)[None, :] ** (2 * p[:, None])
    A = np.einsum("pl,l,lx,ly->pxy", coef[:, None] * ratio, w * s**2, ex, ey, optimize=True)
    # the p = 0 layer at k = 0 is sum_j q_j = 0 times a huge constant
    A[0, 0, 0] = 0.0
    return A * _inv_window_sq(plan, kx, ky)[None]


def _forward(grid: NDArray, plan: LongRangePlan) -> NDArray:
    """2D transform of layered proxy data times ``h_x h_y`` (axes -2, -1)."""
    hx, hy = plan.mesh
    return sfft.rfft2(grid, axes=(-2, -1), workers=plan.workers) * (hx * hy)


def _gather(scaled: NDArray, system: ParticleSystem, plan: LongRangePlan, st) -> NDArray[np.float64]:
    """``Phi_i = pi sum_g W(rho_i - rho_g) sum_n' T_n(z_i) S_scal(rho_g, n)``."""
    real = sfft.irfft2(scaled, s=plan.counts, axes=(-2, -1), workers=plan.workers)
    B = np.ascontiguousarray(basis(plan.cheb, system.positions[:, 2]))
    return np.pi * gather2d_layers(np.ascontiguousarray(real), *st, B)


def long_fft(system: ParticleSystem, plan: LongRangePlan) -> NDArray[np.float64]:
    """Long-range potential with x-y gridding, 2D FFTs and Chebyshev proxies in z."""
    _check_long(system, plan, LongMode.FFT)
    if plan.taylor_order is None:
        return _long_fft_per_gaussian(system, plan)
    Q, P = plan.taylor_order, plan.cheb_degree
    st = _fft_stencils(system, plan)
    Lz = plan.box[2]
    zc = plan.cheb.points
    t = ((zc[None, :] - system.positions[:, 2, None]) / Lz) ** 2
    layers = np.concatenate([t**p for p in range(Q)], axis=1)
    nx, ny = plan.counts
    grid = spread2d_layers(np.ascontiguousarray(system.charges), *st, np.ascontiguousarray(layers), nx, ny)
    Sk = _forward(grid, plan).reshape(Q, P, nx, ny // 2 + 1)
    Sk = interpolate(Sk, plan.cheb, axis=1).coeffs
    A = taylor_coefficients(plan)
    scaled = np.einsum("pxy,pnxy->nxy", A, Sk)
    return _gather(scaled, system, plan, st)


def _long_fft_per_gaussian(system: ParticleSystem, plan: LongRangePlan) -> NDArray[np.float64]:
    """Reference FFT path that grids every long-range Gaussian separately (no Taylor)."""
    w, s = _long_params(plan.decomp)
    st = _fft_stencils(system, plan)
    zc = plan.cheb.points
    dz2 = (zc[None, :] - system.positions[:, 2, None]) ** 2
    kx, ky = _fft_wavenumbers(plan)
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    inv = _inv_window_sq(plan, kx, ky)
    nx, ny = plan.counts
    q = np.ascontiguousarray(system.charges)
    scale = wl_s2_exp(w, s, k2) * inv
    # constant part of e^{-x} = expm1(-x) + 1, shared by all Gaussians
    ones = np.ones((system.n, 1))
    S1 = _forward(spread2d_layers(q, *st, ones, nx, ny), plan)[0]
    const = scale.sum(axis=0) * S1
    const[0, 0] = 0.0
    scaled = np.zeros((plan.cheb_degree, nx, ny // 2 + 1), dtype=complex)
    scaled[0] = 2.0 * const  # a_0 of a constant under the half-weight convention
    for l, sl in enumerate(s):
        layers = np.ascontiguousarray(np.expm1(-dz2 / sl**2))
        grid = spread2d_layers(q, *st, layers, nx, ny)
        Sk = interpolate(_forward(grid, plan), plan.cheb, axis=0).coeffs
        scaled += scale[l][None] * Sk
    return _gather(scaled, system, plan, st)


def long_range_potential(system: ParticleSystem, plan: LongRangePlan) -> NDArray[np.float64]:
    """Dispatch on the plan mode; zero when every Gaussian is mid-range."""
    if not plan.has_long:
        return np.zeros(system.n)
    if plan.mode is LongMode.DIRECT:
        return long_direct(system, plan)
    return long_fft(system, plan)


def long_cost(box, n: int, eta: float, cheb_degree: int, support: int, s_first: float) -> dict[str, float]:
    """Unit-constant cost of both variants.

    DIRECT: ``P Lx Ly / (eta Lz)^2 N`` mode-particle products.
    FFT: ``P Px Py N`` gridding plus ``P G log G`` transforms on ``G = Lx Ly / s_{m+1}^2`` points.
    """
    Lx, Ly, Lz = box
    direct = cheb_degree * Lx * Ly / (eta * Lz) ** 2 * n
    G = max(Lx * Ly / s_first**2, 2.0)
    fft = cheb_degree * support**2 * n + cheb_degree * G * math.log2(G)
    return {"direct": direct, "fft": fft}


def long_mode_select(
    box, n: int, eta: float, cheb_degree: int, s_first: float, support: int = 9,
    override: LongMode | str | None = None,
) -> LongMode:
    """DIRECT when its predicted cost does not exceed the FFT variant, unless overridden."""
    if override is not None:
        return LongMode(override)
    c = long_cost(box, n, eta, cheb_degree, support, s_first)
    return LongMode.DIRECT if c["direct"] <= c["fft"] else LongMode.FFT
