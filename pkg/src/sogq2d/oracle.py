"""Reference potentials for systems periodic in x and y, free in z.

Two independent evaluations are provided:

* :func:`direct_shell_sum` adds periodic images in complete square shells
  ``max(|n_x|, |n_y|) = R``. The partial sums approach their limit like a
  series in odd powers of ``1/(R + 1/2)``, which is fitted and extrapolated.
* :func:`ewald2d_potentials` is the classical quasi-2D Ewald sum, fast
  enough for ``N = 1000`` at full double precision.

:func:`sog_lattice_potentials` evaluates the SOG-split kernel exactly over
the lattice, isolating the error of the splitting itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import NDArray

from .geometry import ParticleSystem, min_image_displacement
from .sog import SogDecomposition


class OracleError(RuntimeError):
    """Raised when a reference sum fails to converge."""


# --- shell-ordered direct sum --------------------------------------------------


@numba.njit(cache=True)
def _shell_contrib(pos, q, box, targets, R, out):
    lx, ly = box[0], box[1]
    n = pos.shape[0]
    for a in range(targets.shape[0]):
        i = targets[a]
        acc = 0.0
        for nx in range(-R, R + 1):
            step = 1 if (nx == -R or nx == R) else 2 * R
            ny = -R
            while ny <= R:
                sx = nx * lx
                sy = ny * ly
                for j in range(n):
                    if R == 0 and j == i:
                        continue
                    dx = pos[i, 0] - pos[j, 0] + sx
                    dy = pos[i, 1] - pos[j, 1] + sy
                    dz = pos[i, 2] - pos[j, 2]
                    acc += q[j] / math.sqrt(dx * dx + dy * dy + dz * dz)
                if R == 0:
                    break
                ny += step
        out[a] = acc


def _extrapolate(partial: NDArray, R: NDArray, terms: int, window: int) -> NDArray:
    """Least-squares limit of partial sums modelled as ``S + sum_k c_k u^(2k-1)``."""
    u = 1.0 / (R[-window:] + 0.5)
    A = np.column_stack([np.ones_like(u)] + [u ** (2 * k - 1) for k in range(1, terms + 1)])
    coef, *_ = np.linalg.lstsq(A, partial[-window:], rcond=None)
    return coef[0]


@dataclass(frozen=True)
class ShellSumResult:
    potentials: NDArray[np.float64]
    shells: int
    last_shell_magnitude: float
    last_change: float


def direct_shell_sum(
    system: ParticleSystem,
    targets: NDArray | None = None,
    shell_limit: int = 256,
    tol: float = 1e-13,
    terms: int = 4,
    window: int = 20,
    min_shells: int = 16,
    max_particles: int = 1000,
) -> ShellSumResult:
    """Potentials by summing complete square shells of periodic images.

    After each shell the limit is re-estimated by fitting the last
    ``window`` partial sums with ``terms`` odd powers of ``1/(R + 1/2)``.
    The sum stops when three consecutive limit estimates change by less
    than ``tol`` relative to the largest potential magnitude.

    Raises
    ------
    OracleError
        If the estimates do not settle within ``shell_limit`` shells.
    """
    if system.n > max_particles:
        raise OracleError(f"shell sum limited to {max_particles} particles, got {system.n}")
    if targets is None:
        targets = np.arange(system.n)
    targets = np.asarray(targets, dtype=np.int64)
    pos = np.ascontiguousarray(system.positions)
    q = np.ascontiguousarray(system.charges)
    box = np.ascontiguousarray(system.box)
    partial = []
    contrib = np.empty(targets.size)
    running = np.zeros(targets.size)
    prev = None
    calm = 0
    change = np.inf
    for R in range(shell_limit + 1):
        _shell_contrib(pos, q, box, targets, R, contrib)
        running = running + contrib
        partial.append(running.copy())
        if R + 1 < max(min_shells, window):
            continue
        Rs = np.arange(R + 1, dtype=np.float64)
        est = _extrapolate(np.array(partial), Rs, terms, window)
        if prev is not None:
            scale = max(float(np.max(np.abs(est))), 1e-300)
            change = float(np.max(np.abs(est - prev))) / scale
            calm = calm + 1 if change < tol else 0
            if calm >= 3 or not np.any(q):
                return ShellSumResult(est, R + 1, float(np.max(np.abs(contrib))), change)
        prev = est
    raise OracleError(
        f"shell sum not converged after {shell_limit} shells: last relative change "
        f"{change:.3e}, last shell magnitude {np.max(np.abs(contrib)):.3e}"
    )


# --- Ewald2D --------------------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _exp_erfc(a, x):
    # e^a erfc(x) without forming e^a alone when it overflows
    if x > 25.0:
        return math.exp(a - x * x) / (x * math.sqrt(math.pi)) * (1.0 - 0.5 / (x * x))
    return math.exp(a) * math.erfc(x)


@numba.njit(cache=True)
def _ewald_kernel(pos, q, box, alpha, r_cut, kvecs, kmag, targets, out):
    lx, ly = box[0], box[1]
    area = lx * ly
    n = pos.shape[0]
    nimx = int(math.ceil(r_cut / lx)) + 1
    nimy = int(math.ceil(r_cut / ly)) + 1
    rc2 = r_cut * r_cut
    sqpi = math.sqrt(math.pi)
    for a in range(targets.shape[0]):
        i = targets[a]
        real = 0.0
        recip = 0.0
        zero = 0.0
        for j in range(n):
            dx0 = pos[i, 0] - pos[j, 0]
            dy0 = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            dx0 -= lx * math.floor(dx0 / lx + 0.5)
            dy0 -= ly * math.floor(dy0 / ly + 0.5)
            for mx in range(-nimx, nimx + 1):
                dx = dx0 + mx * lx
                for my in range(-nimy, nimy + 1):
                    if j == i and mx == 0 and my == 0:
                        continue
                    dy = dy0 + my * ly
                    r2 = dx * dx + dy * dy + dz * dz
                    if r2 < rc2:
                        r = math.sqrt(r2)
                        real += q[j] * math.erfc(alpha * r) / r
            s = 0.0
            for m in range(kvecs.shape[0]):
                k = kmag[m]
                c = math.cos(kvecs[m, 0] * dx0 + kvecs[m, 1] * dy0)
                x1 = k / (2.0 * alpha) + alpha * dz
                x2 = k / (2.0 * alpha) - alpha * dz
                s += c * (_exp_erfc(k * dz, x1) + _exp_erfc(-k * dz, x2)) / k
            recip += q[j] * s
            zero += q[j] * (dz * math.erf(alpha * dz) + math.exp(-alpha * alpha * dz * dz) / (alpha * sqpi))
        # kvecs holds one of each +-k pair, hence 2 * pi / area instead of pi / area
        out[a] = real + 2.0 * math.pi / area * recip - 2.0 * math.pi / area * zero - 2.0 * alpha / sqpi * q[i]


def ewald2d_potentials(
    system: ParticleSystem,
    targets: NDArray | None = None,
    accuracy: float = 7.0,
    alpha: float | None = None,
) -> NDArray[np.float64]:
    """Quasi-2D Ewald potentials.

    ``accuracy`` sets both cutoffs: ``alpha r_cut = accuracy`` and
    ``k_cut / (2 alpha) = accuracy``, so each truncated tail is below
    ``exp(-accuracy^2)``.
    """
    if targets is None:
        targets = np.arange(system.n)
    targets = np.asarray(targets, dtype=np.int64)
    lx, ly, _ = system.box
    if alpha is None:
        alpha = 1.8 / math.sqrt(lx * ly)
    r_cut = accuracy / alpha
    k_cut = 2.0 * alpha * accuracy
    mx = int(math.ceil(k_cut * lx / (2 * math.pi)))
    my = int(math.ceil(k_cut * ly / (2 * math.pi)))
    ks = []
    for a in range(0, mx + 1):
        for b in range(-my, my + 1):
            if a == 0 and b <= 0:
                continue
            kx, ky = 2 * math.pi * a / lx, 2 * math.pi * b / ly
            if kx * kx + ky * ky <= k_cut * k_cut:
                ks.append((kx, ky))
    kvecs = np.array(ks, dtype=np.float64).reshape(-1, 2)
    kmag = np.sqrt(np.sum(kvecs**2, axis=1))
    out = np.empty(targets.size)
    _ewald_kernel(
        np.ascontiguousarray(system.positions),
        np.ascontiguousarray(system.charges),
        np.ascontiguousarray(system.box),
        float(alpha),
        float(r_cut),
        kvecs,
        kmag,
        targets,
        out,
    )
    return out


# --- exact SOG lattice sum -----------------------------------------------------


def _theta_minus_one(d: NDArray, L: float, s: float, real: bool, n: int) -> NDArray:
    """``theta(d) - 1`` for the 1D periodised Gaussian, scaled so theta -> 1 as s -> inf.

    ``theta(d) = (sqrt(pi) s / L)^{-1} sum_a exp(-(d + a L)^2 / s^2)
    = sum_a exp(-s^2 k_a^2 / 4) cos(k_a d)`` with ``k_a = 2 pi a / L``.
    """
    if real:
        acc = np.zeros_like(d)
        for a in range(-n, n + 1):
            acc += np.exp(-((d + a * L) ** 2) / s**2)
        return acc * (L / (math.sqrt(math.pi) * s)) - 1.0
    acc = np.zeros_like(d)
    for a in range(1, n + 1):
        k = 2 * math.pi * a / L
        acc += math.exp(-(s * k) ** 2 / 4) * np.cos(k * d)
    return 2.0 * acc


def gaussian_lattice_sum(
    system: ParticleSystem, weights: NDArray, nodes: NDArray, digits: float = 7.5
) -> NDArray[np.float64]:
    """``sum_l w_l sum_j q_j sum_n exp(-|r_i - r_j + n L|^2 / s_l^2)``, including ``j = i, n = 0``.

    The lattice sum of a Gaussian factorises into 1D theta functions in x
    and y, each summed over real-space images or Fourier modes, whichever
    needs fewer terms.  With ``theta = 1 + t`` the product is assembled as
    ``1 + t_x + t_y + t_x t_y`` and the constant ``1`` is combined with the
    z factor through ``expm1``: for very wide Gaussians it cancels by
    neutrality and would otherwise swamp the result.
    """
    pos, q, box = system.positions, system.charges, system.box
    lx, ly, _ = box
    area = lx * ly
    d = min_image_displacement(pos[:, None, :], pos[None, :, :], box)
    dx, dy, dz2 = d[..., 0], d[..., 1], d[..., 2] ** 2
    phi = np.zeros(system.n)
    neutral = abs(float(np.sum(q))) <= 1e-12 * max(float(np.sum(np.abs(q))), 1e-300)
    for w, s in zip(weights, nodes):
        ts = []
        for comp, L in ((dx, lx), (dy, ly)):
            n_real = int(math.ceil(digits * s / L)) + 1
            n_four = int(math.ceil(2 * digits * L / (2 * math.pi * s)))
            real = n_real <= n_four
            ts.append(_theta_minus_one(comp, L, s, real, n_real if real else n_four))
        tx, ty = ts
        ez = np.exp(-dz2 / s**2)
        acc = (tx + ty + tx * ty) * ez
        acc += np.expm1(-dz2 / s**2) if neutral else ez
        acc *= math.pi * s**2 / area
        phi += w * (acc @ q)
    return phi


def sog_lattice_potentials(system: ParticleSystem, decomp: SogDecomposition, digits: float = 7.5) -> NDArray[np.float64]:
    """Potentials of the SOG-split kernel summed exactly over the lattice.

    Equals ``Phi^N + Phi^far - Phi^self`` with no spectral discretization,
    so comparing to a Coulomb reference measures the splitting error alone.
    """
    pos, q, box = system.positions, system.charges, system.box
    d = min_image_displacement(pos[:, None, :], pos[None, :, :], box)
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    np.fill_diagonal(r, np.inf)
    inside = r < decomp.r_c
    near = np.zeros_like(r)
    rr = r[inside]
    near[inside] = 1.0 / rr - np.exp(-(rr[:, None] ** 2) / decomp.nodes**2) @ decomp.weights
    far = gaussian_lattice_sum(system, decomp.weights, decomp.nodes, digits)
    return near @ q + far - q * decomp.self_coefficient


def reference_energy(system: ParticleSystem, potentials: NDArray | None = None, method: str = "ewald") -> float:
    """``(1/2) sum q_i phi_i`` with oracle potentials."""
    if potentials is None:
        if method == "ewald":
            potentials = ewald2d_potentials(system)
        elif method == "shell":
            potentials = direct_shell_sum(system).potentials
        else:
            raise ValueError(f"unknown oracle method {method!r}")
    return 0.5 * float(np.dot(system.charges, potentials))
