"""Parameter selection: from ``(N, box, eps)`` to a complete solver plan.

The error budget is split in equal thirds between the decomposition, the
mid-range solver and the long-range solver.  The free-direction parameters
``(lambda_z, eta, P)`` come from an exhaustive search over a small lattice
that minimises a unit-constant cost model subject to the padding and
Chebyshev error estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc, erfcinv

from .long_range import LongMode, LongRangePlan, disk_modes, make_long_plan
from .mid_range import MidRangePlan, default_delta_factor, make_mid_plan
from .sog import PRESETS, DecompositionError, Preset, SogDecomposition, choose_M
from .windows import WindowKind


class InfeasibleError(ValueError):
    """No parameter combination meets the requested tolerance."""


@dataclass(frozen=True)
class SelectionOptions:
    """Knobs of :func:`select_parameters`.

    ``r_c`` overrides the density rule ``rc_tuning * rho^{-1/3}``; ``long_mode``
    overrides the cost-based choice between DIRECT and FFT.
    """

    window: WindowKind = WindowKind.KB
    long_window: WindowKind = WindowKind.KB
    c_rat: float = 50.0
    rc_tuning: float = 1.5
    rc_margin: float = 0.1
    r_c: float | None = None
    lambda_values: tuple[float, ...] = tuple(np.round(np.arange(1.0, 3.0 + 1e-9, 0.05), 2))
    P_max: int = 32
    Q_max: int = 16
    long_mode: LongMode | None = None
    assumption_factor: float = 10.0
    workers: int = 1

    def __post_init__(self) -> None:
        if not 1.0 <= self.c_rat <= 1000.0:
            raise ValueError(f"C_rat must lie in [1, 1000], got {self.c_rat}")


@dataclass(frozen=True)
class FreeDirection:
    """Result of the free-direction search; ``m = -1`` disables the mid-range solver."""

    m: int
    lambda_z: float
    P: int
    cost: float
    eta: float | None
    padding_error: float
    cheb_error: float


@dataclass(frozen=True)
class SolverPlan:
    """Everything needed to evaluate potentials for one geometry and tolerance."""

    decomp: SogDecomposition
    box: tuple[float, float, float]
    eps: float
    n: int
    mid: MidRangePlan | None
    long: LongRangePlan | None
    options: SelectionOptions = field(default_factory=SelectionOptions)
    free: FreeDirection | None = None

    @property
    def r_c(self) -> float:
        return self.decomp.r_c

    @property
    def rho(self) -> float:
        return self.n / float(np.prod(self.box))

    @property
    def rho_star(self) -> float:
        if self.mid is None:
            return self.rho
        g = self.mid.grid
        return self.n / (g.box[0] * g.box[1] * g.Lz_star)

    @property
    def eta(self) -> float | None:
        m = self.decomp.split_index
        return None if m < 0 else float(self.decomp.nodes[m]) / self.box[2]

    def summary(self) -> dict[str, object]:
        """Flat parameter dictionary in the notation of the method."""
        d = self.decomp
        out: dict[str, object] = {
            "N": self.n, "box": self.box, "eps": self.eps, "r_c": d.r_c, "b": d.b,
            "sigma": d.sigma, "omega": d.omega, "M": d.M, "m": d.split_index, "eta": self.eta,
        }
        if self.mid is not None:
            out.update(I=self.mid.grid.counts, support=self.mid.window.support,
                       lambda_z=self.mid.grid.lambda_z, Iz_star=self.mid.grid.Iz_star)
        if self.long is not None:
            out.update(long_mode=self.long.mode.value, I_long=self.long.I_long, P=self.long.cheb_degree)
            if self.long.mode is LongMode.FFT:
                out.update(Q=self.long.taylor_order, support_long=self.long.window.support)
        return out


# --- individual rules ---------------------------------------------------------


def odd_ceil(x: float) -> int:
    k = int(math.ceil(x - 1e-12))
    return k if k % 2 else k + 1


def choose_cutoff(n: int, box, opts: SelectionOptions) -> float:
    """``r_c = clamp(tuning rho^{-1/3}, lower, min(Lx, Ly)/2)``."""
    half = 0.5 * min(box[0], box[1])
    if opts.r_c is not None:
        if opts.r_c > half:
            raise InfeasibleError(f"r_c={opts.r_c} exceeds half the periodic box ({half})")
        return float(opts.r_c)
    rho = n / float(np.prod(box))
    rc = opts.rc_tuning * rho ** (-1.0 / 3.0)
    # smallest cutoff whose first Gaussian still resolves a couple of particles
    lower = (1.0 + opts.rc_margin) * 0.5 * rho ** (-1.0 / 3.0)
    return float(min(max(rc, lower), half))


def choose_preset(eps: float) -> Preset:
    """Coarsest tabulated ``b`` whose decomposition error is at most ``eps / 3``."""
    for p in PRESETS:
        if p.energy_error <= eps / 3.0:
            return p
    best = PRESETS[-1]
    raise InfeasibleError(
        f"tolerance {eps:g} is below the decomposition floor; best achievable is about {3 * best.energy_error:.2g}"
    )


def choose_truncation(preset: Preset, sigma: float, box, eps: float, factor: float) -> int:
    """``M`` meeting the truncation estimate and ``s_{M+1} >= factor * max(L)``."""
    try:
        M = choose_M(preset.b, eps / 3.0, "energy")
    except DecompositionError:
        M = preset.M_energy
    s0 = math.sqrt(2.0) * sigma
    M_box = int(math.ceil(math.log(factor * max(box) / s0) / math.log(preset.b))) - 1
    return max(M, M_box, 1)


def mid_kmax(s0: float, eps: float) -> float:
    """Mid-range cutoff frequency with ``exp(-s_0^2 K^2 / 4) = eps``."""
    return 2.0 * math.sqrt(math.log(1.0 / eps)) / s0


def grid_counts(k_max: float, lengths) -> tuple[int, ...]:
    """``I_d = 2 ceil(K_max L_d / (2 pi))``."""
    return tuple(max(2, 2 * math.ceil(k_max * L / (2 * math.pi) - 1e-12)) for L in lengths)


def window_shape_target(eps: float) -> float:
    """``S ~ erfcinv(eps)^2``."""
    return float(erfcinv(eps)) ** 2


def window_support(eps: float) -> int:
    """Odd support with ``S = pi (P - 1) / 2`` matching :func:`window_shape_target`."""
    return max(3, odd_ceil(2.0 * window_shape_target(eps) / math.pi + 1.0))


def padding_error(lambda_z: float, Lz: float, delta_z: float, s_m: float, Hz: float, S: float) -> float:
    """``erfc[lambda_z (L_z + delta_z) / (2 sqrt(s_m^2 - H_z^2 / S))]``."""
    d = s_m**2 - Hz**2 / S
    if d <= 0:
        return math.inf
    return float(erfc(lambda_z * (Lz + delta_z) / (2.0 * math.sqrt(d))))


def cheb_error(eta: float, Lz: float, P: int) -> float:
    """``(2 sqrt2 eta)^{-P} / (eta L_z sqrt(P!))``."""
    return math.exp(-P * math.log(2 * math.sqrt(2) * eta) - 0.5 * math.lgamma(P + 1)) / (eta * Lz)


def taylor_order(eta: float, eps: float, Q_max: int) -> int | None:
    """Smallest ``Q <= Q_max`` with ``1 / (Q! eta^{2Q}) <= eps``, else ``None``.

    The expansion variable ``(z - z_j)/s`` spans ``[-L_z/s, L_z/s]``, so the
    remainder uses ``eta`` rather than ``2 eta``.  ``None`` selects the
    per-Gaussian path.
    """
    for Q in range(1, Q_max + 1):
        if math.exp(-math.lgamma(Q + 1) - 2 * Q * math.log(eta)) <= eps:
            return Q
    return None


# --- cost model ---------------------------------------------------------------


def near_cost(r_c: float, rho: float, n: int) -> float:
    return 4.0 / 3.0 * math.pi * r_c**3 * rho * n


def fft_cost(points: float) -> float:
    return points * math.log2(max(points, 2.0))


def long_terms(box, n: int, s_first: float, eps: float, P: int, c_rat: float,
               support_long: int, Q: int | None, n_long: int) -> dict[str, float]:
    """DIRECT and FFT long-range costs with actual mode and grid counts.

    Without a Taylor order the FFT variant grids and transforms every Gaussian.
    """
    K = 2.0 * math.sqrt(math.log(1.0 / eps)) / s_first
    kx, _, mult = disk_modes(box, K)
    modes = float(mult.sum())
    Ix, Iy = grid_counts(K, box[:2])
    layers = Q if Q is not None else n_long
    transforms = 1 if Q is not None else n_long
    return {
        "direct": c_rat * P * modes * n,
        "fft": layers * P * support_long**2 * n + transforms * P * fft_cost(Ix * Iy),
    }


def optimize_free_direction(
    decomp: SogDecomposition,
    box,
    n: int,
    eps: float,
    counts: tuple[int, int, int],
    support: int,
    kind: WindowKind,
    opts: SelectionOptions,
) -> FreeDirection:
    """Exhaustive search over the split ``m``, ``lambda_z`` and ``P``.

    Constraints (each at ``eps``): padding ``erfc`` estimate with ``eta L_z = s_m``
    and Chebyshev estimate with ``eta = s_{m+1}/L_z``.  The objective adds the
    mid-range gridding and FFT costs to the cheaper long-range variant.
    """
    Lx, Ly, Lz = box
    s = decomp.nodes
    M = decomp.M
    hz = Lz / counts[2]
    Hz = 0.5 * (support - 1) * hz
    delta_z = default_delta_factor(kind) * Hz
    dI = int(math.ceil(delta_z / hz - 1e-9))
    S = window_shape_target(eps)
    support_long = window_support(eps)
    best: FreeDirection | None = None
    for m in range(-1, M + 1):
        # mid-range part
        if m >= 0:
            lam = None
            for lv in opts.lambda_values:
                pe = padding_error(lv, Lz, delta_z, float(s[m]), Hz, S)
                if pe <= eps:
                    lam = lv
                    break
            if lam is None:
                continue
            Iz_star = 2 * math.ceil(lam * (counts[2] + dI) / 2 - 1e-12)
            mid = support**3 * n + fft_cost(counts[0] * counts[1] * Iz_star)
        else:
            lam, pe, mid = 1.0, 0.0, 0.0
        # long-range part
        if m < M:
            eta_l = float(s[m + 1]) / Lz
            P = next((p for p in range(1, opts.P_max + 1) if cheb_error(eta_l, Lz, p) <= eps), None)
            if P is None:
                continue
            ce = cheb_error(eta_l, Lz, P)
            Q = taylor_order(eta_l, eps, opts.Q_max)
            lt = long_terms(box, n, float(s[m + 1]), eps, P, opts.c_rat, support_long, Q, M - m)
            if opts.long_mode is None:
                long = min(lt.values())
            else:
                long = lt[LongMode(opts.long_mode).value]
        else:
            P, ce, long = 1, 0.0, 0.0
        cost = mid + long
        if best is None or cost < best.cost:
            eta = None if m < 0 else float(s[m]) / Lz
            best = FreeDirection(m, float(lam), P, cost, eta, pe, ce)
    if best is None:
        raise InfeasibleError("no (lambda_z, eta, P) on the search lattice meets the tolerance")
    return best


def select_parameters(n: int, box, eps: float, options: SelectionOptions | None = None) -> SolverPlan:
    """Full parameter pipeline for ``n`` particles in ``box`` at relative tolerance ``eps``.

    Raises
    ------
    InfeasibleError
        If ``eps`` is below the decomposition floor or no free-direction
        parameters satisfy the constraints.
    """
    opts = options or SelectionOptions()
    if eps < 1e-15:
        raise InfeasibleError(f"eps={eps:g} is below double precision (need >= 1e-15)")
    if n < 1:
        raise ValueError("need at least one particle")
    box = tuple(float(b) for b in box)
    part = eps / 3.0
    r_c = choose_cutoff(n, box, opts)
    preset = choose_preset(eps)
    sigma = r_c / preset.r0
    M = choose_truncation(preset, sigma, box, eps, opts.assumption_factor)
    decomp = SogDecomposition.from_preset(preset, r_c, M)
    s0 = float(decomp.nodes[0])

    counts = grid_counts(mid_kmax(s0, part), box)
    support = window_support(part)
    free = optimize_free_direction(decomp, box, n, part, counts, support, opts.window, opts)

    m = free.m
    # any eta between s_m/L_z and s_{m+1}/L_z gives the same split; take the midpoint in log
    if m < 0:
        eta = 0.5 * s0 / box[2]
    elif m < M:
        eta = math.sqrt(decomp.nodes[m] * decomp.nodes[m + 1]) / box[2]
    else:
        eta = 2.0 * float(decomp.nodes[M]) / box[2]
    decomp = decomp.with_split(box[2], eta)
    assert decomp.split_index == m

    mid = None
    if m >= 0:
        mid = make_mid_plan(decomp, box, counts, support, opts.window, free.lambda_z,
                            workers=opts.workers)
    long = None
    if m < M:
        s1 = float(decomp.nodes[m + 1])
        K = 2.0 * math.sqrt(math.log(1.0 / part)) / s1
        Q = taylor_order(s1 / box[2], part, opts.Q_max)
        support_long = window_support(part)
        lt = long_terms(box, n, s1, part, free.P, opts.c_rat, support_long, Q, M - m)
        if opts.long_mode is not None:
            mode = LongMode(opts.long_mode)
        else:
            mode = LongMode.DIRECT if lt["direct"] <= lt["fft"] else LongMode.FFT
        if mode is LongMode.DIRECT:
            long = make_long_plan(decomp, box, mode, free.P, k_max=K, workers=opts.workers)
        else:
            long = make_long_plan(decomp, box, mode, free.P, k_max=K, support=support_long,
                                  kind=opts.long_window, taylor_order=Q, workers=opts.workers)
    return SolverPlan(decomp, box, eps, n, mid, long, opts, free)


def predict_cost(plan: SolverPlan, n: int | None = None) -> dict[str, float]:
    """Unit-constant cost terms of a plan.

    Keys: ``near``, ``mid_gridding``, ``mid_fft`` and either ``long_direct``
    or ``long_gridding`` + ``long_fft``.
    """
    n = plan.n if n is None else n
    rho = n / float(np.prod(plan.box))
    out = {"near": near_cost(plan.r_c, rho, n), "mid_gridding": 0.0, "mid_fft": 0.0}
    if plan.mid is not None:
        sup = plan.mid.window.support
        out["mid_gridding"] = float(np.prod(sup)) * n
        out["mid_fft"] = fft_cost(float(np.prod(plan.mid.grid.shape)))
    lp = plan.long
    if lp is None:
        return out
    if lp.mode is LongMode.DIRECT:
        _, _, mult = disk_modes(lp.box, lp.k_max)
        out["long_direct"] = plan.options.c_rat * lp.cheb_degree * float(mult.sum()) * n
    else:
        sup = lp.window.support
        n_long = lp.decomp.M - lp.decomp.split_index
        layers = lp.taylor_order if lp.taylor_order is not None else n_long
        transforms = 1 if lp.taylor_order is not None else n_long
        out["long_gridding"] = float(layers) * lp.cheb_degree * sup[0] * sup[1] * n
        out["long_fft"] = transforms * lp.cheb_degree * fft_cost(float(np.prod(lp.counts)))
    return out


def with_particles(plan: SolverPlan, n: int) -> SolverPlan:
    """Same plan with a different particle count (grids and widths unchanged)."""
    return replace(plan, n=n)
