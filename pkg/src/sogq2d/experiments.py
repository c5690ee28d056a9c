"""Convergence sweeps and the curve fits used to summarise them.

Each sweep varies one parameter of a fixed base setup and measures the
relative max-norm error of a single stage against an exact lattice sum of
the same Gaussians, so that stage errors are isolated from each other.
The ``M`` sweep instead measures the relative energy error of the split
kernel against a Coulomb reference.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import least_squares
from scipy.special import erfc

from .chebyshev import gaussian_cheb_bound
from .geometry import ParticleSystem, random_system
from .long_range import LongMode, long_direct, long_fft, make_long_plan, taylor_bound
from .mid_range import default_delta_factor, make_mid_plan, mid_range_potential
from .oracle import direct_shell_sum, ewald2d_potentials, gaussian_lattice_sum, sog_lattice_potentials
from .params import padding_error
from .sog import PRESETS, SogDecomposition, estimate_decomposition_error, find_preset
from .solver import relative_error
from .windows import WindowKind


class SweepKind(str, Enum):
    M = "M"
    P_WINDOW = "P_window"
    I = "I"
    LAMBDA_Z = "lambda_z"
    ETA = "eta"
    I_LONG = "I_long"
    P_CHEB = "P_cheb"
    Q = "Q"


@dataclass(frozen=True)
class SweepSetup:
    """Base configuration shared by all points of a sweep.

    ``m`` (if given) fixes the split index and overrides ``eta`` with a value
    just above ``s_m / L_z``.  ``M = None`` takes the tabulated truncation.
    """

    n: int = 1000
    box: tuple[float, float, float] = (20.0, 20.0, 20.0)
    seed: int = 0
    b: float = PRESETS[-1].b
    r_c: float = 10.0
    M: int | None = None
    eta: float = 0.294
    m: int | None = None
    window: WindowKind = WindowKind.KB
    support: int = 21
    I: int = 48
    lambda_z: float = 3.0
    I_long: int = 48
    P_cheb: int = 32
    Q: int = 16
    long_support: int = 15
    oracle: str = "ewald"

    def system(self) -> ParticleSystem:
        return random_system(self.n, self.box, seed=self.seed)

    def decomposition(self) -> SogDecomposition:
        M = self.M
        if M is None:
            p = find_preset(self.b)
            M = p.M_energy if p is not None else 200
        d = SogDecomposition.from_b(self.b, self.r_c, M)
        Lz = self.box[2]
        eta = self.eta if self.m is None else float(d.nodes[self.m]) / Lz * (1 + 1e-9)
        return d.with_split(Lz, eta)


@dataclass(frozen=True)
class SweepPoint:
    value: float
    error: float
    estimate: float
    seconds: float


@dataclass(frozen=True)
class SweepResult:
    kind: SweepKind
    setup: SweepSetup
    points: tuple[SweepPoint, ...]
    failures: tuple[tuple[float, str], ...] = ()
    meta: dict[str, float] = field(default_factory=dict)

    @property
    def values(self) -> NDArray[np.float64]:
        return np.array([p.value for p in self.points])

    @property
    def errors(self) -> NDArray[np.float64]:
        return np.array([p.error for p in self.points])

    @property
    def estimates(self) -> NDArray[np.float64]:
        return np.array([p.estimate for p in self.points])


# --- references -----------------------------------------------------------------


def coulomb_reference(system: ParticleSystem, oracle: str = "ewald") -> NDArray[np.float64]:
    if oracle == "ewald":
        return ewald2d_potentials(system)
    if oracle == "shell":
        return direct_shell_sum(system).potentials
    raise ValueError(f"unknown oracle {oracle!r}")


def stage_reference(system: ParticleSystem, decomp: SogDecomposition, stage: str) -> NDArray[np.float64]:
    """Exact lattice sum of the Gaussians handled by ``stage`` (``mid``, ``long`` or ``far``)."""
    slices = {"mid": decomp.mid_slice, "long": decomp.long_slice, "far": slice(0, decomp.M + 1)}
    if stage not in slices:
        raise ValueError(f"unknown stage {stage!r}")
    sl = slices[stage]
    w, s = decomp.weights[sl], decomp.nodes[sl]
    if w.size == 0:
        return np.zeros(system.n)
    return gaussian_lattice_sum(system, w, s, digits=8.5)


def energy_error(system: ParticleSystem, potentials: ArrayLike, reference: ArrayLike) -> float:
    """``|U - U_ref| / |U_ref|`` with ``U = (1/2) sum q phi``."""
    u = 0.5 * float(system.charges @ np.asarray(potentials))
    u_ref = 0.5 * float(system.charges @ np.asarray(reference))
    return abs(u - u_ref) / abs(u_ref)


# --- one sweep point per kind -----------------------------------------------------


def _mid_plan(setup: SweepSetup, decomp: SogDecomposition, **kw):
    args = dict(counts=(setup.I,) * 3, support=setup.support, kind=setup.window, lambda_z=setup.lambda_z)
    args.update(kw)
    counts = args.pop("counts")
    return make_mid_plan(decomp, setup.box, counts, strict=False, **args)


def _mid_estimate(kind: SweepKind, setup: SweepSetup, decomp: SogDecomposition, v: float) -> float:
    Lz = setup.box[2]
    s0 = float(decomp.nodes[0])
    if kind is SweepKind.P_WINDOW:
        return float(erfc(math.sqrt(0.5 * math.pi * (v - 1))))
    if kind is SweepKind.I:
        return math.exp(-((s0 * math.pi * v / (2 * min(setup.box))) ** 2))
    m = decomp.split_index
    h = Lz / setup.I
    Hz = 0.5 * (setup.support - 1) * h
    S = 0.5 * math.pi * (setup.support - 1)
    return padding_error(v, Lz, default_delta_factor(setup.window) * Hz, float(decomp.nodes[m]), Hz, S)


def run_sweep(kind: SweepKind | str, values, setup: SweepSetup | None = None,
              system: ParticleSystem | None = None, reference: NDArray | None = None) -> SweepResult:
    """Measure the error for each parameter value; failed points are recorded and skipped.

    ``reference`` may be passed to reuse an expensive oracle between sweeps;
    it must match the stage measured by ``kind``.
    """
    kind = SweepKind(kind)
    setup = setup or SweepSetup()
    system = system if system is not None else setup.system()
    decomp = setup.decomposition()
    points: list[SweepPoint] = []
    failures: list[tuple[float, str]] = []
    meta: dict[str, float] = {"m": decomp.split_index, "s0": float(decomp.nodes[0])}
    if decomp.split_index < decomp.M:
        meta["eta_eff"] = float(decomp.nodes[decomp.split_index + 1]) / setup.box[2]

    t0 = time.perf_counter()
    if reference is None:
        if kind is SweepKind.M:
            reference = coulomb_reference(system, setup.oracle)
        elif kind in (SweepKind.P_WINDOW, SweepKind.I, SweepKind.LAMBDA_Z):
            reference = stage_reference(system, decomp, "mid")
        elif kind is SweepKind.ETA:
            reference = stage_reference(system, decomp, "far")
        elif kind in (SweepKind.I_LONG, SweepKind.P_CHEB):
            reference = stage_reference(system, decomp, "long")
    meta["reference_seconds"] = time.perf_counter() - t0

    base_fft = None
    if kind is SweepKind.Q:
        base_fft = make_long_plan(decomp, setup.box, LongMode.FFT, setup.P_cheb, I_long=setup.I_long,
                                  support=setup.long_support, taylor_order=None, strict=False)
        reference = long_fft(system, base_fft)

    for v in values:
        t = time.perf_counter()
        try:
            if kind is SweepKind.M:
                d = decomp.with_M(int(v))
                phi = sog_lattice_potentials(system, d)
                err = energy_error(system, phi, reference)
                est = estimate_decomposition_error(d).energy_error
            elif kind in (SweepKind.P_WINDOW, SweepKind.I, SweepKind.LAMBDA_Z):
                key = {SweepKind.P_WINDOW: "support", SweepKind.I: "counts", SweepKind.LAMBDA_Z: "lambda_z"}[kind]
                arg = (int(v),) * 3 if kind is SweepKind.I else (int(v) if kind is SweepKind.P_WINDOW else float(v))
                phi = mid_range_potential(system, _mid_plan(setup, decomp, **{key: arg}))
                err = relative_error(phi, reference)
                est = _mid_estimate(kind, setup, decomp, float(v))
            elif kind is SweepKind.ETA:
                d = decomp.with_split(setup.box[2], float(v))
                phi = np.zeros(system.n)
                if d.split_index >= 0:
                    phi += mid_range_potential(system, _mid_plan(setup, d))
                if d.split_index < d.M:
                    lp = make_long_plan(d, setup.box, LongMode.DIRECT, setup.P_cheb, I_long=setup.I_long)
                    phi += long_direct(system, lp)
                err = relative_error(phi, reference)
                est = math.nan
                if d.split_index < d.M:
                    est = gaussian_cheb_bound(float(d.nodes[d.split_index + 1]) / setup.box[2], setup.P_cheb)
            elif kind in (SweepKind.I_LONG, SweepKind.P_CHEB):
                I_long = int(v) if kind is SweepKind.I_LONG else setup.I_long
                P = int(v) if kind is SweepKind.P_CHEB else setup.P_cheb
                lp = make_long_plan(decomp, setup.box, LongMode.DIRECT, P, I_long=I_long)
                err = relative_error(long_direct(system, lp), reference)
                if kind is SweepKind.I_LONG:
                    est = math.exp(-((lp.s_first * lp.k_max) ** 2) / 4)
                else:
                    est = gaussian_cheb_bound(lp.eta_eff, P)
            else:
                lp = replace(base_fft, taylor_order=int(v))
                err = relative_error(long_fft(system, lp), reference)
                est = taylor_bound(setup.eta, int(v))
        except (ValueError, RuntimeError) as exc:
            failures.append((float(v), str(exc)))
            continue
        points.append(SweepPoint(float(v), float(err), float(est), time.perf_counter() - t))
    return SweepResult(kind, setup, tuple(points), tuple(failures), meta)


# --- fits ---------------------------------------------------------------------------


def converging_part(errors: ArrayLike, factor: float = 10.0) -> NDArray[np.bool_]:
    """Mask of points above ``factor`` times the plateau.

    A plateau is assumed when the last point improves on its predecessor by
    less than a factor two; otherwise every point is kept.
    """
    e = np.asarray(errors, dtype=np.float64)
    keep = e > 0
    if e.size >= 2 and e[-2] < 2 * e[-1]:
        keep &= e > factor * np.min(e)
    return keep


def fit_geometric_base(M: ArrayLike, errors: ArrayLike) -> float:
    """Base ``b`` of ``err ~ A b^{-M}`` by least squares in log space."""
    slope = np.polyfit(np.asarray(M, float), np.log(np.asarray(errors, float)), 1)[0]
    return float(math.exp(-slope))


def fit_gaussian_rate(x: ArrayLike, errors: ArrayLike) -> float:
    """``C`` of ``err ~ A exp(-C x^2)``."""
    x = np.asarray(x, float)
    return float(-np.polyfit(x**2, np.log(np.asarray(errors, float)), 1)[0])


def fit_erfc_rate(x: ArrayLike, errors: ArrayLike, sqrt: bool = False) -> float:
    """``C`` of ``err ~ A erfc(C x)`` (or ``erfc(C sqrt(x))``) with free amplitude."""
    x = np.asarray(x, float)
    u = np.sqrt(x) if sqrt else x
    le = np.log(np.asarray(errors, float))

    def resid(p):
        return np.log(erfc(p[1] * u)) + p[0] - le

    c0 = math.sqrt(max(-(le[-1] - le[0]) / max(u[-1] ** 2 - u[0] ** 2, 1e-12), 1e-3))
    return float(least_squares(resid, [0.0, c0]).x[1])


def fit_cheb_rate(P: ArrayLike, errors: ArrayLike) -> float:
    """``C`` of ``err ~ A C^{-P} / sqrt(P!)``."""
    P = np.asarray(P, float)
    y = np.log(np.asarray(errors, float)) + 0.5 * np.array([math.lgamma(p + 1) for p in P])
    return float(math.exp(-np.polyfit(P, y, 1)[0]))
