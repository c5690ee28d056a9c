"""End-to-end evaluation: near + mid + long - self."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .geometry import GeometryError, ParticleSystem, build_cell_list, canonicalize
from .long_range import long_range_potential
from .mid_range import mid_range_potential
from .near_field import RadialTable, near_potential, self_potential, total_energy
from .params import SelectionOptions, SolverPlan, select_parameters


@dataclass(frozen=True)
class PotentialComponents:
    """Per-particle contributions; ``total = near + mid + long - self``."""

    near: NDArray[np.float64]
    mid: NDArray[np.float64]
    long: NDArray[np.float64]
    self_term: NDArray[np.float64]
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> NDArray[np.float64]:
        return self.near + self.mid + self.long - self.self_term


@dataclass(frozen=True)
class SolveResult:
    plan: SolverPlan
    components: PotentialComponents
    energy: float

    @property
    def potentials(self) -> NDArray[np.float64]:
        return self.components.total


def compute_components(system: ParticleSystem, plan: SolverPlan, table: RadialTable | None = None) -> PotentialComponents:
    """Evaluate every stage of ``plan`` on ``system`` and time each one."""
    if not np.allclose(system.box, plan.box, rtol=1e-12):
        raise GeometryError(f"system box {system.box} does not match plan box {plan.box}")
    system = canonicalize(system)
    timings: dict[str, float] = {}

    t = time.perf_counter()
    cells = build_cell_list(system, plan.decomp.r_c)
    near = near_potential(system, plan.decomp, cells, table)
    timings["near"] = time.perf_counter() - t

    t = time.perf_counter()
    mid = mid_range_potential(system, plan.mid) if plan.mid is not None else np.zeros(system.n)
    timings["mid"] = time.perf_counter() - t

    t = time.perf_counter()
    long = long_range_potential(system, plan.long) if plan.long is not None else np.zeros(system.n)
    timings["long"] = time.perf_counter() - t

    timings["total"] = timings["near"] + timings["mid"] + timings["long"]
    return PotentialComponents(near, mid, long, self_potential(system, plan.decomp), timings)


def solve(
    system: ParticleSystem,
    eps: float | None = None,
    plan: SolverPlan | None = None,
    options: SelectionOptions | None = None,
) -> SolveResult:
    """Potentials and energy, selecting parameters for ``eps`` unless a plan is given."""
    if plan is None:
        if eps is None:
            raise ValueError("give either a tolerance or a plan")
        plan = select_parameters(system.n, system.box, eps, options)
    comps = compute_components(system, plan)
    return SolveResult(plan, comps, total_energy(comps.total, system))


def relative_error(phi: NDArray, reference: NDArray) -> float:
    """Relative max-norm error ``max|phi - ref| / max|ref|``."""
    ref = np.asarray(reference)
    scale = float(np.max(np.abs(ref)))
    if scale == 0.0:
        return float(np.max(np.abs(phi)))
    return float(np.max(np.abs(np.asarray(phi) - ref))) / scale
