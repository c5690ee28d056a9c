"""Spectral sum-of-Gaussians Coulomb solver for quasi-2D systems.

Systems are periodic in x and y and free in z.  The Coulomb kernel is split
into a compactly supported near part and a sum of Gaussians; narrow
Gaussians go through a zero-padded 3D FFT solver and wide ones through a
Fourier-Chebyshev solver with Chebyshev proxies in z.
"""

from .geometry import GeometryError, ParticleSystem, canonicalize, random_system
from .long_range import LongMode, LongRangePlan, make_long_plan
from .mid_range import MidRangePlan, PlanError, make_mid_plan
from .oracle import direct_shell_sum, ewald2d_potentials, reference_energy
from .params import InfeasibleError, SelectionOptions, SolverPlan, predict_cost, select_parameters
from .sog import PRESETS, Preset, SogDecomposition, solve_c1_continuity
from .solver import PotentialComponents, SolveResult, compute_components, relative_error, solve
from .windows import WindowKind, WindowSpec

__all__ = [
    "GeometryError", "ParticleSystem", "canonicalize", "random_system",
    "LongMode", "LongRangePlan", "make_long_plan",
    "MidRangePlan", "PlanError", "make_mid_plan",
    "direct_shell_sum", "ewald2d_potentials", "reference_energy",
    "InfeasibleError", "SelectionOptions", "SolverPlan", "predict_cost", "select_parameters",
    "PRESETS", "Preset", "SogDecomposition", "solve_c1_continuity",
    "PotentialComponents", "SolveResult", "compute_components", "relative_error", "solve",
    "WindowKind", "WindowSpec",
]
