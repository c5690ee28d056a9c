"""Near-field pair sum and the self term of the SOG splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.typing import ArrayLike, NDArray

from .geometry import CellList, GeometryError, ParticleSystem, build_cell_list
from .sog import SogDecomposition, far_kernel


@dataclass(frozen=True)
class RadialTable:
    """Piecewise Chebyshev fit of ``F(sqrt(v))`` for ``v = r^2`` in ``[0, r_c^2]``.

    ``F`` is entire in ``r^2``, so a modest number of pieces reaches rounding
    level and the cost per pair no longer depends on ``M``.
    """

    coeffs: NDArray[np.float64]  # (n_pieces, degree + 1)
    v_max: float
    max_error: float

    @classmethod
    def build(
        cls, decomp: SogDecomposition, degree: int = 16, pieces: int = 32, tol: float = 4e-15
    ) -> "RadialTable":
        v_max = decomp.r_c**2
        scale = decomp.self_coefficient
        xl = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
        check = np.linspace(-1.0, 1.0, 65)
        while True:
            edges = np.linspace(0.0, v_max, pieces + 1)
            coeffs = np.empty((pieces, degree + 1))
            err = 0.0
            for p in range(pieces):
                a, b = edges[p], edges[p + 1]
                f = lambda x: far_kernel(decomp, np.sqrt(0.5 * (a + b) + 0.5 * (b - a) * x))
                coeffs[p] = C.chebfit(xl, f(xl), degree)
                err = max(err, float(np.max(np.abs(C.chebval(check, coeffs[p]) - f(check)))))
            if err <= tol * scale or pieces >= 4096:
                return cls(coeffs, v_max, err)
            pieces *= 2

    def __call__(self, r: ArrayLike) -> NDArray[np.float64]:
        v = np.asarray(r, dtype=np.float64) ** 2
        out = np.empty(v.shape)
        _table_eval_many(v.reshape(-1), self.coeffs, self.v_max, out.reshape(-1))
        return out


@numba.njit(cache=True, inline="always")
def _table_eval(v, coeffs, v_max):
    n = coeffs.shape[0]
    t = v / v_max * n
    p = int(t)
    if p >= n:
        p = n - 1
    x = 2.0 * (t - p) - 1.0
    deg = coeffs.shape[1] - 1
    b1 = 0.0
    b2 = 0.0
    for k in range(deg, 0, -1):
        b1, b2 = 2.0 * x * b1 - b2 + coeffs[p, k], b1
    return x * b1 - b2 + coeffs[p, 0]


@numba.njit(cache=True)
def _table_eval_many(v, coeffs, v_max, out):
    for i in range(v.shape[0]):
        out[i] = _table_eval(v[i], coeffs, v_max)


@numba.njit(cache=True, inline="always")
def _far_direct(r2, weights, inv_s2):
    acc = 0.0
    for l in range(weights.shape[0]):
        acc += weights[l] * np.exp(-r2 * inv_s2[l])
    return acc


@numba.njit(cache=True)
def _near_sum(pos, q, box, order, start, cell_of, nbr, rc2, use_table, coeffs, weights, inv_s2, out):
    lx, ly = box[0], box[1]
    n = pos.shape[0]
    for i in range(n):
        xi, yi, zi = pos[i, 0], pos[i, 1], pos[i, 2]
        acc = 0.0
        ci = cell_of[i]
        for a in range(nbr.shape[1]):
            c = nbr[ci, a]
            if c < 0:
                break
            for s in range(start[c], start[c + 1]):
                j = order[s]
                if j == i:
                    continue
                dx = xi - pos[j, 0]
                dx -= lx * np.floor(dx / lx + 0.5)
                dy = yi - pos[j, 1]
                dy -= ly * np.floor(dy / ly + 0.5)
                dz = zi - pos[j, 2]
                r2 = dx * dx + dy * dy + dz * dz
                if r2 < rc2:
                    if use_table:
                        f = _table_eval(r2, coeffs, rc2)
                    else:
                        f = _far_direct(r2, weights, inv_s2)
                    acc += q[j] * (1.0 / np.sqrt(r2) - f)
        out[i] = acc


def _neighbor_table(cells: CellList) -> NDArray[np.int64]:
    ncells = int(np.prod(cells.ncell))
    tab = -np.ones((ncells, 27), dtype=np.int64)
    for c in range(ncells):
        nb = cells.neighbor_cells(c)
        tab[c, : len(nb)] = nb
    return tab


def near_potential(
    system: ParticleSystem,
    decomp: SogDecomposition,
    cells: CellList | None = None,
    table: RadialTable | None = None,
    use_table: bool = True,
) -> NDArray[np.float64]:
    """Near-field potential ``sum_j q_j (1/r_ij - F(r_ij))`` over pairs with ``r_ij < r_c``.

    Parameters
    ----------
    cells : CellList, optional
        Built from ``system`` with cutoff ``decomp.r_c`` if omitted.
    table : RadialTable, optional
        Precomputed fit of the far kernel; built on demand.
    use_table : bool
        Evaluate the far kernel from the table instead of summing Gaussians.
    """
    if cells is None:
        cells = build_cell_list(system, decomp.r_c)
    if use_table and table is None:
        table = RadialTable.build(decomp)
    coeffs = table.coeffs if use_table else np.zeros((1, 1))
    out = np.empty(system.n)
    try:
        _near_sum(
            np.ascontiguousarray(system.positions),
            np.ascontiguousarray(system.charges),
            np.ascontiguousarray(system.box),
            cells.order,
            cells.start,
            cells.cell_of,
            _neighbor_table(cells),
            decomp.r_c**2,
            use_table,
            coeffs,
            np.ascontiguousarray(decomp.weights),
            1.0 / decomp.nodes**2,
            out,
        )
    except ZeroDivisionError:
        raise GeometryError("two particles coincide (up to periodic images)") from None
    return out


def self_potential(system: ParticleSystem, decomp: SogDecomposition) -> NDArray[np.float64]:
    """``q_i sum_l w_l``, the i = j term contained in the far part."""
    return system.charges * decomp.self_coefficient


def total_energy(potentials: ArrayLike, system: ParticleSystem) -> float:
    """``U = (1/2) sum_i q_i phi_i``."""
    phi = np.asarray(potentials, dtype=np.float64)
    if phi.shape != system.charges.shape:
        raise ValueError(f"{phi.shape[0] if phi.ndim else 0} potentials for {system.n} particles")
    return 0.5 * float(np.dot(system.charges, phi))
