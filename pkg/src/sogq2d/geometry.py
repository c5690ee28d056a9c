"""Particle systems in a box periodic in x and y, free in z, plus cell lists."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray


class GeometryError(ValueError):
    """Raised for invalid particle configurations or box parameters."""


@dataclass(frozen=True)
class ParticleSystem:
    """Point charges in a quasi-2D box.

    Parameters
    ----------
    positions : array_like, shape (N, 3)
        Particle coordinates. The box is centred on the origin.
    charges : array_like, shape (N,)
        Particle charges.
    box : array_like, shape (3,)
        Box lengths ``(Lx, Ly, Lz)``.
    neutrality_tol : float
        Allowed relative net charge ``|sum q| / sum |q|``.
    """

    positions: NDArray[np.float64]
    charges: NDArray[np.float64]
    box: NDArray[np.float64]
    neutrality_tol: float = 1e-12

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=np.float64, copy=True)
        q = np.array(self.charges, dtype=np.float64, copy=True).reshape(-1)
        box = np.array(self.box, dtype=np.float64, copy=True).reshape(-1)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise GeometryError(f"positions must have shape (N, 3), got {pos.shape}")
        if pos.shape[0] < 1:
            raise GeometryError("need at least one particle")
        if q.shape[0] != pos.shape[0]:
            raise GeometryError(f"{q.shape[0]} charges for {pos.shape[0]} positions")
        if box.shape != (3,) or not np.all(np.isfinite(box)) or np.any(box <= 0):
            raise GeometryError(f"box lengths must be three positive numbers, got {box}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(q))):
            raise GeometryError("non-finite positions or charges")
        total = float(np.sum(np.abs(q)))
        if total > 0 and abs(float(np.sum(q))) > self.neutrality_tol * total:
            raise GeometryError(
                f"system is not charge neutral: net charge {np.sum(q):.3e}, "
                f"sum |q| = {total:.3e}"
            )
        for arr in (pos, q, box):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", q)
        object.__setattr__(self, "box", box)

    @property
    def n(self) -> int:
        return int(self.charges.shape[0])

    @property
    def area(self) -> float:
        return float(self.box[0] * self.box[1])

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    def with_charges(self, charges: ArrayLike) -> "ParticleSystem":
        return ParticleSystem(self.positions, charges, self.box, self.neutrality_tol)

    def with_positions(self, positions: ArrayLike) -> "ParticleSystem":
        return ParticleSystem(positions, self.charges, self.box, self.neutrality_tol)


def wrap_periodic(x: NDArray, length: float) -> NDArray:
    """Wrap coordinates into ``[-length/2, length/2)``."""
    y = x - length * np.floor(x / length + 0.5)
    # floor can round to the upper edge for values just below it
    return np.where(y >= 0.5 * length, y - length, y)


def canonicalize(system: ParticleSystem) -> ParticleSystem:
    """Wrap x and y into the primary cell and check that z lies in the box.

    Raises
    ------
    GeometryError
        If any z coordinate lies outside ``[-Lz/2, Lz/2]``.
    """
    pos = np.array(system.positions)
    lx, ly, lz = system.box
    half = 0.5 * lz
    bad = np.flatnonzero(np.abs(pos[:, 2]) > half)
    if bad.size:
        raise GeometryError(
            f"particle {bad[0]} has z={pos[bad[0], 2]!r} outside [-{half}, {half}]"
        )
    pos[:, 0] = wrap_periodic(pos[:, 0], lx)
    pos[:, 1] = wrap_periodic(pos[:, 1], ly)
    return system.with_positions(pos)


def min_image_displacement(a: ArrayLike, b: ArrayLike, box: ArrayLike) -> NDArray:
    """Minimum-image displacement ``a - b``; z is never wrapped.

    Works on single points or on broadcastable ``(..., 3)`` arrays.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    box = np.asarray(box, dtype=np.float64)
    d = a - b
    out = np.empty(np.broadcast_shapes(d.shape), dtype=np.float64)
    out[..., 0] = wrap_periodic(d[..., 0], box[0])
    out[..., 1] = wrap_periodic(d[..., 1], box[1])
    out[..., 2] = d[..., 2]
    return out


@dataclass(frozen=True)
class CellList:
    """Particles binned into cells, periodic in x and y.

    ``order[start[c]:start[c + 1]]`` holds the particles of flat cell ``c``,
    where ``c = (ix * ny + iy) * nz + iz``.
    """

    box: NDArray[np.float64]
    r_c: float
    ncell: tuple[int, int, int]
    cell_size: NDArray[np.float64]
    cell_of: NDArray[np.int64]
    order: NDArray[np.int64]
    start: NDArray[np.int64]
    positions: NDArray[np.float64] = field(repr=False)

    def members(self, cell: int) -> NDArray[np.int64]:
        return self.order[self.start[cell] : self.start[cell + 1]]

    def cell_index(self, ix: int, iy: int, iz: int) -> int:
        _, ny, nz = self.ncell
        return (ix * ny + iy) * nz + iz

    def neighbor_cells(self, cell: int) -> list[int]:
        """Distinct cells adjacent to ``cell`` (including itself)."""
        nx, ny, nz = self.ncell
        ix, rem = divmod(int(cell), ny * nz)
        iy, iz = divmod(rem, nz)
        out = set()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    jz = iz + dz
                    if 0 <= jz < nz:
                        out.add(self.cell_index((ix + dx) % nx, (iy + dy) % ny, jz))
        return sorted(out)


def _cells_per_axis(length: float, r_c: float) -> int:
    return max(1, int(np.floor(length / r_c * (1 + 1e-12))))


def build_cell_list(system: ParticleSystem, r_c: float) -> CellList:
    """Bin the particles of a canonical system into cells of size ``>= r_c``.

    Raises
    ------
    GeometryError
        If ``r_c`` exceeds half the smaller periodic box length.
    """
    box = system.box
    if not r_c > 0:
        raise GeometryError(f"cutoff must be positive, got {r_c}")
    if r_c > 0.5 * min(box[0], box[1]) * (1 + 1e-12):
        raise GeometryError(
            f"cutoff {r_c} exceeds half the periodic box {min(box[0], box[1]) / 2}"
        )
    ncell = tuple(_cells_per_axis(float(L), r_c) for L in box)
    size = box / np.array(ncell)
    pos = system.positions
    idx = np.empty((system.n, 3), dtype=np.int64)
    for d in range(3):
        k = np.floor((pos[:, d] + 0.5 * box[d]) / size[d]).astype(np.int64)
        idx[:, d] = np.clip(k, 0, ncell[d] - 1)
    flat = (idx[:, 0] * ncell[1] + idx[:, 1]) * ncell[2] + idx[:, 2]
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=int(np.prod(ncell)))
    start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return CellList(
        box=box,
        r_c=float(r_c),
        ncell=ncell,  # type: ignore[arg-type]
        cell_size=size,
        cell_of=flat.astype(np.int64),
        order=order.astype(np.int64),
        start=start,
        positions=pos,
    )


def neighbors(cells: CellList, i: int) -> NDArray[np.int64]:
    """Indices ``j != i`` whose minimum-image distance to particle ``i`` is ``<= r_c``."""
    cand = np.concatenate([cells.members(c) for c in cells.neighbor_cells(cells.cell_of[i])])
    cand = cand[cand != i]
    d = min_image_displacement(cells.positions[i], cells.positions[cand], cells.box)
    r2 = np.einsum("ij,ij->i", d, d)
    return np.sort(cand[r2 <= cells.r_c**2])


def brute_force_neighbors(system: ParticleSystem, r_c: float) -> list[NDArray[np.int64]]:
    """O(N^2) reference neighbour sets."""
    d = min_image_displacement(system.positions[:, None, :], system.positions[None, :, :], system.box)
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, np.inf)
    return [np.flatnonzero(row <= r_c**2) for row in r2]


def random_system(
    n: int,
    box: ArrayLike,
    seed: int | None = None,
    valence: float = 1.0,
) -> ParticleSystem:
    """Uniform random positions with alternating +/- charges (``n`` even)."""
    if n % 2:
        raise GeometryError("a neutral monovalent system needs an even particle count")
    rng = np.random.default_rng(seed)
    box = np.asarray(box, dtype=np.float64)
    pos = (rng.random((n, 3)) - 0.5) * box
    q = valence * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return ParticleSystem(pos, q, box)
