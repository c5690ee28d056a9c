"""Separable spreading to and interpolation from regular grids (numba kernels)."""

from __future__ import annotations

import numba
import numpy as np
from numpy.typing import NDArray


@numba.njit(cache=True)
def spread3d(q, fx, wx, fy, wy, fz, wz, nx, ny, nz, wrap_z):
    """Add ``q_i wx wy wz`` onto a ``(nx, ny, nz)`` grid; x and y wrap, z wraps iff ``wrap_z``."""
    grid = np.zeros((nx, ny, nz))
    px, py, pz = wx.shape[1], wy.shape[1], wz.shape[1]
    for i in range(q.shape[0]):
        qi = q[i]
        for a in range(px):
            ix = (fx[i] + a) % nx
            va = qi * wx[i, a]
            for b in range(py):
                iy = (fy[i] + b) % ny
                vb = va * wy[i, b]
                for c in range(pz):
                    iz = fz[i] + c
                    if wrap_z:
                        iz = iz % nz
                    grid[ix, iy, iz] += vb * wz[i, c]
    return grid


@numba.njit(cache=True)
def gather3d(grid, fx, wx, fy, wy, fz, wz, wrap_z):
    """Adjoint of :func:`spread3d` with unit charges."""
    nx, ny, nz = grid.shape
    n = fx.shape[0]
    out = np.empty(n)
    px, py, pz = wx.shape[1], wy.shape[1], wz.shape[1]
    for i in range(n):
        acc = 0.0
        for a in range(px):
            ix = (fx[i] + a) % nx
            for b in range(py):
                iy = (fy[i] + b) % ny
                vb = wx[i, a] * wy[i, b]
                s = 0.0
                for c in range(pz):
                    iz = fz[i] + c
                    if wrap_z:
                        iz = iz % nz
                    s += grid[ix, iy, iz] * wz[i, c]
                acc += vb * s
        out[i] = acc
    return out


@numba.njit(cache=True)
def spread2d_layers(q, fx, wx, fy, wy, layers, nx, ny):
    """Spread ``q_i layers[i, p]`` onto a stack of 2D grids ``(p, nx, ny)``."""
    npl = layers.shape[1]
    grid = np.zeros((npl, nx, ny))
    px, py = wx.shape[1], wy.shape[1]
    for i in range(q.shape[0]):
        for a in range(px):
            ix = (fx[i] + a) % nx
            va = q[i] * wx[i, a]
            for b in range(py):
                iy = (fy[i] + b) % ny
                vb = va * wy[i, b]
                for p in range(npl):
                    grid[p, ix, iy] += vb * layers[i, p]
    return grid


@numba.njit(cache=True)
def gather2d_layers(grid, fx, wx, fy, wy, layers):
    """``sum_p layers[i, p] sum_stencil W grid[p]`` for each particle."""
    npl, nx, ny = grid.shape
    n = fx.shape[0]
    out = np.empty(n)
    px, py = wx.shape[1], wy.shape[1]
    for i in range(n):
        acc = 0.0
        for a in range(px):
            ix = (fx[i] + a) % nx
            for b in range(py):
                iy = (fy[i] + b) % ny
                w = wx[i, a] * wy[i, b]
                s = 0.0
                for p in range(npl):
                    s += grid[p, ix, iy] * layers[i, p]
                acc += w * s
        out[i] = acc
    return out


def as_index(a: NDArray) -> NDArray[np.int64]:
    return np.ascontiguousarray(a, dtype=np.int64)
