import math

import numpy as np
import pytest

from sogq2d.geometry import ParticleSystem, random_system
from sogq2d.mid_range import (
    GridSpec,
    PlanError,
    gather,
    gridding,
    make_mid_plan,
    mid_range_potential,
)
from sogq2d.sog import PRESETS, SogDecomposition
from sogq2d.windows import WindowKind, window_value

BOX = (4.0, 4.0, 4.0)
PRESET = PRESETS[2]


def decomp(eta=0.3, box=BOX):
    d = SogDecomposition.from_preset(PRESET, 1.0, PRESET.M_energy)
    return d.with_split(box[2], eta)


def plan(d=None, I=40, P=17, kind=WindowKind.KB, lam=2.5, box=BOX, **kw):
    return make_mid_plan(d or decomp(box=box), box, (I, I, I), P, kind=kind, lambda_z=lam, **kw)


def brute_mid(system, d):
    """Real-space image sum of the mid-range Gaussians, self term included."""
    w, s = d.weights[d.mid_slice], d.nodes[d.mid_slice]
    Lx, Ly, _ = system.box
    nmax = int(math.ceil(7 * s[-1] / min(Lx, Ly))) + 1
    n = np.arange(-nmax, nmax + 1)
    shifts = np.stack(np.meshgrid(n * Lx, n * Ly, indexing="ij"), -1).reshape(-1, 2)
    out = np.zeros(system.n)
    for i in range(system.n):
        r = system.positions[i] - system.positions
        dx = r[:, None, 0] + shifts[None, :, 0]
        dy = r[:, None, 1] + shifts[None, :, 1]
        r2 = dx**2 + dy**2 + r[:, None, 2] ** 2
        g = np.exp(-r2[..., None] / s**2) @ w
        out[i] = system.charges @ g.sum(axis=1)
    return out


def test_grid_spec_counts():
    g = GridSpec((8, 8, 10), (1.0, 1.0, 2.0), lambda_z=1.5, delta_z=0.45)
    assert g.delta_Iz == 3
    assert g.Iz_star == 2 * math.ceil(1.5 * 13 / 2)
    assert g.Iz_star % 2 == 0
    assert g.Lz_star == pytest.approx(g.mesh[2] * g.Iz_star, rel=0, abs=0)
    with pytest.raises(PlanError):
        GridSpec((7, 8, 8), BOX)
    with pytest.raises(PlanError):
        GridSpec((8, 8, 8), BOX, lambda_z=0.9)


def test_no_upsampling():
    p = plan()
    assert p.grid.shape[:2] == p.grid.counts[:2]
    assert p.multiplier.shape == (p.grid.shape[0], p.grid.shape[1], p.grid.shape[2] // 2 + 1)
    s = random_system(10, BOX, seed=0)
    assert gridding(s, p).shape == p.grid.shape


def test_multiplier_at_zero():
    p = plan()
    d = p.decomp
    sl = d.mid_slice
    G0 = math.pi**1.5 * np.sum(d.weights[sl] * d.nodes[sl] ** 3)
    from sogq2d.windows import window_hat
    W0 = np.prod([window_hat(p.window, a, 0.0) for a in range(3)])
    assert p.multiplier[0, 0, 0] == pytest.approx(G0 / W0**2, rel=1e-13)


def test_single_gaussian_multiplier_ratio():
    d = SogDecomposition(2.0, 0.3, 1.0, 1.0, 3).with_split(4.0, 0.15)
    assert d.split_index == 0
    p = make_mid_plan(d, BOX, (32, 32, 32), 13, kind=WindowKind.GAUSSIAN, lambda_z=2.0)
    from sogq2d.windows import window_hat
    kx = p.grid.wavenumbers()[0]
    k, k2 = kx[1], kx[2]
    s0 = d.nodes[0]
    ratio = p.multiplier[2, 0, 0] / p.multiplier[1, 0, 0]
    wr = window_hat(p.window, 0, k) / window_hat(p.window, 0, k2)
    assert ratio == pytest.approx(math.exp(-s0**2 * (k2**2 - k**2) / 4) * wr**2, rel=1e-12)


def test_single_charge_stencil():
    p = plan(P=7, kind=WindowKind.GAUSSIAN, I=20)
    h = p.grid.mesh
    o = p.grid.origin
    # charge exactly on grid point (10, 10, c)
    c = p.grid.Iz_star // 2
    pos = (o[0] + 10 * h[0], o[1] + 10 * h[1], o[2] + c * h[2])
    s = ParticleSystem([pos], [1.0], BOX, neutrality_tol=math.inf)
    S = gridding(s, p)
    off = np.arange(-3, 4)
    wx = window_value(p.window, 0, off * h[0])
    expected = np.einsum("i,j,k->ijk", wx, wx, window_value(p.window, 2, off * h[2]))
    np.testing.assert_allclose(S[7:14, 7:14, c - 3:c + 4], expected, atol=1e-15)
    assert S.sum() == pytest.approx(expected.sum(), rel=1e-14)


def test_gridding_linear_and_neutral():
    p = plan(I=24, P=9)
    s = random_system(20, BOX, seed=1)
    S = gridding(s, p)
    # stencil sums depend on the sub-cell offset only through window aliasing
    assert abs(S.sum()) < 1e-6 * np.abs(S).sum()
    s2 = ParticleSystem(np.vstack([s.positions, s.positions]), np.concatenate([s.charges, s.charges]) / 2, BOX)
    np.testing.assert_allclose(gridding(s2, p), S, atol=1e-14)


def test_gather_is_adjoint_of_gridding(rng):
    p = plan(I=24, P=9)
    s = random_system(20, BOX, seed=2)
    G = rng.normal(size=p.grid.shape)
    vol = float(np.prod(p.grid.mesh))
    lhs = float(np.sum(gridding(s, p) * G))
    rhs = float(s.charges @ gather(G, ParticleSystem(s.positions, np.ones(s.n), BOX, neutrality_tol=math.inf), p)) / vol
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_all_long_range_gives_zero():
    d = SogDecomposition.from_preset(PRESET, 1.0, 46).with_split(4.0, 0.01)
    assert d.split_index == -1
    p = make_mid_plan(d, BOX, (16, 16, 16), 7, kind=WindowKind.KB)
    s = random_system(10, BOX, seed=0)
    np.testing.assert_array_equal(mid_range_potential(s, p), 0.0)


@pytest.mark.parametrize("kind,P", [(WindowKind.KB, 17), (WindowKind.ES, 19), (WindowKind.GAUSSIAN, 25)])
def test_matches_direct_sum(kind, P):
    s = random_system(10, BOX, seed=4)
    d = decomp()
    assert d.split_index >= 1
    phi = mid_range_potential(s, plan(d, P=P, kind=kind))
    ref = brute_mid(s, d)
    assert np.max(np.abs(phi - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_mirror_pair_antisymmetric():
    s = ParticleSystem([(0.3, -0.7, 0.4), (-0.3, 0.7, -0.4)], [1.0, -1.0], BOX)
    phi = mid_range_potential(s, plan())
    assert phi[0] == pytest.approx(-phi[1], rel=1e-10)


def test_translation_by_grid_cell():
    p = plan(I=32, P=13)
    s = random_system(30, BOX, seed=5)
    phi = mid_range_potential(s, p)
    shifted = s.with_positions(s.positions + (p.grid.mesh[0], 0.0, 0.0))
    np.testing.assert_allclose(mid_range_potential(shifted, p), phi, rtol=0, atol=1e-12 * np.max(np.abs(phi)))


def test_translation_in_z_within_tolerance():
    p = plan()
    s = random_system(30, (4.0, 4.0, 3.0), seed=6)
    s = ParticleSystem(s.positions, s.charges, BOX)
    phi = mid_range_potential(s, p)
    moved = s.with_positions(s.positions + (0.0, 0.0, 0.37))
    np.testing.assert_allclose(mid_range_potential(moved, p), phi, rtol=0, atol=1e-9 * np.max(np.abs(phi)))


def test_window_normalisation_cancels():
    s = random_system(10, BOX, seed=7)
    d = decomp()
    a = mid_range_potential(s, plan(d, P=17, kind=WindowKind.KB))
    b = mid_range_potential(s, plan(d, P=17, kind=WindowKind.KB, poly_degree=16))
    np.testing.assert_allclose(a, b, atol=1e-11 * np.max(np.abs(a)))


def test_strict_plan_rejects_wide_gaussian_window():
    d = decomp()
    with pytest.raises(PlanError):
        make_mid_plan(d, BOX, (8, 8, 8), 7, kind=WindowKind.GAUSSIAN, shape=0.5)
    make_mid_plan(d, BOX, (8, 8, 8), 7, kind=WindowKind.GAUSSIAN, shape=0.5, strict=False)


def test_padding_must_contain_support():
    d = decomp()
    with pytest.raises(PlanError):
        make_mid_plan(d, BOX, (16, 16, 16), 9, kind=WindowKind.KB, delta_factor=0.0)
