import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sogq2d.geometry import GeometryError, ParticleSystem, build_cell_list, random_system
from sogq2d.near_field import RadialTable, near_potential, self_potential, total_energy
from sogq2d.sog import PRESETS, SogDecomposition, far_kernel, near_kernel

BOX = (4.0, 4.0, 3.0)


def decomp(r_c=1.0, preset=PRESETS[3]):
    return SogDecomposition.from_preset(preset, r_c, preset.M_energy)


def brute_near(system, d):
    out = np.zeros(system.n)
    Lx, Ly, _ = system.box
    for i in range(system.n):
        for j in range(system.n):
            for nx in (-1, 0, 1):
                for ny in (-1, 0, 1):
                    if i == j and nx == 0 and ny == 0:
                        continue
                    r = system.positions[i] - system.positions[j] + (nx * Lx, ny * Ly, 0.0)
                    dist = np.linalg.norm(r)
                    if dist < d.r_c:
                        out[i] += system.charges[j] * near_kernel(d, dist)
    return out


def test_single_pair():
    d = decomp()
    s = ParticleSystem([(0.1, 0.2, 0.0), (0.4, -0.2, 0.3)], [1.5, -1.5], BOX)
    r = float(np.linalg.norm(s.positions[0] - s.positions[1]))
    phi = near_potential(s, d)
    assert phi[0] == pytest.approx(-1.5 * float(near_kernel(d, r)), rel=1e-13)
    assert phi[1] == pytest.approx(1.5 * float(near_kernel(d, r)), rel=1e-13)


def test_pair_across_periodic_boundary():
    d = decomp()
    s = ParticleSystem([(1.9, 0.0, 0.0), (-1.8, 0.0, 0.0)], [1.0, -1.0], BOX)
    phi = near_potential(s, d)
    assert phi[0] == pytest.approx(-float(near_kernel(d, 0.3)), rel=1e-12)


def test_no_periodicity_in_z():
    d = decomp()
    s = ParticleSystem([(0.0, 0.0, 1.45), (0.0, 0.0, -1.45)], [1.0, -1.0], BOX)
    np.testing.assert_array_equal(near_potential(s, d), 0.0)


def test_far_apart_pairs_give_zero():
    d = decomp(r_c=0.5)
    s = ParticleSystem([(-1.0, -1.0, 0.0), (1.0, 1.0, 0.0)], [1.0, -1.0], BOX)
    np.testing.assert_array_equal(near_potential(s, d), 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_matches_brute_force(seed):
    d = decomp(r_c=1.3)
    s = random_system(50, BOX, seed=seed)
    np.testing.assert_allclose(near_potential(s, d), brute_near(s, d), rtol=0, atol=1e-12)


def test_table_and_direct_paths_agree():
    d = decomp(r_c=1.3, preset=PRESETS[5])
    s = random_system(200, BOX, seed=3)
    cells = build_cell_list(s, d.r_c)
    a = near_potential(s, d, cells, use_table=True)
    b = near_potential(s, d, cells, use_table=False)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@pytest.mark.parametrize("p", PRESETS, ids=lambda p: f"b={p.b:.4f}")
def test_radial_table_accuracy(p):
    d = SogDecomposition.from_preset(p, 2.0, p.M_energy)
    tab = RadialTable.build(d)
    r = np.linspace(0, d.r_c, 5001)
    err = np.max(np.abs(tab(r) - far_kernel(d, r)))
    assert err <= 1e-14 * d.self_coefficient


def test_self_term_closed_form():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    d = SogDecomposition(2.0, 1.0, 1.0, 2.0, 0)
    s = ParticleSystem([(0, 0, 0), (0.5, 0, 0)], [2.0, -2.0], BOX)
    w0 = float(mpmath.sqrt(2 / mpmath.pi) * mpmath.log(2))
    np.testing.assert_allclose(self_potential(s, d), [2 * w0, -2 * w0], rtol=1e-15)


def test_self_term_zero_and_linear():
    d = decomp()
    s = random_system(10, BOX, seed=0)
    np.testing.assert_array_equal(self_potential(s.with_charges(np.zeros(10)), d), 0.0)
    np.testing.assert_allclose(self_potential(s.with_charges(2 * s.charges), d), 2 * self_potential(s, d))


def test_total_energy():
    d = decomp()
    s = ParticleSystem([(0.0, 0.0, 0.0), (0.3, 0.0, 0.0)], [1.0, -1.0], BOX)
    U = total_energy(near_potential(s, d), s)
    assert U == pytest.approx(-float(near_kernel(d, 0.3)), rel=1e-13)
    z = s.with_charges([0.0, 0.0])
    assert total_energy(near_potential(z, d), z) == 0.0
    with pytest.raises(ValueError):
        total_energy(np.zeros(3), s)


def test_coincident_particles_rejected():
    s = ParticleSystem([(0.5, 0.0, 0.0), (0.5, 0.0, 0.0)], [1.0, -1.0], BOX)
    with pytest.raises(GeometryError, match="coincide"):
        near_potential(s, decomp())


@given(st.floats(-1.9, 1.9), st.floats(-1.9, 1.9), st.floats(-1.4, 1.4))
def test_antisymmetric_pair(x, y, z):
    assume(x * x + y * y + z * z > 1e-12)
    d = decomp()
    s = ParticleSystem([(0.0, 0.0, 0.0), (x, y, z)], [1.0, -1.0], BOX)
    phi = near_potential(s, d)
    assert phi[0] == pytest.approx(-phi[1], abs=1e-14)
