import math

import numpy as np
import pytest

from sogq2d.geometry import ParticleSystem, random_system
from sogq2d.oracle import (
    OracleError,
    direct_shell_sum,
    ewald2d_potentials,
    gaussian_lattice_sum,
    reference_energy,
    sog_lattice_potentials,
)
from sogq2d.sog import PRESETS, SogDecomposition
from sogq2d.solver import relative_error

UNIT = (1.0, 1.0, 1.0)


def test_isolated_pair_limit():
    box = (1000.0, 1000.0, 10.0)
    s = ParticleSystem([(0.0, 0.0, 0.0), (0.3, 0.4, 0.0)], [1.0, -1.0], box)
    phi = ewald2d_potentials(s)
    assert phi[0] == pytest.approx(-1 / 0.5, rel=1e-5)
    phi = direct_shell_sum(s).potentials
    assert phi[0] == pytest.approx(-1 / 0.5, rel=1e-5)


def test_zero_charges():
    s = random_system(10, UNIT, seed=0).with_charges(np.zeros(10))
    np.testing.assert_array_equal(direct_shell_sum(s).potentials, 0.0)
    np.testing.assert_array_equal(ewald2d_potentials(s), 0.0)
    assert reference_energy(s) == 0.0


def test_pair_energy_negative():
    s = ParticleSystem([(0.1, 0.0, 0.0), (-0.1, 0.0, 0.0)], [1.0, -1.0], UNIT)
    assert reference_energy(s, method="shell") < 0
    assert reference_energy(s) < 0
    with pytest.raises(ValueError):
        reference_energy(s, method="pppm")


@pytest.mark.parametrize("box", [UNIT, (2.0, 2.0, 0.5)])
def test_shell_sum_and_ewald_agree(box):
    s = random_system(100, box, seed=1)
    shell = direct_shell_sum(s).potentials
    ewald = ewald2d_potentials(s)
    assert relative_error(shell, ewald) < 1e-12


def test_shell_sum_self_refinement():
    s = random_system(100, UNIT, seed=2)
    a = direct_shell_sum(s, tol=1e-13)
    b = direct_shell_sum(s, tol=5e-14, shell_limit=512)
    assert relative_error(a.potentials, b.potentials) < 1e-12
    assert b.shells >= a.shells


def test_shell_sum_reports_non_convergence():
    s = random_system(20, UNIT, seed=3)
    with pytest.raises(OracleError, match="not converged"):
        direct_shell_sum(s, shell_limit=25, tol=1e-30)
    with pytest.raises(OracleError):
        direct_shell_sum(s, max_particles=10)


def test_ewald_alpha_independent():
    s = random_system(50, (3.0, 3.0, 2.0), seed=4)
    a = ewald2d_potentials(s, alpha=0.5)
    b = ewald2d_potentials(s, alpha=0.9)
    assert relative_error(a, b) < 1e-13


def test_targets_subset():
    s = random_system(30, UNIT, seed=5)
    full = ewald2d_potentials(s)
    np.testing.assert_allclose(ewald2d_potentials(s, targets=np.array([3, 7])), full[[3, 7]], rtol=1e-14)


def test_lattice_translation_invariance():
    s = random_system(40, UNIT, seed=6)
    moved = s.with_positions(s.positions + (1.0, 0.0, 0.0))
    assert relative_error(ewald2d_potentials(moved), ewald2d_potentials(s)) < 1e-13
    a = direct_shell_sum(s).potentials
    b = direct_shell_sum(moved).potentials
    assert relative_error(a, b) < 1e-12


def test_gaussian_lattice_sum_brute_force():
    box = (2.0, 3.0, 1.5)
    s = random_system(8, box, seed=7)
    w = np.array([0.7, 0.3])
    sig = np.array([0.5, 1.9])
    ref = np.zeros(s.n)
    n = np.arange(-12, 13)
    for i in range(s.n):
        for j in range(s.n):
            d = s.positions[i] - s.positions[j]
            dx = d[0] + n[:, None] * box[0]
            dy = d[1] + n[None, :] * box[1]
            r2 = dx**2 + dy**2 + d[2] ** 2
            ref[i] += s.charges[j] * np.sum(np.exp(-r2[..., None] / sig**2) @ w)
    np.testing.assert_allclose(gaussian_lattice_sum(s, w, sig, digits=8.5), ref, atol=1e-13)


def test_sog_lattice_close_to_coulomb():
    p = PRESETS[5]
    s = random_system(50, UNIT, seed=8)
    d = SogDecomposition.from_preset(p, 0.3, p.M_energy)
    assert relative_error(sog_lattice_potentials(s, d), ewald2d_potentials(s)) < 1e-12
