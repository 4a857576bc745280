"""Hamiltonian deformations: generator structure, reversibility, the angle
variation law and the two second-variation routes."""

import numpy as np
import pytest

from lagflow import families
from lagflow.deformations import (angle_variation_residual, deform,
                                  hamiltonian_form_residual,
                                  second_variation)
from lagflow.errors import NotMinimal, SpectrumTruncation
from lagflow.geometry import geometry
from lagflow.spectral import laplace_apply, lowest_eigenpairs


def unit_param(N):
    return np.arange(N) / N


def test_deform_zero_potential_is_identity():
    imm = families.sphere_circle(64)
    out = deform(imm, np.zeros(64), 0.02)
    assert np.array_equal(out.coords, imm.coords)


def test_deform_reversibility_third_order():
    imm = families.sphere_circle(128)
    f = np.cos(2 * np.pi * 2 * unit_param(128))
    errs = {}
    for s in (0.02, 0.01):
        there = deform(imm, f, s, substep=np.inf)    # single RK2 step
        back = deform(there, f, -s, substep=np.inf)
        errs[s] = np.max(np.abs(back.coords - imm.coords))
    assert errs[0.02] / errs[0.01] > 6.0   # O(s^3) per step pair


def test_generator_is_hamiltonian():
    # i_X omega + df vanishes identically on the grid: J^2 = -Id makes both
    # sides the same central difference
    imm = families.clifford_torus(32)
    f = families.torus_mode_field(imm.topology, 2)
    assert hamiltonian_form_residual(imm, f) < 1e-12
    circ = families.sphere_circle(64)
    assert hamiltonian_form_residual(circ, np.sin(2 * np.pi * unit_param(64))) < 1e-12


def test_flat_graph_pushforward_matches_analytic():
    # moving the flat geodesic along f = (a/2pi) cos(2 pi u) tips the graph
    # to y = -a sin(2 pi u) + O(a^2)
    N, a = 256, 1e-3
    base = families.flat_line(N)
    u = unit_param(N)
    f = (a / (2 * np.pi)) * np.cos(2 * np.pi * u)
    out = deform(base, f, 1.0, substep=0.25)
    target = -a * np.sin(2 * np.pi * u)
    assert np.max(np.abs(out.coords[:, 1] - target)) < 5e-3 * a + 1e-12


def test_first_eigenspace_deformation_nearly_neutral():
    # deforming the great circle along eta_1 is a rigid motion to second
    # order: the mean curvature it creates stays at the s^3 / du^2 floor
    N, s = 8192, 5e-3
    base = families.sphere_circle(N)
    f = np.cos(2 * np.pi * unit_param(N))
    out = deform(base, f, s, substep=np.inf)
    assert geometry(out).max_h < 1e-4 * s


def test_angle_variation_residual_sphere_and_flat():
    N = 2048
    base = families.sphere_circle(N)
    u = unit_param(N)
    f = np.cos(2 * np.pi * 2 * u)
    res = angle_variation_residual(base, f, ds=1e-3)
    scale = np.max(np.abs(laplace_apply(geometry(base), f)))
    assert res < 0.01 * scale
    flat = families.flat_line(2048)
    res2 = angle_variation_residual(flat, f, ds=1e-3)
    scale2 = np.max(np.abs(laplace_apply(geometry(flat), f)))
    assert res2 < 0.01 * scale2


def test_angle_variation_zero_potential():
    base = families.flat_line(128)
    assert angle_variation_residual(base, np.zeros(128), ds=1e-3) < 1e-12


def test_not_minimal_guard():
    bent = families.flat_graph(128, amplitude=0.01)
    with pytest.raises(NotMinimal):
        angle_variation_residual(bent, np.zeros(128))


def test_second_variation_great_circle_mode2():
    N = 2048
    base = families.sphere_circle(N)
    spec = lowest_eigenpairs(base, 6)
    # unit-norm second eigenfunction: lambda = 4, value 4 (4 - 1) = 12
    f = spec.eigenfunctions[2].reshape(N)
    out = second_variation(base, f, ds=1e-3, k=6, spectrum=spec)
    assert out['spectral_value'] == pytest.approx(12.0, rel=5e-3)
    assert out['fd_value'] == pytest.approx(out['spectral_value'], rel=0.05)
    assert out['fd_value_coarse'] == pytest.approx(out['fd_value'], rel=0.05)


def test_second_variation_neutral_direction():
    N = 2048
    base = families.sphere_circle(N)
    spec = lowest_eigenpairs(base, 6)
    f = spec.eigenfunctions[0].reshape(N)
    out = second_variation(base, f, ds=1e-3, k=6, spectrum=spec)
    # both routes vanish at the scale of the mode-2 value (12)
    assert abs(out['spectral_value']) < 0.6
    assert abs(out['fd_value']) < 0.6


def test_second_variation_truncation_guard():
    N = 2048
    base = families.sphere_circle(N)
    f = np.cos(2 * np.pi * 5 * unit_param(N))   # lambda = 25: outside k=6
    with pytest.raises(SpectrumTruncation):
        second_variation(base, f, ds=1e-3, k=6)
