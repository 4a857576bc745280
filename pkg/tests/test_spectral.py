"""Discrete spectra against closed forms: circles, flat tori and the
Clifford torus, plus operator structure and variation classification."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from lagflow import families
from lagflow.errors import ClusterAmbiguous, NoConvergence
from lagflow.geometry import GridTopology, Immersion
from lagflow.spectral import (classify_variation, laplace_apply,
                              lowest_eigenpairs, operator_matrices)


def identity_torus(N=32):
    """Unit-square flat torus immersed as the identity (n = 2)."""
    space = families.FlatTorus(2)
    topo = GridTopology((N, N))
    u1, u2 = topo.mesh()
    coords = np.stack([u1, np.zeros_like(u1), u2, np.zeros_like(u2)], axis=-1)
    jump = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    return Immersion(topo, coords, space, 0.0, jump)


def test_laplace_constant_is_zero():
    imm = families.flat_circle(64, radius=0.2)
    out = laplace_apply(imm, np.ones(64))
    assert np.max(np.abs(out)) < 1e-12


def test_laplace_circle_modes():
    imm = families.flat_circle(128, radius=1.0 / (2 * np.pi))  # unit length
    u = np.arange(128) / 128.0
    for m in (1, 2, 3, 4):
        f = np.sin(2 * np.pi * m * u)
        out = laplace_apply(imm, f)
        lam = (2 * np.pi * m) ** 2
        assert np.max(np.abs(-out - lam * f)) / lam < 0.01
    # unit-radius circle: eigenvalue of mode m is m^2
    imm2 = families.sphere_circle(128, amplitude=0.0)
    s = np.arange(128) / 128.0
    f = np.sin(2 * np.pi * 2 * s)
    out = laplace_apply(imm2, f)
    assert np.max(np.abs(-out - 4.0 * f)) / 4.0 < 0.01


def test_laplace_identity_torus_mode():
    imm = identity_torus(32)
    f = families.torus_mode_field(imm.topology, 1)
    out = laplace_apply(imm, f)
    lam = 4 * np.pi ** 2
    assert np.max(np.abs(-out - lam * f)) / lam < 0.01


def test_operator_symmetric_nonpositive():
    rng = np.random.default_rng(0)
    for imm in (families.flat_graph(64, 0.05), families.clifford_torus(16)):
        K, M = operator_matrices(imm)
        asym = abs(K - K.T).max()
        assert asym < 1e-12 * abs(K).max()
        for _ in range(5):
            f = rng.standard_normal(K.shape[0])
            g = rng.standard_normal(K.shape[0])
            lf, lg = -(K @ f) / M, -(K @ g) / M
            ipfg = np.sum(M * lf * g)
            ipgf = np.sum(M * f * lg)
            scale = max(abs(ipfg), abs(ipgf), 1e-30)
            assert abs(ipfg - ipgf) / scale < 1e-10
            assert np.sum(M * lf * f) <= 1e-12 * np.sum(M * f * f)


def test_unit_circle_spectrum_multiplicity():
    imm = families.sphere_circle(128)  # great circle, length 2 pi
    spec = lowest_eigenpairs(imm, 5)
    assert spec.lambda1 == pytest.approx(1.0, rel=2e-3)
    assert spec.clusters[0] == [0, 1]          # multiplicity 2
    assert spec.eigenvalues[2] == pytest.approx(4.0, rel=5e-3)
    assert np.all(spec.residuals < 1e-8)


def test_straight_line_lambda1():
    spec = lowest_eigenpairs(families.flat_line(128), 2)
    assert spec.lambda1 == pytest.approx(4 * np.pi ** 2, rel=2e-3)


def test_eigenvalue_refinement_rate():
    errs = {}
    for N in (32, 64, 128):
        spec = lowest_eigenpairs(families.flat_line(N), 1)
        errs[N] = abs(spec.lambda1 - 4 * np.pi ** 2)
    assert 2.8 < errs[32] / errs[64] < 5.2
    assert 2.8 < errs[64] / errs[128] < 5.2


def test_clifford_lambda1_is_six():
    spec = lowest_eigenpairs(families.clifford_torus(32), 8, cluster_rtol=5e-3)
    assert abs(spec.lambda1 - 6.0) / 6.0 < 0.05
    # six-dimensional first eigenspace at this tolerance
    assert len(spec.first_cluster()) == 6
    # next band at 18
    lam7 = spec.eigenvalues[6]
    assert abs(lam7 - 18.0) / 18.0 < 0.05


def test_against_sparse_eigensolver_oracle():
    imm = families.clifford_torus(16)
    K, M = operator_matrices(imm)
    import scipy.sparse as sp
    vals = spla.eigsh(K, k=9, M=sp.diags(M), sigma=-1e-3, which='LM')[0]
    vals = np.sort(vals)[1:]  # drop the constant mode
    spec = lowest_eigenpairs(imm, 8, cluster_rtol=5e-3)
    assert np.allclose(spec.eigenvalues, vals, rtol=1e-7)


def test_no_convergence_reports_residual():
    with pytest.raises(NoConvergence) as ei:
        lowest_eigenpairs(families.clifford_torus(16), 4, tol=1e-16, max_iter=3)
    assert ei.value.residual is not None


def test_cluster_ambiguous_guard():
    # a grouping tolerance wide enough to swallow the gap to the next
    # band must be refused rather than silently projecting
    imm = families.sphere_circle(128)
    with pytest.raises(ClusterAmbiguous):
        classify_variation(imm, np.cos(4 * np.pi * np.arange(128) / 128),
                           k=5, cluster_rtol=2.0)


def test_classify_great_circle_modes():
    imm = families.sphere_circle(256)
    u = np.arange(256) / 256.0
    res2 = classify_variation(imm, np.cos(2 * np.pi * 2 * u), k=6)
    assert res2['essential']
    assert res2['perp_norm'] / res2['norm'] > 0.99
    res1 = classify_variation(imm, np.cos(2 * np.pi * u), k=6)
    assert not res1['essential']
    assert res1['perp_norm'] / res1['norm'] < 1e-3


def test_classify_clifford_essential_mode():
    imm = families.clifford_torus(32)
    f = families.torus_mode_field(imm.topology, 2)   # cos(2 phi_1)
    res = classify_variation(imm, f, k=8, cluster_rtol=5e-3)
    assert res['essential']
    # and a first-eigenspace direction is not essential
    f1 = families.torus_mode_field(imm.topology, 1)
    res1 = classify_variation(imm, f1, k=8, cluster_rtol=5e-3)
    assert not res1['essential']


def test_spectrum_export_schema():
    spec = lowest_eigenpairs(families.flat_line(64), 3)
    rows = spec.export()
    assert [set(r) for r in rows] == [{"index", "eigenvalue", "residual", "cluster"}] * 3
