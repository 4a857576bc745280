"""Ambient catalog: closed-form geometry vs. finite-difference oracles and
the Kahler-Einstein structure checks."""

import numpy as np
import pytest

from lagflow.ambient import (FlatTorus, FubiniStudyCP2, HyperbolicCylinder,
                             RoundSphere, fd_christoffels, fd_riemann,
                             kahler_einstein_selfcheck, make_ambient,
                             scalar_curvature)
from lagflow.errors import ChartExit


def sample_points(space, count, seed=0):
    rng = np.random.default_rng(seed)
    if space.kind == "flat_torus":
        return rng.uniform(-1, 1, size=(count, space.real_dim))
    if space.kind == "round_sphere":
        pts = rng.uniform(-1.5, 1.5, size=(count, 2))
        return pts
    if space.kind == "hyperbolic_cylinder":
        pts = rng.uniform(-1, 1, size=(count, 2))
        pts[:, 0] *= 0.9
        return pts
    if space.kind == "fubini_study_cp2":
        return rng.uniform(-1.0, 1.0, size=(count, 4))
    raise AssertionError(space.kind)


def test_flat_torus_jet_trivial():
    sp = FlatTorus(1)
    jet = sp.jet(np.array([[0.3, 0.7]]), curvature=True)
    assert np.allclose(jet.g[0], np.eye(2))
    assert jet.gamma is None
    assert np.all(jet.riemann == 0)
    assert np.array_equal(jet.J, np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_sphere_conformal_factor_at_origin():
    sp = RoundSphere(1.0)
    jet = sp.jet(np.zeros((1, 2)))
    assert np.allclose(jet.g[0], 4.0 * np.eye(2))


def test_cylinder_metric_on_core():
    sp = HyperbolicCylinder(length=2 * np.pi)
    jet = sp.jet(np.array([[0.0, 1.3]]), curvature=True)
    assert np.allclose(jet.g[0], np.eye(2))
    # Gauss curvature -1 on the core: R_{1212} = K det g = -1
    assert jet.riemann[0, 0, 1, 0, 1] == pytest.approx(-1.0, abs=1e-12)


def test_scalar_curvatures():
    assert scalar_curvature(FlatTorus(2)) == 0.0
    assert scalar_curvature(RoundSphere(1.0)) == pytest.approx(2.0)
    assert scalar_curvature(HyperbolicCylinder()) == pytest.approx(-2.0)
    # trace of the closed-form Ricci at the chart origin
    sp = FubiniStudyCP2()
    jet = sp.jet(np.zeros((1, 4)), curvature=True)
    ginv = np.linalg.inv(jet.g[0])
    ric = np.einsum('bd,abcd->ac', ginv, jet.riemann[0])
    rbar = np.einsum('ac,ac->', ginv, ric)
    assert rbar == pytest.approx(24.0, rel=1e-10)
    assert scalar_curvature(sp) == pytest.approx(24.0)


@pytest.mark.parametrize("space", [RoundSphere(1.0), HyperbolicCylinder(),
                                   FubiniStudyCP2()])
def test_closed_form_christoffels_match_fd(space):
    pts = sample_points(space, 40, seed=1)
    gamma = space.jet(pts).gamma
    gamma_fd = fd_christoffels(space, pts)
    assert np.max(np.abs(gamma - gamma_fd)) < 5e-9


@pytest.mark.parametrize("space", [RoundSphere(1.0), HyperbolicCylinder(),
                                   FubiniStudyCP2()])
def test_closed_form_riemann_matches_fd(space):
    pts = sample_points(space, 15, seed=2)
    rm = space.jet(pts, curvature=True).riemann
    rm_fd = fd_riemann(space, pts)
    scale = max(np.max(np.abs(rm)), 1.0)
    assert np.max(np.abs(rm - rm_fd)) / scale < 1e-5


def test_sphere_sign_convention():
    # R(u, v, u, v) > 0 for orthonormal u, v on the round sphere
    sp = RoundSphere(1.0)
    pts = sample_points(sp, 5, seed=3)
    jet = sp.jet(pts, curvature=True)
    lam = jet.g[:, 0, 0]
    r1212 = jet.riemann[:, 0, 1, 0, 1]
    # orthonormalize: divide by det g
    assert np.all(r1212 / lam ** 2 > 0)


@pytest.mark.parametrize("space,tol", [
    (FlatTorus(2), 1e-14),
    (RoundSphere(1.0), 1e-8),
    (HyperbolicCylinder(), 1e-8),
    (FubiniStudyCP2(), 1e-8),
])
def test_selfcheck_closed_forms(space, tol):
    pts = sample_points(space, 1000, seed=4)
    report = kahler_einstein_selfcheck(space, pts, tol=tol)
    assert report["pass"], report


@pytest.mark.parametrize("space", [RoundSphere(1.0), FubiniStudyCP2(),
                                   HyperbolicCylinder()])
def test_selfcheck_fd_path(space):
    pts = sample_points(space, 60, seed=5)
    report = kahler_einstein_selfcheck(space, pts, tol=1e-5,
                                       curvature_source="fd")
    assert report["pass"], report


def test_j_compatibility_random_vectors():
    rng = np.random.default_rng(6)
    for space in (RoundSphere(1.0), FubiniStudyCP2(), HyperbolicCylinder()):
        pts = sample_points(space, 20, seed=7)
        jet = space.jet(pts)
        J = jet.J_at_nodes()
        u = rng.normal(size=(20, space.real_dim))
        v = rng.normal(size=(20, space.real_dim))
        Ju = np.einsum('xab,xb->xa', J, u)
        Jv = np.einsum('xab,xb->xa', J, v)
        ip = lambda a, b: np.einsum('xa,xab,xb->x', a, jet.g, b)
        assert np.max(np.abs(ip(Ju, Jv) - ip(u, v))) < 1e-12
        # omega(u, v) = g(Ju, v) antisymmetric
        assert np.max(np.abs(ip(Ju, v) + ip(Jv, u))) < 1e-12


def test_chart_exit():
    sp = RoundSphere(1.0, chart_radius=2.0)
    with pytest.raises(ChartExit):
        sp.require_safe(np.array([[5.0, 0.0]]))
    sp2 = FubiniStudyCP2(chart_radius=1.0)
    with pytest.raises(ChartExit):
        kahler_einstein_selfcheck(sp2, np.array([[2.0, 0, 0, 0]]))


def test_factory():
    sp = make_ambient("round_sphere", radius=2.0)
    assert sp.scalar_curvature == pytest.approx(0.5)
    with pytest.raises(KeyError):
        make_ambient("nope")


def test_fs_scale_normalization():
    sp = FubiniStudyCP2(scale=2.0)
    assert sp.scalar_curvature == pytest.approx(12.0)
    report = kahler_einstein_selfcheck(sp, sample_points(sp, 50, seed=8), tol=1e-8)
    assert report["pass"], report
