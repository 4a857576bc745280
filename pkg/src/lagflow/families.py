"""Analytic initial immersions for the built-in scenarios and tests."""

import numpy as np

from .ambient import (FlatTorus, FubiniStudyCP2, HyperbolicCylinder,
                      RoundSphere)
from .geometry import GridTopology, Immersion


def flat_line(N=128, slope_axis=0):
    """Straight closed geodesic (u, 0) in the unit flat torus."""
    space = FlatTorus(1)
    topo = GridTopology((N,))
    u = topo.axis_coords()[0]
    coords = np.stack([u, np.zeros_like(u)], axis=-1)
    jump = np.array([[1.0, 0.0]])
    return Immersion(topo, coords, space, 0.0, jump)


def flat_graph(N=128, amplitude=0.01, mode=1):
    """Graph curve (u, a sin 2 pi k u) in the unit flat torus."""
    space = FlatTorus(1)
    topo = GridTopology((N,))
    u = topo.axis_coords()[0]
    coords = np.stack([u, amplitude * np.sin(2 * np.pi * mode * u)], axis=-1)
    jump = np.array([[1.0, 0.0]])
    return Immersion(topo, coords, space, 0.0, jump)


def flat_circle(N=128, radius=0.2, center=(0.5, 0.5)):
    """Round circle inside the fundamental domain of the unit flat torus."""
    space = FlatTorus(1)
    topo = GridTopology((N,))
    phi = 2 * np.pi * topo.axis_coords()[0]
    coords = np.stack([center[0] + radius * np.cos(phi),
                       center[1] + radius * np.sin(phi)], axis=-1)
    return Immersion(topo, coords, space, 0.0)


def sphere_circle(N=128, amplitude=0.0, mode=1, radius=1.0):
    """Great circle (the equator) of a round sphere, optionally displaced
    by ``amplitude * cos(mode * phi)`` in geodesic latitude."""
    space = RoundSphere(radius)
    topo = GridTopology((N,))
    phi = 2 * np.pi * topo.axis_coords()[0]
    chi = amplitude * np.cos(mode * phi)    # latitude = geodesic normal offset / radius
    rho = np.cos(chi) / (1.0 - np.sin(chi))
    coords = np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)
    return Immersion(topo, coords, space, 0.0)


def cylinder_core(N=128, amplitude=0.0, mode=1, length=2 * np.pi):
    """Core geodesic of the hyperbolic cylinder with a normal perturbation
    rho(s) = amplitude * cos(mode * 2 pi s / length)."""
    space = HyperbolicCylinder(length)
    topo = GridTopology((N,))
    u = topo.axis_coords()[0]
    rho = amplitude * np.cos(2 * np.pi * mode * u)
    coords = np.stack([rho, length * u], axis=-1)
    jump = np.array([[0.0, length]])
    return Immersion(topo, coords, space, 0.0, jump)


def clifford_torus(N=64, scale=1.0):
    """Clifford torus |w1| = |w2| = 1 in the affine chart of CP^2."""
    space = FubiniStudyCP2(scale)
    topo = GridTopology((N, N))
    u1, u2 = topo.mesh()
    p1, p2 = 2 * np.pi * u1, 2 * np.pi * u2
    coords = np.stack([np.cos(p1), np.sin(p1), np.cos(p2), np.sin(p2)], axis=-1)
    return Immersion(topo, coords, space, 0.0)


def rotated_clifford_torus(N=64, angle=0.3, scale=1.0):
    """Image of the Clifford torus under a unitary of CP^2 mixing the
    z0/z1 homogeneous coordinates.  Still exactly Lagrangian (the map is a
    holomorphic isometry) but without the product symmetry that makes the
    standard parametrization's discrete defect vanish identically."""
    space = FubiniStudyCP2(scale)
    topo = GridTopology((N, N))
    u1, u2 = topo.mesh()
    z = np.stack([np.ones_like(u1), np.exp(2j * np.pi * u1),
                  np.exp(2j * np.pi * u2)], axis=-1)
    c, s = np.cos(angle), np.sin(angle)
    U = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=complex)
    zr = z @ U.T
    w = zr[..., 1:] / zr[..., :1]
    coords = np.stack([w[..., 0].real, w[..., 0].imag,
                       w[..., 1].real, w[..., 1].imag], axis=-1)
    return Immersion(topo, coords, space, 0.0)


def torus_mode_field(topo, k1, k2=0, kind="cos"):
    """Scalar grid field cos/sin(2 pi (k1 u1 + k2 u2)) used as deformation
    potentials and spectral probes."""
    mesh = topo.mesh()
    phase = 2 * np.pi * k1 * mesh[0]
    if topo.ndim == 2:
        phase = phase + 2 * np.pi * k2 * mesh[1]
    return np.cos(phase) if kind == "cos" else np.sin(phase)
