"""Explicit Kahler-Einstein ambient charts.

Each space evaluates its metric, complex structure, Christoffel symbols and
curvature tensor in closed form on a single chart.  A finite-difference
evaluation path is provided both as a fallback for metric-only definitions
and as an independent oracle for the closed forms.
"""

from dataclasses import dataclass

import numpy as np

from . import backends
from .backends.reference import _inv_sym
from .errors import ChartExit


@dataclass
class MetricJet:
    """Pointwise ambient geometry at a batch of chart points.

    ``riemann`` is filled only on request (the flow inner loop does not
    need it).
    """
    point: np.ndarray          # (m, d)
    g: np.ndarray              # (m, d, d)
    J: np.ndarray              # (d, d) constant, or (m, d, d)
    gamma: np.ndarray | None   # (m, d, d, d), Gamma^A_{BC}; None if zero
    riemann: np.ndarray | None = None   # (m, d, d, d, d)

    def J_at_nodes(self):
        """Complex structure broadcast to one matrix per point."""
        if self.J.ndim == 2:
            return np.broadcast_to(self.J, (self.point.shape[0],) + self.J.shape)
        return self.J


class AmbientSpace:
    """Base class: one explicit Kahler-Einstein chart."""

    kind: str
    complex_dim: int
    scalar_curvature: float
    curvature_bounds: tuple
    injectivity_radius_lb: float

    @property
    def real_dim(self):
        return 2 * self.complex_dim

    @property
    def einstein_constant(self):
        """Ricci = einstein_constant * g (equals scalar curvature / 2n)."""
        return self.scalar_curvature / self.real_dim

    def safe_mask(self, x):
        """Boolean mask of points strictly inside the safe chart region."""
        raise NotImplementedError

    def require_safe(self, x, context=""):
        ok = self.safe_mask(np.atleast_2d(x))
        if not np.all(ok):
            bad = np.atleast_2d(x)[~ok][0]
            raise ChartExit(f"{self.kind}: point {bad} outside safe chart region"
                            + (f" ({context})" if context else ""))

    def metric(self, x):
        """Metric matrices at a batch of points, shape (m, d, d)."""
        raise NotImplementedError

    def jet(self, x, curvature=False):
        raise NotImplementedError

    def describe(self):
        return {
            "kind": self.kind,
            "complex_dim": self.complex_dim,
            "scalar_curvature": self.scalar_curvature,
            "curvature_bounds": list(self.curvature_bounds),
            "injectivity_radius_lb": self.injectivity_radius_lb,
        }


def _pairwise_J(n):
    """Block-diagonal standard complex structure for interleaved (x, y)
    coordinate pairs."""
    J = np.zeros((2 * n, 2 * n))
    for j in range(n):
        J[2 * j + 1, 2 * j] = 1.0
        J[2 * j, 2 * j + 1] = -1.0
    return J


class FlatTorus(AmbientSpace):
    """Flat torus R^{2n} / (period lattice).  The chart is the universal
    cover, so no point ever exits it; periods are bookkeeping metadata."""

    def __init__(self, n=1, periods=None):
        self.kind = "flat_torus"
        self.complex_dim = int(n)
        self.periods = np.ones(2 * n) if periods is None else np.asarray(periods, float)
        self.scalar_curvature = 0.0
        self.curvature_bounds = (0.0,) * 6
        self.injectivity_radius_lb = 0.5 * float(np.min(self.periods))
        self._J = _pairwise_J(n)

    def safe_mask(self, x):
        return np.ones(np.atleast_2d(x).shape[0], dtype=bool)

    def metric(self, x):
        x = np.atleast_2d(x)
        d = self.real_dim
        return np.broadcast_to(np.eye(d), (x.shape[0], d, d)).copy()

    def jet(self, x, curvature=False):
        x = np.atleast_2d(np.asarray(x, float))
        m, d = x.shape[0], self.real_dim
        rm = np.zeros((m, d, d, d, d)) if curvature else None
        return MetricJet(x, self.metric(x), self._J, None, rm)


class RoundSphere(AmbientSpace):
    """Round 2-sphere of a given radius in the stereographic chart
    (projection from the north pole onto the equatorial plane; the equator
    maps to the unit circle)."""

    def __init__(self, radius=1.0, chart_radius=6.0):
        self.kind = "round_sphere"
        self.complex_dim = 1
        self.radius = float(radius)
        self.chart_radius = float(chart_radius)
        self.gauss_curvature = 1.0 / self.radius ** 2
        self.scalar_curvature = 2.0 * self.gauss_curvature
        self.curvature_bounds = (2.0 * abs(self.gauss_curvature), 0, 0, 0, 0, 0)
        self.injectivity_radius_lb = np.pi * self.radius
        self._J = _pairwise_J(1)

    def safe_mask(self, x):
        x = np.atleast_2d(x)
        return np.sum(x * x, axis=1) < self.chart_radius ** 2

    def metric(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        r2 = np.sum(x * x, axis=1)
        lam = 4.0 * self.radius ** 2 / (1.0 + r2) ** 2
        return lam[:, None, None] * np.eye(2)[None]

    def jet(self, x, curvature=False):
        x = np.atleast_2d(np.asarray(x, float))
        g = self.metric(x)
        # conformal metric e^{2 phi} delta: Gamma^k_ij = d_ik phi_j + d_jk phi_i - d_ij phi_k
        r2 = np.sum(x * x, axis=1)
        dphi = -2.0 * x / (1.0 + r2)[:, None]
        eye = np.eye(2)
        gamma = (np.einsum('ik,xj->xkij', eye, dphi)
                 + np.einsum('jk,xi->xkij', eye, dphi)
                 - np.einsum('ij,xk->xkij', eye, dphi))
        rm = backends.constant_sectional_riemann(g, self.gauss_curvature) if curvature else None
        return MetricJet(x, g, self._J, gamma, rm)


class HyperbolicCylinder(AmbientSpace):
    """Hyperbolic cylinder (Gauss curvature -1) in Fermi coordinates
    (rho, s) around its closed core geodesic of length ``length``."""

    def __init__(self, length=2 * np.pi, rho_max=1.2):
        self.kind = "hyperbolic_cylinder"
        self.complex_dim = 1
        self.length = float(length)
        self.rho_max = float(rho_max)
        self.gauss_curvature = -1.0
        self.scalar_curvature = -2.0
        self.curvature_bounds = (2.0, 0, 0, 0, 0, 0)
        # metadata: completeness in s is taken on faith, radius from the core loop
        self.injectivity_radius_lb = 0.5 * self.length

    def safe_mask(self, x):
        x = np.atleast_2d(x)
        return np.abs(x[:, 0]) < self.rho_max

    def metric(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        g = np.zeros((x.shape[0], 2, 2))
        g[:, 0, 0] = 1.0
        g[:, 1, 1] = np.cosh(x[:, 0]) ** 2
        return g

    def jet(self, x, curvature=False):
        x = np.atleast_2d(np.asarray(x, float))
        m = x.shape[0]
        rho = x[:, 0]
        ch, sh = np.cosh(rho), np.sinh(rho)
        g = self.metric(x)
        gamma = np.zeros((m, 2, 2, 2))
        gamma[:, 0, 1, 1] = -ch * sh            # Gamma^rho_{ss}
        gamma[:, 1, 0, 1] = sh / ch             # Gamma^s_{rho s}
        gamma[:, 1, 1, 0] = sh / ch
        J = np.zeros((m, 2, 2))
        J[:, 0, 1] = -ch
        J[:, 1, 0] = 1.0 / ch
        rm = backends.constant_sectional_riemann(g, self.gauss_curvature) if curvature else None
        return MetricJet(x, g, J, gamma, rm)


class FubiniStudyCP2(AmbientSpace):
    """Affine chart (w1, w2) of CP^2 with the Fubini-Study metric.

    ``scale`` multiplies the base metric, whose holomorphic sectional
    curvature is 4 (sectional curvatures in [1, 4], scalar curvature 24).
    """

    def __init__(self, scale=1.0, chart_radius=4.0):
        self.kind = "fubini_study_cp2"
        self.complex_dim = 2
        self.scale = float(scale)
        self.chart_radius = float(chart_radius)
        self.scalar_curvature = 24.0 / self.scale
        self.injectivity_radius_lb = 0.5
        self._J = _pairwise_J(2)
        k0 = self._sup_norm_rm()
        self.curvature_bounds = (k0, 0, 0, 0, 0, 0)

    def _sup_norm_rm(self):
        # |Rm| is constant on a symmetric space: evaluate once at the origin.
        jet = self.jet(np.zeros((1, 4)), curvature=True)
        det, ginv = _inv_sym(jet.g)
        rm_up = np.einsum('xabcd,xae,xbf,xcg,xdh->xefgh',
                          jet.riemann, ginv, ginv, ginv, ginv)
        return float(np.sqrt(np.einsum('xabcd,xabcd->x', rm_up, jet.riemann)[0]))

    def safe_mask(self, x):
        x = np.atleast_2d(x)
        return np.sum(x * x, axis=1) < self.chart_radius ** 2

    def metric(self, x):
        return self.jet(x).g

    def jet(self, x, curvature=False):
        x = np.atleast_2d(np.asarray(x, float))
        g, J, gamma, rm = backends.fubini_study_jet(x, self.scale, bool(curvature))
        return MetricJet(x, g, J, gamma, rm)


_CATALOG = {
    "flat_torus": FlatTorus,
    "round_sphere": RoundSphere,
    "hyperbolic_cylinder": HyperbolicCylinder,
    "fubini_study_cp2": FubiniStudyCP2,
}


def make_ambient(kind, **params):
    """Catalog factory used by scenario files."""
    if kind not in _CATALOG:
        raise KeyError(f"unknown ambient kind {kind!r}; have {sorted(_CATALOG)}")
    return _CATALOG[kind](**params)


def scalar_curvature(space):
    """The constant scalar curvature of a catalog space."""
    return space.scalar_curvature


# ----------------------------------------------------------------------
# Finite-difference oracle / fallback path
# ----------------------------------------------------------------------

def fd_christoffels(space, x, h=1e-3):
    """4th-order central-difference Christoffels from the metric alone."""
    x = np.atleast_2d(np.asarray(x, float))
    m, d = x.shape
    dg = np.empty((m, d, d, d))   # dg[:, c, A, B] = d_c g_AB
    for c in range(d):
        e = np.zeros(d)
        e[c] = 1.0
        gp1 = space.metric(x + h * e)
        gm1 = space.metric(x - h * e)
        gp2 = space.metric(x + 2 * h * e)
        gm2 = space.metric(x - 2 * h * e)
        dg[:, c] = (-gp2 + 8 * gp1 - 8 * gm1 + gm2) / (12 * h)
    g = space.metric(x)
    det, ginv = _inv_sym(g)
    # S[a, b, d] = d_a g_bd + d_b g_ad - d_d g_ab
    S = dg + np.transpose(dg, (0, 2, 1, 3)) - np.transpose(dg, (0, 3, 2, 1))
    return 0.5 * np.einsum('xkd,xabd->xkab', ginv, S)


def fd_riemann(space, x, h=1e-3, h_inner=1e-3):
    """Curvature tensor from nested finite differences of the Christoffels:
    R^A_{BCD} = d_C Gamma^A_{DB} - d_D Gamma^A_{CB}
    + Gamma^A_{CE} Gamma^E_{DB} - Gamma^A_{DE} Gamma^E_{CB}, lowered on the
    first slot.  Sign convention gives positive sectional curvature on
    round spheres."""
    x = np.atleast_2d(np.asarray(x, float))
    m, d = x.shape
    dgam = np.empty((m, d, d, d, d))    # [c, k, a, b] = d_c Gamma^k_{ab}
    for c in range(d):
        e = np.zeros(d)
        e[c] = 1.0
        gp1 = fd_christoffels(space, x + h * e, h_inner)
        gm1 = fd_christoffels(space, x - h * e, h_inner)
        gp2 = fd_christoffels(space, x + 2 * h * e, h_inner)
        gm2 = fd_christoffels(space, x - 2 * h * e, h_inner)
        dgam[:, c] = (-gp2 + 8 * gp1 - 8 * gm1 + gm2) / (12 * h)
    gam = fd_christoffels(space, x, h_inner)
    r_up = (np.einsum('xcadb->xabcd', dgam)
            - np.einsum('xdacb->xabcd', dgam)
            + np.einsum('xace,xedb->xabcd', gam, gam)
            - np.einsum('xade,xecb->xabcd', gam, gam))
    g = space.metric(x)
    return np.einsum('xae,xebcd->xabcd', g, r_up)


# ----------------------------------------------------------------------
# Structure self-checks
# ----------------------------------------------------------------------

def _adapted_half_frame(g, J):
    """An orthonormal frame (u_1, Ju_1, ..., u_n, Ju_n) at each point,
    returned as the half-frame u_k with shape (m, n, d)."""
    m, d = g.shape[0], g.shape[1]
    n = d // 2
    Jm = J if J.ndim == 3 else np.broadcast_to(J, (m, d, d))
    us = np.zeros((m, n, d))
    for i in range(m):
        got = []
        for cand in np.eye(d):
            v = cand.copy()
            for u in got:
                for w in (u, Jm[i] @ u):
                    v = v - (w @ g[i] @ v) * w
            nrm2 = v @ g[i] @ v
            if nrm2 > 1e-10:
                got.append(v / np.sqrt(nrm2))
            if len(got) == n:
                break
        us[i] = np.array(got)
    return us


def kahler_einstein_selfcheck(space, points, tol=1e-8, curvature_source="closed"):
    """Residual maxima of the Kahler-Einstein structure at sample points.

    Checks the Einstein condition, the Ricci/J-trace curvature identity,
    parallelism of J, and the first Bianchi identity.  ``curvature_source``
    selects the closed-form jet or the finite-difference oracle.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    space.require_safe(pts, "selfcheck")
    jet = space.jet(pts, curvature=True)
    g, J = jet.g, jet.J_at_nodes()
    d = g.shape[-1]
    if curvature_source == "closed":
        rm = jet.riemann
        gamma = jet.gamma if jet.gamma is not None else np.zeros(g.shape + (d,))
    elif curvature_source == "fd":
        rm = fd_riemann(space, pts)
        gamma = fd_christoffels(space, pts)
    else:
        raise ValueError(curvature_source)

    det, ginv = _inv_sym(g)
    ric = np.einsum('xbd,xabcd->xac', ginv, rm)
    res_einstein = float(np.max(np.abs(ric - space.einstein_constant * g)))

    # Ricci identity: Ric(X, Y) = sum_k Rm(X, JY, u_k, Ju_k)
    u = _adapted_half_frame(g, J)
    Ju = np.einsum('xab,xkb->xka', J, u)
    rm_j = np.einsum('xabcd,xbe->xaecd', rm, J)     # Rm(e_a, J e_e, ., .)
    rhs = np.einsum('xaecd,xkc,xkd->xae', rm_j, u, Ju)
    res_h2 = float(np.max(np.abs(ric - rhs)))

    # Parallel complex structure: 4th-order FD of J plus connection terms.
    h = 1e-4
    dJ = np.zeros((pts.shape[0], d, d, d))
    for c in range(d):
        e = np.zeros(d)
        e[c] = 1.0
        Jp1 = space.jet(pts + h * e).J_at_nodes()
        Jm1 = space.jet(pts - h * e).J_at_nodes()
        Jp2 = space.jet(pts + 2 * h * e).J_at_nodes()
        Jm2 = space.jet(pts - 2 * h * e).J_at_nodes()
        dJ[:, c] = (-Jp2 + 8 * Jp1 - 8 * Jm1 + Jm2) / (12 * h)
    nabla_j = (dJ
               + np.einsum('xbae,xec->xabc', gamma, J)
               - np.einsum('xeac,xbe->xabc', gamma, J))
    res_nj = float(np.max(np.abs(nabla_j)))

    bianchi = rm + np.einsum('xacdb->xabcd', rm) + np.einsum('xadbc->xabcd', rm)
    res_bianchi = float(np.max(np.abs(bianchi)))

    report = {
        "einstein": res_einstein,
        "ricci_trace_identity": res_h2,
        "nabla_J": res_nj,
        "bianchi": res_bianchi,
    }
    report["pass"] = all(v < tol for k, v in report.items() if k != "pass")
    return report
