"""Discretized compact Lagrangian immersions and their extrinsic geometry.

An immersion is a periodic grid of chart coordinates.  All first and second
parameter derivatives use 2nd-order central differences with periodic
wraparound; closed loops that wind around a chart period carry an explicit
jump vector per grid axis so that stencils across the seam see the lifted
coordinates.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import backends, laplacian
from .errors import DegenerateMetric, NotClosed

DEGENERATE_RATIO = 1e-10


@dataclass(frozen=True)
class GridTopology:
    """Periodic parameter grid (flat torus of intrinsic dimension 1 or 2)."""
    shape: tuple

    def __post_init__(self):
        if not 1 <= len(self.shape) <= 2:
            raise ValueError("intrinsic dimension must be 1 or 2")
        if any(n < 16 for n in self.shape):
            raise ValueError("grid resolution must be at least 16 per axis")

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def spacings(self):
        return tuple(1.0 / n for n in self.shape)

    @property
    def node_count(self):
        return int(np.prod(self.shape))

    def axis_coords(self):
        """Per-axis parameter values u in [0, 1)."""
        return [np.arange(n) / n for n in self.shape]

    def mesh(self):
        return np.meshgrid(*self.axis_coords(), indexing='ij')


@dataclass(frozen=True)
class Immersion:
    """Chart coordinates of a discretized Lagrangian at one time stamp.

    ``wrap_jump[a]`` is the constant chart-coordinate offset picked up when
    the parameter wraps around grid axis a (zero for loops contractible in
    the chart).
    """
    topology: GridTopology
    coords: np.ndarray          # shape + (d,)
    space: object               # AmbientSpace
    time: float = 0.0
    wrap_jump: np.ndarray | None = None

    def __post_init__(self):
        d = self.space.real_dim
        if self.topology.ndim != self.space.complex_dim:
            raise ValueError("intrinsic dimension must equal the ambient "
                             "complex dimension for a Lagrangian")
        if self.coords.shape != self.topology.shape + (d,):
            raise ValueError(f"coords shape {self.coords.shape} does not match "
                             f"grid {self.topology.shape} + ({d},)")
        if self.wrap_jump is None:
            object.__setattr__(self, 'wrap_jump',
                               np.zeros((self.topology.ndim, d)))

    @property
    def flat_coords(self):
        return self.coords.reshape(-1, self.space.real_dim)

    def with_coords(self, coords, time=None):
        return replace(self, coords=coords,
                       time=self.time if time is None else time)

    def shifted_coords(self, axis, step):
        """Neighbor coordinates along a grid axis, lifted across the seam."""
        c = np.roll(self.coords, -step, axis=axis)
        jump = self.wrap_jump[axis]
        if np.any(jump):
            sl = [slice(None)] * self.topology.ndim
            if step > 0:
                sl[axis] = slice(-step, None)
                c[tuple(sl)] += jump
            elif step < 0:
                sl[axis] = slice(None, -step)
                c[tuple(sl)] -= jump
        return c


@dataclass
class GeometryCache:
    """Per-node derived tensors of an immersion (grid-shaped arrays)."""
    imm: Immersion
    frame: np.ndarray          # shape + (n, d)
    d2f: np.ndarray            # shape + (n, n, d)
    g: np.ndarray              # shape + (n, n)
    ginv: np.ndarray
    detg: np.ndarray
    sqrtg: np.ndarray
    h: np.ndarray              # shape + (n, n, n)   all-lower h[k, i, j]
    alpha: np.ndarray          # shape + (n,)        mean curvature 1-form
    hvec: np.ndarray           # shape + (n,)        raised components
    h_amb: np.ndarray          # shape + (d,)        ambient mean curvature vector
    abs_a2: np.ndarray
    abs_h2: np.ndarray
    defect: np.ndarray         # shape + (n, n)      omega(e_i, e_j)
    jet: object                # ambient MetricJet (flattened batch)

    @property
    def max_h(self):
        return float(np.sqrt(np.max(self.abs_h2)))

    @property
    def max_a(self):
        return float(np.sqrt(np.max(self.abs_a2)))

    @property
    def max_defect(self):
        return float(np.max(np.abs(self.defect)))

    @property
    def node_weights(self):
        """Quadrature weights sqrt(det g) prod(du) per node."""
        return self.sqrtg * np.prod(self.imm.topology.spacings)


def frame_and_second_derivatives(imm):
    """Central-difference dF/du_a and d2F/du_a du_b on the periodic grid."""
    topo = imm.topology
    n = topo.ndim
    du = topo.spacings
    F = imm.coords
    plus = [imm.shifted_coords(a, +1) for a in range(n)]
    minus = [imm.shifted_coords(a, -1) for a in range(n)]
    e = np.stack([(plus[a] - minus[a]) / (2 * du[a]) for a in range(n)], axis=-2)
    d2 = np.empty(topo.shape + (n, n, imm.space.real_dim))
    for a in range(n):
        d2[..., a, a, :] = (plus[a] - 2 * F + minus[a]) / du[a] ** 2
    if n == 2:
        pp = Immersion(topo, plus[0], imm.space, imm.time, imm.wrap_jump).shifted_coords(1, +1)
        pm = Immersion(topo, plus[0], imm.space, imm.time, imm.wrap_jump).shifted_coords(1, -1)
        mp = Immersion(topo, minus[0], imm.space, imm.time, imm.wrap_jump).shifted_coords(1, +1)
        mm = Immersion(topo, minus[0], imm.space, imm.time, imm.wrap_jump).shifted_coords(1, -1)
        mixed = (pp - pm - mp + mm) / (4 * du[0] * du[1])
        d2[..., 0, 1, :] = mixed
        d2[..., 1, 0, :] = mixed
    return e, d2


def geometry(imm, curvature=False):
    """Full second-fundamental-form tables of an immersion.

    Raises ChartExit if any node leaves the safe chart region and
    DegenerateMetric if the induced metric loses positivity (folding).
    """
    topo = imm.topology
    n = topo.ndim
    d = imm.space.real_dim
    flat = imm.flat_coords
    imm.space.require_safe(flat, f"t={imm.time:.6g}")
    jet = imm.space.jet(flat, curvature=curvature)

    e, d2 = frame_and_second_derivatives(imm)
    m = flat.shape[0]
    tab = backends.fundamental_tables(
        e.reshape(m, n, d), d2.reshape(m, n, n, d),
        jet.gamma, jet.J, jet.g)

    det = tab['det']
    if np.any(det <= 0) or np.min(det) < DEGENERATE_RATIO * np.median(det):
        raise DegenerateMetric(
            f"induced metric degenerate at t={imm.time:.6g}: "
            f"min det g = {np.min(det):.3e}, median = {np.median(det):.3e}")

    shp = topo.shape
    return GeometryCache(
        imm=imm, frame=e, d2f=d2,
        g=tab['g'].reshape(shp + (n, n)),
        ginv=tab['ginv'].reshape(shp + (n, n)),
        detg=det.reshape(shp),
        sqrtg=np.sqrt(det).reshape(shp),
        h=tab['h'].reshape(shp + (n, n, n)),
        alpha=tab['alpha'].reshape(shp + (n,)),
        hvec=tab['hvec'].reshape(shp + (n,)),
        h_amb=tab['h_amb'].reshape(shp + (d,)),
        abs_a2=tab['abs_a2'].reshape(shp),
        abs_h2=tab['abs_h2'].reshape(shp),
        defect=tab['defect'].reshape(shp + (n, n)),
        jet=jet,
    )


# ----------------------------------------------------------------------
# Scalar diagnostics
# ----------------------------------------------------------------------

def lagrangian_defect(imm_or_cache):
    """Sup-norm of the pulled-back Kahler form over nodes and index pairs."""
    cache = _as_cache(imm_or_cache)
    return cache.max_defect


def grid_partial(fld, axis, spacing):
    """Central difference of a periodic node field along a grid axis."""
    return (np.roll(fld, -1, axis=axis) - np.roll(fld, 1, axis=axis)) / (2 * spacing)


def closedness_residual(imm_or_cache):
    """Sup-norm of the discrete exterior derivative of the mean curvature
    form over grid plaquettes (identically zero for curves)."""
    cache = _as_cache(imm_or_cache)
    topo = cache.imm.topology
    if topo.ndim == 1:
        return 0.0
    du1, du2 = topo.spacings
    a1, a2 = cache.alpha[..., 0], cache.alpha[..., 1]
    # circulation around the plaquette with corners (i,j)..(i+1,j+1),
    # trapezoid per edge, divided by the cell area -> the 2-form component
    circ = (0.5 * (a1 + np.roll(a1, -1, axis=0)) * du1
            + 0.5 * (np.roll(a2, -1, axis=0) + np.roll(np.roll(a2, -1, axis=0), -1, axis=1)) * du2
            - 0.5 * (np.roll(a1, -1, axis=1) + np.roll(np.roll(a1, -1, axis=0), -1, axis=1)) * du1
            - 0.5 * (a2 + np.roll(a2, -1, axis=1)) * du2)
    return float(np.max(np.abs(circ / (du1 * du2))))


def integrals(imm_or_cache):
    """Volume, L2 mean curvature, sup norms of A, H and their gradients."""
    cache = _as_cache(imm_or_cache)
    w = cache.node_weights
    vol = float(np.sum(w))
    l2h = float(np.sum(w * cache.abs_h2))
    grad_a = covariant_grad_a_norm(cache)
    return {
        'vol': vol,
        'l2h': l2h,
        'max_a': cache.max_a,
        'max_h': cache.max_h,
        'max_grad_a': float(np.sqrt(np.max(grad_a))),
    }


def _as_cache(imm_or_cache):
    if isinstance(imm_or_cache, GeometryCache):
        return imm_or_cache
    return geometry(imm_or_cache)


# ----------------------------------------------------------------------
# Intrinsic covariant derivatives
# ----------------------------------------------------------------------

def intrinsic_christoffels(cache):
    """Levi-Civita connection of the induced metric, Gamma^k_{ij} per node."""
    topo = cache.imm.topology
    du = topo.spacings
    n = topo.ndim
    dg = np.stack([grid_partial(cache.g, a, du[a]) for a in range(n)], axis=-3)
    # dg[..., c, i, j] = d_c g_ij
    S = (dg
         + np.moveaxis(dg, [-3, -2, -1], [-2, -3, -1])
         - np.moveaxis(dg, [-3, -2, -1], [-1, -3, -2]))
    # S[..., a, b, d] = d_a g_bd + d_b g_ad - d_d g_ab
    return 0.5 * np.einsum('...kd,...abd->...kab', cache.ginv, S)


def covariant_grad_h_norm(cache, christoffels=None):
    """|grad H|^2 per node: covariant derivative of the mean curvature
    1-form in the induced connection."""
    topo = cache.imm.topology
    du = topo.spacings
    n = topo.ndim
    gam = intrinsic_christoffels(cache) if christoffels is None else christoffels
    da = np.stack([grid_partial(cache.alpha, a, du[a]) for a in range(n)], axis=-2)
    # da[..., m, i] = d_m alpha_i
    nab = da - np.einsum('...pmi,...p->...mi', gam, cache.alpha)
    return np.einsum('...mi,...nj,...mn,...ij->...', nab, nab,
                     cache.ginv, cache.ginv, optimize=True)


def covariant_grad_a_norm(cache, christoffels=None):
    """|grad A|^2 per node: covariant derivative of the all-lower second
    fundamental form in the induced connection."""
    topo = cache.imm.topology
    du = topo.spacings
    n = topo.ndim
    gam = intrinsic_christoffels(cache) if christoffels is None else christoffels
    dh = np.stack([grid_partial(cache.h, a, du[a]) for a in range(n)], axis=-4)
    # dh[..., m, k, i, j] = d_m h_kij
    nab = (dh
           - np.einsum('...pmk,...pij->...mkij', gam, cache.h)
           - np.einsum('...pmi,...kpj->...mkij', gam, cache.h)
           - np.einsum('...pmj,...kip->...mkij', gam, cache.h))
    return np.einsum('...makl,...nbpq,...mn,...ab,...kp,...lq->...',
                     nab, nab, cache.ginv, cache.ginv, cache.ginv,
                     cache.ginv, optimize=True)


# ----------------------------------------------------------------------
# Angle potential
# ----------------------------------------------------------------------

def holonomy(cache):
    """Loop integrals of the mean curvature form over each grid generator,
    trapezoid along grid lines averaged over the parallel lines."""
    topo = cache.imm.topology
    du = topo.spacings
    out = np.empty(topo.ndim)
    for a in range(topo.ndim):
        line_sum = np.sum(cache.alpha[..., a], axis=a) * du[a]
        out[a] = float(np.mean(line_sum))
    return out


def angle_potential(imm_or_cache, tol_closed=1e-2, tol_holonomy=1e-5):
    """Mean-zero potential theta with d(theta) ~ mean curvature form, plus
    the holonomy vector over the grid generators.

    theta minimizes the metric-weighted least-squares misfit; the returned
    ``exact`` flag records whether every holonomy is below tolerance.
    """
    cache = _as_cache(imm_or_cache)
    if closedness_residual(cache) > tol_closed:
        raise NotClosed(
            f"mean curvature form not closed at tolerance {tol_closed}")
    topo = cache.imm.topology
    K = laplacian.stiffness(cache.g, cache.detg, topo.spacings)
    M = laplacian.mass_diagonal(cache.detg, topo.spacings)
    b = laplacian.gradient_rhs(cache.g, cache.detg, topo.spacings, cache.alpha)
    theta = laplacian.poisson_mean_zero(K, M, b).reshape(topo.shape)
    h = holonomy(cache)
    return theta, h, bool(np.max(np.abs(h)) < tol_holonomy)
