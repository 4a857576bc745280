"""Time integration of the mean curvature flow and residual checks of the
evolution equations along computed trajectories."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DefectBlowup, DegenerateMetric, LagflowError,
                     NoConvergence, NotClosed)
from .geometry import (angle_potential, closedness_residual, geometry,
                       grid_partial, integrals, intrinsic_christoffels)
from .spectral import laplace_apply, lowest_eigenpairs

TRACE_COLUMNS = ("t", "vol", "l2h", "max_h", "max_a", "max_grad_a",
                 "lambda1", "defect", "e_accum", "theta_resid", "h_resid")


@dataclass
class FlowConfig:
    cfl: float = 0.5
    t_max: float = 1.0
    max_steps: int = 2_000_000
    monitor_stride: int = 10
    snapshot_stride: int = 0          # 0: only initial/final snapshots
    defect_tol: float = 0.05
    conv_tol: float = 1e-6
    conv_window: int = 10
    eig_stride: int = 1               # monitor events between lambda1 solves
    resid_stride: int = 1             # monitor events between PDE residuals
    eig_count: int = 1
    collapse_floor: float = 1e-2      # abs det-g floor vs the initial median
    track_residuals: bool = True
    tol_closed: float = 1e-2
    tol_holonomy: float = 1e-5
    # Move along the exact part of the mean curvature form only, by
    # subtracting its weighted mean (the discrete harmonic leak).  Off by
    # default: the plain flow is the object under test.  In positively
    # curved ambients the harmonic component the discretization seeds at
    # O(du^2) grows like e^{(Rbar/2n) t}, which no desk-scale resolution
    # outruns; this gauge pins the flow to the hamiltonian class, the
    # setting of the convergence statements for Rbar >= 0.
    holonomy_gauge: bool = False

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl coefficient must lie in (0, 1]")
        if self.defect_tol <= 0:
            raise ValueError("defect_tol must be positive")


@dataclass
class FlowTrace:
    """Scalar diagnostics at monitor times plus periodic state snapshots."""
    columns: dict                     # name -> list/array
    snapshots: list                   # (step, prev Immersion, Immersion)
    initial_sqrtg: np.ndarray
    status: str = "running"           # converged | t_max | max_steps | error
    error: str = ""
    error_type: str = ""
    t_final: float = 0.0
    steps: int = 0
    min_volume_ratio: list = field(default_factory=list)
    holonomy_max: list = field(default_factory=list)

    def as_arrays(self):
        return {k: np.asarray(v, float) for k, v in self.columns.items()}

    def column(self, name):
        return np.asarray(self.columns[name], float)

    def write_csv(self, path):
        cols = [self.column(c) for c in TRACE_COLUMNS]
        with open(path, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @staticmethod
    def read_csv(path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != TRACE_COLUMNS:
                raise ValueError(f"unexpected trace header {header}")
            data = np.array([[float(v) for v in line.strip().split(",")]
                             for line in fh if line.strip()])
        columns = {c: data[:, i] for i, c in enumerate(TRACE_COLUMNS)}
        return FlowTrace(columns=columns, snapshots=[], initial_sqrtg=None,
                         status="loaded",
                         t_final=float(data[-1, 0]), steps=-1)


def cfl_dt(imm_or_cache, c_cfl):
    """Parabolic step bound c min_a(du_a^2 min g_aa) / (2n (1 + max|A|^2))."""
    from .geometry import _as_cache
    cache = _as_cache(imm_or_cache)
    topo = cache.imm.topology
    n = topo.ndim
    limit = min(topo.spacings[a] ** 2 * float(np.min(cache.g[..., a, a]))
                for a in range(n))
    return c_cfl * limit / (2 * n * (1.0 + np.max(cache.abs_a2)))


def _velocity(cache, holonomy_gauge):
    if not holonomy_gauge:
        return cache.h_amb
    w = cache.node_weights[..., None]
    alpha = cache.alpha - np.sum(w * cache.alpha, axis=tuple(
        range(cache.alpha.ndim - 1))) / np.sum(w)
    hvec = np.einsum('...kl,...l->...k', cache.ginv, alpha)
    topo = cache.imm.topology
    d = cache.imm.space.real_dim
    Je = np.einsum('...AB,...kB->...kA',
                   cache.jet.J_at_nodes().reshape(topo.shape + (d, d)),
                   cache.frame)
    return -np.einsum('...k,...kA->...A', hvec, Je)


def step(imm, dt, cache=None, holonomy_gauge=False):
    """One explicit midpoint (RK2) update of the node coordinates along the
    ambient mean curvature vector.  Returns the advanced immersion."""
    c1 = geometry(imm) if cache is None else cache
    mid = imm.with_coords(imm.coords + 0.5 * dt * _velocity(c1, holonomy_gauge),
                          imm.time + 0.5 * dt)
    c2 = geometry(mid)
    return imm.with_coords(imm.coords + dt * _velocity(c2, holonomy_gauge),
                           imm.time + dt)


def run(imm0, config):
    """Integrate until convergence (sustained max|H| below tolerance),
    t_max, max_steps, or a flow error; diagnostics every monitor_stride
    steps.  Flow errors are recorded in the returned trace, not raised."""
    trace = FlowTrace(columns={c: [] for c in TRACE_COLUMNS}, snapshots=[],
                      initial_sqrtg=None)
    state = imm0
    prev_state = None
    cache = None
    lam1 = math.nan
    theta_ok = None
    eig_start = None
    conv_count = 0
    monitor_events = 0
    e_accum = 0.0
    prev_phi = None
    prev_t = 0.0
    det_floor = None

    nsteps = 0
    try:
        while True:
            cache = geometry(state)
            if det_floor is None:
                det_floor = config.collapse_floor * float(np.median(cache.detg))
                trace.initial_sqrtg = cache.sqrtg.copy()
            elif float(np.min(cache.detg)) < det_floor:
                raise DegenerateMetric(
                    f"induced metric collapsed below {config.collapse_floor:.1e} "
                    f"of its initial scale at t={state.time:.6g}")
            if cache.max_defect > config.defect_tol:
                raise DefectBlowup(
                    f"defect {cache.max_defect:.3e} above {config.defect_tol:.3e} "
                    f"at t={state.time:.6g}")

            monitor_now = (nsteps % config.monitor_stride == 0)
            if monitor_now:
                if theta_ok is None:
                    theta_ok = (closedness_residual(cache) <= config.tol_closed
                                and np.max(np.abs(
                                    _holonomy(cache))) < config.tol_holonomy)
                ints = integrals(cache)
                phi = float(np.max(np.sqrt(cache.abs_a2 * cache.abs_h2)
                                   + cache.abs_h2))
                if prev_phi is not None:
                    e_accum += 0.5 * (prev_phi + phi) * (state.time - prev_t)
                prev_phi, prev_t = phi, state.time
                if monitor_events % config.eig_stride == 0:
                    try:
                        spec = lowest_eigenpairs(cache, config.eig_count,
                                                 start=eig_start)
                        lam1 = spec.lambda1
                        eig_start = spec.eigenfunctions
                    except NoConvergence:
                        lam1 = math.nan
                th_res = h_res = math.nan
                if (config.track_residuals and prev_state is not None
                        and monitor_events % config.resid_stride == 0):
                    if theta_ok:
                        th_res = residual_theta(prev_state, state,
                                                tol_closed=config.tol_closed,
                                                tol_holonomy=np.inf)
                    h_res = residual_mean_curvature_evolution(prev_state, state)
                col = trace.columns
                col["t"].append(state.time)
                col["vol"].append(ints["vol"])
                col["l2h"].append(ints["l2h"])
                col["max_h"].append(ints["max_h"])
                col["max_a"].append(ints["max_a"])
                col["max_grad_a"].append(ints["max_grad_a"])
                col["lambda1"].append(lam1)
                col["defect"].append(cache.max_defect)
                col["e_accum"].append(e_accum)
                col["theta_resid"].append(th_res)
                col["h_resid"].append(h_res)
                trace.min_volume_ratio.append(
                    float(np.min(cache.sqrtg / trace.initial_sqrtg)))
                trace.holonomy_max.append(float(np.max(np.abs(_holonomy(cache)))))
                monitor_events += 1

                if ints["max_h"] < config.conv_tol:
                    conv_count += 1
                    if conv_count >= config.conv_window:
                        trace.status = "converged"
                        break
                else:
                    conv_count = 0

            snapshot_now = (config.snapshot_stride
                            and nsteps % config.snapshot_stride == 0)
            if (snapshot_now or nsteps == 0) and prev_state is not None:
                trace.snapshots.append((nsteps, prev_state, state))

            if state.time >= config.t_max:
                trace.status = "t_max"
                break
            if nsteps >= config.max_steps:
                trace.status = "max_steps"
                break

            dt = cfl_dt(cache, config.cfl)
            prev_state = state
            state = step(state, dt, cache, config.holonomy_gauge)
            nsteps += 1
    except LagflowError as exc:
        trace.status = "error"
        trace.error = str(exc)
        trace.error_type = type(exc).__name__
    if prev_state is not None and trace.snapshots and trace.snapshots[-1][0] != nsteps:
        trace.snapshots.append((nsteps, prev_state, state))
    elif prev_state is not None and not trace.snapshots:
        trace.snapshots.append((nsteps, prev_state, state))
    trace.t_final = state.time
    trace.steps = nsteps
    return trace


def _holonomy(cache):
    from .geometry import holonomy
    return holonomy(cache)


# ----------------------------------------------------------------------
# Evolution-equation residuals
# ----------------------------------------------------------------------

def residual_theta(imm_a, imm_b, tol_closed=1e-2, tol_holonomy=1e-5):
    """Sup-norm residual of the angle heat equation
    d theta / dt = Laplace theta + (Rbar / 2n) theta
    between two snapshots adjacent in time.  Both potentials are mean-zero;
    the later one is shifted by the constant that minimizes the residual
    (the mean-zero gauge is not flow-invariant)."""
    delta = imm_b.time - imm_a.time
    if delta <= 0:
        raise ValueError("snapshots must be ordered in time")
    ca = geometry(imm_a)
    cb = geometry(imm_b)
    th_a, _, exact_a = angle_potential(ca, tol_closed, tol_holonomy)
    th_b, _, exact_b = angle_potential(cb, tol_closed, tol_holonomy)
    if not (exact_a and exact_b):
        raise NotClosed("snapshots do not carry an exact mean curvature form")
    c = imm_a.space.einstein_constant
    lap = 0.5 * (laplace_apply(ca, th_a) + laplace_apply(cb, th_b))
    base = (th_b - th_a) / delta - lap - c * 0.5 * (th_a + th_b)
    slope = 1.0 / delta - 0.5 * c
    kappa = -0.5 * (np.max(base) + np.min(base)) / slope
    return float(np.max(np.abs(base + kappa * slope)))


def _evolution_rhs(cache, ablate_curvature=False):
    """Covariant right side of the mean curvature evolution equation for
    the 1-form components at fixed grid nodes:
    rough Laplacian + (h h) contraction + ambient curvature term - cubic."""
    imm = cache.imm
    topo = imm.topology
    du = topo.spacings
    n = topo.ndim
    gam = intrinsic_christoffels(cache)
    alpha, ginv, h, hvec = cache.alpha, cache.ginv, cache.h, cache.hvec

    da = np.stack([grid_partial(alpha, a, du[a]) for a in range(n)], axis=-2)
    T = da - np.einsum('...pmi,...p->...mi', gam, alpha)      # nabla_m alpha_i
    dT = np.stack([grid_partial(T, a, du[a]) for a in range(n)], axis=-3)
    nab2 = (dT
            - np.einsum('...plm,...pi->...lmi', gam, T)
            - np.einsum('...pli,...mp->...lmi', gam, T))
    rough = np.einsum('...lm,...lmi->...i', ginv, nab2)

    hh = np.einsum('...mkl,...abi,...ma,...kb,...l->...i', h, h, ginv, ginv, hvec)

    cubic = np.einsum('...m,...l,...mil->...i', hvec, hvec, h)

    rhs = rough + hh - cubic
    if not ablate_curvature:
        jet = imm.space.jet(imm.flat_coords, curvature=True)
        Jn = jet.J_at_nodes()
        e = cache.frame.reshape(-1, n, jet.g.shape[-1])
        Je = np.einsum('xab,xkb->xka', Jn, e)
        # g^{ka} Rm(J e_i, e_k, J e_l, e_a) H^l
        rm_frame = np.einsum('xABCD,xiA,xkB,xlC,xaD->xikla',
                             jet.riemann, Je, e, Je, e)
        curv = np.einsum('xikla,xka,xl->xi',
                         rm_frame, ginv.reshape(-1, n, n),
                         hvec.reshape(-1, n))
        rhs = rhs + curv.reshape(rhs.shape)
    return rhs


def residual_mean_curvature_evolution(imm_a, imm_b, ablate_curvature=False):
    """Sup-norm residual of the mean curvature evolution equation between
    two adjacent snapshots, in fixed-node covariant components; the right
    side is averaged over the two states (second order in the time gap).

    ``ablate_curvature`` drops the ambient curvature contraction, which
    should inflate the residual wherever the ambient is curved."""
    delta = imm_b.time - imm_a.time
    if delta <= 0:
        raise ValueError("snapshots must be ordered in time")
    ca = geometry(imm_a)
    cb = geometry(imm_b)
    measured = (cb.alpha - ca.alpha) / delta
    rhs = 0.5 * (_evolution_rhs(ca, ablate_curvature)
                 + _evolution_rhs(cb, ablate_curvature))
    return float(np.max(np.abs(measured - rhs)))
