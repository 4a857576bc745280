"""Inequality, class-membership and decay-rate checks evaluated on flow
traces and states.  Every check returns a dict {name, pass, margin,
witnesses} so reports can aggregate them uniformly."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .errors import ScaleViolation, WindowTooShort
from .geometry import (_as_cache, covariant_grad_h_norm, grid_partial,
                       holonomy, integrals, intrinsic_christoffels)
from .spectral import lowest_eigenpairs

TOL_INEQ = 0.05
L2H_FLOOR = 1e-12
L2H_CEIL = 1e-2


@dataclass
class ClassParams:
    """Thresholds of the noncollapsed classes: kappa/r (noncollapsing),
    Lambda (|A|), epsilon (|H|), and the optional eigenvalue margin delta
    for the exact-form class."""
    kappa: float
    r: float
    big_lambda: float
    epsilon: float
    delta: float | None = None

    def __post_init__(self):
        vals = [self.kappa, self.r, self.big_lambda, self.epsilon]
        if self.delta is not None:
            vals.append(self.delta)
        if any(v <= 0 for v in vals):
            raise ValueError("class parameters must be positive")


def _check(name, ok, margin, witnesses):
    return {"name": name, "pass": bool(ok), "margin": float(margin),
            "witnesses": witnesses}


# ----------------------------------------------------------------------
# Noncollapsing
# ----------------------------------------------------------------------

def _grid_graph(cache):
    """Sparse graph of metric edge lengths: 2-neighbor stencil on curves,
    8-neighbor on surfaces."""
    topo = cache.imm.topology
    n = topo.ndim
    du = topo.spacings
    g = cache.g
    nn = topo.node_count
    idx = np.arange(nn).reshape(topo.shape)
    steps = [(1,)] if n == 1 else [(1, 0), (0, 1), (1, 1), (1, -1)]
    rows, cols, vals = [], [], []
    for sv in steps:
        nb = idx
        for a, s in enumerate(sv):
            nb = np.roll(nb, -s, axis=a)
        dvec = np.array([sv[a] * du[a] for a in range(n)])
        quad = np.einsum('...ab,a,b->...', g, dvec, dvec)
        quad_nb = np.einsum('...ab,a,b->...',
                            np.roll(g, [-s for s in sv] + [0, 0],
                                    axis=tuple(range(n)) + (n, n + 1)), dvec, dvec)
        length = np.sqrt(0.5 * (quad + quad_nb)).reshape(-1)
        rows.append(idx.reshape(-1))
        cols.append(nb.reshape(-1))
        vals.append(length)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    # one direction per edge; dijkstra(directed=False) walks both ways
    return sp.coo_matrix((vals, (rows, cols)), shape=(nn, nn))


def noncollapse_estimate(imm_or_cache, r, sample_count=20, seed=0):
    """Worst ball-volume ratio kappa = min Vol(B(q, s)) / s^n over sampled
    centers and radii s in {r/4, r/2, r}, with graph-metric distances."""
    cache = _as_cache(imm_or_cache)
    topo = cache.imm.topology
    n = topo.ndim
    graph = _grid_graph(cache)
    w = cache.node_weights.reshape(-1)
    rng = np.random.default_rng(seed)
    nn = topo.node_count
    centers = rng.integers(0, nn, size=min(sample_count, nn))
    dist = dijkstra(graph.tocsr(), directed=False, indices=centers)
    kappa = np.inf
    witness = None
    for s in (r / 4, r / 2, r):
        inside = dist <= s
        vols = inside @ w
        ratios = vols / s ** n
        i = int(np.argmin(ratios))
        if ratios[i] < kappa:
            kappa = float(ratios[i])
            witness = {"radius": s, "center_node": int(centers[i]),
                       "ball_volume": float(vols[i])}
    return kappa, witness


def class_membership(imm_or_cache, params, family="A", lambda1=None,
                     sample_count=20, seed=0, tol_holonomy=1e-5):
    """Membership in the noncollapsed class: |A|, |H| and kappa bounds,
    plus the eigenvalue margin and exactness for the exact-form class B."""
    cache = _as_cache(imm_or_cache)
    ints = integrals(cache)
    kappa_hat, ball = noncollapse_estimate(cache, params.r, sample_count, seed)
    witnesses = {
        "max_a": ints["max_a"], "max_h": ints["max_h"],
        "kappa_hat": kappa_hat, "ball": ball,
    }
    ok = (ints["max_a"] <= params.big_lambda
          and ints["max_h"] <= params.epsilon
          and kappa_hat >= params.kappa)
    if family.upper() == "B":
        if params.delta is None:
            raise ValueError("class B requires the eigenvalue margin delta")
        if lambda1 is None:
            lambda1 = lowest_eigenpairs(cache, 1).lambda1
        hol = holonomy(cache)
        rbar2n = cache.imm.space.einstein_constant
        witnesses.update({"lambda1": float(lambda1),
                          "holonomy": [float(x) for x in hol],
                          "required_lambda1": rbar2n + params.delta})
        ok = (ok and lambda1 >= rbar2n + params.delta
              and np.max(np.abs(hol)) < tol_holonomy)
    margins = [params.big_lambda - ints["max_a"],
               params.epsilon - ints["max_h"],
               kappa_hat - params.kappa]
    return _check(f"class_{family}", ok, min(margins), witnesses)


# ----------------------------------------------------------------------
# Trace-level checks
# ----------------------------------------------------------------------

def _valid_pairs(t, l2h, floor_mult=30.0):
    """Monitor-time pairs above the resolvable decay regime: the log
    derivative of l2h is meaningless once it sits on the discretization
    floor, taken as a multiple of the smallest positive value seen.  When
    the trace never spans that dynamic range, no floor is identifiable and
    only the absolute cutoff applies."""
    pos = l2h[l2h > 0]
    if pos.size == 0:
        return []
    candidate = floor_mult * float(np.min(pos))
    if candidate >= 0.5 * float(np.max(pos)):
        # the whole trace sits within one floor's dynamic range: the log
        # derivative carries no signal anywhere
        return []
    floor = max(L2H_FLOOR, candidate)
    ok = l2h > floor
    return [(i, i + 1) for i in range(len(t) - 1)
            if ok[i] and ok[i + 1] and t[i + 1] > t[i]]


def gronwall_check(trace, rbar, n, exact=False, tol=TOL_INEQ,
                   holonomy_tol=None):
    """Log-derivative of the L2 mean curvature against its differential
    bound: (Rbar/n + 2 Lambda eps) in general, or
    -2 (lambda1 - Rbar/2n - Lambda eps) when the form is exact.  Returns
    the worst relative margin (negative = violation).

    The exact-form bound presumes the form stays exact; when the trace
    carries holonomy samples and ``holonomy_tol`` is given, pairs where
    the form has drifted out of the exact class are excluded."""
    t = trace.column("t")
    l2h = trace.column("l2h")
    max_a = trace.column("max_a")
    max_h = trace.column("max_h")
    lam1 = trace.column("lambda1")
    worst = np.inf
    witness = {}
    pairs = _valid_pairs(t, l2h)
    if exact and holonomy_tol is not None and trace.holonomy_max:
        hol = np.asarray(trace.holonomy_max)
        pairs = [(i, j) for i, j in pairs
                 if hol[i] < holonomy_tol and hol[j] < holonomy_tol]
    for i, j in pairs:
        measured = (np.log(l2h[j]) - np.log(l2h[i])) / (t[j] - t[i])
        lam_eps = max(max_a[i], max_a[j]) * max(max_h[i], max_h[j])
        if exact:
            lam = lam1[i] if np.isfinite(lam1[i]) else lam1[j]
            bound = -2.0 * (lam - rbar / (2 * n) - lam_eps)
        else:
            bound = rbar / n + 2.0 * lam_eps
        scale = max(abs(bound), abs(measured), 1e-10)
        margin = (bound - measured) / scale
        if margin < worst:
            worst = margin
            witness = {"t": float(t[i]), "measured_rate": float(measured),
                       "bound_rate": float(bound)}
    name = "gronwall_exact" if exact else "gronwall"
    if not pairs:
        return _check(name, True, np.inf, {"note": "no pairs above floor"})
    return _check(name, worst >= -tol, worst, witness)


def decay_rate_fit(trace, window=None, min_samples=20):
    """Least-squares slope of log integral |H|^2 over a window inside
    [floor, ceiling]; gamma = -slope/2 is the |H| decay rate."""
    t = trace.column("t")
    l2h = trace.column("l2h")
    if window is None:
        window = auto_fit_window(trace)
    lo, hi = window
    mask = (t >= lo) & (t <= hi) & (l2h > 0)
    if int(np.sum(mask)) < min_samples:
        raise WindowTooShort(
            f"{int(np.sum(mask))} samples in window {window}; need {min_samples}")
    x, y = t[mask], np.log(l2h[mask])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    resid = y - A @ coef
    se = float(np.sqrt(np.sum(resid ** 2) / max(len(x) - 2, 1)
                       / np.sum((x - x.mean()) ** 2)))
    return {"slope": slope, "gamma": -0.5 * slope, "stderr": se,
        "ci95": (slope - 1.96 * se, slope + 1.96 * se),
        "window": (float(lo), float(hi)), "samples": int(np.sum(mask))}


def auto_fit_window(trace, floor=L2H_FLOOR, ceil=L2H_CEIL, floor_mult=30.0):
    """Window selection honoring the fit preconditions: measure the decay
    phase only (up to the global minimum of l2h), skip the initial
    transient above the ceiling, and stop before the discretization floor
    (a multiple of the smallest value seen).  The ceiling adapts upward
    for initial data whose l2h starts well above it."""
    t = trace.column("t")
    l2h = trace.column("l2h")
    stop = int(np.argmin(np.where(l2h > 0, l2h, np.inf))) + 1
    t, l2h = t[:stop], l2h[:stop]
    pos = l2h[l2h > 0]
    if pos.size == 0:
        return (float(t[0]), float(t[-1]))
    ceil_val = max(ceil, 0.3 * float(np.max(pos)))
    lo_val = max(floor, floor_mult * float(np.min(pos)))
    usable = (l2h <= ceil_val) & (l2h >= lo_val)
    if not np.any(usable):
        return (float(t[0]), float(t[-1]))
    idx = np.where(usable)[0]
    return (float(t[idx[0]]), float(t[idx[-1]]))


def eigen_bound_check(trace, rbar, n, k0, tol=TOL_INEQ, floor=L2H_FLOOR):
    """Lower bound on sqrt(lambda1) from the decaying envelope
    eps e^{-gamma t} of |H| + |grad H|: sqrt(lambda1(t)) >=
    sqrt(lambda1(0)) e^{-(2 Lambda eps + eps^2)/(2 gamma)}
    - (K0 + Lambda) eps / gamma.

    The envelope uses max_h + sqrt(n) * max_grad_a from the trace, an
    upper bound for |H| + |grad H| expressible in stored columns."""
    t = trace.column("t")
    l2h = trace.column("l2h")
    lam1 = trace.column("lambda1")
    env = trace.column("max_h") + np.sqrt(n) * trace.column("max_grad_a")
    ok = (l2h > floor) & np.isfinite(lam1) & (env > 0)
    if int(np.sum(ok)) < 3:
        return _check("eigen_bound", True, np.inf, {"note": "too few samples"})
    x, y = t[ok], np.log(env[ok])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    gamma = -float(coef[0])
    eps = float(np.exp(coef[1]))
    lam0 = lam1[ok][0]
    if gamma <= 1e-12:
        return _check("eigen_bound", True, np.inf,
                      {"note": "no decay fitted", "gamma": gamma})
    big_lambda = float(np.max(trace.column("max_a")[ok]))
    rhs = (np.sqrt(lam0) * np.exp(-(2 * big_lambda * eps + eps ** 2) / (2 * gamma))
           - (k0 + big_lambda) * eps / gamma)
    margins = (np.sqrt(lam1[ok]) - rhs) / np.sqrt(lam0)
    i = int(np.argmin(margins))
    witness = {"eps": eps, "gamma": gamma, "bound_sqrt_lambda1": float(rhs),
               "t": float(x[i]), "lambda1": float(lam1[ok][i])}
    return _check("eigen_bound", margins[i] >= -tol, float(margins[i]), witness)


def volume_monotonic_check(trace, tol_mono_rel=1e-10):
    """Volume must be non-increasing between monitor times (up to a
    rounding budget proportional to the initial volume)."""
    vol = trace.column("vol")
    diffs = np.diff(vol)
    worst = float(np.min(-diffs / vol[0])) if len(diffs) else np.inf
    i = int(np.argmax(diffs)) if len(diffs) else 0
    return _check("volume_monotonic", np.all(diffs <= tol_mono_rel * vol[0]),
                  worst, {"t": float(trace.column("t")[i]),
                          "worst_increase": float(np.max(diffs)) if len(diffs) else 0.0})


def volume_form_bound_check(trace, n, tol_e=TOL_INEQ):
    """Pointwise volume-form lower bound: min_nodes sqrt(g_t)/sqrt(g_0)
    >= e^{-(n+1) E(t)} (1 - tol)."""
    if not trace.min_volume_ratio:
        return _check("volume_form_bound", True, np.inf,
                      {"note": "state ratios not tracked"})
    ratios = np.asarray(trace.min_volume_ratio)
    bound = np.exp(-(n + 1) * trace.column("e_accum")) * (1 - tol_e)
    margins = ratios - bound
    i = int(np.argmin(margins))
    return _check("volume_form_bound", bool(np.all(margins >= 0)),
                  float(margins[i]),
                  {"t": float(trace.column("t")[i]), "ratio": float(ratios[i]),
                   "bound": float(bound[i])})


def short_time_doubling_check(trace):
    """First time max|A| or max|H| exceeds twice its initial value
    (infinity when never); the check passes when that time is positive."""
    t = trace.column("t")
    max_a = trace.column("max_a")
    max_h = trace.column("max_h")
    bad = (max_a > 2 * max_a[0] + 1e-30) | (max_h > 2 * max_h[0] + 1e-30)
    if np.any(bad):
        t_double = float(t[np.argmax(bad)])
    else:
        t_double = np.inf
    return _check("short_time_doubling", t_double > 0, t_double,
                  {"doubling_time": t_double})


# ----------------------------------------------------------------------
# State-level checks
# ----------------------------------------------------------------------

def c0_from_l2_check(imm_or_cache, kappa_hat, r, tol=TOL_INEQ):
    """Sup-norm of H against the noncollapsing interpolation bound
    (1/sqrt(kappa) + Lambda) eps^{1/(n+2)} with Lambda = max|grad H| and
    eps = integral |H|^2, valid while eps <= r^{n+2}."""
    cache = _as_cache(imm_or_cache)
    n = cache.imm.topology.ndim
    ints = integrals(cache)
    eps = ints["l2h"]
    if eps > r ** (n + 2):
        raise ScaleViolation(f"l2h = {eps:.3e} above r^(n+2) = {r ** (n + 2):.3e}")
    lam = float(np.sqrt(np.max(covariant_grad_h_norm(cache))))
    bound = (1.0 / np.sqrt(kappa_hat) + lam) * eps ** (1.0 / (n + 2))
    margin = bound - ints["max_h"]
    rel = margin / max(bound, 1e-30)
    return _check("c0_from_l2", rel >= -tol, rel,
                  {"bound": bound, "max_h": ints["max_h"],
                   "grad_h": lam, "l2h": eps})


def vector_field_inequality_check(imm_or_cache, X=None, seed=0, trials=1,
                                  tol=TOL_INEQ):
    """Integrated inequality for tangent fields:
    int |nabla X|^2 - (h h X X)  >=  int (div X)^2 - (H h X X) - (Rbar X X).
    ``X`` is a grid field of contravariant components; when omitted, smooth
    random fields are generated (``trials`` of them).  Returns the worst
    trial."""
    cache = _as_cache(imm_or_cache)
    topo = cache.imm.topology
    n = topo.ndim
    du = topo.spacings
    gam = intrinsic_christoffels(cache)
    w = cache.node_weights
    jet = cache.imm.space.jet(cache.imm.flat_coords, curvature=True)
    d = cache.imm.space.real_dim
    rm = jet.riemann.reshape(topo.shape + (d,) * 4)

    def evaluate(Xf):
        dX = np.stack([grid_partial(Xf, a, du[a]) for a in range(n)], axis=-2)
        nab = dX + np.einsum('...kim,...m->...ik', gam, Xf)
        lhs_grad = float(np.sum(np.einsum('...ik,...jl,...ij,...kl->...',
                                          nab, nab, cache.ginv, cache.g) * w))
        hh = np.einsum('...lkm,...ipq,...kp,...mq->...li',
                       cache.h, cache.h, cache.ginv, cache.ginv)
        lhs_hh = float(np.sum(np.einsum('...li,...l,...i->...', hh, Xf, Xf) * w))
        div = np.einsum('...ii->...', nab)
        rhs_div = float(np.sum(div ** 2 * w))
        Hh = np.einsum('...m,...mil->...il', cache.hvec, cache.h)
        rhs_h = float(np.sum(np.einsum('...il,...i,...l->...', Hh, Xf, Xf) * w))
        e = cache.frame
        rm_t = np.einsum('...ABCD,...kA,...iB,...pC,...lD->...kipl',
                         rm, e, e, e, e)
        ric_like = np.einsum('...kipl,...kp->...il', rm_t, cache.ginv)
        rhs_rm = float(np.sum(np.einsum('...il,...i,...l->...',
                                        ric_like, Xf, Xf) * w))
        lhs = lhs_grad - lhs_hh
        rhs = rhs_div - rhs_h - rhs_rm
        scale = max(abs(lhs), abs(rhs), 1e-30)
        return (lhs - rhs) / scale, {"lhs": float(lhs), "rhs": float(rhs)}

    if X is not None:
        margin, witness = evaluate(np.asarray(X, float))
        return _check("vector_field_inequality", margin >= -tol, margin, witness)

    rng = np.random.default_rng(seed)
    worst = np.inf
    witness = {}
    for trial in range(trials):
        Xf = _random_smooth_field(topo, rng)
        margin, wit = evaluate(Xf)
        if margin < worst:
            worst, witness = margin, dict(wit, trial=trial)
    return _check("vector_field_inequality", worst >= -tol, worst, witness)


def _random_smooth_field(topo, rng, modes=3):
    shape = topo.shape + (topo.ndim,)
    X = np.zeros(shape)
    mesh = topo.mesh()
    for _ in range(modes):
        k = rng.integers(-3, 4, size=topo.ndim)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal(size=topo.ndim)
        wave = np.cos(2 * np.pi * sum(k[a] * mesh[a] for a in range(topo.ndim))
                      + phase)
        X += wave[..., None] * amp
    return X


def mean_curvature_field(cache):
    """The tangent-lift components H^i of the mean curvature, the natural
    field for the integrated inequality."""
    return cache.hvec
