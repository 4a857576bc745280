"""Hamiltonian deformations (motion along J grad f) and the variation
formulas of minimal Lagrangians: angle response and second variation of
volume."""

import numpy as np

from .errors import NotMinimal, SpectrumTruncation
from .geometry import (_as_cache, angle_potential, geometry, grid_partial,
                       integrals)
from .spectral import classify_variation, laplace_apply

MINIMAL_TOL = 1e-5


def generator_field(cache, f):
    """Ambient vector field J grad f per node (grid-shaped)."""
    topo = cache.imm.topology
    du = topo.spacings
    n = topo.ndim
    df = np.stack([grid_partial(f, a, du[a]) for a in range(n)], axis=-1)
    grad = np.einsum('...ab,...b->...a', cache.ginv, df)
    tangent = np.einsum('...a,...ad->...d', grad, cache.frame)
    J = cache.jet.J_at_nodes().reshape(topo.shape + (cache.imm.space.real_dim,) * 2)
    return np.einsum('...AB,...B->...A', J, tangent)


def hamiltonian_form_residual(imm_or_cache, f):
    """Sup-norm of  i_X omega + df  for X = J grad f on the given state.

    With the orientation conventions used here (omega(u, v) = g(Ju, v))
    the contraction of the generator with the Kahler form equals -df."""
    cache = _as_cache(imm_or_cache)
    topo = cache.imm.topology
    du = topo.spacings
    n = topo.ndim
    X = generator_field(cache, f)
    J = cache.jet.J_at_nodes().reshape(topo.shape + X.shape[-1:] * 2)
    g = cache.jet.g.reshape(topo.shape + X.shape[-1:] * 2)
    JX = np.einsum('...AB,...B->...A', J, X)
    contraction = np.einsum('...A,...AB,...iB->...i', JX, g, cache.frame)
    df = np.stack([grid_partial(f, a, du[a]) for a in range(n)], axis=-1)
    return float(np.max(np.abs(contraction + df)))


def deform(base, f, s, substep=0.01):
    """Move a Lagrangian along J grad f by parameter s with RK2 substeps;
    the potential is transported as a fixed function of the grid parameter."""
    if s == 0:
        return base
    nsub = max(1, int(np.ceil(abs(s) / substep)))
    ds = s / nsub
    state = base
    for _ in range(nsub):
        c1 = geometry(state)
        k1 = generator_field(c1, f)
        mid = state.with_coords(state.coords + 0.5 * ds * k1)
        c2 = geometry(mid)
        k2 = generator_field(c2, f)
        state = state.with_coords(state.coords + ds * k2)
    return state


def _require_minimal(cache, tol):
    if cache.max_h >= tol:
        raise NotMinimal(
            f"base state has max|H| = {cache.max_h:.3e} >= {tol:.1e}")


def angle_variation_residual(base, f, ds=1e-3, minimal_tol=MINIMAL_TOL,
                             substep=0.01, tol_closed=1e-2, tol_holonomy=np.inf):
    """Sup-norm residual of  d theta / ds = -Laplace f - (Rbar/2n) f
    across a centered pair of deformations of a minimal base.

    The additive gauge constant of the potentials is chosen to minimize
    the residual."""
    cache = geometry(base)
    _require_minimal(cache, minimal_tol)
    plus = deform(base, f, +ds, substep)
    minus = deform(base, f, -ds, substep)
    th_p, _, _ = angle_potential(geometry(plus), tol_closed, tol_holonomy)
    th_m, _, _ = angle_potential(geometry(minus), tol_closed, tol_holonomy)
    c = base.space.einstein_constant
    fl = np.asarray(f, float)
    w = cache.node_weights
    f0 = fl - np.sum(w * fl) / np.sum(w)
    base_resid = (th_p - th_m) / (2 * ds) + laplace_apply(cache, f0) + c * f0
    # gauge freedom: a constant in (th_p - th_m)/(2 ds)
    kappa = -0.5 * (np.max(base_resid) + np.min(base_resid))
    return float(np.max(np.abs(base_resid + kappa)))


def second_variation(base, f, ds=1e-3, minimal_tol=MINIMAL_TOL, k=12,
                     capture=0.999, substep=0.01, spectrum=None,
                     cluster_rtol=1e-3, richardson=True):
    """Second variation of volume along J grad f, by two routes:

    - fd_value: centered second difference of Vol across deformations,
      with a Richardson consistency companion at 2*ds;
    - spectral_value: sum a_i^2 lambda_i (lambda_i - Rbar/2n) over the
      computed eigenbasis.

    Raises SpectrumTruncation when the eigenbasis captures less than
    ``capture`` of the potential's norm."""
    cache = geometry(base)
    _require_minimal(cache, minimal_tol)

    res = classify_variation(cache, f, spectrum=spectrum, k=k,
                             cluster_rtol=cluster_rtol)
    spec = res['spectrum']
    coeff = res['coefficients']
    norm2 = res['norm'] ** 2
    captured = float(np.sum(coeff ** 2))
    if captured < capture * norm2:
        raise SpectrumTruncation(
            f"eigenbasis captures {captured / norm2:.2%} of the potential "
            f"(needs {capture:.1%}); raise k")
    c = base.space.einstein_constant
    lam = spec.eigenvalues
    spectral_value = float(np.sum(coeff ** 2 * lam * (lam - c)))

    def vol_at(sv):
        return integrals(geometry(deform(base, f, sv, substep)))['vol']

    v0 = integrals(cache)['vol']
    fd = (vol_at(ds) - 2 * v0 + vol_at(-ds)) / ds ** 2
    out = {'fd_value': fd, 'spectral_value': spectral_value,
           'captured_fraction': captured / norm2}
    if richardson:
        fd2 = (vol_at(2 * ds) - 2 * v0 + vol_at(-2 * ds)) / (2 * ds) ** 2
        out['fd_value_coarse'] = fd2
    return out
