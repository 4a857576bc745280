"""NumPy reference implementation of the per-node geometry kernels.

These two functions are the hot inner loop of the flow integrator.  A
compiled Cython twin lives in ``_fastcore.pyx``; both must produce
bit-compatible results up to floating point reassociation (the parity test
pins them to ~1e-14).
"""

import numpy as np

COMPILED = False


def fubini_study_jet(pts, scale=1.0, want_curvature=False):
    """Metric, complex structure, Christoffels and curvature of the affine
    chart of CP^2 at a batch of points.

    ``pts`` has shape (m, 4) with real coordinates (x1, y1, x2, y2) of
    (w1, w2).  The base normalization (scale=1) has constant holomorphic
    sectional curvature 4, Einstein constant 6 and scalar curvature 24;
    ``scale`` multiplies the metric, dividing curvatures accordingly.

    Returns (g, J, gamma, riemann) with shapes (m,4,4), (4,4), (m,4,4,4),
    (m,4,4,4,4); ``riemann`` is None unless requested.
    """
    pts = np.asarray(pts, dtype=float)
    m = pts.shape[0]
    w = pts[:, 0::2] + 1j * pts[:, 1::2]          # (m, 2) complex
    wbar = w.conj()
    den = 1.0 + np.sum((w * wbar).real, axis=1)   # (m,)

    eye2 = np.eye(2)
    # Hermitian matrix H[k, l] = h_{k lbar}
    H = (eye2[None] * den[:, None, None]
         - wbar[:, :, None] * w[:, None, :]) / den[:, None, None] ** 2
    Hinv = den[:, None, None] * (eye2[None] + w[:, :, None] * wbar[:, None, :])

    # dH[j, k, l] = d/dw_j h_{k lbar}
    dH = np.empty((m, 2, 2, 2), dtype=complex)
    for j in range(2):
        for k in range(2):
            for l in range(2):
                dH[:, j, k, l] = (-(eye2[k, l] * wbar[:, j] + eye2[j, l] * wbar[:, k]) / den ** 2
                                  + 2.0 * wbar[:, k] * w[:, l] * wbar[:, j] / den ** 3)

    # Holomorphic Christoffels G^i_{jk}; the raising tensor with index
    # pattern [i, m] is den (delta + w_i wbar_m), the conjugate-transpose
    # of the matrix inverse of H[k, m].
    Gc = np.einsum('xim,xjkm->xijk', Hinv, dH)

    # Real metric g_AB = scale * Re(H[k, l] phi_A^k conj(phi_B^l)),
    # phi maps real basis vectors to complex components: x_j -> e_j, y_j -> i e_j.
    phi = np.zeros((4, 2), dtype=complex)
    for j in range(2):
        phi[2 * j, j] = 1.0
        phi[2 * j + 1, j] = 1j
    g = scale * np.einsum('xkl,ak,bl->xab', H, phi, phi.conj()).real

    # Real Christoffels from the holomorphic ones (scale-invariant).
    c = np.einsum('xijk,aj,bk->xiab', Gc, phi, phi)
    gamma = np.empty((m, 4, 4, 4))
    gamma[:, 0::2] = c.real
    gamma[:, 1::2] = c.imag

    J = np.zeros((4, 4))
    for j in range(2):
        J[2 * j + 1, 2 * j] = 1.0
        J[2 * j, 2 * j + 1] = -1.0

    riemann = constant_holomorphic_riemann(g, J, 4.0 / scale) if want_curvature else None
    return g, J, gamma, riemann


def constant_holomorphic_riemann(g, J, c_hol):
    """Curvature tensor of a complex space form from its metric and complex
    structure: the constant-holomorphic-sectional-curvature formula."""
    if J.ndim == 2:
        om = np.einsum('ea,xec->xac', J, g)
    else:
        om = np.einsum('xea,xec->xac', J, g)
    gg = np.einsum('xac,xbd->xabcd', g, g)
    oo = np.einsum('xac,xbd->xabcd', om, om)
    term = (gg - gg.transpose(0, 1, 2, 4, 3)
            + oo - oo.transpose(0, 1, 2, 4, 3)
            + 2.0 * np.einsum('xab,xcd->xabcd', om, om))
    return 0.25 * c_hol * term


def constant_sectional_riemann(g, curv):
    """Curvature tensor K (g_AC g_BD - g_AD g_BC) of a constant-curvature
    surface chart; ``curv`` may be scalar or per-point."""
    gg = np.einsum('xac,xbd->xabcd', g, g)
    rm = gg - gg.transpose(0, 1, 2, 4, 3)
    if np.ndim(curv) == 0:
        return curv * rm
    return curv[:, None, None, None, None] * rm


def fundamental_tables(e, d2f, gamma, J, g_amb):
    """Second-fundamental-form tables of an immersed Lagrangian at a batch
    of nodes.

    Parameters (m nodes, n intrinsic dims, d = 2n ambient dims):
      e      (m, n, d)     frame vectors dF/du_a
      d2f    (m, n, n, d)  second parameter derivatives
      gamma  (m, d, d, d)  ambient Christoffels (index order [A, B, C] for
                           Gamma^A_{BC}), or None when identically zero
      J      (d, d) or (m, d, d)  ambient complex structure
      g_amb  (m, d, d)     ambient metric

    Returns a dict of per-node arrays: induced metric g, its inverse and
    determinant, the all-lower second fundamental form h[k,i,j], the mean
    curvature form alpha, raised vector hvec, ambient mean curvature vector
    h_amb, |A|^2, |H|^2 and the symplectic defect omega(e_i, e_j).
    """
    if gamma is None:
        nab = d2f
    else:
        nab = d2f + np.einsum('xabc,xib,xjc->xija', gamma, e, e)
    if J.ndim == 2:
        Je = np.einsum('ab,xkb->xka', J, e)
    else:
        Je = np.einsum('xab,xkb->xka', J, e)
    gJe = np.einsum('xka,xab->xkb', Je, g_amb)
    h = -np.einsum('xkb,xijb->xkij', gJe, nab)
    g = np.einsum('xia,xab,xjb->xij', e, g_amb, e)
    g = 0.5 * (g + g.transpose(0, 2, 1))
    det, ginv = _inv_sym(g)
    alpha = np.einsum('xij,xkij->xk', ginv, h)
    hvec = np.einsum('xkl,xl->xk', ginv, alpha)
    h_amb = -np.einsum('xk,xka->xa', hvec, Je)
    abs_h2 = np.einsum('xk,xk->x', alpha, hvec)
    abs_a2 = np.einsum('xkij,xlpq,xkl,xip,xjq->x', h, h, ginv, ginv, ginv,
                       optimize=True)
    defect = np.einsum('xka,xab,xjb->xkj', Je, g_amb, e)
    return {
        'g': g, 'ginv': ginv, 'det': det, 'h': h, 'alpha': alpha,
        'hvec': hvec, 'h_amb': h_amb, 'abs_a2': abs_a2, 'abs_h2': abs_h2,
        'defect': defect, 'Je': Je, 'nab': nab,
    }


def _inv_sym(g):
    """Determinant and inverse of a batch of small symmetric matrices."""
    n = g.shape[-1]
    if n == 1:
        det = g[:, 0, 0]
        ginv = (1.0 / det)[:, None, None]
        return det, ginv
    if n == 2:
        a, b, c = g[:, 0, 0], g[:, 0, 1], g[:, 1, 1]
        det = a * c - b * b
        ginv = np.empty_like(g)
        ginv[:, 0, 0] = c
        ginv[:, 1, 1] = a
        ginv[:, 0, 1] = -b
        ginv[:, 1, 0] = -b
        ginv /= det[:, None, None]
        return det, ginv
    det = np.linalg.det(g)
    return det, np.linalg.inv(g)
