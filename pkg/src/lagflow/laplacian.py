"""Discrete Laplace-Beltrami operator on the periodic parameter grid.

The operator is assembled in Galerkin (flux) form from an induced metric
field: a symmetric positive-semidefinite stiffness matrix K with constants
as its only null space, and a lumped diagonal mass matrix M carrying the
volume weights.  ``-M^{-1} K`` is the discrete Laplacian; by construction
it is exactly self-adjoint and nonpositive in the M-weighted inner product.

n = 1 uses the standard midpoint flux form; n = 2 uses bilinear elements
with 2x2 Gauss quadrature, which handles off-diagonal metric components
without introducing checkerboard null modes.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def mass_diagonal(detg, spacings):
    """Lumped mass weights sqrt(det g) * prod(du) per node, flattened."""
    cell = float(np.prod(spacings))
    return np.sqrt(detg).reshape(-1) * cell


def stiffness(g, detg, spacings):
    """Stiffness matrix of the Dirichlet energy  int g^{ab} f_a f_b dmu
    on the periodic grid.  ``g`` is the induced metric field with shape
    (N1[, N2], n, n); returns a CSR matrix over flattened nodes."""
    shape = g.shape[:-2]
    n = g.shape[-1]
    sqrtg = np.sqrt(detg)
    if n == 1:
        return _stiffness_1d(g, sqrtg, spacings)
    if n == 2:
        return _stiffness_2d(g, sqrtg, spacings)
    raise ValueError(f"unsupported intrinsic dimension {n}")


def _stiffness_1d(g, sqrtg, spacings):
    N = g.shape[0]
    du = spacings[0]
    w = sqrtg / g[:, 0, 0]            # sqrt(g) g^{11}
    w_edge = 0.5 * (w + np.roll(w, -1)) * du / du ** 2   # edge i -> i+1
    i = np.arange(N)
    j = (i + 1) % N
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([w_edge, w_edge, -w_edge, -w_edge])
    return sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()


def _stiffness_2d(g, sqrtg, spacings):
    N1, N2 = g.shape[0], g.shape[1]
    du1, du2 = spacings
    nn = N1 * N2

    # conductivity sqrt(g) g^{ab} per node
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    w11 = sqrtg * g[..., 1, 1] / det
    w22 = sqrtg * g[..., 0, 0] / det
    w12 = -sqrtg * g[..., 0, 1] / det

    # cell corner indices (cell (i,j) spans nodes (i,j)..(i+1,j+1), periodic)
    I, Jm = np.meshgrid(np.arange(N1), np.arange(N2), indexing='ij')
    Ip, Jp = (I + 1) % N1, (Jm + 1) % N2
    corner = np.stack([
        (I * N2 + Jm).reshape(-1),
        (Ip * N2 + Jm).reshape(-1),
        (Ip * N2 + Jp).reshape(-1),
        (I * N2 + Jp).reshape(-1),
    ], axis=1)                                    # (cells, 4)

    def corner_field(w):
        return np.stack([w.reshape(-1)[corner[:, k]] for k in range(4)], axis=1)

    cw11, cw22, cw12 = map(corner_field, (w11, w22, w12))

    q = 0.5 - 0.5 / np.sqrt(3.0)
    gauss = [(a, b) for a in (q, 1 - q) for b in (q, 1 - q)]
    cell = du1 * du2
    ke = np.zeros((corner.shape[0], 4, 4))
    for (xi, eta) in gauss:
        shape_fn = np.array([(1 - xi) * (1 - eta), xi * (1 - eta),
                             xi * eta, (1 - xi) * eta])
        dxi = np.array([-(1 - eta), (1 - eta), eta, -eta]) / du1
        deta = np.array([-(1 - xi), -xi, xi, (1 - xi)]) / du2
        a11 = cw11 @ shape_fn
        a22 = cw22 @ shape_fn
        a12 = cw12 @ shape_fn
        B = np.stack([dxi, deta])                  # (2, 4)
        # integrand  (a W a) with W = [[a11, a12], [a12, a22]]
        W = np.empty((corner.shape[0], 2, 2))
        W[:, 0, 0], W[:, 1, 1] = a11, a22
        W[:, 0, 1] = W[:, 1, 0] = a12
        ke += 0.25 * cell * np.einsum('ap,xab,bq->xpq', B, W, B)

    rows = np.repeat(corner, 4, axis=1).reshape(-1)
    cols = np.tile(corner, (1, 4)).reshape(-1)
    return sp.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(nn, nn)).tocsr()


def gradient_rhs(g, detg, spacings, alpha):
    """Assembled load vector  b_p = int g^{ab} alpha_b d_a N_p dmu,
    the right-hand side of the least-squares potential problem
    K theta = b.  ``alpha`` is a covariant 1-form field (N1[, N2], n)."""
    n = g.shape[-1]
    sqrtg = np.sqrt(detg)
    if n == 1:
        N = g.shape[0]
        du = spacings[0]
        w = sqrtg / g[:, 0, 0]
        a = alpha[:, 0]
        # edge value of w * alpha^u at midpoints, paired with D+ of the hat fns
        we = 0.5 * (w * a + np.roll(w * a, -1)) * du
        b = np.zeros(N)
        # edge i->i+1 contributes +we/du to node i+1 and -we/du to node i
        np.add.at(b, (np.arange(N) + 1) % N, we / du)
        np.add.at(b, np.arange(N), -we / du)
        return b
    if n == 2:
        return _gradient_rhs_2d(g, sqrtg, spacings, alpha)
    raise ValueError(f"unsupported intrinsic dimension {n}")


def _gradient_rhs_2d(g, sqrtg, spacings, alpha):
    N1, N2 = g.shape[0], g.shape[1]
    du1, du2 = spacings
    nn = N1 * N2
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    # contravariant alpha^a sqrt(g)
    a1 = sqrtg * (g[..., 1, 1] * alpha[..., 0] - g[..., 0, 1] * alpha[..., 1]) / det
    a2 = sqrtg * (g[..., 0, 0] * alpha[..., 1] - g[..., 0, 1] * alpha[..., 0]) / det

    I, Jm = np.meshgrid(np.arange(N1), np.arange(N2), indexing='ij')
    Ip, Jp = (I + 1) % N1, (Jm + 1) % N2
    corner = np.stack([
        (I * N2 + Jm).reshape(-1), (Ip * N2 + Jm).reshape(-1),
        (Ip * N2 + Jp).reshape(-1), (I * N2 + Jp).reshape(-1),
    ], axis=1)

    def corner_field(w):
        return np.stack([w.reshape(-1)[corner[:, k]] for k in range(4)], axis=1)

    ca1, ca2 = corner_field(a1), corner_field(a2)
    q = 0.5 - 0.5 / np.sqrt(3.0)
    gauss = [(a, b) for a in (q, 1 - q) for b in (q, 1 - q)]
    cell = du1 * du2
    be = np.zeros((corner.shape[0], 4))
    for (xi, eta) in gauss:
        shape_fn = np.array([(1 - xi) * (1 - eta), xi * (1 - eta),
                             xi * eta, (1 - xi) * eta])
        dxi = np.array([-(1 - eta), (1 - eta), eta, -eta]) / du1
        deta = np.array([-(1 - xi), -xi, xi, (1 - xi)]) / du2
        v1 = ca1 @ shape_fn
        v2 = ca2 @ shape_fn
        be += 0.25 * cell * (v1[:, None] * dxi[None] + v2[:, None] * deta[None])
    b = np.zeros(nn)
    np.add.at(b, corner.reshape(-1), be.reshape(-1))
    return b


def laplace_apply(K, M, f):
    """Apply the discrete Laplace-Beltrami operator to a flattened field."""
    return -(K @ f) / M


def poisson_mean_zero(K, M, b):
    """Solve K theta = b (b orthogonal to constants by construction) and
    gauge the result to zero M-weighted mean."""
    n = K.shape[0]
    Kr = K[1:, :][:, 1:].tocsc()
    theta = np.zeros(n)
    theta[1:] = spla.splu(Kr).solve(b[1:])
    theta -= np.sum(M * theta) / np.sum(M)
    return theta
