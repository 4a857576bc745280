"""Lowest eigenpairs of the discrete Laplace-Beltrami operator and the
first-eigenspace projection used to classify hamiltonian variations."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import laplacian
from .errors import ClusterAmbiguous, NoConvergence
from .geometry import _as_cache

MAX_EIGENPAIRS = 32
TOL_EIG = 1e-8
CLUSTER_RTOL = 1e-3


@dataclass
class Spectrum:
    """Nonzero eigenpairs of -Laplace, ascending, M-orthonormal mean-zero
    eigenfunctions.  ``clusters`` groups indices of numerically equal
    eigenvalues."""
    eigenvalues: np.ndarray     # (k,)
    eigenfunctions: np.ndarray  # (k, nodes)
    residuals: np.ndarray      # (k,)
    clusters: list
    mass: np.ndarray           # (nodes,) diagonal M
    shape: tuple

    @property
    def lambda1(self):
        return float(self.eigenvalues[0])

    def first_cluster(self):
        return self.clusters[0]

    def inner(self, f, g):
        return float(np.sum(self.mass * f.reshape(-1) * g.reshape(-1)))

    def coefficients(self, f):
        """M-inner products of a flattened/grid field with each mode."""
        fl = f.reshape(-1)
        return np.array([np.sum(self.mass * fl * v) for v in self.eigenfunctions])

    def export(self):
        """JSON-ready list of {index, eigenvalue, residual, cluster}."""
        cluster_of = {}
        for cid, idxs in enumerate(self.clusters):
            for i in idxs:
                cluster_of[i] = cid
        return [{"index": i, "eigenvalue": float(ev),
                 "residual": float(r), "cluster": cluster_of[i]}
                for i, (ev, r) in enumerate(zip(self.eigenvalues, self.residuals))]


def operator_matrices(imm_or_cache):
    """Stiffness and lumped mass of the induced-metric Laplacian."""
    cache = _as_cache(imm_or_cache)
    topo = cache.imm.topology
    K = laplacian.stiffness(cache.g, cache.detg, topo.spacings)
    M = laplacian.mass_diagonal(cache.detg, topo.spacings)
    return K, M


def laplace_apply(imm_or_cache, f):
    """Discrete Laplace-Beltrami operator applied to a node field."""
    cache = _as_cache(imm_or_cache)
    K, M = operator_matrices(cache)
    return laplacian.laplace_apply(K, M, np.asarray(f, float).reshape(-1)).reshape(f.shape)


def lowest_eigenpairs(imm_or_cache, k, tol=TOL_EIG, max_iter=500, seed=0,
                      cluster_rtol=CLUSTER_RTOL, start=None):
    """k smallest nonzero eigenpairs by shifted inverse iteration with
    deflation against the constant mode, run on a block with Rayleigh-Ritz
    extraction (single-vector deflation stalls inside the near-degenerate
    clusters produced by grid symmetries).

    Raises NoConvergence (with the achieved residual) if an eigenpair fails
    to reach the residual target within ``max_iter`` iterations.
    """
    cache = _as_cache(imm_or_cache)
    if not 1 <= k <= MAX_EIGENPAIRS:
        raise ValueError(f"k must be in 1..{MAX_EIGENPAIRS}")
    K, M = operator_matrices(cache)
    nn = K.shape[0]
    lam_max = float(np.max(K.diagonal() / M))
    shift = 1e-3 * lam_max
    solve = spla.splu((K + shift * sp.diags(M)).tocsc()).solve

    rng = np.random.default_rng(seed)
    const = np.ones(nn) / np.sqrt(np.sum(M))
    # the buffer must clear the largest symmetry-induced multiplicity
    # (6 on the square torus grids), or the Ritz gap collapses
    block = min(k + 8, nn - 1)
    V = rng.standard_normal((nn, block))
    if start is not None:
        m = min(len(start), block)
        V[:, :m] = np.asarray(start)[:m].reshape(m, nn).T
    V = _m_orthonormalize_block(V, const, M)

    vals = res = None
    for it in range(max_iter):
        V = solve(M[:, None] * V)
        V = _m_orthonormalize_block(V, const, M)
        # Rayleigh-Ritz in the block
        A = V.T @ (K @ V)
        A = 0.5 * (A + A.T)
        w, Q = np.linalg.eigh(A)
        V = V @ Q
        vals = w
        KV = K @ V
        resid = KV - (M[:, None] * V) * vals[None, :]
        res = np.max(np.abs(resid[:, :k]) / M[:, None], axis=0)
        if np.all(res < tol):
            break
    if np.any(res >= tol):
        raise NoConvergence(
            f"eigenpairs stopped at residual {np.max(res):.3e} "
            f"(target {tol:.1e}) after {max_iter} iterations",
            residual=float(np.max(res)))

    values = vals[:k]
    vecs = V[:, :k].T
    clusters = _group_clusters(values, cluster_rtol)
    return Spectrum(values, vecs, np.asarray(res), clusters, M,
                    cache.imm.topology.shape)


def _m_orthonormalize_block(V, const, M):
    """M-orthonormalize block columns, deflating the constant mode."""
    V = V - const[:, None] * ((const * M) @ V)
    for j in range(V.shape[1]):
        v = V[:, j]
        for _ in range(2):
            coeffs = (M[:, None] * V[:, :j]).T @ v
            v = v - V[:, :j] @ coeffs
            v = v - np.sum(M * v * const) * const
        V[:, j] = v / np.sqrt(np.sum(M * v * v))
    return V


def _group_clusters(values, rtol):
    tol = rtol * values[0] if values[0] > 0 else rtol
    clusters = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[clusters[-1][0]] < tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def classify_variation(imm_or_cache, f, spectrum=None, k=12,
                       tol_essential=1e-2, cluster_rtol=CLUSTER_RTOL, seed=0):
    """Split a mean-zero potential into its first-eigenspace component and
    remainder; ``essential`` means the remainder carries more than
    ``tol_essential`` of the norm.

    Returns a dict with the projection, remainder, coefficients and flag.
    Raises ClusterAmbiguous when the first cluster is not separated from
    the rest of the spectrum.
    """
    cache = _as_cache(imm_or_cache)
    if spectrum is None:
        spectrum = lowest_eigenpairs(cache, k, cluster_rtol=cluster_rtol, seed=seed)
    vals = spectrum.eigenvalues
    first = spectrum.first_cluster()
    nxt = first[-1] + 1
    if nxt < len(vals):
        gap = vals[nxt] - vals[first[-1]]
        if gap < 2 * cluster_rtol * vals[0]:
            raise ClusterAmbiguous(
                f"gap {gap:.3e} after the first cluster is below "
                f"2 * {cluster_rtol:.1e} * lambda1")
    fl = np.asarray(f, float).reshape(-1)
    mean = np.sum(spectrum.mass * fl) / np.sum(spectrum.mass)
    f0 = fl - mean
    coeff = spectrum.coefficients(f0)
    f_par = np.zeros_like(f0)
    for i in first:
        f_par += coeff[i] * spectrum.eigenfunctions[i]
    f_perp = f0 - f_par
    norm = np.sqrt(np.sum(spectrum.mass * f0 * f0))
    perp_norm = np.sqrt(np.sum(spectrum.mass * f_perp * f_perp))
    essential = bool(perp_norm > tol_essential * norm)
    return {
        'parallel': f_par.reshape(f.shape),
        'perpendicular': f_perp.reshape(f.shape),
        'coefficients': coeff,
        'essential': essential,
        'norm': norm,
        'perp_norm': perp_norm,
        'spectrum': spectrum,
    }
