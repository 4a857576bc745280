# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the hot per-node geometry kernels.

Must stay result-compatible with ``reference.py`` (the parity tests pin
both backends to ~1e-13); the flow integrator spends nearly all of its
time in these two functions.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

COMPILED = True


def fundamental_tables(e_in, d2f_in, gamma_in, J_in, g_amb_in):
    """Second-fundamental-form tables; see the reference backend for the
    contract."""
    cdef double[:, :, ::1] e = np.ascontiguousarray(e_in, dtype=np.float64)
    cdef double[:, :, :, ::1] d2f = np.ascontiguousarray(d2f_in, dtype=np.float64)
    cdef double[:, :, ::1] g_amb = np.ascontiguousarray(g_amb_in, dtype=np.float64)
    cdef bint has_gamma = gamma_in is not None
    cdef double[:, :, :, ::1] gamma
    if has_gamma:
        gamma = np.ascontiguousarray(gamma_in, dtype=np.float64)
    else:
        gamma = np.zeros((1, 1, 1, 1))
    J_arr = np.asarray(J_in, dtype=np.float64)
    cdef bint J_const = (J_arr.ndim == 2)
    cdef double[:, ::1] Jc = np.ascontiguousarray(J_arr) if J_const \
        else np.zeros((1, 1))
    cdef double[:, :, ::1] Jn = np.ascontiguousarray(J_arr) if not J_const \
        else np.zeros((1, 1, 1))

    cdef Py_ssize_t m = e.shape[0]
    cdef int n = <int> e.shape[1]
    cdef int d = <int> e.shape[2]

    g_out = np.empty((m, n, n))
    ginv_out = np.empty((m, n, n))
    det_out = np.empty(m)
    h_out = np.empty((m, n, n, n))
    alpha_out = np.empty((m, n))
    hvec_out = np.empty((m, n))
    hamb_out = np.empty((m, d))
    absa2_out = np.empty(m)
    absh2_out = np.empty(m)
    defect_out = np.empty((m, n, n))
    Je_out = np.empty((m, n, d))
    nab_out = np.empty((m, n, n, d))

    cdef double[:, :, ::1] g = g_out
    cdef double[:, :, ::1] ginv = ginv_out
    cdef double[::1] det = det_out
    cdef double[:, :, :, ::1] h = h_out
    cdef double[:, ::1] alpha = alpha_out
    cdef double[:, ::1] hvec = hvec_out
    cdef double[:, ::1] hamb = hamb_out
    cdef double[::1] absa2 = absa2_out
    cdef double[::1] absh2 = absh2_out
    cdef double[:, :, ::1] defect = defect_out
    cdef double[:, :, ::1] Je = Je_out
    cdef double[:, :, :, ::1] nab = nab_out

    cdef Py_ssize_t x
    cdef int i, j, k, l, p, q, A, B, C
    cdef double acc, s, dd
    cdef double gJe[2][4]

    for x in range(m):
        # nabla_{e_i} e_j = d2f + Gamma(e_i, e_j)
        for i in range(n):
            for j in range(n):
                for A in range(d):
                    acc = d2f[x, i, j, A]
                    if has_gamma:
                        for B in range(d):
                            for C in range(d):
                                acc += gamma[x, A, B, C] * e[x, i, B] * e[x, j, C]
                    nab[x, i, j, A] = acc
        # J e_k and g(J e_k, .)
        for k in range(n):
            for A in range(d):
                acc = 0.0
                if J_const:
                    for B in range(d):
                        acc += Jc[A, B] * e[x, k, B]
                else:
                    for B in range(d):
                        acc += Jn[x, A, B] * e[x, k, B]
                Je[x, k, A] = acc
            for B in range(d):
                acc = 0.0
                for A in range(d):
                    acc += Je[x, k, A] * g_amb[x, A, B]
                gJe[k][B] = acc
        # h_{kij}, induced metric, defect
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for B in range(d):
                        acc += gJe[k][B] * nab[x, i, j, B]
                    h[x, k, i, j] = -acc
            for j in range(n):
                acc = 0.0
                for B in range(d):
                    acc += gJe[k][B] * e[x, j, B]
                defect[x, k, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for A in range(d):
                    for B in range(d):
                        acc += e[x, i, A] * g_amb[x, A, B] * e[x, j, B]
                g[x, i, j] = acc
                g[x, j, i] = acc
        # determinant and inverse (n <= 2)
        if n == 1:
            dd = g[x, 0, 0]
            det[x] = dd
            ginv[x, 0, 0] = 1.0 / dd
        else:
            dd = g[x, 0, 0] * g[x, 1, 1] - g[x, 0, 1] * g[x, 0, 1]
            det[x] = dd
            ginv[x, 0, 0] = g[x, 1, 1] / dd
            ginv[x, 1, 1] = g[x, 0, 0] / dd
            ginv[x, 0, 1] = -g[x, 0, 1] / dd
            ginv[x, 1, 0] = -g[x, 0, 1] / dd
        # traces
        for k in range(n):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    acc += ginv[x, i, j] * h[x, k, i, j]
            alpha[x, k] = acc
        for k in range(n):
            acc = 0.0
            for l in range(n):
                acc += ginv[x, k, l] * alpha[x, l]
            hvec[x, k] = acc
        for A in range(d):
            acc = 0.0
            for k in range(n):
                acc += hvec[x, k] * Je[x, k, A]
            hamb[x, A] = -acc
        acc = 0.0
        for k in range(n):
            acc += alpha[x, k] * hvec[x, k]
        absh2[x] = acc
        s = 0.0
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    for l in range(n):
                        for p in range(n):
                            for q in range(n):
                                s += (h[x, k, i, j] * h[x, l, p, q]
                                      * ginv[x, k, l] * ginv[x, i, p]
                                      * ginv[x, j, q])
        absa2[x] = s

    return {
        'g': g_out, 'ginv': ginv_out, 'det': det_out, 'h': h_out,
        'alpha': alpha_out, 'hvec': hvec_out, 'h_amb': hamb_out,
        'abs_a2': absa2_out, 'abs_h2': absh2_out, 'defect': defect_out,
        'Je': Je_out, 'nab': nab_out,
    }


def fubini_study_jet(pts_in, double scale=1.0, bint want_curvature=False):
    """Fubini-Study chart jet of CP^2; see the reference backend for the
    contract and normalization."""
    cdef double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef Py_ssize_t m = pts.shape[0]

    g_out = np.empty((m, 4, 4))
    gamma_out = np.empty((m, 4, 4, 4))
    cdef double[:, :, ::1] g = g_out
    cdef double[:, :, :, ::1] gamma = gamma_out

    J_out = np.zeros((4, 4))
    J_out[1, 0] = 1.0
    J_out[0, 1] = -1.0
    J_out[3, 2] = 1.0
    J_out[2, 3] = -1.0

    rm_out = np.empty((m, 4, 4, 4, 4)) if want_curvature else None
    cdef double[:, :, :, :, ::1] rm
    if want_curvature:
        rm = rm_out
    else:
        rm = np.zeros((1, 1, 1, 1, 1))

    cdef Py_ssize_t x
    cdef int i, j, k, l, a, b, p, q, A, B, C, D
    cdef double den, chol
    cdef double complex w[2]
    cdef double complex wb[2]
    cdef double complex H[2][2]
    cdef double complex Hi[2][2]
    cdef double complex dH[2][2][2]
    cdef double complex Gc[2][2][2]
    cdef double complex cc, iPow[2]
    cdef double om[4][4]
    cdef double gl[4][4]

    iPow[0] = 1.0 + 0.0j
    iPow[1] = 1.0j

    for x in range(m):
        w[0] = pts[x, 0] + 1j * pts[x, 1]
        w[1] = pts[x, 2] + 1j * pts[x, 3]
        wb[0] = pts[x, 0] - 1j * pts[x, 1]
        wb[1] = pts[x, 2] - 1j * pts[x, 3]
        den = 1.0 + (w[0] * wb[0]).real + (w[1] * wb[1]).real
        for k in range(2):
            for l in range(2):
                H[k][l] = (-(wb[k] * w[l])) / (den * den)
                if k == l:
                    H[k][l] = H[k][l] + 1.0 / den
                Hi[k][l] = den * ((1.0 if k == l else 0.0) + w[k] * wb[l])
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    cc = 2.0 * wb[k] * w[l] * wb[j] / (den * den * den)
                    if k == l:
                        cc = cc - wb[j] / (den * den)
                    if j == l:
                        cc = cc - wb[k] / (den * den)
                    dH[j][k][l] = cc
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    cc = 0.0
                    for l in range(2):
                        cc = cc + Hi[i][l] * dH[j][k][l]
                    Gc[i][j][k] = cc
        # real metric
        for a in range(2):
            for b in range(2):
                gl[2 * a][2 * b] = scale * H[a][b].real
                gl[2 * a][2 * b + 1] = scale * H[a][b].imag
                gl[2 * a + 1][2 * b] = -scale * H[a][b].imag
                gl[2 * a + 1][2 * b + 1] = scale * H[a][b].real
        for A in range(4):
            for B in range(4):
                g[x, A, B] = gl[A][B]
        # real Christoffels
        for i in range(2):
            for a in range(2):
                for p in range(2):
                    for b in range(2):
                        for q in range(2):
                            cc = Gc[i][a][b] * iPow[p] * iPow[q]
                            gamma[x, 2 * i, 2 * a + p, 2 * b + q] = cc.real
                            gamma[x, 2 * i + 1, 2 * a + p, 2 * b + q] = cc.imag
        if want_curvature:
            # om_{AC} = g(J e_A, e_C): rows via the sparse J
            for C in range(4):
                for a in range(2):
                    om[2 * a][C] = gl[2 * a + 1][C]
                    om[2 * a + 1][C] = -gl[2 * a][C]
            chol = 0.25 * (4.0 / scale)
            for A in range(4):
                for B in range(4):
                    for C in range(4):
                        for D in range(4):
                            rm[x, A, B, C, D] = chol * (
                                gl[A][C] * gl[B][D] - gl[A][D] * gl[B][C]
                                + om[A][C] * om[B][D] - om[A][D] * om[B][C]
                                + 2.0 * om[A][B] * om[C][D])

    return g_out, J_out, gamma_out, rm_out
