# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled velocity-space kernels (same contract as ``_fallback``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs
from libc.stdint cimport uint64_t
from libc.string cimport memcpy
from cython.parallel cimport prange

cnp.import_array()


def velocity_moments(F, nodes, weights):
    """Return ``sum_j w_j F_j (1, v_j, |v_j|^2)`` for every cell."""
    cdef double[:, ::1] f = np.ascontiguousarray(np.atleast_2d(F), dtype=np.float64)
    cdef double[:, ::1] v = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n_cells = f.shape[0], n_nodes = f.shape[1], c, j
    out_arr = np.zeros((n_cells, 5))
    cdef double[:, ::1] out = out_arr
    cdef double g, s0, s1, s2, s3, s4
    for c in prange(n_cells, nogil=True, schedule="static"):
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        s4 = 0.0
        for j in range(n_nodes):
            g = w[j] * f[c, j]
            s0 = s0 + g
            s1 = s1 + g * v[j, 0]
            s2 = s2 + g * v[j, 1]
            s3 = s3 + g * v[j, 2]
            s4 = s4 + g * (v[j, 0] * v[j, 0] + v[j, 1] * v[j, 1] + v[j, 2] * v[j, 2])
        out[c, 0] = s0
        out[c, 1] = s1
        out[c, 2] = s2
        out[c, 3] = s3
        out[c, 4] = s4
    if np.ndim(F) == 1:
        return out_arr[0]
    return out_arr


cdef void _evaluate(const double* x, const double* y, const double* z, const double* q,
                    const double* w, Py_ssize_t n_nodes, const double* p,
                    const double* target, const double* scale,
                    double* G, double* gram, double* r) noexcept nogil:
    cdef Py_ssize_t j
    cdef int a, b
    cdef double g
    cdef double p0 = p[0], p1 = p[1], p2 = p[2], p3 = p[3], p4 = p[4]
    cdef double s00 = 0, s01 = 0, s02 = 0, s03 = 0, s04 = 0
    cdef double s11 = 0, s12 = 0, s13 = 0, s14 = 0
    cdef double s22 = 0, s23 = 0, s24 = 0
    cdef double s33 = 0, s34 = 0, s44 = 0
    # two passes so the exp loop stays vectorizable
    for j in range(n_nodes):
        G[j] = exp(p0 + p1 * x[j] + p2 * y[j] + p3 * z[j] + p4 * q[j])
    for j in range(n_nodes):
        g = G[j] * w[j]
        s00 += g
        s01 += g * x[j]
        s02 += g * y[j]
        s03 += g * z[j]
        s04 += g * q[j]
        s11 += g * x[j] * x[j]
        s12 += g * x[j] * y[j]
        s13 += g * x[j] * z[j]
        s14 += g * x[j] * q[j]
        s22 += g * y[j] * y[j]
        s23 += g * y[j] * z[j]
        s24 += g * y[j] * q[j]
        s33 += g * z[j] * z[j]
        s34 += g * z[j] * q[j]
        s44 += g * q[j] * q[j]
    gram[0] = s00
    gram[1] = s01
    gram[2] = s02
    gram[3] = s03
    gram[4] = s04
    gram[6] = s11
    gram[7] = s12
    gram[8] = s13
    gram[9] = s14
    gram[12] = s22
    gram[13] = s23
    gram[14] = s24
    gram[18] = s33
    gram[19] = s34
    gram[24] = s44
    for a in range(5):
        for b in range(a):
            gram[a * 5 + b] = gram[b * 5 + a]
    for a in range(5):
        r[a] = (gram[a] - target[a]) / scale[a]


cdef inline bint isfinite(double x) noexcept nogil:
    # exponent-bit test; built with -ffast-math, which folds the libm version
    cdef uint64_t bits
    memcpy(&bits, &x, 8)
    return (bits & 0x7ff0000000000000ULL) != 0x7ff0000000000000ULL


cdef double _norm(const double* r, int n) noexcept nogil:
    cdef double s = 0.0
    cdef int a
    for a in range(n):
        if not isfinite(r[a]):
            return 1e308
        s += r[a] * r[a]
    return sqrt(s)


cdef double _maxabs(const double* r, int n) noexcept nogil:
    cdef double m = 0.0
    cdef int a
    for a in range(n):
        if not isfinite(r[a]):
            return 1e308
        if fabs(r[a]) > m:
            m = fabs(r[a])
    return m


cdef int _cholesky_solve(const double* A, const double* rhs, double* x) noexcept nogil:
    cdef double L[25]
    cdef double y[5]
    cdef double s
    cdef int i, j, k
    for i in range(5):
        for j in range(i + 1):
            s = A[i * 5 + j]
            for k in range(j):
                s -= L[i * 5 + k] * L[j * 5 + k]
            if i == j:
                if s <= 0.0 or not isfinite(s):
                    return -1
                L[i * 5 + i] = sqrt(s)
            else:
                L[i * 5 + j] = s / L[j * 5 + j]
    for i in range(5):
        s = rhs[i]
        for k in range(i):
            s -= L[i * 5 + k] * y[k]
        y[i] = s / L[i * 5 + i]
    for i in range(4, -1, -1):
        s = y[i]
        for k in range(i + 1, 5):
            s -= L[k * 5 + i] * x[k]
        x[i] = s / L[i * 5 + i]
    return 0


cdef int _solve_cell(const double* x, const double* y, const double* z, const double* q,
                     const double* w, Py_ssize_t n_nodes, double* p,
                     const double* target, double tol, int maxiter,
                     double* G, double* work, long* iters) noexcept nogil:
    cdef double gram[25]
    cdef double tgram[25]
    cdef double r[5]
    cdef double tr[5]
    cdef double scale[5]
    cdef double resid[5]
    cdef double delta[5]
    cdef double trial[5]
    cdef double rn, trn, lam, c
    cdef int a, it, h, met, accepted
    cdef Py_ssize_t j

    c = sqrt(fabs(target[4]) / (3.0 * target[0]))
    scale[0] = target[0]
    scale[1] = target[0] * c
    scale[2] = target[0] * c
    scale[3] = target[0] * c
    scale[4] = target[4]

    _evaluate(x, y, z, q, w, n_nodes, p, target, scale, G, gram, r)
    rn = _norm(r, 5)
    met = _maxabs(r, 5) <= tol
    iters[0] = 0
    for it in range(maxiter):
        iters[0] += 1
        for a in range(5):
            resid[a] = -(gram[a] - target[a])
        if _cholesky_solve(gram, resid, delta) != 0:
            return met
        lam = 1.0
        accepted = 0
        for h in range(30):
            for a in range(5):
                trial[a] = p[a] + lam * delta[a]
            _evaluate(x, y, z, q, w, n_nodes, trial, target, scale, work, tgram, tr)
            trn = _norm(tr, 5)
            if trn <= rn:
                accepted = 1
                break
            if met:
                break
            lam *= 0.5
        if accepted:
            for a in range(5):
                p[a] = trial[a]
                r[a] = tr[a]
            for a in range(25):
                gram[a] = tgram[a]
            for j in range(n_nodes):
                G[j] = work[j]
            rn = trn
        if met or not accepted:
            return _maxabs(r, 5) <= tol
        met = _maxabs(r, 5) <= tol
    return met


def expquad_solve(targets, params0, nodes, weights, double tol=1e-12, int maxiter=100):
    """Fit ``G = exp(p . (1, v, |v|^2))`` per cell so its discrete moments hit ``targets``.

    Returns ``(params, values, iterations, converged)``.
    """
    cdef double[:, ::1] t = np.ascontiguousarray(np.atleast_2d(targets), dtype=np.float64)
    p_arr = np.array(np.atleast_2d(params0), dtype=np.float64, order="C")
    cdef double[:, ::1] p = p_arr
    nodes = np.asarray(nodes, dtype=np.float64)
    cdef double[::1] x = np.ascontiguousarray(nodes[:, 0])
    cdef double[::1] y = np.ascontiguousarray(nodes[:, 1])
    cdef double[::1] z = np.ascontiguousarray(nodes[:, 2])
    cdef double[::1] q = np.ascontiguousarray(np.einsum("ij,ij->i", nodes, nodes))
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n_cells = t.shape[0], n_nodes = w.shape[0], c
    G_arr = np.empty((n_cells, n_nodes))
    work_arr = np.empty((n_cells, n_nodes))
    iters_arr = np.zeros(n_cells, dtype=np.int64)
    conv_arr = np.zeros(n_cells, dtype=np.uint8)
    cdef double[:, ::1] G = G_arr
    cdef double[:, ::1] work = work_arr
    cdef long[::1] iters = iters_arr
    cdef unsigned char[::1] conv = conv_arr
    for c in prange(n_cells, nogil=True, schedule="static"):
        conv[c] = _solve_cell(&x[0], &y[0], &z[0], &q[0], &w[0], n_nodes, &p[c, 0], &t[c, 0], tol, maxiter,
                              &G[c, 0], &work[c, 0], &iters[c])
    return p_arr, G_arr, iters_arr, conv_arr.astype(bool)
