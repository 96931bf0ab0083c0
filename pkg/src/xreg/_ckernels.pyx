# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline uint64_t _splitmix_next(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _shuffle(int64_t* arr, Py_ssize_t n, uint64_t* state) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef int64_t tmp
    i = n - 1
    while i > 0:
        j = <Py_ssize_t>(_splitmix_next(state) % <uint64_t>(i + 1))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp
        i -= 1


def splitmix64(uint64_t state):
    cdef uint64_t out = _splitmix_next(&state)
    return state, out


def shuffle_inplace(arr, uint64_t state):
    cdef Py_ssize_t n = len(arr)
    cdef int64_t* buf = <int64_t*>malloc(max(n, 1) * sizeof(int64_t))
    cdef Py_ssize_t i
    try:
        for i in range(n):
            buf[i] = arr[i]
        _shuffle(buf, n, &state)
        for i in range(n):
            arr[i] = buf[i]
    finally:
        free(buf)
    return state


def sparse_dot(const int64_t[::1] ai, const double[::1] av,
               const int64_t[::1] bi, const double[::1] bv):
    cdef Py_ssize_t i = 0, j = 0
    cdef Py_ssize_t na = ai.shape[0], nb = bi.shape[0]
    cdef double total = 0.0
    with nogil:
        while i < na and j < nb:
            if ai[i] == bi[j]:
                total += av[i] * bv[j]
                i += 1
                j += 1
            elif ai[i] < bi[j]:
                i += 1
            else:
                j += 1
    return total


def rows_dot_dense(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const double[::1] data, const int64_t[::1] rows,
                   const double[::1] vec):
    cdef Py_ssize_t n = rows.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t r, p
    cdef int64_t row
    cdef double total
    with nogil:
        for r in range(n):
            row = rows[r]
            total = 0.0
            for p in range(indptr[row], indptr[row + 1]):
                total += data[p] * vec[indices[p]]
            o[r] = total
    return out


cdef inline double _log_loss(double t) noexcept nogil:
    if t >= 0:
        return log1p(exp(-t))
    return -t + log1p(exp(t))


def dual_cd_logistic(const int64_t[::1] indptr, const int64_t[::1] indices,
                     const double[::1] data, const int64_t[::1] rows,
                     const double[::1] pos_cost, const double[::1] neg_cost,
                     Py_ssize_t n_features, double tol, int max_iter,
                     uint64_t seed, bint trace=False):
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t m = 0, r, j, p, lo, hi
    for r in range(n):
        if pos_cost[r] > 0.0:
            m += 1
        if neg_cost[r] > 0.0:
            m += 1

    w_arr = np.zeros(n_features, dtype=np.float64)
    objective_trace = []
    if m == 0:
        return w_arr, 0, 0.0, objective_trace
    cdef double[::1] w = w_arr

    ex_row_arr = np.empty(m, dtype=np.int64)
    ex_y_arr = np.empty(m, dtype=np.float64)
    ex_c_arr = np.empty(m, dtype=np.float64)
    xsq_arr = np.empty(m, dtype=np.float64)
    alpha_arr = np.empty(2 * m, dtype=np.float64)
    order_arr = np.arange(m, dtype=np.int64)
    cdef int64_t[::1] ex_row = ex_row_arr
    cdef double[::1] ex_y = ex_y_arr
    cdef double[::1] ex_c = ex_c_arr
    cdef double[::1] xsq = xsq_arr
    cdef double[::1] alpha = alpha_arr
    cdef int64_t[::1] order = order_arr

    j = 0
    for r in range(n):
        if pos_cost[r] > 0.0:
            ex_row[j] = rows[r]
            ex_y[j] = 1.0
            ex_c[j] = pos_cost[r]
            j += 1
        if neg_cost[r] > 0.0:
            ex_row[j] = rows[r]
            ex_y[j] = -1.0
            ex_c[j] = neg_cost[r]
            j += 1

    cdef double c, coef, sq, a, b, wx, alpha_old, z, gp, gpp, tmpz, sign, yj, obj, dual
    cdef Py_ssize_t i1, i2, s
    cdef int inner, max_inner = 100, n_epochs = 0
    cdef Py_ssize_t newton_iter
    cdef double inner_eps = 1e-2
    cdef double inner_eps_min = 1e-8 if 1e-8 < tol else tol
    cdef double eta = 0.1
    cdef double gmax = 0.0
    cdef uint64_t state = seed
    cdef bint do_trace = trace

    with nogil:
        for j in range(m):
            lo = indptr[ex_row[j]]
            hi = indptr[ex_row[j] + 1]
            sq = 0.0
            for p in range(lo, hi):
                sq += data[p] * data[p]
            xsq[j] = sq
            c = ex_c[j]
            alpha[2 * j] = 0.001 * c if 0.001 * c < 1e-8 else 1e-8
            alpha[2 * j + 1] = c - alpha[2 * j]
            coef = ex_y[j] * alpha[2 * j]
            for p in range(lo, hi):
                w[indices[p]] += coef * data[p]

        while n_epochs < max_iter:
            _shuffle(&order[0], m, &state)
            newton_iter = 0
            gmax = 0.0
            for s in range(m):
                j = order[s]
                yj = ex_y[j]
                c = ex_c[j]
                lo = indptr[ex_row[j]]
                hi = indptr[ex_row[j] + 1]
                a = xsq[j]
                wx = 0.0
                for p in range(lo, hi):
                    wx += w[indices[p]] * data[p]
                b = yj * wx
                i1 = 2 * j
                i2 = 2 * j + 1
                sign = 1.0
                if 0.5 * a * (alpha[i2] - alpha[i1]) + b < 0:
                    i1 = 2 * j + 1
                    i2 = 2 * j
                    sign = -1.0
                alpha_old = alpha[i1]
                z = alpha_old
                if c - z < 0.5 * c:
                    z = 0.1 * z
                gp = a * (z - alpha_old) + sign * b + log(z / (c - z))
                if fabs(gp) > gmax:
                    gmax = fabs(gp)
                inner = 0
                while inner <= max_inner:
                    if fabs(gp) < inner_eps:
                        break
                    gpp = a + c / (c - z) / z
                    tmpz = z - gp / gpp
                    if tmpz <= 0:
                        z *= eta
                    else:
                        z = tmpz
                    gp = a * (z - alpha_old) + sign * b + log(z / (c - z))
                    newton_iter += 1
                    inner += 1
                if inner > 0:
                    alpha[i1] = z
                    alpha[i2] = c - z
                    coef = sign * (z - alpha_old) * yj
                    for p in range(lo, hi):
                        w[indices[p]] += coef * data[p]
            n_epochs += 1
            if do_trace:
                obj = 0.0
                for p in range(n_features):
                    obj += w[p] * w[p]
                obj *= 0.5
                for j in range(m):
                    wx = 0.0
                    for p in range(indptr[ex_row[j]], indptr[ex_row[j] + 1]):
                        wx += w[indices[p]] * data[p]
                    obj += ex_c[j] * _log_loss(ex_y[j] * wx)
                dual = 0.0
                for p in range(n_features):
                    dual += w[p] * w[p]
                dual *= 0.5
                for j in range(m):
                    c = ex_c[j]
                    dual += (alpha[2 * j] * log(alpha[2 * j])
                             + alpha[2 * j + 1] * log(alpha[2 * j + 1]) - c * log(c))
                with gil:
                    objective_trace.append((obj, dual))
            if gmax < tol:
                break
            if newton_iter <= m // 10:
                inner_eps = 0.1 * inner_eps
                if inner_eps < inner_eps_min:
                    inner_eps = inner_eps_min
    return w_arr, n_epochs, gmax, objective_trace
