# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see ``_kernels_py`` for the contract."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef int _check_groups(Py_ssize_t rows, const cnp.intp_t[::1] row_group,
                       Py_ssize_t n_groups) except -1:
    # boundscheck is off, so a bad group map would write outside the accumulator
    cdef Py_ssize_t i
    if row_group.shape[0] != rows:
        raise ValueError(f"row_group has {row_group.shape[0]} entries for {rows} rows")
    for i in range(rows):
        if row_group[i] < 0 or row_group[i] >= n_groups:
            raise ValueError(f"row_group[{i}] = {row_group[i]} outside [0, {n_groups})")
    return 0


cdef inline double _shrink(double x, double t) nogil:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


cdef void _hprox_inplace(double[:, ::1] m, const cnp.intp_t[::1] row_group,
                         double[::1] acc, double t1, double tg) nogil:
    cdef Py_ssize_t i, j, g
    cdef Py_ssize_t rows = m.shape[0], cols = m.shape[1]
    cdef Py_ssize_t k = acc.shape[0]
    cdef double x, nrm
    for g in range(k):
        acc[g] = 0.0
    for i in range(rows):
        g = row_group[i]
        for j in range(cols):
            x = _shrink(m[i, j], t1)
            m[i, j] = x
            acc[g] += x * x
    for g in range(k):
        nrm = sqrt(acc[g])
        if nrm > 0.0:
            x = 1.0 - tg / nrm
            acc[g] = x if x > 0.0 else 0.0
        else:
            acc[g] = 0.0
    for i in range(rows):
        x = acc[row_group[i]]
        for j in range(cols):
            m[i, j] = m[i, j] * x


def soft_threshold(double[:, ::1] m, double t):
    cdef Py_ssize_t i, j
    out = np.empty((m.shape[0], m.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                o[i, j] = _shrink(m[i, j], t)
    return out


def group_shrink(double[:, ::1] m, const cnp.intp_t[::1] row_group, Py_ssize_t n_groups,
                 double t):
    _check_groups(m.shape[0], row_group, n_groups)
    out = np.array(m, dtype=np.float64, copy=True)
    cdef double[:, ::1] o = out
    cdef double[::1] acc = np.zeros(n_groups)
    with nogil:
        _hprox_inplace(o, row_group, acc, 0.0, t)
    return out


def hierarchical_prox(double[:, ::1] m, const cnp.intp_t[::1] row_group, Py_ssize_t n_groups,
                      double t1, double tg):
    _check_groups(m.shape[0], row_group, n_groups)
    out = np.array(m, dtype=np.float64, copy=True)
    cdef double[:, ::1] o = out
    cdef double[::1] acc = np.zeros(n_groups)
    with nogil:
        _hprox_inplace(o, row_group, acc, t1, tg)
    return out


def prox_gradient(double[:, ::1] gram, double[:, ::1] corr, double[:, ::1] x0,
                  double step, double t1, double tg,
                  const cnp.intp_t[::1] row_group, Py_ssize_t n_groups,
                  Py_ssize_t iters, bint momentum):
    cdef int n = <int> gram.shape[0], tau = <int> corr.shape[1]
    cdef Py_ssize_t it, i, j
    cdef double t = 1.0, t_new, coef
    cdef double one = 1.0, zero = 0.0
    cdef char *no = b"N"
    if gram.shape[1] != n or corr.shape[0] != n or x0.shape[0] != n or x0.shape[1] != tau:
        raise ValueError("gram, corr and x0 shapes disagree")
    _check_groups(n, row_group, n_groups)
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    z_arr = np.array(x0, dtype=np.float64, copy=True)
    v_arr = np.empty((n, tau), dtype=np.float64)
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] v = v_arr
    cdef double[::1] acc = np.zeros(n_groups)
    if n == 0 or tau == 0:
        return x_arr
    with nogil:
        for it in range(iters):
            # row-major V = gram @ Z is column-major V^T = Z^T gram^T
            dgemm(no, no, &tau, &n, &n, &one, &z[0, 0], &tau, &gram[0, 0], &n,
                  &zero, &v[0, 0], &tau)
            for i in range(n):
                for j in range(tau):
                    v[i, j] = z[i, j] - step * (v[i, j] - corr[i, j])
            _hprox_inplace(v, row_group, acc, t1, tg)
            if momentum:
                t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
                coef = (t - 1.0) / t_new
                t = t_new
                for i in range(n):
                    for j in range(tau):
                        z[i, j] = v[i, j] + coef * (v[i, j] - x[i, j])
                memcpy(&x[0, 0], &v[0, 0], n * tau * sizeof(double))
            else:
                memcpy(&x[0, 0], &v[0, 0], n * tau * sizeof(double))
                memcpy(&z[0, 0], &v[0, 0], n * tau * sizeof(double))
    return x_arr
