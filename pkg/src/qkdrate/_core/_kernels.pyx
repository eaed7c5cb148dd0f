# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot numerical kernels.

Mirrors ``kernels_py`` exactly; LAPACK is called directly (zheevd/zpotrf)
to avoid per-call numpy overhead on the small Hermitian matrices that
dominate the barrier line search.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log
from scipy.linalg.cython_lapack cimport zheevd, zpotrf

cnp.import_array()

BACKEND = "cython"

cdef double _LN2 = 0.6931471805599453


cdef int _eigh_inplace(double complex[::1, :] a, double[::1] w) except -1:
    """In-place zheevd on a Fortran-ordered Hermitian matrix."""
    cdef int n = a.shape[0]
    cdef int lwork = 2 * n + n * n + 1
    cdef int lrwork = 1 + 5 * n + 2 * n * n
    cdef int liwork = 3 + 5 * n
    cdef int info = 0
    work_arr = np.empty(lwork, dtype=np.complex128)
    rwork_arr = np.empty(lrwork, dtype=np.float64)
    iwork_arr = np.empty(liwork, dtype=np.intc)
    cdef double complex[::1] work = work_arr
    cdef double[::1] rwork = rwork_arr
    cdef int[::1] iwork = iwork_arr
    zheevd('V', 'L', &n, &a[0, 0], &n, &w[0], &work[0], &lwork,
           &rwork[0], &lrwork, &iwork[0], &liwork, &info)
    if info != 0:
        raise np.linalg.LinAlgError(f"zheevd failed with info={info}")
    return 0


def eigh(a):
    """Eigendecomposition of a complex Hermitian matrix, eigenvalues ascending."""
    cdef int n = a.shape[0]
    u_arr = np.array(a, dtype=np.complex128, order="F", copy=True)
    w_arr = np.empty(n, dtype=np.float64)
    cdef double complex[::1, :] u = u_arr
    cdef double[::1] w = w_arr
    _eigh_inplace(u, w)
    return w_arr, u_arr


def entropy_bits(evals, double floor=1e-14):
    """-sum(w log2 w) over eigenvalues above ``floor``; no normalization."""
    w_arr = np.ascontiguousarray(evals, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(w.shape[0]):
        if w[i] > floor:
            acc -= w[i] * log(w[i])
    return acc / _LN2


def logdet_chol(a):
    """(ok, log det a) via Cholesky; ok=False when not positive definite."""
    cdef int n = a.shape[0]
    cdef int info = 0
    l_arr = np.array(a, dtype=np.complex128, order="F", copy=True)
    cdef double complex[::1, :] l = l_arr
    zpotrf('L', &n, &l[0, 0], &n, &info)
    if info != 0:
        return False, 0.0
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += log(l[i, i].real)
    return True, 2.0 * acc


cdef void _log_reconstruct(double complex[::1, :] u, double[::1] w,
                           double floor, double complex[:, :] out,
                           Py_ssize_t off) noexcept:
    """out[off:off+r, off:off+r] = u diag(log max(w, floor)) u^dag."""
    cdef Py_ssize_t r = w.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double lw
    cdef double complex acc
    lw_arr = np.empty(r, dtype=np.float64)
    cdef double[::1] lws = lw_arr
    for k in range(r):
        lws[k] = log(w[k] if w[k] > floor else floor)
    for i in range(r):
        for j in range(r):
            acc = 0
            for k in range(r):
                acc += u[i, k] * lws[k] * u[j, k].conjugate()
            out[off + i, off + j] = acc


def pinched_relative_terms(m, key_sizes, double floor=1e-14):
    """Entropy split of a state against its block-diagonal pinching.

    Returns ``(f_bits, min_eig, ln_m, ln_n)``; see kernels_py for the contract.
    """
    cdef int r = m.shape[0]
    u_arr = np.array(m, dtype=np.complex128, order="F", copy=True)
    w_arr = np.empty(r, dtype=np.float64)
    cdef double complex[::1, :] u = u_arr
    cdef double[::1] w = w_arr
    _eigh_inplace(u, w)

    cdef double min_eig = w[0]
    cdef double h_m = 0.0, h_n = 0.0
    cdef Py_ssize_t k
    for k in range(r):
        if w[k] > floor:
            h_m -= w[k] * log(w[k])

    ln_m_arr = np.empty((r, r), dtype=np.complex128)
    cdef double complex[:, :] ln_m = ln_m_arr
    _log_reconstruct(u, w, floor, ln_m, 0)

    ln_n_arr = np.zeros((r, r), dtype=np.complex128)
    cdef double complex[:, :] ln_n = ln_n_arr
    cdef Py_ssize_t start = 0
    cdef int size
    m_c = np.ascontiguousarray(m, dtype=np.complex128)
    for size in key_sizes:
        blk_arr = np.array(m_c[start:start + size, start:start + size],
                           order="F", copy=True)
        wb_arr = np.empty(size, dtype=np.float64)
        _eigh_inplace(blk_arr, wb_arr)
        _log_reconstruct(blk_arr, wb_arr, floor, ln_n, start)
        for k in range(size):
            if wb_arr[k] < min_eig:
                min_eig = wb_arr[k]
            if wb_arr[k] > floor:
                h_n -= wb_arr[k] * log(wb_arr[k])
        start += size

    return (h_n - h_m) / _LN2, min_eig, ln_m_arr, ln_n_arr
