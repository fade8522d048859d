# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels.

Same signatures and semantics as ``qgc._kernels_py``. Each step
diagonalizes a small Hermitian matrix with LAPACK ``zheev`` and applies
``V exp(-i w tau) V^H`` to the state.
"""
import numpy as np

from libc.math cimport cos, fabs, sin
from scipy.linalg.cython_lapack cimport zheev

ctypedef double complex cplx


cdef inline cplx _expi(double x) noexcept nogil:
    return cos(x) + sin(x) * 1j


cdef int _apply_exp(cplx* H, int n, double tau, cplx* psi, cplx* tmp, double* w,
                    cplx* work, int lwork, double* rwork) noexcept nogil:
    """Overwrite ``psi`` with ``exp(-i tau H) psi``; ``H`` is destroyed."""
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef int info = 0
    cdef int i, j
    cdef cplx s
    zheev(&jobz, &uplo, &n, H, &n, w, work, &lwork, rwork, &info)
    if info != 0:
        return info
    for j in range(n):
        s = 0
        for i in range(n):
            s = s + H[i + j * n].conjugate() * psi[i]
        tmp[j] = s * _expi(-w[j] * tau)
    for i in range(n):
        s = 0
        for j in range(n):
            s = s + H[i + j * n] * tmp[j]
        psi[i] = s
    return 0


def propagate_lab(const double[::1] mu, const cplx[:, ::1] B, const double[::1] u,
                  const double[::1] dt, const cplx[::1] psi0, const long long[::1] record_steps):
    """Steps ``psi <- exp(-i (diag(mu) + u_n B) dt_n) psi``; see the NumPy kernel."""
    cdef int n = mu.shape[0]
    cdef Py_ssize_t nsteps = u.shape[0]
    cdef Py_ssize_t R = record_steps.shape[0]
    cdef int lwork = max(1, 64 * n)
    out = np.empty((R, n), dtype=np.complex128)
    H = np.empty(n * n, dtype=np.complex128)
    psi = np.array(psi0, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    w = np.empty(n, dtype=np.float64)
    work = np.empty(lwork, dtype=np.complex128)
    rwork = np.empty(max(1, 3 * n - 2), dtype=np.float64)
    cdef cplx[:, ::1] out_v = out
    cdef cplx[::1] H_v = H
    cdef cplx[::1] psi_v = psi
    cdef cplx[::1] tmp_v = tmp
    cdef double[::1] w_v = w
    cdef cplx[::1] work_v = work
    cdef double[::1] rwork_v = rwork
    cdef Py_ssize_t step, r = 0
    cdef int i, j, info = 0
    cdef double us
    with nogil:
        for step in range(nsteps):
            us = u[step]
            for j in range(n):
                for i in range(j, n):
                    H_v[i + j * n] = us * B[i, j]
                H_v[j + j * n] = H_v[j + j * n] + mu[j]
            info = _apply_exp(&H_v[0], n, dt[step], &psi_v[0], &tmp_v[0], &w_v[0],
                              &work_v[0], lwork, &rwork_v[0])
            if info != 0:
                break
            while r < R and record_steps[r] == step + 1:
                for i in range(n):
                    out_v[r, i] = psi_v[i]
                r += 1
    if info != 0:
        raise np.linalg.LinAlgError(f"zheev failed with info={info}")
    return out


def propagate_magnus(const double[::1] mu, const cplx[:, ::1] B, const double[::1] lam,
                     const cplx[::1] coef, double h, Py_ssize_t nsteps, const cplx[::1] a0,
                     const long long[::1] record_steps):
    """Interaction-picture first-order Magnus steps; see the NumPy kernel."""
    cdef int n = mu.shape[0]
    cdef Py_ssize_t M = lam.shape[0]
    cdef Py_ssize_t R = record_steps.shape[0]
    cdef int lwork = max(1, 64 * n)
    out = np.empty((R, n), dtype=np.complex128)
    H = np.empty(n * n, dtype=np.complex128)
    a = np.array(a0, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    w = np.empty(n, dtype=np.float64)
    work = np.empty(lwork, dtype=np.complex128)
    rwork = np.empty(max(1, 3 * n - 2), dtype=np.float64)
    cdef cplx[:, ::1] out_v = out
    cdef cplx[::1] H_v = H
    cdef cplx[::1] a_v = a
    cdef cplx[::1] tmp_v = tmp
    cdef double[::1] w_v = w
    cdef cplx[::1] work_v = work
    cdef double[::1] rwork_v = rwork
    cdef Py_ssize_t step, r = 0, q
    cdef int i, j, info = 0
    cdef double tmid, f, x, sc
    cdef cplx s
    with nogil:
        for step in range(nsteps):
            tmid = (step + 0.5) * h
            for j in range(n):
                for i in range(j, n):
                    s = 0
                    for q in range(M):
                        f = mu[i] - mu[j] + lam[q]
                        x = 0.5 * f * h
                        if fabs(x) < 1e-8:
                            sc = 1.0 - x * x / 6.0
                        else:
                            sc = sin(x) / x
                        s = s + coef[q] * (h * sc) * _expi(f * tmid)
                    H_v[i + j * n] = B[i, j] * s
            info = _apply_exp(&H_v[0], n, 1.0, &a_v[0], &tmp_v[0], &w_v[0],
                              &work_v[0], lwork, &rwork_v[0])
            if info != 0:
                break
            while r < R and record_steps[r] == step + 1:
                for i in range(n):
                    out_v[r, i] = a_v[i]
                r += 1
    if info != 0:
        raise np.linalg.LinAlgError(f"zheev failed with info={info}")
    return out
