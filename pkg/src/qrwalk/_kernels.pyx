# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for batched small-matrix products.

Semantics are identical to ``qrwalk._kernels_py``; see that module for the
reference implementation.  Complex matrices are handled as interleaved
``(re, im)`` doubles through raw pointers, which keeps the per-product cost
free of memoryview slicing and of C99 complex-multiply special-casing.
"""

import numpy as np
from libc.string cimport memcpy


cdef inline void _matmul_into(const double* a, double* b, double* tmp, Py_ssize_t d) noexcept nogil:
    # b <- a @ b for d x d complex matrices stored as interleaved doubles
    cdef Py_ssize_t i, j, k
    cdef double re, im, ar, ai, br, bi
    for i in range(d):
        for j in range(d):
            re = 0.0
            im = 0.0
            for k in range(d):
                ar = a[2 * (i * d + k)]
                ai = a[2 * (i * d + k) + 1]
                br = b[2 * (k * d + j)]
                bi = b[2 * (k * d + j) + 1]
                re = re + ar * br - ai * bi
                im = im + ar * bi + ai * br
            tmp[2 * (i * d + j)] = re
            tmp[2 * (i * d + j) + 1] = im
    memcpy(b, tmp, 2 * d * d * sizeof(double))


def walk_products(const double complex[:, :, ::1] branches, const Py_ssize_t[:, ::1] outcomes,
                  const double complex[:, :, ::1] v0):
    """Return ``U[o[t, n-1]] ... U[o[t, 0]] @ v0[t]`` for every trial ``t``."""
    cdef Py_ssize_t trials = outcomes.shape[0]
    cdef Py_ssize_t steps = outcomes.shape[1]
    cdef Py_ssize_t d = branches.shape[1]
    cdef Py_ssize_t m = branches.shape[0]
    cdef Py_ssize_t t, s, idx, dd = d * d
    if v0.shape[0] != trials or v0.shape[1] != d or v0.shape[2] != d:
        raise ValueError("v0 must have shape (trials, d, d)")
    for t in range(trials):
        for s in range(steps):
            if outcomes[t, s] < 0 or outcomes[t, s] >= m:
                raise IndexError("outcome index out of range")
    out_arr = np.array(v0, dtype=np.complex128, copy=True, order="C")
    tmp_arr = np.empty((d, d), dtype=np.complex128)
    if trials == 0 or steps == 0 or d == 0:
        return out_arr
    cdef double complex[:, :, ::1] out = out_arr
    cdef double complex[:, ::1] tmp_v = tmp_arr
    cdef double* out_p = <double*> &out[0, 0, 0]
    cdef const double* br_p = <const double*> &branches[0, 0, 0]
    cdef double* tmp = <double*> &tmp_v[0, 0]
    cdef const Py_ssize_t* oc = &outcomes[0, 0]
    with nogil:
        for t in range(trials):
            for s in range(steps):
                idx = oc[t * steps + s]
                _matmul_into(br_p + 2 * idx * dd, out_p + 2 * t * dd, tmp, d)
    return out_arr


def linear_step(double complex[:, :, ::1] u, const double complex[:, ::1] a,
                const double complex[:, :, ::1] b, const double[::1] scale,
                const double complex[:, ::1] z):
    """In place: ``u[t] <- (I + scale[t] * a + sum_j z[t, j] * b[j]) @ u[t]``."""
    cdef Py_ssize_t trials = u.shape[0]
    cdef Py_ssize_t d = u.shape[1]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t t, i, k, dd = d * d
    cdef double sc, zr, zi
    if scale.shape[0] != trials or z.shape[0] != trials or z.shape[1] != nb:
        raise ValueError("scale/z shapes do not match the batch")
    if trials == 0 or d == 0:
        return
    kmat_arr = np.empty((d, d), dtype=np.complex128)
    tmp_arr = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] kmat_v = kmat_arr
    cdef double complex[:, ::1] tmp_v = tmp_arr
    cdef double* kmat = <double*> &kmat_v[0, 0]
    cdef double* tmp = <double*> &tmp_v[0, 0]
    cdef double* u_p = <double*> &u[0, 0, 0]
    cdef const double* a_p = <const double*> &a[0, 0]
    cdef const double* b_p = NULL
    cdef const double* z_p = NULL
    if nb:
        b_p = <const double*> &b[0, 0, 0]
        z_p = <const double*> &z[0, 0]
    with nogil:
        for t in range(trials):
            sc = scale[t]
            for i in range(2 * dd):
                kmat[i] = sc * a_p[i]
            for i in range(d):
                kmat[2 * (i * d + i)] += 1.0
            for k in range(nb):
                zr = z_p[2 * (t * nb + k)]
                zi = z_p[2 * (t * nb + k) + 1]
                if zr != 0.0 or zi != 0.0:
                    for i in range(dd):
                        kmat[2 * i] += zr * b_p[2 * (k * dd + i)] - zi * b_p[2 * (k * dd + i) + 1]
                        kmat[2 * i + 1] += zr * b_p[2 * (k * dd + i) + 1] + zi * b_p[2 * (k * dd + i)]
            _matmul_into(kmat, u_p + 2 * t * dd, tmp, d)
