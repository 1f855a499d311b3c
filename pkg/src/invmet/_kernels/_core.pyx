# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementation of the hot solver kernels.

Mirrors ``_ref`` exactly: batched Horner evaluation of polynomial discs,
pointwise domain violation margins in the flat atom encoding, and the fused
penalty reduction used inside the optimizer inner loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, pow, fmax

cnp.import_array()

BACKEND = "cython"

DEF ATOM_DISC = 0
DEF ATOM_BALL = 1
DEF ATOM_POLYDISC = 2
DEF ATOM_ELLIPSOID = 3
DEF ATOM_ANNULUS = 4
DEF ATOM_HALFPLANE = 5


cdef inline double _cabs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef double _margin_one(
    int code,
    const double* f,
    const double complex* c,
    const double complex* pt,
    Py_ssize_t n,
) nogil:
    cdef double acc, m, r
    cdef Py_ssize_t j
    if code == ATOM_DISC:
        return sqrt(_cabs2(pt[0])) - 1.0
    if code == ATOM_BALL:
        acc = 0.0
        for j in range(n):
            acc += _cabs2(pt[j] - c[j])
        return sqrt(acc) - f[0]
    if code == ATOM_POLYDISC:
        m = -1e308
        for j in range(n):
            r = sqrt(_cabs2(pt[j])) - f[j]
            if r > m:
                m = r
        return m
    if code == ATOM_ELLIPSOID:
        acc = 0.0
        for j in range(n):
            acc += pow(_cabs2(pt[j]), f[j])
        return acc - 1.0
    if code == ATOM_ANNULUS:
        r = sqrt(_cabs2(pt[0]))
        return fmax(r - 1.0, f[0] - r)
    if code == ATOM_HALFPLANE:
        acc = 0.0
        for j in range(n):
            acc += pt[j].real * c[j].real + pt[j].imag * c[j].imag
        return acc - f[0]
    return 1e308


cdef double _margin_atoms(
    const int* codes,
    Py_ssize_t natoms,
    const long long* fidx,
    const double* fpar,
    const long long* cidx,
    const double complex* cpar,
    const double complex* pt,
    Py_ssize_t n,
) nogil:
    cdef double best = -1e308
    cdef double m
    cdef Py_ssize_t a
    for a in range(natoms):
        m = _margin_one(codes[a], fpar + fidx[a], cpar + cidx[a], pt, n)
        if m > best:
            best = m
    return best


def eval_disc_batch(coeffs, zetas):
    """(B, K, n) coefficients x (M,) parameters -> (B, M, n) values."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] cc = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(zetas, dtype=np.complex128)
    cdef Py_ssize_t B = cc.shape[0], K = cc.shape[1], n = cc.shape[2], M = zz.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] out = np.empty((B, M, n), dtype=np.complex128)
    cdef Py_ssize_t b, m, j, k
    cdef double complex z, acc
    with nogil:
        for b in range(B):
            for m in range(M):
                z = zz[m]
                for j in range(n):
                    acc = cc[b, K - 1, j]
                    for k in range(K - 2, -1, -1):
                        acc = acc * z + cc[b, k, j]
                    out[b, m, j] = acc
    return out


def margin_points(codes, fidx, fpar, cidx, cpar, pts):
    """Max atom margin per point; pts has shape (..., n)."""
    pts_arr = np.ascontiguousarray(pts, dtype=np.complex128)
    shape = pts_arr.shape[:-1]
    cdef Py_ssize_t n = pts_arr.shape[pts_arr.ndim - 1]
    flat = pts_arr.reshape(-1, n)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] P = flat
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cd = np.ascontiguousarray(codes, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fi = np.ascontiguousarray(fidx, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fp = np.ascontiguousarray(fpar, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ci = np.ascontiguousarray(cidx, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] cp = np.ascontiguousarray(cpar, dtype=np.complex128)
    cdef Py_ssize_t nat = cd.shape[0], NP = P.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(NP, dtype=np.float64)
    cdef Py_ssize_t i
    # guard against empty parameter arrays: take pointers only when nonzero
    cdef const double* fp_ptr = NULL
    cdef const double complex* cp_ptr = NULL
    if fp.shape[0] > 0:
        fp_ptr = &fp[0]
    if cp.shape[0] > 0:
        cp_ptr = &cp[0]
    with nogil:
        for i in range(NP):
            out[i] = _margin_atoms(
                <const int*> &cd[0], nat, <const long long*> &fi[0], fp_ptr,
                <const long long*> &ci[0], cp_ptr, &P[i, 0], n,
            )
    return out.reshape(shape)


def penalty_batch(coeffs, zetas, codes, fidx, fpar, cidx, cpar):
    """Fused mean squared positive margin per batch row: (B,) float64."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] cc = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(zetas, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cd = np.ascontiguousarray(codes, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fi = np.ascontiguousarray(fidx, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fp = np.ascontiguousarray(fpar, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ci = np.ascontiguousarray(cidx, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] cp = np.ascontiguousarray(cpar, dtype=np.complex128)
    cdef Py_ssize_t B = cc.shape[0], K = cc.shape[1], n = cc.shape[2], M = zz.shape[0]
    cdef Py_ssize_t nat = cd.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(B, dtype=np.float64)
    cdef Py_ssize_t b, m, j, k
    cdef double complex z, acc
    cdef double complex pt[64]
    cdef double v, total
    cdef const double* fp_ptr = NULL
    cdef const double complex* cp_ptr = NULL
    if fp.shape[0] > 0:
        fp_ptr = &fp[0]
    if cp.shape[0] > 0:
        cp_ptr = &cp[0]
    if n > 64:
        raise ValueError("penalty kernel supports at most 64 complex dimensions")
    with nogil:
        for b in range(B):
            total = 0.0
            for m in range(M):
                z = zz[m]
                for j in range(n):
                    acc = cc[b, K - 1, j]
                    for k in range(K - 2, -1, -1):
                        acc = acc * z + cc[b, k, j]
                    pt[j] = acc
                v = _margin_atoms(
                    <const int*> &cd[0], nat, <const long long*> &fi[0], fp_ptr,
                    <const long long*> &ci[0], cp_ptr, pt, n,
                )
                if v > 0.0:
                    total += v * v
            out[b] = total / M
    return out
