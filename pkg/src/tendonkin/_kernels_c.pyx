# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled model evaluation kernel (same contract as ``_kernels_py``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, sqrt, atan2
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double DEGENERATE_SEGMENT = 1e-12


cdef inline void _cross(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def evaluate_model(q, link_lengths, waypoints, anchored, base_tensions,
                   friction_exponents, bint cumulative=True):
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[::1] ell = np.ascontiguousarray(link_lengths, dtype=np.float64)
    cdef const double[:, :, ::1] rel = np.ascontiguousarray(waypoints, dtype=np.float64)
    cdef const cnp.uint8_t[::1] anch = np.ascontiguousarray(anchored, dtype=np.uint8)
    cdef const double[::1] base = np.ascontiguousarray(base_tensions, dtype=np.float64)
    cdef const double[::1] gmu = np.ascontiguousarray(friction_exponents, dtype=np.float64)

    cdef Py_ssize_t n = ell.shape[0]
    cdef Py_ssize_t ntend = rel.shape[0]
    cdef Py_ssize_t npts = 2 * n + 1
    if (n < 1 or ntend < 1 or qv.shape[0] != 2 * n or rel.shape[1] != npts
            or rel.shape[2] != 3 or anch.shape[0] != ntend
            or base.shape[0] != ntend or gmu.shape[0] != ntend):
        raise ValueError("inconsistent kernel input shapes")

    moments_arr = np.zeros(2 * n)
    lengths_arr = np.zeros(ntend)
    cdef double[::1] moments = moments_arr
    cdef double[::1] lengths = lengths_arr

    # scratch: rotations of poses 0..n (row-major), origins, joint axes,
    # world points, segment unit vectors, forces, per-link moment/force sums
    cdef Py_ssize_t size = 12 * (n + 1) + 6 * n + 9 * npts + 6 * n
    cdef double* buf = <double*> malloc(size * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef int status
    try:
        status = _evaluate(&qv[0], &ell[0], &rel[0, 0, 0], &anch[0], &base[0], &gmu[0],
                           cumulative, n, ntend, buf, &moments[0], &lengths[0])
    finally:
        free(buf)
    if status != 0:
        raise ValueError("degenerate tendon segment (coincident way points)")
    return moments_arr, lengths_arr


cdef int _evaluate(const double* q, const double* ell, const double* rel,
                   const cnp.uint8_t* anch, const double* base, const double* gmu,
                   bint cumulative, Py_ssize_t n, Py_ssize_t ntend, double* buf,
                   double* moments, double* lengths) noexcept nogil:
    cdef Py_ssize_t npts = 2 * n + 1
    cdef double* rots = buf
    cdef double* orgs = rots + 9 * (n + 1)
    cdef double* ax_a = orgs + 3 * (n + 1)
    cdef double* ax_b = ax_a + 3 * n
    cdef double* world = ax_b + 3 * n
    cdef double* unit = world + 3 * npts
    cdef double* force = unit + 3 * npts
    cdef double* mvec = force + 3 * npts
    cdef double* fsum = mvec + 3 * n

    cdef Py_ssize_t j, k, t, r
    cdef double ca, sa, cb, sb, ra1, ra2, seg, total, tens_prev, tens, theta
    cdef double c[3]
    cdef const double* p
    cdef double* R
    cdef double* Rn

    for r in range(9):
        rots[r] = 1.0 if r % 4 == 0 else 0.0
    orgs[0] = 0.0
    orgs[1] = 0.0
    orgs[2] = 0.0
    for j in range(n):
        ca = cos(q[2 * j])
        sa = sin(q[2 * j])
        cb = cos(q[2 * j + 1])
        sb = sin(q[2 * j + 1])
        R = rots + 9 * j
        Rn = R + 9
        for r in range(3):
            ra1 = ca * R[3 * r + 1] + sa * R[3 * r + 2]
            ra2 = -sa * R[3 * r + 1] + ca * R[3 * r + 2]
            ax_a[3 * j + r] = R[3 * r]
            ax_b[3 * j + r] = ra1
            Rn[3 * r] = cb * R[3 * r] - sb * ra2
            Rn[3 * r + 1] = ra1
            Rn[3 * r + 2] = sb * R[3 * r] + cb * ra2
            orgs[3 * (j + 1) + r] = orgs[3 * j + r] + Rn[3 * r + 2] * ell[j]

    for t in range(ntend):
        p = rel + 3 * npts * t
        world[0] = p[0]
        world[1] = p[1]
        world[2] = p[2]
        for k in range(1, npts):
            j = (k + 1) // 2  # owning link (1-based): rotation of pose j, centred on joint j
            R = rots + 9 * j
            for r in range(3):
                world[3 * k + r] = (orgs[3 * (j - 1) + r] + R[3 * r] * p[3 * k]
                                    + R[3 * r + 1] * p[3 * k + 1] + R[3 * r + 2] * p[3 * k + 2])
        total = 0.0
        for k in range(npts - 1):
            for r in range(3):
                unit[3 * k + r] = world[3 * (k + 1) + r] - world[3 * k + r]
            seg = sqrt(_dot(unit + 3 * k, unit + 3 * k))
            total += seg
            if seg > DEGENERATE_SEGMENT:
                for r in range(3):
                    unit[3 * k + r] /= seg
            elif base[t] > 0.0:
                return 1
        lengths[t] = total
        if base[t] <= 0.0:
            continue

        tens_prev = base[t]
        for k in range(1, npts - 1):
            _cross(unit + 3 * (k - 1), unit + 3 * k, c)
            theta = atan2(sqrt(_dot(c, c)), _dot(unit + 3 * (k - 1), unit + 3 * k))
            tens = tens_prev * exp(gmu[t] * theta)
            for r in range(3):
                force[3 * k + r] = tens * unit[3 * k + r] - tens_prev * unit[3 * (k - 1) + r]
            tens_prev = tens
        for r in range(3):
            force[3 * (npts - 1) + r] = -tens_prev * unit[3 * (npts - 2) + r] if anch[t] else 0.0

        for j in range(n):
            for r in range(3):
                mvec[3 * j + r] = 0.0
                fsum[3 * j + r] = 0.0
            for k in range(2 * j + 1, 2 * j + 3):
                _cross(world + 3 * k, force + 3 * k, c)
                for r in range(3):
                    mvec[3 * j + r] += c[r]
                    fsum[3 * j + r] += force[3 * k + r]
        if cumulative:
            for j in range(n - 2, -1, -1):
                for r in range(3):
                    mvec[3 * j + r] += mvec[3 * (j + 1) + r]
                    fsum[3 * j + r] += fsum[3 * (j + 1) + r]
        for j in range(n):
            # moment about joint j+1, whose centre is the origin of pose j
            _cross(orgs + 3 * j, fsum + 3 * j, c)
            for r in range(3):
                c[r] = mvec[3 * j + r] - c[r]
            moments[2 * j] += _dot(c, ax_a + 3 * j)
            moments[2 * j + 1] += _dot(c, ax_b + 3 * j)
    return 0
