# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled step loops for the 2-level dark model and the 4-level family model.

Both kernels take a piecewise-constant generator (H / hbar, rad/s) sampled at
step midpoints and march a batch of states through the ordered product of
step propagators, optionally recording the state at selected step indices.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fabs, ceil

cnp.import_array()

cdef int TAYLOR_TERMS = 18
cdef double TAYLOR_RADIUS = 0.5


def evolve_su2(const double[:, ::1] base, const double[:, :, ::1] lin, const double[:, ::1] weights,
               const double[::1] dt, const double complex[:, ::1] psi0, const Py_ssize_t[::1] marks):
    """Generator per sample s and step n:  c = base[n] + sum_l weights[s, l] lin[l, n].

    ``c`` holds Pauli coefficients (identity, x, y, z).  Returns the final
    states (S, 2) and the states recorded at ``marks`` (S, M, 2).
    """
    cdef Py_ssize_t N = base.shape[0]
    cdef Py_ssize_t L = lin.shape[0]
    cdef Py_ssize_t S = psi0.shape[0]
    cdef Py_ssize_t M = marks.shape[0]
    out_np = np.empty((S, 2), dtype=np.complex128)
    rec_np = np.empty((S, M, 2), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_np
    cdef double complex[:, :, ::1] rec = rec_np
    cdef Py_ssize_t s, n, l, m
    cdef double c0, cx, cy, cz, w, h, nrm, a, ca, sa, phase
    cdef double complex u00, u01, u10, u11, p0, p1, q0, q1, g
    cdef double complex I = 1j
    for s in range(S):
        p0 = psi0[s, 0]
        p1 = psi0[s, 1]
        phase = 0.0
        m = 0
        for n in range(N + 1):
            while m < M and marks[m] == n:
                g = cos(phase) - I * sin(phase)
                rec[s, m, 0] = g * p0
                rec[s, m, 1] = g * p1
                m += 1
            if n == N:
                break
            c0 = base[n, 0]
            cx = base[n, 1]
            cy = base[n, 2]
            cz = base[n, 3]
            for l in range(L):
                w = weights[s, l]
                if w != 0.0:
                    c0 += w * lin[l, n, 0]
                    cx += w * lin[l, n, 1]
                    cy += w * lin[l, n, 2]
                    cz += w * lin[l, n, 3]
            h = dt[n]
            phase += c0 * h
            nrm = sqrt(cx * cx + cy * cy + cz * cz)
            a = nrm * h
            ca = cos(a)
            if nrm > 0.0:
                sa = sin(a) / nrm
            else:
                sa = h
            u00 = ca - I * sa * cz
            u11 = ca + I * sa * cz
            u01 = sa * (-cy - I * cx)
            u10 = sa * (cy - I * cx)
            q0 = u00 * p0 + u01 * p1
            q1 = u10 * p0 + u11 * p1
            p0 = q0
            p1 = q1
        g = cos(phase) - I * sin(phase)
        out[s, 0] = g * p0
        out[s, 1] = g * p1
    return out_np, rec_np


cdef inline double _cabs1(double complex z) nogil:
    return fabs(z.real) + fabs(z.imag)


def evolve_family(const double complex[:, :, ::1] gen, const double[:, ::1] shift,
                  const double[::1] dt, const double complex[:, ::1] psi0, const Py_ssize_t[::1] marks):
    """4x4 stepping of exp(-i (gen[n] + diag(shift[s])) dt[n]) on each sample.

    Each step applies a scaled Taylor series directly to the state vector; the
    series is summed until the increment drops below double precision, with
    the step split so that the scaled generator norm stays below 0.5.
    """
    cdef Py_ssize_t N = gen.shape[0]
    cdef Py_ssize_t S = psi0.shape[0]
    cdef Py_ssize_t M = marks.shape[0]
    out_np = np.empty((S, 4), dtype=np.complex128)
    rec_np = np.empty((S, M, 4), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_np
    cdef double complex[:, :, ::1] rec = rec_np
    cdef double complex B[4][4]
    cdef double complex v[4]
    cdef double complex term[4]
    cdef double complex nxt[4]
    cdef double complex acc[4]
    cdef double complex mI = -1j
    cdef Py_ssize_t s, n, m, i, j, r, reps, kk
    cdef double h, rowsum, nrm, tsize, asize
    for s in range(S):
        for i in range(4):
            v[i] = psi0[s, i]
        m = 0
        for n in range(N + 1):
            while m < M and marks[m] == n:
                for i in range(4):
                    rec[s, m, i] = v[i]
                m += 1
            if n == N:
                break
            h = dt[n]
            nrm = 0.0
            for i in range(4):
                rowsum = 0.0
                for j in range(4):
                    B[i][j] = gen[n, i, j]
                    if i == j:
                        B[i][j] = B[i][j] + shift[s, i]
                    rowsum += _cabs1(B[i][j])
                if rowsum > nrm:
                    nrm = rowsum
            nrm *= h
            reps = 1
            if nrm > TAYLOR_RADIUS:
                reps = <Py_ssize_t> ceil(nrm / TAYLOR_RADIUS)
            for i in range(4):
                for j in range(4):
                    B[i][j] = mI * B[i][j] * (h / reps)
            for r in range(reps):
                for i in range(4):
                    term[i] = v[i]
                    acc[i] = v[i]
                asize = 0.0
                for i in range(4):
                    asize += _cabs1(v[i])
                for kk in range(1, TAYLOR_TERMS + 1):
                    tsize = 0.0
                    for i in range(4):
                        nxt[i] = (B[i][0] * term[0] + B[i][1] * term[1]
                                  + B[i][2] * term[2] + B[i][3] * term[3]) / kk
                    for i in range(4):
                        term[i] = nxt[i]
                        acc[i] = acc[i] + nxt[i]
                        tsize += _cabs1(nxt[i])
                    if tsize <= 1e-18 * asize:
                        break
                for i in range(4):
                    v[i] = acc[i]
        for i in range(4):
            out[s, i] = v[i]
    return out_np, rec_np
