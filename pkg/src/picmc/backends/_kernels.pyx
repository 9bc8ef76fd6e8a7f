# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; bitwise twin of the pure-NumPy backend.

Arithmetic order matters more than speed tricks here: no FMA contraction
(built with -ffp-contract=off), sequential per-cell accumulation in slot
order, one-sided gather form. See backends/pure.py for the contract.
"""

import numpy as np

BACKEND_NAME = "compiled"


def deposit_partials(double[::1] x, long long[::1] offs, long long[::1] counts):
    """Per-cell raw CIC sums: L[j] = sum(1-x), R[j] = sum(x), slot order."""
    cdef Py_ssize_t nc = counts.shape[0]
    left_arr = np.zeros(nc, dtype=np.float64)
    right_arr = np.zeros(nc, dtype=np.float64)
    cdef double[::1] left = left_arr
    cdef double[::1] right = right_arr
    cdef Py_ssize_t j, i, base
    cdef double sl, sr, xv
    with nogil:
        for j in range(nc):
            base = offs[j]
            sl = 0.0
            sr = 0.0
            for i in range(counts[j]):
                xv = x[base + i]
                sl = sl + (1.0 - xv)
                sr = sr + xv
            left[j] = sl
            right[j] = sr
    return left_arr, right_arr


def gather(double[::1] nodes, double[::1] x, long long[::1] offs,
           long long[::1] counts):
    """Per-particle node interpolation a[j] + x*(a[j+1]-a[j]), live order."""
    cdef Py_ssize_t nc = counts.shape[0]
    cdef Py_ssize_t total = 0
    cdef Py_ssize_t j, i, base, k
    for j in range(nc):
        total += counts[j]
    out_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double aj, daj
    k = 0
    with nogil:
        for j in range(nc):
            base = offs[j]
            aj = nodes[j]
            daj = nodes[j + 1] - aj
            for i in range(counts[j]):
                out[k] = aj + x[base + i] * daj
                k += 1
    return out_arr


def fused_move(accel_nodes, x, vx, vy, yp, offs, counts, double fnstep):
    """One fused gather+push step over live particles, in place."""
    cdef double[::1] xv = x
    cdef double[::1] vxv = vx
    cdef long long[::1] offv = offs
    cdef long long[::1] cntv = counts
    cdef double[::1] av
    cdef double[::1] vyv
    cdef double[::1] ypv
    cdef Py_ssize_t nc = cntv.shape[0]
    cdef Py_ssize_t j, i, base
    cdef double aj, daj, atemp, v
    cdef bint has_accel = accel_nodes is not None
    cdef bint has_yp = yp is not None
    if has_accel:
        av = accel_nodes
    if has_yp:
        vyv = vy
        ypv = yp
    if has_accel:
        with nogil:
            for j in range(nc):
                base = offv[j]
                aj = av[j]
                daj = av[j + 1] - aj
                for i in range(cntv[j]):
                    atemp = aj + xv[base + i] * daj
                    v = vxv[base + i] + atemp
                    vxv[base + i] = v
                    xv[base + i] = xv[base + i] + fnstep * v
    else:
        with nogil:
            for j in range(nc):
                base = offv[j]
                for i in range(cntv[j]):
                    xv[base + i] = xv[base + i] + fnstep * vxv[base + i]
    if has_yp:
        with nogil:
            for j in range(nc):
                base = offv[j]
                for i in range(cntv[j]):
                    ypv[base + i] = ypv[base + i] + fnstep * vyv[base + i]
    return None


def fused_move_table(double[:, ::1] tab, double aj, double aj1, double fnstep,
                     bint has_accel, bint has_yp):
    """Fused move over one cell's table (columns x,vx,vy,vz[,yp])."""
    cdef Py_ssize_t n = tab.shape[0]
    cdef Py_ssize_t i
    cdef double atemp, v, daj
    daj = aj1 - aj
    with nogil:
        for i in range(n):
            if has_accel:
                atemp = aj + tab[i, 0] * daj
                v = tab[i, 1] + atemp
                tab[i, 1] = v
            else:
                v = tab[i, 1]
            tab[i, 0] = tab[i, 0] + fnstep * v
            if has_yp:
                tab[i, 4] = tab[i, 4] + fnstep * tab[i, 2]
    return None


def fused_move_aos(double[:, ::1] tab, long long[::1] starts,
                   long long[::1] counts, accel_nodes, double fnstep,
                   bint has_accel, bint has_yp):
    """Fused move over a cell-major contiguous table (array-of-structs)."""
    cdef double[::1] av
    cdef Py_ssize_t nc = counts.shape[0]
    cdef Py_ssize_t j, i, s
    cdef double aj, daj, atemp, v
    if has_accel:
        av = accel_nodes
    with nogil:
        for j in range(nc):
            s = starts[j]
            if has_accel:
                aj = av[j]
                daj = av[j + 1] - aj
            for i in range(s, s + counts[j]):
                if has_accel:
                    atemp = aj + tab[i, 0] * daj
                    v = tab[i, 1] + atemp
                    tab[i, 1] = v
                else:
                    v = tab[i, 1]
                tab[i, 0] = tab[i, 0] + fnstep * v
                if has_yp:
                    tab[i, 4] = tab[i, 4] + fnstep * tab[i, 2]
    return None
