# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics must match ``crave._kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def block_match(const cnp.int32_t[:, ::1] prev, const cnp.int32_t[:, ::1] nxt,
                int block, int radius, const cnp.int32_t[:, ::1] offsets):
    cdef Py_ssize_t h = prev.shape[0], w = prev.shape[1]
    cdef Py_ssize_t nby = h // block, nbx = w // block
    cdef Py_ssize_t n_off = offsets.shape[0]
    u_arr = np.zeros((nby, nbx), dtype=np.int32)
    v_arr = np.zeros((nby, nbx), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] u = u_arr
    cdef cnp.int32_t[:, ::1] v = v_arr
    cdef Py_ssize_t by, bx, k, i, j, y0, x0, yc, xc
    cdef int dy, dx
    cdef long long sad, best, diff
    for by in range(nby):
        for bx in range(nbx):
            y0 = by * block
            x0 = bx * block
            best = -1
            for k in range(n_off):
                dy = offsets[k, 0]
                dx = offsets[k, 1]
                yc = y0 + dy
                xc = x0 + dx
                if yc < 0 or xc < 0 or yc + block > h or xc + block > w:
                    continue
                sad = 0
                for i in range(block):
                    for j in range(block):
                        diff = prev[y0 + i, x0 + j] - nxt[yc + i, xc + j]
                        sad += diff if diff >= 0 else -diff
                    if best >= 0 and sad >= best:
                        break
                if best < 0 or sad < best:
                    best = sad
                    u[by, bx] = dx
                    v[by, bx] = dy
    return u_arr, v_arr


def kendall_counts(const double[::1] x, const double[::1] y):
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef long long conc = 0, disc = 0, tx = 0, ty = 0, txy = 0
    cdef double dx, dy
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                txy += 1
            elif dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif (dx > 0) == (dy > 0):
                conc += 1
            else:
                disc += 1
    return conc, disc, tx, ty, txy
