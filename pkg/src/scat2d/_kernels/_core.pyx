# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: point location and P1 element assembly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

cdef double[3][3][3] _T_TAB

cdef void _fill_T():
    cdef int i, j, m, neq
    for i in range(3):
        for j in range(3):
            for m in range(3):
                neq = (i == j) + (j == m) + (i == m)
                if neq == 3:
                    _T_TAB[i][j][m] = 1.0 / 10.0
                elif neq == 1:
                    _T_TAB[i][j][m] = 1.0 / 30.0
                else:
                    _T_TAB[i][j][m] = 1.0 / 60.0

_fill_T()


def locate_points(points, nodes, tris, grid_ptr, grid_items,
                  double x0, double y0, double inv_cell, long nx, long ny,
                  double tol=1e-9):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] nds = nodes
    cdef const int[:, ::1] trs = tris
    cdef const long[::1] ptr = grid_ptr
    cdef const int[::1] items = grid_items

    cdef Py_ssize_t n = pts.shape[0]
    idx_arr = np.full(n, -1, dtype=np.int64)
    bary_arr = np.zeros((n, 3), dtype=np.float64)
    cdef long[::1] idx = idx_arr
    cdef double[:, ::1] bary = bary_arr

    cdef Py_ssize_t p, c
    cdef long cx, cy, cell, k, t
    cdef int i0, i1, i2
    cdef double px, py, x0t, y0t, e1x, e1y, e2x, e2y, dx, dy, det, b0, b1, b2

    for p in range(n):
        px = pts[p, 0]
        py = pts[p, 1]
        cx = <long>((px - x0) * inv_cell)
        cy = <long>((py - y0) * inv_cell)
        if cx < 0:
            cx = 0
        elif cx > nx - 1:
            cx = nx - 1
        if cy < 0:
            cy = 0
        elif cy > ny - 1:
            cy = ny - 1
        cell = cx * ny + cy
        for k in range(ptr[cell], ptr[cell + 1]):
            t = items[k]
            i0 = trs[t, 0]
            i1 = trs[t, 1]
            i2 = trs[t, 2]
            x0t = nds[i0, 0]
            y0t = nds[i0, 1]
            e1x = nds[i1, 0] - x0t
            e1y = nds[i1, 1] - y0t
            e2x = nds[i2, 0] - x0t
            e2y = nds[i2, 1] - y0t
            dx = px - x0t
            dy = py - y0t
            det = e1x * e2y - e1y * e2x
            if det <= 0.0:
                continue
            b1 = (dx * e2y - dy * e2x) / det
            if b1 < -tol:
                continue
            b2 = (e1x * dy - e1y * dx) / det
            if b2 < -tol:
                continue
            b0 = 1.0 - b1 - b2
            if b0 < -tol:
                continue
            idx[p] = t
            bary[p, 0] = b0
            bary[p, 1] = b1
            bary[p, 2] = b2
            break
    return idx_arr, bary_arr


def assemble_p1(tris, areas, grads, sigma_tri, eta_tri):
    cdef const int[:, ::1] trs = tris
    cdef const double[::1] ar = areas
    cdef const double[:, :, ::1] gr = grads
    cdef const double[:, ::1] sg = sigma_tri
    cdef const double[:, ::1] et = eta_tri

    cdef Py_ssize_t m = trs.shape[0]
    rows_arr = np.empty(9 * m, dtype=np.int64)
    cols_arr = np.empty(9 * m, dtype=np.int64)
    stiff_arr = np.empty(9 * m, dtype=np.float64)
    mass_arr = np.empty(9 * m, dtype=np.float64)
    cdef long[::1] rows = rows_arr
    cdef long[::1] cols = cols_arr
    cdef double[::1] stiff = stiff_arr
    cdef double[::1] mass = mass_arr

    cdef Py_ssize_t k, i, j, q
    cdef long base
    cdef double a, s11, s12, s22, gix, giy, gjx, gjy, acc

    for k in range(m):
        a = ar[k]
        s11 = sg[k, 0]
        s12 = sg[k, 1]
        s22 = sg[k, 2]
        base = 9 * k
        for i in range(3):
            gix = gr[k, i, 0]
            giy = gr[k, i, 1]
            for j in range(3):
                gjx = gr[k, j, 0]
                gjy = gr[k, j, 1]
                stiff[base + 3 * i + j] = a * (
                    gix * (s11 * gjx + s12 * gjy) + giy * (s12 * gjx + s22 * gjy)
                )
                acc = 0.0
                for q in range(3):
                    acc += _T_TAB[i][j][q] * et[k, q]
                mass[base + 3 * i + j] = a * acc
                rows[base + 3 * i + j] = trs[k, i]
                cols[base + 3 * i + j] = trs[k, j]
    return rows_arr, cols_arr, stiff_arr, mass_arr
