"""Numpy fallback implementations of the hot kernels.

Same signatures as the compiled module `_core`; everything is vectorized,
so the fallback is slower but not pathologically so.
"""

import numpy as np

# local P1 mass tensor: T[i,j,m] = (1/area) * integral of phi_i phi_j phi_m
_T = np.zeros((3, 3, 3))
for _i in range(3):
    for _j in range(3):
        for _m in range(3):
            n_eq = (_i == _j) + (_j == _m) + (_i == _m)
            if n_eq == 3:
                _T[_i, _j, _m] = 1.0 / 10.0
            elif n_eq == 1:
                _T[_i, _j, _m] = 1.0 / 30.0
            else:
                _T[_i, _j, _m] = 1.0 / 60.0
del _i, _j, _m

BACKEND = "numpy"


def locate_points(points, nodes, tris, grid_ptr, grid_items, x0, y0, inv_cell, nx, ny, tol=1e-9):
    """Find the containing triangle and barycentric coordinates per point.

    Returns (idx, bary); idx is -1 for points in no triangle of the grid.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    idx = np.full(n, -1, dtype=np.int64)
    bary = np.zeros((n, 3), dtype=np.float64)
    if n == 0:
        return idx, bary

    cx = np.clip(((pts[:, 0] - x0) * inv_cell).astype(np.int64), 0, nx - 1)
    cy = np.clip(((pts[:, 1] - y0) * inv_cell).astype(np.int64), 0, ny - 1)
    cell = cx * ny + cy

    counts = grid_ptr[cell + 1] - grid_ptr[cell]
    total = int(counts.sum())
    if total == 0:
        return idx, bary

    pair_pt = np.repeat(np.arange(n), counts)
    # concatenated ranges grid_ptr[cell[i]] .. grid_ptr[cell[i]+1]
    starts = grid_ptr[cell]
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    pair_tri = grid_items[np.repeat(starts, counts) + offs]

    t = tris[pair_tri]
    p0 = nodes[t[:, 0]]
    e1 = nodes[t[:, 1]] - p0
    e2 = nodes[t[:, 2]] - p0
    d = pts[pair_pt] - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        b1 = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
        b2 = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
    b0 = 1.0 - b1 - b2
    ok = (b0 >= -tol) & (b1 >= -tol) & (b2 >= -tol) & (det > 0)

    # keep the first valid candidate per point
    good_pt = pair_pt[ok]
    if good_pt.size:
        first = np.full(n, -1, dtype=np.int64)
        # reversed so that the earliest pair wins
        first[good_pt[::-1]] = np.nonzero(ok)[0][::-1]
        has = first >= 0
        sel = first[has]
        idx[has] = pair_tri[sel]
        bary[has, 0] = b0[sel]
        bary[has, 1] = b1[sel]
        bary[has, 2] = b2[sel]
    return idx, bary


def assemble_p1(tris, areas, grads, sigma_tri, eta_tri):
    """Element stiffness and mass contributions in COO layout.

    sigma_tri holds per-triangle means (s11, s12, s22) of the diffusion
    tensor, eta_tri the three nodal values of the scalar coefficient.
    Returns (rows, cols, stiffness, mass), each of length 9*ntri.
    """
    m = tris.shape[0]
    sig = np.empty((m, 2, 2))
    sig[:, 0, 0] = sigma_tri[:, 0]
    sig[:, 0, 1] = sigma_tri[:, 1]
    sig[:, 1, 0] = sigma_tri[:, 1]
    sig[:, 1, 1] = sigma_tri[:, 2]
    stiff = np.einsum("kid,kde,kje->kij", grads, sig, grads) * areas[:, None, None]
    mass = np.einsum("ijm,km->kij", _T, eta_tri) * areas[:, None, None]
    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    return (
        rows.astype(np.int64),
        cols.astype(np.int64),
        np.ascontiguousarray(stiff.reshape(-1)),
        np.ascontiguousarray(mass.reshape(-1)),
    )


def mass_adjoint(tris, areas, w_tri, u_tri, n_nodes):
    """Accumulate a_m = sum_K area_K * sum_ij T[i,j,m] w_i u_j at the nodes."""
    contrib = np.einsum("ijm,ki,kj->km", _T, w_tri, u_tri) * areas[:, None]
    out = np.zeros(n_nodes, dtype=contrib.dtype)
    np.add.at(out, tris.reshape(-1), contrib.reshape(-1))
    return out


def stiff_adjoint(tris, areas, grads, w_vals, u_vals, n_nodes):
    """Per-entry diffusion sensitivities (e11, e12, e22) accumulated at nodes.

    w_vals/u_vals are nodal vectors; the triangle-mean convention for the
    tensor spreads area/3 onto each vertex.
    """
    gw = np.einsum("kid,ki->kd", grads, w_vals[tris])
    gu = np.einsum("kid,ki->kd", grads, u_vals[tris])
    e11 = gw[:, 0] * gu[:, 0]
    e12 = gw[:, 0] * gu[:, 1] + gw[:, 1] * gu[:, 0]
    e22 = gw[:, 1] * gu[:, 1]
    out = np.zeros((3, n_nodes), dtype=gw.dtype)
    third = areas / 3.0
    flat = tris.reshape(-1)
    for row, e in zip(out, (e11, e12, e22)):
        np.add.at(row, flat, np.repeat(e * third, 3))
    return out
