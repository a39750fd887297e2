"""Conforming P1 triangulations of polygonal domains and of the solver disk.

Meshes are immutable after construction: node/triangle arrays are marked
read-only and per-triangle geometry (areas, basis gradients, quality numbers)
is precomputed. A uniform grid over the bounding box supports fast point
location; see `scat2d._kernels` for the compiled/numpy backends.

Generators
----------
* axis-aligned rectangles: structured bisection (deterministic counts),
* generic simple polygons: Delaunay of a boundary+interior point set,
* the computational disk: concentric rings, six-fold symmetric.

Every generated mesh is validated: positive areas, edge conformity, no
hanging nodes, and the size bound max diam(K) <= h. The shape constant
s = max diam(K)/rho(K) is measured, not prescribed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from . import _kernels
from .errors import DegenerateSimplexError, InvalidDomainError, InvalidParameterError


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidParameterError("point coordinates must be finite")

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Simplex:
    """Counterclockwise vertex index triple."""

    vertex_ids: tuple[int, int, int]

    def __post_init__(self):
        if len(set(self.vertex_ids)) != 3:
            raise DegenerateSimplexError(f"repeated vertex ids {self.vertex_ids}")


def _polygon_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper intersection test for open segments (shared endpoints excluded)."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-14 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _is_simple_polygon(verts: np.ndarray) -> bool:
    n = len(verts)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, verts[j], verts[(j + 1) % n]):
                return False
    return True


def _is_convex(verts: np.ndarray) -> bool:
    n = len(verts)
    sign = 0
    for i in range(n):
        a, b, c = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
        cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cr) < 1e-14:
            continue
        s = 1 if cr > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def points_in_polygon(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Vectorized even-odd rule; boundary points are treated as inside."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        cond = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (x < xint)
    # snap boundary points in
    d = polygon_boundary_distance(pts, verts)
    return inside | (d < 1e-12)


def polygon_boundary_distance(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Distance from each point to the polygon boundary."""
    best = np.full(len(pts), np.inf)
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        ab = b - a
        denom = float(ab @ ab)
        t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.hypot(pts[:, 0] - proj[:, 0], pts[:, 1] - proj[:, 1])
        best = np.minimum(best, d)
    return best


def project_to_polygon(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Closest boundary point per input point."""
    best_d = np.full(len(pts), np.inf)
    best_p = np.zeros_like(pts)
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        ab = b - a
        denom = float(ab @ ab)
        t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.hypot(pts[:, 0] - proj[:, 0], pts[:, 1] - proj[:, 1])
        upd = d < best_d
        best_d[upd] = d[upd]
        best_p[upd] = proj[upd]
    return best_p


@dataclass
class PolyDomain:
    """Union of disjoint simple polygons inside the ball of radius R0."""

    components: list[np.ndarray]
    bounding_radius: float
    convex_flags: list[bool] = field(default_factory=list)

    def __post_init__(self):
        comps = []
        for verts in self.components:
            v = np.asarray(verts, dtype=np.float64)
            if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
                raise InvalidDomainError("each component needs >= 3 planar vertices")
            if not _is_simple_polygon(v):
                raise InvalidDomainError("self-intersecting polygon component")
            if _polygon_area(v) < 0:
                v = v[::-1].copy()
            comps.append(v)
        self.components = comps
        if not self.convex_flags:
            self.convex_flags = [_is_convex(v) for v in comps]
        r = max(float(np.hypot(v[:, 0], v[:, 1]).max()) for v in comps)
        if r > self.bounding_radius + 1e-12:
            raise InvalidDomainError(
                f"components reach radius {r:.6g} beyond bounding_radius {self.bounding_radius:.6g}"
            )
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                if self._components_touch(comps[i], comps[j]):
                    raise InvalidDomainError("components must be pairwise disjoint")

    @staticmethod
    def _components_touch(a: np.ndarray, b: np.ndarray) -> bool:
        if points_in_polygon(a, b).any() or points_in_polygon(b, a).any():
            return True
        da = polygon_boundary_distance(a, b).min()
        return bool(da < 1e-9)

    @property
    def area(self) -> float:
        return sum(abs(_polygon_area(v)) for v in self.components)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        out = np.zeros(len(pts), dtype=bool)
        for v in self.components:
            out |= points_in_polygon(pts, v)
        return out

    @classmethod
    def square(cls, half_width: float = 0.5, center=(0.0, 0.0), bounding_radius: float | None = None):
        cx, cy = center
        hw = float(half_width)
        verts = np.array(
            [[cx - hw, cy - hw], [cx + hw, cy - hw], [cx + hw, cy + hw], [cx - hw, cy + hw]]
        )
        if bounding_radius is None:
            bounding_radius = float(np.hypot(verts[:, 0], verts[:, 1]).max()) * 1.05
        return cls([verts], bounding_radius)

    @classmethod
    def rectangle(cls, x0, y0, x1, y1, bounding_radius: float | None = None):
        verts = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)
        if bounding_radius is None:
            bounding_radius = float(np.hypot(verts[:, 0], verts[:, 1]).max()) * 1.05
        return cls([verts], bounding_radius)

    @classmethod
    def polygon(cls, vertices, bounding_radius: float | None = None):
        verts = np.asarray(vertices, dtype=np.float64)
        if bounding_radius is None:
            bounding_radius = float(np.hypot(verts[:, 0], verts[:, 1]).max()) * 1.05
        return cls([verts], bounding_radius)


class Triangulation:
    """Conforming triangle mesh with cached P1 geometry.

    Attributes
    ----------
    nodes : (n, 2) float64, read-only
    triangles : (m, 3) int32, counterclockwise, read-only
    boundary_edges : (b, 2) int32
    mesh_size_h : declared size bound, max diam(K) <= h
    shape_constant_s : measured max of diam(K)/rho(K)
    """

    def __init__(self, nodes, triangles, boundary_edges=None, mesh_size_h=None, validate=True):
        nodes = np.ascontiguousarray(np.asarray(nodes, dtype=np.float64))
        triangles = np.ascontiguousarray(np.asarray(triangles, dtype=np.int32))
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise InvalidParameterError("nodes must be (n, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise InvalidParameterError("triangles must be (m, 3)")
        self.nodes = nodes
        self.triangles = triangles

        p0 = nodes[triangles[:, 0]]
        p1 = nodes[triangles[:, 1]]
        p2 = nodes[triangles[:, 2]]
        cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (
            p2[:, 0] - p0[:, 0]
        )
        if validate and np.any(cross <= 0):
            bad = int(np.argmin(cross))
            raise DegenerateSimplexError(
                f"triangle {bad} has non-positive signed area {cross[bad]:.3e}"
            )
        self.areas = 0.5 * cross

        # P1 basis gradients per triangle
        g = np.empty((len(triangles), 3, 2))
        inv2a = 1.0 / (2.0 * self.areas)
        g[:, 0, 0] = (p1[:, 1] - p2[:, 1]) * inv2a
        g[:, 0, 1] = (p2[:, 0] - p1[:, 0]) * inv2a
        g[:, 1, 0] = (p2[:, 1] - p0[:, 1]) * inv2a
        g[:, 1, 1] = (p0[:, 0] - p2[:, 0]) * inv2a
        g[:, 2, 0] = (p0[:, 1] - p1[:, 1]) * inv2a
        g[:, 2, 1] = (p1[:, 0] - p0[:, 0]) * inv2a
        self.grads = g

        l01 = np.hypot(p1[:, 0] - p0[:, 0], p1[:, 1] - p0[:, 1])
        l12 = np.hypot(p2[:, 0] - p1[:, 0], p2[:, 1] - p1[:, 1])
        l20 = np.hypot(p0[:, 0] - p2[:, 0], p0[:, 1] - p2[:, 1])
        self.h_K = np.maximum(np.maximum(l01, l12), l20)
        semi = 0.5 * (l01 + l12 + l20)
        self.rho_K = 2.0 * self.areas / semi

        if boundary_edges is None:
            boundary_edges = self._find_boundary_edges()
        self.boundary_edges = np.ascontiguousarray(np.asarray(boundary_edges, dtype=np.int32))

        self.mesh_size_h = float(mesh_size_h) if mesh_size_h is not None else float(self.h_K.max())
        self.shape_constant_s = float((self.h_K / self.rho_K).max())
        self._grid = None

        if validate:
            self._validate_conformity()
            if self.h_K.max() > self.mesh_size_h * (1 + 1e-12):
                raise InvalidParameterError(
                    f"max diam {self.h_K.max():.6g} exceeds declared h {self.mesh_size_h:.6g}"
                )

        self._grid = None
        for arr in (self.nodes, self.triangles, self.boundary_edges, self.areas, self.grads):
            arr.setflags(write=False)

    # -- queries ----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def simplex(self, k: int) -> Simplex:
        return Simplex(tuple(int(i) for i in self.triangles[k]))

    def _find_boundary_edges(self) -> np.ndarray:
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return edges[counts[inv] == 1]

    def _validate_conformity(self):
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        uniq, counts = np.unique(key, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise InvalidDomainError("non-manifold edge (shared by >2 triangles)")
        # hanging nodes: a node strictly inside another triangle's edge
        idx, bary = self.locate(self.nodes)
        own = idx >= 0
        on_open_edge = own & ((np.abs(bary) < 1e-9).sum(axis=1) == 1)
        cand = np.nonzero(on_open_edge)[0]
        if len(cand):
            member = (self.triangles[idx[cand]] == cand[:, None]).any(axis=1)
            if np.any(~member):
                i = int(cand[np.nonzero(~member)[0][0]])
                raise InvalidDomainError(f"hanging node {i} on edge of triangle {int(idx[i])}")

    # -- point location ---------------------------------------------------

    def _build_grid(self):
        n_cells_target = max(4, int(math.sqrt(self.n_triangles)))
        xmin, ymin = self.nodes.min(axis=0) - 1e-12
        xmax, ymax = self.nodes.max(axis=0) + 1e-12
        span = max(xmax - xmin, ymax - ymin)
        cell = max(span / n_cells_target, float(np.median(self.h_K)))
        nx = max(1, int(math.ceil((xmax - xmin) / cell)))
        ny = max(1, int(math.ceil((ymax - ymin) / cell)))
        inv_cell = 1.0 / cell

        t = self.triangles
        xs = self.nodes[t, 0]
        ys = self.nodes[t, 1]
        cx0 = np.clip(((xs.min(axis=1) - xmin) * inv_cell).astype(np.int64), 0, nx - 1)
        cx1 = np.clip(((xs.max(axis=1) - xmin) * inv_cell).astype(np.int64), 0, nx - 1)
        cy0 = np.clip(((ys.min(axis=1) - ymin) * inv_cell).astype(np.int64), 0, ny - 1)
        cy1 = np.clip(((ys.max(axis=1) - ymin) * inv_cell).astype(np.int64), 0, ny - 1)

        spans_x = cx1 - cx0 + 1
        spans_y = cy1 - cy0 + 1
        counts = spans_x * spans_y
        tri_rep = np.repeat(np.arange(self.n_triangles, dtype=np.int32), counts)
        total = int(counts.sum())
        offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        ox = offs // np.repeat(spans_y, counts)
        oy = offs % np.repeat(spans_y, counts)
        cells = (np.repeat(cx0, counts) + ox) * ny + (np.repeat(cy0, counts) + oy)

        order = np.argsort(cells, kind="stable")
        cells = cells[order]
        items = tri_rep[order]
        ptr = np.zeros(nx * ny + 1, dtype=np.int64)
        np.add.at(ptr, cells + 1, 1)
        np.cumsum(ptr, out=ptr)
        self._grid = (ptr, np.ascontiguousarray(items), float(xmin), float(ymin), inv_cell, nx, ny)

    def locate(self, points, tol: float = 1e-9):
        """Containing triangle index (or -1) and barycentric coordinates."""
        if self._grid is None:
            self._build_grid()
        ptr, items, x0, y0, inv_cell, nx, ny = self._grid
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return _kernels.locate_points(pts, self.nodes, self.triangles, ptr, items, x0, y0, inv_cell, nx, ny, tol)


# -- simplex geometry ------------------------------------------------------


def simplex_geometry(tri: Triangulation, K) -> tuple[float, float, float]:
    """(diameter h_K, inscribed-ball diameter rho_K, area) of one triangle.

    K is a triangle index or a Simplex belonging to the mesh.
    """
    k = K if isinstance(K, (int, np.integer)) else tri_index_of(tri, K)
    area = float(tri.areas[k])
    if area <= 0:
        raise DegenerateSimplexError(f"triangle {k} is degenerate")
    return float(tri.h_K[k]), float(tri.rho_K[k]), area


def tri_index_of(tri: Triangulation, simplex: Simplex) -> int:
    ids = np.sort(np.asarray(simplex.vertex_ids))
    match = np.nonzero((np.sort(tri.triangles, axis=1) == ids).all(axis=1))[0]
    if len(match) == 0:
        raise InvalidParameterError(f"simplex {simplex.vertex_ids} not in mesh")
    return int(match[0])


def vertex_matrix_inverse_norm(K, tri: Triangulation | None = None, vertices=None) -> float:
    """Spectral norm of the inverse edge matrix [x1-x0 | x2-x0].

    Accepts either (index, mesh) or explicit vertices (3, 2).
    """
    if vertices is None:
        k = K if isinstance(K, (int, np.integer)) else tri_index_of(tri, K)
        vertices = tri.nodes[tri.triangles[k]]
    v = np.asarray(vertices, dtype=np.float64)
    a_mat = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = a_mat[0, 0] * a_mat[1, 1] - a_mat[0, 1] * a_mat[1, 0]
    if abs(det) < 1e-300:
        raise DegenerateSimplexError("singular vertex matrix")
    smin = np.linalg.svd(a_mat, compute_uv=False)[-1]
    if smin == 0:
        raise DegenerateSimplexError("singular vertex matrix")
    return float(1.0 / smin)


# -- generators ------------------------------------------------------------


def _structured_rect(x0, y0, x1, y1, h):
    """Bisected square grid; every triangle diameter is the cell diagonal."""
    w, hgt = x1 - x0, y1 - y0
    nx = max(1, int(math.ceil(w * math.sqrt(2.0) / h)))
    ny = max(1, int(math.ceil(hgt * math.sqrt(2.0) / h)))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return nodes, np.asarray(tris, dtype=np.int32)


def _is_axis_rect(verts: np.ndarray) -> bool:
    if len(verts) != 4:
        return False
    xs = np.unique(np.round(verts[:, 0], 12))
    ys = np.unique(np.round(verts[:, 1], 12))
    return len(xs) == 2 and len(ys) == 2


def _delaunay_polygon(verts: np.ndarray, h: float):
    """Delaunay mesh of a simple polygon; boundary nodes lie on the edges."""
    g = h / math.sqrt(2.0)
    for _attempt in range(6):
        bpts = []
        n = len(verts)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            seg = float(np.hypot(*(b - a)))
            k = max(1, int(math.ceil(seg / g)))
            t = np.arange(k) / k
            bpts.append(a + t[:, None] * (b - a))
        bpts = np.concatenate(bpts)

        xmin, ymin = verts.min(axis=0)
        xmax, ymax = verts.max(axis=0)
        xs = np.arange(xmin + 0.5 * g, xmax, g)
        ys = np.arange(ymin + 0.5 * g, ymax, g)
        if len(xs) and len(ys):
            xx, yy = np.meshgrid(xs, ys, indexing="ij")
            ipts = np.column_stack([xx.ravel(), yy.ravel()])
            keep = points_in_polygon(ipts, verts)
            keep &= polygon_boundary_distance(ipts, verts) > 0.45 * g
            ipts = ipts[keep]
        else:
            ipts = np.zeros((0, 2))

        pts = np.concatenate([bpts, ipts])
        dela = Delaunay(pts)
        tris = dela.simplices.astype(np.int32)
        p = pts[tris]
        cent = p.mean(axis=1)
        cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
            p[:, 1, 1] - p[:, 0, 1]
        ) * (p[:, 2, 0] - p[:, 0, 0])
        flip = cross < 0
        tris[flip] = tris[flip][:, ::-1]
        keep = points_in_polygon(cent, verts) & (np.abs(cross) > 1e-14)
        tris = tris[keep]

        used = np.unique(tris)
        remap = -np.ones(len(pts), dtype=np.int32)
        remap[used] = np.arange(len(used), dtype=np.int32)
        nodes = pts[used]
        tris = remap[tris]

        p0, p1, p2 = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
        hK = np.maximum(
            np.hypot(*(p1 - p0).T), np.maximum(np.hypot(*(p2 - p1).T), np.hypot(*(p0 - p2).T))
        )
        if hK.max() <= h:
            return nodes, tris
        g *= 0.85
    raise InvalidDomainError("polygon mesher failed to meet the size bound")


def build_triangulation(domain: PolyDomain, h: float) -> Triangulation:
    """Mesh every component of the domain at size bound h."""
    if not (h > 0):
        raise InvalidParameterError(f"h must be positive, got {h}")
    if h > 1.0:
        raise InvalidParameterError("h must lie in (0, 1] after nondimensionalization")

    all_nodes, all_tris = [], []
    offset = 0
    for verts in domain.components:
        if _is_axis_rect(verts):
            x0, y0 = verts.min(axis=0)
            x1, y1 = verts.max(axis=0)
            nodes, tris = _structured_rect(x0, y0, x1, y1, h)
        else:
            nodes, tris = _delaunay_polygon(verts, h)
        all_nodes.append(nodes)
        all_tris.append(tris + offset)
        offset += len(nodes)
    nodes = np.concatenate(all_nodes)
    tris = np.concatenate(all_tris)
    mesh = Triangulation(nodes, tris, mesh_size_h=h)
    cover = float(mesh.areas.sum())
    if abs(cover - domain.area) > 1e-6 * domain.area:
        raise InvalidDomainError(
            f"mesh covers area {cover:.9g}, domain area {domain.area:.9g}"
        )
    return mesh


def build_disk_triangulation(radius: float, h: float) -> Triangulation:
    """Six-fold symmetric disk mesh; boundary nodes lie exactly on the circle.

    Ring j carries 6j nodes; the polygon inscribed in the outer circle is the
    actual computational domain.
    """
    if not (radius > 0 and h > 0):
        raise InvalidParameterError("radius and h must be positive")
    m = max(2, int(math.ceil(1.46 * radius / h)))
    for _ in range(4):
        nodes = [(0.0, 0.0)]
        ring_start = [0, 1]
        dr = radius / m
        for j in range(1, m + 1):
            r = j * dr
            ang = 2.0 * np.pi * np.arange(6 * j) / (6 * j)
            nodes.extend(zip(r * np.cos(ang), r * np.sin(ang)))
            ring_start.append(len(nodes))
        nodes = np.asarray(nodes)

        tris = []
        # hexagonal fan around the center
        for t in range(6):
            tris.append((0, 1 + t, 1 + (t + 1) % 6))
        for j in range(1, m):
            s_in, s_out = ring_start[j], ring_start[j + 1]
            n_in, n_out = 6 * j, 6 * (j + 1)
            for sect in range(6):
                a = [s_in + (sect * j + t) % n_in for t in range(j + 1)]
                b = [s_out + (sect * (j + 1) + t) % n_out for t in range(j + 2)]
                ia = ib = 0
                # zigzag strip between the two ring arcs of one sector
                while ia < j or ib < j + 1:
                    if ib <= ia and ib < j + 1:
                        tris.append((a[ia], b[ib], b[ib + 1]))
                        ib += 1
                    else:
                        tris.append((a[ia], b[ib], a[ia + 1]))
                        ia += 1
        tris = np.asarray(tris, dtype=np.int32)
        p = nodes[tris]
        el = np.stack(
            [
                np.hypot(*(p[:, 1] - p[:, 0]).T),
                np.hypot(*(p[:, 2] - p[:, 1]).T),
                np.hypot(*(p[:, 0] - p[:, 2]).T),
            ]
        )
        if el.max() <= h:
            return Triangulation(nodes, tris, mesh_size_h=h)
        m = int(math.ceil(m * el.max() / h)) + 1
    raise InvalidParameterError("disk mesher failed to meet the size bound")


def boundary_nodes_by_angle(tri: Triangulation) -> np.ndarray:
    """Boundary node indices sorted counterclockwise by polar angle."""
    ids = np.unique(tri.boundary_edges)
    ang = np.arctan2(tri.nodes[ids, 1], tri.nodes[ids, 0])
    return ids[np.argsort(ang)]


# -- interpolation and reporting -------------------------------------------


def interpolate(f, tri: Triangulation):
    """Nodal interpolant of a callable; returns a FemScalarField.

    f may take (x, y) scalars or an (n, 2) array.
    """
    from .fields import FemScalarField

    try:
        vals = np.asarray(f(tri.nodes), dtype=np.float64)
        if vals.shape != (tri.n_nodes,):
            raise TypeError
    except TypeError:
        vals = np.array([f(x, y) for x, y in tri.nodes], dtype=np.float64)
    return FemScalarField(tri, vals)


@dataclass
class RegularityReport:
    h_K: np.ndarray
    rho_K: np.ndarray
    worst_ratio: float
    max_h: float
    declared_h: float
    violations: list[int]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_regularity(tri: Triangulation) -> RegularityReport:
    ratios = tri.h_K / tri.rho_K
    violations = np.nonzero(tri.h_K > tri.mesh_size_h * (1 + 1e-12))[0]
    return RegularityReport(
        h_K=tri.h_K.copy(),
        rho_K=tri.rho_K.copy(),
        worst_ratio=float(ratios.max()),
        max_h=float(tri.h_K.max()),
        declared_h=tri.mesh_size_h,
        violations=[int(i) for i in violations],
    )


# -- text format ------------------------------------------------------------


def write_mesh(tri: Triangulation, path, trailer: str | None = None) -> None:
    """`nodes <n> triangles <m>` header, node lines, triangle lines,
    `boundary <b>` and edge lines. An optional trailing comment is allowed."""
    with open(path, "w") as fh:
        fh.write(f"nodes {tri.n_nodes} triangles {tri.n_triangles}\n")
        for x, y in tri.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in tri.triangles:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"boundary {len(tri.boundary_edges)}\n")
        for a, b in tri.boundary_edges:
            fh.write(f"{a} {b}\n")
        if trailer:
            fh.write(f"# {trailer}\n")


def read_mesh(path) -> Triangulation:
    with open(path) as fh:
        head = fh.readline().split()
        n, m = int(head[1]), int(head[3])
        nodes = np.array([fh.readline().split() for _ in range(n)], dtype=np.float64)
        tris = np.array([fh.readline().split() for _ in range(m)], dtype=np.int32)
        bhead = fh.readline().split()
        b = int(bhead[1])
        bedges = np.array([fh.readline().split() for _ in range(b)], dtype=np.int32)
        bedges = bedges.reshape(b, 2) if b else np.zeros((0, 2), dtype=np.int32)
    return Triangulation(nodes, tris, boundary_edges=bedges)
