"""Piecewise-affine coefficient fields and their regularization machinery.

A coefficient pair couples a (possibly matrix-valued) diffusion tensor sigma
and a scalar refraction coefficient eta on a known polygonal support Omega,
extended by the homogeneous background (identity, 1) outside. Total variation
and W^{1,inf} seminorms are exact for P1 fields (gradients are constant per
triangle). Mollification with a fixed radial bump supplies the smooth
approximants used by the recovery interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPairError, InvalidParameterError, NotAdmissibleError
from .mesh import (
    PolyDomain,
    Triangulation,
    build_triangulation,
    points_in_polygon,
    project_to_polygon,
)

# radial bump exp(-1/(1-|z|^2)) on the unit ball, normalized mass 1
MOLLIFIER_NORM = 2.143565775792237
# int |y| xi(y) dy, controls |f - f_delta| <= MOLLIFIER_M1 * Lip(f) * delta
MOLLIFIER_M1 = 0.4727515214242044
# int |grad xi|, controls ||D^2 f_delta|| <= MOLLIFIER_GRAD_L1 * Lip(f) / delta
MOLLIFIER_GRAD_L1 = 2.9899478159838253

# 7-point order-5 triangle rule (barycentric coordinates, weights sum to 1)
_A1 = (6.0 + math.sqrt(15.0)) / 21.0
_A2 = (6.0 - math.sqrt(15.0)) / 21.0
QUAD7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _A1, 1 - 2 * _A1],
        [_A1, 1 - 2 * _A1, _A1],
        [1 - 2 * _A1, _A1, _A1],
        [_A2, _A2, 1 - 2 * _A2],
        [_A2, 1 - 2 * _A2, _A2],
        [1 - 2 * _A2, _A2, _A2],
    ]
)
QUAD7_W = np.array(
    [9 / 40]
    + [(155.0 + math.sqrt(15.0)) / 1200.0] * 3
    + [(155.0 - math.sqrt(15.0)) / 1200.0] * 3
)


def quad_points(tri: Triangulation):
    """Physical 7-point quadrature nodes (m, 7, 2) and weights (m, 7)."""
    p = tri.nodes[tri.triangles]
    pts = np.einsum("qi,kid->kqd", QUAD7_BARY, p)
    w = tri.areas[:, None] * QUAD7_W[None, :]
    return pts, w


class FemScalarField:
    """Continuous piecewise-affine function given by nodal values."""

    def __init__(self, mesh: Triangulation, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (mesh.n_nodes,):
            raise InvalidParameterError(
                f"need one value per node: {values.shape} vs {mesh.n_nodes}"
            )
        self.mesh = mesh
        self.values = values

    def evaluate(self, points, fill=np.nan):
        idx, bary = self.mesh.locate(points)
        out = np.full(len(bary), fill, dtype=np.float64)
        inside = idx >= 0
        tri = self.mesh.triangles[idx[inside]]
        out[inside] = np.einsum("pj,pj->p", bary[inside], self.values[tri])
        return out

    def triangle_gradients(self) -> np.ndarray:
        """(m, 2) constant gradient per triangle."""
        return np.einsum("kid,ki->kd", self.mesh.grads, self.values[self.mesh.triangles])

    def __add__(self, other):
        if isinstance(other, FemScalarField):
            return FemScalarField(self.mesh, self.values + other.values)
        return FemScalarField(self.mesh, self.values + other)

    def __mul__(self, c):
        return FemScalarField(self.mesh, self.values * c)

    __rmul__ = __mul__


class SymMatrixField:
    """Symmetric 2x2 matrix field, entries stored as three scalar fields."""

    def __init__(self, a11: FemScalarField, a12: FemScalarField, a22: FemScalarField):
        if not (a11.mesh is a12.mesh is a22.mesh):
            raise InvalidParameterError("matrix entries must share one mesh")
        self.a11, self.a12, self.a22 = a11, a12, a22
        self.mesh = a11.mesh

    def entries(self) -> np.ndarray:
        return np.column_stack([self.a11.values, self.a12.values, self.a22.values])

    def nodal_eigen_range(self) -> tuple[float, float]:
        e = self.entries()
        mid = 0.5 * (e[:, 0] + e[:, 2])
        rad = np.sqrt(0.25 * (e[:, 0] - e[:, 2]) ** 2 + e[:, 1] ** 2)
        return float((mid - rad).min()), float((mid + rad).max())


def sym_eigen_clip(entries: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Clip eigenvalues of (n, 3) symmetric matrices [a11, a12, a22] to [lo, hi]."""
    a11, a12, a22 = entries[:, 0], entries[:, 1], entries[:, 2]
    mid = 0.5 * (a11 + a22)
    half = 0.5 * (a11 - a22)
    rad = np.sqrt(half**2 + a12**2)
    l1 = np.clip(mid - rad, lo, hi)
    l2 = np.clip(mid + rad, lo, hi)
    # eigenvector for l2 is (cos t, sin t) with t = angle of (half, a12)/rad
    safe = rad > 1e-15
    c = np.ones_like(rad)
    s = np.zeros_like(rad)
    c[safe] = half[safe] / rad[safe]
    s[safe] = a12[safe] / rad[safe]
    # rebuild: mid' + rad' * [[c, s], [s, -c]]
    mid2 = 0.5 * (l1 + l2)
    rad2 = 0.5 * (l2 - l1)
    out = np.empty_like(entries)
    out[:, 0] = mid2 + rad2 * c
    out[:, 1] = rad2 * s
    out[:, 2] = mid2 - rad2 * c
    return out


@dataclass(frozen=True)
class Bounds:
    lambda0: float
    lambda1: float
    delta0: float
    delta1: float

    def __post_init__(self):
        if not (0 < self.lambda0 <= self.lambda1 and 0 < self.delta0 <= self.delta1):
            raise InvalidParameterError("need 0 < lambda0 <= lambda1 and 0 < delta0 <= delta1")


class CoefficientPair:
    """(sigma, eta) on Omega with background (identity, 1) outside.

    sigma is either a SymMatrixField or, in isotropic mode, a single scalar
    field s with sigma = s * identity.
    """

    def __init__(self, domain: PolyDomain, bounds: Bounds, sigma, eta: FemScalarField):
        self.domain = domain
        self.bounds = bounds
        self.eta = eta
        if isinstance(sigma, SymMatrixField):
            self.sigma_full = sigma
            self.sigma_iso = None
            if sigma.mesh is not eta.mesh:
                raise InvalidPairError("sigma and eta must share one mesh")
        elif isinstance(sigma, FemScalarField):
            self.sigma_full = None
            self.sigma_iso = sigma
            if sigma.mesh is not eta.mesh:
                raise InvalidPairError("sigma and eta must share one mesh")
        else:
            raise InvalidParameterError("sigma must be a scalar or symmetric-matrix field")

    @property
    def mesh(self) -> Triangulation:
        return self.eta.mesh

    @property
    def sigma_mode(self) -> str:
        return "isotropic" if self.sigma_iso is not None else "full"

    def sigma_entry_fields(self) -> list[FemScalarField]:
        if self.sigma_iso is not None:
            return [self.sigma_iso]
        return [self.sigma_full.a11, self.sigma_full.a12, self.sigma_full.a22]

    def sigma_entries(self) -> np.ndarray:
        """Nodal (n, 3) entries [s11, s12, s22]."""
        if self.sigma_iso is not None:
            s = self.sigma_iso.values
            return np.column_stack([s, np.zeros_like(s), s])
        return self.sigma_full.entries()

    def eval_eta(self, points) -> np.ndarray:
        return self.eta.evaluate(points, fill=1.0)

    def eval_sigma_entries(self, points) -> np.ndarray:
        """(p, 3) entries with identity background outside Omega."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        idx, bary = self.mesh.locate(pts)
        out = np.tile(np.array([1.0, 0.0, 1.0]), (len(pts), 1))
        inside = idx >= 0
        tri = self.mesh.triangles[idx[inside]]
        ent = self.sigma_entries()
        for c in range(3):
            out[inside, c] = np.einsum("pj,pj->p", bary[inside], ent[:, c][tri])
        return out

    def feasibility_violation(self) -> float:
        """Max distance of nodal values outside the bound box (0 if feasible)."""
        b = self.bounds
        v = max(float((b.delta0 - self.eta.values).max()), float((self.eta.values - b.delta1).max()), 0.0)
        if self.sigma_iso is not None:
            s = self.sigma_iso.values
            v = max(v, float((b.lambda0 - s).max()), float((s - b.lambda1).max()))
        else:
            lo, hi = self.sigma_full.nodal_eigen_range()
            v = max(v, b.lambda0 - lo, hi - b.lambda1)
        return max(v, 0.0)

    def is_feasible(self, tol: float = 1e-9) -> bool:
        return self.feasibility_violation() <= tol

    def with_nodal(self, sigma_entries=None, eta_values=None) -> "CoefficientPair":
        """Copy with replaced nodal data (same mesh, domain, bounds)."""
        eta = FemScalarField(self.mesh, self.eta.values if eta_values is None else eta_values)
        if self.sigma_iso is not None:
            s = self.sigma_iso.values if sigma_entries is None else sigma_entries[:, 0]
            sig = FemScalarField(self.mesh, s)
        else:
            ent = self.sigma_entries() if sigma_entries is None else sigma_entries
            sig = SymMatrixField(
                FemScalarField(self.mesh, ent[:, 0]),
                FemScalarField(self.mesh, ent[:, 1]),
                FemScalarField(self.mesh, ent[:, 2]),
            )
        return CoefficientPair(self.domain, self.bounds, sig, eta)


def background_pair(
    domain: PolyDomain, bounds: Bounds, mesh: Triangulation, sigma_mode: str = "isotropic"
) -> CoefficientPair:
    ones = np.ones(mesh.n_nodes)
    eta = FemScalarField(mesh, ones.copy())
    if sigma_mode == "isotropic":
        sigma = FemScalarField(mesh, ones.copy())
    else:
        sigma = SymMatrixField(
            FemScalarField(mesh, ones.copy()),
            FemScalarField(mesh, np.zeros(mesh.n_nodes)),
            FemScalarField(mesh, ones.copy()),
        )
    return CoefficientPair(domain, bounds, sigma, eta)


# -- seminorms ---------------------------------------------------------------


def _region_mask(mesh: Triangulation, region: PolyDomain | None) -> np.ndarray:
    if region is None:
        return np.ones(mesh.n_triangles, dtype=bool)
    cent = mesh.nodes[mesh.triangles].mean(axis=1)
    return region.contains(cent)


def tv_seminorm(f: FemScalarField, region: PolyDomain | None = None, tau: float = 0.0) -> float:
    """Exact total variation of a P1 field: sum over triangles of area*|grad|.

    tau > 0 gives the smoothed variant sum area*sqrt(|grad|^2 + tau^2) used
    inside the optimizer; reported values use tau = 0.
    """
    g = f.triangle_gradients()
    mask = _region_mask(f.mesh, region)
    mag = np.sqrt(g[mask, 0] ** 2 + g[mask, 1] ** 2 + tau**2)
    return float(np.dot(f.mesh.areas[mask], mag))


def w1inf_seminorm(f, region: PolyDomain | None = None) -> float:
    """Essential sup of the gradient norm.

    For a matrix field the gradient is stacked entrywise (4 rows including
    the repeated off-diagonal) and measured in the spectral norm.
    """
    if isinstance(f, FemScalarField):
        g = f.triangle_gradients()
        mask = _region_mask(f.mesh, region)
        if not mask.any():
            return 0.0
        return float(np.hypot(g[mask, 0], g[mask, 1]).max())
    if isinstance(f, SymMatrixField):
        g11 = f.a11.triangle_gradients()
        g12 = f.a12.triangle_gradients()
        g22 = f.a22.triangle_gradients()
        mask = _region_mask(f.mesh, region)
        stack = np.stack([g11[mask], g12[mask], g12[mask], g22[mask]], axis=1)  # (m,4,2)
        svals = np.linalg.svd(stack, compute_uv=False)
        return float(svals[:, 0].max()) if len(svals) else 0.0
    raise InvalidParameterError("unsupported field type")


def matrix_tv(pair_or_field, region=None, tau: float = 0.0) -> float:
    """Entrywise-TV matrix combined in the Frobenius norm.

    The 2x2 matrix of entry TVs has the off-diagonal twice, hence the
    factor 2 on the mixed entry; an isotropic field s*I gives sqrt(2)*TV(s).
    """
    if isinstance(pair_or_field, CoefficientPair):
        fields = pair_or_field.sigma_entry_fields()
        if pair_or_field.sigma_iso is not None:
            t = tv_seminorm(fields[0], region, tau)
            return math.sqrt(2.0) * t
        t11, t12, t22 = (tv_seminorm(f, region, tau) for f in fields)
    else:
        t11 = tv_seminorm(pair_or_field.a11, region, tau)
        t12 = tv_seminorm(pair_or_field.a12, region, tau)
        t22 = tv_seminorm(pair_or_field.a22, region, tau)
    return math.sqrt(t11**2 + 2.0 * t12**2 + t22**2)


def regularizer_R(
    pair: CoefficientPair,
    mode: str = "tv",
    tau: float = 0.0,
    check_bounds: bool = True,
) -> float:
    """Convex regularizer: TV of eta plus a seminorm of sigma.

    mode "tv" combines entrywise total variations (default); mode "w1inf"
    uses the Lipschitz-type seminorm on sigma instead.
    """
    if check_bounds and not pair.is_feasible():
        raise NotAdmissibleError(
            f"coefficient bounds violated by {pair.feasibility_violation():.3g}"
        )
    eta_part = tv_seminorm(pair.eta, None, tau)
    if mode == "tv":
        sig_part = matrix_tv(pair, None, tau)
    elif mode == "w1inf":
        sig = pair.sigma_full
        if sig is None:
            # isotropic s*I: stacked gradient [gs; 0; 0; gs] has norm sqrt(2)|gs|
            sig_part = math.sqrt(2.0) * w1inf_seminorm(pair.sigma_iso)
        else:
            sig_part = w1inf_seminorm(sig)
    else:
        raise InvalidParameterError(f"unknown regularizer mode {mode!r}")
    return sig_part + eta_part


# -- X-norm distance ---------------------------------------------------------


def _sym_opnorm(e: np.ndarray) -> np.ndarray:
    """Spectral norm of symmetric matrices given as (..., 3) entries."""
    mid = 0.5 * (e[..., 0] + e[..., 2])
    rad = np.sqrt(0.25 * (e[..., 0] - e[..., 2]) ** 2 + e[..., 1] ** 2)
    return np.abs(mid) + rad


def x_distance(p: CoefficientPair, q: CoefficientPair, refine: int = 0) -> float:
    """L1 distance of the pairs over the measurement ball.

    Both backgrounds agree outside Omega, so the integral reduces to Omega;
    it is evaluated with a fixed 7-point order-5 rule on the finer of the two
    meshes (optionally refined for oracle checks).
    """
    if p.domain is not q.domain and abs(p.domain.bounding_radius - q.domain.bounding_radius) > 1e-12:
        raise InvalidPairError("pairs live on different measurement balls")
    fine = p.mesh if p.mesh.h_K.max() <= q.mesh.h_K.max() else q.mesh
    pts, w = quad_points(fine)
    if refine > 0:
        pts, w = _refined_quad(fine, refine)
    flat = pts.reshape(-1, 2)
    d_eta = np.abs(p.eval_eta(flat) - q.eval_eta(flat))
    d_sig = _sym_opnorm(p.eval_sigma_entries(flat) - q.eval_sigma_entries(flat))
    wf = w.reshape(-1)
    return float(wf @ d_sig + wf @ d_eta)


def _refined_quad(mesh: Triangulation, levels: int):
    """Quadrature on a uniform refinement of each triangle (test oracle)."""
    p = mesh.nodes[mesh.triangles]
    tris = [p]
    for _ in range(levels):
        new = []
        for t in tris:
            a, b, c = t[:, 0], t[:, 1], t[:, 2]
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            new.append(np.stack([a, ab, ca], axis=1))
            new.append(np.stack([ab, b, bc], axis=1))
            new.append(np.stack([ca, bc, c], axis=1))
            new.append(np.stack([ab, bc, ca], axis=1))
        tris = new
    p = np.concatenate(tris)
    pts = np.einsum("qi,kid->kqd", QUAD7_BARY, p)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    w = areas[:, None] * QUAD7_W[None, :]
    return pts, w


# -- projection --------------------------------------------------------------


def project_bounds(pair: CoefficientPair) -> CoefficientPair:
    """Nodal projection onto the bound box / eigenvalue box. Idempotent."""
    b = pair.bounds
    eta = np.clip(pair.eta.values, b.delta0, b.delta1)
    if pair.sigma_iso is not None:
        s = np.clip(pair.sigma_iso.values, b.lambda0, b.lambda1)
        ent = np.column_stack([s, np.zeros_like(s), s])
    else:
        ent = sym_eigen_clip(pair.sigma_entries(), b.lambda0, b.lambda1)
    return pair.with_nodal(sigma_entries=ent, eta_values=eta)


# -- mollification -----------------------------------------------------------


def _bump(z: np.ndarray) -> np.ndarray:
    """Normalized radial bump on the unit ball; z is (..., 2)."""
    s = z[..., 0] ** 2 + z[..., 1] ** 2
    out = np.zeros(s.shape)
    inside = s < 1.0
    out[inside] = MOLLIFIER_NORM * np.exp(-1.0 / (1.0 - s[inside]))
    return out


def _bump_derivatives(z: np.ndarray):
    """(xi, grad xi, hess xi) on the unit ball."""
    s = z[..., 0] ** 2 + z[..., 1] ** 2
    xi = np.zeros(s.shape)
    grad = np.zeros(z.shape)
    hess = np.zeros(s.shape + (2, 2))
    inside = s < 1.0
    zi = z[inside]
    u = 1.0 / (1.0 - s[inside])
    xi_i = MOLLIFIER_NORM * np.exp(-u)
    xi[inside] = xi_i
    gfac = -2.0 * u**2
    grad[inside] = xi_i[:, None] * gfac[:, None] * zi
    outer = np.einsum("pi,pj->pij", zi, zi)
    eye = np.eye(2)
    hess[inside] = xi_i[:, None, None] * (
        (4.0 * u**4 - 8.0 * u**3)[:, None, None] * outer
        - 2.0 * u[:, None, None]**2 * eye
    )
    return xi, grad, hess


class _MollifierQuadrature:
    """Fixed midpoint grid on the unit ball with corrected weight sets.

    Value weights are nonnegative and sum to one (convexity preserves value
    bounds); derivative weights are corrected to annihilate affine inputs
    exactly, so constants mollify to themselves with zero derivatives.
    """

    def __init__(self, n_side: int = 17):
        half = np.linspace(-1.0, 1.0, n_side + 1)
        mids = 0.5 * (half[:-1] + half[1:])
        cell = (half[1] - half[0]) ** 2
        xx, yy = np.meshgrid(mids, mids, indexing="ij")
        z = np.column_stack([xx.ravel(), yy.ravel()])
        xi, grad, hess = _bump_derivatives(z)
        keep = xi > 1e-300
        z, xi, grad, hess = z[keep], xi[keep], grad[keep], hess[keep]
        self.z = z
        w0 = xi * cell
        self.w0 = w0 / w0.sum()
        w1 = grad * cell
        w1 -= w1.mean(axis=0)
        self._w1_raw = w1
        w2 = np.stack([hess[:, 0, 0], hess[:, 0, 1], hess[:, 1, 1]], axis=1) * cell
        basis = np.column_stack([np.ones(len(z)), z])
        coef, *_ = np.linalg.lstsq(basis, w2, rcond=None)
        self._w2_raw = w2 - basis @ coef

    def scaled(self, delta: float):
        """(offsets y, w0, w1, w2) for mollification radius delta."""
        y = delta * self.z
        w1 = self._w1_raw / delta
        m = -np.einsum("ij,il->jl", w1, y)
        w1 = w1 @ np.linalg.inv(m).T
        w2 = self._w2_raw / (delta * delta)
        return y, self.w0, w1, w2


_MQUAD = _MollifierQuadrature()


class MollifiedField:
    """Smooth approximation of a coefficient pair with derivative access.

    Evaluation convolves the nearest-point extension of each component with
    the fixed bump at radius delta. Values stay inside the source's bound
    box; the reported Hessian bound is MOLLIFIER_GRAD_L1 * Lip / delta.
    """

    def __init__(self, source: CoefficientPair, delta: float):
        if not (0 < delta <= 1):
            raise InvalidParameterError("delta must lie in (0, 1]")
        self.source = source
        self.delta = float(delta)
        self._y, self._w0, self._w1, self._w2 = _MQUAD.scaled(self.delta)
        lip = max(
            [w1inf_seminorm(f) for f in source.sigma_entry_fields()]
            + [w1inf_seminorm(source.eta)]
        )
        self.lip_estimate = lip
        self.d2_bound = MOLLIFIER_GRAD_L1 * lip / self.delta

    # extension: metric projection onto the support, constant along rays
    def _extend_points(self, pts: np.ndarray) -> np.ndarray:
        dom = self.source.domain
        inside = dom.contains(pts)
        if inside.all():
            return pts
        out = pts.copy()
        ext_idx = np.nonzero(~inside)[0]
        epts = pts[ext_idx]
        best_d = np.full(len(epts), np.inf)
        best_p = np.zeros_like(epts)
        for verts in dom.components:
            proj = project_to_polygon(epts, verts)
            d = np.hypot(*(epts - proj).T)
            upd = d < best_d
            best_d[upd] = d[upd]
            best_p[upd] = proj[upd]
        out[ext_idx] = best_p
        return out

    def _component_values(self, pts: np.ndarray) -> np.ndarray:
        """(p, 4) raw component values [s11, s12, s22, eta] with extension."""
        mapped = self._extend_points(np.atleast_2d(pts))
        sig = self.source.eval_sigma_entries(mapped)
        eta = self.source.eval_eta(mapped)
        return np.column_stack([sig, eta])

    def _convolve(self, points: np.ndarray, weights: np.ndarray, chunk: int = 2048):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ncomp = 4
        nw = 1 if weights.ndim == 1 else weights.shape[1]
        out = np.zeros((len(pts), ncomp, nw))
        w = weights.reshape(len(self._y), nw)
        for lo in range(0, len(pts), chunk):
            p = pts[lo : lo + chunk]
            shifted = p[:, None, :] - self._y[None, :, :]
            vals = self._component_values(shifted.reshape(-1, 2)).reshape(
                len(p), len(self._y), ncomp
            )
            out[lo : lo + chunk] = np.einsum("pqc,qw->pcw", vals, w)
        return out

    def values(self, points) -> np.ndarray:
        """(p, 4) mollified [s11, s12, s22, eta]."""
        return self._convolve(points, self._w0)[:, :, 0]

    def eval_eta(self, points) -> np.ndarray:
        return self.values(points)[:, 3]

    def eval_sigma_entries(self, points) -> np.ndarray:
        return self.values(points)[:, :3]

    def gradients(self, points) -> np.ndarray:
        """(p, 4, 2) first derivatives of each component."""
        return self._convolve(points, self._w1)

    def hessians(self, points) -> np.ndarray:
        """(p, 4, 3) second derivatives [dxx, dxy, dyy] of each component."""
        return self._convolve(points, self._w2)


def mollify_extend(pair: CoefficientPair, delta: float) -> MollifiedField:
    """Smooth the pair at radius delta after extending it outside Omega.

    The extension is the metric projection onto each component, which keeps
    values inside the bound box and, for convex components, the Lipschitz
    constant; non-convex components may inflate it by a domain constant.
    """
    return MollifiedField(pair, delta)


def recovery_interpolant(pair: CoefficientPair, h: float, mesh: Triangulation | None = None) -> CoefficientPair:
    """Feasible P1 approximation of the pair on a mesh of size h.

    Mollify at radius sqrt(h), interpolate nodally on the target mesh, then
    project onto the bound box. The same construction serves both the TV and
    the Lipschitz-seminorm regularization modes.
    """
    if not (0 < h <= 1):
        raise InvalidParameterError("h must lie in (0, 1]")
    if mesh is None:
        mesh = build_triangulation(pair.domain, h)
    mf = mollify_extend(pair, math.sqrt(h))
    vals = mf.values(mesh.nodes)
    eta = FemScalarField(mesh, vals[:, 3])
    if pair.sigma_iso is not None:
        sigma = FemScalarField(mesh, vals[:, 0])
    else:
        sigma = SymMatrixField(
            FemScalarField(mesh, vals[:, 0]),
            FemScalarField(mesh, vals[:, 1]),
            FemScalarField(mesh, vals[:, 2]),
        )
    out = CoefficientPair(pair.domain, pair.bounds, sigma, eta)
    return project_bounds(out)


# -- text format --------------------------------------------------------------


def write_field(pair: CoefficientPair, path, mesh_path, trailer: str | None = None) -> None:
    """Mesh reference line, then `a11 a12 a22 eta` per node (17 digits)."""
    ent = pair.sigma_entries()
    with open(path, "w") as fh:
        fh.write(f"mesh {mesh_path}\n")
        for (s11, s12, s22), e in zip(ent, pair.eta.values):
            fh.write(f"{s11:.17g} {s12:.17g} {s22:.17g} {e:.17g}\n")
        if trailer:
            fh.write(f"# {trailer}\n")


def read_field(path, domain: PolyDomain, bounds: Bounds, mesh: Triangulation | None = None):
    from .mesh import read_mesh

    with open(path) as fh:
        head = fh.readline().split()
        mesh_path = head[1]
        if mesh is None:
            mesh = read_mesh(mesh_path)
        rows = []
        for _ in range(mesh.n_nodes):
            rows.append([float(v) for v in fh.readline().split()])
    arr = np.asarray(rows)
    sigma = SymMatrixField(
        FemScalarField(mesh, arr[:, 0]),
        FemScalarField(mesh, arr[:, 1]),
        FemScalarField(mesh, arr[:, 2]),
    )
    eta = FemScalarField(mesh, arr[:, 3])
    return CoefficientPair(domain, bounds, sigma, eta)
