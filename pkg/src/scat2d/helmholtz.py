"""Forward scattering solver: P1 FEM on a truncated disk with a modal DtN map.

The total field solves div(sigma grad u) + k^2 eta u = 0 with u = u^i + u^s
and radiating u^s. We solve for the scattered field: since the incident plane
wave solves the background equation exactly, u^s satisfies

    div(sigma grad u^s) + k^2 eta u^s
        = -div((sigma - I) grad u^i) - k^2 (eta - 1) u^i,

a volume source supported on the contrast. The radiation condition is
replaced by the truncated Dirichlet-to-Neumann operator on the circle
|x| = Re, expressed through Fourier modes with coefficients
k H_n'(k Re)/H_n(k Re). With zero contrast the discrete right-hand side
vanishes identically, so the scattered field is exactly zero.

The assembled system is complex symmetric (not Hermitian); the same sparse
factorization therefore serves forward and adjoint solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from ._kernels.pure import _T as _MASS_T
from .errors import (
    InvalidParameterError,
    MeshResolutionError,
    NumericError,
    SolverFailureError,
)
from .farfield import farfield_prefactor
from .fields import QUAD7_BARY, QUAD7_W, CoefficientPair
from .mesh import Triangulation, boundary_nodes_by_angle, build_disk_triangulation


@dataclass(frozen=True)
class PlaneWave:
    """Incident plane wave exp(i k d.x)."""

    k: float
    d_angle: float

    def __post_init__(self):
        if not (self.k > 0):
            raise InvalidParameterError("wavenumber must be positive")

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.d_angle), math.sin(self.d_angle)])


def incident_field(wave: PlaneWave, x) -> complex | np.ndarray:
    """exp(i k d.x); unit modulus everywhere."""
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    vals = np.exp(1j * wave.k * (pts @ wave.direction))
    return vals if len(vals) > 1 else complex(vals[0])


def incident_gradient(wave: PlaneWave, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    vals = np.exp(1j * wave.k * (pts @ wave.direction))
    return 1j * wave.k * vals[:, None] * wave.direction[None, :]


@dataclass
class ForwardSettings:
    """Discretization parameters for the truncated-disk solver."""

    R0: float
    Re: float | None = None
    dtn_modes: int | None = None
    forward_mesh_h: float = 0.08
    ring_radius: float | None = None
    ring_samples: int | None = None
    fd_spacing: float | None = None
    min_ppw: float = 6.0

    def __post_init__(self):
        if self.Re is None:
            self.Re = self.R0 + 2.0
        if self.Re < self.R0 + 2.0 - 1e-12:
            raise InvalidParameterError("truncation radius must satisfy Re >= R0 + 2")
        if self.ring_radius is None:
            self.ring_radius = self.R0 + 1.0
        if not (self.R0 < self.ring_radius < self.Re):
            raise InvalidParameterError("far-field ring must lie inside (R0, Re)")

    def modes_for(self, k: float) -> int:
        m_min = math.ceil(k * self.Re) + 10
        if self.dtn_modes is None:
            return m_min + 5
        if self.dtn_modes < m_min:
            raise InvalidParameterError(
                f"dtn_modes={self.dtn_modes} below the floor ceil(k*Re)+10={m_min}"
            )
        return self.dtn_modes

    def validate_for(self, k: float, coef_h: float | None = None):
        lam = 2.0 * math.pi / k
        ppw = lam / self.forward_mesh_h
        if ppw < self.min_ppw:
            raise MeshResolutionError(
                f"{ppw:.1f} points per wavelength at k={k}, need >= {self.min_ppw}"
            )
        if self.forward_mesh_h > lam / 10.0 + 1e-12:
            raise MeshResolutionError(
                f"forward mesh h={self.forward_mesh_h} exceeds wavelength/10={lam / 10:.4g}"
            )
        if coef_h is not None and self.forward_mesh_h > coef_h + 1e-12:
            raise MeshResolutionError(
                f"forward mesh h={self.forward_mesh_h} exceeds coefficient mesh h={coef_h:.4g}"
            )


@dataclass
class ComplexNearField:
    """P1 complex field on the solver disk."""

    mesh: Triangulation
    values: np.ndarray
    kind: str = "scattered"
    diagnostics: dict = field(default_factory=dict)

    def evaluate(self, points, fill=0.0) -> np.ndarray:
        idx, bary = self.mesh.locate(points)
        out = np.full(len(bary), fill, dtype=np.complex128)
        inside = idx >= 0
        tri = self.mesh.triangles[idx[inside]]
        out[inside] = np.einsum("pj,pj->p", bary[inside], self.values[tri])
        return out


def dtn_coefficients(k: float, Re: float, M: int) -> np.ndarray:
    """Modal DtN coefficients k H_n'(k Re)/H_n(k Re) for n = -M..M."""
    if not (k > 0 and Re > 0):
        raise InvalidParameterError("k and Re must be positive")
    from scipy.special import h1vp, hankel1

    n = np.arange(0, M + 1)
    t = k * Re
    h = hankel1(n, t)
    hp = h1vp(n, t)
    lam_pos = k * hp / h
    if not np.all(np.isfinite(lam_pos.view(np.float64))):
        raise NumericError(f"DtN coefficients overflowed at k*Re={t}, M={M}")
    lam = np.concatenate([lam_pos[:0:-1], lam_pos])  # symmetric in n
    return lam


class ForwardOperator:
    """Shared discretization for repeated solves against one coefficient mesh.

    Holds the disk mesh, the nodal transfer from the coefficient mesh, the
    boundary mode couplings, and cached far-field extraction operators.
    """

    def __init__(self, coef_mesh: Triangulation | None, settings: ForwardSettings):
        self.settings = settings
        self.mesh = build_disk_triangulation(settings.Re, settings.forward_mesh_h)
        self.coef_mesh = coef_mesh

        bn = boundary_nodes_by_angle(self.mesh)
        theta = np.arctan2(self.mesh.nodes[bn, 1], self.mesh.nodes[bn, 0])
        dth = np.diff(np.unwrap(theta))
        if not np.allclose(dth, dth[0], rtol=1e-8, atol=1e-12):
            raise InvalidParameterError("disk boundary nodes are not angle-uniform")
        self.bnodes = bn
        self.btheta = theta
        self.dtheta = float(dth[0])

        # transfer: P1 evaluation of coefficient fields at forward nodes
        if coef_mesh is not None:
            idx, bary = coef_mesh.locate(self.mesh.nodes)
            inside = idx >= 0
            rows = np.repeat(np.nonzero(inside)[0], 3)
            cols = coef_mesh.triangles[idx[inside]].reshape(-1)
            vals = bary[inside].reshape(-1)
            self.transfer = sp.csr_matrix(
                (vals, (rows, cols)), shape=(self.mesh.n_nodes, coef_mesh.n_nodes)
            )
        else:
            self.transfer = None

        pts = self.mesh.nodes[self.mesh.triangles]
        self.quad_pts = np.einsum("qi,kid->kqd", QUAD7_BARY, pts)
        self.quad_w = self.mesh.areas[:, None] * QUAD7_W[None, :]

        # triangles that can carry contrast under the nodal transfer
        if self.transfer is not None:
            carried = np.asarray((np.abs(self.transfer).sum(axis=1) > 0)).ravel()
            self.support_tris = np.nonzero(carried[self.mesh.triangles].any(axis=1))[0]
        else:
            self.support_tris = np.arange(self.mesh.n_triangles)
        self._ff_cache: dict = {}
        self._bound_cache: dict = {}

    # -- coefficient transfer ------------------------------------------------

    def transfer_pair(self, pair: CoefficientPair):
        """Nodal (n_fwd, 3) sigma entries and (n_fwd,) eta on the disk mesh."""
        n = self.mesh.n_nodes
        sig = np.tile(np.array([1.0, 0.0, 1.0]), (n, 1))
        eta = np.ones(n)
        if pair is not None:
            ent = pair.sigma_entries()
            bg = np.array([1.0, 0.0, 1.0])
            for c in range(3):
                sig[:, c] += self.transfer @ (ent[:, c] - bg[c])
            eta += self.transfer @ (pair.eta.values - 1.0)
        return sig, eta

    # -- assembly --------------------------------------------------------------

    def boundary_coupling(self, k: float) -> tuple[np.ndarray, np.ndarray]:
        """(lambda_n, C) with C[n, j] the n-th Fourier weight of hat j."""
        key = (k, self.settings.modes_for(k))
        if key not in self._bound_cache:
            M = self.settings.modes_for(k)
            lam = dtn_coefficients(k, self.settings.Re, M)
            n = np.arange(-M, M + 1)
            # piecewise-linear hat of half-width dtheta: Fejer-type weights
            x = 0.5 * n * self.dtheta
            sinc2 = np.ones_like(x)
            nz = x != 0
            sinc2[nz] = (np.sin(x[nz]) / x[nz]) ** 2
            C = (
                np.exp(-1j * np.outer(n, self.btheta))
                * (self.dtheta * sinc2 / (2.0 * np.pi))[:, None]
            )
            self._bound_cache[key] = (lam, C)
        return self._bound_cache[key]

    def assemble(self, pair: CoefficientPair, k: float) -> "FactorizedSystem":
        self.settings.validate_for(k, None if pair is None else pair.mesh.mesh_size_h)
        sig_nodal, eta_nodal = self.transfer_pair(pair)
        tris = self.mesh.triangles
        sig_tri = sig_nodal[tris].mean(axis=1)
        eta_tri = eta_nodal[tris]
        rows, cols, stiff, mass = _kernels.assemble_p1(
            tris, self.mesh.areas, self.mesh.grads, sig_tri, eta_tri
        )
        vals = stiff.astype(np.complex128)
        vals -= (k * k) * mass

        lam, C = self.boundary_coupling(k)
        B = (2.0 * np.pi * self.settings.Re) * (np.conj(C).T * lam) @ C
        bi = np.repeat(self.bnodes, len(self.bnodes))
        bj = np.tile(self.bnodes, len(self.bnodes))

        n = self.mesh.n_nodes
        A = sp.coo_matrix(
            (
                np.concatenate([vals, -B.ravel()]),
                (np.concatenate([rows, bi]), np.concatenate([cols, bj])),
            ),
            shape=(n, n),
        ).tocsc()
        try:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SolverFailureError(
                f"factorization failed at k={k} (possible discrete resonance of the truncated problem): {exc}"
            ) from exc
        return FactorizedSystem(self, pair, k, A, lu, sig_nodal, eta_nodal)

    # -- far-field extraction ----------------------------------------------------

    def _ring_rows(self, radius: float, n_s: int) -> sp.csr_matrix:
        theta = 2.0 * np.pi * np.arange(n_s) / n_s
        pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
        idx, bary = self.mesh.locate(pts)
        if np.any(idx < 0):
            raise InvalidParameterError(f"ring radius {radius} leaves the solver disk")
        rows = np.repeat(np.arange(n_s), 3)
        cols = self.mesh.triangles[idx].reshape(-1)
        return sp.csr_matrix((bary.reshape(-1), (rows, cols)), shape=(n_s, self.mesh.n_nodes))

    def far_extractor(self, k: float, out_angles) -> "FarFieldExtractor":
        out_angles = np.atleast_1d(np.asarray(out_angles, dtype=np.float64))
        key = (k, out_angles.tobytes())
        if key not in self._ff_cache:
            st = self.settings
            R = st.ring_radius
            n_s = st.ring_samples or max(256, int(math.ceil(8.0 * k * R)))
            delta = st.fd_spacing or 0.5 * float(np.median(self.mesh.h_K))
            if not (st.R0 < R - delta and R + delta < st.Re):
                raise InvalidParameterError("two-ring stencil leaves the annulus")
            E_val = self._ring_rows(R, n_s)
            E_plus = self._ring_rows(R + delta, n_s)
            E_minus = self._ring_rows(R - delta, n_s)
            theta = 2.0 * np.pi * np.arange(n_s) / n_s
            y = R * np.column_stack([np.cos(theta), np.sin(theta)])
            nu = y / R
            xh = np.column_stack([np.cos(out_angles), np.sin(out_angles)])
            ds = 2.0 * np.pi * R / n_s
            pref = farfield_prefactor(k)
            phase = np.exp(-1j * k * (xh @ y.T))
            G_val = pref * ds * (-1j * k) * (xh @ nu.T) * phase
            G_der = -pref * ds * phase
            self._ff_cache[key] = FarFieldExtractor(
                out_angles, E_val, E_plus, E_minus, delta, G_val, G_der
            )
        return self._ff_cache[key]


@dataclass
class FarFieldExtractor:
    """Linear map from nodal near-field values to far-field samples."""

    out_angles: np.ndarray
    E_val: sp.csr_matrix
    E_plus: sp.csr_matrix
    E_minus: sp.csr_matrix
    delta: float
    G_val: np.ndarray
    G_der: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        w = self.E_val @ u
        dw = (self.E_plus @ u - self.E_minus @ u) / (2.0 * self.delta)
        return self.G_val @ w + self.G_der @ dw

    def adjoint(self, s: np.ndarray) -> np.ndarray:
        """Transpose (not conjugated) applied to far-field coefficients."""
        out = self.E_val.T @ (self.G_val.T @ s)
        t = self.G_der.T @ s / (2.0 * self.delta)
        out += self.E_plus.T @ t
        out -= self.E_minus.T @ t
        return out


@dataclass
class FactorizedSystem:
    """One assembled and factorized system for fixed (pair, k)."""

    op: ForwardOperator
    pair: CoefficientPair | None
    k: float
    A: sp.csc_matrix
    lu: object
    sig_nodal: np.ndarray
    eta_nodal: np.ndarray

    def __post_init__(self):
        self.dsig = self.sig_nodal - np.array([1.0, 0.0, 1.0])
        self.deta = self.eta_nodal - 1.0
        tris = self.op.mesh.triangles[self.op.support_tris]
        active_loc = (np.abs(self.dsig[tris]).max(axis=(1, 2)) > 0) | (
            np.abs(self.deta[tris]).max(axis=1) > 0
        )
        self.active = self.op.support_tris[active_loc]

    def _incident_quad(self, d_angles, ksel):
        """Plane-wave values and gradients at the quadrature points of ksel.

        Returns (ui, gx, gy) shaped (ndir, ntri, 7).
        """
        d_angles = np.atleast_1d(np.asarray(d_angles, dtype=np.float64))
        dirs = np.column_stack([np.cos(d_angles), np.sin(d_angles)])
        q = self.op.quad_pts[ksel]
        ui = np.exp(1j * self.k * np.einsum("dc,kqc->dkq", dirs, q))
        gx = 1j * self.k * dirs[:, 0, None, None] * ui
        gy = 1j * self.k * dirs[:, 1, None, None] * ui
        return ui, gx, gy

    def rhs_many(self, d_angles) -> np.ndarray:
        """Contrast-source load vectors, one column per incident angle."""
        d_angles = np.atleast_1d(np.asarray(d_angles, dtype=np.float64))
        n = self.op.mesh.n_nodes
        b = np.zeros((n, len(d_angles)), dtype=np.complex128)
        if len(self.active) == 0:
            return b
        tris = self.op.mesh.triangles[self.active]
        w = self.op.quad_w[self.active]
        ui, gx, gy = self._incident_quad(d_angles, self.active)
        ds_q = np.einsum("qi,kic->kqc", QUAD7_BARY, self.dsig[tris])
        de_q = np.einsum("qi,ki->kq", QUAD7_BARY, self.deta[tris])
        flux_x = ds_q[None, ..., 0] * gx + ds_q[None, ..., 1] * gy
        flux_y = ds_q[None, ..., 1] * gx + ds_q[None, ..., 2] * gy
        grads = self.op.mesh.grads[self.active]
        k2 = self.k * self.k
        # -(dsig grad u^i). grad phi_i  +  k^2 deta u^i phi_i
        contrib = -np.einsum("kq,dkq,ki->dki", w, flux_x, grads[:, :, 0])
        contrib -= np.einsum("kq,dkq,ki->dki", w, flux_y, grads[:, :, 1])
        contrib += k2 * np.einsum("kq,dkq,qi->dki", w, de_q[None] * ui, QUAD7_BARY)
        flat = tris.reshape(-1)
        for d in range(len(d_angles)):
            np.add.at(b[:, d], flat, contrib[d].reshape(-1))
        return b

    def rhs(self, wave: PlaneWave) -> np.ndarray:
        return self.rhs_many([wave.d_angle])[:, 0]

    def solve_many(self, d_angles) -> np.ndarray:
        """Scattered fields for several incident angles; (ndir, n) array."""
        b = self.rhs_many(d_angles)
        if not np.any(b):
            return np.zeros(b.T.shape, dtype=np.complex128)
        return self.lu.solve(b).T

    def solve(self, wave: PlaneWave, check_residual: bool = True) -> np.ndarray:
        b = self.rhs(wave)
        if not np.any(b):
            return np.zeros_like(b)
        u = self.lu.solve(b)
        if check_residual:
            r = np.linalg.norm(self.A @ u - b) / np.linalg.norm(b)
            if not np.isfinite(r) or r > 1e-8:
                raise SolverFailureError(
                    f"relative residual {r:.2e} at k={self.k} (possible discrete resonance)"
                )
        return u

    def solve_adjoint(self, rhs: np.ndarray) -> np.ndarray:
        """Solve A w = rhs; A is complex symmetric so no transposition is needed."""
        return self.lu.solve(rhs)

    def residual(self, u: np.ndarray, wave: PlaneWave) -> float:
        b = self.rhs(wave)
        nb = np.linalg.norm(b)
        if nb == 0:
            return float(np.linalg.norm(self.A @ u))
        return float(np.linalg.norm(self.A @ u - b) / nb)

    def boundary_flux(self, u: np.ndarray) -> float:
        """Im of the DtN quadratic form, the radiated power up to scale."""
        lam, C = self.op.boundary_coupling(self.k)
        c = C @ u[self.op.bnodes]
        return float(2.0 * np.pi * self.op.settings.Re * np.sum(np.imag(lam) * np.abs(c) ** 2))

    def source_power(self, u: np.ndarray, wave: PlaneWave) -> float:
        """Energy input -Im(u^H b); equals boundary_flux at the solution."""
        b = self.rhs(wave)
        return float(-np.imag(np.vdot(u, b)))

    def gradient_accumulate(self, d_angles, U: np.ndarray, W: np.ndarray):
        """sum_d w_d^T (db/dp - dA/dp u_d) at the forward-mesh nodes.

        U and W hold the forward and adjoint fields row-per-direction.
        Returns (d_sigma (3, n), d_eta (n,)) complex arrays; entries vanish
        off the transfer support, so only support triangles are visited.
        """
        mesh = self.op.mesh
        n = mesh.n_nodes
        out_sig = np.zeros((3, n), dtype=np.complex128)
        out_eta = np.zeros(n, dtype=np.complex128)
        ksel = self.op.support_tris
        if len(ksel) == 0:
            return out_sig, out_eta
        tris = mesh.triangles[ksel]
        flat = tris.reshape(-1)
        grads = mesh.grads[ksel]
        areas = mesh.areas[ksel]
        wq = self.op.quad_w[ksel]
        k2 = self.k * self.k

        W_tri = W[:, tris]  # (ndir, ntri, 3)
        U_tri = U[:, tris]
        gw = np.einsum("kie,dki->dke", grads, W_tri)
        gu = np.einsum("kie,dki->dke", grads, U_tri)

        # load sensitivities (quadrature, incident wave enters explicitly)
        ui, gx, gy = self._incident_quad(d_angles, ksel)
        w_q = np.einsum("qi,dki->dkq", QUAD7_BARY, W_tri)
        m_eta = k2 * np.einsum("kq,dkq,qm->km", wq, ui * w_q, QUAD7_BARY)
        e11 = gx * gw[:, :, None, 0]
        e22 = gy * gw[:, :, None, 1]
        e12 = gy * gw[:, :, None, 0] + gx * gw[:, :, None, 1]
        np.add.at(out_eta, flat, m_eta.reshape(-1))
        for c, e in enumerate((e11, e12, e22)):
            m_sig = -np.einsum("kq,dkq,qm->km", wq, e, QUAD7_BARY)
            np.add.at(out_sig[c], flat, m_sig.reshape(-1))

        # system sensitivities: stiffness (triangle-mean tensor) and P1 mass
        third = areas / 3.0
        s11 = (gw[..., 0] * gu[..., 0]).sum(axis=0) * third
        s22 = (gw[..., 1] * gu[..., 1]).sum(axis=0) * third
        s12 = (gw[..., 0] * gu[..., 1] + gw[..., 1] * gu[..., 0]).sum(axis=0) * third
        for c, e in enumerate((s11, s12, s22)):
            np.add.at(out_sig[c], flat, -np.repeat(e, 3))
        mass = np.einsum("ijm,dki,dkj->km", _MASS_T, W_tri, U_tri) * areas[:, None]
        np.add.at(out_eta, flat, (k2 * mass).reshape(-1))
        return out_sig, out_eta


@dataclass
class ForwardSolution:
    total: ComplexNearField
    scattered: ComplexNearField
    diagnostics: dict

    def __iter__(self):
        yield self.total
        yield self.scattered


def solve_scattering(
    pair: CoefficientPair, wave: PlaneWave, settings: ForwardSettings
) -> ForwardSolution:
    """Solve the direct problem once; total = incident + scattered nodewise."""
    if pair is not None and not pair.is_feasible():
        raise InvalidParameterError("coefficient pair violates its bounds")
    op = ForwardOperator(None if pair is None else pair.mesh, settings)
    return solve_on_operator(op, pair, wave)


def solve_on_operator(op: ForwardOperator, pair, wave: PlaneWave) -> ForwardSolution:
    sys_ = op.assemble(pair, wave.k)
    us = sys_.solve(wave)
    ui = incident_field(wave, op.mesh.nodes)
    lam = 2.0 * math.pi / wave.k
    diagnostics = {
        "k": wave.k,
        "d_angle": wave.d_angle,
        "residual": sys_.residual(us, wave),
        "dtn_modes": op.settings.modes_for(wave.k),
        "points_per_wavelength": lam / op.settings.forward_mesh_h,
        "n_nodes": op.mesh.n_nodes,
        "n_triangles": op.mesh.n_triangles,
    }
    scattered = ComplexNearField(op.mesh, us, "scattered", diagnostics)
    total = ComplexNearField(op.mesh, us + ui, "total", diagnostics)
    return ForwardSolution(total, scattered, diagnostics)


def ring_trace(
    field: ComplexNearField,
    R: float,
    n_samples: int,
    fd_spacing: float | None = None,
    r_min: float = 0.0,
):
    """Uniform (theta, value, normal derivative) samples on the circle radius R.

    The normal derivative uses a symmetric two-ring difference with the given
    spacing (default: half the median element size). Deterministic.
    """
    mesh = field.mesh
    r_max = float(np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1]).max())
    delta = fd_spacing or 0.5 * float(np.median(mesh.h_K))
    if not (r_min < R - delta and R + delta < r_max):
        raise InvalidParameterError(
            f"ring radius {R} (spacing {delta:.3g}) outside the annulus ({r_min}, {r_max})"
        )
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    cs = np.column_stack([np.cos(theta), np.sin(theta)])
    vals = field.evaluate(R * cs)
    vp = field.evaluate((R + delta) * cs)
    vm = field.evaluate((R - delta) * cs)
    return theta, vals, (vp - vm) / (2.0 * delta)


def near_field_file(field: ComplexNearField, path, mesh_path, trailer: str | None = None):
    with open(path, "w") as fh:
        fh.write(f"mesh {mesh_path}\n")
        for v in field.values:
            fh.write(f"{v.real:.17g} {v.imag:.17g}\n")
        if trailer:
            fh.write(f"# {trailer}\n")
