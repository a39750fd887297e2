"""Named synthetic coefficient pairs used by the CLI and the test harness."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError
from .fields import Bounds, CoefficientPair, FemScalarField, SymMatrixField, project_bounds
from .mesh import PolyDomain, Triangulation, build_triangulation


def bump(r: np.ndarray) -> np.ndarray:
    """Smooth compactly supported profile exp(1 - 1/(1 - r^2)) on r < 1."""
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _radial(pts: np.ndarray, center, width: float) -> np.ndarray:
    c = np.asarray(center, dtype=np.float64)
    return np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) / width


def make_phantom(
    name: str,
    domain: PolyDomain,
    bounds: Bounds,
    mesh_h: float = 0.025,
    mesh: Triangulation | None = None,
    sigma_mode: str = "isotropic",
    **params,
) -> CoefficientPair:
    if mesh is None:
        mesh = build_triangulation(domain, mesh_h)
    pts = mesh.nodes
    ones = np.ones(mesh.n_nodes)
    zeros = np.zeros(mesh.n_nodes)

    eta = ones.copy()
    sig_iso = ones.copy()
    sig_entries = None

    if name == "background":
        pass
    elif name == "bump":
        amp = params.get("amp", 0.8)
        width = params.get("width", 0.35)
        center = params.get("center", (0.1, -0.05))
        eta = 1.0 + amp * bump(_radial(pts, center, width))
    elif name == "sigma_bump":
        amp = params.get("amp", 0.5)
        width = params.get("width", 0.35)
        center = params.get("center", (0.0, 0.0))
        sig_iso = 1.0 + amp * bump(_radial(pts, center, width))
    elif name == "two_bumps":
        # intentionally non-symmetric: unequal bumps plus an anisotropic patch
        b1 = bump(_radial(pts, params.get("c1", (0.2, 0.1)), params.get("w1", 0.25)))
        b2 = bump(_radial(pts, params.get("c2", (-0.25, -0.15)), params.get("w2", 0.2)))
        eta = 1.0 + params.get("a1", 0.7) * b1 + params.get("a2", -0.35) * b2
        if sigma_mode == "full":
            b3 = bump(_radial(pts, params.get("c3", (-0.05, 0.22)), params.get("w3", 0.3)))
            q = params.get("aniso", 0.3)
            sig_entries = np.column_stack(
                [1.0 + q * b3, 0.5 * q * b3, 1.0 - 0.5 * q * b3]
            )
    else:
        raise InvalidParameterError(f"unknown phantom {name!r}")

    eta_f = FemScalarField(mesh, eta)
    if sigma_mode == "isotropic":
        sigma = FemScalarField(mesh, sig_iso)
    else:
        if sig_entries is None:
            sig_entries = np.column_stack([sig_iso, zeros, sig_iso])
        sigma = SymMatrixField(
            FemScalarField(mesh, sig_entries[:, 0]),
            FemScalarField(mesh, sig_entries[:, 1]),
            FemScalarField(mesh, sig_entries[:, 2]),
        )
    pair = CoefficientPair(domain, bounds, sigma, eta_f)
    return project_bounds(pair)
