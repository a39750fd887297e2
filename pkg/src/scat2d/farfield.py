"""Hankel functions, the 2D fundamental solution, and far-field extraction.

A radiating solution w of the Helmholtz equation outside a ball can be
represented from its Cauchy data (value and normal derivative) on any circle
of radius R enclosing the scatterer:

    w(x)      = |int| ( w dPhi/dnu - dw/dnu Phi ) ds        (exterior field)
    w_inf(xh) = pref(k) |int| ( w d/dnu e^{-ik xh.y} - dw/dnu e^{-ik xh.y} ) ds

with Phi_k(x, y) = (i/4) H_0^(1)(k|x-y|) and, in two dimensions,
pref(k) = e^{i pi/4} / sqrt(8 pi k). The circle integrals are evaluated with
the periodic trapezoid rule, which is spectrally accurate here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import h1vp, hankel1

from .errors import InvalidParameterError, MeshResolutionError, NumericError


def hankel_h1(order: int, t) -> complex | np.ndarray:
    """First-kind Hankel function H_order^(1)(t) for t > 0."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0):
        raise InvalidParameterError("hankel_h1 requires t > 0")
    out = hankel1(order, t_arr)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise NumericError(f"Hankel evaluation overflowed at order {order}")
    return out if out.shape else complex(out)


def hankel_h1_derivative(order: int, t) -> complex | np.ndarray:
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0):
        raise InvalidParameterError("hankel_h1_derivative requires t > 0")
    out = h1vp(order, t_arr)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise NumericError(f"Hankel derivative overflowed at order {order}")
    return out if out.shape else complex(out)


def fundamental_solution(k: float, x, y) -> complex | np.ndarray:
    """Phi_k(x, y) = (i/4) H_0^(1)(k |x - y|); singular at x = y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = np.hypot(*(np.atleast_2d(x) - np.atleast_2d(y)).T)
    if np.any(r <= 0):
        raise InvalidParameterError("fundamental_solution is singular at x = y")
    val = 0.25j * hankel1(0, k * r)
    return val if val.shape != (1,) else complex(val[0])


def farfield_prefactor(k: float) -> complex:
    """e^{i pi/4} / sqrt(8 pi k), the 2D far-field normalization."""
    return np.exp(1j * np.pi / 4.0) / np.sqrt(8.0 * np.pi * k)


@dataclass
class RingData:
    """Uniform samples of a radiating field on the circle of radius R."""

    k: float
    R: float
    theta: np.ndarray
    values: np.ndarray
    normal_derivative: np.ndarray

    def __post_init__(self):
        n = len(self.theta)
        if not (len(self.values) == len(self.normal_derivative) == n):
            raise InvalidParameterError("ring arrays must share one length")
        d = np.diff(self.theta)
        if n > 2 and not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
            raise InvalidParameterError("ring samples must be uniform in angle")

    @property
    def n_samples(self) -> int:
        return len(self.theta)

    def points(self) -> np.ndarray:
        return self.R * np.column_stack([np.cos(self.theta), np.sin(self.theta)])

    @classmethod
    def from_callables(cls, k: float, R: float, n: int, value_fn, normal_derivative_fn):
        theta = 2.0 * np.pi * np.arange(n) / n
        pts = R * np.column_stack([np.cos(theta), np.sin(theta)])
        return cls(k, R, theta, np.asarray(value_fn(pts)), np.asarray(normal_derivative_fn(pts)))


@dataclass
class FarFieldSamples:
    k: float
    d_angle: float
    angles: np.ndarray
    values: np.ndarray


def _check_resolution(ring: RingData):
    need = 8.0 * ring.k * ring.R
    if ring.n_samples < need:
        raise MeshResolutionError(
            f"ring has {ring.n_samples} samples, need >= {need:.0f} at k*R = {ring.k * ring.R:.2f}"
        )


def far_field_from_ring(ring: RingData, out_angles, d_angle: float = np.nan) -> FarFieldSamples:
    """Far-field pattern at the given outgoing angles from ring Cauchy data."""
    _check_resolution(ring)
    out_angles = np.atleast_1d(np.asarray(out_angles, dtype=np.float64))
    xh = np.column_stack([np.cos(out_angles), np.sin(out_angles)])
    y = ring.points()
    nu = y / ring.R
    ds = 2.0 * np.pi * ring.R / ring.n_samples
    phase = np.exp(-1j * ring.k * (xh @ y.T))  # (n_out, n_ring)
    dphase = -1j * ring.k * (xh @ nu.T) * phase
    integral = ds * (dphase @ ring.values - phase @ ring.normal_derivative)
    return FarFieldSamples(ring.k, d_angle, out_angles, farfield_prefactor(ring.k) * integral)


def green_exterior(ring: RingData, x) -> complex | np.ndarray:
    """Field value outside the ring reconstructed from its Cauchy data."""
    _check_resolution(ring)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if np.any(np.hypot(x[:, 0], x[:, 1]) <= ring.R):
        raise InvalidParameterError("green_exterior needs |x| > ring radius")
    y = ring.points()
    nu = y / ring.R
    ds = 2.0 * np.pi * ring.R / ring.n_samples
    diff = x[:, None, :] - y[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    k = ring.k
    phi = 0.25j * hankel1(0, k * r)
    # dPhi/dnu(y) = -(ik/4) H_1(kr) (y - x).nu / r
    dphi = -0.25j * k * hankel1(1, k * r) * np.einsum("pqd,qd->pq", -diff, nu) / r
    vals = ds * (dphi @ ring.values - phi @ ring.normal_derivative)
    return vals if len(vals) > 1 else complex(vals[0])
