"""Built-in oracle suite: fast self-checks against independent references.

Each check returns a CheckResult; `run_all` powers the CLI `verify` command.
The acceptance test suite runs the same physics at tighter budgets.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .farfield import farfield_prefactor
from .fields import Bounds, background_pair, quad_points
from .helmholtz import ForwardOperator, ForwardSettings, PlaneWave
from .inversion import FunctionalConfig, InverseProblem
from .measurements import Schedule, plan, synthesize
from .mesh import PolyDomain, build_triangulation, interpolate
from .phantoms import make_phantom


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<22} value={self.value:.3e}  tol={self.tolerance:.1e}  ({self.seconds:.1f}s)"


def _timed(fn):
    t0 = time.time()
    value, tol = fn()
    return value, tol, time.time() - t0


DOMAIN = PolyDomain.square(0.5, bounding_radius=0.75)
BOUNDS = Bounds(0.5, 2.0, 0.5, 2.0)


def check_zero_contrast(settings: ForwardSettings | None = None) -> CheckResult:
    """Background coefficients must scatter nothing, exactly."""

    def body():
        st = settings or ForwardSettings(R0=0.75, forward_mesh_h=2.0 * np.pi / 2.0 / 6.5)
        pair = make_phantom("background", DOMAIN, BOUNDS, mesh_h=0.5)
        op = ForwardOperator(pair.mesh, st)
        sysk = op.assemble(pair, 2.0)
        u = sysk.solve(PlaneWave(2.0, 0.3))
        ff = op.far_extractor(2.0, np.linspace(0, 2 * np.pi, 8, endpoint=False)).apply(u)
        return float(np.abs(ff).max()), 1e-10

    value, tol, dt = _timed(body)
    return CheckResult("zero_contrast", value <= tol, value, tol, dt)


def check_born(settings: ForwardSettings | None = None, q: float = 0.01) -> CheckResult:
    """Weak contrast: far field approaches the linearized volume integral."""

    def body():
        st = settings or ForwardSettings(R0=0.75, forward_mesh_h=0.065)
        pair = make_phantom("bump", DOMAIN, BOUNDS, mesh_h=0.065, amp=q, width=0.35, center=(0.0, 0.0))
        op = ForwardOperator(pair.mesh, st)
        out_angles = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        worst = 0.0
        pts, w = quad_points(pair.mesh)
        flat, wf = pts.reshape(-1, 2), w.reshape(-1)
        contrast = pair.eval_eta(flat) - 1.0
        xh = np.column_stack([np.cos(out_angles), np.sin(out_angles)])
        for k in (1.0, 2.0):
            wave = PlaneWave(k, 0.3)
            u = op.assemble(pair, k).solve(wave)
            ff = op.far_extractor(k, out_angles).apply(u)
            phases = np.exp(1j * k * (flat @ wave.direction)[None, :] - 1j * k * (xh @ flat.T))
            born = k * k * farfield_prefactor(k) * (phases @ (wf * contrast))
            worst = max(worst, float(np.abs(ff - born).max() / np.abs(born).max()))
        return worst, 0.05

    value, tol, dt = _timed(body)
    return CheckResult("born_regime", value <= tol, value, tol, dt)


def check_reciprocity(settings: ForwardSettings | None = None, n_dirs: int = 8) -> CheckResult:
    """u_inf(d; xh) = u_inf(-xh; -d) on a non-symmetric phantom."""

    def body():
        st = settings or ForwardSettings(R0=0.75, forward_mesh_h=0.08)
        pair = make_phantom("two_bumps", DOMAIN, BOUNDS, mesh_h=0.08, sigma_mode="full")
        op = ForwardOperator(pair.mesh, st)
        k = 2.0
        sysk = op.assemble(pair, k)
        d_ang = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
        x_ang = d_ang + np.pi / 7.0
        fwd = np.zeros((n_dirs, n_dirs), dtype=np.complex128)
        rev = np.zeros((n_dirs, n_dirs), dtype=np.complex128)
        ext_x = op.far_extractor(k, x_ang)
        ext_md = op.far_extractor(k, d_ang + np.pi)
        U = sysk.solve_many(d_ang)
        fwd[:, :] = ext_x.apply(U.T).T
        V = sysk.solve_many(x_ang + np.pi)
        rev[:, :] = ext_md.apply(V.T)
        return float(np.abs(fwd - rev).max() / np.abs(fwd).max()), 1e-2

    value, tol, dt = _timed(body)
    return CheckResult("reciprocity", value <= tol, value, tol, dt)


def interpolation_rates(hs=(0.2, 0.1, 0.05, 0.025), q: float = 4.0):
    """(value slope, gradient slope) of P1 interpolation error in L^q."""
    dom = PolyDomain.rectangle(0.0, 0.0, 1.0, 1.0)
    f = lambda x, y: np.sin(2.0 * x) * np.cos(y)
    fx = lambda x, y: 2.0 * np.cos(2.0 * x) * np.cos(y)
    fy = lambda x, y: -np.sin(2.0 * x) * np.sin(y)
    errs, gerrs = [], []
    for h in hs:
        mesh = build_triangulation(dom, h)
        u = interpolate(lambda pts: f(pts[:, 0], pts[:, 1]), mesh)
        pts, w = quad_points(mesh)
        flat, wf = pts.reshape(-1, 2), w.reshape(-1)
        diff = np.abs(u.evaluate(flat) - f(flat[:, 0], flat[:, 1]))
        errs.append((wf @ diff**q) ** (1.0 / q))
        g = u.triangle_gradients()
        gq = np.repeat(g, 7, axis=0)
        gdiff = np.hypot(gq[:, 0] - fx(flat[:, 0], flat[:, 1]), gq[:, 1] - fy(flat[:, 0], flat[:, 1]))
        gerrs.append((wf @ gdiff**q) ** (1.0 / q))
    lh = np.log(np.asarray(hs))
    s_val = float(np.polyfit(lh, np.log(errs), 1)[0])
    s_grad = float(np.polyfit(lh, np.log(gerrs), 1)[0])
    return s_val, s_grad


def check_rates() -> CheckResult:
    def body():
        s_val, s_grad = interpolation_rates()
        off = max(abs(s_val - 2.0), abs(s_grad - 1.0))
        return off, 0.3

    value, tol, dt = _timed(body)
    return CheckResult("interp_rates", value <= tol, value, tol, dt)


def gradient_check(
    n_dirs: int = 10,
    coef_h: float = 0.18,
    seed: int = 5,
    settings: ForwardSettings | None = None,
    fd_step: float = 1e-5,
) -> float:
    """Max relative mismatch between adjoint gradient and central differences."""
    rng = np.random.default_rng(seed)
    st = settings or ForwardSettings(R0=0.75, forward_mesh_h=0.12)
    sched = Schedule(0.1, 1.0, 0.4, 0.5)
    truth = make_phantom("bump", DOMAIN, BOUNDS, mesh_h=0.12, amp=0.6, width=0.35)
    p = plan(0.25, sched, 1)
    ms = synthesize(truth, p, st, [2.0], seed=seed, noise_fraction=0.3)
    coef_mesh = build_triangulation(DOMAIN, coef_h)
    cfg = FunctionalConfig(a_tilde=0.1, gamma=1.0, tv_tau=1e-3, sigma_mode="isotropic")
    prob = InverseProblem(ms, coef_mesh, st, cfg)
    eta0 = 1.2 + 0.1 * np.sin(3.0 * coef_mesh.nodes[:, 0])
    sig0 = 1.1 + 0.1 * np.cos(2.0 * coef_mesh.nodes[:, 1])
    base = background_pair(DOMAIN, BOUNDS, coef_mesh).with_nodal(
        sigma_entries=np.column_stack([sig0, 0 * sig0, sig0]), eta_values=eta0
    )
    g_sig, g_eta, _ = prob.gradient(base, 1e-3)
    worst = 0.0
    for _ in range(n_dirs):
        d_sig = rng.standard_normal(coef_mesh.n_nodes)
        d_eta = rng.standard_normal(coef_mesh.n_nodes)
        t = fd_step
        ent_p = np.column_stack([sig0 + t * d_sig, 0 * sig0, sig0 + t * d_sig])
        ent_m = np.column_stack([sig0 - t * d_sig, 0 * sig0, sig0 - t * d_sig])
        fp, *_ = prob.functional(base.with_nodal(ent_p, eta0 + t * d_eta), 1e-3)
        fm, *_ = prob.functional(base.with_nodal(ent_m, eta0 - t * d_eta), 1e-3)
        fd = (fp - fm) / (2.0 * t)
        an = float(g_sig[:, 0] @ d_sig + g_eta @ d_eta)
        worst = max(worst, abs(fd - an) / abs(fd))
    return worst


def check_gradient() -> CheckResult:
    def body():
        return gradient_check(n_dirs=4), 1e-4

    value, tol, dt = _timed(body)
    return CheckResult("adjoint_gradient", value <= tol, value, tol, dt)


def check_radius_independence(settings: ForwardSettings | None = None) -> CheckResult:
    """Solutions with truncation radii Re and Re+0.5 agree on the inner ball."""

    def body():
        pair = make_phantom("bump", DOMAIN, BOUNDS, mesh_h=0.08, amp=0.6, width=0.35)
        k = 2.0
        wave = PlaneWave(k, 0.5)
        vals = []
        for re_extra in (0.0, 0.5):
            st = ForwardSettings(R0=0.75, Re=2.75 + re_extra, forward_mesh_h=0.08)
            op = ForwardOperator(pair.mesh, st)
            u = op.assemble(pair, k).solve(wave)
            field = np.column_stack([u.real, u.imag])
            rng = np.random.default_rng(0)
            r = 1.75 * np.sqrt(rng.uniform(size=400))
            t = rng.uniform(0, 2 * np.pi, 400)
            pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
            idx, bary = op.mesh.locate(pts)
            tri = op.mesh.triangles[idx]
            vals.append(np.einsum("pj,pj->p", bary, u[tri]))
        denom = float(np.abs(vals[0]).max())
        return float(np.abs(vals[0] - vals[1]).max() / denom), 1e-3

    value, tol, dt = _timed(body)
    return CheckResult("radius_independence", value <= tol, value, tol, dt)


def run_all() -> list[CheckResult]:
    return [
        check_zero_contrast(),
        check_born(),
        check_reciprocity(),
        check_rates(),
        check_gradient(),
        check_radius_independence(),
    ]
