"""Regularized reconstruction of coefficient pairs from far-field data.

The discrete functional at noise level eps is

    F(pair) = sum_triples |u_inf(pair; k, d; xh) - measured|^2 / eps^gamma
              + a_tilde * R(pair),

minimized over feasible P1 pairs by projected gradient descent with Armijo
backtracking. The data-misfit gradient comes from discrete adjoint solves
(the system matrix is complex symmetric, so the forward factorization is
reused); the TV term is smoothed with parameter tau inside the optimizer
while all reported regularizer values use tau = 0.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .fields import (
    Bounds,
    CoefficientPair,
    FemScalarField,
    background_pair,
    matrix_tv,
    project_bounds,
    recovery_interpolant,
    regularizer_R,
    tv_seminorm,
    x_distance,
)
from .helmholtz import ForwardOperator, ForwardSettings, PlaneWave
from .measurements import EpsilonPlan, MeasurementSet, Schedule, plan, synthesize
from .mesh import PolyDomain, Triangulation, build_triangulation


@dataclass
class FunctionalConfig:
    a_tilde: float
    gamma: float
    tv_tau: float | None = None
    sigma_mode: str = "isotropic"
    regularizer_mode: str = "tv"
    freeze_sigma: bool = False
    max_iters: int = 120
    f_rel_tol: float = 1e-6
    stall_window: int = 5
    armijo_c: float = 1e-4
    init_step: float = 1.0

    def tau_for(self, pair: CoefficientPair) -> float:
        if self.tv_tau is not None:
            return self.tv_tau
        b = pair.bounds
        pts = np.concatenate(pair.domain.components)
        diam = float(
            np.hypot(
                pts[:, 0].max() - pts[:, 0].min(), pts[:, 1].max() - pts[:, 1].min()
            )
        )
        height = max(b.delta1 - b.delta0, b.lambda1 - b.lambda0)
        return 1e-3 * height / diam


INFEASIBLE = float("inf")


def _tv_tau_gradient(f: FemScalarField, tau: float) -> np.ndarray:
    """Nodal gradient of sum_K area*sqrt(|grad f|^2 + tau^2)."""
    mesh = f.mesh
    g = f.triangle_gradients()
    denom = np.sqrt(g[:, 0] ** 2 + g[:, 1] ** 2 + tau**2)
    coef = mesh.areas / denom
    contrib = np.einsum("k,kid,kd->ki", coef, mesh.grads, g)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.triangles.reshape(-1), contrib.reshape(-1))
    return out


def _regularizer_tau(pair: CoefficientPair, tau: float) -> float:
    return matrix_tv(pair, None, tau) + tv_seminorm(pair.eta, None, tau)


def _regularizer_tau_gradient(pair: CoefficientPair, tau: float):
    """(d/d sigma entries (n,3) or iso (n,1), d/d eta (n,)) of the smoothed R."""
    g_eta = _tv_tau_gradient(pair.eta, tau)
    if pair.sigma_iso is not None:
        # R_sigma = sqrt(2) * TV_tau(s)
        gs = math.sqrt(2.0) * _tv_tau_gradient(pair.sigma_iso, tau)
        return gs[:, None], g_eta
    t11 = tv_seminorm(pair.sigma_full.a11, None, tau)
    t12 = tv_seminorm(pair.sigma_full.a12, None, tau)
    t22 = tv_seminorm(pair.sigma_full.a22, None, tau)
    norm = math.sqrt(t11**2 + 2.0 * t12**2 + t22**2)
    norm = max(norm, 1e-300)
    g = np.column_stack(
        [
            (t11 / norm) * _tv_tau_gradient(pair.sigma_full.a11, tau),
            (2.0 * t12 / norm) * _tv_tau_gradient(pair.sigma_full.a12, tau),
            (t22 / norm) * _tv_tau_gradient(pair.sigma_full.a22, tau),
        ]
    )
    return g, g_eta


class InverseProblem:
    """Bundles one measurement set with the forward machinery for a mesh."""

    def __init__(
        self,
        ms: MeasurementSet,
        coef_mesh: Triangulation,
        settings: ForwardSettings,
        cfg: FunctionalConfig,
    ):
        self.ms = ms
        self.cfg = cfg
        self.settings = settings
        self.op = ForwardOperator(coef_mesh, settings)
        self.coef_mesh = coef_mesh

    # -- forward sweep ---------------------------------------------------

    def solve_all(self, pair: CoefficientPair):
        """Solve every (k, d) once; returns per-k systems, fields, far fields."""
        out = {}
        for iw, k in enumerate(self.ms.wavenumbers):
            k = float(k)
            sysk = self.op.assemble(pair, k)
            ext = self.op.far_extractor(k, self.ms.outgoing.angles)
            U = sysk.solve_many(self.ms.incident.angles)
            F = ext.apply(U.T).T  # (ndir, n_out)
            out[iw] = (sysk, ext, U, F)
        return out

    def misfit_from(self, solves) -> float:
        total = 0.0
        for iw, (_, _, _, F) in solves.items():
            total += float(np.sum(np.abs(F - self.ms.values[iw]) ** 2))
        return total

    def misfit(self, pair: CoefficientPair) -> float:
        return self.misfit_from(self.solve_all(pair))

    # -- functional --------------------------------------------------------

    def functional(self, pair: CoefficientPair, tau: float | None = None, solves=None):
        """(F, misfit, R_tau); returns +inf sentinel for infeasible pairs."""
        if not pair.is_feasible():
            return INFEASIBLE, INFEASIBLE, INFEASIBLE, None
        tau = self.cfg.tau_for(pair) if tau is None else tau
        solves = solves or self.solve_all(pair)
        mis = self.misfit_from(solves)
        r = _regularizer_tau(pair, tau) if tau > 0 else regularizer_R(
            pair, self.cfg.regularizer_mode, check_bounds=False
        )
        f = mis / self.ms.eps**self.cfg.gamma + self.cfg.a_tilde * r
        return f, mis, r, solves

    # -- gradient ----------------------------------------------------------

    def gradient(self, pair: CoefficientPair, tau: float | None = None, solves=None):
        """Exact gradient of the discrete smoothed functional.

        Returns (g_sigma, g_eta, solves) with g_sigma shaped (n, 1) in
        isotropic mode and (n, 3) for full tensors.
        """
        tau = self.cfg.tau_for(pair) if tau is None else tau
        if tau <= 0:
            raise InvalidParameterError("gradient needs tv_tau > 0")
        if self.cfg.regularizer_mode != "tv":
            raise InvalidParameterError("gradient descent supports the tv regularizer only")
        solves = solves or self.solve_all(pair)
        g_sig_fwd = np.zeros((3, self.op.mesh.n_nodes))
        g_eta_fwd = np.zeros(self.op.mesh.n_nodes)
        for iw, (sysk, ext, U, F) in solves.items():
            resid = F - self.ms.values[iw]
            s = np.conj(resid).T  # (n_out, ndir)
            W = sysk.solve_adjoint(ext.adjoint(s)).T  # (ndir, n)
            d_sig, d_eta = sysk.gradient_accumulate(self.ms.incident.angles, U, W)
            g_sig_fwd += 2.0 * np.real(d_sig)
            g_eta_fwd += 2.0 * np.real(d_eta)

        scale = 1.0 / self.ms.eps**self.cfg.gamma
        P_T = self.op.transfer.T
        g_eta = scale * (P_T @ g_eta_fwd)
        if pair.sigma_iso is not None:
            g_sig = scale * (P_T @ (g_sig_fwd[0] + g_sig_fwd[2]))[:, None]
        else:
            g_sig = scale * np.column_stack([P_T @ g_sig_fwd[c] for c in range(3)])

        r_sig, r_eta = _regularizer_tau_gradient(pair, tau)
        g_sig += self.cfg.a_tilde * r_sig
        g_eta += self.cfg.a_tilde * r_eta
        if self.cfg.freeze_sigma:
            g_sig = np.zeros_like(g_sig)
        return g_sig, g_eta, solves


# -- public operations ---------------------------------------------------------


def misfit(
    pair: CoefficientPair, ms: MeasurementSet, settings: ForwardSettings, cfg=None
) -> float:
    """Counting-measure data misfit sum_triples |u_inf - measured|^2."""
    cfg = cfg or FunctionalConfig(a_tilde=1.0, gamma=1.0)
    return InverseProblem(ms, pair.mesh, settings, cfg).misfit(pair)


def functional_value(
    pair: CoefficientPair,
    ms: MeasurementSet,
    settings: ForwardSettings,
    cfg: FunctionalConfig,
):
    """(F, misfit, R) with the reported R at tau = 0; +inf for infeasible pairs."""
    if not pair.is_feasible():
        return INFEASIBLE, INFEASIBLE, INFEASIBLE
    prob = InverseProblem(ms, pair.mesh, settings, cfg)
    f, mis, _, _ = prob.functional(pair, tau=0.0)
    r0 = regularizer_R(pair, cfg.regularizer_mode, check_bounds=False)
    return mis / ms.eps**cfg.gamma + cfg.a_tilde * r0, mis, r0


def gradient(
    pair: CoefficientPair,
    ms: MeasurementSet,
    settings: ForwardSettings,
    cfg: FunctionalConfig,
):
    """Adjoint gradient (g_sigma, g_eta) of the smoothed functional."""
    prob = InverseProblem(ms, pair.mesh, settings, cfg)
    g_sig, g_eta, _ = prob.gradient(pair)
    return g_sig, g_eta


@dataclass
class ReconstructionResult:
    pair: CoefficientPair
    F_value: float
    misfit: float
    R_value: float
    iterations: int
    stationarity: float
    converged: bool
    wall_seconds: float
    x_dist_to_truth: float = float("nan")
    history: list = field(default_factory=list)


class _Dofs:
    """Flat view of the optimization variables with bound projection."""

    def __init__(self, pair: CoefficientPair, freeze_sigma: bool):
        self.template = pair
        self.freeze = freeze_sigma
        self.n = pair.mesh.n_nodes
        self.iso = pair.sigma_iso is not None

    def pack(self, pair: CoefficientPair) -> np.ndarray:
        ent = pair.sigma_entries()
        sig = ent[:, [0]] if self.iso else ent
        return np.concatenate([sig.reshape(-1), pair.eta.values])

    def unpack(self, x: np.ndarray) -> CoefficientPair:
        ncol = 1 if self.iso else 3
        sig = x[: self.n * ncol].reshape(self.n, ncol)
        eta = x[self.n * ncol :]
        if self.iso:
            ent = np.column_stack([sig[:, 0], np.zeros(self.n), sig[:, 0]])
        else:
            ent = sig
        return self.template.with_nodal(sigma_entries=ent, eta_values=eta)

    def pack_grad(self, g_sig: np.ndarray, g_eta: np.ndarray) -> np.ndarray:
        return np.concatenate([g_sig.reshape(-1), g_eta])

    def project(self, x: np.ndarray) -> np.ndarray:
        pair = project_bounds(self.unpack(x))
        out = self.pack(pair)
        if self.freeze:
            ref = self.pack(self.template)
            ncol = 1 if self.iso else 3
            out[: self.n * ncol] = ref[: self.n * ncol]
        return out


def minimize(
    ms: MeasurementSet,
    settings: ForwardSettings,
    cfg: FunctionalConfig,
    init: CoefficientPair,
    truth: CoefficientPair | None = None,
) -> ReconstructionResult:
    """Projected gradient descent with backtracking; F never increases."""
    t_start = time.time()
    prob = InverseProblem(ms, init.mesh, settings, cfg)
    tau = cfg.tau_for(init)
    dofs = _Dofs(init, cfg.freeze_sigma)
    x = dofs.project(dofs.pack(init))
    pair = dofs.unpack(x)
    f_cur, mis_cur, _, solves = prob.functional(pair, tau)
    history = [f_cur]
    step = cfg.init_step
    stationarity = float("nan")
    converged = False
    it = 0
    flat_count = 0
    x_prev = None
    g_prev = None
    for it in range(1, cfg.max_iters + 1):
        g_sig, g_eta, solves = prob.gradient(pair, tau, solves)
        g = dofs.pack_grad(g_sig, g_eta)
        stationarity = float(np.linalg.norm(x - dofs.project(x - g)))
        if stationarity <= 1e-12:
            converged = True
            break

        # Barzilai-Borwein trial step, safeguarded by the backtracking below
        if x_prev is not None:
            dx = x - x_prev
            dg = g - g_prev
            denom = float(dx @ dg)
            if denom > 1e-300:
                step = min(max(float(dx @ dx) / denom, 1e-8), 1e6)
        x_prev, g_prev = x.copy(), g.copy()

        accepted = False
        t = step
        for _ in range(40):
            x_new = dofs.project(x - t * g)
            pair_new = dofs.unpack(x_new)
            f_new, mis_new, _, solves_new = prob.functional(pair_new, tau)
            decrease = float(g @ (x - x_new))
            if f_new <= f_cur - cfg.armijo_c * decrease and f_new <= f_cur:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True  # no descent direction left at this smoothing
            break

        rel_drop = (f_cur - f_new) / max(abs(f_cur), 1e-300)
        x, pair, f_cur, mis_cur, solves = x_new, pair_new, f_new, mis_new, solves_new
        history.append(f_cur)
        step = t
        flat_count = flat_count + 1 if rel_drop < cfg.f_rel_tol else 0
        if flat_count >= cfg.stall_window:
            converged = True
            break

    r0 = regularizer_R(pair, cfg.regularizer_mode, check_bounds=False)
    f_rep = mis_cur / ms.eps**cfg.gamma + cfg.a_tilde * r0
    xd = x_distance(pair, truth) if truth is not None else float("nan")
    return ReconstructionResult(
        pair=pair,
        F_value=f_rep,
        misfit=mis_cur,
        R_value=r0,
        iterations=it,
        stationarity=stationarity,
        converged=converged,
        wall_seconds=time.time() - t_start,
        x_dist_to_truth=xd,
        history=history,
    )


# -- probes and studies ---------------------------------------------------------


def holder_probe(
    base: CoefficientPair,
    direction: CoefficientPair,
    scales,
    settings: ForwardSettings,
    k: float = 2.0,
    d_angle: float = 0.0,
    out_angles=None,
    exponent: float = 0.5,
):
    """Far-field response to coefficient perturbations base + t*direction.

    Rows: (t, ||delta coef||_L1, sup far-field difference, ratio to the
    L1 norm raised to `exponent`). Ratios stay bounded as t -> 0 when the
    forward map is Hoelder with that exponent.
    """
    out_angles = (
        np.linspace(0, 2 * np.pi, 16, endpoint=False) if out_angles is None else out_angles
    )
    op = ForwardOperator(base.mesh, settings)
    ext = op.far_extractor(k, np.asarray(out_angles, dtype=np.float64))
    wave = PlaneWave(k, d_angle)
    base_sys = op.assemble(base, k)
    f0 = ext.apply(base_sys.solve(wave))
    rows = []
    dir_ent = direction.sigma_entries()
    bg = np.array([1.0, 0.0, 1.0])
    for t in scales:
        ent = base.sigma_entries() + t * (dir_ent - bg)
        eta = base.eta.values + t * (direction.eta.values - 1.0)
        pert = base.with_nodal(sigma_entries=ent, eta_values=eta)
        if not pert.is_feasible():
            raise InvalidParameterError(f"perturbed pair infeasible at t={t}")
        ft = ext.apply(op.assemble(pert, k).solve(wave))
        dist = x_distance(pert, base)
        sup = float(np.abs(ft - f0).max())
        ratio = sup / dist**exponent if dist > 0 else 0.0
        rows.append((float(t), dist, sup, ratio))
    return rows


@dataclass
class StudyReport:
    rows: list[dict]
    manifest: dict

    COLUMNS = (
        "eps",
        "a",
        "h",
        "n_in",
        "n_out",
        "D",
        "F_value",
        "misfit",
        "R_value",
        "x_dist",
        "iterations",
        "wall_seconds",
    )

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=np.float64)

    def write_csv(self, path, config_hash: str | None = None):
        with open(path, "w", newline="") as fh:
            if config_hash:
                fh.write(f"# config_sha256={config_hash}\n")
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in self.rows:
                cells = []
                for c in self.COLUMNS:
                    v = row[c]
                    cells.append(str(v) if isinstance(v, int) else f"{v:.17g}")
                fh.write(",".join(cells) + "\n")


def gamma_study(
    truth: CoefficientPair,
    schedule: Schedule,
    eps_list,
    seed: int,
    settings: ForwardSettings,
    wavenumbers=(1.0, 2.0),
    cfg: FunctionalConfig | None = None,
    h_floor: float = 0.08,
    noise_fraction: float = 0.3,
    arc_in=(0.0, 2.0 * math.pi),
    arc_out=(0.0, 2.0 * math.pi),
    with_recovery: bool = True,
    synth_settings: ForwardSettings | None = None,
) -> StudyReport:
    """Reconstruct along a decreasing noise schedule, warm-starting each level.

    The coefficient mesh size follows the schedule h(eps) = eps^(2/alpha)
    but is clamped below at h_floor, the smallest size this machine can
    afford; the manifest records both values per row. Data are synthesized
    on a finer forward mesh than the inversion uses, so the reconstruction
    never inverts its own discretization exactly.
    """
    eps_list = list(eps_list)
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise InvalidParameterError("eps_list must be strictly decreasing")
    cfg = cfg or FunctionalConfig(a_tilde=schedule.a_tilde, gamma=schedule.gamma)
    domain = truth.domain

    if synth_settings is None:
        synth_settings = ForwardSettings(
            R0=settings.R0,
            Re=settings.Re,
            dtn_modes=settings.dtn_modes,
            forward_mesh_h=min(settings.forward_mesh_h, truth.mesh.mesh_size_h),
            ring_radius=settings.ring_radius,
            ring_samples=settings.ring_samples,
            fd_spacing=settings.fd_spacing,
        )
    synth_op = ForwardOperator(truth.mesh, synth_settings)
    rows = []
    manifest: dict = {
        "seed": seed,
        "schedule": {
            "a_tilde": schedule.a_tilde,
            "gamma": schedule.gamma,
            "alpha": schedule.alpha,
            "beta": schedule.beta,
        },
        "h_floor": h_floor,
        "noise_fraction": noise_fraction,
        "wavenumbers": list(wavenumbers),
        "rows": [],
    }
    prev_plan = None
    warm: CoefficientPair | None = None
    meshes: dict[float, Triangulation] = {}
    for i, eps in enumerate(eps_list):
        t0 = time.time()
        row: dict = {"eps": eps}
        try:
            p = plan(eps, schedule, len(wavenumbers), arc_in, arc_out, previous=prev_plan)
            prev_plan = p
            h_used = max(p.h, h_floor)
            if h_used not in meshes:
                meshes[h_used] = build_triangulation(domain, h_used)
            coef_mesh = meshes[h_used]
            ms = synthesize(
                truth,
                p,
                synth_settings,
                wavenumbers,
                seed=seed + i,
                arc_in=arc_in,
                arc_out=arc_out,
                noise_fraction=noise_fraction,
                operator=synth_op,
            )
            if warm is None or warm.mesh is not coef_mesh:
                init = background_pair(domain, truth.bounds, coef_mesh, cfg.sigma_mode)
                if warm is not None:
                    ent = warm.eval_sigma_entries(coef_mesh.nodes)
                    eta = warm.eval_eta(coef_mesh.nodes)
                    if cfg.sigma_mode == "isotropic":
                        ent = np.column_stack(
                            [
                                0.5 * (ent[:, 0] + ent[:, 2]),
                                np.zeros(len(ent)),
                                0.5 * (ent[:, 0] + ent[:, 2]),
                            ]
                        )
                    init = project_bounds(init.with_nodal(sigma_entries=ent, eta_values=eta))
            else:
                init = warm
            res = minimize(ms, settings, cfg, init, truth=truth)
            warm = res.pair
            row.update(
                a=p.a,
                h=h_used,
                n_in=p.n_in,
                n_out=p.n_out,
                D=p.D,
                F_value=res.F_value,
                misfit=res.misfit,
                R_value=res.R_value,
                x_dist=res.x_dist_to_truth,
                iterations=res.iterations,
                wall_seconds=time.time() - t0,
            )
            mrow = {
                "eps": eps,
                "h_plan": p.h,
                "h_used": h_used,
                "seed": seed + i,
                "decay_indicator": p.decay_indicator(schedule.gamma),
                "admissible": p.admissible,
                "converged": res.converged,
                "stationarity": res.stationarity,
            }
            if with_recovery:
                rec = recovery_interpolant(truth, h_used, mesh=coef_mesh)
                prob = InverseProblem(ms, coef_mesh, settings, cfg)
                f_rec, mis_rec, _, _ = prob.functional(rec, tau=0.0)
                r_rec = regularizer_R(rec, cfg.regularizer_mode, check_bounds=False)
                mrow["F_recovery"] = mis_rec / eps**cfg.gamma + cfg.a_tilde * r_rec
                mrow["R_recovery"] = r_rec
            manifest["rows"].append(mrow)
            rows.append(row)
        except Exception as exc:  # keep the sweep going, record the failure
            manifest["rows"].append({"eps": eps, "error": repr(exc)})
            row.update(
                a=float("nan"),
                h=float("nan"),
                n_in=0,
                n_out=0,
                D=0,
                F_value=float("nan"),
                misfit=float("nan"),
                R_value=float("nan"),
                x_dist=float("nan"),
                iterations=0,
                wall_seconds=time.time() - t0,
            )
            rows.append(row)
    manifest["R_truth"] = regularizer_R(truth, cfg.regularizer_mode, check_bounds=False)
    return StudyReport(rows, manifest)
