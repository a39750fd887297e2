"""Finite measurement sets: direction nets, parameter schedules, noisy synthesis.

A measurement set holds far-field samples over the product of a finite
wavenumber set and two direction nets (incident and outgoing). The schedule
couples everything to the noise level eps:

    a(eps) = a_tilde * eps^gamma      regularization weight,
    h(eps) = eps^(2/alpha)            coefficient mesh size,
    net spacing delta = eps^(beta/2)  so the triple count D grows ~ eps^-beta,

with beta + gamma < 2 so that D(eps) * eps^(2-gamma) -> 0.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, InvalidScheduleError
from .fields import CoefficientPair
from .helmholtz import ForwardOperator, ForwardSettings, PlaneWave


@dataclass
class DirectionSet:
    """Finite set of unit directions with a normalized weight vector."""

    angles: np.ndarray
    weights: np.ndarray
    arc: tuple[float, float]

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.angles) != len(self.weights):
            raise InvalidParameterError("angles and weights must pair up")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("weights must be nonnegative and sum to 1")

    @property
    def count(self) -> int:
        return len(self.angles)


def delta_net(arc: tuple[float, float], delta: float) -> DirectionSet:
    """Midpoint net covering the arc within spacing delta (arc length).

    Node count is ceil(len/delta) (1 when delta >= len), so at most
    len/delta + 1; weights are uniform.
    """
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")
    start, end = float(arc[0]), float(arc[1])
    length = end - start
    if length <= 0:
        raise InvalidParameterError("empty arc")
    if delta >= length:
        angles = np.array([start + 0.5 * length])
    else:
        n = int(math.ceil(length / delta))
        angles = start + (np.arange(n) + 0.5) * (length / n)
    w = np.full(len(angles), 1.0 / len(angles))
    return DirectionSet(angles, w, (start, end))


@dataclass(frozen=True)
class Schedule:
    a_tilde: float
    gamma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.a_tilde > 0):
            raise InvalidScheduleError("a_tilde must be positive")
        if not (0 < self.gamma < 2):
            raise InvalidScheduleError("gamma must lie in (0, 2)")
        if not (0 < self.alpha < 0.5):
            raise InvalidScheduleError("alpha must lie in (0, 1/2)")
        if not (0 < self.beta < 2):
            raise InvalidScheduleError("beta must lie in (0, 2)")
        if self.beta + self.gamma >= 2:
            raise InvalidScheduleError("need beta + gamma < 2")


@dataclass
class EpsilonPlan:
    """Concrete parameter choices realized at one noise level."""

    eps: float
    a: float
    h: float
    delta_in: float
    delta_out: float
    n_in: int
    n_out: int
    n_w: int
    D: int
    admissible: bool

    def decay_indicator(self, gamma: float) -> float:
        """D * eps^(2-gamma); decreasing along plans from one admissible schedule."""
        return float(self.D) * self.eps ** (2.0 - gamma)


def plan(
    eps: float,
    schedule: Schedule,
    n_w: int,
    arc_in: tuple[float, float] = (0.0, 2.0 * math.pi),
    arc_out: tuple[float, float] = (0.0, 2.0 * math.pi),
    previous: EpsilonPlan | None = None,
) -> EpsilonPlan:
    """Realize the schedule at noise level eps."""
    if not (0 < eps <= 1):
        raise InvalidParameterError("eps must lie in (0, 1]")
    a = schedule.a_tilde * eps**schedule.gamma
    h = eps ** (2.0 / schedule.alpha)
    delta = eps ** (schedule.beta / 2.0)
    net_in = delta_net(arc_in, delta)
    net_out = delta_net(arc_out, delta)
    D = n_w * net_in.count * net_out.count
    indicator = D * eps ** (2.0 - schedule.gamma)
    admissible = True
    if previous is not None:
        prev_ind = previous.D * previous.eps ** (2.0 - schedule.gamma)
        admissible = indicator <= prev_ind + 1e-12
    return EpsilonPlan(
        eps=eps,
        a=a,
        h=h,
        delta_in=delta,
        delta_out=delta,
        n_in=net_in.count,
        n_out=net_out.count,
        n_w=n_w,
        D=D,
        admissible=admissible,
    )


@dataclass
class MeasurementSet:
    """Noisy far-field data over I = wavenumbers x incident x outgoing."""

    eps: float
    wavenumbers: np.ndarray
    w_weights: np.ndarray
    incident: DirectionSet
    outgoing: DirectionSet
    values: np.ndarray  # (n_w, n_in, n_out) complex
    truth_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (len(self.wavenumbers), self.incident.count, self.outgoing.count)
        if self.values.shape != shape:
            raise InvalidParameterError(f"values shape {self.values.shape} != {shape}")

    @property
    def D(self) -> int:
        return int(np.prod(self.values.shape))

    def triples(self):
        for iw, k in enumerate(self.wavenumbers):
            for ii, d in enumerate(self.incident.angles):
                for io, x in enumerate(self.outgoing.angles):
                    yield (float(k), float(d), float(x)), self.values[iw, ii, io]


def discreteness(ms: MeasurementSet) -> float:
    """Counting-measure mass of the measurement set."""
    return float(ms.D)


def synthesize(
    truth: CoefficientPair,
    p: EpsilonPlan,
    settings: ForwardSettings,
    wavenumbers,
    seed: int,
    arc_in: tuple[float, float] = (0.0, 2.0 * math.pi),
    arc_out: tuple[float, float] = (0.0, 2.0 * math.pi),
    noise_fraction: float = 1.0,
    operator: ForwardOperator | None = None,
) -> MeasurementSet:
    """Forward-solve the truth on the planned nets and add bounded noise.

    Noise is drawn uniformly on the complex disk of radius
    noise_fraction * eps, so |value - exact| <= eps always holds.
    Deterministic for a fixed seed.
    """
    if not (0.0 <= noise_fraction <= 1.0):
        raise InvalidParameterError("noise_fraction must lie in [0, 1]")
    wavenumbers = np.asarray(wavenumbers, dtype=np.float64)
    net_in = delta_net(arc_in, p.delta_in)
    net_out = delta_net(arc_out, p.delta_out)
    op = operator or ForwardOperator(truth.mesh, settings)
    exact = np.empty((len(wavenumbers), net_in.count, net_out.count), dtype=np.complex128)
    for iw, k in enumerate(wavenumbers):
        sysk = op.assemble(truth, float(k))
        ext = op.far_extractor(float(k), net_out.angles)
        for ii, da in enumerate(net_in.angles):
            u = sysk.solve(PlaneWave(float(k), float(da)))
            exact[iw, ii, :] = ext.apply(u)

    rng = np.random.default_rng(seed)
    r = p.eps * noise_fraction * np.sqrt(rng.uniform(size=exact.shape))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=exact.shape)
    noise = r * np.exp(1j * phi)
    values = exact + noise

    return MeasurementSet(
        eps=p.eps,
        wavenumbers=wavenumbers,
        w_weights=np.ones(len(wavenumbers)),
        incident=net_in,
        outgoing=net_out,
        values=values,
        truth_meta={
            "exact": exact,
            "seed": seed,
            "noise_fraction": noise_fraction,
            "max_noise": float(np.abs(noise).max()),
        },
    )


# -- persistence ---------------------------------------------------------------


def write_measurements(ms: MeasurementSet, csv_path, sidecar_path, extra_meta: dict | None = None):
    """CSV columns k, d_angle, xhat_angle, re, im plus a JSON sidecar."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "d_angle", "xhat_angle", "re", "im"])
        for (k, d, x), v in ms.triples():
            writer.writerow([f"{k:.17g}", f"{d:.17g}", f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
    meta = {
        "eps": ms.eps,
        "D": ms.D,
        "wavenumbers": [float(k) for k in ms.wavenumbers],
        "arc_in": [float(a) for a in ms.incident.arc],
        "arc_out": [float(a) for a in ms.outgoing.arc],
        "n_in": ms.incident.count,
        "n_out": ms.outgoing.count,
        "seed": ms.truth_meta.get("seed"),
        "noise_fraction": ms.truth_meta.get("noise_fraction"),
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(sidecar_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_measurements(csv_path, sidecar_path) -> MeasurementSet:
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    rows = []
    with open(csv_path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["k", "d_angle", "xhat_angle"]:
            raise InvalidParameterError(f"unexpected measurement header {header}")
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            rows.append([float(v) for v in row])
    arr = np.asarray(rows)
    ks = np.unique(arr[:, 0])
    ds = np.unique(arr[:, 1])
    xs = np.unique(arr[:, 2])
    values = np.empty((len(ks), len(ds), len(xs)), dtype=np.complex128)
    ik = np.searchsorted(ks, arr[:, 0])
    ii = np.searchsorted(ds, arr[:, 1])
    io = np.searchsorted(xs, arr[:, 2])
    values[ik, ii, io] = arr[:, 3] + 1j * arr[:, 4]
    inc = DirectionSet(ds, np.full(len(ds), 1.0 / len(ds)), tuple(meta["arc_in"]))
    out = DirectionSet(xs, np.full(len(xs), 1.0 / len(xs)), tuple(meta["arc_out"]))
    return MeasurementSet(
        eps=meta["eps"],
        wavenumbers=ks,
        w_weights=np.ones(len(ks)),
        incident=inc,
        outgoing=out,
        values=values,
        truth_meta={"seed": meta.get("seed"), "noise_fraction": meta.get("noise_fraction")},
    )
