"""Synthetic time-domain scattering data.

The pipeline samples the incident plane wave on the boundary nodes at the CQ
time steps, transforms each node's history with the scaled DFT, solves one
Nyström system per frequency on the half spectrum, evaluates the scattered
field on the observation circle, completes the spectrum by conjugation and
transforms back to real time traces.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .bie import NystromGrid, ObservationGeometry, assemble_system, eval_observation, solve_frequency
from .cq import CQGrid, inverse_scaled_dft, make_grid, realify, scaled_dft
from .geometry import ObservationCircle, StarCurve

TAPER_WIDTH = 0.2
IMAG_RESIDUE_TOL = 1e-8


@dataclass(frozen=True)
class ElasticMedium:
    """Homogeneous isotropic medium with Lamé constants ``lam`` and ``mu`` (unit density)."""

    lam: float = 3.88
    mu: float = 2.56

    def __post_init__(self):
        if not self.mu > 0 or not self.lam + self.mu > 0:
            raise ValueError(f"Lamé constants need mu > 0 and lambda + mu > 0, got ({self.lam}, {self.mu})")

    @property
    def c1(self) -> float:
        """Compressional speed ``sqrt(lambda + 2 mu)``."""
        return float(np.sqrt(self.lam + 2.0 * self.mu))

    @property
    def c2(self) -> float:
        """Shear speed ``sqrt(mu)``."""
        return float(np.sqrt(self.mu))


def sin3_profile(tau, window: float = 5.0, taper: float = TAPER_WIDTH):
    """``sin(3 tau)^3`` on ``0 < tau <= window`` with a C2 taper over the last ``taper``."""
    tau = np.asarray(tau, dtype=float)
    f = np.sin(3.0 * tau) ** 3
    u = np.clip((tau - (window - taper)) / taper, 0.0, 1.0)
    w = 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)
    return np.where((tau > 0.0) & (tau <= window), f * w, 0.0)


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave ``d f(c1 t + x.d - R0)`` (compressional) or ``d_perp f(c2 t + x.d - R0)`` (shear)."""

    kind: str = "compressional"
    theta_inc: float = 0.0
    R0: float = 1.2
    window: float = 5.0
    profile: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("compressional", "shear"):
            raise ValueError(f"wave kind must be 'compressional' or 'shear', got {self.kind!r}")

    @property
    def direction(self) -> np.ndarray:
        return np.array([np.cos(self.theta_inc), np.sin(self.theta_inc)])

    def f(self, tau):
        if self.profile is not None:
            return np.asarray(self.profile(tau), dtype=float)
        return sin3_profile(tau, self.window)


def incident_eval(wave: IncidentWave, medium: ElasticMedium, x, t):
    """Incident displacement at points ``x`` (``(..., 2)``) and times ``t`` (broadcast), shape ``(..., 2)``."""
    x = np.asarray(x, dtype=float)
    d = wave.direction
    if wave.kind == "compressional":
        c, pol = medium.c1, d
    else:
        c, pol = medium.c2, np.array([-d[1], d[0]])
    tau = c * np.asarray(t, dtype=float) + x @ d - wave.R0
    return wave.f(tau)[..., None] * pol


def boundary_rhs(curve: StarCurve, wave: IncidentWave, medium: ElasticMedium, cqgrid: CQGrid,
                 grid: NystromGrid, indices=None):
    """Right-hand sides ``(w1, w2)`` per frequency, each of shape ``(len(indices), 2 n)``.

    ``w1 = -2 n.u_hat``, ``w2 = -2 n_perp.u_hat`` with the un-normalized
    normal and tangent of :meth:`StarCurve.frame`.
    """
    p = curve.eval(grid.nodes)[0]
    _, n, n_perp = curve.frame(grid.nodes)
    t = cqgrid.times[:, None]
    u = incident_eval(wave, medium, p[None, :, :], t)  # (N+1, 2n, 2)
    uh = scaled_dft(u, cqgrid.lam, axis=0)
    if indices is not None:
        uh = uh[np.asarray(indices)]
    w1 = -2.0 * np.einsum("ljk,jk->lj", uh, n)
    w2 = -2.0 * np.einsum("ljk,jk->lj", uh, n_perp)
    return w1, w2


@dataclass
class TraceSet:
    """Scattered displacement at the observation points.

    ``values`` has shape ``(N+1, 2 n_bar, 2)``; ``hat`` (optional) holds the
    matching scaled-DFT images on the full frequency range.
    """

    cqgrid: CQGrid
    obs: ObservationCircle
    values: np.ndarray
    hat: np.ndarray | None = None
    imag_residue: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.cqgrid.times

    @property
    def angles(self) -> np.ndarray:
        return self.obs.angles

    def spectrum(self) -> np.ndarray:
        """Scaled DFT of the (possibly noisy) traces along time."""
        return scaled_dft(self.values, self.cqgrid.lam, axis=0)


def forward_solve(curve: StarCurve, obs: ObservationCircle, wave: IncidentWave, medium: ElasticMedium,
                  T: float = 10.0, N: int = 128, n_tilde: int = 50, lam="auto", workers: int = 1) -> TraceSet:
    """Time traces of the scattered field on ``obs`` for the obstacle ``curve``."""
    obs.check_encloses(curve)
    cqgrid = make_grid(T, N, lam)
    grid = NystromGrid(n_tilde)
    geo = ObservationGeometry.build(curve, obs, grid)
    idx = cqgrid.half_indices()
    w1, w2 = boundary_rhs(curve, wave, medium, cqgrid, grid, idx)
    s_all = cqgrid.s
    c1, c2 = medium.c1, medium.c2

    def one(k):
        l = int(idx[k])
        if not (np.any(w1[k]) or np.any(w2[k])):
            return np.zeros((obs.count, 2), dtype=complex)
        system = assemble_system(curve, s_all[l], c1, c2, grid, (w1[k], w2[k]), index=l)
        dens = solve_frequency(system)
        return eval_observation(curve, obs, s_all[l], c1, c2, dens, grid, geo)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            half = list(pool.map(one, range(len(idx))))
    else:
        half = [one(k) for k in range(len(idx))]
    hat = realify(np.stack(half), N)
    v = inverse_scaled_dft(hat, cqgrid.lam, axis=0)
    peak = float(np.max(np.abs(v.real))) if v.size else 0.0
    resid = float(np.max(np.abs(v.imag))) / peak if peak > 0 else 0.0
    return TraceSet(cqgrid, obs, v.real.copy(), hat, resid)


def add_noise(traces: TraceSet, delta: float, seed: int = 0) -> TraceSet:
    """Multiplicative noise ``v (1 + delta Theta)`` with ``Theta`` a clipped standard normal.

    One generator stream fills ``Theta`` in C order over ``(N+1, 2 n_bar, 2)``.
    """
    if delta < 0:
        raise ValueError(f"noise level must be >= 0, got {delta}")
    if delta == 0:
        return replace(traces, values=traces.values.copy())
    rng = np.random.default_rng(seed)
    theta = np.clip(rng.standard_normal(traces.values.shape), -1.0, 1.0)
    return replace(traces, values=traces.values * (1.0 + delta * theta), hat=None,
                   meta={**traces.meta, "delta": float(delta), "seed": int(seed)})
