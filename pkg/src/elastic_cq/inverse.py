"""Shape reconstruction by a frequency-sweeping, Tikhonov-regularized Newton iteration.

At each iteration the densities are solved on the current curve at the active
CQ frequency, the data misfit on the observation circle is linearized with
respect to the boundary (densities held fixed), and the update
``xi = (dp1, dp2, alpha_0..alpha_M, beta_1..beta_M)`` is obtained from the
regularized normal equations.  The active frequency index advances every
``loop`` iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bie import DensityPair, NystromGrid, ObservationGeometry, assemble_system, eval_observation, solve_frequency
from .cq import CQGrid, scaled_dft, scaled_dft_at
from .forward import ElasticMedium, IncidentWave, TraceSet, incident_eval
from .geometry import STAR_FLOOR, GeometryError, ObservationCircle, StarCurve, TrigPoly
from .specfun import bessel_k01

LAMBDA0_FLOOR = 1e-12
MAX_HALVINGS = 30


# ---------------------------------------------------------------------------
# shape updates
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ShapeUpdate:
    """Real coefficient vector ``(dp1, dp2, alpha_0..alpha_M, beta_1..beta_M)``."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float).ravel()
        if xi.size < 3 or (xi.size - 3) % 2:
            raise ValueError(f"update vector must have length 2M+3, got {xi.size}")
        object.__setattr__(self, "xi", xi)

    @property
    def degree(self) -> int:
        return (self.xi.size - 3) // 2

    @property
    def shift(self) -> np.ndarray:
        return self.xi[:2]

    @property
    def alpha(self) -> np.ndarray:
        return self.xi[2 : 3 + self.degree]

    @property
    def beta(self) -> np.ndarray:
        return self.xi[3 + self.degree :]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.xi))

    def delta_r(self, eta):
        return TrigPoly(self.alpha, self.beta).eval(eta)[0]

    def q(self, eta) -> np.ndarray:
        """Boundary displacement ``(dp1, dp2) + dr(eta) (cos eta, sin eta)``, shape ``(..., 2)``."""
        eta = np.asarray(eta, dtype=float)
        dr = self.delta_r(eta)
        e = np.stack([np.cos(eta), np.sin(eta)], axis=-1)
        return self.shift + dr[..., None] * e

    def scaled(self, factor: float) -> "ShapeUpdate":
        return ShapeUpdate(factor * self.xi)

    @classmethod
    def zero(cls, degree: int) -> "ShapeUpdate":
        return cls(np.zeros(2 * degree + 3))

    @classmethod
    def from_q(cls, shift, dr_samples, eta, degree: int) -> "ShapeUpdate":
        """Least-squares encoding of a radial update sampled at ``eta``."""
        m = np.arange(degree + 1)
        A = np.hstack([np.cos(np.outer(eta, m)), np.sin(np.outer(eta, m[1:]))])
        coef = np.linalg.lstsq(A, np.asarray(dr_samples, dtype=float), rcond=None)[0]
        return cls(np.concatenate([np.asarray(shift, dtype=float), coef]))


def penalty_matrix(degree: int) -> np.ndarray:
    """``diag(1, 1, 2 pi, pi(1+m^2) for alpha_m, pi(1+m^2) for beta_m)``."""
    m = np.arange(1, degree + 1)
    w = np.pi * (1.0 + m**2)
    return np.diag(np.concatenate([[1.0, 1.0, 2 * np.pi], w, w]))


def apply_update(curve: StarCurve, update: ShapeUpdate) -> StarCurve:
    """New iterate ``(p + dp) + (r + dr) x_hat``; the radial part must be a TrigPoly of the same degree."""
    rad = curve.radial
    if not isinstance(rad, TrigPoly) or rad.degree != update.degree:
        raise GeometryError("updates apply to trigonometric curves of matching degree")
    center = np.asarray(curve.center) + update.shift
    alpha = np.asarray(rad.alpha) + update.alpha
    beta = np.asarray(rad.beta) + update.beta
    return StarCurve(tuple(center), TrigPoly(alpha, beta))


def initial_curve(r0: float, center, degree: int) -> StarCurve:
    """Circle of radius ``r0`` written as a degree-``degree`` trigonometric curve."""
    return StarCurve(tuple(center), TrigPoly.circle(r0, degree))


# ---------------------------------------------------------------------------
# misfit and error estimator
# ---------------------------------------------------------------------------
def obs_norm(values, n_bar: int) -> float:
    """Discrete L2 norm ``sqrt(pi/n_bar sum |v|^2)`` over the observation circle."""
    return float(np.sqrt(np.pi / n_bar * np.sum(np.abs(values) ** 2)))


def residual(curve: StarCurve, obs: ObservationCircle, s, c1: float, c2: float, density: DensityPair,
             data, grid: NystromGrid, geo: ObservationGeometry | None = None) -> np.ndarray:
    """Data minus model ``v_hat - (N phi1 + T phi2)`` at the observation points, shape ``(2 n_bar, 2)``."""
    model = eval_observation(curve, obs, s, c1, c2, density, grid, geo)
    return np.asarray(data) - model


def stopping_error(res, data) -> float:
    """Relative misfit ``||res|| / ||data||`` (uniform weights, so the quadrature factor cancels)."""
    nd = float(np.sqrt(np.sum(np.abs(data) ** 2)))
    if nd == 0.0:
        raise ZeroDivisionError("frequency carries no data; it must be skipped")
    return float(np.sqrt(np.sum(np.abs(res) ** 2))) / nd


def choose_lambda0(res, n_bar: int) -> float:
    """Regularization weight: L2 norm of the current residual, floored at ``LAMBDA0_FLOOR``."""
    return max(obs_norm(res, n_bar), LAMBDA0_FLOOR)


# ---------------------------------------------------------------------------
# Fréchet derivative
# ---------------------------------------------------------------------------
def _radial_coefficients(r, s, c):
    """``A = -i s^2/(4c^2) H0/r^2 + s/(2c) H1/r^3`` and ``f = s/(4c) H1/r`` on an array of distances."""
    z = s * r / c
    k0, k1 = bessel_k01(z)
    h0 = -2j / np.pi * k0
    h1 = -2.0 / np.pi * k1
    A = -1j * s * s / (4 * c * c) * h0 / r**2 + s / (2 * c) * h1 / r**3
    f = s / (4 * c) * h1 / r
    return A, f


def frechet_kernels(curve: StarCurve, obs: ObservationCircle, s, medium: ElasticMedium,
                    density: DensityPair, grid: NystromGrid, degree: int) -> np.ndarray:
    """Integrands ``L_k`` for every column, shape ``(2 n_bar, 2 n, 2, 2M+3)``.

    Columns follow ``(dp1, dp2, alpha_0..alpha_M, beta_1..beta_M)``; the third
    axis holds the two field components.
    """
    eta = grid.nodes
    pd = curve.eval(eta)[0]
    pb = obs.points()
    d = pb[:, None, :] - pd[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    d1, d2 = d[..., 0], d[..., 1]
    A1, f1 = _radial_coefficients(r, s, medium.c1)
    A2, f2 = _radial_coefficients(r, s, medium.c2)
    phi1 = density.phi1[None, :]
    phi2 = density.phi2[None, :]
    ce, se = np.cos(eta)[None, :], np.sin(eta)[None, :]
    # (b1 - p1) cos eta + (b2 - p2) sin eta + R cos(vs - eta) - r(eta) = d . x_hat(eta)
    radial = d1 * ce + d2 * se

    cols = []
    # dp1: q = (1, 0)
    L11 = A1 * d1 * d1 * phi1 - f1 * phi1 + A2 * d2 * d1 * phi2
    L12 = A1 * d2 * d1 * phi1 - A2 * d1 * d1 * phi2 + f2 * phi2
    cols.append(np.stack([L11, L12], axis=-1))
    # dp2: q = (0, 1)
    L21 = A1 * d2 * d1 * phi1 + A2 * d2 * d2 * phi2 - f2 * phi2
    L22 = A1 * d2 * d2 * phi1 - f1 * phi1 - A2 * d2 * d1 * phi2
    cols.append(np.stack([L21, L22], axis=-1))
    # radial modes: q = w(eta) x_hat(eta), w = cos(m eta) or sin(m eta)
    base1 = A1 * d1 * radial * phi1 - f1 * ce * phi1 + A2 * d2 * radial * phi2 - f2 * se * phi2
    base2 = A1 * d2 * radial * phi1 - f1 * se * phi1 - A2 * d1 * radial * phi2 + f2 * ce * phi2
    for m in range(degree + 1):
        w = np.cos(m * eta)[None, :]
        cols.append(np.stack([base1 * w, base2 * w], axis=-1))
    for m in range(1, degree + 1):
        w = np.sin(m * eta)[None, :]
        cols.append(np.stack([base1 * w, base2 * w], axis=-1))
    return np.stack(cols, axis=-1)


def frechet_row(kind: int, m: int, varsigma, eta, s, medium: ElasticMedium, phi1, phi2, curve: StarCurve,
                obs: ObservationCircle) -> np.ndarray:
    """Single integrand ``L_k`` (``kind`` 1..4, mode ``m``) at observation angle ``varsigma`` and node ``eta``.

    ``kind`` 1, 2 are the centre shifts; 3, 4 the cosine and sine radial modes.
    """
    pb = np.asarray(obs.center) + obs.radius * np.array([np.cos(varsigma), np.sin(varsigma)])
    pd = curve.eval(np.asarray(eta, dtype=float))[0]
    d = pb - pd
    r = float(np.hypot(*d))
    A1, f1 = _radial_coefficients(r, s, medium.c1)
    A2, f2 = _radial_coefficients(r, s, medium.c2)
    e = np.array([np.cos(eta), np.sin(eta)])
    if kind == 1:
        q = np.array([1.0, 0.0])
    elif kind == 2:
        q = np.array([0.0, 1.0])
    elif kind == 3:
        q = np.cos(m * eta) * e
    elif kind == 4:
        q = np.sin(m * eta) * e
    else:
        raise ValueError(f"kind must be 1..4, got {kind}")
    dq = d @ q
    dperp = np.array([d[1], -d[0]])
    qperp = np.array([-q[1], q[0]])
    return (A1 * dq * d - f1 * q) * phi1 + (A2 * dq * dperp + f2 * qperp) * phi2


def build_B(curve: StarCurve, obs: ObservationCircle, s, medium: ElasticMedium, density: DensityPair,
            degree: int, grid: NystromGrid) -> np.ndarray:
    """Linearized data map, ``(4 n_bar) x (2M+3)`` with rows ``(i, component)`` interleaved."""
    L = frechet_kernels(curve, obs, s, medium, density, grid, degree)
    B = grid.weight * L.sum(axis=1)  # (2 n_bar, 2, cols)
    return B.reshape(-1, B.shape[-1])


def tikhonov_step(B, omega, lambda0: float, penalty, rho: float = 0.9) -> ShapeUpdate:
    """Solve ``(lambda0 I~ + Re(B* B)) xi = Re(B* omega)`` by Cholesky and scale by ``rho``."""
    if not lambda0 > 0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")
    B = np.asarray(B)
    omega = np.asarray(omega).ravel()
    G = lambda0 * np.asarray(penalty) + np.real(B.conj().T @ B)
    rhs = np.real(B.conj().T @ omega)
    try:
        cf = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("regularized normal matrix is not positive definite") from exc
    xi = scipy.linalg.cho_solve(cf, rhs)
    return ShapeUpdate(rho * xi)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------
@dataclass
class InverseConfig:
    """Knobs of the reconstruction loop."""

    n_tilde: int = 32
    degree: int = 3
    rho: float = 0.9
    loop: int = 4
    epsilon: float | None = None
    epsilon_tilde: float = 1e-6
    max_ll: int | None = None
    r0: float = 0.4
    center: tuple = (0.0, 0.0)
    delta: float = 0.0

    def resolved_epsilon(self) -> float:
        return self.epsilon if self.epsilon is not None else max(2.0 * self.delta, 1e-3)


@dataclass
class IterationRecord:
    ll: int
    l: int
    s: complex
    E: float | None
    lambda0: float | None
    xi_norm: float
    skipped: bool
    curve: StarCurve
    halvings: int = 0

    def to_dict(self) -> dict:
        from .geometry import curve_to_dict

        return {
            "ll": self.ll,
            "l": self.l,
            "s_l": [float(np.real(self.s)), float(np.imag(self.s))],
            "E": self.E,
            "lambda0": self.lambda0,
            "xi_norm": self.xi_norm,
            "skipped": self.skipped,
            "curve": curve_to_dict(self.curve),
        }


@dataclass
class IterationState:
    curve: StarCurve
    ll: int = 0
    history: list = field(default_factory=list)
    status: str = "running"
    rejections: int = 0

    @property
    def l(self) -> int:
        return self.ll // self._loop

    _loop: int = 4


def boundary_rhs_at(curve: StarCurve, wave: IncidentWave, medium: ElasticMedium, cqgrid: CQGrid,
                    grid: NystromGrid, l: int):
    """Boundary data ``(w1, w2)`` of the incident wave at one frequency ``l``."""
    p = curve.eval(grid.nodes)[0]
    _, n, n_perp = curve.frame(grid.nodes)
    u = incident_eval(wave, medium, p[None, :, :], cqgrid.times[:, None])
    uh = scaled_dft_at(u, cqgrid.lam, l, axis=0)
    return -2.0 * np.sum(n * uh, axis=-1), -2.0 * np.sum(n_perp * uh, axis=-1)


def reconstruct(data: TraceSet, wave: IncidentWave, medium: ElasticMedium, config: InverseConfig,
                callback=None) -> IterationState:
    """Run the frequency-sweeping Newton iteration on time-domain data.

    Stops with ``status == "success"`` once the relative misfit at the active
    frequency drops below epsilon, or ``"exhausted"`` when the frequencies
    or the iteration budget run out.
    """
    cq = data.cqgrid
    obs = data.obs
    grid = NystromGrid(config.n_tilde)
    vhat = scaled_dft(data.values, cq.lam, axis=0)
    s_all = cq.s
    eps = config.resolved_epsilon()
    max_ll = config.max_ll if config.max_ll is not None else (cq.N + 1) * config.loop
    penalty = penalty_matrix(config.degree)
    c1, c2 = medium.c1, medium.c2

    state = IterationState(initial_curve(config.r0, config.center, config.degree))
    state._loop = config.loop
    while True:
        ll = state.ll
        l = ll // config.loop
        if l > cq.N or ll >= max_ll:
            state.status = "exhausted"
            break
        curve = state.curve
        s = s_all[l]
        w1, w2 = boundary_rhs_at(curve, wave, medium, cq, grid, l)
        wnorm = float(np.sqrt(grid.weight * (np.sum(np.abs(w1) ** 2) + np.sum(np.abs(w2) ** 2))))
        data_l = vhat[l]
        if wnorm < config.epsilon_tilde or not np.any(data_l):
            rec = IterationRecord(ll, l, s, None, None, 0.0, True, curve)
            state.history.append(rec)
            if callback:
                callback(rec)
            state.ll += 1
            continue
        obs.check_encloses(curve)
        geo = ObservationGeometry.build(curve, obs, grid)
        system = assemble_system(curve, s, c1, c2, grid, (w1, w2), index=l)
        dens = solve_frequency(system)
        res = residual(curve, obs, s, c1, c2, dens, data_l, grid, geo)
        E = stopping_error(res, data_l)
        if E < eps:
            rec = IterationRecord(ll, l, s, E, None, 0.0, False, curve)
            state.history.append(rec)
            if callback:
                callback(rec)
            state.status = "success"
            break
        B = build_B(curve, obs, s, medium, dens, config.degree, grid)
        lam0 = choose_lambda0(res, obs.n_bar)
        upd = tikhonov_step(B, res.ravel(), lam0, penalty, config.rho)
        new_curve, halvings, upd = _safe_update(curve, upd, obs)
        state.rejections += halvings
        rec = IterationRecord(ll, l, s, E, lam0, upd.norm, False, curve, halvings)
        state.history.append(rec)
        if callback:
            callback(rec)
        state.curve = new_curve
        state.ll += 1
    return state


def _safe_update(curve: StarCurve, upd: ShapeUpdate, obs: ObservationCircle):
    """Apply ``upd``, halving it while the result leaves the star-shaped/admissible set."""
    for k in range(MAX_HALVINGS + 1):
        try:
            new = apply_update(curve, upd)
            obs.check_encloses(new)
            if new.min_radius() > STAR_FLOOR:
                return new, k, upd
        except GeometryError:
            pass
        upd = upd.scaled(0.5)
    return curve, MAX_HALVINGS, ShapeUpdate.zero(upd.degree)
