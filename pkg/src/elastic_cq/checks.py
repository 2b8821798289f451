"""Self-verification routines shared by ``verify`` and the test suite.

Each function returns measured errors or orders; pass/fail thresholds live with
the callers.
"""

from __future__ import annotations

import numpy as np

from .bie import DensityPair, NystromGrid, assemble_system, eval_observation, kress_weights, solve_frequency
from .cq import cq_convolve, make_grid
from .forward import ElasticMedium, IncidentWave, forward_solve
from .geometry import ObservationCircle, StarCurve, TrigPoly, peanut
from .inverse import ShapeUpdate, apply_update, build_B
from .specfun import mod_bessel_K

MS_SOURCES = ((0.05, 0.3), (-0.05, -0.4))


# ---------------------------------------------------------------------------
# manufactured exterior solution
# ---------------------------------------------------------------------------
def _grad_K(x, z, s, c):
    d = np.asarray(x) - np.asarray(z)
    rho = np.linalg.norm(d, axis=-1)
    return (-(s / (2 * np.pi * c)) * mod_bessel_K(1, s * rho / c) / rho)[..., None] * d


def source_field(x, s, c1: float, c2: float, z1, z2) -> np.ndarray:
    """``grad K(x - z1; c1) + curl K(x - z2; c2)``: an exact exterior solution for interior sources."""
    g1 = _grad_K(x, z1, s, c1)
    g2 = _grad_K(x, z2, s, c2)
    return g1 + np.stack([g2[..., 1], -g2[..., 0]], axis=-1)


def manufactured_error(curve: StarCurve, s, n_tilde: int = 50, medium: ElasticMedium | None = None,
                       obs: ObservationCircle | None = None, sources=MS_SOURCES) -> float:
    """Relative error at ``obs`` of the Nyström field reproducing :func:`source_field` from its traces."""
    medium = medium or ElasticMedium()
    obs = obs or ObservationCircle()
    c1, c2 = medium.c1, medium.c2
    z1, z2 = (np.asarray(z, dtype=float) for z in sources)
    grid = NystromGrid(n_tilde)
    p = curve.eval(grid.nodes)[0]
    _, n, n_perp = curve.frame(grid.nodes)
    w = source_field(p, s, c1, c2, z1, z2)
    rhs = (2.0 * np.sum(n * w, axis=-1), 2.0 * np.sum(n_perp * w, axis=-1))
    dens = solve_frequency(assemble_system(curve, s, c1, c2, grid, rhs))
    v = eval_observation(curve, obs, s, c1, c2, dens, grid)
    exact = source_field(obs.points(), s, c1, c2, z1, z2)
    return float(np.linalg.norm(v - exact) / np.linalg.norm(exact))


def manufactured_frequencies(T: float = 10.0, N: int = 128, count: int = 10, smin: float = 0.5,
                             smax: float = 30.0) -> np.ndarray:
    """``count`` contour frequencies of ``(T, N)`` with ``smin <= |s| <= smax``, evenly spread in index."""
    s = make_grid(T, N).s
    idx = np.flatnonzero((np.abs(s) >= smin) & (np.abs(s) <= smax) & (np.arange(s.size) <= N // 2))
    pick = np.unique(np.round(np.linspace(0, idx.size - 1, count)).astype(int))
    return s[idx[pick]]


# ---------------------------------------------------------------------------
# quadrature and CQ
# ---------------------------------------------------------------------------
def quadrature_identity_error(n_tilde: int) -> tuple[float, float]:
    """Max error of ``R cos(m .) = -(2 pi/m) cos(m theta)`` over ``1 <= m < n`` and ``|sum_j R_j|``."""
    R, _ = kress_weights(n_tilde)
    n2 = 2 * n_tilde
    j = np.arange(n2)
    eta = np.pi * j / n_tilde
    Rm = R[np.abs(j[:, None] - j[None, :])]
    worst = 0.0
    for m in range(1, n_tilde):
        lhs = Rm @ np.cos(m * eta)
        worst = max(worst, float(np.max(np.abs(lhs + 2 * np.pi / m * np.cos(m * eta)))))
    return worst, float(abs(R.sum()))


def observed_orders(errors, Ns) -> np.ndarray:
    """``log2`` error ratios for successive doublings of ``N``."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(Ns, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[1:] / h[:-1])


def cq_model_errors(Ns=(16, 32, 64, 128), T: float = 1.0) -> np.ndarray:
    """Error at ``t = T`` of the CQ integral ``W(s) = 1/s`` applied to ``g(t) = t`` (exact ``T^2/2``)."""
    out = []
    for N in Ns:
        grid = make_grid(T, N)
        y = cq_convolve(lambda s: 1.0 / s, grid.times, grid)
        out.append(float(abs(y[-1] - 0.5 * T * T)))
    return np.array(out)


def trace_self_convergence(Ns=(128, 256, 512), T: float = 10.0, n_tilde: int = 50, curve=None,
                           theta_inc: float = 15 * np.pi / 16, workers: int = 1):
    """Ratio test on forward traces: discrete L2 differences between successive ``N`` on the common grid.

    Returns ``(ratio, differences)`` with ``ratio = d(N0, N1) / d(N1, N2)``.
    """
    curve = curve if curve is not None else peanut()
    obs = ObservationCircle()
    wave = IncidentWave(theta_inc=theta_inc)
    medium = ElasticMedium()
    traces = [forward_solve(curve, obs, wave, medium, T, N, n_tilde, workers=workers).values for N in Ns]
    coarse = Ns[0]
    sub = [v[:: N // coarse] for v, N in zip(traces, Ns)]
    d = [float(np.sqrt(np.sum((sub[k] - sub[k + 1]) ** 2) * T / coarse)) for k in range(len(Ns) - 1)]
    return d[0] / d[1], d


# ---------------------------------------------------------------------------
# Fréchet derivative
# ---------------------------------------------------------------------------
def frechet_test_setup(seed: int = 1, n_tilde: int = 32, degree: int = 3):
    """A smooth trigonometric curve, a complex frequency and random frozen densities."""
    rng = np.random.default_rng(seed)
    curve = StarCurve((0.1, -0.2), TrigPoly((0.5, 0.1, 0.05, 0.02), (0.03, -0.04, 0.01))).to_trig(degree)
    grid = NystromGrid(n_tilde)
    n = grid.size
    dens = DensityPair(rng.standard_normal(n) + 1j * rng.standard_normal(n),
                       rng.standard_normal(n) + 1j * rng.standard_normal(n))
    direction = rng.standard_normal(2 * degree + 3)
    direction /= np.linalg.norm(direction)
    return curve, 1.3 + 2.1j, dens, grid, direction


def frechet_fd_errors(epsilons=(1e-2, 1e-3, 1e-4), seed: int = 1):
    """Relative frozen-density linearization errors ``||(F(p + eps q) - F(p))/eps - B xi|| / ||B xi||``."""
    curve, s, dens, grid, xi = frechet_test_setup(seed)
    medium = ElasticMedium()
    obs = ObservationCircle()
    B = build_B(curve, obs, s, medium, dens, (xi.size - 3) // 2, grid)
    lin = B @ xi
    F0 = eval_observation(curve, obs, s, medium.c1, medium.c2, dens, grid).ravel()
    errs = []
    for eps in epsilons:
        moved = apply_update(curve, ShapeUpdate(eps * xi))
        F = eval_observation(moved, obs, s, medium.c1, medium.c2, dens, grid).ravel()
        errs.append(float(np.linalg.norm((F - F0) / eps - lin) / np.linalg.norm(lin)))
    return np.array(errs)


def frechet_fd_order(epsilons=(1e-2, 1e-3, 1e-4), seed: int = 1) -> float:
    """Smallest observed order of :func:`frechet_fd_errors` in ``eps``."""
    e = frechet_fd_errors(epsilons, seed)
    eps = np.asarray(epsilons)
    return float(np.min(np.log(e[:-1] / e[1:]) / np.log(eps[:-1] / eps[1:])))


def frechet_resolved_errors(epsilons=(1e-2, 1e-3, 1e-4), seed: int = 1):
    """Like :func:`frechet_fd_errors` but with densities re-solved on each perturbed curve.

    The boundary data are the traces of :func:`source_field`, so the
    difference quotient includes the density derivative that the frozen
    linearization omits; the errors therefore level off instead of vanishing.
    """
    curve, s, _, grid, xi = frechet_test_setup(seed)
    medium = ElasticMedium()
    obs = ObservationCircle()
    c1, c2 = medium.c1, medium.c2
    z1, z2 = (np.asarray(z, dtype=float) for z in MS_SOURCES)

    def solve_on(c):
        p = c.eval(grid.nodes)[0]
        _, n, n_perp = c.frame(grid.nodes)
        w = source_field(p, s, c1, c2, z1, z2)
        rhs = (2.0 * np.sum(n * w, axis=-1), 2.0 * np.sum(n_perp * w, axis=-1))
        return solve_frequency(assemble_system(c, s, c1, c2, grid, rhs))

    dens = solve_on(curve)
    lin = build_B(curve, obs, s, medium, dens, (xi.size - 3) // 2, grid) @ xi
    F0 = eval_observation(curve, obs, s, c1, c2, dens, grid).ravel()
    errs = []
    for eps in epsilons:
        moved = apply_update(curve, ShapeUpdate(eps * xi))
        F = eval_observation(moved, obs, s, c1, c2, solve_on(moved), grid).ravel()
        errs.append(float(np.linalg.norm((F - F0) / eps - lin) / np.linalg.norm(lin)))
    return np.array(errs)
