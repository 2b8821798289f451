"""Nyström discretization of the coupled Laplace-domain boundary integral equations.

For one complex frequency ``s`` the Jacobian-weighted densities
``phi_j = G_r g_j`` of the compressional (speed ``c1``) and shear (speed
``c2``) single-layer potentials solve

    -phi1 + D(c1) phi1 + H(c2) phi2 = w1
     H(c1) phi1 + phi2 - D(c2) phi2 = w2

with ``D``, ``H`` the parametrized normal/tangential-derivative operators.
Their kernels carry a logarithmic singularity (Kress product quadrature with
weights ``R_j``) and ``H`` additionally a Cauchy ``1/sin(eta - theta)`` part
(weights ``T_j``).  The log coefficients contain ``I1(s r/c)``; at large
``Re(s)`` they are multiplied by a damping factor that equals 1 near the
diagonal, so the smooth remainder is not formed by cancelling exponentially
large terms.  The scattered displacement at exterior points is
``grad phi + curl psi``, evaluated with the trapezoidal rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .geometry import GeometryError, ObservationCircle, StarCurve
from .specfun import bessel_k1_i1, hankel1_1_rot

DIAGONAL_EPS = 1e-12
SOLVE_RESIDUAL_TOL = 1e-10
GLOBAL_SPLIT_GROWTH = 30.0
DAMP_ORDER = 12
DAMP_BOUND = 1e12


class SingularSystemError(RuntimeError):
    """Nyström matrix could not be factorized to the required residual."""

    def __init__(self, message, index=None, condition=None):
        super().__init__(message)
        self.index = index
        self.condition = condition


# ---------------------------------------------------------------------------
# quadrature weights
# ---------------------------------------------------------------------------
def kress_weights(n_tilde: int) -> tuple[np.ndarray, np.ndarray]:
    """Log-kernel weights ``R_j`` and Cauchy-kernel weights ``T_j``, ``j = 0..2n-1``.

    ``sum_j R_|i-j| f(eta_j)`` approximates ``int ln(4 sin^2((t_i - eta)/2)) f(eta) d eta``
    and ``-sum_j T_(i-j) f(eta_j)`` approximates ``p.v. int f(eta)/sin(eta - t_i) d eta``.
    ``T`` is odd and ``2n``-periodic in its index, so negative indices wrap.
    """
    n = int(n_tilde)
    if n < 1:
        raise ValueError("n_tilde must be >= 1")
    j = np.arange(2 * n)
    m = np.arange(1, n)
    R = -(2 * np.pi / n) * (np.cos(np.outer(j, m) * np.pi / n) @ (1.0 / m)) - (-1.0) ** j * np.pi / n**2
    m_top = (n - 3) // 2 if n % 2 else n // 2 - 1
    odd = 2 * np.arange(m_top + 1) + 1
    T = (2 * np.pi / n) * np.sin(np.outer(j, odd) * np.pi / n).sum(axis=1)
    return R, T


@dataclass(frozen=True)
class NystromGrid:
    """Equidistant nodes ``eta_j = pi j / n`` with the Kress weight matrices."""

    n_tilde: int
    R: np.ndarray = field(init=False, repr=False, compare=False)
    T: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        R, T = kress_weights(self.n_tilde)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)

    @property
    def size(self) -> int:
        return 2 * self.n_tilde

    @property
    def weight(self) -> float:
        return np.pi / self.n_tilde

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.pi * np.arange(self.size) / self.n_tilde

    @cached_property
    def R_matrix(self) -> np.ndarray:
        i = np.arange(self.size)
        return self.R[np.abs(i[:, None] - i[None, :])]

    @cached_property
    def T_matrix(self) -> np.ndarray:
        i = np.arange(self.size)
        return self.T[(i[:, None] - i[None, :]) % self.size]


@dataclass
class DensityPair:
    """Jacobian-weighted densities at the Nyström nodes for one frequency."""

    phi1: np.ndarray
    phi2: np.ndarray
    index: int | None = None

    def conj(self) -> "DensityPair":
        return DensityPair(np.conj(self.phi1), np.conj(self.phi2), self.index)


@dataclass
class FreqSystem:
    """Dense ``4n x 4n`` Nyström system for one frequency."""

    matrix: np.ndarray
    rhs: np.ndarray | None = None
    s: complex | None = None
    index: int | None = None


# ---------------------------------------------------------------------------
# boundary kernels
# ---------------------------------------------------------------------------
def _is_diagonal(theta, eta):
    d = np.abs(np.asarray(theta) - np.asarray(eta))
    return (d < DIAGONAL_EPS) | (np.abs(2 * np.pi - d) < DIAGONAL_EPS)


def _kernel_parts(theta, eta, s, c, curve: StarCurve):
    """All split kernel pieces on a broadcast grid of (theta, eta), with the split assembly would use."""
    theta, eta = np.broadcast_arrays(np.asarray(theta, float), np.asarray(eta, float))
    pt, d1t, d2t = curve.eval(theta)
    pe = curve.eval(eta)[0]
    sample = 2 * np.pi * np.arange(256) / 256
    ps, d1s, _ = curve.eval(sample)
    return _split_kernels(theta, eta, pt, d1t, d2t, pe, s, c, split_damping(ps, d1s, s, c))


def split_damping(p, d1, s, c) -> int:
    """Damping order for the log split on a curve sampled as ``(p, d1)``; 0 selects the global split."""
    if global_split_safe(s, c, float(np.max(np.hypot(d1[..., 0], d1[..., 1])))):
        return 0
    return damping_order(abs(s) * float(np.ptp(p, axis=0).max()) * np.sqrt(2.0) / c)


def global_split_safe(s, c, jac_max) -> bool:
    """Whether the global log split is numerically safe at frequency ``s``.

    The log coefficients ``D1``, ``H2`` contain ``I1(s r/c)``, which grows like
    ``exp(Re(s) r/c)``.  Once ``Re(s) pi jac_max / c`` exceeds
    ``GLOBAL_SPLIT_GROWTH`` the remainder ``D - D1 ln(...)`` would be formed by
    cancelling huge terms, and the damped split is used instead.
    """
    return float(np.real(s)) * np.pi * jac_max / c <= GLOBAL_SPLIT_GROWTH


def damping_order(zmax: float) -> int:
    """Largest order ``<= DAMP_ORDER`` whose damping polynomial stays below ``DAMP_BOUND`` at ``zmax``.

    For ``|z|`` large ``|exp(-z) T_m(z) I1(z)| ~ |z|^(m-1)/(m-1)!``, which is
    what bounds the entries when ``Im z`` dominates.
    """
    m = DAMP_ORDER
    while m > 2 and zmax ** (m - 1) / math.factorial(m - 1) > DAMP_BOUND:
        m -= 1
    return m


def damping_factor(z, order: int = DAMP_ORDER):
    """``exp(-z) sum_{k<order} z^k/k!``: equals 1 to ``O(z^order)`` and cancels the growth of I1."""
    z = np.asarray(z)
    tay = np.zeros_like(z)
    term = np.ones_like(z)
    for k in range(order):
        tay = tay + term
        term = term * z / (k + 1)
    return np.exp(-z) * tay


def _rotated_bessel(z, symmetric=False):
    """``H1(i z)`` and ``J1(i z)``.

    With ``symmetric`` the square matrix ``z`` is evaluated on its upper
    triangle only and mirrored.
    """
    if symmetric:
        iu = np.triu_indices(z.shape[0])
        k1u, i1u = bessel_k1_i1(z[iu])
        k1 = np.empty(z.shape, dtype=complex)
        i1 = np.empty(z.shape, dtype=complex)
        k1[iu] = k1u
        i1[iu] = i1u
        k1.T[iu] = k1u
        i1.T[iu] = i1u
    else:
        k1, i1 = bessel_k1_i1(z)
    return -2.0 / np.pi * k1, 1j * i1


def _split_kernels(theta, eta, pt, d1t, d2t, pe, s, c, damp=0, symmetric=False):
    diag = _is_diagonal(theta, eta)
    diff = pt - pe
    r2 = np.einsum("...k,...k->...", diff, diff)
    r2 = np.where(diag, 1.0, r2)
    r = np.sqrt(r2)
    n = np.stack([d1t[..., 1], -d1t[..., 0]], axis=-1)
    n_dot = np.einsum("...k,...k->...", n, diff)
    t_dot = np.einsum("...k,...k->...", d1t, diff)
    z = s * r / c
    h1, j1 = _rotated_bessel(z, symmetric)
    if damp:
        j1 = j1 * damping_factor(z, damp)
    logk = np.log(4.0 * np.sin(0.5 * (theta - eta)) ** 2 + diag)
    sin_et = np.sin(eta - theta)

    D = s / (2 * c) * n_dot * h1 / r
    D1 = 1j * s / (2 * np.pi * c) * n_dot * j1 / r
    D2 = D - D1 * logk

    H = s / (2 * c) * t_dot * h1 / r
    # H1 / sin(eta - theta) without the removable 0/0 at eta = theta + pi
    cauchy = -t_dot / (np.pi * r2)
    H1 = cauchy * sin_et
    H2 = 1j * s / (2 * np.pi * c) * t_dot * j1 / r
    H3 = H - cauchy - H2 * logk

    if np.any(diag):
        d1sq = np.einsum("...k,...k->...", d1t, d1t)
        n_dd = np.einsum("...k,...k->...", n, d2t)
        D1 = np.where(diag, 0.0, D1)
        D2 = np.where(diag, n_dd / (2 * np.pi * d1sq), D2)
        H1 = np.where(diag, 1.0 / np.pi, H1)
        H2 = np.where(diag, 0.0, H2)
        H3 = np.where(diag, 0.0, H3)
    return D1, D2, H1, H2, H3


def kernel_D(theta, eta, s, c, curve: StarCurve):
    """Split ``D~ = D1 ln(4 sin^2((theta-eta)/2)) + D2``; returns ``(D1, D2)``.

    At frequencies where the global split cancels badly, ``D1`` carries the
    damping factor (see :func:`split_damping`).
    """
    D1, D2, *_ = _kernel_parts(theta, eta, s, c, curve)
    return D1, D2


def kernel_H(theta, eta, s, c, curve: StarCurve):
    """Split ``H~ = H1/sin(eta-theta) + H2 ln(4 sin^2((theta-eta)/2)) + H3``."""
    _, _, H1, H2, H3 = _kernel_parts(theta, eta, s, c, curve)
    return H1, H2, H3


def kernel_D_direct(theta, eta, s, c, curve: StarCurve):
    """Unsplit off-diagonal kernel ``(s/2c) n(theta).(p(theta)-p(eta)) H1(i s r/c)/r``."""
    pt, d1t, _ = curve.eval(theta)
    pe = curve.eval(eta)[0]
    diff = pt - pe
    r = np.linalg.norm(diff, axis=-1)
    n = np.stack([d1t[..., 1], -d1t[..., 0]], axis=-1)
    return s / (2 * c) * np.einsum("...k,...k->...", n, diff) * hankel1_1_rot(s * r / c) / r


def kernel_H_direct(theta, eta, s, c, curve: StarCurve):
    """Unsplit off-diagonal kernel ``(s/2c) n_perp(theta).(p(theta)-p(eta)) H1(i s r/c)/r``."""
    pt, d1t, _ = curve.eval(theta)
    pe = curve.eval(eta)[0]
    diff = pt - pe
    r = np.linalg.norm(diff, axis=-1)
    return s / (2 * c) * np.einsum("...k,...k->...", d1t, diff) * hankel1_1_rot(s * r / c) / r


# ---------------------------------------------------------------------------
# assembly and solve
# ---------------------------------------------------------------------------
def _operator_blocks(curve: StarCurve, s, c, grid: NystromGrid):
    t = grid.nodes
    p, d1, d2 = curve.eval(t)
    TH, ET = np.meshgrid(t, t, indexing="ij")
    damp = split_damping(p, d1, s, c)
    D1, D2, H1, H2, H3 = _split_kernels(
        TH, ET, p[:, None, :], d1[:, None, :], d2[:, None, :], p[None, :, :], s, c, damp, symmetric=True
    )
    w = grid.weight
    X = grid.R_matrix * D1 + w * D2
    Y = -grid.T_matrix * H1 + grid.R_matrix * H2 + w * H3
    return X, Y


def assemble_system(curve: StarCurve, s, c1: float, c2: float, grid: NystromGrid, rhs=None, index=None) -> FreqSystem:
    """Block matrix ``[[-I + X(c1), Y(c2)], [Y(c1), I - X(c2)]]``."""
    X1, Y1 = _operator_blocks(curve, s, c1, grid)
    X2, Y2 = _operator_blocks(curve, s, c2, grid)
    I = np.eye(grid.size)
    A = np.block([[-I + X1, Y2], [Y1, I - X2]])
    if rhs is not None:
        rhs = np.concatenate([np.asarray(rhs[0]), np.asarray(rhs[1])])
    return FreqSystem(A, rhs, s, index)


def solve_frequency(system: FreqSystem, rhs=None) -> DensityPair:
    """Dense LU solve of a :class:`FreqSystem`.

    ``rhs`` overrides ``system.rhs`` and may be given as the pair ``(w1, w2)``.
    """
    b = system.rhs if rhs is None else np.concatenate([np.asarray(rhs[0]), np.asarray(rhs[1])])
    if b is None:
        raise ValueError("system has no right-hand side")
    A = system.matrix
    try:
        with warnings.catch_warnings():
            # an exactly zero pivot is reported as a warning; treat it as singular
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(A, check_finite=True)
        x = scipy.linalg.lu_solve(lu, b)
    except (ValueError, np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularSystemError(f"factorization failed at frequency {system.index}: {exc}",
                                  system.index) from exc
    nb = np.linalg.norm(b, 1)
    if nb > 0:
        r = b - A @ x
        # normwise backward error: the relative residual itself cannot drop below
        # eps * cond in double precision, which is reached near resonant frequencies
        scale = np.linalg.norm(A, 1) * np.linalg.norm(x, 1) + nb
        res = np.linalg.norm(r, 1) / scale
        if not np.isfinite(res) or res > SOLVE_RESIDUAL_TOL:
            cond = np.linalg.cond(A)
            raise SingularSystemError(
                f"Nystrom system at frequency {system.index} is numerically singular "
                f"(backward error {res:.2e}, condition ~{cond:.2e})",
                system.index, cond,
            )
    n = A.shape[0] // 2
    return DensityPair(x[:n], x[n:], system.index)


# ---------------------------------------------------------------------------
# exterior field
# ---------------------------------------------------------------------------
@dataclass
class ObservationGeometry:
    """Differences ``p_B(s_i) - p_D(eta_j)`` and distances, shape ``(2 n_bar, 2 n)``."""

    diff: np.ndarray
    r: np.ndarray

    @classmethod
    def build(cls, curve: StarCurve, obs: ObservationCircle, grid: NystromGrid):
        pb = obs.points()
        pd = curve.eval(grid.nodes)[0]
        diff = pb[:, None, :] - pd[None, :, :]
        r = np.hypot(diff[..., 0], diff[..., 1])
        if np.min(r) <= 0.0:
            raise GeometryError("observation points touch the boundary")
        return cls(diff, r)


def field_kernels(geo: ObservationGeometry, s, c):
    """``N~`` and ``T~`` kernels, each of shape ``(2 n_bar, 2 n, 2)``."""
    h1 = hankel1_1_rot(s * geo.r / c)
    g = s / (4 * c) * h1 / geo.r
    Nk = g[..., None] * geo.diff
    Tk = g[..., None] * np.stack([geo.diff[..., 1], -geo.diff[..., 0]], axis=-1)
    return Nk, Tk


def eval_observation(curve: StarCurve, obs: ObservationCircle, s, c1: float, c2: float,
                     density: DensityPair, grid: NystromGrid, geo: ObservationGeometry | None = None) -> np.ndarray:
    """Scattered field ``N phi1 + T phi2`` at the observation points, shape ``(2 n_bar, 2)``."""
    if geo is None:
        obs.check_encloses(curve)
        geo = ObservationGeometry.build(curve, obs, grid)
    N1, _ = field_kernels(geo, s, c1)
    _, T2 = field_kernels(geo, s, c2)
    w = grid.weight
    return w * (np.einsum("ijk,j->ik", N1, density.phi1) + np.einsum("ijk,j->ik", T2, density.phi2))


def point_field(points, curve: StarCurve, s, c1: float, c2: float, density: DensityPair, grid: NystromGrid):
    """Scattered field at arbitrary exterior points, shape ``(P, 2)``."""
    points = np.atleast_2d(points)
    pd = curve.eval(grid.nodes)[0]
    diff = points[:, None, :] - pd[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    geo = ObservationGeometry(diff, r)
    N1, _ = field_kernels(geo, s, c1)
    _, T2 = field_kernels(geo, s, c2)
    w = grid.weight
    return w * (np.einsum("ijk,j->ik", N1, density.phi1) + np.einsum("ijk,j->ik", T2, density.phi2))
