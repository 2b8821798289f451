"""BDF2 convolution quadrature: contour frequencies and the scaled DFT.

With ``dt = T/N``, ``zeta = exp(2 pi i/(N+1))`` and contour radius ``lam`` the
CQ frequencies are ``s_k = gamma(lam zeta^-k)/dt`` where
``gamma(z) = (z^2 - 4z + 3)/2``.  A causal time sequence ``x_0..x_N`` maps to
``xhat_l = sum_n lam^n x_n zeta^(-ln)`` and a convolution with a Laplace-domain
operator ``W`` becomes the pointwise product ``W(s_l) xhat_l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

AUTO_ACCURACY = 1e-12


def bdf2_gamma(zeta):
    """Generating polynomial of BDF2, ``(zeta^2 - 4 zeta + 3)/2``."""
    zeta = np.asarray(zeta, dtype=complex) if np.iscomplexobj(zeta) else np.asarray(zeta)
    return 0.5 * (zeta * zeta - 4.0 * zeta + 3.0)


def auto_radius(N: int, accuracy: float = AUTO_ACCURACY) -> float:
    """Contour radius ``accuracy^(1/(2(N+1)))``."""
    return accuracy ** (1.0 / (2.0 * (N + 1)))


@dataclass(frozen=True)
class CQGrid:
    """Time grid ``t_n = n dt`` (``n = 0..N``) with its CQ contour."""

    T: float
    N: int
    lam: float

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def size(self) -> int:
        return self.N + 1

    @property
    def zeta(self) -> complex:
        return np.exp(2j * np.pi / (self.N + 1))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.N + 1)

    @property
    def s(self) -> np.ndarray:
        k = np.arange(self.N + 1)
        return bdf2_gamma(self.lam * np.exp(-2j * np.pi * k / (self.N + 1))) / self.dt

    def half_indices(self) -> np.ndarray:
        """Frequency indices ``0..floor((N+1)/2)``; the rest follow by conjugation."""
        return np.arange((self.N + 1) // 2 + 1)


def make_grid(T: float, N: int, lam="auto") -> CQGrid:
    """Build a :class:`CQGrid`; ``lam="auto"`` picks :func:`auto_radius`."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be an integer >= 1, got {N}")
    N = int(N)
    if lam is None or lam == "auto":
        lam = auto_radius(N)
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise ValueError(f"contour radius must lie in (0, 1), got {lam}")
    return CQGrid(float(T), N, lam)


def scaled_dft(x, lam: float, axis: int = 0) -> np.ndarray:
    """``xhat_l = sum_n lam^n x_n zeta^(-l n)`` along ``axis``."""
    x = np.asarray(x)
    n = x.shape[axis]
    shape = [1] * x.ndim
    shape[axis] = n
    w = (lam ** np.arange(n)).reshape(shape)
    return np.fft.fft(x * w, axis=axis)


def inverse_scaled_dft(xhat, lam: float, axis: int = 0) -> np.ndarray:
    """``x_n = lam^-n/(N+1) sum_l xhat_l zeta^(n l)`` along ``axis``."""
    xhat = np.asarray(xhat)
    n = xhat.shape[axis]
    shape = [1] * xhat.ndim
    shape[axis] = n
    w = (lam ** -np.arange(n, dtype=float)).reshape(shape)
    return np.fft.ifft(xhat, axis=axis) * w


def scaled_dft_at(x, lam: float, l: int, axis: int = 0) -> np.ndarray:
    """Single frequency ``l`` of :func:`scaled_dft` by direct summation."""
    x = np.asarray(x)
    n = x.shape[axis]
    k = np.arange(n)
    w = lam**k * np.exp(-2j * np.pi * l * k / n)
    return np.tensordot(w, np.moveaxis(x, axis, 0), axes=(0, 0))


def realify(xhalf, N: int, axis: int = 0) -> np.ndarray:
    """Complete frequencies ``0..floor((N+1)/2)`` with ``xhat_{N+1-l} = conj(xhat_l)``."""
    xhalf = np.moveaxis(np.asarray(xhalf, dtype=complex), axis, 0)
    L = N + 1
    need = L // 2 + 1
    if xhalf.shape[0] < need:
        raise ValueError(f"need {need} frequencies for N={N}, got {xhalf.shape[0]}")
    full = np.empty((L,) + xhalf.shape[1:], dtype=complex)
    full[:need] = xhalf[:need]
    for l in range(need, L):
        full[l] = np.conj(xhalf[L - l])
    return np.moveaxis(full, 0, axis)


def cq_convolve(W: Callable, g, grid: CQGrid) -> np.ndarray:
    """Apply the CQ discretization of a scalar operator ``W(s)`` to samples ``g_0..g_N``."""
    g = np.asarray(g, dtype=float)
    ghat = scaled_dft(g, grid.lam)
    y = inverse_scaled_dft(W(grid.s) * ghat, grid.lam)
    return y.real
