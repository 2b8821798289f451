"""Modified Bessel functions of complex argument.

Only the handful of functions needed by the Laplace-domain kernels are
provided: K0, K1, I0, I1 for arguments with positive real part, plus
Hankel-form wrappers so kernel code can be written in the same notation as
the boundary integral formulas,

    H0(iz) = -(2i/pi) K0(z),   H1(iz) = -(2/pi) K1(z),   J1(iz) = i I1(z).

Evaluation strategy (vectorized over numpy arrays):

* ``|z| <= 2``: ascending power series for I0, I1 and the log-series for
  K0, K1.
* ``2 < |z| < 25``: Steed's continued fraction for K0 (Temme / Thompson-Barnett
  scheme) which also yields K1.
* ``|z| >= 25``: Hankel asymptotic expansion for K0, K1.
* I0, I1 for ``|z| > 2`` come from the ratio I1/I0 (Lentz continued fraction)
  combined with the Wronskian ``I0 K1 + I1 K0 = 1/z``.
"""

from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_RADIUS = 2.0
ASYMPTOTIC_RADIUS = 25.0
MAX_ARG = 700.0

_EPS = 1e-16
_MAX_CF_ITER = 2000


class BesselDomainError(ValueError):
    """Argument outside the supported half-plane (Re z <= 0 or z == 0)."""


class BesselOverflowError(OverflowError):
    """|z| beyond the range where I1 is representable in double precision."""


def _as_complex(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def _check_right_half_plane(z: np.ndarray) -> None:
    if np.any(z.real <= 0.0):
        raise BesselDomainError("modified Bessel K requires Re(z) > 0")


# ---------------------------------------------------------------------------
# small |z|: power series
# ---------------------------------------------------------------------------
def _series_I01(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = 0.25 * z * z
    t0 = np.ones_like(z)
    t1 = 0.5 * z
    i0 = t0.copy()
    i1 = t1.copy()
    for k in range(1, 40):
        t0 = t0 * q / (k * k)
        t1 = t1 * q / (k * (k + 1))
        i0 += t0
        i1 += t1
        if np.all(np.abs(t0) <= _EPS * np.abs(i0)) and np.all(np.abs(t1) <= _EPS * np.abs(i1)):
            break
    return i0, i1


def _series_K01(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i0, i1 = _series_I01(z)
    q = 0.25 * z * z
    lg = np.log(0.5 * z)
    # K0 = -(ln(z/2)+gamma) I0 + sum_k H_k q^k / (k!)^2
    # K1 = 1/z + ln(z/2) I1 - (z/4) sum_k [psi(k+1)+psi(k+2)] q^k / (k!(k+1)!)
    t = np.ones_like(z)
    harm = 0.0
    s0 = np.zeros_like(z)
    s1 = np.full_like(z, (-EULER_GAMMA) + (1.0 - EULER_GAMMA))
    for k in range(1, 40):
        t = t * q / (k * k)
        harm += 1.0 / k
        s0 += harm * t
        # term for K1 uses q^k/(k!(k+1)!) = t/(k+1)
        s1 += (2.0 * (harm - EULER_GAMMA) + 1.0 / (k + 1)) * t / (k + 1)
        if np.all(np.abs(t) <= _EPS):
            break
    k0 = -(lg + EULER_GAMMA) * i0 + s0
    k1 = 1.0 / z + lg * i1 - 0.25 * z * s1
    return k0, k1


# ---------------------------------------------------------------------------
# intermediate |z|: Steed's continued fraction for K
# ---------------------------------------------------------------------------
def _steed_K01(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(z)
    q2 = np.ones_like(z)
    a1 = 0.25
    q = np.full_like(z, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    # converged entries are retired so late iterations only touch slow ones
    pos = np.arange(z.size)
    h_out = np.empty_like(z)
    s_out = np.empty_like(z)
    for i in range(1, _MAX_CF_ITER):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        done = np.abs(dels) <= _EPS * np.abs(s)
        if done.any():
            h_out[pos[done]] = h[done]
            s_out[pos[done]] = s[done]
            keep = ~done
            if not keep.any():
                break
            pos, b, d, h, delh, q1, q2, q, s = (
                x[keep] for x in (pos, b, d, h, delh, q1, q2, q, s)
            )
    else:
        h_out[pos] = h
        s_out[pos] = s
    h_out = a1 * h_out
    k0 = np.sqrt(np.pi / (2.0 * z)) * np.exp(-z) / s_out
    k1 = k0 * (z + 0.5 - h_out) / z
    return k0, k1


# ---------------------------------------------------------------------------
# large |z|: Hankel asymptotic expansion
# ---------------------------------------------------------------------------
def _asymptotic_K01(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t0 = np.ones_like(z)
    t1 = np.ones_like(z)
    s0 = t0.copy()
    s1 = t1.copy()
    inv8z = 1.0 / (8.0 * z)
    for k in range(1, 40):
        odd = (2 * k - 1) ** 2
        t0 = t0 * (0.0 - odd) * inv8z / k
        t1 = t1 * (4.0 - odd) * inv8z / k
        s0 += t0
        s1 += t1
        if np.all(np.abs(t0) <= _EPS * np.abs(s0)) and np.all(np.abs(t1) <= _EPS * np.abs(s1)):
            break
    pref = np.sqrt(np.pi / (2.0 * z)) * np.exp(-z)
    return pref * s0, pref * s1


def _K01(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k0 = np.empty_like(z)
    k1 = np.empty_like(z)
    az = np.abs(z)
    small = az <= SERIES_RADIUS
    large = az >= ASYMPTOTIC_RADIUS
    mid = ~(small | large)
    if small.any():
        k0[small], k1[small] = _series_K01(z[small])
    if mid.any():
        k0[mid], k1[mid] = _steed_K01(z[mid])
    if large.any():
        k0[large], k1[large] = _asymptotic_K01(z[large])
    return k0, k1


def _ratio_I1_I0(z: np.ndarray) -> np.ndarray:
    """I1(z)/I0(z) = 1/(2/z + 1/(4/z + 1/(6/z + ...))) by modified Lentz."""
    tiny = 1e-300
    f = np.full_like(z, tiny)
    C = f.copy()
    D = np.zeros_like(z)
    zi = 1.0 / z
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _MAX_CF_ITER + int(np.max(np.abs(z), initial=0.0))):
        bk = 2.0 * k * zi
        ak = 1.0
        D = bk + ak * D
        D = np.where(np.abs(D) < tiny, tiny, D)
        C = bk + ak / C
        C = np.where(np.abs(C) < tiny, tiny, C)
        D = 1.0 / D
        delta = C * D
        f = np.where(active, f * delta, f)
        active &= np.abs(delta - 1.0) > _EPS
        if not active.any():
            break
    return f


def _I01(z: np.ndarray, k01=None) -> tuple[np.ndarray, np.ndarray]:
    """I0, I1; ``k01`` may supply K0, K1 at ``z`` (valid where Re z > 0)."""
    i0 = np.empty_like(z)
    i1 = np.empty_like(z)
    az = np.abs(z)
    small = az <= SERIES_RADIUS
    if small.any():
        i0[small], i1[small] = _series_I01(z[small])
    big = ~small
    if big.any():
        zb = z[big]
        zr = np.where(zb.real <= 0.0, -zb, zb)
        if k01 is not None and np.all(zb.real > 0.0):
            k0, k1 = k01[0][big], k01[1][big]
        else:
            k0, k1 = _K01(zr)
        ratio = _ratio_I1_I0(zr)
        b0 = 1.0 / (zr * (k1 + ratio * k0))
        b1 = ratio * b0
        flip = zb.real <= 0.0
        # I0 even, I1 odd
        i0[big] = b0
        i1[big] = np.where(flip, -b1, b1)
    return i0, i1


def _prepare_K(z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = _as_complex(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    _check_right_half_plane(z)
    return z, np.abs(z) > MAX_ARG, scalar


def bessel_k01(z) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(K0(z), K1(z))`` for ``Re(z) > 0``.

    Arguments with ``|z| > 700`` underflow to exactly zero.
    """
    z, under, scalar = _prepare_K(z)
    zz = np.where(under, 1.0, z)
    k0, k1 = _K01(zz)
    k0[under] = 0.0
    k1[under] = 0.0
    if scalar:
        return k0[0], k1[0]
    return k0, k1


def underflows(z) -> np.ndarray:
    """Flag arguments where K is returned as an exact zero."""
    return np.abs(_as_complex(z)) > MAX_ARG


def mod_bessel_K(order: int, z):
    """Modified Bessel function of the second kind, order 0 or 1.

    Parameters
    ----------
    order : {0, 1}
    z : complex or ndarray
        Argument with positive real part.

    Returns
    -------
    complex or ndarray
        ``K_order(z)``; exactly zero (underflow) for ``|z| > 700``.
    """
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    k0, k1 = bessel_k01(z)
    return k0 if order == 0 else k1


def bessel_i01(z) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(I0(z), I1(z))`` for finite ``|z| <= 700``."""
    z = _as_complex(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(np.abs(z) > MAX_ARG):
        raise BesselOverflowError("|z| > 700: I0/I1 overflow double precision")
    zero_re = (z.real == 0.0) & (np.abs(z) > SERIES_RADIUS)
    if np.any(zero_re):
        raise BesselDomainError("I0/I1 continued fraction path needs Re(z) != 0 for |z| > 2")
    i0, i1 = _I01(z)
    if scalar:
        return i0[0], i1[0]
    return i0, i1


def bessel_k1_i1(z, need_i=None) -> tuple[np.ndarray, np.ndarray]:
    """``(K1(z), I1(z))`` for ``Re(z) > 0`` sharing one K evaluation.

    ``need_i`` is an optional boolean mask; I1 is only computed there (zero
    elsewhere), which lets callers skip entries where it would overflow.
    """
    z, under, scalar = _prepare_K(z)
    zz = np.where(under, 1.0, z)
    k0, k1 = _K01(zz)
    k1[under] = 0.0
    mask = np.ones(z.shape, dtype=bool) if need_i is None else np.atleast_1d(np.asarray(need_i, dtype=bool))
    if np.any(mask & under):
        raise BesselOverflowError("|z| > 700: I1 overflows double precision")
    i1 = np.zeros_like(z)
    if mask.any():
        i1[mask] = _I01(z[mask], (k0[mask], k1[mask]))[1]
    if scalar:
        return k1[0], i1[0]
    return k1, i1


def mod_bessel_I1(z):
    """Modified Bessel function of the first kind, order 1."""
    return bessel_i01(z)[1]


def mod_bessel_I0(z):
    """Modified Bessel function of the first kind, order 0."""
    return bessel_i01(z)[0]


# ---------------------------------------------------------------------------
# Hankel-form accessors: argument is the rotated one, w = i z
# ---------------------------------------------------------------------------
def hankel1_0_rot(z):
    """``H0^(1)(i z)`` for Re(z) > 0."""
    return -2j / np.pi * mod_bessel_K(0, z)


def hankel1_1_rot(z):
    """``H1^(1)(i z)`` for Re(z) > 0."""
    return -2.0 / np.pi * mod_bessel_K(1, z)


def bessel_j1_rot(z):
    """``J1(i z)`` via ``i I1(z)``."""
    return 1j * mod_bessel_I1(z)


def hankel_kernel_K(r, c: float, s):
    """Laplace-domain fundamental solution of the scalar wave equation.

    ``K(r; c, s) = (i/4) H0^(1)(i s r / c) = K0(s r / c) / (2 pi)``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("hankel_kernel_K requires r > 0")
    if c <= 0.0:
        raise ValueError("wave speed must be positive")
    return mod_bessel_K(0, s * r / c) / (2.0 * np.pi)
