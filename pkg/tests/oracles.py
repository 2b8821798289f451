"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import mpmath
import numpy as np

mpmath.mp.dps = 30


def besselk(order: int, z) -> complex:
    return complex(mpmath.besselk(order, mpmath.mpc(complex(z))))


def besseli(order: int, z) -> complex:
    return complex(mpmath.besseli(order, mpmath.mpc(complex(z))))


def vec(fn, order, zs) -> np.ndarray:
    return np.array([fn(order, z) for z in np.ravel(zs)]).reshape(np.shape(zs))


def right_half_plane(n: int, rmin: float, rmax: float, max_arg: float, seed: int = 0) -> np.ndarray:
    """Log-uniform modulus, uniform argument in ``(-max_arg, max_arg)``."""
    rng = np.random.default_rng(seed)
    rho = np.exp(rng.uniform(np.log(rmin), np.log(rmax), n))
    phi = rng.uniform(-max_arg, max_arg, n)
    return rho * np.exp(1j * phi)


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)
