"""Star-shaped boundary curves and the observation circle.

A curve is ``p(theta) = center + r(theta) (cos theta, sin theta)``.  The radial
function is either one of the catalogue shapes (apple, peanut, circle) with
hand-differentiated closed forms, or a trigonometric polynomial

    r(theta) = sum_{m=0}^{M} alpha_m cos(m theta) + sum_{m=1}^{M} beta_m sin(m theta)

which is the representation used for reconstruction iterates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Union

import numpy as np

STAR_FLOOR = 0.05
STAR_SAMPLES = 256


class GeometryError(ValueError):
    """Invalid or degenerate curve configuration."""


# ---------------------------------------------------------------------------
# radial functions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Builtin:
    """Catalogue radial function: ``apple``, ``peanut`` or ``circle`` (radius ``r0``)."""

    kind: str
    r0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("apple", "peanut", "circle"):
            raise GeometryError(f"unknown builtin shape {self.kind!r}")
        if self.kind == "circle" and not self.r0 > 0:
            raise GeometryError("circle radius must be positive")

    def eval(self, theta):
        """Return ``(r, r', r'')`` at ``theta``."""
        t = np.asarray(theta, dtype=float)
        c, s = np.cos(t), np.sin(t)
        if self.kind == "circle":
            r = np.full_like(t, self.r0)
            return r, np.zeros_like(t), np.zeros_like(t)
        if self.kind == "apple":
            s2, c2 = np.sin(2 * t), np.cos(2 * t)
            num = 1.0 + 0.9 * c + 0.1 * s2
            num1 = -0.9 * s + 0.2 * c2
            num2 = -0.9 * c - 0.4 * s2
            den = 1.0 + 0.75 * c
            den1 = -0.75 * s
            den2 = -0.75 * c
            r = num / den
            w = num1 * den - num * den1
            r1 = w / den**2
            w1 = num2 * den - num * den2
            r2 = w1 / den**2 - 2.0 * den1 * w / den**3
            return r, r1, r2
        # peanut: r = sqrt(g), g = 0.25 cos^2 + sin^2
        g = 0.25 * c * c + s * s
        g1 = 0.75 * np.sin(2 * t)
        g2 = 1.5 * np.cos(2 * t)
        r = np.sqrt(g)
        r1 = g1 / (2.0 * r)
        r2 = g2 / (2.0 * r) - g1 * g1 / (4.0 * r**3)
        return r, r1, r2


@dataclass(frozen=True)
class TrigPoly:
    """Trigonometric polynomial radial function of degree ``M = len(beta)``."""

    alpha: tuple
    beta: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if len(self.alpha) != len(self.beta) + 1:
            raise GeometryError("TrigPoly needs len(alpha) == len(beta) + 1")

    @property
    def degree(self) -> int:
        return len(self.beta)

    @classmethod
    def circle(cls, r0: float, degree: int) -> "TrigPoly":
        return cls((r0,) + (0.0,) * degree, (0.0,) * degree)

    def eval(self, theta):
        t = np.asarray(theta, dtype=float)
        m = np.arange(self.degree + 1)
        mt = np.multiply.outer(t, m)
        cm, sm = np.cos(mt), np.sin(mt)
        a = np.asarray(self.alpha)
        b = np.concatenate([[0.0], self.beta])
        r = cm @ a + sm @ b
        r1 = -sm @ (m * a) + cm @ (m * b)
        r2 = -(cm @ (m**2 * a) + sm @ (m**2 * b))
        return r, r1, r2


RadialFunction = Union[Builtin, TrigPoly]


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class StarCurve:
    """Star-shaped curve ``center + r(theta) x_hat(theta)``.

    Construction rejects curves whose sampled radius falls to ``STAR_FLOOR``
    or below.
    """

    center: tuple
    radial: RadialFunction
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.check and self.min_radius() <= STAR_FLOOR:
            raise GeometryError(
                f"curve is not star-shaped with margin: min r = {self.min_radius():.4g} <= {STAR_FLOOR}"
            )

    def min_radius(self, samples: int = STAR_SAMPLES) -> float:
        theta = 2 * np.pi * np.arange(samples) / samples
        return float(np.min(self.radial.eval(theta)[0]))

    def eval(self, theta):
        """Position and first two theta-derivatives, each of shape ``theta.shape + (2,)``."""
        t = np.asarray(theta, dtype=float)
        r, r1, r2 = self.radial.eval(t)
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        e_perp = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        p = np.asarray(self.center) + r[..., None] * e
        d1 = r1[..., None] * e + r[..., None] * e_perp
        d2 = (r2 - r)[..., None] * e + 2.0 * r1[..., None] * e_perp
        return p, d1, d2

    def frame(self, theta):
        """Jacobian ``|p'|`` with the (non-normalized) normal and tangent.

        ``n = (p'_2, -p'_1)`` points outward for counter-clockwise curves,
        ``n_perp = p'``; both have length ``G_r``.
        """
        _, d1, _ = self.eval(theta)
        G = np.hypot(d1[..., 0], d1[..., 1])
        if np.any(G <= 0.0):
            raise GeometryError("degenerate curve: zero Jacobian")
        n = np.stack([d1[..., 1], -d1[..., 0]], axis=-1)
        return G, n, d1.copy()

    def polyline(self, samples: int = 256, closed: bool = True) -> np.ndarray:
        theta = 2 * np.pi * np.arange(samples) / samples
        p = self.eval(theta)[0]
        if closed:
            p = np.vstack([p, p[:1]])
        return p

    def to_trig(self, degree: int) -> "StarCurve":
        """Least-squares projection of the radial function onto degree ``degree``."""
        if isinstance(self.radial, TrigPoly) and self.radial.degree == degree:
            return self
        alpha, beta = fit_trig(self.radial.eval, degree)
        return StarCurve(self.center, TrigPoly(alpha, beta))


def curve_eval(curve: StarCurve, theta):
    """``(point, d1, d2)`` of ``curve`` at ``theta``."""
    return curve.eval(theta)


def curve_frame(curve: StarCurve, theta):
    """``(G_r, n, n_perp)`` of ``curve`` at ``theta``."""
    return curve.frame(theta)


def fit_trig(radial_eval, degree: int, samples: int | None = None):
    """Fit trigonometric coefficients to a radial function by least squares on a uniform grid."""
    n = samples or max(4 * degree + 4, 64)
    theta = 2 * np.pi * np.arange(n) / n
    r = radial_eval(theta)[0] if callable(radial_eval) else np.asarray(radial_eval)
    m = np.arange(degree + 1)
    A = np.hstack([np.cos(np.outer(theta, m)), np.sin(np.outer(theta, m[1:]))])
    coef = np.linalg.lstsq(A, r, rcond=None)[0]
    return tuple(coef[: degree + 1]), tuple(coef[degree + 1 :])


def circle(r0: float, center=(0.0, 0.0)) -> StarCurve:
    return StarCurve(center, Builtin("circle", r0))


def apple(center=(0.0, 0.0)) -> StarCurve:
    return StarCurve(center, Builtin("apple"))


def peanut(center=(0.0, 0.0)) -> StarCurve:
    return StarCurve(center, Builtin("peanut"))


# ---------------------------------------------------------------------------
# observation circle
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ObservationCircle:
    """``2 n_bar`` points ``b + R (cos s_i, sin s_i)``, ``s_i = pi i / n_bar``."""

    center: tuple = (0.0, 0.0)
    radius: float = 2.0
    n_bar: int = 30

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.radius <= 0 or self.n_bar < 1:
            raise GeometryError("observation circle needs R > 0 and n_bar >= 1")

    @property
    def count(self) -> int:
        return 2 * self.n_bar

    @property
    def angles(self) -> np.ndarray:
        return np.pi * np.arange(self.count) / self.n_bar

    def points(self) -> np.ndarray:
        a = self.angles
        return np.asarray(self.center) + self.radius * np.stack([np.cos(a), np.sin(a)], axis=-1)

    def check_encloses(self, curve: StarCurve, samples: int = 512) -> float:
        """Minimum distance between ``curve`` and the circle; raises if not strictly exterior."""
        p = curve.polyline(samples, closed=False)
        rho = np.hypot(*(p - np.asarray(self.center)).T)
        gap = float(self.radius - rho.max())
        if gap <= 0.0:
            raise GeometryError("observation circle must strictly enclose the obstacle")
        return gap


# ---------------------------------------------------------------------------
# metrics and serialization
# ---------------------------------------------------------------------------
def hausdorff_distance(a: StarCurve, b: StarCurve, samples: int = 512) -> float:
    """Symmetric discrete Hausdorff distance between two sampled curves."""
    if samples < 16:
        raise ValueError("hausdorff_distance needs at least 16 samples")
    pa = a.polyline(samples, closed=False)
    pb = b.polyline(samples, closed=False)
    d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def curve_to_dict(curve: StarCurve) -> dict:
    out = {"center": list(curve.center)}
    rad = curve.radial
    if isinstance(rad, TrigPoly):
        out.update(kind="trig", alpha=list(rad.alpha), beta=list(rad.beta))
    else:
        out["kind"] = rad.kind
        if rad.kind == "circle":
            out["r0"] = rad.r0
    return out


def curve_from_dict(d: dict) -> StarCurve:
    try:
        kind = d["kind"]
        center = d.get("center", (0.0, 0.0))
        if kind == "trig":
            return StarCurve(center, TrigPoly(d["alpha"], d["beta"]))
        if kind == "circle":
            return StarCurve(center, Builtin("circle", float(d["r0"])))
        return StarCurve(center, Builtin(kind))
    except KeyError as exc:
        raise GeometryError(f"curve description is missing field {exc}") from None


def write_polyline_csv(path, curve: StarCurve, samples: int = 256) -> None:
    """Closed polyline with columns ``theta, x, y`` (first point repeated last)."""
    theta = 2 * np.pi * np.arange(samples + 1) / samples
    theta[-1] = 0.0
    p = curve.eval(theta)[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "x", "y"])
        for t, (x, y) in zip(theta, p):
            w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}"])
