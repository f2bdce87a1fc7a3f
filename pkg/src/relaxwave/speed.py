"""Speed curves ``a(c)`` at fixed ``(b, d, tau)`` and their fold point.

For a fixed speed the construction gives exactly one threshold, so the curve
is traced in ``c`` and inverted afterwards. The fold ``(a_star, c_star)`` is
the maximum of ``a(c)``; below it each threshold has a slow and a fast wave.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import RelaxwaveError
from .poly import ModelParams
from .profile import ode_residual, wave_at_speed

log = logging.getLogger(__name__)

MERGE_TOL = 1e-10
RESIDUAL_TOL = 1e-8


class EmptyCurve(RelaxwaveError):
    pass


class MonotoneCurve(RelaxwaveError):
    pass


@dataclass(frozen=True)
class SpeedPoint:
    c: float
    a: float
    s: float
    z1: float
    alpha3: float


@dataclass
class SpeedCurve:
    b: Optional[float]
    d: Optional[float]
    tau: Optional[float]
    points: list[SpeedPoint]
    gaps: list[tuple[float, str]] = field(default_factory=list)
    a_star: Optional[float] = None
    c_star: Optional[float] = None

    @property
    def c(self) -> np.ndarray:
        return np.array([p.c for p in self.points])

    @property
    def a(self) -> np.ndarray:
        return np.array([p.a for p in self.points])

    def a_at(self, c: float) -> float:
        """Threshold on the curve at speed ``c`` (recomputed, not interpolated)."""
        return wave_at_speed(self.b, self.d, self.tau, c).a


def default_c_grid(tau: float, n: int = 400, c_min: float = 0.01, c_max: Optional[float] = None):
    if c_max is None:
        c_max = 0.999 / math.sqrt(tau) if tau > 0 else 10.0
    return np.geomspace(c_min, c_max, n)


def _trace_point(b, d, tau, c, validate):
    prof = wave_at_speed(b, d, tau, c)
    if validate:
        z = np.linspace(-5.0 / prof.alphas.r3.real, prof.z1 + 10 * prof.decay_length(), 200)
        z = z[(np.abs(z) > 1e-6) & (np.abs(z - prof.z1) > 1e-6)]
        res = np.abs(ode_residual(prof, z)).max()
        if res >= RESIDUAL_TOL:
            raise RelaxwaveError(f"profile residual {res:.3e} at c={c}")
    return SpeedPoint(c, prof.a, prof.s, prof.z1, prof.alphas.r3.real)


def trace_curve(b: float, d: float, tau: float, c_grid=None, validate: bool = True) -> SpeedCurve:
    """Threshold ``a(c)`` over ``c_grid``; speeds without a wave become gaps."""
    if c_grid is None:
        c_grid = default_c_grid(tau)
    c_grid = np.asarray(c_grid, dtype=float)
    if np.any(np.diff(c_grid) <= 0):
        raise ValueError("c_grid must be strictly ascending")
    if tau > 0:
        # stay strictly inside the admissible range
        c_grid = c_grid[c_grid < (1 - 1e-6) / math.sqrt(tau)]
    points, gaps = [], []
    for c in c_grid:
        try:
            points.append(_trace_point(b, d, tau, float(c), validate))
        except RelaxwaveError as e:
            gaps.append((float(c), str(e)))
    if not points:
        raise EmptyCurve(f"no traveling wave for any speed (b={b}, d={d}, tau={tau})")
    curve = SpeedCurve(b, d, tau, points, gaps)
    try:
        curve.a_star, curve.c_star = find_fold(curve)
    except MonotoneCurve as e:
        log.warning("%s", e)
    return curve


def find_fold(curve: SpeedCurve, a_func: Optional[Callable[[float], float]] = None):
    """Maximum ``(a_star, c_star)`` of the traced curve.

    Parabolic refinement of the discrete maximum, then a bounded
    golden-section polish on ``a_func`` (defaults to recomputing ``a(c)``).
    """
    if len(curve.points) < 3:
        raise MonotoneCurve("need at least 3 points to locate a fold")
    cs, as_ = curve.c, curve.a
    i = int(np.argmax(as_))
    if i == 0 or i == len(cs) - 1:
        raise MonotoneCurve("a(c) has no interior maximum on the traced range")
    x0, x1, x2 = cs[i - 1 : i + 2]
    y0, y1, y2 = as_[i - 1 : i + 2]
    num = (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
    den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
    c_par = x1 - 0.5 * num / den if den != 0 else x1
    if not x0 < c_par < x2:
        c_par = x1
    if a_func is None and curve.b is not None:
        a_func = curve.a_at
    if a_func is None:
        # parabola through three points: exact for quadratic curves
        coef = np.polyfit([x0, x1, x2], [y0, y1, y2], 2)
        return float(np.polyval(coef, c_par)), float(c_par)
    res = minimize_scalar(
        lambda c: -a_func(c), bounds=(x0, x2), method="bounded", options={"xatol": 1e-8}
    )
    c_star = float(res.x)
    return float(a_func(c_star)), c_star


def solve_c_for_a(a: float, b: float, d: float, tau: float, curve: Optional[SpeedCurve] = None):
    """Speeds with threshold ``a``: ``(c_s, c_f)``, ``(c_star,)`` or ``()``.

    A branch is omitted when the traced curve never drops below ``a`` on that
    side of the fold (the wave family ends first).
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if curve is None:
        curve = trace_curve(b, d, tau)
    if curve.a_star is None:
        curve.a_star, curve.c_star = find_fold(curve)
    a_star, c_star = curve.a_star, curve.c_star
    if abs(a - a_star) < MERGE_TOL:
        return (c_star,)
    if a > a_star:
        return ()
    f = lambda c: curve.a_at(c) - a
    cs, as_ = curve.c, curve.a
    out = []
    left = np.nonzero((cs < c_star) & (as_ < a))[0]
    if len(left):
        out.append(brentq(f, cs[left[-1]], c_star, xtol=1e-14))
    right = np.nonzero((cs > c_star) & (as_ < a))[0]
    if len(right):
        out.append(brentq(f, c_star, cs[right[0]], xtol=1e-14))
    return tuple(float(c) for c in out)
