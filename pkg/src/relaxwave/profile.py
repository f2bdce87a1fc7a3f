"""Piecewise-exponential solitary traveling wave.

In the moving frame ``z = x + c t`` the wave solves a linear ODE on each of
``(-inf, 0)``, ``(0, z1)`` and ``(z1, inf)``; the Heaviside term is switched
on only in the middle piece. Each piece is a finite sum of exponentials
``exp(alpha_j z) X_j``, so the profile is evaluated in closed form.

The pulse width enters through ``s = exp(-alpha_3 z1)``, which solves the
transcendental equation ``h(s) = 0`` on ``(0, 1)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParams, NoTravelingWave, NonRealResult, ProfileError
from .poly import CharRoots, ModelParams, alpha_roots, char_poly_alpha

log = logging.getLogger(__name__)

IMAG_TOL = 1e-9
A_MISMATCH_RTOL = 1e-6
S_SCAN_EPS = 1e-8
S_SCAN_POINTS = 512


class ProfileSample(NamedTuple):
    z: float
    u: float
    du: float
    w: float


def eigvec(root, params: ModelParams, lam=0.0) -> np.ndarray:
    """Right eigenvector ``(beta, 1, b/(c beta + d + lam))`` of the ODE matrix."""
    root = np.asarray(root, dtype=complex)
    return np.stack(
        [root, np.ones_like(root), params.b / (params.c * root + params.d + lam)], axis=-1
    )


def decompose(v, roots, params: ModelParams, lam=0.0) -> np.ndarray:
    """Coefficients ``k_j`` with ``v = sum_j k_j Y_j`` for the eigenbasis at ``lam``.

    Uses the closed-form left eigenvectors of the companion-like ODE matrix
    instead of a 3x3 solve. ``roots`` has shape ``(..., 3)``, ``v`` ``(..., 3)``.
    """
    roots = np.asarray(roots, dtype=complex)
    v = np.asarray(v, dtype=complex)
    lam = np.asarray(lam, dtype=complex)[..., None]
    g, c, b, tau = params.gamma, params.c, params.b, params.tau
    denom = c * roots + params.d + lam
    l2 = roots - g * c * (1 + 2 * tau * lam)
    l3 = g * c / denom
    norm = roots + l2 + l3 * b / denom
    return (v[..., None, 0] + l2 * v[..., None, 1] + l3 * v[..., None, 2]) / norm


def _real(x, what: str, tol: float = IMAG_TOL):
    x = np.asarray(x)
    scale = np.maximum(1.0, np.abs(x))
    if np.any(np.abs(x.imag) > tol * scale):
        worst = float(np.max(np.abs(x.imag) / scale))
        raise NonRealResult(f"{what}: relative imaginary residue {worst:.3e}")
    return x.real


def _h_coeffs(alphas: CharRoots, params: ModelParams):
    a1, a2, a3 = alphas.as_tuple()
    c, d = params.c, params.d
    den3 = d + c * a3
    k1 = a3 * (a2 - a3) * (d + c * a1) / (a1 * (a1 - a2) * den3)
    k2 = a3 * (a3 - a1) * (d + c * a2) / (a2 * (a1 - a2) * den3)
    return k1, k2, -a1 / a3, -a2 / a3


def _phi(x):
    """``exp(x) - 1 - x`` without cancellation for small ``|x|``."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 0.1
    series = x * x * (1 / 2 + x * (1 / 6 + x * (1 / 24 + x * (1 / 120 + x * (1 / 720 + x / 5040)))))
    direct = np.exp(np.where(small, 0, x)) - 1 - np.where(small, 0, x)
    return np.where(small, series, direct)


def h_of_log(t, alphas: CharRoots, params: ModelParams):
    """``h`` as a function of ``t = ln s`` (``t <= 0``)."""
    k1, k2, p1, p2 = _h_coeffs(alphas, params)
    t_arr = np.asarray(t, dtype=float)
    val = -k1 * _phi(p1 * t_arr) - k2 * _phi(p2 * t_arr) + _phi(t_arr)
    val = _real(val, "h(s)")
    return float(val) if np.ndim(t) == 0 else val


def h_function(s, alphas: CharRoots, params: ModelParams):
    """Transcendental pulse-width function ``h(s)``; its root in (0,1) fixes z1.

    ``h`` has a double zero at ``s = 1``. Writing it with ``t = ln s`` and
    ``exp(x) - 1 - x`` makes the linear terms cancel exactly, so values near
    ``s = 1`` keep full relative accuracy.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr <= 0) | (s_arr > 1)):
        raise ValueError("s must lie in (0, 1]")
    return h_of_log(np.log(s) if np.ndim(s) == 0 else np.log(s_arr), alphas, params)


def h_limit_at_zero(alphas: CharRoots, params: ModelParams) -> float:
    """``lim h(s)`` as ``s -> 0+`` (both decaying exponents have Re > 0)."""
    k1, k2, _, _ = _h_coeffs(alphas, params)
    return float(_real(k1 + k2 - 1, "h(0+)"))


def h_second_derivative_at_one(alphas: CharRoots, params: ModelParams) -> float:
    k1, k2, p1, p2 = _h_coeffs(alphas, params)
    return float(_real(-k1 * p1 * (p1 - 1) - k2 * p2 * (p2 - 1), "h''(1)"))


def threshold_from_s(s: float, alphas: CharRoots, params: ModelParams) -> float:
    """Threshold ``a`` for which the decay condition at ``z1`` yields ``s``."""
    a1, a2, a3 = alphas.as_tuple()
    b, c, d = params.b, params.c, params.d
    a = (1 - s) * a1 * a2 * (d + a3 * c) / ((a3 - a1) * (a3 - a2) * (b + d))
    a = float(_real(a, "threshold a"))
    if not a > 0:
        raise NoTravelingWave(f"non-positive threshold a={a:.6g} from s={s:.6g}")
    return a


def _scan_grid(alphas: CharRoots, n=S_SCAN_POINTS, eps=S_SCAN_EPS):
    """Scan points in ``t = ln s``, ordered from ``s`` near 1 towards ``s -> 0``.

    Log-spaced in ``|t|``: dense near ``s = 1`` where ``h ~ t^2``, and reaching
    far enough that the decaying terms ``s^(-alpha_j/alpha_3)`` fall below
    rounding, which is where fast waves put their root (``s`` ~ 1e-7 or less).
    """
    rate = min(-alphas.r1.real, -alphas.r2.real) / alphas.r3.real
    # s must stay a normal double
    t_far = min(40.0 / min(rate, 1.0), 700.0)
    return -np.geomspace(eps, t_far, n)


def solve_s(params: ModelParams, alphas: Optional[CharRoots] = None) -> float:
    """Root of ``h`` in (0, 1) nearest ``s = 1``.

    Raises :class:`NoTravelingWave` when ``h`` keeps one sign on the scan.
    """
    if alphas is None:
        alphas = alpha_roots(params)
    grid = _scan_grid(alphas)
    vals = h_of_log(grid, alphas, params)
    sg = np.sign(vals)
    idx = np.nonzero(sg[:-1] * sg[1:] < 0)[0]
    if len(idx) == 0:
        raise NoTravelingWave(
            f"h(s) has no sign change on (0,1) for b={params.b}, c={params.c}, "
            f"d={params.d}, tau={params.tau}"
        )
    if len(idx) > 1:
        log.info("h(s) has %d sign changes; using the one nearest s=1", len(idx))
    i = idx[0]
    f = lambda t: h_of_log(t, alphas, params)
    t_star = brentq(f, grid[i + 1], grid[i], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    s_star = math.exp(t_star)
    if abs(f(t_star)) >= 1e-12:
        raise NoTravelingWave(f"root refinement stalled: |h(s*)|={abs(f(t_star)):.3e}")
    return s_star


def existence_check(params: ModelParams) -> str:
    """Which sufficient condition for a localized wave holds.

    Returns ``"min-branch"`` (``h(0+) < 0``, local minimum of ``h`` at 1),
    ``"max-branch"`` (``h(0+) > 0``, local maximum at 1) or ``"none"``.
    The test only compares ``W`` at two explicit points with zero, which
    brackets the positive root ``alpha_3``.
    """
    b, c, d, g = params.b, params.c, params.d, params.gamma
    if d <= 0 or b <= 0 or params.tau < 0:
        raise InvalidParams("existence check needs b > 0, d > 0")
    if d - d * d + 2 * b <= 0:
        raise InvalidParams("existence check needs d - d^2 + 2b > 0")
    W = char_poly_alpha(params)
    lo = math.sqrt(g * (d + b) / (c * c * g + d))
    hi = math.sqrt(g * (d - d * d + 2 * b) / d)
    w_lo, w_hi = W(lo).real, W(hi).real
    if w_lo < 0 < w_hi:
        return "min-branch"
    if w_hi < 0 < w_lo:
        return "max-branch"
    return "none"


@dataclass(frozen=True)
class WaveProfile:
    """Closed-form traveling wave ``(u_c, u_c', w_c)`` as a function of ``z``.

    ``coeff_mid`` and ``coeff_right`` are coefficients on the eigenbasis
    ``X_j``. The right piece and the growing mode of the middle piece are
    expanded around ``z1`` so no large exponentials appear.
    """

    params: ModelParams
    alphas: CharRoots
    s: float
    z1: float
    coeff_left: float
    coeff_mid: np.ndarray = field(repr=False)
    offset_mid: np.ndarray = field(repr=False)
    coeff_right: np.ndarray = field(repr=False)

    @property
    def a(self) -> float:
        return self.params.a

    @property
    def _roots(self):
        return np.array(self.alphas.as_tuple())

    def _pieces(self, z, order=0):
        """Vectors ``d^order V/dz^order`` as complex array of shape (n, 3)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        al = self._roots
        X = eigvec(al, self.params)  # (3 roots, 3 comps)
        out = np.zeros(z.shape + (3,), dtype=complex)
        left = z < 0
        mid = (z >= 0) & (z <= self.z1)
        right = z > self.z1
        if left.any():
            e = np.exp(al[2] * z[left]) * al[2] ** order
            out[left] = self.coeff_left * e[:, None] * X[2]
        if mid.any():
            shift = np.array([0.0, 0.0, self.z1])
            e = np.exp(np.outer(z[mid], al) - al * shift) * al ** order
            out[mid] = (e * self.coeff_mid) @ X
            if order == 0:
                out[mid] += self.offset_mid
        if right.any():
            e = np.exp(np.outer(z[right] - self.z1, al[:2])) * al[:2] ** order
            out[right] = (e * self.coeff_right) @ X[:2]
        return out

    def evaluate(self, z):
        """Arrays ``(u, u', w)`` at the points ``z``."""
        V = _real(self._pieces(z), "profile")
        return V[:, 1], V[:, 0], V[:, 2]

    def derivatives(self, z):
        """Arrays ``(u'', w')`` at ``z`` (one-sided at the switch points)."""
        dV = _real(self._pieces(z, order=1), "profile derivative")
        return dV[:, 0], dV[:, 2]

    def state_derivative(self, z, order: int = 1) -> np.ndarray:
        """``d^order/dz^order`` of ``(u', u, w)``, shape ``(n, 3)``; ``order >= 1``."""
        if order < 1:
            raise ValueError("order must be >= 1")
        return _real(self._pieces(z, order=order), "profile derivative")

    def heaviside(self, z):
        z = np.asarray(z, dtype=float)
        return ((z > 0) & (z < self.z1)).astype(float)

    def du_at_z1(self) -> float:
        return float(self.evaluate(self.z1)[1][0])

    def decay_length(self) -> float:
        """Slowest decay length of the tails (ahead or behind)."""
        re = min(abs(self.alphas.r1.real), abs(self.alphas.r2.real))
        return max(1.0 / re, 1.0 / self.alphas.r3.real)


def eval_profile(profile: WaveProfile, z: float) -> ProfileSample:
    u, du, w = profile.evaluate(z)
    return ProfileSample(float(z), float(u[0]), float(du[0]), float(w[0]))


def ode_residual(profile: WaveProfile, z) -> np.ndarray:
    """Residuals of both traveling-wave ODEs at ``z`` (shape ``(n, 2)``).

    ``u''`` and ``w'`` come from differentiating the exponential sums, not
    from the ODE, so this is an independent check of the construction.
    """
    p = profile.params
    u, du, w = profile.evaluate(z)
    d2u, dw = profile.derivatives(z)
    H = profile.heaviside(z)
    r1 = (p.tau * p.c ** 2 - 1) * d2u + p.c * du + u - H + w
    r2 = p.c * dw - p.b * u + p.d * w
    return np.stack([r1, r2], axis=-1)


def _assemble(params: ModelParams, alphas: CharRoots, s: float) -> WaveProfile:
    a = params.a
    a3 = alphas.r3.real
    z1 = -math.log(s) / a3
    roots = np.array(alphas.as_tuple())
    b, d = params.b, params.d
    X = eigvec(roots, params)
    offset = np.array([0.0, d / (b + d), b / (b + d)], dtype=complex)
    k_off = decompose(offset, roots, params)
    if abs(a - _real((1 - s) * k_off[2], "a")) > 1e-10 * a:
        raise ProfileError("threshold is inconsistent with the decay condition at z1")
    # middle piece: growing mode written as exp(alpha_3 (z - z1)); on the speed
    # curve its coefficient is exactly -k_off[2], and a - k_off[2] = -s k_off[2]
    # would cancel catastrophically when s is tiny
    coeff_mid = a * np.array([0, 0, 1], dtype=complex) - k_off
    coeff_mid[2] = -k_off[2]
    e1 = np.exp(roots[:2] * z1)
    coeff_right = coeff_mid[:2] * e1 + k_off[:2]
    return WaveProfile(
        params=params,
        alphas=alphas,
        s=s,
        z1=z1,
        coeff_left=a,
        coeff_mid=coeff_mid,
        offset_mid=offset,
        coeff_right=coeff_right,
    )


def check_heaviside_consistency(profile: WaveProfile, n: int = 4000) -> None:
    """Raise unless ``u > a`` exactly on ``(0, z1)`` and ``u < a`` elsewhere."""
    a, z1 = profile.a, profile.z1
    margin = 1e-9 * max(1.0, z1)
    zm = np.linspace(margin, z1 - margin, n)
    um = profile.evaluate(zm)[0]
    if np.any(um <= a):
        raise ProfileError("profile dips below the threshold inside (0, z1)")
    span = 40.0 * profile.decay_length()
    zr = z1 + np.geomspace(margin, span, n)
    ur = profile.evaluate(zr)[0]
    if np.any(ur >= a):
        raise ProfileError("profile re-crosses the threshold behind the pulse")
    if not profile.du_at_z1() < 0:
        raise ProfileError("profile is not decreasing at z1")


def build_profile(params: ModelParams, check: bool = True) -> WaveProfile:
    """Construct the localized wave for ``(b, c, d, tau)``.

    If ``params.a`` is ``None`` the threshold is taken from the speed curve;
    otherwise it must agree with that value to ``1e-6`` relative.
    """
    alphas = alpha_roots(params)
    s = solve_s(params, alphas)
    a_curve = threshold_from_s(s, alphas, params)
    if params.a is None:
        params = params.with_a(a_curve)
    elif abs(params.a - a_curve) > A_MISMATCH_RTOL * a_curve:
        raise NoTravelingWave(
            f"a={params.a} is not on the speed curve at c={params.c} (expected a={a_curve:.12g})"
        )
    else:
        # keep the exact curve value so threshold crossings are exact
        params = params.with_a(a_curve)
    prof = _assemble(params, alphas, s)
    if check:
        check_heaviside_consistency(prof)
    return prof


def wave_at_speed(b: float, d: float, tau: float, c: float, check: bool = True) -> WaveProfile:
    return build_profile(ModelParams(b=b, c=c, d=d, tau=tau), check=check)
