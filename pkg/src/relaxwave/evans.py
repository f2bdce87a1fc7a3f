"""Evans function of the traveling wave and argument-principle zero counting.

The eigenvalue problem is linear with constant coefficients on each of the
three intervals, so the solution decaying at ``-inf`` can be carried across
``(0, z1)`` in closed form. The Evans function is the coefficient of the
growing mode ``exp(beta_3 z)`` beyond ``z1``; it vanishes exactly when that
solution also decays at ``+inf``.

Everything here is vectorized over ``lambda`` because contour sweeps need
thousands of evaluations.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import CoalescentRoots, NonRealResult, RelaxwaveError, ZeroOnContour
from .poly import CharRoots, ModelParams, _order_pair, beta_coeff_array, char_poly_beta, cubic_roots
from .profile import WaveProfile, eigvec

log = logging.getLogger(__name__)

COALESCE_TOL = 1e-9
ZERO_TOL = 1e-10
MAX_REFINE_ROUNDS = 40


class BranchJump(RelaxwaveError):
    pass


@dataclass(frozen=True)
class EvansContext:
    """Profile data the Evans function needs; ``U0`` normalizes the eigenfunction."""

    params: ModelParams
    profile: WaveProfile
    U0: float = 1.0
    du0: float = field(init=False)
    du1: float = field(init=False)
    z1: float = field(init=False)

    def __post_init__(self):
        if self.U0 == 0:
            raise ValueError("U0 must be nonzero")
        object.__setattr__(self, "du0", self.profile.a * self.profile.alphas.r3.real)
        object.__setattr__(self, "du1", self.profile.du_at_z1())
        object.__setattr__(self, "z1", self.profile.z1)
        if not (self.du0 > 0 and self.du1 < 0):
            raise ValueError("profile must cross the threshold upwards at 0 and downwards at z1")

    @classmethod
    def from_profile(cls, profile: WaveProfile, U0: float = 1.0) -> "EvansContext":
        return cls(profile.params, profile, U0)


@dataclass(frozen=True)
class HalfRingContour:
    """Boundary of ``{r < |lambda| < R, Re lambda > 0}``, counterclockwise."""

    r: float = 0.1
    R: float = 20.0
    n_arc: int = 1000
    n_seg: int = 1000

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ValueError(f"need 0 < r < R, got r={self.r}, R={self.R}")
        if self.n_arc < 8 or self.n_seg < 8:
            raise ValueError("need at least 8 samples per piece")

    def point(self, sigma):
        """Map ``sigma in [0, 4]`` onto the boundary, one unit per piece.

        Pieces: outer arc (-iR -> iR), axis (iR -> ir), inner arc (ir -> -ir),
        axis (-ir -> -iR). The axis pieces are geometrically spaced.
        """
        sigma = np.asarray(sigma, dtype=float)
        piece = np.clip(np.floor(sigma), 0, 3).astype(int)
        f = sigma - piece
        r, R = self.r, self.R
        out = np.empty(sigma.shape, dtype=complex)
        m = piece == 0
        out[m] = R * np.exp(1j * (-np.pi / 2 + np.pi * f[m]))
        m = piece == 1
        out[m] = 1j * R * (r / R) ** f[m]
        m = piece == 2
        out[m] = r * np.exp(1j * (np.pi / 2 - np.pi * f[m]))
        m = piece == 3
        out[m] = -1j * r * (R / r) ** f[m]
        return out

    def initial_sigma(self) -> np.ndarray:
        parts = [
            np.linspace(0, 1, self.n_arc, endpoint=False),
            1 + np.linspace(0, 1, self.n_seg, endpoint=False),
            2 + np.linspace(0, 1, self.n_arc, endpoint=False),
            3 + np.linspace(0, 1, self.n_seg, endpoint=False),
        ]
        return np.concatenate(parts + [[4.0]])

    def scaled(self, fr: float, fR: float) -> "HalfRingContour":
        return HalfRingContour(self.r * fr, self.R * fR, self.n_arc, self.n_seg)


@dataclass
class WindingResult:
    n_zeros: int
    min_abs_E: float
    total_arg: float
    refined: bool
    samples: int
    pattern_breaks: int = 0
    contour: Optional[HalfRingContour] = None
    lambdas: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass
class LambdaCurves:
    k_grid: np.ndarray
    branches: np.ndarray  # (n_k, 3) complex


def stability_matrix(params: ModelParams, lam: complex) -> np.ndarray:
    """Matrix of the first-order linearized system for ``(U', U, W)``."""
    b, c, d, tau, g = params.b, params.c, params.d, params.tau, params.gamma
    return np.array(
        [
            [g * c * (1 + 2 * tau * lam), g * (tau * lam * lam + lam + 1), g],
            [1, 0, 0],
            [0, b / c, -(d + lam) / c],
        ],
        dtype=complex,
    )


def _classify_beta(roots: np.ndarray):
    """Put the root with largest real part last; flag sign-pattern failures."""
    order = np.argsort(roots.real, axis=-1)
    roots = np.take_along_axis(roots, order, axis=-1)
    ok = (roots[..., 2].real > 0) & (roots[..., 1].real < 0)
    return roots, ok


def beta_roots_batch(lams, params: ModelParams):
    """Roots ``(beta_1, beta_2, beta_3)`` for many lambdas and a pattern mask.

    ``beta_3`` is the unique root with positive real part wherever the
    pattern ``Re beta_3 > 0 > Re beta_1, Re beta_2`` holds; there it is the
    analytic continuation of ``alpha_3``, so no root tracking is needed.
    """
    lams = np.asarray(lams, dtype=complex)
    roots = cubic_roots(beta_coeff_array(params, lams))
    return _classify_beta(roots)


def beta_roots(lam: complex, params: ModelParams, previous: Optional[CharRoots] = None) -> CharRoots:
    """Classified roots of ``W_lambda``.

    With ``previous`` the roots are matched to it by nearest distance
    (continuation); otherwise ``beta_3`` is the root with largest real part.
    """
    roots = cubic_roots(char_poly_beta(params, lam).as_array())
    if previous is not None:
        prev = np.array(previous.as_tuple())
        best = min(
            itertools.permutations(range(3)),
            key=lambda p: float(np.sum(np.abs(roots[list(p)] - prev))),
        )
        r1, r2, r3 = (complex(roots[i]) for i in best)
    else:
        srt, _ = _classify_beta(roots)
        r1, r2 = _order_pair(complex(srt[0]), complex(srt[1]))
        r3 = complex(srt[2])
    ok = r3.real > 0 and r1.real < 0 and r2.real < 0
    if lam == 0:
        # real-coefficient cubic: clean up rounding in the pair and the real root
        if abs(r3.imag) <= 1e-12 * abs(r3):
            r3 = complex(r3.real, 0.0)
    return CharRoots(r1, r2, r3, "one-unstable" if ok else "breakdown")


def _kappa(beta, lam, params: ModelParams):
    """Coordinates of ``e_1 = (1, 0, 0)`` on the eigenbasis ``Y_j``."""
    b1, b2, b3 = beta[..., 0], beta[..., 1], beta[..., 2]
    c, d = params.c, params.d
    num = c * beta + d + lam[..., None]
    den = np.stack([(b1 - b2) * (b1 - b3), (b2 - b1) * (b2 - b3), (b3 - b1) * (b3 - b2)], axis=-1)
    return num / (c * den)


def _min_gap(beta):
    b1, b2, b3 = beta[..., 0], beta[..., 1], beta[..., 2]
    gap = np.minimum(np.minimum(abs(b1 - b2), abs(b1 - b3)), abs(b2 - b3))
    return gap / np.maximum(1.0, np.max(np.abs(beta), axis=-1))


def _evans_core(lams, ctx: EvansContext, beta):
    p = ctx.params
    g = p.gamma
    kap = _kappa(beta, lams, p)
    S1 = -g * ctx.U0 / ctx.du0
    e1 = np.exp((beta[..., 0] - beta[..., 2]) * ctx.z1)
    e2 = np.exp((beta[..., 1] - beta[..., 2]) * ctx.z1)
    # U(z1) exp(-beta_3 z1), bounded for large |lambda|
    uz1 = ctx.U0 + S1 * kap[..., 2] + S1 * (kap[..., 0] * e1 + kap[..., 1] * e2)
    S2s = g * uz1 / ctx.du1
    return ctx.U0 + (S1 + S2s) * kap[..., 2], uz1


def evans_batch(lams, ctx: EvansContext):
    """``E(lambda)`` on an array of lambdas; returns ``(values, pattern_ok)``.

    Where two roots nearly coincide the formula's denominators degenerate;
    those lambdas are nudged by ``1e-7 (1 + |lambda|)`` along the positive
    real axis and re-evaluated once.
    """
    lams = np.asarray(lams, dtype=complex)
    beta, ok = beta_roots_batch(lams, ctx.params)
    bad = _min_gap(beta) < COALESCE_TOL
    if bad.any():
        lams = lams.copy()
        lams[bad] = lams[bad] + 1e-7 * (1 + np.abs(lams[bad]))
        beta2, ok2 = beta_roots_batch(lams[bad], ctx.params)
        if np.any(_min_gap(beta2) < COALESCE_TOL):
            raise CoalescentRoots("characteristic roots coalesce after perturbation")
        beta[bad], ok[bad] = beta2, ok2
    E, _ = _evans_core(lams, ctx, beta)
    return E, ok


def evans(lam: complex, ctx: EvansContext) -> complex:
    """Evans function at one point."""
    E, ok = evans_batch(np.array([lam]), ctx)
    if not ok[0]:
        log.debug("root sign pattern fails at lambda=%s", lam)
    return complex(E[0])


def u_at_z1(lam: complex, ctx: EvansContext) -> complex:
    """Eigenfunction value ``U(z1)`` from the closed-form transfer across (0, z1)."""
    beta, _ = beta_roots_batch(np.array([lam]), ctx.params)
    _, uz1 = _evans_core(np.array([lam], dtype=complex), ctx, beta)
    return complex(uz1[0] * np.exp(beta[0, 2] * ctx.z1))


def evans_determinant(lam: complex, ctx: EvansContext) -> complex:
    """Determinant form ``det(J^-, J_1^+, J_2^+)`` at ``z1``.

    ``J^-`` is propagated with a matrix exponential instead of the
    eigen-decomposition, so this is an independent route to the same zeros.
    The decaying solutions at ``z1+`` are taken with unit amplitude, which
    only rescales the determinant by a nonzero factor. Dividing by
    ``beta_2 - beta_1`` makes the result symmetric in the decaying pair, so
    it is real on the real axis even when that pair is complex.
    """
    p = ctx.params
    g = p.gamma
    roots = beta_roots(lam, p)
    beta = np.array(roots.as_tuple())
    Y = eigvec(beta, p, lam)
    v0 = ctx.U0 * Y[2] + np.array([-g * ctx.U0 / ctx.du0, 0, 0])
    J_minus = expm(stability_matrix(p, lam) * ctx.z1) @ v0
    B = np.eye(3, dtype=complex)
    B[0, 1] = -g / ctx.du1
    cols = [J_minus, B @ Y[0], B @ Y[1]]
    det = np.linalg.det(np.stack(cols, axis=1))
    return complex(det / (beta[1] - beta[0]))


def translation_mode_residuals(profile: WaveProfile, z):
    """Check that ``(U', U, W) = (u_c'', u_c', w_c')`` solves the problem at ``lambda = 0``.

    Returns ``(ode, jumps)``: the residual of the first-order system on the
    points ``z`` (off the switch points), and for each of ``0`` and ``z1``
    the mismatch in ``[U'] = -gamma U / |u_c'|`` followed by the jumps of
    ``U`` and ``W`` (which must vanish).
    """
    p = profile.params
    g = p.gamma
    V = profile.state_derivative(z, 1)
    dV = profile.state_derivative(z, 2)
    ode = dV - V @ stability_matrix(p, 0.0).real.T
    jumps = []
    for zi in (0.0, profile.z1):
        lo = profile.state_derivative(np.nextafter(zi, -np.inf), 1)[0]
        hi = profile.state_derivative(np.nextafter(zi, np.inf), 1)[0]
        expected = -g * hi[1] / abs(hi[1])
        jumps.append([(hi[0] - lo[0]) - expected, hi[1] - lo[1], hi[2] - lo[2]])
    return ode, np.array(jumps)


def _arg_steps(E):
    return np.angle(E[1:] / E[:-1])


def _sample_contour(ctx: EvansContext, contour: HalfRingContour, max_step: float):
    sig = contour.initial_sigma()
    E, ok = evans_batch(contour.point(sig), ctx)
    refined = True
    for _ in range(MAX_REFINE_ROUNDS):
        steps = np.abs(_arg_steps(E))
        big = np.nonzero(steps > max_step)[0]
        if len(big) == 0:
            break
        mids = 0.5 * (sig[big] + sig[big + 1])
        Em, okm = evans_batch(contour.point(mids), ctx)
        sig = np.insert(sig, big + 1, mids)
        E = np.insert(E, big + 1, Em)
        ok = np.insert(ok, big + 1, okm)
    else:
        refined = False
    return sig, E, ok, refined


def winding_number(ctx: EvansContext, contour: HalfRingContour, perturb_attempts: int = 3) -> WindingResult:
    """Number of zeros of ``E`` inside the half-ring, by phase accumulation.

    Consecutive samples are bisected until the phase changes by less than
    ``pi/4`` per step. If the contour passes too close to a zero it is
    shrunk/grown slightly and retried.
    """
    cur = contour
    for attempt in range(perturb_attempts + 1):
        sig, E, ok, refined = _sample_contour(ctx, cur, math.pi / 4)
        min_abs = float(np.min(np.abs(E)))
        if min_abs >= ZERO_TOL and np.all(np.isfinite(E)):
            total = float(np.sum(_arg_steps(E)))
            n = int(round(total / (2 * math.pi)))
            return WindingResult(
                n_zeros=n,
                min_abs_E=min_abs,
                total_arg=total,
                refined=refined,
                samples=len(E),
                pattern_breaks=int(np.count_nonzero(~ok)),
                contour=cur,
                lambdas=cur.point(sig),
                values=E,
            )
        log.info("E vanishes on contour %s; perturbing", cur)
        cur = cur.scaled(1.0 + 0.037 * (attempt + 1), 1.0 + 0.011 * (attempt + 1))
    raise ZeroOnContour(f"|E| < {ZERO_TOL} on every perturbed contour near {contour}")


def nyquist_export(ctx: EvansContext, contour: HalfRingContour):
    """Samples ``(lambda, E(lambda))`` along the contour, phase steps < pi/8."""
    sig, E, ok, _ = _sample_contour(ctx, contour, math.pi / 8)
    return contour.point(sig), E


def real_axis_scan(ctx: EvansContext, lambda_max: float, n: int = 1000):
    """``E`` on ``n`` equispaced points of ``(0, lambda_max]``; returns real arrays."""
    lams = np.linspace(lambda_max / n, lambda_max, n)
    E, _ = evans_batch(lams.astype(complex), ctx)
    scale = np.maximum(1.0, np.abs(E))
    if np.any(np.abs(E.imag) > 1e-9 * scale):
        raise NonRealResult("Evans function is not real on the positive real axis")
    return lams, E.real


DEFAULT_LADDER = tuple(itertools.product((20.0, 200.0, 1000.0), (0.2, 0.1, 0.05)))


def stability_verdict(ctx: EvansContext, ladder=DEFAULT_LADDER, n_arc: int = 1000, n_seg: int = 1000) -> dict:
    """Classify the wave as ``stable``, ``unstable`` or ``inconclusive``.

    Every contour of the ladder must give the same count and the root sign
    pattern must hold at every sample; otherwise the verdict is
    inconclusive.
    """
    runs = []
    for R, r in ladder:
        try:
            res = winding_number(ctx, HalfRingContour(r=r, R=R, n_arc=n_arc, n_seg=n_seg))
        except (ZeroOnContour, CoalescentRoots) as e:
            return {"verdict": "inconclusive", "reason": str(e), "runs": runs}
        runs.append(
            {
                "R": R,
                "r": r,
                "n_zeros": res.n_zeros,
                "min_abs_E": res.min_abs_E,
                "pattern_breaks": res.pattern_breaks,
                "refined": res.refined,
            }
        )
    counts = {run["n_zeros"] for run in runs}
    if any(run["pattern_breaks"] for run in runs):
        return {"verdict": "inconclusive", "reason": "root sign pattern breaks on a contour", "runs": runs}
    if not all(run["refined"] for run in runs):
        return {"verdict": "inconclusive", "reason": "phase refinement did not converge", "runs": runs}
    if len(counts) != 1:
        return {"verdict": "inconclusive", "reason": f"ladder disagrees: {sorted(counts)}", "runs": runs}
    n = counts.pop()
    return {"verdict": "stable" if n == 0 else "unstable", "n_zeros": n, "runs": runs}


def lambda_curve_coeffs(params: ModelParams, beta):
    """Coefficients (highest first) of ``W_lambda(beta)`` as a cubic in lambda."""
    b, c, d, tau, g = params.b, params.c, params.d, params.tau, params.gamma
    beta = complex(beta)
    l3 = -g * tau
    l2 = -3 * c * g * tau * beta - g * (tau * d + 1)
    l1 = (1 - 2 * c * c * g * tau) * beta ** 2 - c * g * (2 * d * tau + 2) * beta - g * (d + 1)
    l0 = c * beta ** 3 + (d - c * c * g) * beta ** 2 - c * g * (1 + d) * beta - g * (d + b)
    return np.array([l3, l2, l1, l0])


def lambda_curves(params: ModelParams, k_grid, max_jump: float = 1.0) -> LambdaCurves:
    """Curves ``lambda_j(k)`` on which ``W_lambda(ik) = 0``.

    Roots are continued along ``k`` by nearest matching; a jump larger than
    ``max_jump`` (relative to ``1 + |lambda|``) raises :class:`BranchJump`.
    For ``tau = 0`` the polynomial is quadratic and the third branch is NaN.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    if not np.allclose(np.sort(k_grid), np.sort(-k_grid)):
        raise ValueError("k_grid must be symmetric about 0")
    out = np.full((len(k_grid), 3), np.nan + 0j)
    prev = None
    for i, k in enumerate(k_grid):
        coeffs = lambda_curve_coeffs(params, 1j * k)
        roots = np.roots(coeffs if coeffs[0] != 0 else coeffs[1:])
        roots = np.concatenate([roots, np.full(3 - len(roots), np.nan + 0j)])
        if prev is not None:
            # tau = 0 leaves the third slot empty; match only the finite roots
            m = int(np.count_nonzero(np.isfinite(roots)))
            best = min(
                itertools.permutations(range(m)),
                key=lambda p: float(np.sum(np.abs(roots[list(p)] - prev[:m]))),
            )
            roots[:m] = roots[list(best)]
            jump = np.abs(roots - prev) / (1 + np.abs(prev))
            if np.nanmax(jump) > max_jump:
                raise BranchJump(f"branch jump {np.nanmax(jump):.3g} at k={k}")
        out[i] = roots
        prev = roots
    return LambdaCurves(k_grid, out)
