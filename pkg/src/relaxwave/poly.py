"""Model parameters, cubic characteristic polynomials and their roots.

Two cubics govern everything downstream:

* ``W(alpha)``: exponents of the traveling-wave ODE on the linear pieces,
* ``W_lambda(beta)``: exponents of the linearized eigenvalue problem.

Roots come from companion-matrix eigenvalues followed by one Newton step.
The solver is batched so contour sweeps can evaluate thousands of cubics at
once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ClassificationError, DegenerateCubic, InvalidParams

ROOT_TOL = 1e-10
# relative size of an imaginary part still considered "real"
REAL_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Parameters ``(a, b, c, d, tau)`` of the relaxing McKean system.

    ``a`` may be ``None`` while it is still unknown (speed-curve tracing
    derives it from ``c``).
    """

    b: float
    c: float
    d: float
    tau: float
    a: Optional[float] = None

    def __post_init__(self):
        for name in ("b", "c", "d", "tau"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidParams(f"{name} must be finite, got {v!r}")
        if self.a is not None and not (math.isfinite(self.a) and self.a > 0):
            raise InvalidParams(f"a must be > 0, got {self.a!r}")
        if self.b <= 0:
            raise InvalidParams(f"b must be > 0, got {self.b!r}")
        if self.c <= 0:
            raise InvalidParams(f"c must be > 0, got {self.c!r}")
        if self.d < 0:
            raise InvalidParams(f"d must be >= 0, got {self.d!r}")
        if self.tau < 0:
            raise InvalidParams(f"tau must be >= 0, got {self.tau!r}")
        if self.c ** 2 * self.tau >= 1:
            raise InvalidParams(
                f"c^2 tau = {self.c ** 2 * self.tau:.6g} >= 1 (speed above 1/sqrt(tau))"
            )

    @property
    def gamma(self) -> float:
        return 1.0 / (1.0 - self.c ** 2 * self.tau)

    @property
    def c_max(self) -> float:
        """Upper bound ``1/sqrt(tau)`` on admissible speeds (``inf`` if tau=0)."""
        return math.inf if self.tau == 0 else 1.0 / math.sqrt(self.tau)

    def with_a(self, a: float) -> "ModelParams":
        return replace(self, a=a)

    def with_c(self, c: float) -> "ModelParams":
        return replace(self, c=c)

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d, "tau": self.tau}


@dataclass(frozen=True)
class CubicCoeffs:
    """Cubic ``c3 x^3 + c2 x^2 + c1 x + c0``; coefficients may be complex."""

    c3: complex
    c2: complex
    c1: complex
    c0: complex

    def __post_init__(self):
        if self.c3 == 0:
            raise DegenerateCubic("leading coefficient is zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.c3, self.c2, self.c1, self.c0])

    def __call__(self, x):
        return ((self.c3 * x + self.c2) * x + self.c1) * x + self.c0


@dataclass(frozen=True)
class CharRoots:
    """Classified roots: ``r3`` is the growing mode, ``r1``, ``r2`` decay."""

    r1: complex
    r2: complex
    r3: complex
    pattern: str = "one-unstable"

    def as_tuple(self):
        return self.r1, self.r2, self.r3


def char_poly_alpha(params: ModelParams) -> CubicCoeffs:
    """Characteristic polynomial ``W(alpha)`` of the traveling-wave system."""
    b, c, d, g = params.b, params.c, params.d, params.gamma
    return CubicCoeffs(c, d - c * c * g, -c * g * (1 + d), -g * (d + b))


def char_poly_beta(params: ModelParams, lam: complex) -> CubicCoeffs:
    """Characteristic polynomial ``W_lambda(beta)`` of the linearized system."""
    lam = complex(lam)
    c2, c1, c0 = _beta_coeffs(params, lam)
    return CubicCoeffs(complex(params.c), complex(c2), complex(c1), complex(c0))


def _beta_coeffs(params: ModelParams, lam):
    b, c, d, tau, g = params.b, params.c, params.d, params.tau, params.gamma
    c2 = lam + d - c * c * g * (1 + 2 * lam * tau)
    c1 = -c * g * (1 + d + 2 * d * tau * lam + 3 * lam * lam * tau + 2 * lam)
    c0 = -g * ((tau * lam * lam + lam + 1) * (lam + d) + b)
    return c2, c1, c0


def beta_coeff_array(params: ModelParams, lams) -> np.ndarray:
    """Stacked ``(n, 4)`` coefficient array of ``W_lambda`` for many lambdas."""
    lams = np.asarray(lams, dtype=complex)
    c2, c1, c0 = _beta_coeffs(params, lams)
    out = np.empty(lams.shape + (4,), dtype=complex)
    out[..., 0] = params.c
    out[..., 1] = c2
    out[..., 2] = c1
    out[..., 3] = c0
    return out


def _polyval3(coeffs, x):
    return ((coeffs[..., 0] * x + coeffs[..., 1]) * x + coeffs[..., 2]) * x + coeffs[..., 3]


def _dpolyval3(coeffs, x):
    return (3 * coeffs[..., 0] * x + 2 * coeffs[..., 1]) * x + coeffs[..., 2]


def cubic_roots(coeffs) -> np.ndarray:
    """Unsorted roots of a stack of cubics, shape ``(..., 4) -> (..., 3)``.

    Companion-matrix eigenvalues, then one Newton step per root.
    """
    coeffs = np.asarray(coeffs)
    if np.any(coeffs[..., 0] == 0):
        raise DegenerateCubic("leading coefficient is zero")
    dtype = np.result_type(coeffs.dtype, np.float64)
    mon = coeffs[..., 1:] / coeffs[..., :1]
    comp = np.zeros(coeffs.shape[:-1] + (3, 3), dtype=dtype)
    comp[..., 0, :] = -mon
    comp[..., 1, 0] = 1
    comp[..., 2, 1] = 1
    roots = np.linalg.eigvals(comp).astype(complex)
    # one Newton polish; skip where the derivative vanishes (multiple root)
    p = _polyval3(coeffs[..., None, :], roots)
    dp = _dpolyval3(coeffs[..., None, :], roots)
    safe = np.abs(dp) > 1e-300
    step = np.where(safe, p / np.where(safe, dp, 1), 0)
    polished = roots - step
    better = np.abs(_polyval3(coeffs[..., None, :], polished)) <= np.abs(p)
    return np.where(better, polished, roots)


def _is_real(z, tol=REAL_TOL):
    return abs(z.imag) <= tol * max(1.0, abs(z))


def solve_cubic(coeffs, tol: float = ROOT_TOL) -> tuple[complex, complex, complex]:
    """Three roots of one cubic in a deterministic order.

    A real positive root (if any) goes last. The remaining two are ordered by
    imaginary part when they form a complex pair, otherwise by real part.
    """
    if isinstance(coeffs, CubicCoeffs):
        arr = coeffs.as_array()
    else:
        arr = np.asarray(coeffs)
    if arr.shape != (4,):
        raise DegenerateCubic(f"expected 4 coefficients, got shape {arr.shape}")
    if arr[0] == 0:
        raise DegenerateCubic("leading coefficient is zero")
    roots = [complex(r) for r in cubic_roots(arr)]
    scale = float(np.max(np.abs(arr)))
    for r in roots:
        resid = abs(_polyval3(arr, r))
        if resid > tol * scale * max(1.0, abs(r)) ** 3:
            raise DegenerateCubic(f"root {r} has residual {resid:.3e}")
    pos = [r for r in roots if _is_real(r) and r.real > 0]
    last = max(pos, key=lambda r: r.real) if pos else None
    rest = list(roots)
    if last is not None:
        rest.remove(last)
    else:
        rest.sort(key=lambda r: (r.real, r.imag))
        last = rest.pop()
    rest = _order_pair(rest[0], rest[1])
    return rest[0], rest[1], last


def _order_pair(p, q):
    if not (_is_real(p) and _is_real(q)):
        return (p, q) if p.imag <= q.imag else (q, p)
    return (p, q) if p.real <= q.real else (q, p)


def classify_alpha_roots(roots, params: Optional[ModelParams] = None) -> CharRoots:
    """Identify alpha_3 (the positive real root) and check the two others decay."""
    roots = [complex(r) for r in roots]
    pos = [r for r in roots if _is_real(r) and r.real > 0]
    if len(pos) != 1:
        raise ClassificationError(f"expected exactly one positive real root, got {roots}")
    a3 = pos[0]
    rest = list(roots)
    rest.remove(a3)
    if not all(r.real < 0 for r in rest):
        raise ClassificationError(f"decaying roots must have Re < 0, got {rest}")
    a1, a2 = _order_pair(*rest)
    if not (_is_real(a1) and _is_real(a2)):
        # exact conjugate pair keeps downstream realness checks tight
        m = 0.5 * (a1 + a2.conjugate())
        a1, a2 = m, m.conjugate()
        if a1.imag > 0:
            a1, a2 = a2, a1
        pattern = "complex-pair"
    else:
        a1, a2 = complex(a1.real, 0.0), complex(a2.real, 0.0)
        pattern = "real"
    return CharRoots(a1, a2, complex(a3.real, 0.0), pattern)


def alpha_roots(params: ModelParams) -> CharRoots:
    """Convenience: solve and classify ``W(alpha)`` for ``params``."""
    return classify_alpha_roots(solve_cubic(char_poly_alpha(params)), params)


def viete_residuals(roots: CharRoots, params: ModelParams) -> np.ndarray:
    """Relative residuals of the three Viete identities for ``W(alpha)``."""
    a1, a2, a3 = roots.as_tuple()
    b, c, d, g = params.b, params.c, params.d, params.gamma
    targets = np.array([g * (d + b) / c, -g * (1 + d), (c * c * g - d) / c])
    got = np.array([a1 * a2 * a3, a1 * a2 + a1 * a3 + a2 * a3, a1 + a2 + a3])
    return np.abs(got - targets) / np.maximum(1.0, np.abs(targets))
