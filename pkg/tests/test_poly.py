import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from relaxwave.errors import ClassificationError, DegenerateCubic, InvalidParams
from relaxwave.poly import (
    CubicCoeffs,
    ModelParams,
    alpha_roots,
    char_poly_alpha,
    char_poly_beta,
    classify_alpha_roots,
    cubic_roots,
    solve_cubic,
    viete_residuals,
)

from conftest import B, D, TAU, random_params


@st.composite
def params_st(draw):
    b = draw(st.floats(0.01, 2.0))
    d = draw(st.floats(0.0, 1.0))
    tau = draw(st.floats(0.0, 1.0))
    cap = min(1 / math.sqrt(tau), 10.0) if tau > 0 else 10.0
    c = draw(st.floats(0.01, 0.99)) * cap
    return ModelParams(b=b, c=c, d=d, tau=tau)


def _sym_first_order(params, lam=0):
    """Characteristic polynomial of the first-order system, expanded symbolically."""
    x = sp.symbols("x")
    b, c, d, tau = (sp.nsimplify(v, rational=True) for v in (params.b, params.c, params.d, params.tau))
    lam = sp.nsimplify(lam, rational=True)
    g = 1 / (1 - c ** 2 * tau)
    # state (u', u, w); u'' = g(c(1+2 tau lam) u' + (tau lam^2 + lam + 1) u + w), w' = (b u - (d+lam) w)/c
    A = sp.Matrix(
        [
            [g * c * (1 + 2 * tau * lam), g * (tau * lam ** 2 + lam + 1), g],
            [1, 0, 0],
            [0, b / c, -(d + lam) / c],
        ]
    )
    poly = sp.Poly(sp.expand(-(A - x * sp.eye(3)).det() * c), x)
    return [complex(v) for v in poly.all_coeffs()]


class TestModelParams:
    def test_gamma_recomputed(self):
        p = ModelParams(b=B, c=0.65, d=D, tau=TAU)
        assert p.gamma == 1 / (1 - 0.65 ** 2 * 0.1)
        assert p.with_c(1.5).gamma == 1 / (1 - 1.5 ** 2 * 0.1)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(b=0.5, c=4.0, d=0.1, tau=0.1),
            dict(b=0.5, c=2.0, d=0.1, tau=0.25),
            dict(b=0.0, c=1.0, d=0.1, tau=0.1),
            dict(b=0.5, c=-1.0, d=0.1, tau=0.1),
            dict(b=0.5, c=1.0, d=-0.1, tau=0.1),
            dict(b=0.5, c=1.0, d=0.1, tau=-1.0),
            dict(b=0.5, c=1.0, d=0.1, tau=0.1, a=0.0),
            dict(b=math.nan, c=1.0, d=0.1, tau=0.1),
        ],
    )
    def test_rejects_inadmissible(self, kw):
        with pytest.raises(InvalidParams):
            ModelParams(**kw)

    def test_speed_bound_message(self):
        with pytest.raises(InvalidParams, match="c\\^2 tau = 1.6"):
            ModelParams(b=0.5, c=4.0, d=0.1, tau=0.1)


class TestCharPolys:
    def test_alpha_coefficients_tau_zero(self):
        p = ModelParams(b=0.3, c=0.8, d=0.2, tau=0.0)
        got = char_poly_alpha(p).as_array()
        np.testing.assert_allclose(got, [0.8, 0.2 - 0.64, -0.8 * 1.2, -0.5], rtol=1e-15)

    def test_alpha_matches_symbolic_expansion(self):
        p = ModelParams(b=B, c=0.65, d=D, tau=TAU)
        np.testing.assert_allclose(char_poly_alpha(p).as_array(), _sym_first_order(p), rtol=1e-13)

    def test_beta_matches_symbolic_expansion(self):
        p = ModelParams(b=B, c=1.5, d=D, tau=TAU)
        lam = 1 + 1j
        want = _sym_first_order(p, sp.Integer(1) + sp.I)
        np.testing.assert_allclose(char_poly_beta(p, lam).as_array(), want, rtol=1e-13)

    def test_beta_matches_numeric_determinant(self, rng):
        from relaxwave.evans import stability_matrix

        for _ in range(20):
            p = random_params(rng)
            lam = complex(rng.normal(), rng.normal())
            beta = complex(rng.normal(), rng.normal())
            det = np.linalg.det(stability_matrix(p, lam) - beta * np.eye(3))
            # W_lambda(beta) = -c det(A - beta I)
            assert abs(char_poly_beta(p, lam)(beta) + p.c * det) < 1e-10 * max(1, abs(p.c * det))

    @given(params_st())
    def test_beta_at_zero_equals_alpha(self, p):
        np.testing.assert_array_equal(char_poly_beta(p, 0.0).as_array(), char_poly_alpha(p).as_array().astype(complex))

    @given(params_st(), st.floats(-50, 50))
    def test_beta_real_for_real_lambda(self, p, lam):
        assert np.all(char_poly_beta(p, lam).as_array().imag == 0)

    @given(params_st())
    def test_constant_term_negative_and_sign_change(self, p):
        W = char_poly_alpha(p)
        assert W.c0 == -p.gamma * (p.d + p.b) < 0
        big = 10 * (1 + max(abs(W.c2), abs(W.c1), abs(W.c0)) / W.c3)
        assert W(big) > 0


class TestSolveCubic:
    def test_roots_of_unity(self):
        r = solve_cubic((1, 0, 0, -1))
        w = np.exp(2j * np.pi / 3)
        assert abs(r[2] - 1) < 1e-14
        assert abs(r[0] - w.conjugate()) < 1e-14 and abs(r[1] - w) < 1e-14

    def test_factored(self):
        r = solve_cubic((1, -6, 11, -6))
        np.testing.assert_allclose(np.real(r), [1, 2, 3], atol=1e-13)

    def test_degenerate(self):
        with pytest.raises(DegenerateCubic):
            solve_cubic((0, 1, 2, 3))
        with pytest.raises(DegenerateCubic):
            CubicCoeffs(0, 1, 1, 1)

    def test_against_mpmath_oracle(self, rng):
        for _ in range(200):
            p = random_params(rng)
            coeffs = char_poly_alpha(p).as_array()
            got = sorted(solve_cubic(coeffs), key=lambda z: (round(z.real, 8), z.imag))
            want = sorted(
                (complex(z) for z in mpmath.polyroots([mpmath.mpf(float(v)) for v in coeffs], maxsteps=200, extraprec=60)),
                key=lambda z: (round(z.real, 8), z.imag),
            )
            for g, w in zip(got, want):
                assert abs(g - w) <= 1e-10 * max(1, abs(w))

    @given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=3, max_size=3))
    def test_residual_from_known_roots(self, zs):
        # cubic with known roots; guard against clustered roots (ill-conditioned)
        gaps = [abs(zs[i] - zs[j]) for i in range(3) for j in range(i)]
        if min(gaps) < 1e-2:
            return
        coeffs = np.poly(zs)
        roots = cubic_roots(coeffs)
        scale = np.abs(coeffs).max()
        for r in roots:
            assert abs(np.polyval(coeffs, r)) <= 1e-10 * scale * max(1, abs(r)) ** 3

    def test_batched_matches_single(self, rng):
        c = rng.normal(size=(50, 4)) + 1j * rng.normal(size=(50, 4))
        batch = cubic_roots(c)
        for row, rts in zip(c, batch):
            np.testing.assert_allclose(np.sort_complex(rts), np.sort_complex(np.roots(row)), atol=1e-9)


class TestClassification:
    def test_slow_speed_pattern(self):
        r = alpha_roots(ModelParams(b=B, c=0.65, d=D, tau=TAU))
        assert r.r3.imag == 0 and r.r3.real > 0
        assert r.r1.real < 0 and r.r2.real < 0
        assert r.r1 == r.r2.conjugate() and r.r1.imag < 0
        assert r.pattern == "complex-pair"

    def test_real_pair_ordered(self):
        p = ModelParams(b=0.01, c=3.0, d=0.5, tau=0.0)
        r = alpha_roots(p)
        assert r.pattern == "real"
        assert r.r1.real < r.r2.real < 0 < r.r3.real
        assert r.r1.imag == r.r2.imag == 0

    def test_rejects_bad_pattern(self):
        with pytest.raises(ClassificationError):
            classify_alpha_roots([1.0, 2.0, -1.0])
        with pytest.raises(ClassificationError):
            classify_alpha_roots([1.0, 0.5 + 1j, 0.5 - 1j])

    def test_sweep_never_fails(self, rng):
        for _ in range(1000):
            p = random_params(rng, c_cap=20.0)
            r = alpha_roots(p)
            assert viete_residuals(r, p).max() < 1e-10

    @given(params_st())
    @settings(max_examples=200)
    def test_viete_and_product(self, p):
        r = alpha_roots(p)
        assert viete_residuals(r, p).max() < 1e-10
        prod = r.r1 * r.r2 * r.r3
        assert prod.real > 0 and abs(prod - p.gamma * (p.d + p.b) / p.c) < 1e-10 * abs(prod)
        if r.pattern == "complex-pair":
            assert r.r1 == r.r2.conjugate()
