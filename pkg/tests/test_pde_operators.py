import math

import numpy as np
import pytest

from brusselator_cap.ball import BallError
from brusselator_cap.pde_operators import (
    OperatorParams,
    apply_heat,
    inverse_laplacian,
    mode_bound,
    mode_bound_dt,
    region_factor,
    resolvent,
    resolvent_dt,
)
from brusselator_cap.space_fourier import SpaceSeries
from brusselator_cap.taylor_enclosure import TaylorEnclosure

RHOS = dict(rho_x=33 / 32, rho_t=1 + 2.0**-20)
ALPHA = 2 * math.pi / 10.3


def random_block(rng, nk, K, D):
    c = rng.normal(size=(nk, 2 * K + 1, D + 1))
    return SpaceSeries(c, np.zeros_like(c), **RHOS)


def operators(D):
    """Both diffusion coefficients, plain and Taylor-valued parameters."""
    a = TaylorEnclosure([ALPHA, 0.01, 0.0][: D + 1], [0.0] * (D + 1), D + 1)
    b = TaylorEnclosure([3.7, -0.1, 0.02][: D + 1], [0.0] * (D + 1), D + 1)
    return [OperatorParams(ALPHA, 1.0, 3.7), OperatorParams(ALPHA, 1 / 64, 0.0), OperatorParams(a, 1.0, b)]


def symbol_inverse(alpha, d, b, k, j):
    """Floating 2x2 inverse of the heat symbol on span{(k, j), (k, -j)}."""
    c = d * k * k + b
    M = np.array([[c, alpha * j], [-alpha * j, c]])
    return np.linalg.inv(M)


class TestResolventIdentity:
    """(alpha d/dt - d d_xx + b) applied to L f gives back f up to radii."""

    @pytest.mark.parametrize("D", [0, 2])
    def test_heat_after_resolvent_is_identity(self, D):
        rng = np.random.default_rng(50 + D)
        for p in operators(D):
            for _ in range(20):
                f = random_block(rng, 6, 3, D)
                back = apply_heat(p, resolvent(p, f))
                assert np.all(np.abs(back.c - f.c) <= back.r)

    def test_resolvent_after_heat_is_identity(self):
        rng = np.random.default_rng(52)
        for p in operators(0):
            f = random_block(rng, 6, 3, 0)
            back = resolvent(p, apply_heat(p, f))
            assert np.all(np.abs(back.c - f.c) <= back.r)

    def test_matches_independent_symbol_inverse(self):
        rng = np.random.default_rng(53)
        p = OperatorParams(ALPHA, 1.0, 3.7)
        f = random_block(rng, 5, 3, 0)
        out = resolvent(p, f)
        for k in range(1, 5):
            for j in range(1, 4):
                # cosi index j is cos(jt), -j is sin(jt); d/dt cos = -j sin
                Minv = symbol_inverse(ALPHA, 1.0, 3.7, k, j)
                x = Minv @ np.array([f.c[k, 3 + j, 0], f.c[k, 3 - j, 0]])
                got = np.array([out.c[k, 3 + j, 0], out.c[k, 3 - j, 0]])
                assert np.allclose(got, x, rtol=1e-13, atol=1e-15)


class TestDerivativeResolventBlocks:
    """Blockwise 2-norm of d/dt o L on a 64 x 64 mode grid stays below 1/alpha."""

    @pytest.mark.parametrize("d, b", [(1.0, 3.7), (1 / 64, 0.0)])
    def test_block_norms(self, d, b):
        nk, K = 64, 64
        p = OperatorParams(ALPHA, d, b)
        pos = np.zeros((nk, 2 * K + 1, 1))
        pos[1:, K:, 0] = 1.0
        neg = np.zeros_like(pos)
        neg[1:, :K, 0] = 1.0
        zero = np.zeros_like(pos)
        A = resolvent_dt(p, SpaceSeries(pos, zero, **RHOS))
        B = resolvent_dt(p, SpaceSeries(neg, zero, **RHOS))
        bound = 1 / ALPHA
        worst = 0.0
        for k in range(1, nk):
            for j in range(1, K + 1):
                rows = [K + j, K - j]
                M = np.array([[A.c[k, rows[0], 0], B.c[k, rows[0], 0]], [A.c[k, rows[1], 0], B.c[k, rows[1], 0]]])
                R = np.array([[A.r[k, rows[0], 0], B.r[k, rows[0], 0]], [A.r[k, rows[1], 0], B.r[k, rows[1], 0]]])
                s = np.linalg.norm(M, 2) + np.linalg.norm(R, "fro")
                worst = max(worst, s / bound)
        # slack: one floating SVD, relative 1e-12
        assert worst <= 1 + 1e-12
        assert worst > 0.99  # the bound is approached at large j
        assert mode_bound_dt(p) >= bound

    def test_j_zero_block_vanishes(self):
        p = OperatorParams(ALPHA, 1.0, 3.7)
        f = SpaceSeries(np.ones((4, 3, 1)), np.zeros((4, 3, 1)), **RHOS)
        out = resolvent_dt(p, f)
        assert np.all(out.c[:, 1, 0] == 0)


class TestTailBounds:
    @pytest.mark.parametrize("d, b, tk, tj", [(1.0, 3.7, 10, math.inf), (1.0, 3.7, math.inf, 5),
                                              (1 / 64, 0.0, 1, math.inf), (1 / 64, 0.0, 8, 9)])
    def test_region_factor_dominates_sampled_symbol(self, d, b, tk, tj):
        p = OperatorParams(ALPHA, d, b)
        bound = region_factor(p, "sin", tk, tj)
        worst = 0.0
        ks = np.arange(1, 400)
        js = np.arange(0, 400)
        c = d * ks[:, None] ** 2 + b
        y = ALPHA * js[None, :]
        val = (c + y) / (c * c + y * y)
        mask = (ks[:, None] >= tk) | (js[None, :] >= tj)
        worst = float(np.max(np.where(mask, val, 0)))
        assert worst <= bound
        assert bound <= 1.5 * worst + 1e-12

    def test_mode_bound_dominates_symbol(self):
        p = OperatorParams(ALPHA, 1.0, 3.7)
        m = mode_bound(p, 3, 2)
        for k in range(2, 50):
            for j in range(3, 50):
                assert 1 / math.hypot(k * k + 3.7, ALPHA * j) <= m

    def test_tail_is_carried_through(self):
        p = OperatorParams(ALPHA, 1.0, 3.7)
        f = SpaceSeries(np.zeros((4, 3, 1)), np.zeros((4, 3, 1)), tail=1.0, tail_k=4, tail_j=2, **RHOS)
        out = resolvent(p, f)
        assert out.tail == pytest.approx(region_factor(p, "sin", 4, 2), rel=1e-12)

    def test_zero_symbol_is_refused(self):
        p = OperatorParams(ALPHA, 1 / 64, 0.0)
        with pytest.raises(BallError):
            region_factor(p, "cos", 0, math.inf)


class TestInverseLaplacian:
    def test_exact_on_modes(self):
        f = SpaceSeries.from_array([0.0, 1.0, 2.0, 3.0])
        g = inverse_laplacian(f)
        assert g.c[:, 0, 0].tolist() == [0.0, -1.0, -0.5, -1 / 3]
        assert g.r[3, 0, 0] >= abs(-1 / 3 - g.c[3, 0, 0])

    def test_requires_sine(self):
        with pytest.raises(ValueError):
            inverse_laplacian(SpaceSeries.from_array([1.0], kind="cos"))
