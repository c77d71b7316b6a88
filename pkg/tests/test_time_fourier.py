import math

import numpy as np
import pytest

from brusselator_cap.ball import gamma
from brusselator_cap.taylor_enclosure import TaylorEnclosure
from brusselator_cap.time_fourier import TimeFourierEnclosure

from oracles import U, time_encloses, time_member, time_value


def random_time(rng, K, D, with_bands=False, rho_t=1 + 2.0**-20):
    c = rng.normal(size=(2 * K + 1, D + 1)) / (1 + np.abs(np.arange(-K, K + 1)))[:, None] ** 2
    r = np.abs(rng.normal(size=c.shape)) * rng.choice([0.0, 1e-12, 1e-6])
    bands = np.zeros(4 * K + 1)
    if with_bands:
        pick = rng.choice(4 * K + 1, size=2, replace=False)
        bands[pick] = np.abs(rng.normal(size=2)) * 1e-3
    return TimeFourierEnclosure(c, r, bands, rho_t=rho_t)


def product_cushion(fv, cf, gv, cg):
    return np.abs(fv) * cg + np.abs(gv) * cf + cf * cg + 2 * U * np.abs(fv * gv)


class TestExamples:
    def test_cos_squared(self):
        # cos^2 t = 1/2 + cos(2t)/2
        f = TimeFourierEnclosure.from_coeffs({1: 1.0}, K=2)
        p = f.prod(f)
        assert p.c[2, 0] == 0.5 and p.c[4, 0] == 0.5 and np.all(p.bands == 0)

    def test_sin_times_cos(self):
        # sin t cos t = sin(2t)/2, and sin is cosi index -1
        s = TimeFourierEnclosure.from_coeffs({-1: 1.0}, K=2)
        c = TimeFourierEnclosure.from_coeffs({1: 1.0}, K=2)
        p = s.prod(c)
        assert p.c[0, 0] == 0.5 and np.count_nonzero(p.c) == 1

    def test_high_frequencies_become_bands(self):
        f = TimeFourierEnclosure.from_coeffs({2: 1.0}, K=2)
        p = f.prod(f)
        # cos^2 2t = 1/2 + cos(4t)/2: frequency 4 is beyond K
        assert p.c[2, 0] == 0.5
        assert p.bands[4 + 4] >= 0.5 * (1 + 2.0**-20) ** 4

    def test_constant_flag(self):
        f = TimeFourierEnclosure.from_coeffs({0: 2.0}, K=1)
        assert f.is_constant and f.prod(f).is_constant
        with pytest.raises(ValueError):
            TimeFourierEnclosure(np.ones((3, 1)), np.zeros((3, 1)), None, is_constant=True)

    def test_mismatched_cuts(self):
        with pytest.raises(ValueError):
            TimeFourierEnclosure.from_coeffs({1: 1.0}, K=1).prod(TimeFourierEnclosure.from_coeffs({1: 1.0}, K=2))


class TestProductContainment:
    N_INSTANCES = 1000
    N_POINTS = 100

    def test_products_contain_sampled_members(self):
        rng = np.random.default_rng(30)
        t = np.linspace(0, 2 * math.pi, self.N_POINTS, endpoint=False)
        violations = banach = 0
        for i in range(self.N_INSTANCES):
            K, D = int(rng.integers(1, 5)), int(rng.integers(0, 3))
            f = random_time(rng, K, D, with_bands=i % 3 == 0)
            g = random_time(rng, K, D, with_bands=i % 5 == 0)
            p = f.prod(g)
            tau = float(rng.uniform(-1, 1))
            fv, cf = time_value(K, *time_member(f, rng), t, tau)
            gv, cg = time_value(K, *time_member(g, rng), t, tau)
            if not time_encloses(p, t, tau, fv * gv, product_cushion(fv, cf, gv, cg)):
                violations += 1
            n = (2 * K + 1) * (D + 1)
            if p.norm_upper() > f.norm_upper() * g.norm_upper() * (1 + gamma(8 * n + 16)):
                banach += 1
        assert violations == 0
        assert banach == 0

    def test_scaled_product_matches_sampled_oracle(self):
        rng = np.random.default_rng(31)
        t = np.linspace(0, 2 * math.pi, 50, endpoint=False)
        for _ in range(100):
            f, g = random_time(rng, 3, 1), random_time(rng, 3, 1)
            s = float(rng.uniform(0, 1))
            p = f.prod_scaled(g, s)
            fe, fo = f.even_part(), f.odd_part()
            ge, go = g.even_part(), g.odd_part()
            mem = lambda h: time_value(3, *time_member(h, rng), t, 0.5)
            # all four parity parts share one member each
            (a, ca), (b, cb), (c, cc), (d, cd) = mem(fe), mem(fo), mem(ge), mem(go)
            val = (a + b) * (c + d) - (1 - s) * b * d
            cush = product_cushion(a + b, ca + cb, c + d, cc + cd) + product_cushion(b, cb, d, cd) + U * np.abs(val)
            assert time_encloses(p, t, 0.5, val, cush)


class TestParity:
    def test_even_times_even_is_even(self):
        rng = np.random.default_rng(32)
        for _ in range(100):
            f, g = random_time(rng, 3, 0).even_part(), random_time(rng, 3, 0).even_part()
            p = f.prod(g)
            odd = np.abs(np.arange(-3, 4)) % 2 == 1
            assert np.all(p.c[odd] == 0) and np.all(p.r[odd] == 0)

    def test_odd_times_odd_is_even(self):
        rng = np.random.default_rng(33)
        f, g = random_time(rng, 3, 0).odd_part(), random_time(rng, 3, 0).odd_part()
        p = f.prod(g)
        odd = np.abs(np.arange(-3, 4)) % 2 == 1
        assert np.all(p.c[odd] == 0)

    def test_parts_sum_to_whole(self):
        rng = np.random.default_rng(34)
        f = random_time(rng, 4, 1, with_bands=True)
        s = f.even_part() + f.odd_part()
        assert np.array_equal(s.c, f.c) and np.all(s.bands >= f.bands)


class TestScalarAndText:
    def test_scalar_mul_by_taylor(self):
        rng = np.random.default_rng(35)
        f = random_time(rng, 2, 2)
        s = TaylorEnclosure([2.0, 0.5, 0.0], [0, 0, 0], 3)
        p = f.scalar_mul(s)
        t = np.linspace(0, 6, 20)
        fv, cf = time_value(2, *time_member(f, rng), t, 0.25)
        sv = 2.0 + 0.5 * 0.25
        assert time_encloses(p, t, 0.25, fv * sv, cf * sv + 4 * U * np.abs(fv * sv))

    def test_round_trip(self):
        rng = np.random.default_rng(36)
        f = random_time(rng, 3, 2, with_bands=True)
        g = TimeFourierEnclosure.from_text(f.to_text())
        assert np.array_equal(f.c, g.c) and np.array_equal(f.r, g.r) and np.array_equal(f.bands, g.bands)
