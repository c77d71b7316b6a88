import math
from fractions import Fraction

import numpy as np
import pytest

from brusselator_cap import space_fourier as sf
from brusselator_cap.ball import gamma
from brusselator_cap.space_fourier import SpacePair, SpaceSeries

from oracles import U, space_encloses, space_member, space_value

RHOS = dict(rho_x=33 / 32, rho_t=1 + 2.0**-20)


def random_space(rng, nk, K, D, kind="sin", err=False, tail=False, batch=()):
    shape = (*batch, nk, 2 * K + 1, D + 1)
    decay = (1 + np.arange(nk))[:, None, None] ** 2 * (1 + np.abs(np.arange(-K, K + 1)))[None, :, None]
    c = rng.normal(size=shape) / decay
    r = np.abs(rng.normal(size=shape)) * rng.choice([0.0, 1e-12, 1e-6])
    kw = dict(RHOS)
    if err:
        kw["err"] = float(rng.uniform(0, 1e-3))
    if tail:
        kw.update(tail=float(rng.uniform(0, 1e-3)), tail_k=nk, tail_j=K + 1)
    return SpaceSeries(c, r, kind=kind, **kw)


def product_cushion(fv, cf, gv, cg):
    return np.abs(fv) * cg + np.abs(gv) * cf + cf * cg + 2 * U * np.abs(fv * gv)


def samples(rng, n):
    return rng.uniform(0, math.pi, n), rng.uniform(0, 2 * math.pi, n), rng.uniform(-1, 1, n)


class TestExamples:
    def test_sin_squared(self):
        # sin^2 x = 1/2 - cos(2x)/2
        f = SpaceSeries.from_array([0.0, 1.0])
        p = f * f
        assert p.kind == "cos"
        assert p.c[:, 0, 0].tolist() == [0.5, 0.0, -0.5]

    def test_sin_times_cos_in_time(self):
        # sin x cos t times sin x sin t = sin^2 x sin(2t)/2
        a = SpaceSeries.from_array(np.array([[0, 0, 0], [0, 0, 1.0]]))
        b = SpaceSeries.from_array(np.array([[0, 0, 0], [1.0, 0, 0]]))
        p = a * b
        assert p.c[0, 0, 0] == 0.25 and p.c[2, 0, 0] == -0.25
        assert np.count_nonzero(p.c) == 2

    def test_sin_zero_slot_is_structural(self):
        f = SpaceSeries(np.ones((3, 1, 1)), np.zeros((3, 1, 1)))
        assert f.c[0, 0, 0] == 0.0

    def test_cannot_add_mixed_kinds(self):
        with pytest.raises(ValueError):
            SpaceSeries.from_array([0.0, 1.0]) + SpaceSeries.from_array([1.0], kind="cos")

    def test_norm_of_unit_mode(self):
        f = SpaceSeries.from_array([0.0, 0.0, 1.0], rho_x=2.0)
        assert 4.0 <= f.norm() <= 4.0 * (1 + 1e-14)


class TestProductContainment:
    N_INSTANCES = 1000
    N_POINTS = 100

    def test_products_contain_sampled_members(self):
        rng = np.random.default_rng(40)
        violations = banach = 0
        for i in range(self.N_INSTANCES):
            nk, K, D = int(rng.integers(2, 6)), int(rng.integers(0, 3)), int(rng.integers(0, 3))
            kinds = [("sin", "sin"), ("sin", "cos"), ("cos", "cos")][i % 3]
            f = random_space(rng, nk, K, D, kinds[0], err=i % 4 == 0, tail=i % 5 == 0)
            g = random_space(rng, nk, K, D, kinds[1], err=i % 7 == 0, tail=i % 3 == 0)
            p = f * g
            x, t, tau = samples(rng, self.N_POINTS)
            fv, cf = space_value(f.kind, *space_member(f, rng), x, t, tau)
            gv, cg = space_value(g.kind, *space_member(g, rng), x, t, tau)
            if not space_encloses(p, x, t, tau, fv * gv, product_cushion(fv, cf, gv, cg)):
                violations += 1
            n = f.c.size
            if p.norm() > f.norm() * g.norm() * (1 + gamma(4 * n + 32)):
                banach += 1
        assert violations == 0
        assert banach == 0

    def test_mutated_product_is_caught(self):
        rng = np.random.default_rng(41)
        f, g = random_space(rng, 4, 2, 0), random_space(rng, 4, 2, 0)
        f, g = f.like(f.c, 0 * f.r), g.like(g.c, 0 * g.r)
        p = f * g
        bad = p.like(p.c * (1 + 1e-3), p.r)
        x, t, tau = samples(rng, 100)
        fv, cf = space_value(f.kind, *space_member(f, rng), x, t, tau)
        gv, cg = space_value(g.kind, *space_member(g, rng), x, t, tau)
        assert space_encloses(p, x, t, tau, fv * gv, product_cushion(fv, cf, gv, cg))
        assert not space_encloses(bad, x, t, tau, fv * gv, product_cushion(fv, cf, gv, cg))


class TestProductRoutes:
    @pytest.mark.parametrize("batch", [(), (5,)])
    def test_separable_route_agrees_with_dense(self, monkeypatch, batch):
        rng = np.random.default_rng(42)
        f = random_space(rng, 6, 3, 0)
        g = random_space(rng, 6, 3, 0, batch=batch)
        dense = f * g
        monkeypatch.setattr(sf, "_DENSE_LIMIT", 0)
        sep = f * g
        gap = np.abs(dense.c - sep.c)
        assert np.all(gap <= dense.r + sep.r)
        assert np.all(sep.r <= 64 * dense.r + 1e-300)

    def test_batched_product_matches_single(self):
        rng = np.random.default_rng(43)
        f = random_space(rng, 4, 2, 2)
        g = random_space(rng, 4, 2, 2, batch=(3,))
        pb = f * g
        for b in range(3):
            ps = f * g.take(b)
            assert np.allclose(pb.c[b], ps.c, rtol=1e-14, atol=1e-300)
            assert np.all(np.abs(pb.c[b] - ps.c) <= pb.r[b] + ps.r)

    def test_two_batched_factors_refused(self):
        rng = np.random.default_rng(44)
        g = random_space(rng, 3, 1, 0, batch=(2,))
        with pytest.raises(ValueError):
            g * g


class TestTailsAndParity:
    def test_truncate_keeps_norm_and_members(self):
        rng = np.random.default_rng(45)
        f = random_space(rng, 8, 3, 1)
        tr = f.truncate(4, 1)
        w = [[Fraction(f.rho_x) ** k * Fraction(f.rho_t) ** abs(j) for j in range(-3, 4)] for k in range(8)]
        exact = sum(Fraction(abs(f.c[k, j, n])) * w[k][j] for k in range(8) for j in range(7) for n in range(2))
        exact += sum(Fraction(f.r[k, j, n]) * w[k][j] for k in range(8) for j in range(7) for n in range(2))
        assert Fraction(tr.norm()) >= exact
        x, t, tau = samples(rng, 100)
        v, cv = space_value(f.kind, *space_member(f, rng), x, t, tau)
        assert space_encloses(tr, x, t, tau, v, cv)

    def test_symmetric_projection(self):
        rng = np.random.default_rng(46)
        f = random_space(rng, 7, 1, 0)
        s = f.symmetric_project()
        assert s.is_symmetric() and not f.is_symmetric()
        # sin(kx) with k odd is symmetric about pi/2
        x = rng.uniform(0, math.pi, 20)
        assert np.allclose(s.evaluate(x), s.evaluate(math.pi - x))

    def test_coefficient_includes_err(self):
        f = SpaceSeries.from_array([0.0, 1.0], err=0.5, rho_x=2.0)
        co = f.coefficient(3)
        assert co.c[0] == 0.0 and co.r[0] >= 0.5 / 8


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(47)
        f = random_space(rng, 3, 1, 2, err=True, tail=True)
        g = SpaceSeries.from_lines(f.to_lines())
        assert np.array_equal(f.c, g.c) and np.array_equal(f.r, g.r)
        assert (f.tail, f.tail_k, f.tail_j, f.err, f.kind) == (g.tail, g.tail_k, g.tail_j, g.err, g.kind)

    def test_pair_round_trip(self):
        rng = np.random.default_rng(48)
        w = SpacePair(random_space(rng, 3, 1, 0), random_space(rng, 3, 1, 0))
        v = SpacePair.from_lines(w.to_lines())
        assert np.array_equal(w.U.c, v.U.c) and np.array_equal(w.V.r, v.V.r)
