import csv
import math

import numpy as np
import pytest

from brusselator_cap import numeric_frontend as nf
from brusselator_cap.brusselator_maps import Mode

from oracles import bvp_oracle


def series_values(p, x, xs):
    u, v = p.unpack(x)
    S = np.sin(np.outer(xs, np.arange(p.nk)))
    return S @ u[:, 0, 0], S @ v[:, 0, 0]


class TestNewton:
    def test_scalar_fixed_point(self):
        res = nf.newton_solve(lambda x: np.cos(x), np.array([1.0]), tol=1e-14)
        assert res.converged and abs(res.x[0] - 0.7390851332151607) < 1e-14

    def test_divergence_is_reported(self):
        with pytest.raises(nf.NumericalFailure), np.errstate(over="ignore"):
            nf.newton_solve(lambda x: x + np.exp(x) ** 400, np.array([10.0]))


class TestStationary:
    @pytest.mark.parametrize("b", [0.0, 2.0, 4.0])
    def test_matches_independent_bvp_solver(self, b):
        p, x = nf.stationary_solution(31, b)
        xs = np.linspace(0.1, 3.0, 7)
        U, V = series_values(p, x, xs)
        Uo, Vo = bvp_oracle(b, xs)
        assert np.max(np.abs(U - Uo)) < 1e-6
        assert np.max(np.abs(V - Vo)) < 1e-6

    def test_jacobian_matches_differences(self):
        p, x = nf.stationary_solution(15, 3.0)
        J = p.jacobian(x)[0]
        rng = np.random.default_rng(70)
        for _ in range(5):
            d = rng.normal(size=x.size)
            h = 1e-6
            fd = (p.residual(x + h * d) - p.residual(x - h * d)) / (2 * h) + d
            assert np.linalg.norm(fd - J @ d) <= 1e-6 * np.linalg.norm(J @ d)

    def test_taylor_branch_tracks_solutions(self):
        p, x = nf.stationary_solution(31, 4.0)
        series = [4.0, 0.125] + [0.0] * 7
        W = nf.taylor_branch(p, x, series)
        assert nf.branch_residual(p, W, series) < 1e-9
        for t in (-1.0, 1.0):
            _, xt = nf.stationary_solution(31, 4.0 + 0.125 * t, x)
            assert np.max(np.abs(nf.tevaluate(W, t) - xt)) < 1e-9

    def test_higher_taylor_order_improves(self):
        p, x = nf.stationary_solution(31, 4.0)
        coarse = nf.branch_residual(p, nf.taylor_branch(p, x, [4.0, 0.125]), [4.0, 0.125])
        fine = nf.branch_residual(p, nf.taylor_branch(p, x, [4.0, 0.125] + [0.0] * 8), [4.0, 0.125] + [0.0] * 8)
        assert fine < coarse * 1e-3

    def test_symmetry_is_built_in(self):
        p = nf.stationary_problem(9)
        assert np.all(p.mask[0::2] == False) and np.all(p.mask[1::2])


class TestEigen:
    def test_linearization_eigenvalues_at_zero_b_are_stable(self):
        scan = nf.eigen_scan(0.0, 0.5, 2, N=16)
        assert all(pt.eigenvalues[0].real < 0 for pt in scan)

    def test_crossing_bracketed(self):
        scan = nf.eigen_scan(2.5, 2.9, 4, N=24)
        changes = nf.sign_changes(scan)
        assert len(changes) == 1 and 2.5 < changes[0] < 2.9
        lead = scan[-1].eigenvalues[0]
        assert lead.real > 0 and abs(lead.imag) > 0.1

    def test_eigen_csv(self, tmp_path):
        scan = nf.eigen_scan(1.0, 1.2, 2, N=8)
        path = tmp_path / "eig.csv"
        nf.write_eigen_csv(scan, path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["b", "re1", "im1", "re2", "im2"] and len(rows) == 4


@pytest.fixture(scope="module")
def hopf():
    return nf.hopf_point(15, 6)


class TestPeriodic:
    def test_hopf_normalization(self, hopf):
        p, x, alpha, b = hopf
        u, _ = p.unpack(x)
        # A u = 0 and B u = 1 on the first sine mode
        assert abs(u[1, p.K + 1, 0]) < 1e-10 and abs(u[1, p.K - 1, 0] - 1.0) < 1e-10
        assert alpha > 0 and 2.6 < b < 2.8

    def test_residual_small(self, hopf):
        p, x, _, _ = hopf
        assert np.max(np.abs(p.residual(x))) < 1e-11

    def test_free_normalized_round_trip(self, hopf):
        p, x, _, _ = hopf
        s = 2.0**-11
        pts = nf.continue_branch(p, x, 0.0, s)
        xs = pts[-1][1]
        q, y, alpha, b = nf.normalized_to_free(p.with_param([s]), xs, s)
        assert q.mode is Mode.FREE and np.max(np.abs(q.residual(y))) < 1e-9
        r, z = nf.free_to_normalized(q, y)
        assert r.param[0] == pytest.approx(s, rel=1e-9)
        assert np.allclose(z, xs, atol=1e-9)

    def test_snapshot_rows(self, hopf, tmp_path):
        p, x, alpha, _ = hopf
        rows = nf.snapshot(p, x, alpha, nx=5)
        assert len(rows) == 12 * 5
        assert rows[-1][0] == pytest.approx(11 / 12 * nf.period(alpha))
        nf.write_snapshot_csv(rows, tmp_path / "s.csv")
        assert sum(1 for _ in open(tmp_path / "s.csv")) == 61
