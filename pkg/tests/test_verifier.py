import math
from dataclasses import replace

import numpy as np
import pytest

from brusselator_cap import cli
from brusselator_cap import numeric_frontend as nf
from brusselator_cap import verifier as vf
from brusselator_cap.ball import Ball
from brusselator_cap.brusselator_maps import Mode

CUTS = vf.Cuts(nk_m=48, K_m=0, nk_i=96, K_i=0, nk_t=32, K_t=0)
R_GRID = tuple(2.0**-e for e in range(4, 41, 2))


@pytest.fixture(scope="module")
def certs():
    """Two adjacent stationary boxes [3.875, 4.125] and [4.125, 4.375]."""
    out = []
    for c in (4.0, 4.25):
        box = vf.Box(Mode.STATIONARY, c, 0.125, 12)
        br = cli.stationary_branch(box, 31)
        out.append(vf.prove(box, br.wbar, CUTS, r_grid=R_GRID))
    return out


class TestAcceptanceRule:
    @pytest.mark.parametrize("eps, K, r, ok", [(0.1, 0.5, 0.3, True), (0.2, 0.5, 0.3, False),
                                               (0.15, 0.5, 0.3, False), (0.0, 1.0, 1.0, False)])
    def test_strict_inequality(self, eps, K, r, ok):
        assert vf.accepts(eps, K, r) is ok

    def test_r_min_is_an_upper_bound(self):
        r = vf.r_min_of(0.1, 0.5)
        assert r >= 0.2 and r <= 0.2 * (1 + 1e-15)

    def test_box_and_cut_validation(self):
        with pytest.raises(ValueError):
            vf.Box(Mode.STATIONARY, 1.0, -0.1, 2)
        with pytest.raises(ValueError):
            vf.Box(Mode.STATIONARY, 1.0, 0.1, 0)
        with pytest.raises(ValueError):
            vf.Cuts(10, 2, 8, 2, 4, 0)


class TestStationaryCertificate:
    def test_accepted(self, certs):
        for c in certs:
            assert c.accepted and c.eps + c.K * c.r_max < c.r_max and c.K < 1
            assert c.r_min <= c.r_max

    def test_floating_lower_bound_on_contraction(self, certs):
        """K dominates ||DN(0)|| at tau = 0 computed from the dense frontend Jacobian."""
        cert = certs[0]
        big = vf.ModeSet(CUTS.nk_i, 0)
        x = big.extract(vf.eval_pair(cert.wbar, Ball(0.0)))[:, 0]
        J = nf.GalerkinProblem(Mode.STATIONARY, CUTS.nk_i, 0, np.array([cert.box.center])).jacobian(x)[0]
        inP = big.k < CUTS.nk_m
        Mp = np.zeros_like(J)
        Mp[np.ix_(inP, inP)] = cert.op.M[0]
        DN = J @ (np.eye(J.shape[0]) - Mp) + Mp
        w = cert.box.rho_x ** big.k.astype(float)
        K_float = np.max((w @ np.abs(DN)) / w)
        assert K_float <= cert.K
        assert K_float > 0.1

    def test_verify_recomputes(self, certs):
        for c in certs:
            rep = vf.verify(vf.Certificate.from_text(c.to_text()))
            assert rep.ok, rep.messages
            assert rep.eps <= c.eps and rep.K <= c.K

    def test_tampered_bounds_fail(self, certs):
        c = certs[0]
        assert not vf.verify(replace(c, eps=c.eps / 4)).ok
        assert not vf.verify(replace(c, K=c.K / 2)).ok
        assert not vf.verify(replace(c, accepted=False)).ok

    def test_tampered_approximation_fails(self, certs):
        c = certs[0]
        U = c.wbar.U
        cu = U.c.copy()
        cu[1, 0, 0] += 1e-3
        bad = replace(c, wbar=vf.SpacePair(U.like(cu, U.r), c.wbar.V))
        rep = vf.verify(bad)
        assert not rep.ok and rep.eps > c.eps

    def test_text_round_trip(self, certs, tmp_path):
        c = certs[0]
        for name in ("c.cert", "c.cert.gz"):
            c.save(tmp_path / name)
            d = vf.Certificate.load(tmp_path / name)
            assert d.to_text() == c.to_text()

    def test_malformed_text(self):
        with pytest.raises(vf.CertificateError):
            vf.Certificate.from_text("nonsense\n")
        with pytest.raises(vf.CertificateError):
            vf.Certificate.from_text("brusselator-certificate 1\nmode stationary\npair\n")


class TestGlue:
    def test_adjacent_boxes_glue(self, certs):
        rep = vf.glue(*certs)
        assert rep.ok and rep.lhs < rep.rhs

    def test_order_matters(self, certs):
        rep = vf.glue(certs[1], certs[0])
        assert not rep.ok and "endpoint" in rep.message

    def test_rejected_certificate_does_not_glue(self, certs):
        rep = vf.glue(certs[0], replace(certs[1], accepted=False))
        assert not rep.ok

    def test_junction_needs_matching_modes(self, certs):
        assert not vf.hopf_junction(certs[0], certs[1]).ok


class TestContractionBound:
    def test_early_exit_is_marked_partial(self, certs):
        c = certs[0]
        rep = vf.contraction_bound(c.box, c.cuts, c.wbar, c.op, c.r_max, give_up=0.0)
        assert rep.partial and rep.p_cols == 0.0 and rep.mid_cols == 0.0 and rep.far > 0

    def test_full_bound_matches_certificate(self, certs):
        c = certs[0]
        rep = vf.contraction_bound(c.box, c.cuts, c.wbar, c.op, c.r_max)
        assert not rep.partial and rep.K == c.K

    def test_bound_grows_with_radius(self, certs):
        c = certs[0]
        small = vf.contraction_bound(c.box, c.cuts, c.wbar, c.op, c.r_max).K
        large = vf.contraction_bound(c.box, c.cuts, c.wbar, c.op, 2.0**-4).K
        assert large >= small

    def test_mismatched_cuts_refused(self, certs):
        c = certs[0]
        with pytest.raises(vf.CertificateError):
            vf.contraction_bound(c.box, replace(c.cuts, nk_m=40), c.wbar, c.op, c.r_max)


class TestFiniteRankOperator:
    def test_lambda_inverts_galerkin_block(self):
        rng = np.random.default_rng(80)
        modes = vf.ModeSet(6, 0)
        n = modes.size
        J = rng.normal(size=(2, n, n)) * 0.1
        op = vf.FiniteRankOperator.from_jacobian(J, modes)
        Lam0 = np.eye(n) - op.M[0]
        assert np.allclose(Lam0 @ (np.eye(n) - J[0]), np.eye(n), atol=1e-6)

    def test_text_round_trip(self):
        rng = np.random.default_rng(81)
        modes = vf.ModeSet(4, 1)
        op = vf.FiniteRankOperator.from_jacobian(rng.normal(size=(3, modes.size, modes.size)) * 0.1, modes)
        back = vf.FiniteRankOperator.from_lines(op.to_lines())
        assert np.array_equal(back.M, op.M)

    def test_inverse_norm_bounds_floating_value(self):
        rng = np.random.default_rng(82)
        modes = vf.ModeSet(6, 0)
        op = vf.FiniteRankOperator.from_jacobian(rng.normal(size=(1, modes.size, modes.size)) * 0.1, modes)
        w = 1.5 ** modes.k.astype(float)
        Lam = np.eye(modes.size) - op.M[0]
        inv = np.linalg.inv(Lam)
        assert np.max((w @ np.abs(inv)) / w) <= op.lambda_inverse_norm(Ball(0.0), 1.5, 1.0)


class TestBranchFile:
    def test_round_trip(self, tmp_path):
        box = vf.Box(Mode.STATIONARY, 1.0, 0.125, 3)
        br = cli.stationary_branch(box, 7)
        br.save(tmp_path / "b.branch")
        back = vf.Branch.load(tmp_path / "b.branch")
        assert back.box == box and np.array_equal(back.wbar.U.c, br.wbar.U.c)
        assert back.meta["spatial_cut"] == "7"
