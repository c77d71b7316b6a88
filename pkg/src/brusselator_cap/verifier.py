"""Contraction certificates for branches of the Brusselator maps.

For a Fourier-Taylor approximation wbar(tau) of a fixed point of H (one of
the maps in ``brusselator_maps``, with the parameter an affine function of
tau in [-1, 1]) we bound the quasi-Newton operator

    N(h) = H(wbar + Lambda h) - wbar + M h,     Lambda = I - M,

where M acts on a finite mode set P (odd k < nk_m, |j| <= K_m, both
components) and is a matrix polynomial in tau.  If

    eps >= ||H(wbar) - wbar||,   K >= sup ||DN(h)|| over ||h|| <= r,

and eps + K r < r, then N is a contraction of the closed r-ball and the map
has a unique fixed point wbar + Lambda h* with ||h*|| <= eps / (1 - K) for
every tau in [-1, 1].

K is the largest of three groups of column norms of DN = DH(W) Lambda + M,
with W the set wbar + Lambda B_r:

* columns e_i, i in P:   M e_i + DH(W) Lambda e_i;
* columns e_i in the rectangle k < nk_i, |j| <= K_i outside P:  DH(W) e_i;
* the far region {k >= nk_i} or {|j| > K_i}: a unit-norm tail direction
  pushed through DH(W) with multipliers cut at (nk_t, K_t).

All columns are Taylor order zero; multiplying by tau^n does not change the
ratio because rho_tau = 1.
"""

from __future__ import annotations

import base64
import gzip
import math
import time
import zlib
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import brusselator_maps as bm
from .ball import Ball, BallError, ball_matmul, flush, gamma, up
from .brusselator_maps import Mode, ProblemParams
from .numeric_frontend import GalerkinProblem, RHO_PERIODIC, RHO_STATIONARY, RHO_TIME
from .space_fourier import INF, SIN, SpacePair, SpaceSeries
from .taylor_enclosure import TaylorEnclosure, powers

#: default radius grid, tried from the largest down
R_GRID = tuple(2.0**-e for e in range(4, 41, 2))


class CertificateError(ValueError):
    """Malformed or inconsistent certificate data."""


# --------------------------------------------------------------------------
# boxes and cuts


@dataclass(frozen=True)
class Box:
    """Parameter p(tau) = center + half_width * tau, tau in [-1, 1].

    p is b in stationary and free mode and s in normalized mode."""

    mode: Mode
    center: float
    half_width: float
    D: int

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("negative half width")
        if self.D == 0 and self.half_width != 0:
            raise ValueError("a box of positive width needs Taylor degree >= 1")

    @property
    def lo(self) -> Fraction:
        return Fraction(self.center) - Fraction(self.half_width)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.center) + Fraction(self.half_width)

    def param(self) -> TaylorEnclosure:
        return TaylorEnclosure.variable(self.D, 1.0, self.center, self.half_width)

    def series(self) -> np.ndarray:
        s = np.zeros(self.D + 1)
        s[0] = self.center
        if self.D >= 1:
            s[1] = self.half_width
        return s

    def problem_params(self) -> ProblemParams:
        p = self.param()
        if self.mode is Mode.NORMALIZED:
            return ProblemParams(self.mode, s=p)
        return ProblemParams(self.mode, b=p)

    def tau_of(self, value: Ball) -> Ball:
        """tau with p(tau) = value."""
        if self.half_width == 0:
            raise ValueError("point box has no tau coordinate")
        return (value - Ball(self.center)) / Ball(self.half_width)

    @property
    def rho_x(self) -> float:
        return RHO_STATIONARY if self.mode is Mode.STATIONARY else RHO_PERIODIC

    @property
    def rho_t(self) -> float:
        return 1.0 if self.mode is Mode.STATIONARY else RHO_TIME


@dataclass(frozen=True)
class Cuts:
    """P: odd k < nk_m, |j| <= K_m.  Explicit columns: odd k < nk_i,
    |j| <= K_i.  Far-region multipliers are cut at (nk_t, K_t)."""

    nk_m: int
    K_m: int
    nk_i: int
    K_i: int
    nk_t: int
    K_t: int

    def __post_init__(self):
        if self.nk_i < self.nk_m or self.K_i < self.K_m:
            raise ValueError("the explicit rectangle must contain P")


def default_cuts(mode: Mode, nk_w: int, K_w: int) -> Cuts:
    """Cuts that work for the desk certificates; see the README for sizing."""
    if mode is Mode.STATIONARY:
        return Cuts(nk_m=max(nk_w, 48), K_m=0, nk_i=96, K_i=0, nk_t=nk_w, K_t=0)
    return Cuts(nk_m=max(nk_w, 40), K_m=48, nk_i=80, K_i=112, nk_t=nk_w, K_t=K_w)


# --------------------------------------------------------------------------
# maps on boxes


def apply_map(box: Box, w: SpacePair) -> SpacePair:
    if box.mode is Mode.STATIONARY:
        return bm.stationary_map(box.param(), w)
    return bm.periodic_map(box.problem_params(), w)


def linearize(box: Box, W: SpacePair):
    if box.mode is Mode.STATIONARY:
        return bm.StationaryLinearization(box.param(), W)
    return bm.PeriodicLinearization(box.problem_params(), W)


def _truncated(lin, nk: int, K: int):
    """Copy of a linearization whose multipliers are cut at (nk, K); the cut
    mass moves to the multiplier tails."""
    out = object.__new__(type(lin))
    out.__dict__.update(lin.__dict__)
    names = ("uv2", "uu") if isinstance(lin, bm.StationaryLinearization) else ("P", "G", "Ps", "Gs")
    for name in names:
        f = getattr(lin, name)
        object.__setattr__(out, name, f.truncate(nk, K))
    return out


# --------------------------------------------------------------------------
# mode sets and the finite-rank operator


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Odd k < nk, |j| <= K, U block then V block (the frontend packing)."""

    nk: int
    K: int

    def __post_init__(self):
        mask = np.zeros((self.nk, 2 * self.K + 1), bool)
        mask[1::2, :] = True
        kj = np.argwhere(mask)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "k", np.concatenate([kj[:, 0], kj[:, 0]]))
        object.__setattr__(self, "j", np.concatenate([kj[:, 1], kj[:, 1]]) - self.K)
        object.__setattr__(self, "comp", np.repeat([0, 1], len(kj)))

    @property
    def size(self) -> int:
        return self.k.size

    def weights(self, rho_x: float, rho_t: float):
        """(lower, upper) bounds of rho_x^k rho_t^|j| per index."""
        xlo, xhi = powers(rho_x, self.nk)
        tlo, thi = powers(rho_t, self.K + 1)
        aj = np.abs(self.j)
        hi = up(xhi[self.k] * thi[aj], 1)
        lo = np.nextafter(xlo[self.k] * tlo[aj] * (1 - gamma(2)), 0)
        return lo, hi

    def directions(self, c, r, rho_x, rho_t, split=None) -> SpacePair:
        """Batched pair from coefficient columns c, r of shape (size, B, nn)."""
        B, nn = c.shape[1], c.shape[2]
        h = self.size // 2
        out = []
        for part in (slice(0, h), slice(h, None)):
            a = np.zeros((B, self.nk, 2 * self.K + 1, nn))
            ar = np.zeros_like(a)
            a[:, self.mask] = c[part].transpose(1, 0, 2)
            ar[:, self.mask] = r[part].transpose(1, 0, 2)
            out.append(SpaceSeries(a, ar, SIN, rho_x, rho_t, 1.0, split))
        return SpacePair(*out)

    def one_hots(self, idx, D: int, rho_x, rho_t) -> SpacePair:
        B = len(idx)
        c = np.zeros((self.size, B, D + 1))
        c[np.asarray(idx), np.arange(B), 0] = 1.0
        return self.directions(c, np.zeros_like(c), rho_x, rho_t)

    def split_block(self, pair: SpacePair):
        """Batched pair -> block centers and radii on the mode set, each
        (size, B, nn), and an upper bound of the norm of the rest, (B,)."""
        cs, rs, rest = [], [], 0.0
        for f in (pair.U, pair.V):
            f = f.pad(self.nk, self.K)
            sl = (..., slice(0, self.nk), slice(f.K - self.K, f.K + self.K + 1), slice(None))
            cs.append(f.c[sl][:, self.mask].transpose(1, 0, 2))
            rs.append(f.r[sl][:, self.mask].transpose(1, 0, 2))
            c0, r0 = f.c.copy(), f.r.copy()
            c0[sl][:, self.mask] = 0.0
            r0[sl][:, self.mask] = 0.0
            rest = rest + np.asarray(f._with(c0, r0).norm())
        return np.concatenate(cs), np.concatenate(rs), up(rest, 1)

    def extract(self, pair: SpacePair) -> np.ndarray:
        """Block centers of an unbatched pair on this mode set, (size, nn)."""
        out = []
        for f in (pair.U, pair.V):
            f = f.pad(self.nk, self.K)
            a = f.c[: self.nk, f.K - self.K : f.K + self.K + 1]
            out.append(a[self.mask])
        return np.concatenate(out, axis=0)


def _round_float32(a: np.ndarray) -> np.ndarray:
    with np.errstate(over="raise", under="ignore"):
        return a.astype(np.float32).astype(float)


def weighted_norm(Ac, Ar, wlo, whi) -> float:
    """Upper bound of the weighted l1 operator norm of a ball matrix (n, n)
    or a Taylor matrix (nn, n, n) (rho_tau = 1)."""
    Ac, Ar = np.asarray(Ac), np.asarray(Ar)
    if Ac.ndim == 2:
        Ac, Ar = Ac[None], Ar[None]
    A = (np.abs(Ac) + Ar).sum(axis=0)
    col = up(whi @ A, A.shape[0] * Ac.shape[0] + 3)
    return float(np.max(up(col / wlo, 1))) if col.size else 0.0


@dataclass(frozen=True, eq=False)
class FiniteRankOperator:
    """M(tau) = sum_n M[n] tau^n on the mode set; Lambda = I - M.
    Entries are float32-representable so the text form is exact."""

    modes: ModeSet
    M: np.ndarray  # (nn, size, size)

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 3 or M.shape[1:] != (self.modes.size, self.modes.size):
            raise CertificateError("operator matrix has the wrong shape")
        if not np.array_equal(M, _round_float32(M)):
            raise CertificateError("operator entries must be float32-representable")
        object.__setattr__(self, "M", M)

    @property
    def nn(self) -> int:
        return self.M.shape[0]

    @staticmethod
    def from_jacobian(J: np.ndarray, modes: ModeSet) -> "FiniteRankOperator":
        """M = I - (I - J(tau))^{-1} as a truncated power series."""
        import scipy.linalg

        nn, n, _ = J.shape
        lu = scipy.linalg.lu_factor(np.eye(n) - J[0])
        Lam = [scipy.linalg.lu_solve(lu, np.eye(n))]
        for d in range(1, nn):
            acc = sum(J[l] @ Lam[d - l] for l in range(1, d + 1))
            Lam.append(scipy.linalg.lu_solve(lu, acc))
        M = -np.stack(Lam)
        M[0] += np.eye(n)
        return FiniteRankOperator(modes, _round_float32(M))

    def lambda_columns(self, idx):
        """Ball columns of Lambda = I - M: arrays (size, B, nn)."""
        idx = np.asarray(idx)
        c = -self.M[:, :, idx].transpose(1, 2, 0)
        r = np.zeros_like(c)
        diag = c[idx, np.arange(idx.size), 0] + 1.0
        c[idx, np.arange(idx.size), 0] = diag
        r[idx, np.arange(idx.size), 0] = np.spacing(np.abs(diag))
        return c, r

    def m_columns(self, idx):
        c = self.M[:, :, np.asarray(idx)].transpose(1, 2, 0)
        return c, np.zeros_like(c)

    def lambda_matrix(self):
        """Ball Taylor matrix of Lambda on P: (nn, size, size) twice."""
        c = -self.M
        r = np.zeros_like(c)
        n = self.modes.size
        d = np.arange(n)
        c[0, d, d] += 1.0
        r[0, d, d] = np.spacing(np.abs(c[0, d, d]))
        return c, r

    def lambda_norm(self, rho_x, rho_t) -> float:
        """||Lambda|| on the whole space (identity off P)."""
        lo, hi = self.modes.weights(rho_x, rho_t)
        c, r = self.lambda_matrix()
        return max(1.0, weighted_norm(c, r, lo, hi))

    def lambda_at(self, t: Ball):
        """Ball matrix Lambda_P(t)."""
        c, r = self.lambda_matrix()
        return eval_taylor_array(c.transpose(1, 2, 0), r.transpose(1, 2, 0), t)

    def lambda_inverse_norm(self, t: Ball, rho_x, rho_t) -> float:
        """Upper bound of ||Lambda(t)^{-1}|| (identity off P):
        ||Lambda_P^{-1}|| <= ||X|| / (1 - ||I - X Lambda_P||) for X ~ Lambda_P^{-1}."""
        Lc, Lr = self.lambda_at(t)
        X = np.linalg.inv(Lc)
        Ec, Er = ball_matmul(X, None, Lc, Lr)
        Ec = -Ec
        Ec[np.diag_indices_from(Ec)] += 1.0
        Er = up(Er + np.spacing(np.abs(Ec)), 1)
        lo, hi = self.modes.weights(rho_x, rho_t)
        e = weighted_norm(Ec, Er, lo, hi)
        if e >= 1.0:
            raise BallError("approximate inverse of Lambda is not accurate enough")
        x = weighted_norm(X, np.zeros_like(X), lo, hi)
        return max(1.0, (Ball(x) / (Ball(1.0) - Ball(e))).upper)

    # serialization ----------------------------------------------------------------

    def to_lines(self) -> list[str]:
        raw = zlib.compress(self.M.astype("<f4").tobytes(), 6)
        text = base64.b64encode(raw).decode("ascii")
        lines = [f"operator {self.modes.nk} {self.modes.K} {self.nn} {len(text)}"]
        lines += [text[i : i + 76] for i in range(0, len(text), 76)]
        lines.append("end")
        return lines

    @staticmethod
    def from_lines(lines: list[str]) -> "FiniteRankOperator":
        head = lines[0].split()
        if head[0] != "operator":
            raise CertificateError("not an operator block")
        nk, K, nn, length = (int(x) for x in head[1:5])
        text = "".join(lines[1:-1])
        if len(text) != length or lines[-1] != "end":
            raise CertificateError("truncated operator block")
        modes = ModeSet(nk, K)
        raw = zlib.decompress(base64.b64decode(text))
        M = np.frombuffer(raw, dtype="<f4").astype(float)
        if M.size != nn * modes.size**2:
            raise CertificateError("operator block has the wrong length")
        return FiniteRankOperator(modes, M.reshape(nn, modes.size, modes.size))


# --------------------------------------------------------------------------
# evaluation in tau


def eval_taylor_array(c, r, t: Ball):
    """Ball enclosure of sum_n (c_n +- r_n) t^n along the last axis."""
    c, r = np.asarray(c), np.asarray(r)
    nn = c.shape[-1]
    t0, dt_ = t.center, t.radius
    m = Ball(abs(t0)).upper + dt_
    m = float(np.nextafter(m, np.inf))
    if m > 1.0 + 1e-15:
        raise BallError("evaluation point outside the parameter disk")
    pw = np.array([t0**n for n in range(nn)])
    mp = np.array([m**n for n in range(nn)])
    ap = np.array([abs(t0) ** n for n in range(nn)])
    out_c = c @ pw
    spread = np.abs(c) @ np.maximum(mp - ap, 0.0)
    rad = r @ mp + spread + (np.abs(c) @ (mp * nn * 2.0 ** -50))
    rad = up(rad + np.spacing(np.abs(out_c)) * nn, 2 * nn + 4)
    return flush(out_c, rad)


def eval_series(f: SpaceSeries, t: Ball) -> SpaceSeries:
    """The series at tau = t (Taylor degree 0); tail and err carry over."""
    c, r = eval_taylor_array(f.c, f.r, t)
    return f._with(c[..., None], r[..., None], split=1)


def eval_pair(w: SpacePair, t: Ball) -> SpacePair:
    return SpacePair(eval_series(w.U, t), eval_series(w.V, t))


def _with_weights(f: SpaceSeries, rho_x: float) -> SpaceSeries:
    """Same function with a smaller x weight (norm can only decrease)."""
    if rho_x > f.rho_x:
        raise ValueError("weights may only decrease")
    return SpaceSeries(f.c, f.r, f.kind, rho_x, f.rho_t, f.rho_tau, f.split, f.tail, f.tail_k, f.tail_j, f.err)


# --------------------------------------------------------------------------
# bounds


def defect_bound(box: Box, wbar: SpacePair) -> float:
    """eps >= ||H(wbar) - wbar||."""
    return float((apply_map(box, wbar) - wbar).norm())


def fatten(w: SpacePair, e: float) -> SpacePair:
    return SpacePair(w.U.add_err(e), w.V.add_err(e))


def fatten_lambda(w: SpacePair, op: FiniteRankOperator, r: float, rho_x: float, rho_t: float) -> SpacePair:
    """Enclosure of w + Lambda B_r: (M h)_row is bounded by
    r max_i sum_n |M_n[row, i]| / w_i on P, h itself goes to err."""
    lo, _ = op.modes.weights(rho_x, rho_t)
    A = np.abs(op.M).sum(axis=0)
    rows = up(np.max(A / lo[None, :], axis=1) * r, op.nn + 3) if A.size else np.zeros(0)
    nn = w.U.D + 1
    rad = np.zeros((op.modes.size, 1, nn))
    rad[:, 0, 0] = rows
    box = op.modes.directions(np.zeros_like(rad), rad, rho_x, rho_t, split=0).take(0)
    return fatten(w + box, float(r))


@dataclass
class ColumnReport:
    p_cols: float = 0.0
    mid_cols: float = 0.0
    far: float = 0.0
    seconds: float = 0.0
    partial: bool = False

    @property
    def K(self) -> float:
        return max(self.p_cols, self.mid_cols, self.far)


def _mid_indices(cuts: Cuts) -> tuple[ModeSet, np.ndarray]:
    big = ModeSet(cuts.nk_i, cuts.K_i)
    inP = (big.k < cuts.nk_m) & (np.abs(big.j) <= cuts.K_m)
    idx = np.nonzero(~inP)[0]
    # row-major in (comp, k, j) keeps each chunk's active set small
    return big, idx


def _p_column_bound(lin, op: FiniteRankOperator, rx: float, rt: float, chunk: int, block: int = 1024) -> float:
    """max_i ||M e_i + DH(W) Lambda e_i|| / w_i.

    DH(W) e_l is computed once per l in P; its P rows form a ball matrix D
    and its other rows contribute the norm off_l.  The P rows of column i
    are (M + D - D M)[:, i] (Taylor products in tau kept to full degree;
    radii are function balls at every order so only centers cancel), the others are bounded by sum_l ||Lambda[l, i]|| off_l."""
    modes, nn = op.modes, op.nn
    n = modes.size
    lo, hi = modes.weights(rx, rt)
    Dc = np.zeros((nn, n, n))
    Dr = np.zeros((nn, n, n))
    off = np.zeros(n)
    for a in range(0, n, chunk):
        idx = np.arange(a, min(a + chunk, n))
        out = lin.apply(modes.one_hots(idx, nn - 1, rx, rt))
        c, r, rest = modes.split_block(out)
        Dc[:, :, idx] = c.transpose(2, 0, 1)
        Dr[:, :, idx] = r.transpose(2, 0, 1)
        off[idx] = rest
    G = up(np.abs(Dc) * gamma(n) + Dr, 2)
    worst = 0.0
    for b0 in range(0, n, block):
        cols = np.arange(b0, min(b0 + block, n))
        total = np.zeros((n, cols.size))
        for q in range(2 * nn - 1):
            sc = np.zeros((n, cols.size))
            sa = np.zeros_like(sc)
            sr = np.zeros_like(sc)
            if q < nn:
                Mq = op.M[q][:, cols]
                sc += Mq + Dc[q][:, cols]
                sa += np.abs(Mq) + np.abs(Dc[q][:, cols])
                sr += Dr[q][:, cols]
            for l in range(max(0, q - nn + 1), min(q, nn - 1) + 1):
                Mb = op.M[q - l][:, cols]
                cc = Dc[l] @ Mb
                sc -= cc
                sa += np.abs(cc)
                sr += G[l] @ np.abs(Mb)
            total += np.abs(sc) + up(sr, n + 3) + sa * gamma(2 * nn + 2)
        A = np.abs(op.M[:, :, cols]).sum(axis=0)
        A[cols, np.arange(cols.size)] = np.abs(1.0 - op.M[0, cols, cols]) + np.abs(op.M[1:, cols, cols]).sum(axis=0)
        A = up(A, nn + 2)
        col = up(hi @ total, n + 4 * nn + 4) + up(off @ A, n + 2)
        worst = max(worst, float(np.max(up(col / lo[cols], 2))))
    return worst


def contraction_bound(box: Box, cuts: Cuts, wbar: SpacePair, op: FiniteRankOperator, r: float,
                      chunk: int = 96, lam_norm: float | None = None, log=None,
                      give_up: float = math.inf) -> ColumnReport:
    """K >= sup ||DN(h)|| over ||h|| <= r.

    The cheap far region goes first.  Once a partial maximum reaches
    give_up the remaining stages are skipped and rep.partial is set."""
    t0 = time.time()
    rx, rt = box.rho_x, box.rho_t
    lam_norm = op.lambda_norm(rx, rt) if lam_norm is None else lam_norm
    W = fatten_lambda(wbar, op, r, rx, rt)
    lin = linearize(box, W)
    rep = ColumnReport()
    modes = op.modes
    if modes.nk != cuts.nk_m or modes.K != cuts.K_m:
        raise CertificateError("operator modes do not match the cuts")

    def stage(name, value):
        if log:
            log(f"{name}: {value:.6g} ({time.time() - t0:.1f}s)")
        rep.seconds = time.time() - t0
        rep.partial = value >= give_up
        return rep.partial

    far_lin = _truncated(lin, cuts.nk_t, cuts.K_t)
    tail_j = INF if box.mode is Mode.STATIONARY else cuts.K_i + 1
    zeros = np.zeros((2, 1, 1, wbar.U.D + 1))
    mk = lambda t: SpaceSeries(zeros, zeros, SIN, rx, rt, 1.0, None, t, cuts.nk_i, tail_j)
    out = far_lin.apply(SpacePair(mk(np.array([1.0, 0.0])), mk(np.array([0.0, 1.0]))))
    rep.far = float(np.max(out.norm()))
    if stage("far region", rep.far):
        return rep
    rep.p_cols = _p_column_bound(lin, op, rx, rt, chunk)
    if stage("P columns", rep.p_cols):
        return rep
    big, mid = _mid_indices(cuts)
    blo, _ = big.weights(rx, rt)
    for a in range(0, mid.size, chunk):
        idx = mid[a : a + chunk]
        out = lin.apply(big.one_hots(idx, wbar.U.D, rx, rt))
        val = float(np.max(up(np.asarray(out.norm()) / blo[idx], 1)))
        rep.mid_cols = max(rep.mid_cols, val)
        if rep.mid_cols >= give_up:
            break
    stage("explicit columns", rep.mid_cols)
    return rep


def accepts(eps: float, K: float, r: float) -> bool:
    """eps + K r < r in rounded-up arithmetic."""
    return bool((Ball(eps) + Ball(K) * Ball(r)).upper < r)


def r_min_of(eps: float, K: float) -> float:
    return (Ball(eps) / (Ball(1.0) - Ball(K))).upper


# --------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    box: Box
    cuts: Cuts
    wbar: SpacePair
    op: FiniteRankOperator
    eps: float = math.nan
    K: float = math.nan
    r_max: float = math.nan
    r_min: float = math.nan
    lam_norm: float = math.nan
    accepted: bool = False
    meta: dict = field(default_factory=dict)

    # text form ----------------------------------------------------------------

    def to_text(self) -> str:
        b, c = self.box, self.cuts
        head = [
            "brusselator-certificate 1",
            f"mode {b.mode.value}",
            f"box {b.center.hex()} {b.half_width.hex()} {b.D}",
            f"cuts {c.nk_m} {c.K_m} {c.nk_i} {c.K_i} {c.nk_t} {c.K_t}",
            f"weights {b.rho_x.hex()} {b.rho_t.hex()} {(1.0).hex()}",
            f"eps {self.eps.hex()}",
            f"K {self.K.hex()}",
            f"r {self.r_max.hex()} {self.r_min.hex()}",
            f"lambda {self.lam_norm.hex()}",
            f"accepted {int(self.accepted)}",
        ]
        head += [f"meta {k} {v}" for k, v in sorted(self.meta.items())]
        return "\n".join(head + self.wbar.to_lines() + self.op.to_lines()) + "\n"

    @staticmethod
    def from_text(text: str) -> "Certificate":
        lines = text.splitlines()
        if not lines or lines[0] != "brusselator-certificate 1":
            raise CertificateError("not a certificate file")
        kv, meta = {}, {}
        i = 1
        while i < len(lines) and lines[i] != "pair":
            parts = lines[i].split()
            if parts[0] == "meta":
                meta[parts[1]] = " ".join(parts[2:])
            else:
                kv[parts[0]] = parts[1:]
            i += 1
        try:
            mode = Mode(kv["mode"][0])
            box = Box(mode, float.fromhex(kv["box"][0]), float.fromhex(kv["box"][1]), int(kv["box"][2]))
            cuts = Cuts(*(int(x) for x in kv["cuts"]))
            j = lines.index("end", lines.index("end", i) + 1)
            wbar = SpacePair.from_lines(lines[i : j + 1])
            op = FiniteRankOperator.from_lines(lines[j + 1 : lines.index("end", j + 1) + 1])
            return Certificate(box, cuts, wbar, op, float.fromhex(kv["eps"][0]), float.fromhex(kv["K"][0]),
                               float.fromhex(kv["r"][0]), float.fromhex(kv["r"][1]),
                               float.fromhex(kv["lambda"][0]), bool(int(kv["accepted"][0])), meta)
        except (KeyError, IndexError, ValueError) as e:
            raise CertificateError(f"malformed certificate: {e}") from e

    def save(self, path) -> None:
        path = Path(path)
        data = self.to_text().encode()
        if path.suffix == ".gz":
            data = gzip.compress(data, 6)
        path.write_bytes(data)

    @staticmethod
    def load(path) -> "Certificate":
        data = Path(path).read_bytes()
        if data[:2] == b"\x1f\x8b":
            data = gzip.decompress(data)
        return Certificate.from_text(data.decode())


def galerkin_of(box: Box, nk: int, K: int) -> GalerkinProblem:
    return GalerkinProblem(box.mode, nk, K, box.series())


def build_operator(box: Box, cuts: Cuts, wbar: SpacePair) -> FiniteRankOperator:
    """Finite-rank part from the floating Galerkin Jacobian on P."""
    modes = ModeSet(cuts.nk_m, cuts.K_m)
    prob = galerkin_of(box, cuts.nk_m, cuts.K_m)
    x = modes.extract(wbar)
    J = prob.jacobian(x)
    return FiniteRankOperator.from_jacobian(J, modes)


def prove(box: Box, wbar: SpacePair, cuts: Cuts, op: FiniteRankOperator | None = None,
          r_grid=R_GRID, log=None, meta=None) -> Certificate:
    """Search the radius grid (largest first) for an accepted contraction."""
    if op is None:
        op = build_operator(box, cuts, wbar)
    cert = Certificate(box, cuts, wbar, op, meta=dict(meta or {}))
    cert.eps = defect_bound(box, wbar)
    cert.lam_norm = op.lambda_norm(box.rho_x, box.rho_t)
    if log:
        log(f"eps = {cert.eps:.6g}, ||Lambda|| = {cert.lam_norm:.6g}")
    for r in sorted(r_grid, reverse=True):
        if r <= cert.eps:
            break
        try:
            # any K at or above (r - eps) / r rejects this radius
            stop = ((Ball(r) - Ball(cert.eps)) / Ball(r)).upper
            rep = contraction_bound(box, cuts, wbar, op, r, lam_norm=cert.lam_norm, log=log, give_up=stop)
        except BallError as e:
            if log:
                log(f"r = {r:.3g}: {e}")
            continue
        if log:
            log(f"r = {r:.3g}: K = {rep.K:.6g}")
        if accepts(cert.eps, rep.K, r):
            cert.K, cert.r_max, cert.r_min, cert.accepted = rep.K, r, r_min_of(cert.eps, rep.K), True
            return cert
        if rep.K < 1 and r_min_of(cert.eps, rep.K) >= r:
            break
        cert.K, cert.r_max = rep.K, r
    return cert


@dataclass
class VerifyReport:
    ok: bool
    eps: float
    K: float
    lam_norm: float
    messages: list


def verify(cert: Certificate, log=None) -> VerifyReport:
    """Recompute eps, ||Lambda|| and K(r_max) from the stored data."""
    msgs = []
    if not cert.accepted:
        return VerifyReport(False, cert.eps, cert.K, cert.lam_norm, ["certificate is marked rejected"])
    if not (cert.wbar.is_symmetric()):
        msgs.append("approximation is not in the symmetric subspace")
    eps = defect_bound(cert.box, cert.wbar)
    lam = cert.op.lambda_norm(cert.box.rho_x, cert.box.rho_t)
    rep = contraction_bound(cert.box, cert.cuts, cert.wbar, cert.op, cert.r_max, lam_norm=lam, log=log)
    if eps > cert.eps:
        msgs.append(f"defect {eps!r} exceeds the stored {cert.eps!r}")
    if rep.K > cert.K:
        msgs.append(f"contraction constant {rep.K!r} exceeds the stored {cert.K!r}")
    if not accepts(eps, rep.K, cert.r_max):
        msgs.append("eps + K r < r fails")
    if cert.r_min < r_min_of(eps, rep.K):
        msgs.append("stored r_min is too small")
    return VerifyReport(not msgs, eps, rep.K, lam, msgs)


# --------------------------------------------------------------------------
# gluing and the Hopf junction


@dataclass
class GlueReport:
    ok: bool
    lhs: float
    rhs: float
    message: str = ""


def glue(a: Certificate, b: Certificate) -> GlueReport:
    """Right end of a and left end of b are the same solution:
    ||Lambda_b(-1)^{-1}|| (||wbar_a(1) - wbar_b(-1)|| + ||Lambda_a|| r_min_a) < r_max_b."""
    if a.box.mode is not b.box.mode:
        return GlueReport(False, math.inf, 0.0, "different modes")
    if a.box.hi != b.box.lo:
        return GlueReport(False, math.inf, 0.0, "boxes do not share an endpoint")
    if not (a.accepted and b.accepted):
        return GlueReport(False, math.inf, 0.0, "both certificates must be accepted")
    d = float((eval_pair(a.wbar, Ball(1.0)) - eval_pair(b.wbar, Ball(-1.0))).norm())
    inv = b.op.lambda_inverse_norm(Ball(-1.0), b.box.rho_x, b.box.rho_t)
    lhs = (Ball(inv) * (Ball(d) + Ball(a.lam_norm) * Ball(a.r_min))).upper
    return GlueReport(lhs < b.r_max, lhs, b.r_max)


def enclose_b(cert: Certificate) -> TaylorEnclosure:
    """b(tau) of the certified normalized-mode solution, B N_s - 2 over W."""
    if cert.box.mode is not Mode.NORMALIZED:
        raise ValueError("b is induced only in normalized mode")
    W = fatten_lambda(cert.wbar, cert.op, cert.r_min, cert.box.rho_x, cert.box.rho_t)
    _, b = bm.induced_alpha_b(cert.box.param(), W.U, W.V)
    return b


def enclose_alpha(cert: Certificate) -> TaylorEnclosure:
    W = fatten_lambda(cert.wbar, cert.op, cert.r_min, cert.box.rho_x, cert.box.rho_t)
    if cert.box.mode is Mode.NORMALIZED:
        return bm.induced_alpha_b(cert.box.param(), W.U, W.V)[0]
    return bm.induced_alpha_free(W.U, W.V)


@dataclass
class JunctionReport:
    ok: bool
    b_star: Ball
    tau_star: Ball
    lhs: float
    rhs: float
    message: str = ""


def hopf_junction(stat: Certificate, per: Certificate) -> JunctionReport:
    """The time average of the s = 0 periodic solution lies in the
    uniqueness ball of the stationary branch at b(0)."""
    nan = Ball(0.0)
    if stat.box.mode is not Mode.STATIONARY or per.box.mode is not Mode.NORMALIZED:
        return JunctionReport(False, nan, nan, math.inf, 0.0, "need a stationary and a normalized certificate")
    if not (stat.accepted and per.accepted):
        return JunctionReport(False, nan, nan, math.inf, 0.0, "both certificates must be accepted")
    if per.box.half_width == 0:
        if per.box.center != 0.0:
            return JunctionReport(False, nan, nan, math.inf, 0.0, "periodic box does not contain s = 0")
        t_per = Ball(0.0)
    else:
        t_per = per.box.tau_of(Ball(0.0))
    b_star = enclose_b(per).eval(t_per)
    try:
        tau = stat.box.tau_of(b_star)
    except ValueError as e:
        return JunctionReport(False, b_star, nan, math.inf, 0.0, str(e))
    if tau.norm_upper() > 1.0:
        return JunctionReport(False, b_star, tau, math.inf, 0.0, "b(0) lies outside the stationary box")
    avg = []
    for f in eval_pair(per.wbar, t_per).U, eval_pair(per.wbar, t_per).V:
        g = SpaceSeries(f.c[:, f.K : f.K + 1], f.r[:, f.K : f.K + 1], SIN, stat.box.rho_x, 1.0, 1.0, 1)
        avg.append(g)
    ws = eval_pair(stat.wbar, tau)
    d = float((SpacePair(*avg) - ws).norm())
    inv = stat.op.lambda_inverse_norm(tau, stat.box.rho_x, stat.box.rho_t)
    lhs = (Ball(inv) * (Ball(d) + Ball(per.lam_norm) * Ball(per.r_min))).upper
    return JunctionReport(lhs < stat.r_max, b_star, tau, lhs, stat.r_max)


# --------------------------------------------------------------------------
# branch files


@dataclass
class Branch:
    """A Fourier-Taylor approximation on a box, before certification."""

    box: Box
    wbar: SpacePair
    meta: dict = field(default_factory=dict)

    def to_text(self) -> str:
        b = self.box
        head = ["brusselator-branch 1", f"mode {b.mode.value}", f"box {b.center.hex()} {b.half_width.hex()} {b.D}"]
        head += [f"meta {k} {v}" for k, v in sorted(self.meta.items())]
        return "\n".join(head + self.wbar.to_lines()) + "\n"

    @staticmethod
    def from_text(text: str) -> "Branch":
        lines = text.splitlines()
        if not lines or lines[0] != "brusselator-branch 1":
            raise CertificateError("not a branch file")
        kv, meta = {}, {}
        i = 1
        while i < len(lines) and lines[i] != "pair":
            parts = lines[i].split()
            if parts[0] == "meta":
                meta[parts[1]] = " ".join(parts[2:])
            else:
                kv[parts[0]] = parts[1:]
            i += 1
        try:
            box = Box(Mode(kv["mode"][0]), float.fromhex(kv["box"][0]), float.fromhex(kv["box"][1]), int(kv["box"][2]))
            return Branch(box, SpacePair.from_lines(lines[i:]), meta)
        except (KeyError, IndexError, ValueError) as e:
            raise CertificateError(f"malformed branch file: {e}") from e

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @staticmethod
    def load(path) -> "Branch":
        return Branch.from_text(Path(path).read_text())
