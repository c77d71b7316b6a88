"""Diagonal operators on sine x cosi series.

* ``inverse_laplacian``: (d^2/dx^2)^{-1}, sin(kx) -> -sin(kx)/k^2.
* ``resolvent``: L = (alpha d/dt - d d^2/dx^2 + b)^{-1}.  On the pair of modes
  (k, j), (k, -j) it acts as

      u_kj  ->  ((d k^2 + b) u_kj - alpha j u_k(-j)) / ((d k^2 + b)^2 + alpha^2 j^2).

* ``resolvent_dt``: d/dt composed with the resolvent.

Block slots are transformed exactly in Taylor/ball arithmetic.  Tail and err
terms are multiplied by a supremum of the per-mode l1 operator norm over
the region they live on.  For the pair block with c = d k^2 + b, y = alpha |j|
that norm is f(c, y) = (c + y) / (c^2 + y^2); ``mode_bound`` returns the
2-norm version 1/sqrt(c^2 + y^2) used in the classical tail estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ball import Ball, BallError, flush, up
from .space_fourier import INF, SIN, SpacePair, SpaceSeries
from .taylor_enclosure import TaylorEnclosure, t_mul, t_recip

#: max over t >= 0 of (1 + t) / (1 + t^2), rounded up
PEAK = (1 + math.sqrt(2)) / 2 * (1 + 1e-12)
_T_STAR = math.sqrt(2) - 1


def as_taylor(x, degree: int, rho: float = 1.0) -> TaylorEnclosure:
    if isinstance(x, TaylorEnclosure):
        if x.degree != degree:
            raise ValueError("Taylor degree mismatch")
        return x
    return TaylorEnclosure.constant(x, degree, rho)


def center_and_spread(x) -> tuple[float, float]:
    """(c0, delta): x(tau) = c0 + e(tau) with ||e|| <= delta on the disk."""
    if isinstance(x, TaylorEnclosure):
        c0 = float(x.c[0])
        rest = np.abs(x.c[1:]) + x.r[1:]
        from .taylor_enclosure import powers

        _, hi = powers(x.rho, x.c.size)
        delta = float(up(x.r[0] + rest @ hi[1:], x.c.size + 2)) if x.c.size > 1 else float(x.r[0])
        return c0, delta
    b = Ball.coerce(x)
    return b.center, b.radius


@dataclass(frozen=True)
class OperatorParams:
    alpha: object
    d: float
    b_shift: object

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("diffusion coefficient must be positive")


# --------------------------------------------------------------------------
# inverse Laplacian


def inverse_laplacian(f):
    """sin(kx) -> -sin(kx)/k^2 on a SpaceSeries or componentwise on a SpacePair."""
    if isinstance(f, SpacePair):
        return SpacePair(inverse_laplacian(f.U), inverse_laplacian(f.V))
    if f.kind != SIN:
        raise ValueError("inverse Laplacian needs a sine series")
    k = np.arange(f.nk, dtype=float)
    k2 = np.where(k > 0, k * k, 1.0)[:, None, None]
    c = -f.c / k2
    r = up(f.r / k2 + np.spacing(np.abs(c)), 2)
    tail_fac = 1.0 if f.tail_j < INF else 1.0 / (f.tail_k * f.tail_k)
    tail = up(np.asarray(f.tail) * tail_fac, 2) if np.any(np.asarray(f.tail) > 0) else f.tail
    return f._with(c, r, tail=tail, err=f.err)


def laplacian(f: SpaceSeries) -> SpaceSeries:
    """Exact on the block (sin(kx) -> -k^2 sin(kx)); tails must be empty."""
    if np.any(np.asarray(f.tail) > 0) or np.any(np.asarray(f.err) > 0):
        raise ValueError("laplacian is unbounded on tails")
    k2 = (np.arange(f.nk, dtype=float) ** 2)[:, None, None]
    c = -f.c * k2
    return f._with(c, up(f.r * k2 + np.spacing(np.abs(c)), 2))


def dt(f: SpaceSeries) -> SpaceSeries:
    """Exact time derivative on the block: (d/dt f)_m = m f_{-m}."""
    if np.any(np.asarray(f.tail) > 0) or np.any(np.asarray(f.err) > 0):
        raise ValueError("d/dt is unbounded on tails")
    m = np.arange(-f.K, f.K + 1, dtype=float)[:, None]
    c = m * f.c[..., ::-1, :]
    return f._with(c, np.abs(m) * f.r[..., ::-1, :])


def apply_heat(p: OperatorParams, f: SpaceSeries) -> SpaceSeries:
    """(alpha d/dt - d d^2/dx^2 + b) f on a block-only series."""
    a = as_taylor(p.alpha, f.D, f.rho_tau)
    b = as_taylor(p.b_shift, f.D, f.rho_tau)
    return dt(f).scale(a) - laplacian(f).scale(p.d) + f.scale(b)


# --------------------------------------------------------------------------
# resolvent


def _mode_arrays(p: OperatorParams, nk: int, K: int, D: int, rho: float):
    """Taylor arrays (c_k, alpha, 1/Den_kj) for the block."""
    alpha = as_taylor(p.alpha, D, rho)
    b = as_taylor(p.b_shift, D, rho)
    k = np.arange(nk, dtype=float)
    dk2 = Ball(p.d)
    ck_c = np.zeros((nk, D + 1))
    ck_r = np.zeros((nk, D + 1))
    for i in range(nk):
        s = b + (dk2 * Ball(k[i] * k[i]))
        ck_c[i], ck_r[i] = s.c, s.r
    j = np.arange(-K, K + 1, dtype=float)
    aj_c = alpha.c[None, :] * j[:, None]
    aj_r = up(alpha.r[None, :] * np.abs(j)[:, None] + np.spacing(np.abs(aj_c)), 2)
    c2_c, c2_r = t_mul(ck_c, ck_r, ck_c, ck_r, rho)
    a2_c, a2_r = t_mul(aj_c, aj_r, aj_c, aj_r, rho)
    den_c = c2_c[:, None, :] + a2_c[None, :, :]
    den_r = up(c2_r[:, None, :] + a2_r[None, :, :] + np.spacing(np.abs(den_c)), 2)
    split = min(alpha.split, b.split)
    if D > 0:
        split = min(split, D)
    return (ck_c, ck_r), (aj_c, aj_r), (den_c, den_r), split


def _block_apply(p: OperatorParams, f: SpaceSeries, with_dt: bool):
    D, K, nk = f.D, f.K, f.nk
    (ck_c, ck_r), (aj_c, aj_r), (den_c, den_r), split = _mode_arrays(p, nk, K, D, f.rho_tau)
    valid = np.ones(nk, bool)
    if f.kind == SIN:
        valid[0] = False
    one = np.zeros(D + 1)
    one[0] = 1.0
    dc = np.where(valid[:, None, None], den_c, one)
    dr = np.where(valid[:, None, None], den_r, 0.0)
    ic, ir, s_inv = t_recip(dc, dr, split, f.rho_tau)
    ic = np.where(valid[:, None, None], ic, 0.0)
    ir = np.where(valid[:, None, None], ir, 0.0)
    # diagonal coefficient a = c_k / Den and cross coefficient e = alpha j / Den
    a_c, a_r = t_mul(np.broadcast_to(ck_c[:, None, :], ic.shape), np.broadcast_to(ck_r[:, None, :], ic.shape), ic, ir, f.rho_tau)
    e_c, e_r = t_mul(np.broadcast_to(aj_c[None], ic.shape), np.broadcast_to(aj_r[None], ic.shape), ic, ir, f.rho_tau)
    fc, fr = f.c, f.r
    flip_c, flip_r = fc[..., ::-1, :], fr[..., ::-1, :]
    if not with_dt:
        # out_j = a_j u_j - e_j u_{-j}
        p1c, p1r = t_mul(a_c, a_r, fc, fr, f.rho_tau)
        p2c, p2r = t_mul(e_c, e_r, flip_c, flip_r, f.rho_tau)
        c = p1c - p2c
    else:
        # out_m = m (L u)_{-m} = m (a_{-m} u_{-m} - e_{-m} u_m) = m a_m u_{-m} + m e_m u_m
        m = np.arange(-K, K + 1, dtype=float)[:, None]
        p1c, p1r = t_mul(a_c * m, a_r * np.abs(m), flip_c, flip_r, f.rho_tau)
        p2c, p2r = t_mul(e_c * m, e_r * np.abs(m), fc, fr, f.rho_tau)
        c = p1c + p2c
    r = up(p1r + p2r + np.spacing(np.abs(c)), 2)
    out_split = min(f.split, s_inv, split)
    if D > 0:
        out_split = min(out_split, D)
    return flush(c, r), out_split


def _f(c: Ball, y: Ball) -> Ball:
    return (c + y) / (c * c + y * y)


def _l1_sup(c1: float, alpha: float, j1: int, jmax: float = INF) -> float:
    """Upper bound of sup f(c, alpha |j|) over c >= c1, j1 <= |j| <= jmax."""
    if c1 <= 0:
        raise BallError("resolvent symbol not bounded away from zero")
    cb = Ball(c1)
    cands = [j1]
    if alpha > 0:
        jt = c1 * _T_STAR / alpha
        for jj in (math.floor(jt), math.ceil(jt)):
            if j1 <= jj <= jmax:
                cands.append(int(jj))
    best = max(_f(cb, Ball(alpha) * Ball(j)).upper for j in cands)
    if alpha > 0:
        # once alpha j t* > c1 the optimal c is below c1 and the block value is
        # at most PEAK / (alpha j), decreasing in j
        jstar = max(j1, math.floor(c1 / (_T_STAR * alpha)) + 1)
        if jstar <= jmax:
            best = max(best, (Ball(PEAK) / (Ball(alpha) * Ball(jstar))).upper)
    return best


def region_factor(p: OperatorParams, kind: str, tail_k: float, tail_j: float, with_dt: bool = False) -> float:
    """Upper bound of the l1 operator norm of the resolvent (or of d/dt o
    resolvent) restricted to {k >= tail_k} or {|j| >= tail_j}.  Passing
    tail_k = kmin gives the bound on the whole space."""
    kmin = 1 if kind == SIN else 0
    a0, da = center_and_spread(p.alpha)
    b0, db = center_and_spread(p.b_shift)
    if da > 0 and a0 <= da:
        raise BallError("alpha not bounded away from zero")
    alo = max(a0, 0.0)

    def c_of(k):
        return (Ball(p.d) * Ball(float(k * k)) + Ball(b0)).lower

    parts = []
    if tail_k < INF:
        parts.append((max(tail_k, kmin), 0))
    if tail_j < INF:
        parts.append((kmin, int(tail_j)))
    if not parts:
        return 0.0
    F = max(_l1_sup(c_of(k), alo, j) for k, j in parts)
    if with_dt:
        if alo <= 0:
            raise BallError("d/dt resolvent bound needs alpha > 0")
        G = (Ball(PEAK) / Ball(alo)).upper
    else:
        G = F
    defect = Ball(db) * Ball(F)
    if da > 0:
        defect = defect + Ball(da) * (Ball(PEAK) / Ball(alo))
    if defect.upper >= 1.0:
        raise BallError("parameter spread too large for the resolvent tail bound")
    return (Ball(G) / (Ball(1.0) - Ball(defect.upper))).upper


def _apply(p: OperatorParams, f, with_dt: bool):
    if isinstance(f, SpacePair):
        return SpacePair(_apply(p, f.U, with_dt), _apply(p, f.V, with_dt))
    (c, r), split = _block_apply(p, f, with_dt)
    kmin = 1 if f.kind == SIN else 0
    tail = f.tail
    if np.any(np.asarray(f.tail) > 0):
        tail = up(np.asarray(f.tail) * region_factor(p, f.kind, f.tail_k, f.tail_j, with_dt), 1)
    err = f.err
    if np.any(np.asarray(f.err) > 0):
        err = up(np.asarray(f.err) * region_factor(p, f.kind, kmin, INF, with_dt), 1)
    if not f.batch_shape:
        tail, err = float(tail), float(err)
    return f._with(c, r, split=split, tail=tail, err=err)


def resolvent(p: OperatorParams, f):
    """Enclosure of (alpha d/dt - d d^2/dx^2 + b)^{-1} f."""
    return _apply(p, f, False)


def resolvent_dt(p: OperatorParams, f):
    """Enclosure of d/dt (alpha d/dt - d d^2/dx^2 + b)^{-1} f."""
    return _apply(p, f, True)


def mode_bound(p: OperatorParams, j_min: int, k_min: int) -> float:
    """Upper bound of 1/sqrt((d k^2 + b)^2 + alpha^2 j^2) over j >= j_min,
    k >= k_min: the 2-norm of the resolvent on each (j, -j) block."""
    a0, da = center_and_spread(p.alpha)
    b0, db = center_and_spread(p.b_shift)
    c = Ball(p.d) * Ball(float(k_min * k_min)) + Ball(b0 - 0.0, db)
    clo = c.lower
    if clo <= 0:
        raise BallError("resolvent symbol not bounded away from zero")
    alo = max(0.0, Ball(a0, da).lower)
    s = Ball(clo) * Ball(clo) + (Ball(alo) * Ball(float(j_min))) ** 2
    return (Ball(1.0) / Ball(s.lower).sqrt()).upper


def mode_bound_dt(p: OperatorParams) -> float:
    """Uniform 2-norm bound of d/dt o resolvent on any block: 1/alpha."""
    a0, da = center_and_spread(p.alpha)
    alo = Ball(a0, da).lower
    if alo <= 0:
        raise BallError("alpha not bounded away from zero")
    return (Ball(1.0) / Ball(alo)).upper
