"""Fixed-point maps of the Dirichlet Brusselator and their derivatives.

Stationary problem on (0, pi):

    U'' = -sin x + (b+1) U - U^2 V,     V''/64 = -b U + U^2 V,

written as (U, V) = A_b(U, V) with

    A_b(U, V) = (-d_xx)^{-1}(sin x - (b+1) U + U^2 V,  64 (b U - U^2 V)).

Periodic problem, rescaled to period 2 pi with alpha = 2 pi / T and the odd
time part scaled by beta (s = beta^2):

    u = F(u, v) = L_{alpha,1,b+1}(sin x + N_s(u, v)),
    v = G(u, v) = L_{alpha,1/64,0}(b u - N_s(u, v)),

with N_s = (u *_s u) *_s v for the parity-weighted product
f *_s g = f_e g_e + f_e g_o + f_o g_e + s f_o g_o.

Normalized mode closes the system with alpha = A N_s, b = B N_s - 2, where A
and B read the coefficients of cos(t) sin(x) and sin(t) sin(x).  Free mode
(s = 1) takes b as input and alpha = A N_1 / B u.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .ball import Ball, BallError
from .pde_operators import OperatorParams, as_taylor, inverse_laplacian, resolvent, resolvent_dt
from .space_fourier import SIN, SpacePair, SpaceSeries
from .taylor_enclosure import TaylorEnclosure, t_add, t_mul, t_recip

D1 = 1.0
D2 = 1.0 / 64.0
V_FACTOR = 64.0


class Mode(enum.Enum):
    STATIONARY = "stationary"
    NORMALIZED = "normalized"
    FREE = "free"


@dataclass(frozen=True)
class ProblemParams:
    """b: input in stationary and free mode; s: odd-part scaling in
    normalized mode (1 otherwise)."""

    mode: Mode
    b: object = None
    s: object = 1.0


# --------------------------------------------------------------------------
# helpers


def forcing(like: SpaceSeries) -> SpaceSeries:
    """sin x as a series shaped like ``like`` (unbatched)."""
    z = SpaceSeries.zeros(max(like.nk, 2), like.K, like.D, SIN, rho_x=like.rho_x,
                          rho_t=like.rho_t, rho_tau=like.rho_tau)
    c = z.c.copy()
    c[1, like.K, 0] = 1.0
    return z._with(c, z.r)


def _tay(x, f: SpaceSeries) -> TaylorEnclosure:
    return as_taylor(x, f.D, f.rho_tau)


def _is_one(s) -> bool:
    if isinstance(s, TaylorEnclosure):
        return bool(s.c[0] == 1.0 and not np.any(s.c[1:]) and not np.any(s.r))
    b = Ball.coerce(s)
    return b.center == 1.0 and b.radius == 0.0


def s_weighted(g: SpaceSeries, s) -> SpaceSeries:
    """g^s = g_e + s g_o."""
    if g.K == 0 or _is_one(s):
        return g
    return g.even_part() + g.odd_part().scale(_tay(s, g) if isinstance(s, TaylorEnclosure) else s)


def scaled_product(f: SpaceSeries, g: SpaceSeries, s) -> SpaceSeries:
    """f *_s g = f_e g + f_o g^s."""
    if f.K == 0 and g.K == 0 or _is_one(s):
        return f * g
    return f.even_part() * g + f.odd_part() * s_weighted(g, s)


def nonlinearity(s, u: SpaceSeries, v: SpaceSeries) -> SpaceSeries:
    """N_s(u, v) = (u *_s u) *_s v; equals u^2 v for s = 1."""
    return scaled_product(scaled_product(u, u, s), v, s)


def functional_A(u: SpaceSeries):
    """Coefficient of cos(t) sin(x)."""
    return u.coefficient(1, 1) if not u.batch_shape else u.functional(1, 1)


def functional_B(u: SpaceSeries):
    """Coefficient of sin(t) sin(x)."""
    return u.coefficient(1, -1) if not u.batch_shape else u.functional(1, -1)


def induced_alpha_b(s, u: SpaceSeries, v: SpaceSeries, n: SpaceSeries | None = None):
    """(alpha, b) = (A N_s, B N_s - 1 - d1)."""
    n = nonlinearity(s, u, v) if n is None else n
    return functional_A(n), functional_B(n) - (1.0 + D1)


def induced_alpha_free(u: SpaceSeries, v: SpaceSeries, n: SpaceSeries | None = None) -> TaylorEnclosure:
    """alpha = A N_1 / B u."""
    n = nonlinearity(1.0, u, v) if n is None else n
    bu = functional_B(u)
    if isinstance(bu, TaylorEnclosure) and bu.degree == 0 and Ball(bu.c[0], bu.r[0]).contains_zero():
        raise BallError("B u encloses zero")
    return functional_A(n) / bu


def _op1(alpha, b, f: SpaceSeries) -> OperatorParams:
    return OperatorParams(_tay(alpha, f), D1, _tay(b, f) + 1.0)


def _op2(alpha, f: SpaceSeries) -> OperatorParams:
    return OperatorParams(_tay(alpha, f), D2, _tay(0.0, f))


def resolve(params: ProblemParams, w: SpacePair, n: SpaceSeries | None = None):
    """(alpha, b, n) for a periodic map evaluation."""
    if params.mode is Mode.NORMALIZED:
        n = nonlinearity(params.s, w.U, w.V) if n is None else n
        alpha, b = induced_alpha_b(params.s, w.U, w.V, n)
        return alpha, b, n
    if params.mode is Mode.FREE:
        n = nonlinearity(1.0, w.U, w.V) if n is None else n
        return induced_alpha_free(w.U, w.V, n), _tay(params.b, w.U), n
    raise ValueError("resolve is for periodic modes")


# --------------------------------------------------------------------------
# stationary


def stationary_map(b, w: SpacePair) -> SpacePair:
    """A_b(U, V)."""
    U, V = w.U, w.V
    bt = _tay(b, U)
    uuv = U * U * V
    f = forcing(U) - U.scale(bt + 1.0) + uuv
    g = (U.scale(bt) - uuv).scale(V_FACTOR)
    return SpacePair(-inverse_laplacian(f), -inverse_laplacian(g))


@dataclass(frozen=True, eq=False)
class StationaryLinearization:
    """D A_b at w: multipliers 2UV and U^2 are formed once."""

    b: object
    w: SpacePair

    def __post_init__(self):
        U, V = self.w.U, self.w.V
        object.__setattr__(self, "bt", _tay(self.b, U))
        object.__setattr__(self, "uv2", (U * V).scale(2.0))
        object.__setattr__(self, "uu", U * U)

    def apply(self, dw: SpacePair) -> SpacePair:
        du, dv = dw.U, dw.V
        q = du * self.uv2 + dv * self.uu
        f = q - du.scale(self.bt + 1.0)
        g = (du.scale(self.bt) - q).scale(V_FACTOR)
        return SpacePair(-inverse_laplacian(f), -inverse_laplacian(g))


def stationary_map_derivative(b, w: SpacePair, dw: SpacePair) -> SpacePair:
    return StationaryLinearization(b, w).apply(dw)


# --------------------------------------------------------------------------
# periodic


def periodic_map(params: ProblemParams, w: SpacePair) -> SpacePair:
    """(F_s(u, v), G_s(u, v))."""
    alpha, b, n = resolve(params, w)
    u = w.U
    f = forcing(u) + n
    g = u.scale(b) - n
    return SpacePair(resolvent(_op1(alpha, b, u), f), resolvent(_op2(alpha, u), g))


def _batch_scalar(x):
    """(c, r, split) of a batched functional, or of a Taylor scalar."""
    if isinstance(x, TaylorEnclosure):
        return x.c, x.r, x.split
    return x


@dataclass(frozen=True, eq=False)
class PeriodicLinearization:
    """D H_s at w.  Precomputes the multipliers of
    D N[du, dv] = 2 (du_e G + du_o G^s) + dv_e P + dv_o P^s
    (P = u *_s u, G = u *_s v) and the parameter-derivative vectors."""

    params: ProblemParams
    w: SpacePair

    def __post_init__(self):
        p, w = self.params, self.w
        u, v = w.U, w.V
        s = 1.0 if p.mode is Mode.FREE else p.s
        P = scaled_product(u, u, s)
        G = scaled_product(u, v, s)
        n = scaled_product(P, v, s)
        alpha, b, _ = resolve(p, w, n)
        op1, op2 = _op1(alpha, b, u), _op2(alpha, u)
        f = forcing(u) + n
        g = u.scale(b) - n
        Lf = resolvent(op1, f)
        Lg = resolvent(op2, g)
        vals = dict(s=s, P=P, G=G, Ps=s_weighted(P, s), Gs=s_weighted(G, s), alpha=alpha, b=b,
                    op1=op1, op2=op2,
                    F_alpha=resolvent(op1, resolvent_dt(op1, f)),
                    F_b=resolvent(op1, Lf),
                    G_alpha=resolvent(op2, resolvent_dt(op2, g)),
                    G_b=resolvent(op2, u), Lf=Lf, Lg=Lg)
        if p.mode is Mode.FREE:
            bu = functional_B(u)
            vals["inv_bu"] = bu.reciprocal()
        for k, val in vals.items():
            object.__setattr__(self, k, val)

    def dn(self, dw: SpacePair) -> SpaceSeries:
        du, dv = dw.U, dw.V
        if _is_one(self.s) or du.K == 0 and self.P.K == 0:
            return (du * self.G).scale(2.0) + dv * self.P
        return ((du.even_part() * self.G) + (du.odd_part() * self.Gs)).scale(2.0) \
            + dv.even_part() * self.P + dv.odd_part() * self.Ps

    def param_dots(self, dw: SpacePair, dn: SpaceSeries):
        """(alpha', b') as (c, r, split) batched arrays or Taylor scalars;
        b' is None in free mode."""
        an = functional_A(dn)
        if self.params.mode is Mode.NORMALIZED:
            return _batch_scalar(an), _batch_scalar(functional_B(dn))
        ac, ar, asp = _batch_scalar(an)
        bc, br, bsp = _batch_scalar(functional_B(dw.U))
        al = self.alpha
        pc, pr = t_mul(bc, br, al.c, al.r, al.rho)
        nc, nr = t_add(ac, ar, -pc, pr)
        ib = self.inv_bu
        qc, qr = t_mul(nc, nr, ib.c, ib.r, al.rho)
        split = min(asp, bsp, al.split, ib.split)
        if al.degree > 0:
            split = min(split, al.degree)
        return (qc, qr, split), None

    def apply(self, dw: SpacePair) -> SpacePair:
        dn = self.dn(dw)
        adot, bdot = self.param_dots(dw, dn)
        du = dw.U
        F = resolvent(self.op1, dn)
        G = resolvent(self.op2, du.scale(self.b) - dn)
        F = F - _times(self.F_alpha, adot)
        G = G - _times(self.G_alpha, adot)
        if bdot is not None:
            F = F - _times(self.F_b, bdot)
            G = G + _times(self.G_b, bdot)
        return SpacePair(F, G)


def _times(vec: SpaceSeries, x) -> SpaceSeries:
    """vec * scalar where scalar is (c, r, split) (batched or not) or Taylor."""
    if isinstance(x, TaylorEnclosure):
        return vec.scale(x)
    c, r, split = x
    c = np.asarray(c)
    if c.ndim == 1:
        return vec.scale(TaylorEnclosure(c, r, split, vec.rho_tau))
    bs = c.shape[:-1]
    out = vec.scale_batch(c.reshape(-1, c.shape[-1]), np.asarray(r).reshape(-1, c.shape[-1]), split)
    if len(bs) != 1:
        out = SpaceSeries(out.c.reshape(*bs, *out.c.shape[1:]), out.r.reshape(*bs, *out.r.shape[1:]),
                          kind=out.kind, split=out.split, tail=np.asarray(out.tail).reshape(bs),
                          tail_k=out.tail_k, tail_j=out.tail_j, err=np.asarray(out.err).reshape(bs),
                          rho_x=out.rho_x, rho_t=out.rho_t, rho_tau=out.rho_tau)
    return out


def periodic_map_derivative(params: ProblemParams, w: SpacePair, dw: SpacePair) -> SpacePair:
    return PeriodicLinearization(params, w).apply(dw)


# --------------------------------------------------------------------------
# embedding


def embed_stationary(w: SpacePair, K: int, rho_x: float, rho_t: float) -> SpacePair:
    """Time-independent (U, V) as a periodic object.  Only block data is
    carried; the caller accounts for tails in the target norm."""
    out = []
    for f in (w.U, w.V):
        c = np.zeros((f.nk, 2 * K + 1, f.D + 1))
        r = np.zeros_like(c)
        c[:, K, :] = f.c[:, 0, :]
        r[:, K, :] = f.r[:, 0, :]
        out.append(SpaceSeries(c, r, kind=f.kind, rho_x=rho_x, rho_t=rho_t, rho_tau=f.rho_tau, split=f.split))
    return SpacePair(*out)
