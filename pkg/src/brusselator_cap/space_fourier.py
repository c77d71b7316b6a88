"""Sine/cosine series in x with cosi-in-t, Taylor-in-parameter coefficients.

A ``SpaceSeries`` stores a coefficient block ``c +- r`` of shape
``(*batch, nk, 2K+1, D+1)``: slot ``[k, j+K, n]`` multiplies
``basis_k(x) cosi_j(t) tau^n`` where basis is sin or cos.  On top of the
block it carries two error terms, both measured in the weighted norm

    ||f|| = sum_{k,j} ||f_kj||_tau  rho_x^k  rho_t^|j|

* ``tail``: a function of norm <= tail supported in the region
  {k >= tail_k} or {|j| >= tail_j};
* ``err``: an arbitrary function of norm <= err.

Stationary objects are the special case K = 0.  Parameter slots follow the
split-order semantics of ``taylor_enclosure``.  A leading batch shape lets
one object hold many directions at once, which is how operator columns are
pushed through the maps.

Products are formed by multiplication matrices assembled from the
one-dimensional product tables and applied with BLAS, enclosed with a
Rump-style radius bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _trig
from ._trig import COS, SIN
from .ball import Ball, BallError, ball_matmul, flush, gamma, up
from .taylor_enclosure import TaylorEnclosure, powers, t_add, t_mul, t_norm

INF = math.inf


def _kmin(kind: str) -> int:
    return _trig.x_min_index(kind)


@lru_cache(maxsize=64)
def _weights(nk: int, K: int, nn: int, rho_x: float, rho_t: float, rho_tau: float):
    xlo, xhi = powers(rho_x, nk)
    tlo, thi = powers(rho_t, K + 1)
    nlo, nhi = powers(rho_tau, nn)
    aj = np.abs(np.arange(-K, K + 1))
    hi = up(xhi[:, None, None] * thi[aj][None, :, None] * nhi[None, None, :], 3)
    lo = xlo[:, None, None] * tlo[aj][None, :, None] * nlo[None, None, :]
    lo = np.nextafter(lo * (1 - gamma(4)), 0)
    hi.setflags(write=False)
    lo.setflags(write=False)
    return lo, hi


def _batch_zero(shape):
    return np.zeros(shape) if shape else 0.0


@dataclass(frozen=True, eq=False)
class SpaceSeries:
    c: np.ndarray
    r: np.ndarray
    kind: str = SIN
    rho_x: float = 65 / 64
    rho_t: float = 1.0
    rho_tau: float = 1.0
    split: int | None = None
    tail: np.ndarray | float = 0.0
    tail_k: float = INF
    tail_j: float = INF
    err: np.ndarray | float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if c.ndim < 3 or c.shape != r.shape:
            raise ValueError("coefficient block must be (*batch, nk, 2K+1, D+1)")
        if c.shape[-2] % 2 != 1:
            raise ValueError("time axis must have odd length 2K+1")
        if self.kind not in (SIN, COS):
            raise ValueError(f"unknown kind {self.kind!r}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
            raise BallError("non-finite coefficient")
        if self.kind == SIN and c.shape[-3] > 0 and (np.any(c[..., 0, :, :]) or np.any(r[..., 0, :, :])):
            c = c.copy()
            r = r.copy()
            c[..., 0, :, :] = 0.0
            r[..., 0, :, :] = 0.0
        c, r = flush(c, r)
        bs = c.shape[:-3]
        tail = np.broadcast_to(np.asarray(self.tail, dtype=float), bs).copy() if bs else float(self.tail)
        err = np.broadcast_to(np.asarray(self.err, dtype=float), bs).copy() if bs else float(self.err)
        if np.any(np.asarray(tail) < 0) or np.any(np.asarray(err) < 0):
            raise BallError("negative error norm")
        if not (np.all(np.isfinite(tail)) and np.all(np.isfinite(err))):
            raise BallError("non-finite error norm")
        split = c.shape[-1] if self.split is None else int(min(max(self.split, 0), c.shape[-1]))
        tk, tj = float(self.tail_k), float(self.tail_j)
        if not np.any(np.asarray(tail) > 0):
            tk, tj = INF, INF
        elif tk <= _kmin(self.kind) or tj <= 0:
            err = up(np.asarray(err) + tail, 1) if bs else float(up(err + tail, 1))
            tail = _batch_zero(bs)
            tk, tj = INF, INF
        for name, val in (("c", c), ("r", r), ("tail", tail), ("err", err), ("split", split),
                          ("tail_k", tk), ("tail_j", tj), ("rho_x", float(self.rho_x)),
                          ("rho_t", float(self.rho_t)), ("rho_tau", float(self.rho_tau))):
            object.__setattr__(self, name, val)

    # shape ------------------------------------------------------------------

    @property
    def nk(self) -> int:
        return self.c.shape[-3]

    @property
    def K(self) -> int:
        return (self.c.shape[-2] - 1) // 2

    @property
    def D(self) -> int:
        return self.c.shape[-1] - 1

    @property
    def batch_shape(self) -> tuple:
        return self.c.shape[:-3]

    def _rhos(self) -> dict:
        return dict(rho_x=self.rho_x, rho_t=self.rho_t, rho_tau=self.rho_tau)

    def like(self, c, r, **kw) -> "SpaceSeries":
        base = dict(kind=self.kind, split=self.split, **self._rhos())
        base.update(kw)
        return SpaceSeries(c, r, **base)

    @staticmethod
    def zeros(nk: int, K: int = 0, D: int = 0, kind: str = SIN, batch: tuple = (), **rhos) -> "SpaceSeries":
        shape = (*batch, nk, 2 * K + 1, D + 1)
        return SpaceSeries(np.zeros(shape), np.zeros(shape), kind=kind, **rhos)

    @staticmethod
    def from_array(a, kind: str = SIN, **kw) -> "SpaceSeries":
        """Exact floating coefficients, array (nk, 2K+1, D+1) or (nk,) or (nk, 2K+1)."""
        a = np.asarray(a, dtype=float)
        if a.ndim == 1:
            a = a[:, None, None]
        elif a.ndim == 2:
            a = a[:, :, None]
        return SpaceSeries(a, np.zeros_like(a), kind=kind, **kw)

    def weights(self):
        return _weights(self.nk, self.K, self.D + 1, self.rho_x, self.rho_t, self.rho_tau)

    # norms ------------------------------------------------------------------

    def block_norm(self):
        _, hi = self.weights()
        s = np.einsum("...kjn,kjn->...", np.abs(self.c) + self.r, hi)
        out = up(s, self.nk * (2 * self.K + 1) * (self.D + 1) + 3)
        return out if self.batch_shape else float(out)

    def norm(self):
        """Upper bound of the weighted norm (array over the batch)."""
        out = up(np.asarray(self.block_norm()) + self.tail + self.err, 2)
        return out if self.batch_shape else float(out)

    def extents(self) -> tuple[int, int]:
        """(largest k, largest |j|) with a nonzero block slot (-1 if none)."""
        nz = (self.c != 0) | (self.r != 0)
        nz = nz.reshape(-1, self.nk, 2 * self.K + 1, self.D + 1).any(axis=(0, 3))
        ks = np.nonzero(nz.any(axis=1))[0]
        js = np.nonzero(nz.any(axis=0))[0]
        if ks.size == 0:
            return -1, -1
        return int(ks[-1]), int(np.max(np.abs(js - self.K)))

    # reshaping --------------------------------------------------------------

    def pad(self, nk: int | None = None, K: int | None = None, D: int | None = None) -> "SpaceSeries":
        nk = max(self.nk, nk or 0)
        K = max(self.K, K or 0)
        D = self.D if D is None else D
        if D < self.D:
            raise ValueError("pad cannot lower the Taylor degree")
        if (nk, K, D) == (self.nk, self.K, self.D):
            return self
        shape = (*self.batch_shape, nk, 2 * K + 1, D + 1)
        c = np.zeros(shape)
        r = np.zeros(shape)
        sl = (..., slice(0, self.nk), slice(K - self.K, K + self.K + 1), slice(0, self.D + 1))
        c[sl], r[sl] = self.c, self.r
        split = self.split if self.split <= self.D else D + 1
        return self._with(c, r, split=split)

    def _with(self, c, r, **kw) -> "SpaceSeries":
        base = dict(kind=self.kind, split=self.split, tail=self.tail, tail_k=self.tail_k,
                    tail_j=self.tail_j, err=self.err, **self._rhos())
        base.update(kw)
        return SpaceSeries(c, r, **base)

    def truncate(self, nk: int, K: int | None = None) -> "SpaceSeries":
        """Keep modes k < nk, |j| <= K; the rest moves into the tail."""
        K = self.K if K is None else min(K, self.K)
        nk = min(nk, self.nk)
        keep = np.zeros((self.nk, 2 * self.K + 1), bool)
        keep[:nk, self.K - K : self.K + K + 1] = True
        _, hi = self.weights()
        drop = ~keep
        mass = np.einsum("...kjn,kjn->...", (np.abs(self.c) + self.r) * drop[:, :, None], hi)
        mass = up(mass, self.c[..., 0, 0, 0].size + drop.size * (self.D + 1) + 2)
        c = self.c[..., :nk, self.K - K : self.K + K + 1, :]
        r = self.r[..., :nk, self.K - K : self.K + K + 1, :]
        out = self._with(c.copy(), r.copy())
        if not np.any(mass > 0):
            return out
        return out.add_tail(mass, nk, K + 1 if K < self.K else INF)

    def add_tail(self, mass, tk, tj) -> "SpaceSeries":
        tail = np.asarray(self.tail) + mass
        if np.any(np.asarray(self.tail) > 0):
            tk, tj = min(tk, self.tail_k), min(tj, self.tail_j)
        return self._with(self.c, self.r, tail=up(tail, 1), tail_k=tk, tail_j=tj)

    def add_err(self, e) -> "SpaceSeries":
        return self._with(self.c, self.r, err=up(np.asarray(self.err) + e, 1))

    # linear structure -------------------------------------------------------

    def __neg__(self):
        return self._with(-self.c, self.r)

    def _align(self, o: "SpaceSeries"):
        if o.kind != self.kind:
            raise ValueError("cannot add sine and cosine series")
        if (o.rho_x, o.rho_t, o.rho_tau) != (self.rho_x, self.rho_t, self.rho_tau):
            raise ValueError("mismatched weights")
        nk, K, D = max(self.nk, o.nk), max(self.K, o.K), max(self.D, o.D)
        return self.pad(nk, K, D), o.pad(nk, K, D)

    def __add__(self, o: "SpaceSeries") -> "SpaceSeries":
        a, b = self._align(o)
        c, r = t_add(a.c, a.r, b.c, b.r)
        tk = min(a.tail_k, b.tail_k)
        tj = min(a.tail_j, b.tail_j)
        return SpaceSeries(c, r, kind=a.kind, split=min(a.split, b.split), tail=up(np.asarray(a.tail) + b.tail, 1),
                           tail_k=tk, tail_j=tj, err=up(np.asarray(a.err) + b.err, 1), **a._rhos())

    def __sub__(self, o):
        return self + (-o)

    def scale(self, x) -> "SpaceSeries":
        """Multiply by a scalar (float, Ball or TaylorEnclosure)."""
        if isinstance(x, TaylorEnclosure):
            if x.degree != self.D:
                raise ValueError("Taylor degree mismatch")
            c, r = t_mul(self.c, self.r, x.c, x.r, self.rho_tau)
            split = min(self.split, x.split)
            if self.D > 0:
                split = min(split, self.D)
            n = x.norm_upper()
        else:
            b = Ball.coerce(x)
            c = self.c * b.center
            r = up(np.abs(self.c) * b.radius + self.r * (abs(b.center) + b.radius) + np.spacing(np.abs(c)), 4)
            split = self.split
            n = b.norm_upper()
        return self._with(c, r, split=split, tail=up(np.asarray(self.tail) * n, 1), err=up(np.asarray(self.err) * n, 1))

    def scale_batch(self, xc, xr, split: int) -> "SpaceSeries":
        """Outer product of a batch of Taylor scalars (B, D+1) with this
        unbatched series, giving a batched series."""
        if self.batch_shape:
            raise ValueError("scale_batch needs an unbatched series")
        xc = np.asarray(xc)
        xr = np.asarray(xr)
        c, r = t_mul(self.c[None], self.r[None], xc[:, None, None, :], xr[:, None, None, :], self.rho_tau)
        xn = t_norm(xc, xr, self.rho_tau)
        sp = min(self.split, split)
        if self.D > 0:
            sp = min(sp, self.D)
        return self._with(c, r, split=sp, tail=up(xn * self.tail, 1), err=up(xn * self.err, 1))

    # parity / symmetry -----------------------------------------------------

    def _mask_j(self, parity: int) -> "SpaceSeries":
        j = np.arange(-self.K, self.K + 1)
        m = (np.abs(j) % 2 == parity)[:, None]
        return self._with(self.c * m, self.r * m)

    def even_part(self) -> "SpaceSeries":
        """Even time frequencies (tail and err kept: projection is a contraction)."""
        return self._mask_j(0)

    def odd_part(self) -> "SpaceSeries":
        return self._mask_j(1)

    def symmetric_project(self) -> "SpaceSeries":
        """Zero the slots that vanish for f(pi - x) = f(x)."""
        k = np.arange(self.nk)
        keep = (k % 2 == 1) if self.kind == SIN else (k % 2 == 0)
        m = keep[:, None, None]
        return self._with(self.c * m, self.r * m)

    def is_symmetric(self) -> bool:
        k = np.arange(self.nk)
        bad = (k % 2 == 0) if self.kind == SIN else (k % 2 == 1)
        return bool(np.all(np.abs(self.c[..., bad, :, :]) <= self.r[..., bad, :, :]))

    # coefficients ------------------------------------------------------------

    def coefficient(self, k: int, j: int = 0) -> TaylorEnclosure:
        """Enclosure of the (k, j) coefficient as a function of tau, including
        contributions from the tail and err terms."""
        if self.batch_shape:
            raise ValueError("coefficient() on a batch; use functional()")
        c, r, split = self.functional(k, j)
        return TaylorEnclosure(c, r, split, self.rho_tau)

    def functional(self, k: int, j: int = 0):
        """(c, r, split) with c, r of shape (*batch, D+1)."""
        nn = self.D + 1
        if 0 <= k < self.nk and abs(j) <= self.K:
            c = self.c[..., k, j + self.K, :].copy()
            r = self.r[..., k, j + self.K, :].copy()
        else:
            c = np.zeros((*self.batch_shape, nn))
            r = np.zeros((*self.batch_shape, nn))
        extra = np.asarray(self.err, dtype=float)
        if k >= self.tail_k or abs(j) >= self.tail_j:
            extra = extra + self.tail
        if k < _kmin(self.kind):
            return np.zeros_like(c), np.zeros_like(r), self.split
        split = self.split
        if np.any(extra > 0):
            wlo = Ball(self.rho_x) ** k * Ball(self.rho_t) ** abs(j)
            rad = up(extra / np.nextafter(wlo.lower, 0), 2)
            r[..., 0] = up(r[..., 0] + rad, 1)
            split = 0
        return c, r, split

    def take(self, idx) -> "SpaceSeries":
        t = np.asarray(self.tail)[idx] if self.batch_shape else self.tail
        e = np.asarray(self.err)[idx] if self.batch_shape else self.err
        return self._with(self.c[idx], self.r[idx], tail=t, err=e)

    # products ---------------------------------------------------------------

    def mul(self, other: "SpaceSeries") -> "SpaceSeries":
        return multiply(self, other)

    def __mul__(self, other):
        if isinstance(other, SpaceSeries):
            return multiply(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    # evaluation (non-rigorous, for plots and oracles) -------------------------

    def evaluate(self, x, t=0.0, tau=0.0):
        """Floating value of the block centers at (x, t, tau)."""
        X = _trig.x_values(self.kind, self.nk, np.atleast_1d(x))
        T = _trig.cosi_values(self.K, np.atleast_1d(t))
        P = float(tau) ** np.arange(self.D + 1)
        return np.einsum("xk,tj,...kjn,n->...xt", X, T, self.c, P)

    # serialization ------------------------------------------------------------

    def to_lines(self) -> list[str]:
        if self.batch_shape:
            raise ValueError("only unbatched series serialize")
        head = (f"series {self.kind} {self.nk} {self.K} {self.D} {self.split} "
                f"{self.rho_x.hex()} {self.rho_t.hex()} {self.rho_tau.hex()}")
        lines = [head]
        nz = np.argwhere((self.c != 0) | (self.r != 0))
        for k, jj, n in nz:
            lines.append(f"{k} {jj - self.K} {n} {self.c[k, jj, n].hex()} {self.r[k, jj, n].hex()}")
        lines.append(f"tail {float(self.tail).hex()} {_fmt_idx(self.tail_k)} {_fmt_idx(self.tail_j)}")
        lines.append(f"err {float(self.err).hex()}")
        lines.append("end")
        return lines

    @staticmethod
    def from_lines(lines) -> "SpaceSeries":
        it = iter(lines)
        head = next(it).split()
        if head[0] != "series":
            raise ValueError("not a series block")
        kind, nk, K, D, split = head[1], int(head[2]), int(head[3]), int(head[4]), int(head[5])
        rx, rt, rn = (float.fromhex(h) for h in head[6:9])
        c = np.zeros((nk, 2 * K + 1, D + 1))
        r = np.zeros_like(c)
        tail, tk, tj, err = 0.0, INF, INF, 0.0
        for line in it:
            parts = line.split()
            if parts[0] == "end":
                break
            if parts[0] == "tail":
                tail, tk, tj = float.fromhex(parts[1]), _parse_idx(parts[2]), _parse_idx(parts[3])
            elif parts[0] == "err":
                err = float.fromhex(parts[1])
            else:
                k, j, n = int(parts[0]), int(parts[1]), int(parts[2])
                c[k, j + K, n] = float.fromhex(parts[3])
                r[k, j + K, n] = float.fromhex(parts[4])
        return SpaceSeries(c, r, kind=kind, split=split, rho_x=rx, rho_t=rt, rho_tau=rn,
                           tail=tail, tail_k=tk, tail_j=tj, err=err)

    def __repr__(self) -> str:
        return (f"SpaceSeries({self.kind}, batch={self.batch_shape}, nk={self.nk}, K={self.K}, D={self.D}, "
                f"split={self.split}, tail={self.tail!r}@({self.tail_k},{self.tail_j}), err={self.err!r})")


def _fmt_idx(x) -> str:
    return "inf" if x == INF else str(int(x))


def _parse_idx(s: str) -> float:
    return INF if s == "inf" else int(s)


# --------------------------------------------------------------------------
# products


def _active(a: np.ndarray, axis_keep: int) -> np.ndarray:
    """Indices along a block axis (-3: k, -2: j) with any nonzero entry."""
    axes = tuple(i for i in range(a.ndim) if i != a.ndim + axis_keep)
    return np.nonzero(np.any(a != 0, axis=axes))[0]


def multiplication_matrix(f: SpaceSeries, g_kind: str, g_nk: int, g_K: int, a_act, j_act):
    """Ball matrices (Tc, Tr) of g -> f*g restricted to input slots a_act x j_act.

    Returns Tc, Tr of shape (D+1, n_out, n_in) plus the output index arrays.
    """
    nzf = (f.c != 0) | (f.r != 0)
    m_act = _active(nzf, -3)
    i_act = _active(nzf, -2)
    Tx = _trig.x_table(f.kind, g_kind, f.nk, g_nk)[:, m_act][:, :, a_act]
    Tt = _trig.t_table(f.K, g_K)[:, i_act][:, :, j_act]
    o_act = np.nonzero(np.any(Tx != 0, axis=(1, 2)))[0]
    p_act = np.nonzero(np.any(Tt != 0, axis=(1, 2)))[0]
    Tx = Tx[o_act]
    Tt = Tt[p_act]
    F = f.c[np.ix_(m_act, i_act)] if m_act.size and i_act.size else np.zeros((0, 0, f.D + 1))
    Fa = np.abs(F)
    Fr = f.r[np.ix_(m_act, i_act)] if m_act.size and i_act.size else np.zeros((0, 0, f.D + 1))
    aTx, aTt = np.abs(Tx), np.abs(Tt)

    def build(Fm, X, T):
        A = np.tensordot(X, Fm, axes=([1], [0]))  # o a i n
        B = np.tensordot(A, T, axes=([2], [1]))  # o a n p j
        B = B.transpose(2, 0, 3, 1, 4)  # n o p a j
        return B.reshape(B.shape[0], o_act.size * p_act.size, a_act.size * j_act.size)

    Tc = build(F, Tx, Tt)
    Ta = build(Fa, aTx, aTt)
    Tr = build(Fr, aTx, aTt)
    Tr = up(Tr + gamma(16) * Ta, 8)
    return Tc, Tr, o_act, p_act


def multiply(f: SpaceSeries, g: SpaceSeries) -> SpaceSeries:
    """Enclosure of the pointwise product f*g.

    At most one operand may be batched.  Block x block goes through the
    multiplication matrix of the unbatched factor; block x tail keeps the
    region, shifted by the block extents; everything else lands in err.
    """
    if f.batch_shape and g.batch_shape:
        raise ValueError("at most one batched factor")
    if f.batch_shape:
        f, g = g, f
    if f.D != g.D:
        raise ValueError("Taylor degree mismatch")
    if (f.rho_x, f.rho_t, f.rho_tau) != (g.rho_x, g.rho_t, g.rho_tau):
        raise ValueError("mismatched weights")
    kind = _trig.product_kind(f.kind, g.kind)
    bs = g.batch_shape
    B = int(np.prod(bs)) if bs else 1
    nn = f.D + 1
    nk_o, K_o = f.nk + g.nk - 1, f.K + g.K
    out_c = np.zeros((B, nk_o, 2 * K_o + 1, nn))
    out_r = np.zeros_like(out_c)

    gc = g.c.reshape(B, g.nk, 2 * g.K + 1, nn)
    gr = g.r.reshape(B, g.nk, 2 * g.K + 1, nn)
    nzg = (gc != 0) | (gr != 0)
    a_act = _active(nzg, -3)
    j_act = _active(nzg, -2)
    nzf = (f.c != 0) | (f.r != 0)
    fold_used = False
    dense_size = (f.nk + a_act.size) * (2 * f.K + j_act.size) * a_act.size * j_act.size
    if nn == 1 and dense_size > _DENSE_LIMIT and nzf.any():
        out_c, out_r = _separable_product(f, g.kind, gc[..., 0], gr[..., 0], a_act, j_act, nk_o, K_o)
    elif a_act.size and j_act.size and nzf.any():
        Tc, Tr, o_act, p_act = multiplication_matrix(f, g.kind, g.nk, g.K, a_act, j_act)
        if o_act.size and p_act.size:
            Xc = gc[:, a_act][:, :, j_act].transpose(3, 1, 2, 0).reshape(nn, -1, B)
            Xr = gr[:, a_act][:, :, j_act].transpose(3, 1, 2, 0).reshape(nn, -1, B)
            has_xr = bool(np.any(Xr))
            has_tr = bool(np.any(Tr))
            blocks_c, blocks_r = [], []
            for q in range(2 * nn - 1):
                ns = range(max(0, q - nn + 1), min(q, nn - 1) + 1)
                Tcat = np.concatenate([Tc[n] for n in ns], axis=1)
                Xcat = np.concatenate([Xc[q - n] for n in ns], axis=0)
                Trcat = np.concatenate([Tr[n] for n in ns], axis=1) if has_tr else None
                Xrcat = np.concatenate([Xr[q - n] for n in ns], axis=0) if has_xr else None
                cc, rr = ball_matmul(Tcat, Trcat, Xcat, Xrcat)
                blocks_c.append(cc)
                blocks_r.append(rr)
            Yc = np.stack(blocks_c[:nn], axis=-1)  # (out, B, nn)
            Yr = np.stack(blocks_r[:nn], axis=-1)
            if nn > 1:
                _, hi = powers(f.rho_tau, nn)
                over = sum((np.abs(blocks_c[q]) + blocks_r[q]) * hi[q - nn + 1] for q in range(nn, 2 * nn - 1))
                if np.any(over):
                    fold_used = True
                    Yr[..., nn - 1] = up(Yr[..., nn - 1] + up(over, 2 * nn + 2), 1)
            Yc = Yc.reshape(o_act.size, p_act.size, B, nn).transpose(2, 0, 1, 3)
            Yr = Yr.reshape(o_act.size, p_act.size, B, nn).transpose(2, 0, 1, 3)
            ix = np.ix_(np.arange(B), o_act, p_act, np.arange(nn))
            out_c[ix] = Yc
            out_r[ix] = Yr

    # error terms
    fb = f.block_norm()
    gb = np.asarray(g.block_norm()).reshape(B)
    ft, gt = float(f.tail), np.asarray(g.tail, dtype=float).reshape(B)
    fe, ge = float(f.err), np.asarray(g.err, dtype=float).reshape(B)
    fk, fj = f.extents()
    gk_max, gj_max = _batch_extents(nzg, g.K)
    tail = np.zeros(B)
    tk, tj = INF, INF
    err = fe * (gb + gt + ge) + (fb + ft) * ge + ft * gt
    kmin = _kmin(kind)
    if np.any(gt > 0) and fk >= 0:
        k2, j2 = g.tail_k - fk, g.tail_j - fj
        part = fb * gt
        if k2 <= kmin or j2 <= 0:
            err = err + part
        else:
            tail = tail + part
            tk, tj = min(tk, k2), min(tj, j2)
    if ft > 0 and gk_max >= 0:
        k2, j2 = f.tail_k - gk_max, f.tail_j - gj_max
        part = gb * ft
        if k2 <= kmin or j2 <= 0:
            err = err + part
        else:
            tail = tail + part
            tk, tj = min(tk, k2), min(tj, j2)
    split = min(f.split, g.split)
    if fold_used:
        split = min(split, f.D)
    out_c = out_c.reshape(*bs, nk_o, 2 * K_o + 1, nn)
    out_r = out_r.reshape(*bs, nk_o, 2 * K_o + 1, nn)
    tail = up(tail, 3).reshape(bs) if bs else float(up(tail, 3)[0])
    err = up(err, 6).reshape(bs) if bs else float(up(err, 6)[0])
    return SpaceSeries(out_c, out_r, kind=kind, split=split, tail=tail, tail_k=tk, tail_j=tj, err=err,
                       rho_x=f.rho_x, rho_t=f.rho_t, rho_tau=f.rho_tau)


_DENSE_LIMIT = 4_000_000


def _separable_product(f: SpaceSeries, g_kind: str, gc, gr, a_act, j_act, nk_o: int, K_o: int):
    """Batched f*g block for Taylor degree 0 without the dense matrix:
    contract the time table with f row by row, then the space table.
    gc, gr: (B, nk, 2K+1).  Returns (B, nk_o, 2K_o+1, 1) center and radius."""
    B = gc.shape[0]
    nzf = (f.c[..., 0] != 0) | (f.r[..., 0] != 0)
    m_act = np.nonzero(nzf.any(axis=1))[0]
    i_act = np.nonzero(nzf.any(axis=0))[0]
    Tx = _trig.x_table(f.kind, g_kind, f.nk, gc.shape[1])[:, m_act][:, :, a_act]  # o m a
    Tt = _trig.t_table(f.K, (gc.shape[2] - 1) // 2)[:, i_act][:, :, j_act]  # p i j
    aTt = np.abs(Tt)
    X = gc[:, a_act][:, :, j_act].reshape(B * a_act.size, j_act.size)
    XR = gr[:, a_act][:, :, j_act].reshape(B * a_act.size, j_act.size)
    XR = XR if np.any(XR) else None
    Zc = np.empty((m_act.size, a_act.size, B, Tt.shape[0]))
    Zr = np.empty_like(Zc)
    ni = i_act.size
    F = f.c[np.ix_(m_act, i_act)][..., 0]
    Fr = f.r[np.ix_(m_act, i_act)][..., 0]
    TM = np.tensordot(F, Tt, axes=([1], [1]))  # m p j
    TMr = np.tensordot(np.abs(F) * gamma(ni + 2) + Fr, aTt, axes=([1], [1]))
    TM, TMr = flush(TM, up(TMr, ni + 3))
    for q in range(m_act.size):
        zc, zr = ball_matmul(X, XR, TM[q].T, TMr[q].T)
        Zc[q] = zc.reshape(B, a_act.size, -1).transpose(1, 0, 2)
        Zr[q] = zr.reshape(B, a_act.size, -1).transpose(1, 0, 2)
    Txf = Tx.reshape(Tx.shape[0], -1)
    o_act = np.nonzero(np.any(Txf != 0, axis=1))[0]
    yc, yr = ball_matmul(Txf[o_act], None, Zc.reshape(-1, B * Tt.shape[0]), Zr.reshape(-1, B * Tt.shape[0]))
    out_c = np.zeros((B, nk_o, 2 * K_o + 1, 1))
    out_r = np.zeros_like(out_c)
    out_c[:, o_act] = yc.reshape(o_act.size, B, -1, 1).transpose(1, 0, 2, 3)
    out_r[:, o_act] = yr.reshape(o_act.size, B, -1, 1).transpose(1, 0, 2, 3)
    return out_c, out_r


def _batch_extents(nz: np.ndarray, K: int) -> tuple[int, int]:
    a = nz.any(axis=(0, 3))
    ks = np.nonzero(a.any(axis=1))[0]
    js = np.nonzero(a.any(axis=0))[0]
    if ks.size == 0:
        return -1, -1
    return int(ks[-1]), int(np.max(np.abs(js - K)))


@dataclass(frozen=True, eq=False)
class SpacePair:
    """(U, V) with ||(U, V)|| = ||U|| + ||V||."""

    U: SpaceSeries
    V: SpaceSeries

    def norm(self):
        out = up(np.asarray(self.U.norm()) + self.V.norm(), 1)
        return out if self.U.batch_shape else float(out)

    def __add__(self, o: "SpacePair") -> "SpacePair":
        return SpacePair(self.U + o.U, self.V + o.V)

    def __sub__(self, o: "SpacePair") -> "SpacePair":
        return SpacePair(self.U - o.U, self.V - o.V)

    def __neg__(self):
        return SpacePair(-self.U, -self.V)

    def scale(self, x) -> "SpacePair":
        return SpacePair(self.U.scale(x), self.V.scale(x))

    def symmetric_project(self) -> "SpacePair":
        return SpacePair(self.U.symmetric_project(), self.V.symmetric_project())

    def is_symmetric(self) -> bool:
        return self.U.is_symmetric() and self.V.is_symmetric()

    def even_part(self) -> "SpacePair":
        return SpacePair(self.U.even_part(), self.V.even_part())

    def odd_part(self) -> "SpacePair":
        return SpacePair(self.U.odd_part(), self.V.odd_part())

    def pad(self, nk=None, K=None, D=None) -> "SpacePair":
        return SpacePair(self.U.pad(nk, K, D), self.V.pad(nk, K, D))

    def truncate(self, nk, K=None) -> "SpacePair":
        return SpacePair(self.U.truncate(nk, K), self.V.truncate(nk, K))

    def take(self, idx) -> "SpacePair":
        return SpacePair(self.U.take(idx), self.V.take(idx))

    @property
    def batch_shape(self):
        return self.U.batch_shape

    def to_lines(self) -> list[str]:
        return ["pair", *self.U.to_lines(), *self.V.to_lines()]

    @staticmethod
    def from_lines(lines: list[str]) -> "SpacePair":
        if lines[0] != "pair":
            raise ValueError("not a pair block")
        i = lines.index("end", 1)
        return SpacePair(SpaceSeries.from_lines(lines[1 : i + 1]), SpaceSeries.from_lines(lines[i + 1 :]))
