"""Taylor enclosures in one scaled parameter.

A ``TaylorEnclosure`` of degree D on the disk |t| < rho stands for

    sum_{n<split} x_n t^n  +  sum_{n>=split} (c_n + g_n(t)) t^n

with real x_n in [c_n - r_n, c_n + r_n] and analytic g_n of norm
||g_n||_rho <= r_n, where ||g||_rho = sum_m |g_m| rho^m.  Slots below the
split order hold real numbers, slots at or above it hold function balls.
Products that overflow degree D are folded into slot D as function balls.

The kernels ``t_mul``, ``t_norm`` and ``t_recip`` work on center/radius
arrays whose last axis is the Taylor index, so the Fourier enclosures can
run them over whole coefficient blocks at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ball import Ball, BallError, flush, gamma, up


@lru_cache(maxsize=256)
def _powers(rho: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.empty(n)
    hi = np.empty(n)
    b = Ball(1.0)
    for k in range(n):
        lo[k], hi[k] = b.lower, b.upper
        b = b * Ball(rho)
    lo[0] = hi[0] = 1.0
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def powers(rho: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Rigorous lower and upper bounds for rho**k, k = 0..n-1."""
    return _powers(float(rho), int(n))


def t_norm(c, r, rho: float):
    """Upper bound of sum_n (|c_n| + r_n) rho^n along the last axis."""
    c = np.asarray(c)
    _, hi = powers(rho, c.shape[-1])
    return up((np.abs(c) + r) @ hi, 2 * c.shape[-1] + 2)


def t_mul(c1, r1, c2, r2, rho: float):
    """Enclosure of the product of two Taylor arrays of equal degree.

    Returns (c, r).  Overflow beyond degree D is folded into slot D.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    n = c1.shape[-1]
    if c2.shape[-1] != n:
        raise ValueError("Taylor degree mismatch")
    if n == 1:
        cc = c1 * c2
        rr = np.abs(c1) * r2 + r1 * (np.abs(c2) + r2) + np.abs(cc) * gamma(1)
        return flush(cc, up(rr, 4))
    shape = np.broadcast_shapes(c1.shape[:-1], c2.shape[:-1]) + (2 * n - 1,)
    cc = np.zeros(shape)
    aa = np.zeros(shape)
    rr = np.zeros(shape)
    a2 = np.abs(c2)
    s2 = a2 + r2
    for a in range(n):
        ca = c1[..., a : a + 1]
        if not (np.any(ca) or np.any(r1[..., a : a + 1])):
            continue
        p = ca * c2
        cc[..., a : a + n] += p
        aa[..., a : a + n] += np.abs(p)
        rr[..., a : a + n] += np.abs(ca) * r2 + r1[..., a : a + 1] * s2
    rad = up(rr + aa * gamma(n), 6 * n + 4)
    c, r = cc[..., :n], rad[..., :n].copy()
    if n > 1:
        _, hi = powers(rho, n)
        over = up((np.abs(cc[..., n:]) + rad[..., n:]) @ hi[1:], 2 * n + 2)
        r[..., n - 1] = up(r[..., n - 1] + over, 2)
    return flush(c, r)


def t_add(c1, r1, c2, r2):
    c = c1 + c2
    return flush(c, up(r1 + r2 + np.spacing(np.abs(c)), 2))


def t_series_inverse(c):
    """Floating Taylor coefficients of 1/p (last axis), p_0 != 0."""
    c = np.asarray(c, dtype=float)
    n = c.shape[-1]
    y = np.zeros_like(c)
    y[..., 0] = 1.0 / c[..., 0]
    for k in range(1, n):
        acc = np.zeros(c.shape[:-1])
        for m in range(1, k + 1):
            acc = acc + c[..., m] * y[..., k - m]
        y[..., k] = -acc * y[..., 0]
    return y


def t_recip(c, r, split: int, rho: float):
    """Enclosure of 1/p.  Returns (c, r, split).

    For degree 0 this is plain ball division.  Otherwise an approximate
    inverse y is corrected by the function ball ||y|| ||e|| / (1 - ||e||),
    e = 1 - p y, stored in slot 0 (which makes every slot a function slot).
    """
    c = np.asarray(c, dtype=float)
    r = np.asarray(r, dtype=float)
    n = c.shape[-1]
    if n == 1:
        m = np.abs(c[..., 0]) - r[..., 0]
        m = np.nextafter(m, -np.inf)
        if np.any(m <= 0):
            raise BallError("reciprocal of a ball containing zero")
        q = 1.0 / c
        # |1/x - 1/c| <= r / (|c| (|c| - r))
        # two divisions so a tiny center cannot underflow the denominator
        rad = up(up(r[..., 0] / np.abs(c[..., 0]), 1) / m, 1) + np.spacing(np.abs(q[..., 0]))
        if not np.all(np.isfinite(rad)):
            raise BallError("reciprocal radius overflow")
        return (*flush(q, up(rad, 1)[..., None]), split)
    y = t_series_inverse(c)
    pc, pr = t_mul(c, r, y, np.zeros_like(y), rho)
    ec = -pc
    ec[..., 0] += 1.0
    er = up(pr + np.spacing(np.abs(ec)), 2)
    en = t_norm(ec, er, rho)
    if np.any(en >= 1.0):
        raise BallError("reciprocal: Taylor enclosure not bounded away from 0")
    yn = t_norm(y, np.zeros_like(y), rho)
    one_minus = np.nextafter(1.0 - en, -np.inf)
    delta = up(yn * en / one_minus, 3)
    out_r = np.zeros_like(y)
    out_r[..., 0] = delta
    split_out = 0 if np.any(delta > 0) else split
    c_out, r_out = flush(y, out_r)
    return c_out, r_out, split_out


@dataclass(frozen=True, eq=False)
class TaylorEnclosure:
    c: np.ndarray
    r: np.ndarray
    split: int
    rho: float = 1.0

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(-1)
        r = np.array(self.r, dtype=float).reshape(-1)
        if c.shape != r.shape or c.size == 0:
            raise ValueError("center/radius shape mismatch")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
            raise BallError("non-finite Taylor coefficient")
        if np.any(r < 0):
            raise BallError("negative radius")
        if not self.rho > 0:
            raise ValueError("domain radius must be positive")
        c, r = flush(c, r)
        c.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "split", int(min(max(self.split, 0), c.size)))
        object.__setattr__(self, "rho", float(self.rho))

    # construction ---------------------------------------------------------

    @staticmethod
    def constant(x, degree: int, rho: float = 1.0) -> "TaylorEnclosure":
        b = Ball.coerce(x)
        c = np.zeros(degree + 1)
        r = np.zeros(degree + 1)
        c[0], r[0] = b.center, b.radius
        return TaylorEnclosure(c, r, degree + 1, rho)

    @staticmethod
    def variable(degree: int, rho: float = 1.0, offset=0.0, scale=1.0) -> "TaylorEnclosure":
        """offset + scale * t."""
        o, s = Ball.coerce(offset), Ball.coerce(scale)
        c = np.zeros(degree + 1)
        r = np.zeros(degree + 1)
        c[0], r[0] = o.center, o.radius
        if degree >= 1:
            c[1], r[1] = s.center, s.radius
        else:
            r[0] = Ball(o.center, o.radius).widen(s.norm_upper() * rho).radius
            return TaylorEnclosure(c, r, 0, rho)
        return TaylorEnclosure(c, r, degree + 1, rho)

    @staticmethod
    def from_balls(balls, split=None, rho: float = 1.0) -> "TaylorEnclosure":
        balls = [Ball.coerce(b) for b in balls]
        c = [b.center for b in balls]
        r = [b.radius for b in balls]
        return TaylorEnclosure(c, r, len(balls) if split is None else split, rho)

    @property
    def degree(self) -> int:
        return self.c.size - 1

    def coeff(self, n: int) -> Ball:
        return Ball(self.c[n], self.r[n])

    def _like(self, c, r, split) -> "TaylorEnclosure":
        return TaylorEnclosure(c, r, split, self.rho)

    def _other(self, q) -> "TaylorEnclosure":
        if isinstance(q, TaylorEnclosure):
            if q.c.size != self.c.size or q.rho != self.rho:
                raise ValueError("mismatched Taylor domains")
            return q
        return TaylorEnclosure.constant(q, self.degree, self.rho)

    # norms and evaluation -------------------------------------------------

    def norm_upper(self) -> float:
        return float(t_norm(self.c, self.r, self.rho))

    def poly_norm(self) -> Ball:
        """Ball containing ||g||_rho for every member g."""
        hi = self.norm_upper()
        lo = 0.0
        if self.split > self.degree:
            lo_w, _ = powers(self.rho, self.c.size)
            m = np.maximum(np.abs(self.c) - self.r, 0.0)
            lo = float(np.nextafter(np.sum(m * lo_w) * (1 - gamma(2 * self.c.size + 2)), 0))
            lo = max(0.0, min(lo, hi))
        return Ball.from_interval(lo, hi)

    def eval(self, t) -> Ball:
        t = Ball.coerce(t)
        tmax = t.norm_upper()
        if tmax > self.rho:
            raise BallError("evaluation point outside the Taylor domain")
        acc = Ball(0.0)
        tn = Ball(1.0)
        mag = Ball(1.0)
        for n in range(self.c.size):
            if n < self.split:
                acc = acc + Ball(self.c[n], self.r[n]) * tn
            else:
                acc = acc + (Ball(self.c[n]) * tn).widen((Ball(self.r[n]) * mag).upper)
            tn = tn * t
            mag = mag * Ball(tmax)
        return acc

    def eval_point(self, t: float) -> float:
        """Floating evaluation of the centers (non-rigorous)."""
        return float(np.polynomial.polynomial.polyval(t, self.c))

    # arithmetic -----------------------------------------------------------

    def __neg__(self):
        return self._like(-self.c, self.r, self.split)

    def __add__(self, q):
        q = self._other(q)
        return self._like(*t_add(self.c, self.r, q.c, q.r), min(self.split, q.split))

    __radd__ = __add__

    def __sub__(self, q):
        return self + (-self._other(q))

    def __rsub__(self, q):
        return self._other(q) - self

    def __mul__(self, q):
        if isinstance(q, (Ball, int, float)):
            return self.scalar_mul(q)
        q = self._other(q)
        c, r = t_mul(self.c, self.r, q.c, q.r, self.rho)
        split = min(self.split, q.split)
        if _top(self) + _top(q) > self.degree:
            split = min(split, self.degree)
        return self._like(c, r, split)

    __rmul__ = __mul__

    def scalar_mul(self, x) -> "TaylorEnclosure":
        b = Ball.coerce(x)
        c = self.c * b.center
        rr = np.abs(self.c) * b.radius + self.r * (abs(b.center) + b.radius)
        rr = rr + np.spacing(np.abs(c))
        return self._like(c, up(rr, 5), self.split)

    def reciprocal(self) -> "TaylorEnclosure":
        c, r, s = t_recip(self.c, self.r, self.split, self.rho)
        return self._like(c, r, s)

    def __truediv__(self, q):
        if isinstance(q, (Ball, int, float)):
            return self.scalar_mul(Ball(1.0) / Ball.coerce(q))
        return self * self._other(q).reciprocal()

    def __rtruediv__(self, q):
        return self._other(q) * self.reciprocal()

    def widen(self, r: float) -> "TaylorEnclosure":
        """Add a function ball of norm r (in slot 0)."""
        rr = self.r.copy()
        rr[0] = up(rr[0] + r, 1)
        return self._like(self.c, rr, 0 if r > 0 else self.split)

    def contains_function(self, coeffs) -> bool:
        """Whether the real power series with the given (finitely many)
        coefficients is a member, decided in exact rationals.

        Real slots must contain their coefficient.  The excess in function
        slots is weighted mass |q_m - c_m| rho^m at degree m that may be
        charged to any function slot n <= m of weighted budget r_n rho^n;
        the nested structure makes the prefix conditions sufficient.
        """
        from fractions import Fraction

        q = [Fraction(x) for x in coeffs]
        n_slots = self.c.size
        q = q + [Fraction(0)] * max(0, n_slots - len(q))
        rho = Fraction(self.rho)
        mass = []
        budget = []
        for n in range(n_slots):
            d = abs(q[n] - Fraction(self.c[n]))
            if n < self.split:
                if d > Fraction(self.r[n]):
                    return False
                mass.append(Fraction(0))
                budget.append(Fraction(0))
            else:
                mass.append(d * rho**n)
                budget.append(Fraction(self.r[n]) * rho**n)
        extra = sum((abs(x) * rho**m for m, x in enumerate(q[n_slots:], start=n_slots)), Fraction(0))
        mass[-1] += extra
        m_acc = b_acc = Fraction(0)
        for m, b in zip(mass, budget):
            m_acc += m
            b_acc += b
            if m_acc > b_acc:
                return False
        return True

    # serialization --------------------------------------------------------

    def to_text(self) -> str:
        head = f"{self.degree} {self.split} {self.rho.hex()}"
        body = [f"{a.hex()} {b.hex()}" for a, b in zip(self.c, self.r)]
        return "\n".join([head, *body])

    @staticmethod
    def from_text(text: str) -> "TaylorEnclosure":
        lines = text.strip().splitlines()
        d, split, rho = lines[0].split()
        cs, rs = [], []
        for line in lines[1 : int(d) + 2]:
            a, b = line.split()
            cs.append(float.fromhex(a))
            rs.append(float.fromhex(b))
        return TaylorEnclosure(cs, rs, int(split), float.fromhex(rho))

    def __repr__(self) -> str:
        return f"TaylorEnclosure(D={self.degree}, split={self.split}, c={self.c.tolist()}, r={self.r.tolist()})"


def _top(p: TaylorEnclosure) -> int:
    nz = np.nonzero((p.c != 0) | (p.r != 0))[0]
    return int(nz[-1]) if nz.size else -1


def scalar_norm(x) -> float:
    """Upper bound on the norm of a generic scalar (Ball or Taylor)."""
    if isinstance(x, TaylorEnclosure):
        return x.norm_upper()
    return Ball.coerce(x).norm_upper()
