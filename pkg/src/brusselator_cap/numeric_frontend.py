"""Floating-point path: Galerkin maps, Newton, continuation, eigenvalues.

Nothing here is rigorous.  Coefficient arrays have the ``SpaceSeries``
layout ``(..., nk, 2K+1, nn)`` (sine index k = 0..nk-1, cosi index j = -K..K,
Taylor order n); the last axis is a truncated power series in the branch
variable tau, so the same code evaluates maps at points and on
Fourier-Taylor polynomials.  Products go through collocation grids that are
large enough to be alias free for cubic terms, so the Galerkin map agrees
with the coefficient-space definition up to rounding.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg

from .brusselator_maps import D1, D2, V_FACTOR, Mode
from .space_fourier import SpacePair, SpaceSeries

log = logging.getLogger(__name__)

RHO_STATIONARY = 65 / 64
RHO_PERIODIC = 33 / 32
RHO_TIME = 1 + 2.0**-20


class NumericalFailure(RuntimeError):
    pass


# --------------------------------------------------------------------------
# truncated power series along the last axis


def tmul(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    nn = max(a.shape[-1], b.shape[-1])
    if a.shape[-1] == 1 or b.shape[-1] == 1:
        return a * b
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (nn,))
    for n in range(nn):
        out[..., n] = np.einsum("...i,...i->...", a[..., : n + 1], b[..., n::-1])
    return out


def trecip(a):
    a = np.asarray(a, dtype=float)
    y = np.zeros_like(a)
    y[..., 0] = 1.0 / a[..., 0]
    for n in range(1, a.shape[-1]):
        y[..., n] = -np.einsum("...i,...i->...", a[..., 1 : n + 1], y[..., n - 1 :: -1]) * y[..., 0]
    return y


def tpad(a, nn):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a[None]
    if a.shape[-1] >= nn:
        return a[..., :nn]
    out = np.zeros(a.shape[:-1] + (nn,))
    out[..., : a.shape[-1]] = a
    return out


def tevaluate(a, tau):
    return np.asarray(a)[..., :] @ (float(tau) ** np.arange(np.asarray(a).shape[-1]))


# --------------------------------------------------------------------------
# collocation grids


@dataclass(frozen=True)
class Grid:
    nk: int
    K: int

    @cached_property
    def Mx(self) -> int:
        return 2 * self.nk + 2

    @cached_property
    def Mt(self) -> int:
        return 4 * self.K + 2

    @cached_property
    def X(self):
        x = np.pi * (np.arange(self.Mx) + 0.5) / self.Mx
        return np.sin(np.outer(x, np.arange(self.nk)))

    @cached_property
    def Xp(self):
        return self.X.T * (2.0 / self.Mx)

    @cached_property
    def T(self):
        t = 2 * np.pi * np.arange(self.Mt) / self.Mt
        j = np.arange(-self.K, self.K + 1)
        return np.where(j >= 0, np.cos(np.outer(t, j)), np.sin(-np.outer(t, j)))

    @cached_property
    def Tp(self):
        j = np.arange(-self.K, self.K + 1)
        w = np.where(j == 0, 1.0, 2.0) / self.Mt
        return self.T.T * w[:, None]

    def to_grid(self, a):
        """(..., nk, 2K+1, nn) -> (..., Mx, Mt, nn)."""
        g = np.tensordot(self.X, a, axes=([1], [-3]))  # Mx, ..., J, nn
        g = np.moveaxis(g, 0, -3)
        g = np.tensordot(self.T, g, axes=([1], [-2]))  # Mt, ..., Mx, nn
        return np.moveaxis(g, 0, -2)

    def from_grid(self, g):
        a = np.tensordot(self.Xp, g, axes=([1], [-3]))
        a = np.moveaxis(a, 0, -3)
        a = np.tensordot(self.Tp, a, axes=([1], [-2]))
        return np.moveaxis(a, 0, -2)


def parity_split(a):
    K = (a.shape[-2] - 1) // 2
    odd = (np.abs(np.arange(-K, K + 1)) % 2 == 1)[:, None]
    return a * ~odd, a * odd


def flip_j(a):
    return a[..., ::-1, :]


# --------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class GalerkinProblem:
    """Truncated fixed-point problem with unknowns (u, v) on odd k < nk and
    |j| <= K.  ``param`` is s (normalized), b (free, stationary) as a power
    series in tau."""

    mode: Mode
    nk: int
    K: int
    param: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def nn(self) -> int:
        return np.asarray(self.param).reshape(-1).size

    @cached_property
    def grid(self) -> Grid:
        return Grid(self.nk, self.K)

    @cached_property
    def mask(self):
        m = np.zeros((self.nk, 2 * self.K + 1), bool)
        m[1::2, :] = True
        return m

    @property
    def size(self) -> int:
        return 2 * int(self.mask.sum())

    def with_param(self, param) -> "GalerkinProblem":
        return replace(self, param=np.asarray(param, dtype=float).reshape(-1))

    # packing ---------------------------------------------------------------

    def pack(self, u, v):
        """(nk, 2K+1, nn) pair -> (size, nn)."""
        return np.concatenate([u[self.mask], v[self.mask]], axis=0)

    def unpack(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[:, None]
        h = self.size // 2
        shape = (self.nk, 2 * self.K + 1, *x.shape[1:])
        u = np.zeros(shape)
        v = np.zeros(shape)
        u[self.mask] = x[:h]
        v[self.mask] = x[h:]
        return u, v

    def unpack_batch(self, X):
        """(size, B) directions -> (B, nk, 2K+1, 1) pair."""
        h = self.size // 2
        B = X.shape[1]
        u = np.zeros((B, self.nk, 2 * self.K + 1, 1))
        v = np.zeros_like(u)
        u[:, self.mask, 0] = X[:h].T
        v[:, self.mask, 0] = X[h:].T
        return u, v

    def pack_batch(self, u, v):
        return np.concatenate([u[:, self.mask, 0].T, v[:, self.mask, 0].T], axis=0)

    # ingredients --------------------------------------------------------------

    def forcing(self, nn):
        f = np.zeros((self.nk, 2 * self.K + 1, nn))
        f[1, self.K, 0] = 1.0
        return f

    def _k2(self):
        return (np.arange(self.nk, dtype=float) ** 2)[:, None, None]

    def resolvent(self, alpha, d, bshift, f, with_dt=False):
        """Floating (alpha d_t - d d_xx + bshift)^{-1} (optionally d_t after)."""
        nn = f.shape[-1]
        alpha, bshift = tpad(alpha, nn), tpad(bshift, nn)
        k2 = self._k2()
        j = np.arange(-self.K, self.K + 1, dtype=float)[:, None]
        c = np.broadcast_to(bshift, (self.nk, 1, nn)).copy()  # nk,1,nn
        c[..., 0] += d * k2[..., 0]
        aj = alpha[None, None, :] * j  # 1,J,nn
        den = tmul(c, c) + tmul(aj, aj)
        den[0] = 1.0
        inv = trecip(den)
        out = tmul(tmul(c, f) - tmul(aj, flip_j(f)), inv)
        out[..., 0, :, :] = 0.0
        if with_dt:
            out = j * flip_j(out)
        return out

    def parameters(self, u, n):
        """(alpha, b) as power series."""
        K = self.K
        nn = u.shape[-1]
        if self.mode is Mode.NORMALIZED:
            return n[1, K + 1], n[1, K - 1] - tpad(1.0 + D1, nn)
        if self.mode is Mode.FREE:
            return tmul(n[1, K + 1], trecip(u[1, K - 1])), tpad(self.param, nn)
        return None, tpad(self.param, nn)

    def s_value(self, nn):
        if self.mode is Mode.NORMALIZED:
            return tpad(self.param, nn)
        return tpad(np.ones(1), nn)

    def nonlinearity_grid(self, u, v):
        s = self.s_value(u.shape[-1])
        g = self.grid
        ue, uo = (g.to_grid(a) for a in parity_split(u))
        ve, vo = (g.to_grid(a) for a in parity_split(v))
        Pe = tmul(ue, ue) + tmul(s, tmul(uo, uo))
        Po = 2 * tmul(ue, uo)
        Ge = tmul(ue, ve) + tmul(s, tmul(uo, vo))
        Go = tmul(ue, vo) + tmul(uo, ve)
        n = tmul(Pe, ve) + tmul(Po, ve) + tmul(Pe, vo) + tmul(s, tmul(Po, vo))
        return n, (Pe, Po, Ge, Go, s)

    # map ------------------------------------------------------------------

    def H(self, u, v):
        """Galerkin map; returns (F, G, alpha, b)."""
        nn = u.shape[-1]
        if self.mode is Mode.STATIONARY:
            n = self.grid.from_grid(tmul(tmul(self.grid.to_grid(u), self.grid.to_grid(u)), self.grid.to_grid(v)))
            b = tpad(self.param, nn)
            k2 = self._k2().copy()
            k2[0] = 1.0
            f = self.forcing(nn) - tmul(b + tpad(1.0, nn), u) + n
            g = V_FACTOR * (tmul(b, u) - n)
            F, G = f / k2, g / k2
            F[0] = G[0] = 0.0
            return F, G, None, b
        ng, _ = self.nonlinearity_grid(u, v)
        n = self.grid.from_grid(ng)
        alpha, b = self.parameters(u, n)
        f = self.forcing(nn) + n
        g = tmul(b, u) - n
        F = self.resolvent(alpha, D1, b + tpad(1.0, nn), f)
        G = self.resolvent(alpha, D2, np.zeros(nn), g)
        return F, G, alpha, b

    def residual(self, x):
        u, v = self.unpack(x)
        F, G, _, _ = self.H(u, v)
        return self.pack(F, G) - x if np.ndim(x) > 1 else (self.pack(F, G) - self.pack(u, v))[:, 0]

    def jvp(self, u, v, du, dv):
        """Directional derivative of H at (u, v) (Taylor nn) along batched
        (B, nk, 2K+1, 1) directions; output (B, nk, 2K+1, nn)."""
        nn = u.shape[-1]
        g = self.grid
        if self.mode is Mode.STATIONARY:
            U, V = g.to_grid(u), g.to_grid(v)
            dU, dV = g.to_grid(du), g.to_grid(dv)
            q = g.from_grid(2 * tmul(tmul(U, V), dU) + tmul(tmul(U, U), dV))
            b = tpad(self.param, nn)
            k2 = self._k2().copy()
            k2[0] = 1.0
            F = (q - tmul(b + tpad(1.0, nn), du)) / k2
            G = V_FACTOR * (tmul(b, du) - q) / k2
            F[..., 0, :, :] = G[..., 0, :, :] = 0.0
            return F, G
        ng, (Pe, Po, Ge, Go, s) = self.nonlinearity_grid(u, v)
        n = g.from_grid(ng)
        alpha, b = self.parameters(u, n)
        f = self.forcing(nn) + n
        gg = tmul(b, u) - n
        bs1 = b + tpad(1.0, nn)
        zero = np.zeros(nn)
        due, duo = (g.to_grid(a) for a in parity_split(du))
        dve, dvo = (g.to_grid(a) for a in parity_split(dv))
        P, Ps = Pe + Po, Pe + tmul(s, Po)
        G_, Gs = Ge + Go, Ge + tmul(s, Go)
        dn = g.from_grid(2 * (tmul(due, G_) + tmul(duo, Gs)) + tmul(dve, P) + tmul(dvo, Ps))
        K = self.K
        if self.mode is Mode.NORMALIZED:
            adot, bdot = dn[:, 1, K + 1], dn[:, 1, K - 1]
        else:
            inv = trecip(u[1, K - 1])
            adot = tmul(dn[:, 1, K + 1] - tmul(alpha, tpad(du[:, 1, K - 1], nn)), inv)
            bdot = None
        F = self.resolvent(alpha, D1, bs1, dn)
        F_a = self.resolvent(alpha, D1, bs1, self.resolvent(alpha, D1, bs1, f, with_dt=True))
        F = F - tmul(adot[:, None, None, :], F_a)
        G = self.resolvent(alpha, D2, zero, tmul(b, du) - dn)
        G_a = self.resolvent(alpha, D2, zero, self.resolvent(alpha, D2, zero, gg, with_dt=True))
        G = G - tmul(adot[:, None, None, :], G_a)
        if bdot is not None:
            F = F - tmul(bdot[:, None, None, :], self.resolvent(alpha, D1, bs1, self.resolvent(alpha, D1, bs1, f)))
            G = G + tmul(bdot[:, None, None, :], self.resolvent(alpha, D2, zero, u))
        return F, G

    def jacobian(self, x, chunk: int = 256):
        """Dense Jacobian of the packed map at x (size, nn): (nn, size, size)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        u, v = self.unpack(x)
        n = self.size
        J = np.zeros((x.shape[1], n, n))
        eye = np.eye(n)
        for a in range(0, n, chunk):
            du, dv = self.unpack_batch(eye[:, a : a + chunk])
            F, G = self.jvp(u, v, du, dv)
            for q in range(x.shape[1]):
                J[q, :, a : a + chunk] = np.concatenate([F[..., q][:, self.mask].T, G[..., q][:, self.mask].T], 0)
        return J

    # conversions --------------------------------------------------------------

    def to_pair(self, x, rho_x=None, rho_tau: float = 1.0) -> SpacePair:
        u, v = self.unpack(x)
        if u.ndim == 2:
            u, v = u[..., None], v[..., None]
        if rho_x is None:
            rho_x = RHO_STATIONARY if self.mode is Mode.STATIONARY else RHO_PERIODIC
        rho_t = 1.0 if self.K == 0 else RHO_TIME
        return SpacePair(SpaceSeries.from_array(u, rho_x=rho_x, rho_t=rho_t, rho_tau=rho_tau),
                         SpaceSeries.from_array(v, rho_x=rho_x, rho_t=rho_t, rho_tau=rho_tau))

    def alpha_b(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        u, v = self.unpack(x)
        _, _, alpha, b = self.H(u, v)
        return alpha, b

    def resize(self, x, nk: int, K: int):
        """Re-embed a packed solution in a problem with new cuts."""
        u, v = self.unpack(x)
        new = replace(self, nk=nk, K=K)
        out = []
        for a in (u, v):
            z = np.zeros((nk, 2 * K + 1, a.shape[-1]))
            kk, KK = min(nk, self.nk), min(K, self.K)
            z[:kk, K - KK : K + KK + 1] = a[:kk, self.K - KK : self.K + KK + 1]
            out.append(z)
        return new, new.pack(*out)


# --------------------------------------------------------------------------
# Newton


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    condition: float = math.nan


def newton_solve(fixed_map, x0, tol: float = 1e-12, max_iter: int = 60, jacobian=None) -> NewtonResult:
    """Solve x = fixed_map(x).  ``jacobian(x)`` returns D fixed_map; without
    it a central-difference Jacobian is used."""
    x = np.array(x0, dtype=float)
    res = math.inf
    for it in range(1, max_iter + 1):
        r = fixed_map(x) - x
        res = float(np.max(np.abs(r))) if r.size else 0.0
        if not np.isfinite(res):
            raise NumericalFailure("Newton diverged")
        if res <= tol:
            return NewtonResult(x, res, it - 1, True)
        J = jacobian(x) if jacobian is not None else _fd_jacobian(fixed_map, x)
        A = np.eye(x.size) - np.atleast_2d(J)
        try:
            dx = np.linalg.solve(A, r.reshape(-1)).reshape(x.shape)
        except np.linalg.LinAlgError as e:
            raise NumericalFailure(f"singular Jacobian (cond {np.linalg.cond(A):.3g})") from e
        x = x + dx
        if float(np.max(np.abs(dx))) <= tol and it > 1:
            r = fixed_map(x) - x
            res = float(np.max(np.abs(r)))
            return NewtonResult(x, res, it, res <= 10 * tol)
    return NewtonResult(x, res, max_iter, False)


def _fd_jacobian(f, x, h=1e-7):
    x = np.asarray(x, dtype=float).reshape(-1)
    J = np.zeros((x.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.asarray(f(x + e)).reshape(-1) - np.asarray(f(x - e)).reshape(-1)) / (2 * h)
    return J


def solve(problem: GalerkinProblem, x0, tol: float = 1e-13, max_iter: int = 40) -> NewtonResult:
    """Newton for the packed Galerkin problem at Taylor order 0."""
    p = problem.with_param(np.asarray(problem.param).reshape(-1)[:1])

    def fmap(x):
        u, v = p.unpack(x)
        F, G, _, _ = p.H(u, v)
        return p.pack(F, G)[:, 0]

    out = newton_solve(fmap, np.asarray(x0, dtype=float).reshape(-1) if np.ndim(x0) == 1 else np.asarray(x0)[:, 0],
                       tol, max_iter, jacobian=lambda x: p.jacobian(x)[0])
    if out.converged:
        out.condition = float(np.linalg.cond(np.eye(p.size) - p.jacobian(out.x)[0]))
    return out


# --------------------------------------------------------------------------
# continuation


def taylor_branch(problem: GalerkinProblem, x0, param_series) -> np.ndarray:
    """Fourier-Taylor coefficients (size, D+1) of the branch through the
    converged point x0, parameter given as a power series in tau (its length
    fixes D).  Each order solves (I - J0) w_n = [H(w with w_n = 0)]_n."""
    param_series = np.asarray(param_series, dtype=float).reshape(-1)
    D = param_series.size - 1
    p0 = problem.with_param(param_series[:1])
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    A = np.eye(p0.size) - p0.jacobian(x0)[0]
    lu = scipy.linalg.lu_factor(A)
    W = np.zeros((p0.size, D + 1))
    W[:, 0] = x0
    for n in range(1, D + 1):
        pn = problem.with_param(param_series[: n + 1])
        u, v = pn.unpack(W[:, : n + 1])
        F, G, _, _ = pn.H(u, v)
        R = pn.pack(F, G)[:, n]
        W[:, n] = scipy.linalg.lu_solve(lu, R)
    return W


def branch_residual(problem: GalerkinProblem, W, param_series, taus=(-1.0, -0.5, 0.0, 0.5, 1.0)) -> float:
    """Max Galerkin residual of the truncated branch at sampled tau."""
    worst = 0.0
    for t in taus:
        x = tevaluate(W, t)
        b = tevaluate(param_series, t)
        worst = max(worst, float(np.max(np.abs(problem.with_param([b]).residual(x)))))
    return worst


def continue_branch(problem: GalerkinProblem, x0, start: float, stop: float, step: float | None = None,
                    tol: float = 1e-12, on_point=None, accept=None):
    """Natural-parameter continuation from a converged x0 at ``start`` to
    ``stop``.  Steps halve on Newton failure and double after three
    successes, within [2^-10, 1/2] of the interval length.  ``accept(p, x_old,
    x_new)`` may veto a converged step (treated as a failure).  Returns the
    list of (param, x) visited."""
    width = abs(stop - start)
    if width == 0:
        return [(start, np.asarray(x0))]
    sgn = 1.0 if stop > start else -1.0
    hmin, hmax = width * 2.0**-10, width / 2
    h = min(max(step or width / 16, hmin), hmax)
    pts = [(start, np.asarray(x0, dtype=float))]
    p, x, good = start, np.asarray(x0, dtype=float), 0
    while sgn * (stop - p) > 1e-15 * max(1.0, abs(stop)):
        q = p + sgn * min(h, abs(stop - p))
        W = taylor_branch(problem, x, [p, q - p])
        guess = W[:, 0] + W[:, 1]
        try:
            res = solve(problem.with_param([q]), guess, tol)
            ok = res.converged and (accept is None or accept(q, x, res.x))
        except NumericalFailure:
            ok = False
        if not ok:
            h /= 2
            good = 0
            if h < hmin:
                raise NumericalFailure(f"continuation stalled at {p}")
            continue
        p, x = q, res.x
        pts.append((p, x))
        if on_point is not None:
            on_point(p, x)
        good += 1
        if good >= 3:
            h, good = min(2 * h, hmax), 0
    return pts


# --------------------------------------------------------------------------
# stationary branch and eigenvalues


def stationary_problem(N: int, b: float = 0.0) -> GalerkinProblem:
    """Stationary problem on odd k <= N."""
    return GalerkinProblem(Mode.STATIONARY, N + 1, 0, np.array([float(b)]))


def stationary_solution(N: int, b: float, x0=None, tol: float = 1e-13):
    """Converged stationary point at b, continued from b = 0 if no guess."""
    p = stationary_problem(N, b)
    if x0 is None:
        p0 = p.with_param([0.0])
        x0 = solve(p0, np.zeros(p0.size), tol).x
        if b != 0:
            x0 = continue_branch(p0, x0, 0.0, b, tol=tol)[-1][1]
    res = solve(p, x0, tol)
    if not res.converged:
        raise NumericalFailure(f"stationary Newton failed at b={b} (residual {res.residual:.3g})")
    return p, res.x


def linearization_matrix(N: int, b: float, u, v):
    """Galerkin matrix of the time-dependent linearization at (U, V) on all
    sine modes k = 1..N: u_t = u_xx - (b+1) u + 2UV u + U^2 v,
    v_t = v_xx/64 + b u - 2UV u - U^2 v."""
    nk = N + 1
    g = Grid(3 * nk, 0)
    up_, vp = np.zeros((3 * nk, 1, 1)), np.zeros((3 * nk, 1, 1))
    up_[: u.shape[0]] = u[:, :1, :1]
    vp[: v.shape[0]] = v[:, :1, :1]
    U, V = g.to_grid(up_)[:, 0, 0], g.to_grid(vp)[:, 0, 0]
    x = np.pi * (np.arange(g.Mx) + 0.5) / g.Mx
    S = np.sin(np.outer(x, np.arange(1, nk)))  # Mx, N
    proj = S.T * (2.0 / g.Mx)
    m_uv = proj @ ((2 * U * V)[:, None] * S)
    m_uu = proj @ ((U * U)[:, None] * S)
    k2 = np.diag(np.arange(1, nk, dtype=float) ** 2)
    I = np.eye(N)
    top = np.hstack([-k2 - (b + 1) * I + m_uv, m_uu])
    bot = np.hstack([b * I - m_uv, -k2 * D2 - m_uu])
    return np.vstack([top, bot])


@dataclass
class EigenPoint:
    b: float
    eigenvalues: np.ndarray  # sorted by decreasing real part
    vectors: np.ndarray | None = None


def eigen_scan(b_min: float, b_max: float, steps: int, N: int = 32, keep_vectors: bool = False):
    """Leading eigenvalues of the stationary linearization along the branch."""
    bs = np.linspace(b_min, b_max, steps + 1)
    p, x = stationary_solution(N, float(bs[0]))
    out = []
    for b in bs:
        try:
            p, x = stationary_solution(N, float(b), x)
        except NumericalFailure:
            try:
                p, x = stationary_solution(N, float(b))
            except NumericalFailure as e:
                log.warning("eigen scan: skipped b=%g (%s)", b, e)
                continue
        u, v = p.unpack(x)
        L = linearization_matrix(N, float(b), u, v)
        if keep_vectors:
            lam, vec = np.linalg.eig(L)
        else:
            lam, vec = np.linalg.eigvals(L), None
        order = np.argsort(-lam.real, kind="stable")
        out.append(EigenPoint(float(b), lam[order], None if vec is None else vec[:, order]))
    return out


def sign_changes(scan) -> list[float]:
    """b values (linear interpolation) where max Re(lambda) changes sign."""
    out = []
    for a, c in zip(scan[:-1], scan[1:]):
        ra, rc = a.eigenvalues[0].real, c.eigenvalues[0].real
        if (ra < 0) != (rc < 0):
            out.append(a.b + (c.b - a.b) * (-ra) / (rc - ra))
    return out


def write_eigen_csv(scan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b", "re1", "im1", "re2", "im2"])
        for pt in scan:
            l1, l2 = pt.eigenvalues[0], pt.eigenvalues[1]
            w.writerow([f"{pt.b:.10g}", f"{l1.real:.10g}", f"{abs(l1.imag):.10g}", f"{l2.real:.10g}",
                        f"{abs(l2.imag):.10g}"])


# --------------------------------------------------------------------------
# Hopf point and periodic orbits


def hopf_crossing(N: int = 32, b_lo: float = 2.5, b_hi: float = 2.9, tol: float = 1e-12):
    """Bisect/secant for the first zero of max Re(lambda) in [b_lo, b_hi];
    returns (b, omega, eigenvector)."""
    def lead(b):
        p, x = stationary_solution(N, b)
        u, v = p.unpack(x)
        lam, vec = np.linalg.eig(linearization_matrix(N, b, u, v))
        i = int(np.argmax(lam.real + 1e-9 * np.sign(lam.imag)))
        if lam[i].imag < 0:
            lam, vec = lam.conj(), vec.conj()
        return lam[i], vec[:, i]

    fa, fb = lead(b_lo)[0].real, lead(b_hi)[0].real
    if (fa < 0) == (fb < 0):
        raise NumericalFailure("no Hopf crossing in the bracket")
    a, c = b_lo, b_hi
    for _ in range(200):
        m = 0.5 * (a + c)
        fm = lead(m)[0].real
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            c = m
        if c - a < tol:
            break
    lam, vec = lead(0.5 * (a + c))
    return 0.5 * (a + c), abs(lam.imag), vec


def hopf_seed(N: int = 31, K: int = 8, b_near: tuple[float, float] = (2.5, 2.9), N_eig: int | None = None):
    """Initial guess at s = 0 in normalized mode: even part the stationary
    solution, odd part the critical mode scaled so that A u = 0, B u = 1.
    Returns (problem, x, alpha_guess, b_guess)."""
    Ne = N if N_eig is None else N_eig
    b0, omega, vec = hopf_crossing(Ne, *b_near)
    ps, xs = stationary_solution(N, b0)
    us, vs = ps.unpack(xs)
    p = GalerkinProblem(Mode.NORMALIZED, N + 1, K, np.array([0.0]))
    u = np.zeros((p.nk, 2 * K + 1, 1))
    v = np.zeros_like(u)
    u[:, K, 0] = us[:, 0, 0]
    v[:, K, 0] = vs[:, 0, 0]
    phi_u, phi_v = vec[:Ne], vec[Ne:]
    c = -1j / phi_u[0]
    for k in range(1, min(Ne, N) + 1):
        for arr, ph in ((u, phi_u), (v, phi_v)):
            z = c * ph[k - 1]
            arr[k, K + 1, 0] = z.real
            arr[k, K - 1, 0] = -z.imag
    x = p.pack(u, v)[:, 0]
    x[np.abs(x) < 1e-15] = 0.0
    x = p.pack(*[a * p.mask[..., None] for a in p.unpack(x)])[:, 0]
    return p, x, omega, b0


def hopf_point(N: int = 31, K: int = 8, tol: float = 1e-13):
    """Converged normalized-mode solution at s = 0 with its (alpha, b)."""
    p, x, _, _ = hopf_seed(N, K)
    res = solve(p, x, tol)
    if not res.converged:
        raise NumericalFailure(f"Hopf Newton failed (residual {res.residual:.3g})")
    alpha, b = p.alpha_b(res.x)
    return p, res.x, float(alpha[0]), float(b[0])


def normalized_to_free(p: GalerkinProblem, x, s: float):
    """u = u_e + beta u_o with beta = sqrt(s); free mode at the induced b."""
    beta = math.sqrt(s)
    pp = p.with_param([s])
    u, v = pp.unpack(x)
    alpha, b = pp.alpha_b(x)
    out = []
    for a in (u, v):
        e, o = parity_split(a)
        out.append(e + beta * o)
    q = GalerkinProblem(Mode.FREE, p.nk, p.K, np.array([float(b[0])]))
    return q, q.pack(*out)[:, 0], float(alpha[0]), float(b[0])


def free_to_normalized(p: GalerkinProblem, x):
    u, v = p.unpack(x)
    beta = u[1, p.K - 1, 0]
    out = []
    for a in (u, v):
        e, o = parity_split(a)
        out.append(e + o / beta)
    q = GalerkinProblem(Mode.NORMALIZED, p.nk, p.K, np.array([beta * beta]))
    return q, q.pack(*out)[:, 0]


def period(alpha: float) -> float:
    return 2 * math.pi / alpha


class _Grow(Exception):
    def __init__(self, param, x):
        self.param, self.x = param, x


def time_tail(problem: GalerkinProblem, x) -> float:
    """Largest |coefficient| on the two outermost time frequencies relative to
    the largest coefficient."""
    u, v = problem.unpack(np.asarray(x).reshape(-1))
    a = np.concatenate([u[..., 0], v[..., 0]])
    edge = np.abs(a[:, [0, 1, -2, -1]]).max()
    return float(edge / max(np.abs(a).max(), 1e-300))


def periodic_at_b(b_target: float = 3.0, N: int = 31, K: int = 16, s_switch: float = 11 * 2.0**-11,
                  tol: float = 1e-12, K_start: int = 8, K_max: int = 96, tail_tol: float = 1e-9,
                  on_point=None):
    """Follow the periodic branch from the Hopf point: normalized mode in s up
    to s_switch, then free mode in b up to b_target.  K grows by half
    whenever the outermost time modes exceed ``tail_tol``; steps where alpha
    jumps by more than 10% are rejected.  Returns (problem, x, alpha)."""
    p, x, _, _ = hopf_point(N, K_start, tol)
    pts = continue_branch(p, x, 0.0, s_switch, tol=tol)
    q, y, _, b = normalized_to_free(p.with_param([s_switch]), pts[-1][1], s_switch)
    q, y = q.resize(y, q.nk, max(K, q.K))
    y = solve(q, y, tol).x

    def accept(prm, x_old, x_new):
        a0 = q.with_param([prm]).alpha_b(x_old)[0][0]
        a1 = q.with_param([prm]).alpha_b(x_new)[0][0]
        if not (a1 > 0 and abs(a1 - a0) <= 0.1 * a0):
            return False
        if time_tail(q, x_new) > tail_tol and q.K < K_max:
            raise _Grow(prm, x_new)
        return True

    while True:
        try:
            pts = continue_branch(q, y, b, b_target, tol=tol, on_point=on_point, accept=accept)
            break
        except _Grow as g:
            K_new = min(K_max, int(math.ceil(1.5 * q.K)))
            log.info("periodic branch: K %d -> %d at b=%.6g", q.K, K_new, g.param)
            q, y = q.with_param([g.param]).resize(g.x, q.nk, K_new)
            res = solve(q, y, tol)
            if not res.converged:
                raise NumericalFailure(f"re-solve after raising K failed at b={g.param}")
            y, b = res.x, g.param
    q = q.with_param([b_target])
    y = pts[-1][1]
    alpha, _ = q.alpha_b(y)
    return q, y, float(alpha[0])


# --------------------------------------------------------------------------
# CSV outputs


def write_branch_csv(rows, path, param_name: str = "b") -> None:
    """rows: iterable of (param, u11, v11, alpha)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([param_name, "u_1", "v_1", "alpha", "period"])
        for prm, u1, v1, a in rows:
            w.writerow([f"{prm:.12g}", f"{u1:.12g}", f"{v1:.12g}", f"{a:.12g}",
                        f"{period(a):.12g}" if a else ""])


def snapshot(problem: GalerkinProblem, x, alpha: float, times=None, nx: int = 64):
    """Rows (t, x, U, V) in original time units at fractions k/12 of the
    period (or given fractions)."""
    fr = np.arange(12) / 12 if times is None else np.asarray(times, dtype=float)
    u, v = problem.unpack(np.asarray(x).reshape(-1))
    xs = np.linspace(0, np.pi, nx)
    S = np.sin(np.outer(xs, np.arange(problem.nk)))
    rows = []
    T = period(alpha) if alpha else 0.0
    for f in fr:
        tt = 2 * np.pi * f
        j = np.arange(-problem.K, problem.K + 1)
        cj = np.where(j >= 0, np.cos(j * tt), np.sin(-j * tt))
        U = S @ (u[:, :, 0] @ cj)
        V = S @ (v[:, :, 0] @ cj)
        for xi, a, c in zip(xs, U, V):
            rows.append((f * T, xi, a, c))
    return rows


def write_snapshot_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "U", "V"])
        for t, x, a, c in rows:
            w.writerow([f"{t:.10g}", f"{x:.10g}", f"{a:.12g}", f"{c:.12g}"])
