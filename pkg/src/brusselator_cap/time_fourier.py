"""Time-periodic enclosures on the cosi basis with parity-banded tails.

``TimeFourierEnclosure`` represents u = p + sum_J h^J where

* p = sum_{|j|<=K} u_j cosi_j(t), cosi_j = cos(jt) (j >= 0), sin(-jt) (j < 0),
  with Taylor/ball coefficients u_j (last array axis is the Taylor index);
* h^J, J in -2K..2K, is supported on the cosi indices J, J+2 sgn J, ...:
  cosines of frequency |J|, |J|+2, ... for J >= 0 and sines for J < 0,
  with ||h^J|| <= bands[J].  Band norms are stored already weighted.

The norm is sum_j ||u_j|| w^|j| + sum_J bands[J] with w = ``rho_t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _trig
from .ball import Ball, flush, gamma, up
from .taylor_enclosure import TaylorEnclosure, powers, t_mul, t_norm


def _band_index(cos_type: bool, m_low: int, parity: int, K: int) -> int:
    """Band holding frequencies >= m_low of the given parity and type."""
    floor = parity if cos_type else (2 if parity == 0 else 1)
    m = max(m_low, floor)
    top = 2 * K if (2 * K) % 2 == parity else 2 * K - 1
    if m > top:
        m = top
    if not cos_type and m == 0:
        m = 2
    return m if cos_type else -m


@dataclass(frozen=True, eq=False)
class TimeFourierEnclosure:
    c: np.ndarray  # (2K+1, D+1)
    r: np.ndarray
    bands: np.ndarray  # (4K+1,), index J + 2K
    is_constant: bool = False
    rho_t: float = 1 + 2.0**-20
    rho_tau: float = 1.0
    split: int | None = None

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        r = np.array(self.r, dtype=float)
        if c.ndim == 1:
            c, r = c[:, None], r[:, None]
        K = (c.shape[0] - 1) // 2
        bands = np.array(self.bands, dtype=float) if self.bands is not None else np.zeros(4 * K + 1)
        if bands.shape != (4 * K + 1,):
            raise ValueError("band array must have length 4K+1")
        if np.any(bands < 0) or np.any(r < 0):
            raise ValueError("negative radius or band norm")
        c, r = flush(c, r)
        if self.is_constant:
            nz = np.ones(2 * K + 1, bool)
            nz[K] = False
            if np.any(c[nz]) or np.any(r[nz]) or np.any(bands):
                raise ValueError("constant flag with non-constant content")
        split = c.shape[1] if self.split is None else min(self.split, c.shape[1])
        for k, v in (("c", c), ("r", r), ("bands", bands), ("split", split)):
            object.__setattr__(self, k, v)

    @property
    def K(self) -> int:
        return (self.c.shape[0] - 1) // 2

    @property
    def D(self) -> int:
        return self.c.shape[1] - 1

    @staticmethod
    def from_coeffs(coeffs, K: int | None = None, **kw) -> "TimeFourierEnclosure":
        """From a dict {j: float} or an array over j = -K..K."""
        if isinstance(coeffs, dict):
            K = max(abs(j) for j in coeffs) if K is None else K
            a = np.zeros(2 * K + 1)
            for j, v in coeffs.items():
                a[j + K] = v
        else:
            a = np.asarray(coeffs, dtype=float)
            K = (a.shape[0] - 1) // 2
        const = bool(np.all(np.delete(a, K) == 0)) if a.ndim == 1 else False
        return TimeFourierEnclosure(a, np.zeros_like(a), np.zeros(4 * K + 1), is_constant=const, **kw)

    def _like(self, c, r, bands, const=None, split=None):
        return TimeFourierEnclosure(c, r, bands, self.is_constant if const is None else const,
                                    self.rho_t, self.rho_tau, self.split if split is None else split)

    def coeff(self, j: int) -> TaylorEnclosure:
        return TaylorEnclosure(self.c[j + self.K], self.r[j + self.K], self.split, self.rho_tau)

    def _wt(self, n):
        return powers(self.rho_t, n)

    def coeff_norms(self):
        """Weighted upper norms of each coefficient."""
        _, hi = self._wt(self.K + 1)
        w = hi[np.abs(np.arange(-self.K, self.K + 1))]
        return up(t_norm(self.c, self.r, self.rho_tau) * w, 2)

    def norm(self) -> Ball:
        hi = float(up(np.sum(self.coeff_norms()) + np.sum(self.bands), 4 * self.K + 4))
        return Ball.from_interval(0.0, hi)

    def norm_upper(self) -> float:
        return self.norm().upper

    # parity -----------------------------------------------------------------

    def _parity(self, par: int) -> "TimeFourierEnclosure":
        j = np.abs(np.arange(-self.K, self.K + 1))
        J = np.abs(np.arange(-2 * self.K, 2 * self.K + 1))
        m = (j % 2 == par)[:, None]
        return self._like(self.c * m, self.r * m, self.bands * (J % 2 == par))

    def even_part(self) -> "TimeFourierEnclosure":
        return self._parity(0)

    def odd_part(self) -> "TimeFourierEnclosure":
        out = self._parity(1)
        if self.is_constant:
            return TimeFourierEnclosure(np.zeros_like(self.c), np.zeros_like(self.r), np.zeros_like(self.bands),
                                        True, self.rho_t, self.rho_tau, self.split)
        return out

    # arithmetic -----------------------------------------------------------------

    def __add__(self, o: "TimeFourierEnclosure") -> "TimeFourierEnclosure":
        c = self.c + o.c
        r = up(self.r + o.r + np.spacing(np.abs(c)), 2)
        return self._like(c, r, up(self.bands + o.bands, 1), const=self.is_constant and o.is_constant,
                          split=min(self.split, o.split))

    def __neg__(self):
        return self._like(-self.c, self.r, self.bands)

    def __sub__(self, o):
        return self + (-o)

    def scalar_mul(self, s) -> "TimeFourierEnclosure":
        s = s if isinstance(s, TaylorEnclosure) else TaylorEnclosure.constant(s, self.D, self.rho_tau)
        c, r = t_mul(self.c, self.r, s.c[None], s.r[None], self.rho_tau)
        split = min(self.split, s.split, self.D if self.D > 0 else self.split)
        return self._like(c, r, up(self.bands * s.norm_upper(), 1), split=split)

    def prod(self, o: "TimeFourierEnclosure") -> "TimeFourierEnclosure":
        """Enclosure of the pointwise product."""
        K, nn = self.K, self.D + 1
        if o.K != K or o.D != self.D:
            raise ValueError("mismatched cuts")
        T = _trig.t_table(K, K)  # (4K+1, 2K+1, 2K+1)
        pc, pr = t_mul(self.c[:, None, :], self.r[:, None, :], o.c[None, :, :], o.r[None, :, :], self.rho_tau)
        full_c = np.tensordot(T, pc, axes=([1, 2], [0, 1]))
        aT = np.abs(T)
        full_a = np.tensordot(aT, np.abs(pc), axes=([1, 2], [0, 1]))
        full_r = up(np.tensordot(aT, pr, axes=([1, 2], [0, 1])) + gamma(9) * full_a, 8)
        c = full_c[K : 3 * K + 1]
        r = full_r[K : 3 * K + 1]
        bands = np.zeros(4 * K + 1)
        # exact high frequencies become bands at their own index
        _, hi = self._wt(2 * K + 1)
        for p in list(range(0, K)) + list(range(3 * K + 1, 4 * K + 1)):
            idx = p - 2 * K
            nrm = t_norm(full_c[p], full_r[p], self.rho_tau) * hi[abs(idx)]
            bands[p] += nrm
        # coefficient x band and band x band
        ua, va = self.coeff_norms(), o.coeff_norms()
        for J in range(-2 * K, 2 * K + 1):
            for src_c, src_b in ((ua, o.bands), (va, self.bands)):
                bJ = src_b[J + 2 * K]
                if bJ == 0:
                    continue
                for i in range(-K, K + 1):
                    ni = src_c[i + K]
                    if ni == 0:
                        continue
                    cos_type = (i >= 0) == (J >= 0)
                    target = _band_index(cos_type, abs(J) - abs(i), (abs(J) + abs(i)) % 2, K)
                    bands[target + 2 * K] += ni * bJ
        for J1 in range(-2 * K, 2 * K + 1):
            b1 = self.bands[J1 + 2 * K]
            if b1 == 0:
                continue
            for J2 in range(-2 * K, 2 * K + 1):
                b2 = o.bands[J2 + 2 * K]
                if b2 == 0:
                    continue
                cos_type = (J1 >= 0) == (J2 >= 0)
                target = _band_index(cos_type, 0, (abs(J1) + abs(J2)) % 2, K)
                bands[target + 2 * K] += b1 * b2
        bands = up(bands, 4 * (4 * K + 1) + 4)
        split = min(self.split, o.split)
        if self.D > 0:
            split = min(split, self.D)
        return self._like(c, r, bands, const=self.is_constant and o.is_constant, split=split)

    def prod_scaled(self, o: "TimeFourierEnclosure", s) -> "TimeFourierEnclosure":
        """u_e v_e + u_e v_o + u_o v_e + s u_o v_o."""
        ue, uo = self.even_part(), self.odd_part()
        ve, vo = o.even_part(), o.odd_part()
        return ue.prod(o) + uo.prod(ve) + uo.prod(vo).scalar_mul(s)

    # evaluation -------------------------------------------------------------------

    def evaluate(self, t, tau=0.0):
        T = _trig.cosi_values(self.K, np.atleast_1d(t))
        P = float(tau) ** np.arange(self.D + 1)
        return T @ (self.c @ P)

    def contains_samples(self, t, values, tau=0.0) -> bool:
        """Pointwise check (floating, with a generous rounding cushion): the
        sampled values of a member must lie within the evaluated block plus
        the sup-norm bound of bands and radii."""
        vals = self.evaluate(t, tau)
        _, hi = self._wt(self.K + 1)
        slack = float(np.sum(t_norm(np.zeros_like(self.c), self.r, self.rho_tau)) + np.sum(self.bands))
        cushion = 1e-12 * (1 + float(np.sum(np.abs(self.c))))
        return bool(np.all(np.abs(np.asarray(values) - vals) <= slack + cushion))

    # serialization ----------------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self.K} {self.D} {self.split} {self.rho_t.hex()} {int(self.is_constant)}"]
        for j in range(-self.K, self.K + 1):
            for n in range(self.D + 1):
                lines.append(f"{j} {n} {self.c[j + self.K, n].hex()} {self.r[j + self.K, n].hex()}")
        lines.append(" ".join(b.hex() for b in self.bands))
        return "\n".join(lines)

    @staticmethod
    def from_text(text: str) -> "TimeFourierEnclosure":
        lines = text.strip().splitlines()
        K, D, split, rho, const = lines[0].split()
        K, D = int(K), int(D)
        c = np.zeros((2 * K + 1, D + 1))
        r = np.zeros_like(c)
        for line in lines[1 : 1 + (2 * K + 1) * (D + 1)]:
            j, n, a, b = line.split()
            c[int(j) + K, int(n)] = float.fromhex(a)
            r[int(j) + K, int(n)] = float.fromhex(b)
        bands = np.array([float.fromhex(x) for x in lines[-1].split()])
        return TimeFourierEnclosure(c, r, bands, bool(int(const)), float.fromhex(rho), 1.0, int(split))
