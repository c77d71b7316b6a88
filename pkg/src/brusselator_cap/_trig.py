"""One-dimensional product tables for the sine/cosine and cosi bases.

Every entry is 0, +-1/2 or +-1, so scaling a coefficient by a table entry
is exact in binary floating point.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

SIN, COS = "sin", "cos"


def product_kind(kf: str, kg: str) -> str:
    return COS if kf == kg else SIN


def x_min_index(kind: str) -> int:
    return 1 if kind == SIN else 0


@lru_cache(maxsize=128)
def x_table(kf: str, kg: str, nf: int, ng: int) -> np.ndarray:
    """T[o, m, a]: coefficient of basis_o in f_basis_m * g_basis_a.

    Index 0 of a sine slot is structurally zero.
    """
    no = nf + ng - 1
    T = np.zeros((no, nf, ng))
    out = product_kind(kf, kg)
    for m in range(nf):
        if kf == SIN and m == 0:
            continue
        for a in range(ng):
            if kg == SIN and a == 0:
                continue
            s, d = a + m, a - m
            if out == COS:
                if kf == kg == COS:
                    T[s, m, a] += 0.5
                    T[abs(d), m, a] += 0.5
                else:  # sin*sin
                    T[abs(d), m, a] += 0.5
                    T[s, m, a] -= 0.5
            else:
                # cos(p) sin(q) = [sin(q+p) + sin(q-p)] / 2 with q the sine index
                q, p = (a, m) if kg == SIN else (m, a)
                T[q + p, m, a] += 0.5
                if q != p:
                    T[abs(q - p), m, a] += 0.5 if q > p else -0.5
    if out == SIN:
        T[0] = 0.0
    T.setflags(write=False)
    return T


@lru_cache(maxsize=128)
def t_table(Kf: int, Kg: int) -> np.ndarray:
    """T[p, i, j] over cosi indices, stored at offsets p+Ko, i+Kf, j+Kg
    with Ko = Kf + Kg."""
    Ko = Kf + Kg
    T = np.zeros((2 * Ko + 1, 2 * Kf + 1, 2 * Kg + 1))
    for i in range(-Kf, Kf + 1):
        for j in range(-Kg, Kg + 1):
            for idx, coef in cosi_product(i, j):
                T[idx + Ko, i + Kf, j + Kg] += coef
    T.setflags(write=False)
    return T


def cosi_product(i: int, j: int):
    """Expansion of cosi_i * cosi_j as [(index, coefficient), ...]."""
    a, b = abs(i), abs(j)
    if i >= 0 and j >= 0:
        return [(a + b, 0.5), (abs(a - b), 0.5)]
    if i < 0 and j < 0:
        out = [(abs(a - b), 0.5)]
        out.append((a + b, -0.5))
        return out
    # one cosine, one sine: cos(p) sin(q) = [sin(q+p) + sin(q-p)] / 2
    q, p = (a, b) if i < 0 else (b, a)
    out = [(-(q + p), 0.5)]
    if q > p:
        out.append((-(q - p), 0.5))
    elif q < p:
        out.append((-(p - q), -0.5))
    return out


def cosi_values(K: int, t) -> np.ndarray:
    """Matrix [len(t), 2K+1] of cosi_j(t), j = -K..K."""
    t = np.asarray(t, dtype=float)
    j = np.arange(-K, K + 1)
    return np.where(j >= 0, np.cos(np.outer(t, j)), np.sin(-np.outer(t, j)))


def x_values(kind: str, n: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = np.arange(n)
    return np.sin(np.outer(x, k)) if kind == SIN else np.cos(np.outer(x, k))
