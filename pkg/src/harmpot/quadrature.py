"""Gauss-type quadrature on the unit interval, triangle and tetrahedron.

Simplex rules are collapsed (Duffy) tensor products of Gauss-Legendre rules,
``q`` points per direction. A q-point rule integrates polynomials of total
degree ``2q - 1 - (dim - 1)`` exactly on the simplex, which is enough for the
degree <= 3 fields used in tests with ``q = 4``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_interval(q: int):
    """Points in [0, 1] and weights summing to 1."""
    if q < 1:
        raise ValueError("quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(q)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def gauss_triangle(q: int):
    """Barycentric points (N, 3) and weights summing to 1/2 (reference area)."""
    s, ws = gauss_interval(q)
    S, T = np.meshgrid(s, s, indexing="ij")
    W = np.outer(ws, ws) * (1 - S)
    x = S.ravel()
    y = (T * (1 - S)).ravel()
    bary = np.stack([1 - x - y, x, y], axis=1)
    return bary, W.ravel()


@lru_cache(maxsize=None)
def gauss_tet(q: int):
    """Barycentric points (N, 4) and weights summing to 1/6 (reference volume)."""
    s, ws = gauss_interval(q)
    S, T, U = np.meshgrid(s, s, s, indexing="ij")
    W = ws[:, None, None] * ws[None, :, None] * ws[None, None, :] * (1 - S) ** 2 * (1 - T)
    x = S
    y = T * (1 - S)
    z = U * (1 - S) * (1 - T)
    x, y, z = x.ravel(), y.ravel(), z.ravel()
    bary = np.stack([1 - x - y - z, x, y, z], axis=1)
    return bary, W.ravel()
