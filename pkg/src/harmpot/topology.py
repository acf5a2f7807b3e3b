"""Betti numbers, harmonic-space dimensions, circulations and fluxes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .derham import Cochain, DeRhamComplex
from .errors import DegreeOutOfRange, MismatchedComplex
from .solvers import GF_PRIME, gf_rank, nullity


@dataclass(frozen=True)
class BettiVector:
    b0: int
    b1: int
    b2: int
    b3: int

    def __iter__(self):
        return iter((self.b0, self.b1, self.b2, self.b3))

    def __getitem__(self, k):
        return tuple(self)[k]

    @property
    def euler(self):
        return self.b0 - self.b1 + self.b2 - self.b3


def incidence_ranks(cx: DeRhamComplex, p=GF_PRIME):
    return tuple(gf_rank(D, p) for D in cx.D)


def betti_numbers(cx: DeRhamComplex, p=GF_PRIME) -> BettiVector:
    """Betti numbers from exact GF(p) ranks of the incidence matrices."""
    r = (0,) + incidence_ranks(cx, p) + (0,)
    n = cx.counts
    return BettiVector(*(int(n[k] - r[k] - r[k + 1]) for k in range(4)))


def euler_characteristic(cx: DeRhamComplex) -> int:
    V, E, F, T = cx.counts
    return V - E + F - T


def _block_scale(B):
    top = abs(B).max() if B.nnz else 0.0
    return B / top if top else B


def harmonic_system(cx: DeRhamComplex, k: int):
    """Stacked constraint matrix whose null space is the discrete harmonic space.

    k = 1: interior 2-cochains w with D2 w = 0 and w M2 D1 a = 0 for all
    interior 1-cochains a. k = 2: interior 1-cochains v with D1 v = 0 and
    v M1 D0 u = 0 for all interior 0-cochains u. Each block is scaled by its
    largest entry so the relative SVD threshold treats both alike.
    """
    if k not in (1, 2):
        raise DegreeOutOfRange("harmonic dimension is defined for k in {1, 2}")
    top = 2 if k == 1 else 1        # degree of the harmonic cochains
    I_top = cx.interior[top]
    I_low = cx.interior[top - 1]
    D_up = cx.D[top][:, I_top]
    M = cx.mass(top)[I_top][:, I_top]
    D_low = cx.D[top - 1][I_top][:, I_low]
    A = sp.vstack([_block_scale(D_up), _block_scale((D_low.T @ M).tocsr())]).tocsr()
    return A


def harmonic_dimension(cx: DeRhamComplex, k: int, rel_threshold=1e-10, return_basis=False, cap=None):
    """Dimension (and optionally an orthonormal basis) of the discrete harmonic space.

    The basis columns are interior cochains of degree 2 (k = 1) or 1 (k = 2).
    """
    A = harmonic_system(cx, k)
    dim, basis = nullity(A, rel_threshold, cap=cap)
    return (dim, basis) if return_basis else dim


def circulation(cx: DeRhamComplex, cochain, chain) -> float:
    """Signed sum of 1-cochain coefficients along an edge chain.

    ``chain`` is a closed vertex cycle or a ``{(a, b): coeff}`` mapping.
    """
    values = _values(cx, cochain, 1)
    idx, coeff = cx.edge_chain(chain)
    return float(coeff @ values[idx])


def flux(cx: DeRhamComplex, cochain, faces) -> float:
    """Signed sum of 2-cochain coefficients over oriented triangles."""
    values = _values(cx, cochain, 2)
    idx, sign = cx.face_chain(faces)
    return float(sign @ values[idx])


def _values(cx, cochain, degree):
    if isinstance(cochain, Cochain) and cochain.degree != degree:
        raise MismatchedComplex(f"expected a {degree}-cochain, got degree {cochain.degree}")
    values = np.asarray(cochain, dtype=float)
    if len(values) != cx.counts[degree]:
        raise MismatchedComplex(f"{degree}-cochain length {len(values)} != {cx.counts[degree]}")
    return values
