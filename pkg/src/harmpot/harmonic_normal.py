"""Normal harmonic fields as gradients of cavity-fitted scalar potentials.

For each cavity surface S_i (i >= 1) the potential phi_i lives in the space
of nodal functions that vanish on the outer surface S_0 and are constant on
every cavity surface. The constraint is imposed by aggregation: all vertices
of one cavity surface share a single unknown. The potential solves

    <grad u, grad phi_i> = u|S_i     for every u in that space,

so the reduced stiffness system is ``K x = e_i`` with ``e_i`` the unit
vector of the S_i unknown. The field is ``v_i = D0 phi_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .derham import DeRhamComplex, snap_dyadic
from .errors import IndexOutOfRange
from .solvers import CGResult, SolverConfig, as_csr, cg_solve

INTERIOR = -1


@dataclass(frozen=True, eq=False)
class CavityConstrainedSpace:
    """Vertex classification and the aggregation map onto reduced unknowns.

    ``labels[v]`` is -1 for interior vertices and the component index i for
    vertices on S_i. ``R`` (vertices x unknowns) injects reduced unknowns
    into full 0-cochains: interior vertices first, then one column per
    cavity surface.
    """

    complex: DeRhamComplex
    labels: np.ndarray
    interior_vertices: np.ndarray
    R: sp.csr_matrix
    K: sp.csr_matrix
    n_cavities: int

    @property
    def dim(self):
        return self.R.shape[1]

    def master(self, i):
        """Reduced index of the shared unknown of cavity surface ``i``."""
        _check_cavity(i, self.n_cavities)
        return len(self.interior_vertices) + i - 1

    def representative_vertex(self, i):
        """Smallest vertex index on S_i; only used for reporting."""
        _check_cavity(i, self.n_cavities)
        return int(np.flatnonzero(self.labels == i)[0])


def _check_cavity(i, n):
    if not isinstance(i, (int, np.integer)) or not 1 <= i <= n:
        raise IndexOutOfRange(f"cavity index {i} outside 1..{n}")


def stiffness(cx: DeRhamComplex):
    D0 = cx.D[0]
    return as_csr(D0.T @ cx.mass(1) @ D0)


def build_constrained_space(cx: DeRhamComplex, boundary_components) -> CavityConstrainedSpace:
    nv = cx.counts[0]
    labels = np.full(nv, INTERIOR, dtype=np.int64)
    for i, tri in enumerate(boundary_components):
        verts = np.unique(np.asarray(tri).ravel())
        if np.any(labels[verts] != INTERIOR):
            raise ValueError("boundary components share a vertex")
        labels[verts] = i
    on_boundary = np.zeros(nv, bool)
    on_boundary[cx.boundary[0]] = True
    if np.any(on_boundary != (labels != INTERIOR)):
        raise ValueError("boundary components do not cover the boundary vertices")
    interior = np.flatnonzero(labels == INTERIOR)
    n_cav = max(len(boundary_components) - 1, 0)
    cols = np.full(nv, -1, dtype=np.int64)
    cols[interior] = np.arange(len(interior))
    for i in range(1, n_cav + 1):
        cols[labels == i] = len(interior) + i - 1
    keep = cols >= 0
    R = as_csr(
        sp.coo_matrix(
            (np.ones(int(keep.sum())), (np.flatnonzero(keep), cols[keep])),
            shape=(nv, len(interior) + n_cav),
        )
    )
    K = R.T @ stiffness(cx) @ R
    K = as_csr((K + K.T) * 0.5)       # exact symmetry despite summation order
    return CavityConstrainedSpace(cx, labels, interior, R, K, n_cav)


def cavity_indicator(space: CavityConstrainedSpace, j) -> np.ndarray:
    """0-cochain equal to 1 on the vertices of S_j and 0 elsewhere."""
    _check_cavity(j, space.n_cavities)
    return (space.labels == j).astype(float)


@dataclass
class PotentialSolution:
    phi: np.ndarray
    reduced: np.ndarray
    cg: CGResult


def solve_cavity_potential(space: CavityConstrainedSpace, i, tol=1e-12, config=None) -> PotentialSolution:
    """Potential of cavity ``i``: zero on S_0, constant on each S_j, weakly harmonic inside."""
    _check_cavity(i, space.n_cavities)
    config = config or SolverConfig(tol=tol)
    rhs = np.zeros(space.dim)
    rhs[space.master(i)] = 1.0
    res = cg_solve(space.K, rhs, config)
    # snapping makes D1 D0 phi vanish bit-for-bit and keeps phi exactly
    # constant on every boundary component
    x = snap_dyadic(res.x)
    return PotentialSolution(space.R @ x, x, res)


@dataclass
class NormalHarmonicBasis:
    potentials: np.ndarray          # (V, beta2)
    fields: np.ndarray              # (E, beta2), fields = D0 @ potentials
    indicators: np.ndarray          # (V, beta2)
    G: np.ndarray                   # G[j, i] = <D0 psi_j, v_i>_M1
    residuals: list = field(default_factory=list)
    iterations: list = field(default_factory=list)

    @property
    def size(self):
        return self.fields.shape[1]


def normal_harmonic_basis(cx: DeRhamComplex, boundary_components, tol=1e-12, config=None) -> NormalHarmonicBasis:
    space = build_constrained_space(cx, boundary_components)
    m = space.n_cavities
    nv, ne = cx.counts[:2]
    phi = np.zeros((nv, m))
    psi = np.zeros((nv, m))
    residuals, iterations = [], []
    for i in range(1, m + 1):
        sol = solve_cavity_potential(space, i, tol, config)
        phi[:, i - 1] = sol.phi
        psi[:, i - 1] = cavity_indicator(space, i)
        residuals.append(sol.cg.residual)
        iterations.append(sol.cg.iterations)
    v = cx.D[0] @ phi if m else np.zeros((ne, 0))
    G = (cx.D[0] @ psi).T @ (cx.mass(1) @ v) if m else np.zeros((0, 0))
    return NormalHarmonicBasis(phi, v, psi, G, residuals, iterations)


def normal_membership(cx: DeRhamComplex, v) -> dict:
    """Membership checks of a 1-cochain in the discrete normal harmonic space."""
    v = np.asarray(v, dtype=float)
    M1 = cx.mass(1)
    norm = float(np.sqrt(v @ (M1 @ v)))
    grads = cx.D[0][:, cx.interior[0]]
    pairing = grads.T @ (M1 @ v)
    return {
        "boundary_edge_max": float(np.max(np.abs(v[cx.boundary[1]]), initial=0.0)),
        "curl_max": float(np.max(np.abs(cx.D[1] @ v), initial=0.0)),
        "weak_div_rel": float(np.max(np.abs(pairing), initial=0.0) / norm) if norm else 0.0,
        "norm": norm,
    }
