"""Lowest-order Whitney de Rham complex on a tetrahedral mesh.

Entities are numbered in lexicographic order of their sorted vertex tuples
and oriented by increasing vertex index. The incidence matrices ``D[0]``
(grad), ``D[1]`` (curl) and ``D[2]`` (div) therefore have entries in
{-1, 0, +1}. Degrees of freedom are vertex values, edge circulations, face
fluxes and cell integrals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import simplices as sx
from .errors import (
    DegreeOutOfRange,
    MismatchedComplex,
    NonConformingMesh,
    UnknownEdge,
    UnknownFace,
)
from .quadrature import gauss_interval, gauss_tet, gauss_triangle
from .solvers import as_csr


@dataclass(frozen=True, eq=False)
class Cochain:
    """Coefficients of a discrete k-form."""

    degree: int
    values: np.ndarray

    def __post_init__(self):
        if self.degree not in (0, 1, 2, 3):
            raise DegreeOutOfRange(f"degree {self.degree} not in 0..3")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(-1))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)


class DeRhamComplex:
    """Entity tables, incidence matrices, boundary DOF sets and mass matrices.

    Mass matrices are assembled lazily and cached (``mass(k)``).
    """

    def __init__(self, vertices, cells, edges, faces, cell_edges, cell_faces, D, boundary, mesh=None):
        self.vertices = vertices
        self.cells = cells
        self.edges = edges
        self.faces = faces
        self.cell_edges = cell_edges
        self.cell_faces = cell_faces
        self.D = D
        self.boundary = boundary
        self.interior = [
            np.setdiff1d(np.arange(n), b) for n, b in zip(self.counts, boundary)
        ]
        self.mesh = mesh
        self._mass = {}
        self._geometry = None

    @property
    def counts(self):
        return (len(self.vertices), len(self.edges), len(self.faces), len(self.cells))

    def n(self, k):
        return self.counts[_check_degree(k, 3)]

    @property
    def volumes(self):
        return self.geometry[0]

    @property
    def geometry(self):
        """``(volumes, barycentric gradients (T, 4, 3))`` of the sorted cells."""
        if self._geometry is None:
            P = self.vertices[self.cells]
            J = P[:, 1:] - P[:, :1]
            det = np.linalg.det(J)
            G = np.linalg.inv(J)
            grads = np.empty((len(self.cells), 4, 3))
            grads[:, 1:] = np.transpose(G, (0, 2, 1))
            grads[:, 0] = -grads[:, 1:].sum(axis=1)
            self._geometry = (np.abs(det) / 6.0, grads)
        return self._geometry

    def mass(self, k):
        k = _check_degree(k, 3)
        if k not in self._mass:
            self._mass[k] = assemble_mass(self, k)
        return self._mass[k]

    # -- lookups -----------------------------------------------------------

    def edge_indices(self, pairs):
        """Indices and orientation signs (+1 when ``a < b``) of directed edges."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        idx = sx.lookup_rows(self.edges, np.sort(pairs, axis=1))
        if np.any(idx < 0):
            bad = pairs[np.argmax(idx < 0)]
            raise UnknownEdge(f"edge {tuple(int(v) for v in bad)} is not in the complex")
        sign = np.where(pairs[:, 0] < pairs[:, 1], 1, -1)
        return idx, sign

    def face_indices(self, triples):
        """Indices and orientation signs of oriented triangles."""
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        idx = sx.lookup_rows(self.faces, np.sort(triples, axis=1))
        if np.any(idx < 0):
            bad = triples[np.argmax(idx < 0)]
            raise UnknownFace(f"face {tuple(int(v) for v in bad)} is not in the complex")
        return idx, permutation_sign(triples)

    def edge_chain(self, chain):
        """Convert a vertex cycle or ``{(a, b): coeff}`` mapping to ``(index, coeff)`` arrays."""
        if isinstance(chain, dict):
            items = sorted(chain.items())
            pairs = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, 2)
            coeff = np.array([c for _, c in items], dtype=float)
        else:
            cyc = [int(v) for v in np.asarray(chain).reshape(-1)]
            pairs = np.array(sx.cycle_edges(cyc), dtype=np.int64).reshape(-1, 2)
            coeff = np.ones(len(pairs))
        idx, sign = self.edge_indices(pairs)
        return idx, coeff * sign

    def face_chain(self, triples):
        idx, sign = self.face_indices(triples)
        return idx, sign.astype(float)


def permutation_sign(triples):
    """+1 for rows that are an even permutation of their sorted order."""
    t = np.asarray(triples)
    inv = (t[:, 0] > t[:, 1]).astype(int) + (t[:, 0] > t[:, 2]) + (t[:, 1] > t[:, 2])
    return np.where(inv % 2 == 0, 1, -1)


def _check_degree(k, top):
    if not isinstance(k, (int, np.integer)) or not 0 <= k <= top:
        raise DegreeOutOfRange(f"degree {k} not in 0..{top}")
    return int(k)


def _incidence(rows, cols, vals, shape):
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=shape, dtype=float))


def build_complex(mesh_or_vertices, tets=None) -> DeRhamComplex:
    """Assemble the Whitney complex of a mesh (a ``MarkedMesh`` or raw arrays)."""
    mesh = None
    if tets is None:
        mesh = mesh_or_vertices
        vertices, tets = mesh.vertices, mesh.tets
    else:
        vertices = mesh_or_vertices
    vertices = np.asarray(vertices, dtype=float)
    tets = np.asarray(tets, dtype=np.int64).reshape(-1, 4)
    if len(tets) == 0:
        raise NonConformingMesh("mesh has no cells")
    if tets.min() < 0 or tets.max() >= len(vertices):
        raise NonConformingMesh("cell refers to a missing vertex")
    vol = sx.signed_volumes(vertices, tets)
    if np.any(vol <= 0):
        raise NonConformingMesh(f"{int(np.sum(vol <= 0))} cells have non-positive volume")

    cells = np.sort(tets, axis=1)
    order = np.lexsort(cells.T[::-1])
    cells = cells[order]
    if len(sx.unique_rows(cells)[0]) != len(cells):
        raise NonConformingMesh("duplicate cells")
    cell_sign = np.sign(sx.signed_volumes(vertices, cells)).astype(int)

    edges, einv = sx.unique_rows(cells[:, sx.TET_EDGES].reshape(-1, 2))
    faces, finv = sx.unique_rows(cells[:, sx.TET_FACES].reshape(-1, 3))
    cell_edges = einv.reshape(-1, 6)
    cell_faces = finv.reshape(-1, 4)
    face_count = np.bincount(finv, minlength=len(faces))
    if np.any(face_count > 2):
        raise NonConformingMesh("a face is shared by more than two cells")

    nv, ne, nf, nt = len(vertices), len(edges), len(faces), len(cells)
    r = np.arange(ne)
    D0 = _incidence(np.r_[r, r], np.r_[edges[:, 0], edges[:, 1]], np.r_[-np.ones(ne), np.ones(ne)], (ne, nv))
    fe = [
        sx.lookup_rows(edges, faces[:, [0, 1]]),
        sx.lookup_rows(edges, faces[:, [1, 2]]),
        sx.lookup_rows(edges, faces[:, [0, 2]]),
    ]
    r = np.arange(nf)
    D1 = _incidence(np.tile(r, 3), np.concatenate(fe), np.repeat([1.0, 1.0, -1.0], nf), (nf, ne))
    vals = (cell_sign[:, None] * sx.TET_FACE_SIGNS[None, :]).astype(float)
    D2 = _incidence(np.repeat(np.arange(nt), 4), cell_faces.ravel(), vals.ravel(), (nt, nf))

    if (D1 @ D0).count_nonzero() or (D2 @ D1).count_nonzero():
        # entries are small integers, so floating products are exact
        raise NonConformingMesh("incidence matrices do not form a complex")

    b2 = np.flatnonzero(face_count == 1)
    b1 = np.unique(np.concatenate(fe)[np.tile(face_count == 1, 3)])
    b0 = np.unique(faces[b2].ravel())
    return DeRhamComplex(
        vertices,
        cells,
        edges,
        faces,
        cell_edges,
        cell_faces,
        [D0, D1, D2],
        [b0, b1, b2, np.zeros(0, dtype=np.int64)],
        mesh=mesh,
    )


# ---------------------------------------------------------------------------
# mass matrices


def _local_mass(cx: DeRhamComplex, k: int):
    vol, grads = cx.geometry
    # I[a, b] = integral of lambda_a lambda_b over the cell
    I = vol[:, None, None] * (np.ones((4, 4)) + np.eye(4))[None] / 20.0
    if k == 0:
        return I
    if k == 1:
        Dg = np.einsum("tai,tbi->tab", grads, grads)
        x, y = sx.TET_EDGES[:, 0], sx.TET_EDGES[:, 1]
        X, P = np.meshgrid(x, x, indexing="ij")
        Y, Q = np.meshgrid(y, y, indexing="ij")
        return (
            I[:, X, P] * Dg[:, Y, Q]
            - I[:, X, Q] * Dg[:, Y, P]
            - I[:, Y, P] * Dg[:, X, Q]
            + I[:, Y, Q] * Dg[:, X, P]
        )
    if k == 2:
        # W_f = 2 sum_t lambda_{a_t} X_{f,t} for face (i, j, k):
        # (i, grad j x grad k), (j, grad k x grad i), (k, grad i x grad j)
        F = sx.TET_FACES
        va = F                                        # (4, 3) vertex of each term
        nxt = F[:, [1, 2, 0]]
        nxt2 = F[:, [2, 0, 1]]
        X = np.cross(grads[:, nxt], grads[:, nxt2])   # (T, 4, 3, 3)
        XX = np.einsum("tfsi,tgui->tfsgu", X, X)
        Ia = I[:, va[:, :, None, None], va[None, None, :, :]]   # (T, 4, 3, 4, 3)
        return 4.0 * np.einsum("tfsgu,tfsgu->tfg", Ia, XX)
    return None


def assemble_mass(cx: DeRhamComplex, k: int) -> sp.csr_matrix:
    """Whitney mass matrix of degree ``k`` assembled with exact barycentric integrals."""
    k = _check_degree(k, 3)
    vol = cx.volumes
    if k == 3:
        return as_csr(sp.diags(1.0 / vol))
    local = _local_mass(cx, k)
    dofs = {0: cx.cells, 1: cx.cell_edges, 2: cx.cell_faces}[k]
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    n = cx.counts[k]
    M = as_csr(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))
    return as_csr((M + M.T) * 0.5)


# ---------------------------------------------------------------------------
# cochain operations


def apply_d(cx: DeRhamComplex, cochain) -> Cochain:
    if not isinstance(cochain, Cochain):
        raise TypeError("apply_d expects a Cochain")
    k = cochain.degree
    if k > 2:
        raise DegreeOutOfRange("the differential is defined for degrees 0..2")
    if len(cochain) != cx.counts[k]:
        raise MismatchedComplex(f"{k}-cochain has {len(cochain)} entries, complex has {cx.counts[k]}")
    return Cochain(k + 1, cx.D[k] @ cochain.values)


def restrict_homogeneous(cx: DeRhamComplex, k: int, cochain, drop=True):
    """Interior part of a cochain: drop the boundary entries, or zero them if ``drop`` is False."""
    k = _check_degree(k, 3)
    values = np.asarray(cochain, dtype=float)
    if len(values) != cx.counts[k]:
        raise MismatchedComplex("cochain length does not match the complex")
    if drop:
        return values[cx.interior[k]].copy()
    out = values.copy()
    out[cx.boundary[k]] = 0.0
    return out


def extend_by_zero(cx: DeRhamComplex, k: int, interior_values):
    k = _check_degree(k, 3)
    interior_values = np.asarray(interior_values, dtype=float)
    if len(interior_values) != len(cx.interior[k]):
        raise MismatchedComplex("interior cochain length does not match the complex")
    out = np.zeros(cx.counts[k])
    out[cx.interior[k]] = interior_values
    return out


def interpolate(cx: DeRhamComplex, k: int, field, q: int = 4) -> Cochain:
    """Whitney DOFs of an analytic field.

    ``field`` maps an (N, 3) array of points to (N,) values for k in {0, 3}
    or (N, 3) vectors for k in {1, 2}.
    """
    k = _check_degree(k, 3)
    X = cx.vertices
    if k == 0:
        return Cochain(0, np.asarray(field(X), dtype=float).reshape(-1))
    if k == 1:
        t, w = gauss_interval(q)
        a, b = X[cx.edges[:, 0]], X[cx.edges[:, 1]]
        tangent = b - a
        pts = a[:, None] + t[None, :, None] * tangent[:, None]
        vals = np.asarray(field(pts.reshape(-1, 3)), float).reshape(len(a), len(t), 3)
        return Cochain(1, np.einsum("q,eqi,ei->e", w, vals, tangent))
    if k == 2:
        bary, w = gauss_triangle(q)
        P = X[cx.faces]                                           # (F, 3, 3)
        normal = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])  # 2 * area * unit normal
        pts = np.einsum("qa,fai->fqi", bary, P)
        vals = np.asarray(field(pts.reshape(-1, 3)), float).reshape(len(P), len(w), 3)
        return Cochain(2, np.einsum("q,fqi,fi->f", w, vals, normal))
    bary, w = gauss_tet(q)
    P = X[cx.cells]
    pts = np.einsum("qa,tai->tqi", bary, P)
    vals = np.asarray(field(pts.reshape(-1, 3)), float).reshape(len(P), len(w))
    return Cochain(3, 6.0 * cx.volumes * (vals @ w))


# ---------------------------------------------------------------------------
# Whitney reconstruction


def whitney_eval(cx: DeRhamComplex, k: int, coeffs, cells=None, bary=None):
    """Evaluate the Whitney reconstruction of a cochain inside cells.

    ``bary`` is an (N, 4) array of barycentric coordinates (relative to the
    sorted cell vertices) for the given ``cells``; by default every cell is
    evaluated at its barycenter. Returns (N,) for k in {0, 3}, (N, 3) otherwise.
    """
    k = _check_degree(k, 3)
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) != cx.counts[k]:
        raise MismatchedComplex("cochain length does not match the complex")
    if cells is None:
        cells = np.arange(len(cx.cells))
        bary = np.full((len(cells), 4), 0.25)
    cells = np.asarray(cells)
    bary = np.asarray(bary, dtype=float).reshape(len(cells), 4)
    vol, grads = cx.geometry
    g = grads[cells]
    if k == 0:
        return np.einsum("na,na->n", bary, coeffs[cx.cells[cells]])
    if k == 3:
        return coeffs[cells] / vol[cells]
    if k == 1:
        a, b = sx.TET_EDGES[:, 0], sx.TET_EDGES[:, 1]
        W = bary[:, a, None] * g[:, b] - bary[:, b, None] * g[:, a]      # (N, 6, 3)
        return np.einsum("ne,nei->ni", coeffs[cx.cell_edges[cells]], W)
    F = sx.TET_FACES
    i, j, l = F[:, 0], F[:, 1], F[:, 2]
    W = 2.0 * (
        bary[:, i, None] * np.cross(g[:, j], g[:, l])
        + bary[:, j, None] * np.cross(g[:, l], g[:, i])
        + bary[:, l, None] * np.cross(g[:, i], g[:, j])
    )
    return np.einsum("nf,nfi->ni", coeffs[cx.cell_faces[cells]], W)


def snap_dyadic(values, bits=40):
    """Round to a power-of-two grid ``bits`` below the largest magnitude.

    Sums and differences of a few snapped values are exact in double
    precision, so integer incidence identities hold bit-for-bit afterwards.
    """
    values = np.asarray(values, dtype=float)
    top = np.max(np.abs(values), initial=0.0)
    if top == 0.0 or not np.isfinite(top):
        return values.copy()
    step = 2.0 ** (int(np.ceil(np.log2(top))) - bits)
    return np.round(values / step) * step
