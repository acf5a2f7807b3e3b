"""Tangent harmonic fields as curls of tunnel-fitted vector potentials.

For tunnel i the potential is ``A_i = A^b_i + A^0_i``:

* ``A^b_i`` is a boundary lift supported on boundary edges. It is the
  surface gradient of a potential that jumps by one across the loop
  Gamma_i, so its surface curl vanishes on every boundary face and its
  circulation along the cut boundaries is the crossing matrix row of
  Gamma_i.
* ``A^0_i`` is an interior correction from the gauged curl-curl saddle
  system below, restricted to interior vertices and edges:

      [ M0      G^T Me   0    ] [sigma]   [        0          ]
      [ Me G    C^T M2 C Me P ] [A0   ] = [ -C^T M2 D1 A^b_i  ]
      [ 0       P^T Me   0    ] [p    ]   [        0          ]

  with G = D0, C = D1, Me = M1 and P holding either the normal harmonic
  fields (full variant) or the gradients of the cavity indicators
  (simplified variant). The system matrix does not depend on i, so it is
  factored once and every tunnel is a separate right-hand side.

The field is ``w_i = D1 A_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import simplices as sx
from .derham import DeRhamComplex, extend_by_zero, snap_dyadic
from .errors import ChordViolation, InconsistentBasis, MarkerError, SideAmbiguity, SolverDiverged
from .meshgen import chord_edges
from .solvers import SymmetricFactor, as_csr

VARIANTS = ("full", "simplified")


@dataclass
class BoundaryLift:
    values: np.ndarray          # 1-cochain on all edges
    loop_index: int             # 0-based tunnel index
    side: str                   # side of the loop carrying the jump
    sign: int                   # +1, or -1 when the orientation was corrected


def build_boundary_lift(cx: DeRhamComplex, mesh, i, fans=None) -> BoundaryLift:
    """Combinatorial boundary lift of tunnel loop ``i`` (0-based).

    Every Gamma_i vertex is given a second copy; boundary edges reaching a
    loop vertex from its left side attach to the copy carrying the value 1,
    everything else sees 0. The lift is the edge difference of that cut
    potential, so it vanishes away from the loop's left fringe.
    """
    loop = [int(v) for v in mesh.tunnel_loops[i]]
    if fans is None:
        fans = sx.vertex_fans(mesh.boundary_triangles)
    bedges = {tuple(e) for e in cx.edges[cx.boundary[1]].tolist()}
    chords = chord_edges(bedges, loop)
    if chords:
        raise ChordViolation(f"loop {i + 1} has chord edges {chords[:3]}")
    on_loop = set(loop)
    pairs, vals = [], []
    L = len(loop)
    for k, v in enumerate(loop):
        prev, nxt = loop[k - 1], loop[(k + 1) % L]
        for u in sx.left_neighbours(fans[v], prev, nxt):
            if u in on_loop:
                raise ChordViolation(f"edge ({u}, {v}) joins two loop vertices")
            pairs.append((min(u, v), max(u, v)))
            vals.append(1.0 if v > u else -1.0)
    A = np.zeros(cx.counts[1])
    if pairs:
        idx, _ = cx.edge_indices(pairs)
        A[idx] = vals
    curl = cx.D[1][cx.boundary[2]] @ A
    if np.any(curl != 0):
        raise SideAmbiguity(f"loop {i + 1}: a boundary face sees both sides of the loop")
    chain = mesh.cut_boundaries[i]
    idx, coeff = cx.edge_chain(chain)
    circ = coeff @ A[idx]
    sign = 1
    if circ == -1:
        A, sign = -A, -1
    elif circ != 1:
        raise MarkerError(f"loop {i + 1} crosses its cut boundary {circ:g} times, expected +-1")
    return BoundaryLift(A, i, "left", sign)


def lift_circulations(cx: DeRhamComplex, mesh, lifts):
    """Integer matrix ``C[j, i]`` = circulation of lift i along cut boundary j."""
    m = len(lifts)
    C = np.zeros((len(mesh.cut_boundaries), m))
    for j, chain in enumerate(mesh.cut_boundaries):
        idx, coeff = cx.edge_chain(chain)
        for i, lift in enumerate(lifts):
            C[j, i] = coeff @ lift.values[idx]
    return C


class CorrectionSystem:
    """Assembled and factored saddle system for the interior corrections."""

    def __init__(self, cx: DeRhamComplex, P=None):
        self.cx = cx
        iv, ie = cx.interior[0], cx.interior[1]
        self.iv, self.ie = iv, ie
        M0 = cx.mass(0)[iv][:, iv]
        M1 = cx.mass(1)
        Me = M1[ie][:, ie]
        G = cx.D[0][ie][:, iv]
        self.C = cx.D[1][:, ie]
        self.M2 = cx.mass(2)
        K = self.C.T @ self.M2 @ self.C
        K = as_csr((K + K.T) * 0.5)
        if P is None or P.shape[1] == 0:
            P = np.zeros((cx.counts[1], 0))
        P = np.asarray(P, dtype=float)
        if P.shape[0] != cx.counts[1]:
            raise InconsistentBasis("constraint columns must be full 1-cochains")
        if np.any(P[cx.boundary[1]] != 0):
            raise InconsistentBasis("constraint columns have nonzero boundary-edge entries")
        self.m = P.shape[1]
        Pi = sp.csr_matrix(P[ie])
        MeG = as_csr(Me @ G)
        MeP = as_csr(Me @ Pi)
        blocks = [[M0, MeG.T, None], [MeG, K, MeP if self.m else None]]
        if self.m:
            blocks.append([None, MeP.T, sp.csr_matrix((self.m, self.m))])
        else:
            blocks[0] = blocks[0][:2]
            blocks[1] = blocks[1][:2]
        self.S = as_csr(sp.bmat(blocks, format="csr"))
        self.sizes = (len(iv), len(ie), self.m)
        self.factor = SymmetricFactor(self.S)

    def rhs(self, Ab):
        Ab = np.atleast_2d(np.asarray(Ab, dtype=float).T).T
        B = np.zeros((self.S.shape[0], Ab.shape[1]))
        n0, n1, _ = self.sizes
        B[n0 : n0 + n1] = -(self.C.T @ (self.M2 @ (self.cx.D[1] @ Ab)))
        return B

    def solve(self, Ab, tol=1e-12, max_refine=4):
        B = self.rhs(Ab)
        X = self.factor.solve(B)
        bnorm = np.maximum(np.linalg.norm(B, axis=0), np.finfo(float).tiny)
        res = np.linalg.norm(B - self.S @ X, axis=0) / bnorm
        for _ in range(max_refine):
            if np.all(res <= tol):
                break
            X = X + self.factor.solve(B - self.S @ X)
            res = np.linalg.norm(B - self.S @ X, axis=0) / bnorm
        if np.any(res > tol):
            raise SolverDiverged(f"saddle solve residual {res.max():.2e} above tol {tol:g}")
        n0, n1, m = self.sizes
        return X[:n0], X[n0 : n0 + n1], X[n0 + n1 :], res


@dataclass
class CorrectionSolution:
    sigma: np.ndarray       # interior 0-cochain
    A0: np.ndarray          # interior 1-cochain
    p: np.ndarray           # multipliers of the constraint columns
    residual: float
    sigma_norm: float       # M0 norm
    p_norm: float           # coefficient 2-norm


def _corrections(cx, lifts, P, tol):
    if not lifts:
        return []
    system = CorrectionSystem(cx, P)
    Ab = np.column_stack([l.values for l in lifts])
    sigma, A0, p, res = system.solve(Ab, tol)
    M0 = cx.mass(0)[cx.interior[0]][:, cx.interior[0]]
    out = []
    for i in range(len(lifts)):
        s = sigma[:, i]
        out.append(
            CorrectionSolution(
                s,
                snap_dyadic(A0[:, i]),
                p[:, i],
                float(res[i]),
                float(np.sqrt(abs(s @ (M0 @ s)))),
                float(np.linalg.norm(p[:, i])),
            )
        )
    return out


def solve_correction(cx: DeRhamComplex, lifts, normal_basis=None, tol=1e-12):
    """Corrections with the normal harmonic fields as constraint columns."""
    P = None if normal_basis is None else normal_basis.fields
    return _corrections(cx, list(lifts), P, tol)


def indicator_gradients(cx: DeRhamComplex, indicators):
    return cx.D[0] @ np.asarray(indicators, dtype=float).reshape(cx.counts[0], -1)


def solve_correction_simplified(cx: DeRhamComplex, lifts, indicators=None, tol=1e-12):
    """Corrections constrained against the gradients of the cavity indicators."""
    P = None
    if indicators is not None and np.asarray(indicators).size:
        P = indicator_gradients(cx, indicators)
    return _corrections(cx, list(lifts), P, tol)


@dataclass
class TangentHarmonicBasis:
    variant: str
    lifts: list
    corrections: list
    potentials: np.ndarray      # (E, beta1)
    fields: np.ndarray          # (F, beta1)
    F: np.ndarray               # F[j, i] = flux of w_i through Sigma_j
    extra: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.fields.shape[1]


def flux_matrix(cx: DeRhamComplex, mesh, fields):
    fields = np.asarray(fields, dtype=float).reshape(cx.counts[2], -1)
    F = np.zeros((len(mesh.cut_surfaces), fields.shape[1]))
    for j, surf in enumerate(mesh.cut_surfaces):
        idx, sign = cx.face_chain(surf)
        F[j] = sign @ fields[idx]
    return F


def tangent_harmonic_basis(cx, mesh, normal_basis=None, tol=1e-12, variant="full", lifts=None):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    m = len(mesh.tunnel_loops)
    if lifts is None:
        fans = sx.vertex_fans(mesh.boundary_triangles) if m else None
        lifts = [build_boundary_lift(cx, mesh, i, fans) for i in range(m)]
    if variant == "full":
        corr = solve_correction(cx, lifts, normal_basis, tol)
    else:
        ind = None if normal_basis is None else normal_basis.indicators
        corr = solve_correction_simplified(cx, lifts, ind, tol)
    ne, nf = cx.counts[1], cx.counts[2]
    A = np.zeros((ne, m))
    for i, (lift, c) in enumerate(zip(lifts, corr)):
        A[:, i] = extend_by_zero(cx, 1, c.A0) + lift.values
    w = cx.D[1] @ A if m else np.zeros((nf, 0))
    return TangentHarmonicBasis(variant, lifts, corr, A, w, flux_matrix(cx, mesh, w))


def verify_membership(cx: DeRhamComplex, w, mesh=None) -> dict:
    """Membership checks of a 2-cochain in the discrete tangent harmonic space."""
    w = np.asarray(w, dtype=float)
    M2 = cx.mass(2)
    Mw = M2 @ w
    norm = float(np.sqrt(abs(w @ Mw)))
    pairing = cx.D[1][:, cx.interior[1]].T @ Mw
    out = {
        "div_max": float(np.max(np.abs(cx.D[2] @ w), initial=0.0)),
        "boundary_face_max": float(np.max(np.abs(w[cx.boundary[2]]), initial=0.0)),
        "curl_orthogonality_rel": float(np.max(np.abs(pairing), initial=0.0) / norm) if norm else 0.0,
        "norm": norm,
    }
    if mesh is not None:
        out["fluxes"] = flux_matrix(cx, mesh, w).ravel().tolist()
    return out
