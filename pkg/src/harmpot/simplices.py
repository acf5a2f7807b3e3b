"""Low-level simplex bookkeeping shared by the mesher and the complex builder."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

# local (sorted) tet vertex positions of the 6 edges and 4 faces
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
# face opposite local vertex i carries sign (-1)^i in the boundary of a sorted tet
TET_FACE_SIGNS = np.array([1, -1, 1, -1])


def signed_volumes(vertices, tets):
    v = vertices[tets]
    return np.linalg.det(v[:, 1:] - v[:, :1]) / 6.0


def unique_rows(a):
    """Unique rows of an integer array in lexicographic order, plus inverse map."""
    a = np.ascontiguousarray(a)
    if a.shape[0] == 0:
        return a.reshape(0, a.shape[1]), np.zeros(0, dtype=np.int64)
    uniq, inverse = np.unique(a, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def lookup_rows(table, rows):
    """Indices of ``rows`` inside the lexicographically sorted ``table`` (-1 if absent)."""
    table = np.asarray(table, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, table.shape[1])
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    base = max(int(table.max(initial=0)), int(rows.max(initial=0))) + 1
    def key(r):
        k = np.zeros(r.shape[0], dtype=np.int64)
        for j in range(r.shape[1]):
            k = k * base + r[:, j]
        return k
    tk = key(table)
    rk = key(rows)
    pos = np.searchsorted(tk, rk)
    pos = np.clip(pos, 0, max(len(tk) - 1, 0))
    found = (len(tk) > 0) & (tk[pos] == rk) if len(tk) else np.zeros(len(rk), bool)
    return np.where(found, pos, -1)


def oriented_boundary_faces(vertices, tets):
    """Faces with a single adjacent tet, as triples ordered with outward normal.

    Returns ``(triples, counts_ok)`` where ``counts_ok`` is False if some face
    is shared by more than two tets.
    """
    tets = np.asarray(tets)
    local = tets[:, TET_FACES]                      # (T, 4, 3)
    opposite = tets                                 # vertex opposite face i is tets[:, i]
    faces = np.sort(local.reshape(-1, 3), axis=1)
    uniq, inv = unique_rows(faces)
    counts = np.bincount(inv, minlength=len(uniq))
    ok = bool(np.all(counts <= 2))
    single = counts[inv] == 1
    tri = local.reshape(-1, 3)[single]
    opp = opposite.reshape(-1)[single]
    p = vertices[tri]
    normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    inward = np.einsum("ij,ij->i", normal, vertices[opp] - p[:, 0]) > 0
    tri = tri.copy()
    tri[inward] = tri[inward][:, [0, 2, 1]]
    order = np.lexsort(np.sort(tri, axis=1).T[::-1])
    return tri[order], ok


def face_components(triples):
    """Connected components of a triangle set under edge adjacency."""
    triples = np.asarray(triples)
    parent = list(range(len(triples)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    first = {}
    for f, tri in enumerate(triples):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            g = first.setdefault(key, f)
            ra, rb = find(f), find(g)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups = defaultdict(list)
    for f in range(len(triples)):
        groups[find(f)].append(f)
    return [np.array(g) for g in groups.values()]


def chain_boundary(triples):
    """Net oriented boundary of an oriented triangle chain.

    Returns a dict ``{(a, b): coeff}`` with ``a < b`` holding the nonzero
    integer coefficients after cancellation.
    """
    acc = defaultdict(int)
    for a, b, c in np.asarray(triples).tolist():
        for u, v in ((a, b), (b, c), (c, a)):
            if u < v:
                acc[(u, v)] += 1
            else:
                acc[(v, u)] -= 1
    return {k: c for k, c in sorted(acc.items()) if c}


def cycle_edges(cycle):
    """Oriented edges ``(u, v)`` of a closed vertex cycle."""
    cycle = list(cycle)
    return [(cycle[i], cycle[(i + 1) % len(cycle)]) for i in range(len(cycle))]


def cycle_chain(cycle):
    """A closed vertex cycle as ``{(a, b): coeff}`` with ``a < b``."""
    acc = defaultdict(int)
    for u, v in cycle_edges(cycle):
        if u < v:
            acc[(u, v)] += 1
        else:
            acc[(v, u)] -= 1
    return {k: c for k, c in sorted(acc.items()) if c}


def vertex_fans(boundary_triples):
    """Cyclic neighbour order around every boundary vertex.

    Neighbours are listed counter-clockwise as seen from outside the domain
    (the triples are outward oriented). Raises ``ValueError`` when the star
    of a vertex is not a single disk.
    """
    succ = defaultdict(dict)
    for a, b, c in np.asarray(boundary_triples).tolist():
        for v, x, y in ((a, b, c), (b, c, a), (c, a, b)):
            if x in succ[v]:
                raise ValueError(f"boundary is not a manifold at vertex {v}")
            succ[v][x] = y
    fans = {}
    for v, s in succ.items():
        start = min(s)
        cyc = [start]
        nxt = s[start]
        while nxt != start:
            cyc.append(nxt)
            if nxt not in s or len(cyc) > len(s):
                raise ValueError(f"boundary star of vertex {v} is not a disk")
            nxt = s[nxt]
        if len(cyc) != len(s):
            raise ValueError(f"boundary star of vertex {v} is not a disk")
        fans[v] = cyc
    return fans


def left_neighbours(fan, prev, nxt):
    """Fan neighbours strictly counter-clockwise between ``nxt`` and ``prev``.

    For a curve arriving from ``prev`` and leaving towards ``nxt``, these are
    the neighbours on its left when viewed from outside the domain.
    """
    i_n = fan.index(nxt)
    i_p = fan.index(prev)
    out = []
    i = (i_n + 1) % len(fan)
    while i != i_p:
        out.append(fan[i])
        i = (i + 1) % len(fan)
    return out
