"""Voxel-based tetrahedral meshes of canonical non-contractible domains.

Every solid voxel is split into six tetrahedra along its main diagonal
(Kuhn/Freudenthal split). All voxels share the same diagonal direction, so
the split is conforming across voxel faces. Markers (tunnel loops on the
boundary and cut surfaces inside the domain) are emitted directly from the
voxel grid: loops follow grid lines on walls, cut surfaces are planar sets
of grid faces.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from . import simplices as sx
from .errors import MarkerError, NonManifold, ResolutionTooSmall


class DomainKind(str, Enum):
    BOX = "box"
    BOX_WITH_TUNNEL = "box-with-tunnel"
    BOX_WITH_CAVITY = "box-with-cavity"
    HOLLOW_TORUS = "hollow-torus"
    FIG1 = "fig1"


MIN_RESOLUTION = {
    DomainKind.BOX: 4,
    DomainKind.BOX_WITH_TUNNEL: 4,
    DomainKind.BOX_WITH_CAVITY: 4,
    DomainKind.HOLLOW_TORUS: 8,
    DomainKind.FIG1: 8,
}

# (beta_0, beta_1, beta_2, beta_3) of each canonical domain
EXPECTED_BETTI = {
    DomainKind.BOX: (1, 0, 0, 0),
    DomainKind.BOX_WITH_TUNNEL: (1, 1, 0, 0),
    DomainKind.BOX_WITH_CAVITY: (1, 0, 1, 0),
    DomainKind.HOLLOW_TORUS: (1, 2, 1, 0),
    DomainKind.FIG1: (1, 2, 2, 0),
}


@dataclass(frozen=True)
class CanonicalDomainSpec:
    kind: DomainKind
    resolution: int
    cell_size: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ValueError("resolution must be a positive integer")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        need = MIN_RESOLUTION[self.kind]
        if self.resolution < need:
            raise ResolutionTooSmall(
                f"{self.kind.value} needs resolution >= {need}, got {self.resolution}"
            )


def _freeze(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarkedMesh:
    """Tetrahedral mesh plus the topological markers of the domain.

    ``boundary_components`` holds outward-oriented boundary triangles, one
    array per connected component with the outer one first.
    ``tunnel_loops`` are closed vertex cycles on the boundary and
    ``cut_surfaces`` oriented triangle sets (the vertex order of each triple
    gives its orientation).
    """

    vertices: np.ndarray
    tets: np.ndarray
    boundary_components: tuple = ()
    tunnel_loops: tuple = ()
    cut_surfaces: tuple = ()
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _freeze(self.vertices, float).reshape(-1, 3))
        object.__setattr__(self, "tets", _freeze(self.tets, np.int64).reshape(-1, 4))
        object.__setattr__(
            self,
            "boundary_components",
            tuple(_freeze(c, np.int64).reshape(-1, 3) for c in self.boundary_components),
        )
        object.__setattr__(
            self, "tunnel_loops", tuple(_freeze(l, np.int64).reshape(-1) for l in self.tunnel_loops)
        )
        object.__setattr__(
            self,
            "cut_surfaces",
            tuple(_freeze(s, np.int64).reshape(-1, 3) for s in self.cut_surfaces),
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    @cached_property
    def cut_boundaries(self):
        """Net boundaries of the cut surfaces as ``{(a, b): coeff}`` chains."""
        return tuple(sx.chain_boundary(s) for s in self.cut_surfaces)

    @cached_property
    def boundary_triangles(self):
        if not self.boundary_components:
            return np.zeros((0, 3), dtype=np.int64)
        return np.vstack(self.boundary_components)

    def with_markers(self, **changes):
        """Copy of the mesh with some marker fields replaced."""
        fields = dict(
            vertices=self.vertices,
            tets=self.tets,
            boundary_components=self.boundary_components,
            tunnel_loops=self.tunnel_loops,
            cut_surfaces=self.cut_surfaces,
            name=self.name,
            metadata=dict(self.metadata),
        )
        fields.update(changes)
        return MarkedMesh(**fields)


# ---------------------------------------------------------------------------
# voxel geometry


def _channel(n):
    c = n // 2
    return c, (c - 1, c + 1)


def voxel_mask(spec: CanonicalDomainSpec) -> np.ndarray:
    """Boolean ``solid[x, y, z]`` voxel array of a canonical domain."""
    n = spec.resolution
    solid = np.ones((n, n, n), dtype=bool)
    kind = spec.kind
    c, (lo, hi) = _channel(n)
    if kind in (DomainKind.BOX_WITH_TUNNEL, DomainKind.HOLLOW_TORUS, DomainKind.FIG1):
        solid[lo:hi, lo:hi, :] = False
    if kind is DomainKind.BOX_WITH_CAVITY:
        a = max(1, n // 4)
        solid[a : n - a, a : n - a, a : n - a] = False
    if kind in (DomainKind.HOLLOW_TORUS, DomainKind.FIG1):
        za, zb = _torus_z_range(spec)
        ring = np.zeros((n, n), dtype=bool)
        ring[1 : n - 1, 1 : n - 1] = True
        ring[c - 2 : c + 2, c - 2 : c + 2] = False
        solid[:, :, za:zb] &= ~ring[:, :, None]
    if kind is DomainKind.FIG1:
        s = _fig1_cube_size(n)
        solid[1 : 1 + s, 1 : 1 + s, 1 : 1 + s] = False
    return solid


def _fig1_cube_size(n):
    return min(2, n // 2 - 3)


def _torus_z_range(spec):
    n = spec.resolution
    if spec.kind is DomainKind.HOLLOW_TORUS:
        return 1, n - 1
    s = _fig1_cube_size(n)
    return 2 + s, n - 1


def kuhn_mesh(solid: np.ndarray, cell_size: float = 1.0):
    """Split every solid voxel into 6 positively oriented tetrahedra.

    Returns ``(vertices, tets, grid)`` where ``grid`` holds the integer grid
    coordinates of every vertex. Vertices are sorted by their linear grid
    index (x fastest, z slowest).
    """
    nx, ny, nz = solid.shape
    vox = np.argwhere(solid)                                   # (V, 3) as x, y, z
    corners = []
    signs = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=np.int64)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] += 1
            path.append(step)
        path = np.array(path)
        vol = np.linalg.det((path[1:] - path[0]).astype(float))
        if vol < 0:
            path = path[[0, 1, 3, 2]]
        corners.append(path)
    corners = np.array(corners)                                # (6, 4, 3)
    pts = vox[:, None, None, :] + corners[None]                # (V, 6, 4, 3)
    stride = np.array([1, nx + 1, (nx + 1) * (ny + 1)])
    lin = (pts * stride).sum(-1).reshape(-1, 4)
    used, tets = np.unique(lin, return_inverse=True)
    tets = tets.reshape(-1, 4)
    grid = np.stack(
        [used % (nx + 1), (used // (nx + 1)) % (ny + 1), used // ((nx + 1) * (ny + 1))], axis=1
    )
    vertices = grid.astype(float) * cell_size
    return vertices, tets, grid


# ---------------------------------------------------------------------------
# boundary


def extract_boundary(mesh_or_vertices, tets=None):
    """Outward boundary triangles and their connected components.

    Returns ``(triangles, components)``; ``components[0]`` is the outer
    surface (largest axis-aligned bounding box), the remaining ones are
    ordered by smallest vertex index.
    """
    if tets is None:
        vertices, tets = mesh_or_vertices.vertices, mesh_or_vertices.tets
    else:
        vertices = mesh_or_vertices
    vertices = np.asarray(vertices, dtype=float)
    tri, ok = sx.oriented_boundary_faces(vertices, np.asarray(tets))
    if not ok:
        raise NonManifold("a face is shared by more than two tetrahedra")
    groups = sx.face_components(tri)

    def bbox_size(g):
        p = vertices[np.unique(tri[g])]
        ext = p.max(0) - p.min(0)
        return (float(np.prod(ext)), float(np.linalg.norm(ext)))

    outer = max(range(len(groups)), key=lambda i: bbox_size(groups[i]))
    rest = sorted((i for i in range(len(groups)) if i != outer), key=lambda i: tri[groups[i]].min())
    components = [tri[np.sort(groups[i])] for i in [outer] + rest]
    return tri, components


# ---------------------------------------------------------------------------
# markers


class _Grid:
    def __init__(self, grid, solid_shape):
        self.nx, self.ny, _ = solid_shape
        self.stride = np.array([1, self.nx + 1, (self.nx + 1) * (self.ny + 1)])
        lin = grid @ self.stride
        self.index = {int(k): i for i, k in enumerate(lin)}

    def vertex(self, p):
        return self.index[int(np.dot(p, self.stride))]

    def loop(self, corners):
        """Vertex cycle following grid lines through the given corner points."""
        out = []
        corners = [np.array(c) for c in corners]
        for a, b in zip(corners, corners[1:] + corners[:1]):
            d = b - a
            steps = int(np.abs(d).sum())
            unit = np.sign(d)
            for t in range(steps):
                out.append(self.vertex(a + t * unit))
        return np.array(out)


def _plane_faces(vertices, tets, grid, axis, value, keep):
    """Interior faces lying in the grid plane ``grid[:, axis] == value``.

    ``keep(centroid)`` filters on grid-space centroids. Faces are oriented
    with normal along ``+axis``.
    """
    local = np.sort(tets[:, sx.TET_FACES].reshape(-1, 3), axis=1)
    faces, inv = sx.unique_rows(local)
    counts = np.bincount(inv, minlength=len(faces))
    faces = faces[counts == 2]
    g = grid[faces]
    on = np.all(g[:, :, axis] == value, axis=1)
    faces, g = faces[on], g[on]
    cen = g.mean(axis=1)
    sel = np.array([keep(p) for p in cen], dtype=bool) if len(cen) else np.zeros(0, bool)
    faces, g = faces[sel], g[sel].astype(float)
    normal = np.cross(g[:, 1] - g[:, 0], g[:, 2] - g[:, 0])
    flip = normal[:, axis] < 0
    faces = faces.copy()
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def _canonical_markers(spec, vertices, tets, grid, shape):
    n = spec.resolution
    c, (lo, hi) = _channel(n)
    G = _Grid(grid, shape)
    kind = spec.kind
    loops, surfaces = [], []

    def channel_loop(z0):
        return G.loop([(lo, lo, z0), (hi, lo, z0), (hi, hi, z0), (lo, hi, z0)])

    def meridian_slab():
        # half plane y = c from the channel wall to the outer wall
        return _plane_faces(vertices, tets, grid, 1, c, lambda p: p[0] > hi)

    def outer_annulus(zc):
        return _plane_faces(
            vertices, tets, grid, 2, zc,
            lambda p: p[0] < 1 or p[0] > n - 1 or p[1] < 1 or p[1] > n - 1,
        )

    if kind is DomainKind.BOX_WITH_TUNNEL:
        loops = [channel_loop(n // 2)]
        surfaces = [meridian_slab()]
    elif kind is DomainKind.HOLLOW_TORUS:
        toroidal = G.loop([(0, 0, 1), (n, 0, 1), (n, n, 1), (0, n, 1)])
        poloidal = G.loop([(c, hi, 0), (c, n, 0), (c, n, n), (c, hi, n)])
        loops = [toroidal, poloidal]
        surfaces = [meridian_slab(), outer_annulus(c)]
    elif kind is DomainKind.FIG1:
        za, zb = _torus_z_range(spec)
        around_channel = channel_loop(c)
        cavity_meridian = G.loop([(c, c + 2, za), (c, n - 1, za), (c, n - 1, zb), (c, c + 2, zb)])
        loops = [around_channel, cavity_meridian]
        surfaces = [meridian_slab(), outer_annulus(za + 1)]
    return loops, surfaces


def generate_canonical(spec: CanonicalDomainSpec) -> MarkedMesh:
    """Mesh a canonical domain and attach validated markers."""
    solid = voxel_mask(spec)
    vertices, tets, grid = kuhn_mesh(solid, spec.cell_size)
    _, components = extract_boundary(vertices, tets)
    loops, surfaces = _canonical_markers(spec, vertices, tets, grid, solid.shape)
    mesh = MarkedMesh(
        vertices=vertices,
        tets=tets,
        boundary_components=components,
        tunnel_loops=loops,
        cut_surfaces=surfaces,
        name=f"{spec.kind.value}-{spec.resolution}",
        metadata={"kind": spec.kind.value, "resolution": spec.resolution, "cell_size": spec.cell_size},
    )
    if loops:
        # orient each loop so that its crossing with its own cut boundary is +1
        cross = crossing_matrix(mesh)
        fixed = [l if cross[i, i] >= 0 else l[::-1].copy() for i, l in enumerate(loops)]
        mesh = mesh.with_markers(tunnel_loops=fixed)
    report = validate_markers(mesh)
    if not report.passed:
        raise MarkerError("generated markers failed validation: " + "; ".join(report.messages))
    return mesh


# ---------------------------------------------------------------------------
# marker validation


def _boundary_edge_set(triangles):
    out = set()
    for a, b, c in np.asarray(triangles).tolist():
        out.update({(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(a, c), max(a, c))})
    return out


def loop_crossing(fans, cycle, chain):
    """Signed crossing number of a boundary loop with a boundary edge chain.

    At each loop vertex the chain edges lying strictly on the loop's left
    (viewed from outside) are counted, +coeff when entering the vertex and
    -coeff when leaving it. Chain edges running along the loop count as
    lying on its right, which amounts to pushing overlapping stretches off
    to the right; the sum is the algebraic intersection number.
    """
    cycle = [int(v) for v in cycle]
    total = 0
    L = len(cycle)
    for k, v in enumerate(cycle):
        prev, nxt = cycle[k - 1], cycle[(k + 1) % L]
        for u in sx.left_neighbours(fans[v], prev, nxt):
            key = (min(u, v), max(u, v))
            coeff = chain.get(key, 0)
            if coeff:
                into_v = key[1] == v
                total += coeff if into_v else -coeff
    return total


def crossing_matrix(mesh: MarkedMesh) -> np.ndarray:
    """``C[i, j]`` = signed crossings of tunnel loop i with cut boundary j."""
    fans = sx.vertex_fans(mesh.boundary_triangles)
    m = len(mesh.tunnel_loops)
    C = np.zeros((m, len(mesh.cut_surfaces)), dtype=np.int64)
    for i, loop in enumerate(mesh.tunnel_loops):
        for j, chain in enumerate(mesh.cut_boundaries):
            C[i, j] = loop_crossing(fans, loop, chain)
    return C


@dataclass
class MarkerReport:
    loops_closed: list
    loops_on_boundary: list
    loops_simple: list
    cut_surfaces_interior: list
    cut_boundaries_closed: list
    cut_boundaries_on_boundary: list
    chord_free: list
    crossing: np.ndarray
    messages: list

    @property
    def passed(self):
        m = len(self.loops_closed)
        checks = (
            self.loops_closed + self.loops_on_boundary + self.loops_simple
            + self.cut_surfaces_interior + self.cut_boundaries_closed
            + self.cut_boundaries_on_boundary + self.chord_free
        )
        identity = self.crossing.shape == (m, m) and np.array_equal(self.crossing, np.eye(m, dtype=int))
        return all(checks) and identity and not self.messages

    def summary(self):
        return {
            "loops_closed": self.loops_closed,
            "loops_on_boundary": self.loops_on_boundary,
            "loops_simple": self.loops_simple,
            "cut_surfaces_interior": self.cut_surfaces_interior,
            "cut_boundaries_closed": self.cut_boundaries_closed,
            "cut_boundaries_on_boundary": self.cut_boundaries_on_boundary,
            "chord_free": self.chord_free,
            "crossing": self.crossing.tolist(),
            "passed": self.passed,
        }


def chord_edges(boundary_edges, cycle):
    """Boundary edges joining two loop vertices without belonging to the loop."""
    on = set(int(v) for v in cycle)
    loop_edges = {(min(u, v), max(u, v)) for u, v in sx.cycle_edges([int(v) for v in cycle])}
    return sorted(e for e in boundary_edges if e[0] in on and e[1] in on and e not in loop_edges)


def validate_markers(mesh: MarkedMesh) -> MarkerReport:
    """Check the marker set; failures are reported, never raised."""
    messages = []
    bedges = _boundary_edge_set(mesh.boundary_triangles)
    all_edges = set()
    local = np.sort(mesh.tets[:, sx.TET_EDGES].reshape(-1, 2), axis=1)
    all_edges.update(map(tuple, np.unique(local, axis=0).tolist()))
    faces, inv = sx.unique_rows(np.sort(mesh.tets[:, sx.TET_FACES].reshape(-1, 3), axis=1))
    counts = np.bincount(inv, minlength=len(faces))
    interior_faces = set(map(tuple, faces[counts == 2].tolist()))

    loops_closed, loops_on, loops_simple, chord_free = [], [], [], []
    for loop in mesh.tunnel_loops:
        cyc = [int(v) for v in loop]
        keys = [(min(u, v), max(u, v)) for u, v in sx.cycle_edges(cyc)]
        loops_closed.append(len(cyc) >= 3 and all(k in all_edges for k in keys))
        loops_on.append(all(k in bedges for k in keys))
        loops_simple.append(len(set(cyc)) == len(cyc))
        chord_free.append(not chord_edges(bedges, cyc))

    interior, closed, on = [], [], []
    for surf, chain in zip(mesh.cut_surfaces, mesh.cut_boundaries):
        interior.append(all(tuple(sorted(t)) in interior_faces for t in surf.tolist()))
        balance = {}
        for (a, b), coeff in chain.items():
            balance[a] = balance.get(a, 0) - coeff
            balance[b] = balance.get(b, 0) + coeff
        closed.append(all(v == 0 for v in balance.values()) and len(chain) > 0)
        on.append(all(k in bedges for k in chain))

    m = len(mesh.tunnel_loops)
    crossing = np.zeros((m, len(mesh.cut_surfaces)), dtype=np.int64)
    if len(mesh.cut_surfaces) != m:
        messages.append(f"{m} tunnel loops but {len(mesh.cut_surfaces)} cut surfaces")
    if m and all(loops_on) and all(loops_simple):
        try:
            crossing = crossing_matrix(mesh)
        except ValueError as exc:
            messages.append(str(exc))
    return MarkerReport(
        loops_closed, loops_on, loops_simple, interior, closed, on, chord_free, crossing, messages
    )
