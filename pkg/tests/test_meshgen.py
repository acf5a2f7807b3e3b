import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harmpot import simplices as sx
from harmpot.errors import MarkerError, NonManifold, ResolutionTooSmall
from harmpot.meshgen import (
    EXPECTED_BETTI,
    CanonicalDomainSpec,
    DomainKind,
    crossing_matrix,
    extract_boundary,
    generate_canonical,
    kuhn_mesh,
    validate_markers,
    voxel_mask,
)

from conftest import canonical

DOMAINS = [("box", 4), ("box-with-tunnel", 6), ("box-with-cavity", 4), ("hollow-torus", 8), ("fig1", 10)]


def test_spec_validation():
    with pytest.raises(ResolutionTooSmall):
        CanonicalDomainSpec("box", 3)
    with pytest.raises(ResolutionTooSmall):
        CanonicalDomainSpec("fig1", 7)
    with pytest.raises(ResolutionTooSmall):
        CanonicalDomainSpec("hollow-torus", 7)
    with pytest.raises(ValueError):
        CanonicalDomainSpec("box", 4, cell_size=0.0)
    with pytest.raises(ValueError):
        CanonicalDomainSpec("sphere", 4)
    assert CanonicalDomainSpec("box", 4).kind is DomainKind.BOX


def test_box_counts():
    mesh, _ = canonical("box", 4)
    assert mesh.n_tets == 6 * 64
    assert len(mesh.boundary_components) == 1
    assert mesh.tunnel_loops == () and mesh.cut_surfaces == ()


@pytest.mark.parametrize("kind,n", DOMAINS)
def test_positive_volumes_and_total_volume(kind, n):
    mesh, _ = canonical(kind, n)
    vol = sx.signed_volumes(mesh.vertices, mesh.tets)
    assert np.all(vol > 0)
    solid = voxel_mask(CanonicalDomainSpec(kind, n))
    assert abs(vol.sum() - solid.sum()) <= 1e-12 * solid.sum()


def test_cell_size_scales_geometry():
    a = generate_canonical(CanonicalDomainSpec("box-with-tunnel", 4, cell_size=1.0))
    b = generate_canonical(CanonicalDomainSpec("box-with-tunnel", 4, cell_size=0.25))
    np.testing.assert_array_equal(a.tets, b.tets)
    np.testing.assert_allclose(b.vertices, 0.25 * a.vertices)


def test_kuhn_split_is_conforming():
    solid = np.ones((2, 2, 2), bool)
    _, tets, _ = kuhn_mesh(solid)
    faces = np.sort(tets[:, sx.TET_FACES].reshape(-1, 3), axis=1)
    _, counts = np.unique(faces, axis=0, return_counts=True)
    # 8 voxels: every interior face is shared by exactly two tets
    assert set(counts.tolist()) <= {1, 2}
    assert (counts == 1).sum() == 6 * 4 * 2


@pytest.mark.parametrize("kind,n", DOMAINS)
def test_boundary_component_count(kind, n):
    mesh, _ = canonical(kind, n)
    assert len(mesh.boundary_components) == EXPECTED_BETTI[DomainKind(kind)][2] + 1
    assert len(mesh.tunnel_loops) == len(mesh.cut_surfaces) == EXPECTED_BETTI[DomainKind(kind)][1]


def test_outer_component_first():
    mesh, _ = canonical("box-with-cavity", 6)
    outer = np.unique(mesh.boundary_components[0])
    assert mesh.vertices[outer].min() == 0.0 and mesh.vertices[outer].max() == 6.0


def test_fig1_component_order():
    mesh, _ = canonical("fig1", 10)
    # S_1 is the small cube cavity, S_2 the ring-shaped cavity around the tunnel
    s1 = mesh.vertices[np.unique(mesh.boundary_components[1])]
    s2 = mesh.vertices[np.unique(mesh.boundary_components[2])]
    assert np.ptp(s1, axis=0).tolist() == [2.0, 2.0, 2.0]
    assert np.ptp(s2, axis=0)[0] == 8.0


def test_extract_boundary_errors():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1], [1, 1, 1]], float)
    t = np.array([[0, 1, 2, 3], [0, 2, 1, 4], [0, 1, 2, 5]])
    with pytest.raises(NonManifold):
        extract_boundary(v, t)


def test_boundary_faces_outward():
    mesh, _ = canonical("box-with-cavity", 4)
    tri, comps = extract_boundary(mesh)
    centre = mesh.vertices.mean(axis=0)
    p = mesh.vertices[comps[1]]
    normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    # cavity faces point into the hole, i.e. towards the centre
    assert np.all(np.einsum("ij,ij->i", normal, centre - p.mean(axis=1)) > 0)


@pytest.mark.parametrize("kind,n", DOMAINS + [("hollow-torus", 9), ("fig1", 8)])
def test_generated_markers_validate(kind, n):
    mesh, _ = canonical(kind, n)
    report = validate_markers(mesh)
    assert report.passed, report.summary()
    m = len(mesh.tunnel_loops)
    np.testing.assert_array_equal(report.crossing, np.eye(m, dtype=int))


def test_reversed_loop_fails_validation():
    mesh, _ = canonical("box-with-tunnel", 6)
    bad = mesh.with_markers(tunnel_loops=[mesh.tunnel_loops[0][::-1]])
    report = validate_markers(bad)
    assert report.crossing.tolist() == [[-1]]
    assert not report.passed


@pytest.mark.parametrize("which", [0, 1])
def test_reversal_flips_one_row(which):
    mesh, _ = canonical("hollow-torus", 8)
    loops = list(mesh.tunnel_loops)
    loops[which] = loops[which][::-1]
    C = crossing_matrix(mesh.with_markers(tunnel_loops=loops))
    expected = np.eye(2, dtype=int)
    expected[which] *= -1
    np.testing.assert_array_equal(C, expected)


def test_hollow_torus_cut_surfaces_intersect():
    mesh, _ = canonical("hollow-torus", 8)
    e = []
    for s in mesh.cut_surfaces:
        t = np.sort(s, axis=1)
        e.append({tuple(sorted(p)) for tri in t.tolist() for p in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2]))})
    assert e[0] & e[1]


def unit_square_loop(mesh):
    """Loop around one voxel face on the bottom wall; its face diagonal is a chord."""
    index = {tuple(p): i for i, p in enumerate(mesh.vertices.tolist())}
    return np.array([index[(0.0, 0.0, 0.0)], index[(1.0, 0.0, 0.0)], index[(1.0, 1.0, 0.0)], index[(0.0, 1.0, 0.0)]])


def test_chord_detection():
    mesh, _ = canonical("box-with-tunnel", 6)
    report = validate_markers(mesh.with_markers(tunnel_loops=[unit_square_loop(mesh)]))
    assert report.loops_closed == [True] and report.loops_on_boundary == [True]
    assert report.chord_free == [False]
    assert not report.passed


def test_skipped_vertex_breaks_closedness():
    mesh, _ = canonical("box-with-tunnel", 6)
    report = validate_markers(mesh.with_markers(tunnel_loops=[np.delete(mesh.tunnel_loops[0], 1)]))
    assert not report.loops_closed[0]
    assert not report.passed


def test_open_cut_boundary_detected():
    mesh, _ = canonical("box-with-tunnel", 6)
    surf = mesh.cut_surfaces[0]
    report = validate_markers(mesh.with_markers(cut_surfaces=[surf[1:]]))
    assert not report.passed
    assert not report.cut_boundaries_on_boundary[0]


def _transversal_sign(mesh, loop, chain):
    """Geometric crossing oracle for loops meeting a chain at isolated vertices."""
    X = mesh.vertices
    tri = mesh.boundary_triangles
    cyc = [int(v) for v in loop]
    incoming = {}
    outgoing = {}
    for (a, b), c in chain.items():
        u, v = (a, b) if c > 0 else (b, a)
        outgoing[u] = v
        incoming[v] = u
    total = 0
    for k, v in enumerate(cyc):
        if v not in incoming:
            continue
        t = X[cyc[(k + 1) % len(cyc)]] - X[cyc[k - 1]]
        s = X[outgoing[v]] - X[incoming[v]]
        touching = tri[np.any(tri == v, axis=1)]
        p = X[touching]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]).sum(axis=0)
        total += int(np.sign(n @ np.cross(s, t)))
    return total


@pytest.mark.parametrize("kind,n", [("box-with-tunnel", 6), ("hollow-torus", 8), ("fig1", 10)])
def test_crossing_matches_geometric_oracle(kind, n):
    mesh, _ = canonical(kind, n)
    C = crossing_matrix(mesh)
    for i, loop in enumerate(mesh.tunnel_loops):
        for j, chain in enumerate(mesh.cut_boundaries):
            assert C[i, j] == _transversal_sign(mesh, loop, chain)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["box", "box-with-tunnel", "box-with-cavity"]), st.integers(4, 7))
def test_every_generated_mesh_validates(kind, n):
    mesh = generate_canonical(CanonicalDomainSpec(kind, n))
    assert validate_markers(mesh).passed


def test_generate_refuses_bad_markers(monkeypatch):
    import harmpot.meshgen as mg

    real = mg._canonical_markers

    def broken(*args):
        loops, surfaces = real(*args)
        return loops, [s[2:] for s in surfaces]

    monkeypatch.setattr(mg, "_canonical_markers", broken)
    with pytest.raises(MarkerError):
        generate_canonical(CanonicalDomainSpec("box-with-tunnel", 6))
