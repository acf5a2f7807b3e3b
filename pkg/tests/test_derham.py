import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from harmpot.derham import (
    Cochain,
    apply_d,
    assemble_mass,
    build_complex,
    extend_by_zero,
    interpolate,
    permutation_sign,
    restrict_homogeneous,
    snap_dyadic,
    whitney_eval,
)
from harmpot.errors import DegreeOutOfRange, MismatchedComplex, NonConformingMesh, UnknownEdge, UnknownFace
from harmpot.meshgen import extract_boundary
from harmpot.quadrature import gauss_tet, gauss_triangle

from conftest import canonical

UNIT_TET = (np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]), np.array([[0, 1, 2, 3]]))


@pytest.fixture(scope="module")
def tet():
    return build_complex(*UNIT_TET)


def test_single_tet_tables(tet):
    assert tet.counts == (4, 6, 4, 1)
    assert tet.edges.tolist() == [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
    assert tet.D[0].toarray()[0].tolist() == [-1, 1, 0, 0]
    assert not np.any((tet.D[1] @ tet.D[0]).toarray())
    assert not np.any((tet.D[2] @ tet.D[1]).toarray())


def test_single_tet_curl_of_one_edge(tet):
    a = np.zeros(6)
    a[0] = 1.0                      # edge (0, 1)
    out = apply_d(tet, Cochain(1, a)).values
    # (0,1) bounds faces (0,1,2) and (0,1,3), both with sign +1
    faces = [tuple(f) for f in tet.faces.tolist()]
    expected = np.zeros(4)
    expected[faces.index((0, 1, 2))] = 1
    expected[faces.index((0, 1, 3))] = 1
    np.testing.assert_array_equal(out, expected)


def test_reference_tet_masses(tet):
    vol = 1 / 6
    M0 = assemble_mass(tet, 0).toarray()
    np.testing.assert_allclose(np.diag(M0), vol / 10, rtol=1e-14)
    np.testing.assert_allclose(M0[~np.eye(4, dtype=bool)], vol / 20, rtol=1e-14)
    # the 3-form DOF is the cell integral, so the mass entry is 1/|T|
    np.testing.assert_allclose(assemble_mass(tet, 3).toarray(), [[6.0]])


def test_negatively_listed_tet_is_rejected():
    v, t = UNIT_TET
    with pytest.raises(NonConformingMesh):
        build_complex(v, t[:, [0, 2, 1, 3]])


def test_overshared_face_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1], [1, 1, 1]], float)
    t = np.array([[0, 1, 2, 3], [0, 2, 1, 4], [0, 1, 2, 5]])
    with pytest.raises(NonConformingMesh):
        build_complex(v, t)


@pytest.mark.parametrize("kind,n", [("box", 4), ("box-with-tunnel", 4), ("fig1", 8)])
def test_complex_structure(kind, n):
    _, cx = canonical(kind, n)
    for k, width in zip(range(3), (2, 3, 4)):
        D = cx.D[k]
        assert set(np.unique(D.data).tolist()) <= {-1.0, 1.0}
        assert np.all(np.diff(D.indptr) == width)
    assert (cx.D[1] @ cx.D[0]).count_nonzero() == 0
    assert (cx.D[2] @ cx.D[1]).count_nonzero() == 0


def test_box_boundary_counts():
    mesh, cx = canonical("box", 4)
    assert len(cx.interior[1]) == cx.counts[1] - len(cx.boundary[1])
    tri, _ = extract_boundary(mesh)
    assert len(cx.boundary[2]) == len(tri)


def _quadrature_mass(cx, k, q=3):
    bary, w = gauss_tet(q)
    n = cx.counts[k]
    dofs = {0: cx.cells, 1: cx.cell_edges, 2: cx.cell_faces}[k]
    M = np.zeros((n, n))
    for t in range(len(cx.cells)):
        local = []
        for d in dofs[t]:
            e = np.zeros(n)
            e[d] = 1
            local.append(np.asarray(whitney_eval(cx, k, e, np.full(len(w), t), bary)).reshape(len(w), -1))
        local = np.array(local)
        M[np.ix_(dofs[t], dofs[t])] += 6 * cx.volumes[t] * np.einsum("q,aqi,bqi->ab", w, local, local)
    return M


@pytest.mark.parametrize("k", [0, 1, 2])
def test_mass_matches_quadrature_oracle(k):
    _, cx = canonical("box-with-tunnel", 4)
    M = cx.mass(k).toarray()
    np.testing.assert_allclose(M, _quadrature_mass(cx, k), atol=1e-14 * np.abs(M).max())
    assert np.array_equal(M, M.T)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_mass_positive_definite(k):
    _, cx = canonical("box-with-cavity", 4)
    M = cx.mass(k).toarray()
    assert np.linalg.eigvalsh(M).min() > 0
    rng = np.random.default_rng(k)
    X = rng.standard_normal((M.shape[0], 100))
    assert np.all(np.einsum("ij,ij->j", X, M @ X) > 0)


def test_volume_from_mass():
    _, cx = canonical("fig1", 8)
    one = np.ones(cx.counts[0])
    vol = one @ cx.mass(0) @ one
    assert abs(vol - cx.volumes.sum()) <= 1e-12 * vol


def test_whitney_dofs_are_unit(tet):
    # the Whitney 1- and 2-forms reproduce unit DOFs: interpolating the
    # reconstruction of a basis cochain returns that cochain
    for k, q in ((1, 3), (2, 3)):
        for d in range(tet.counts[k]):
            e = np.zeros(tet.counts[k])
            e[d] = 1

            def field(X):
                lam = np.c_[1 - X.sum(1), X]
                return whitney_eval(tet, k, e, np.zeros(len(X), int), lam)

            np.testing.assert_allclose(interpolate(tet, k, field, q).values, e, atol=1e-14)


def test_apply_d_errors(tet):
    with pytest.raises(DegreeOutOfRange):
        apply_d(tet, Cochain(3, np.ones(1)))
    with pytest.raises(MismatchedComplex):
        apply_d(tet, Cochain(1, np.ones(5)))
    with pytest.raises(DegreeOutOfRange):
        Cochain(4, np.ones(1))
    with pytest.raises(DegreeOutOfRange):
        tet.mass(4)


def test_gradient_of_constant(tet):
    assert not np.any(apply_d(tet, Cochain(0, np.ones(4))).values)


def test_interpolate_examples(tet):
    np.testing.assert_array_equal(interpolate(tet, 0, lambda X: np.ones(len(X))).values, np.ones(4))
    lin = lambda X: X[:, 0] + 2 * X[:, 1] + 3 * X[:, 2]
    grad = lambda X: np.tile([1.0, 2.0, 3.0], (len(X), 1))
    np.testing.assert_allclose(
        interpolate(tet, 1, grad, q=1).values, apply_d(tet, interpolate(tet, 0, lin)).values, atol=1e-15
    )
    flux = interpolate(tet, 2, lambda X: np.tile([1.0, 0, 0], (len(X), 1))).values
    X = tet.vertices[tet.faces]
    n = np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]) / 2   # area-weighted normal
    np.testing.assert_allclose(flux, n[:, 0], atol=1e-15)


# cubic polynomial fields with closed-form derivatives


def f0(X):
    x, y, z = X.T
    return x**3 - 2 * x * y * z + y * z**2 + 1


def grad_f0(X):
    x, y, z = X.T
    return np.c_[3 * x**2 - 2 * y * z, -2 * x * z + z**2, -2 * x * y + 2 * y * z]


def u1(X):
    x, y, z = X.T
    return np.c_[y**2 * z, x**3 - z, x * y * z + y**2]


def curl_u1(X):
    x, y, z = X.T
    return np.c_[x * z + 2 * y - (-1), y**2 - y * z, 3 * x**2 - 2 * y * z]


def div_u1(X):
    x, y, z = X.T
    return x * y


@pytest.mark.parametrize("kind,n", [("box", 4), ("box-with-tunnel", 4)])
def test_commuting_diagram(kind, n):
    _, cx = canonical(kind, n)
    pairs = [(0, f0, grad_f0), (1, u1, curl_u1), (2, u1, div_u1)]
    for k, u, du in pairs:
        lhs = interpolate(cx, k + 1, du, q=4).values
        rhs = cx.D[k] @ interpolate(cx, k, u, q=4).values
        assert np.abs(lhs - rhs).max() <= 1e-12


def test_boundary_preservation():
    _, cx = canonical("box", 4)
    L = 4.0
    bump = lambda X: X[:, 0] * (L - X[:, 0]) * X[:, 1] * (L - X[:, 1]) * X[:, 2] * (L - X[:, 2])
    assert np.abs(interpolate(cx, 0, bump).values[cx.boundary[0]]).max() == 0
    vec = lambda X: bump(X)[:, None] * np.array([1.0, -2.0, 0.5])
    assert np.abs(interpolate(cx, 1, vec).values[cx.boundary[1]]).max() <= 1e-12
    assert np.abs(interpolate(cx, 2, vec).values[cx.boundary[2]]).max() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_restrict_extend_roundtrip(data):
    _, cx = canonical("box-with-tunnel", 4)
    k = data.draw(st.integers(0, 2))
    inner = data.draw(arrays(float, len(cx.interior[k]), elements=st.floats(-1e6, 1e6)))
    full = extend_by_zero(cx, k, inner)
    np.testing.assert_array_equal(restrict_homogeneous(cx, k, full), inner)
    assert not np.any(full[cx.boundary[k]])


def test_restrict_ones_zeroes_boundary():
    _, cx = canonical("box", 4)
    out = restrict_homogeneous(cx, 1, np.ones(cx.counts[1]), drop=False)
    assert np.all(out[cx.boundary[1]] == 0) and np.all(out[cx.interior[1]] == 1)


@settings(max_examples=25, deadline=None)
@given(arrays(np.int64, 125, elements=st.integers(-1000, 1000)))
def test_dd_is_zero_on_integer_cochains(u):
    _, cx = canonical("box", 4)
    a = cx.D[0] @ u.astype(float)
    assert not np.any(cx.D[1] @ a)


def test_lookup_errors():
    _, cx = canonical("box", 4)
    with pytest.raises(UnknownEdge):
        cx.edge_indices([[0, 124]])
    with pytest.raises(UnknownFace):
        cx.face_indices([[0, 1, 124]])
    idx, sign = cx.edge_indices([[1, 0]])
    assert sign.tolist() == [-1] and cx.edges[idx[0]].tolist() == [0, 1]


@given(st.permutations([3, 7, 11]))
def test_permutation_sign(p):
    expected = {(3, 7, 11): 1, (7, 11, 3): 1, (11, 3, 7): 1}.get(tuple(p), -1)
    assert permutation_sign(np.array([p]))[0] == expected


@settings(max_examples=50)
@given(arrays(float, 12, elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
def test_snap_dyadic_sums_exact(v):
    s = snap_dyadic(v)
    assert np.all(np.abs(s - v) <= 2.0**-39 * max(np.abs(v).max(), 1e-300))
    # any three-term signed sum reproduces exactly after a round trip
    a, b, c = s[:3]
    assert (a + b) - c == a + (b - c)


def test_quadrature_weights():
    assert abs(gauss_triangle(4)[1].sum() - 0.5) < 1e-15
    assert abs(gauss_tet(4)[1].sum() - 1 / 6) < 1e-15
