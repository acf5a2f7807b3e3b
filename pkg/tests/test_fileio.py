import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from harmpot.derham import Cochain, permutation_sign, whitney_eval
from harmpot.errors import FormatVersionMismatch, MismatchedComplex, ParseError
from harmpot.fileio import (
    format_mesh,
    format_report,
    load_cochain,
    load_mesh,
    parse_mesh,
    parse_report,
    read_vtk,
    save_cochain,
    save_mesh,
    write_vtk,
)
from harmpot.harmonic_tangent import tangent_harmonic_basis
from harmpot.meshgen import crossing_matrix, validate_markers

from conftest import canonical, normal_basis


def assert_same_mesh(a, b):
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.tets, b.tets)
    assert len(a.boundary_components) == len(b.boundary_components)
    for x, y in zip(a.boundary_components, b.boundary_components):
        np.testing.assert_array_equal(x, y)
    for x, y in zip(a.tunnel_loops, b.tunnel_loops):
        np.testing.assert_array_equal(x, y)
    for x, y in zip(a.cut_surfaces, b.cut_surfaces):
        np.testing.assert_array_equal(np.sort(x, axis=1), np.sort(y, axis=1))
        np.testing.assert_array_equal(permutation_sign(x), permutation_sign(y))
    assert a.cut_boundaries == b.cut_boundaries
    assert a.name == b.name and a.metadata == b.metadata


def test_box_roundtrip(tmp_path):
    mesh, _ = canonical("box", 4)
    save_mesh(mesh, tmp_path / "box.mesh")
    assert_same_mesh(mesh, load_mesh(tmp_path / "box.mesh"))


def test_fig1_roundtrip_keeps_markers(tmp_path):
    mesh, _ = canonical("fig1", 10)
    save_mesh(mesh, tmp_path / "fig1.mesh")
    back = load_mesh(tmp_path / "fig1.mesh")
    assert_same_mesh(mesh, back)
    assert validate_markers(back).passed
    np.testing.assert_array_equal(crossing_matrix(back), crossing_matrix(mesh))


@settings(max_examples=20, deadline=None)
@given(arrays(float, (125, 3), elements=st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=True)))
def test_coordinates_roundtrip_bit_exact(coords):
    mesh, _ = canonical("box", 4)
    moved = mesh.with_markers(vertices=coords)
    back = parse_mesh(format_mesh(moved))
    assert np.array_equal(back.vertices, coords)


def test_truncated_file(tmp_path):
    mesh, _ = canonical("box-with-tunnel", 4)
    text = format_mesh(mesh)
    with pytest.raises(ParseError) as info:
        parse_mesh(text[: len(text) // 2])
    assert info.value.line is not None


def test_bad_token_position():
    mesh, _ = canonical("box", 4)
    lines = format_mesh(mesh).splitlines()
    lines[3] = "0.0 zero 1.0"
    with pytest.raises(ParseError) as info:
        parse_mesh("\n".join(lines))
    assert (info.value.line, info.value.column) == (4, 5)


def test_version_mismatch():
    mesh, _ = canonical("box", 4)
    text = format_mesh(mesh).replace("harmpot-mesh 1", "harmpot-mesh 2", 1)
    with pytest.raises(FormatVersionMismatch):
        parse_mesh(text)


def test_cochain_text_roundtrip(tmp_path):
    v = np.array([0.1, -1e-300, 3.0, np.pi])
    save_cochain(v, tmp_path / "c.txt")
    assert np.array_equal(load_cochain(tmp_path / "c.txt"), v)


def test_report_roundtrip():
    data = {"betti": [1, 2, 2, 0], "G": [[1.0, 1e-13], [0.0, 1.0]], "passed": True, "name": "x"}
    text = format_report(data)
    assert parse_report(text) == data
    assert "betti: [1, 2, 2, 0]" in text


def test_vtk_constant_scalar(tmp_path):
    _, cx = canonical("box", 4)
    write_vtk(cx, {"one": Cochain(0, np.ones(cx.counts[0]))}, tmp_path / "a.vtk")
    data = read_vtk(tmp_path / "a.vtk")
    assert np.array_equal(data["point_data"]["one"], np.ones(cx.counts[0]))
    assert data["cells"].shape == (cx.counts[3], 4)
    text = (tmp_path / "a.vtk").read_text()
    assert text.startswith("# vtk DataFile Version 2.0")


def test_vtk_cells_positive(tmp_path):
    _, cx = canonical("box-with-tunnel", 4)
    write_vtk(cx, {}, tmp_path / "m.vtk")
    data = read_vtk(tmp_path / "m.vtk")
    P = data["points"][data["cells"]]
    assert np.all(np.linalg.det(P[:, 1:] - P[:, :1]) > 0)


def test_vtk_rejects_foreign_cochain(tmp_path):
    _, cx = canonical("box", 4)
    with pytest.raises(MismatchedComplex):
        write_vtk(cx, {"bad": Cochain(1, np.ones(3))}, tmp_path / "x.vtk")


def test_vtk_tangent_field_roundtrip(tmp_path):
    mesh, cx = canonical("box-with-tunnel", 6)
    tb = tangent_harmonic_basis(cx, mesh, None)
    w = tb.fields[:, 0]
    write_vtk(cx, {"w": Cochain(2, w), "div": Cochain(3, cx.D[2] @ w)}, tmp_path / "w.vtk")
    data = read_vtk(tmp_path / "w.vtk")
    np.testing.assert_allclose(data["cell_data"]["w"], whitney_eval(cx, 2, w), rtol=0, atol=1e-12)
    assert not np.any(data["cell_data"]["div"])
    # the field circulates around the channel axis: its angular component
    # has one sign everywhere it is appreciable
    X = cx.vertices[cx.cells].mean(axis=1) - np.array([3.0, 3.0, 0.0])
    ang = X[:, 0] * data["cell_data"]["w"][:, 1] - X[:, 1] * data["cell_data"]["w"][:, 0]
    big = np.abs(ang) > 1e-3 * np.abs(ang).max()
    assert np.all(ang[big] > 0) or np.all(ang[big] < 0)


def test_vtk_normal_field_orientation(tmp_path):
    mesh, cx = canonical("box-with-cavity", 6)
    nb = normal_basis("box-with-cavity", 6)
    write_vtk(cx, {"v": Cochain(1, nb.fields[:, 0])}, tmp_path / "v.vtk")
    vecs = read_vtk(tmp_path / "v.vtk")["cell_data"]["v"]
    # recompute the pairing <grad psi, v> from the exported cell vectors
    grad_psi = whitney_eval(cx, 1, cx.D[0] @ nb.indicators[:, 0])
    pairing = np.sum(np.einsum("ti,ti->t", grad_psi, vecs) * cx.volumes)
    assert pairing > 0
