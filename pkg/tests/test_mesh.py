import numpy as np
import pytest
from scipy.spatial import Delaunay

from adjeuler.mesh import (BoundaryTag, MeshError, MeshParseError, build_dual, body_vertices,
                           generate_wedge_channel, locate_points, read_mesh, rectangle_mesh,
                           write_mesh)


def delaunay_square(n=200, seed=0):
    rng = np.random.default_rng(seed)
    side = np.linspace(0, 1, 9)[:-1]
    frame = np.concatenate([np.c_[side, 0 * side], np.c_[1 + 0 * side, side],
                            np.c_[1 - side, 1 + 0 * side], np.c_[0 * side, 1 - side]])
    X = np.vstack([frame, rng.uniform(0.05, 0.95, (n, 2))])
    T = Delaunay(X).simplices.copy()
    a, b, c = X[T[:, 0]], X[T[:, 1]], X[T[:, 2]]
    cw = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0] < 0
    T[cw] = T[cw][:, [0, 2, 1]]
    k = len(frame)
    be = [(i, (i + 1) % k, "slip_wall") for i in range(k)]
    return build_dual(X, T, be)


def test_equilateral_triangle_volumes():
    X = np.array([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    m = build_dual(X, [[0, 1, 2]], [(0, 1, 1), (1, 2, 1), (2, 0, 1)])
    np.testing.assert_allclose(m.cell_volumes, np.sqrt(3) / 12, rtol=1e-14)
    assert m.cell_volumes.sum() == pytest.approx(np.sqrt(3) / 4, rel=1e-14)


def test_two_triangle_square():
    m = rectangle_mesh(1, 1)
    assert m.cell_volumes.sum() == pytest.approx(1.0, rel=1e-14)
    assert np.abs(m.closed_cell_residual()).max() < 1e-15


def test_random_delaunay_invariants():
    m = delaunay_square()
    assert np.all(m.cell_volumes > 0)
    assert m.cell_volumes.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.abs(m.closed_cell_residual()).max() < 1e-12
    # every triangle contributes area/3 to each of its vertices
    vol = np.zeros(m.n_vertices)
    for k in range(3):
        np.add.at(vol, m.triangles[:, k], m.areas / 3)
    np.testing.assert_allclose(vol, m.cell_volumes, rtol=1e-13)


def test_structural_errors():
    X = np.array([[0, 0], [1, 0], [0, 1], [2, 0]])
    be = [(0, 1, 1), (1, 2, 1), (2, 0, 1)]
    with pytest.raises(MeshError, match="triangle 0"):
        build_dual(X, [[0, 2, 1]], [(0, 2, 1), (2, 1, 1), (1, 0, 1)])
    with pytest.raises(MeshError):
        build_dual(X, [[0, 1, 3]], [(0, 1, 1), (1, 3, 1), (3, 0, 1)])
    with pytest.raises(MeshError):
        build_dual(X[:3], [[0, 1, 2]], be[:2])
    with pytest.raises(MeshError):
        build_dual(X, [[0, 1, 2], [0, 1, 2]], be)


def test_antisymmetry_is_structural():
    m = delaunay_square(60, seed=3)
    # one stored normal per edge; assembly uses +n for i and -n for j
    assert len(np.unique(np.sort(m.edges, axis=1), axis=0)) == m.n_edges
    assert np.all(m.edges[:, 0] < m.edges[:, 1])


def test_upwind_triangle_structured():
    m = rectangle_mesh(4, 4, diagonal="right")
    X = m.vertices
    nxp = 5
    i, j = 2 * nxp + 2, 2 * nxp + 3     # horizontal edge in the middle
    kij, kji = m.upwind_triangles(i, j)
    ci = X[m.triangles[kij]].mean(axis=0)
    cj = X[m.triangles[kji]].mean(axis=0)
    assert i in m.triangles[kij] and j in m.triangles[kji]
    assert ci[0] < X[i, 0] and cj[0] > X[j, 0]


def test_upwind_mirror_symmetry():
    m = rectangle_mesh(4, 4, diagonal="alternate")
    X = m.vertices
    mirror = {k: int(np.argmin(np.hypot(X[:, 0] - (1 - X[k, 0]), X[:, 1] - X[k, 1])))
              for k in range(m.n_vertices)}
    cent = X[m.triangles].mean(axis=1)
    tri_mirror = {t: int(np.argmin(np.hypot(cent[:, 0] - (1 - cent[t, 0]), cent[:, 1] - cent[t, 1])))
                  for t in range(len(cent))}
    def cands(i, j):
        # [K, tie partner] seen from vertex i
        e = m.edge_index(i, j)
        side = 0 if m.edges[e, 0] == i else 1
        return {int(t) for t in m.upwind[e, side] if t >= 0}

    for a, b in m.edges:
        for i, j in ((a, b), (b, a)):
            assert {tri_mirror[t] for t in cands(i, j)} == cands(mirror[i], mirror[j])


def test_corner_vertex_single_triangle():
    m = rectangle_mesh(2, 2, diagonal="right")
    # vertex 2 (bottom-right corner) lies in exactly one triangle
    owners = np.nonzero((m.triangles == 2).any(axis=1))[0]
    assert len(owners) == 1
    for nb in m.neighbors(2):
        assert m.upwind_triangles(2, nb)[0] == owners[0]


def test_gradients_exact_for_linear_fields():
    m = delaunay_square(80, seed=5)
    f = 1.0 + 2.0 * m.vertices[:, 0] - 3.0 * m.vertices[:, 1]
    np.testing.assert_allclose(m.triangle_gradients(f), np.tile([2.0, -3.0], (len(m.triangles), 1)), atol=1e-11)
    np.testing.assert_allclose(m.nodal_gradients(f), np.tile([2.0, -3.0], (m.n_vertices, 1)), atol=1e-11)


def test_wedge_channel_tags_and_scaling():
    m = generate_wedge_channel(h=0.05)
    tags = set(BoundaryTag(int(t)) for t in m.boundary_edges[:, 2])
    assert tags == {BoundaryTag.INFLOW_FREESTREAM, BoundaryTag.OUTFLOW_FREE, BoundaryTag.SLIP_WALL}
    inflow = m.boundary_vertices("inflow_freestream")
    assert np.allclose(m.vertices[inflow, 0], 0.0)
    out = m.boundary_vertices("outflow_free")
    assert np.allclose(m.vertices[out, 0], 1.5)
    assert len(body_vertices(m)) > 5
    m2 = generate_wedge_channel(h=0.025)
    assert 3.5 < len(m2.triangles) / len(m.triangles) < 4.5
    g = generate_wedge_channel(h=0.05, bottom_tag="ground", wall="top")
    assert BoundaryTag.GROUND in set(BoundaryTag(int(t)) for t in g.boundary_edges[:, 2])
    flat = generate_wedge_channel(h=0.1, wedge_angle=0.0)
    assert flat.cell_volumes.sum() == pytest.approx(1.5, rel=1e-12)
    with pytest.raises(MeshError):
        generate_wedge_channel(h=0.05, wedge_angle=80.0)


def test_round_trip_bit_exact(tmp_path):
    m = delaunay_square(50, seed=7)
    p = tmp_path / "m.mesh"
    write_mesh(p, m, comment="test mesh")
    r = read_mesh(p)
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.boundary_edges, m.boundary_edges)


def test_truncated_file_reports_line(tmp_path):
    m = rectangle_mesh(2, 2)
    p = tmp_path / "m.mesh"
    write_mesh(p, m)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:5]) + "\n")
    with pytest.raises(MeshParseError) as err:
        read_mesh(p)
    assert err.value.line == 6
    lines[3] = "0.5 zz"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(MeshParseError) as err:
        read_mesh(p)
    assert err.value.line == 4


def test_locate_points():
    m = rectangle_mesh(3, 3)
    tri, bary = locate_points(m, [[0.2, 0.7], [2.0, 2.0]])
    assert tri[1] == -1 and tri[0] >= 0
    assert np.allclose(bary[0] @ m.vertices[m.triangles[tri[0]]], [0.2, 0.7])


def test_tag_parsing():
    assert BoundaryTag.parse("ground") is BoundaryTag.GROUND
    assert BoundaryTag.parse(2) is BoundaryTag.INFLOW_FREESTREAM
    with pytest.raises(ValueError):
        BoundaryTag.parse("lava")
