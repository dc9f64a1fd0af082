import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_bench.mesh import (
    GAMMA,
    INTERIOR,
    LOCAL_EDGES,
    SIGMA,
    MeshConfig,
    build_cube_mesh,
    mesh_stats,
    points_per_wavelength_to_n,
    scatterer_volume,
    write_mesh,
)


def signed_volumes(m):
    X = m.vertices[m.tets]
    return np.linalg.det(X[:, 1:] - X[:, :1]) / 6.0


def test_counts_without_scatterer():
    m = build_cube_mesh(MeshConfig(4, scatterer_enabled=False))
    assert m.n_vertices == 125
    assert m.n_tets == 384


def test_edges_match_brute_force_enumeration():
    m = build_cube_mesh(MeshConfig(4, scatterer_enabled=False))
    pairs = set()
    for tet in m.tets.tolist():
        for a, b in itertools.combinations(tet, 2):
            pairs.add((min(a, b), max(a, b)))
    assert m.n_edges == len(pairs)
    assert set(map(tuple, m.edges.tolist())) == pairs


def test_volume_plus_removed_is_one():
    m = build_cube_mesh(MeshConfig(4))
    assert abs(signed_volumes(m).sum() + m.removed_volume - 1.0) <= 1e-12
    assert abs(m.removed_volume - scatterer_volume(1.0)) <= 1e-14


@pytest.mark.parametrize("n", [4, 8, 12])
def test_positive_orientation(n):
    assert signed_volumes(build_cube_mesh(MeshConfig(n))).min() > 0


@pytest.mark.parametrize("n", [0, 2, 6, 10, -4])
def test_rejects_n_not_multiple_of_four(n):
    with pytest.raises(ValueError):
        MeshConfig(n)


def test_rejects_nonpositive_scale():
    with pytest.raises(ValueError):
        MeshConfig(4, scale=0.0)


@pytest.mark.parametrize(
    "k, ppw, scale, n",
    [(2 * np.pi, 10, 1.0, 12), (1.0, 10, 1.0, 4), (10.0, 10, 1.0, 16), (4 * np.pi, 10, 1.0, 20), (1.0, 10, 4.0, 8)],
)
def test_points_per_wavelength(k, ppw, scale, n):
    assert points_per_wavelength_to_n(k, ppw, scale) == n


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 40), st.floats(1, 30), st.floats(0.1, 5))
def test_points_per_wavelength_is_smallest(k, ppw, scale):
    n = points_per_wavelength_to_n(k, ppw, scale)
    h_max = (2 * np.pi / k) / ppw
    assert n % 4 == 0 and n >= 4
    assert scale / n <= h_max * (1 + 1e-9)
    if n > 4:
        assert scale / (n - 4) > h_max * (1 - 1e-9)


@pytest.mark.parametrize("bad", [(0, 10), (1, 0), (-1, 10)])
def test_points_per_wavelength_rejects(bad):
    with pytest.raises(ValueError):
        points_per_wavelength_to_n(*bad, 1.0)


def test_stats_sigma_faces_no_scatterer():
    s = mesh_stats(build_cube_mesh(MeshConfig(4, scatterer_enabled=False)))
    assert s["n_faces_sigma"] == 192
    assert s["n_faces_gamma"] == 0


def test_stats_gamma_faces_with_scatterer():
    s = mesh_stats(build_cube_mesh(MeshConfig(4)))
    assert s["n_faces_gamma"] > 0
    assert s["n_faces_sigma"] == 192
    assert s["min_volume"] > 0


def test_gamma_faces_area_matches_l_shape():
    # cube of side 1/2 with a full-length 1/4 x 1/4 notch along x: the notch
    # swaps two strips for two strips and cuts 1/16 off each x-end face
    m = build_cube_mesh(MeshConfig(8))
    P = m.vertices[m.boundary_faces[m.boundary_face_tags == GAMMA]]
    area = 0.5 * np.linalg.norm(np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]), axis=1).sum()
    assert abs(area - (1.5 - 2 / 16)) <= 1e-12


@pytest.mark.parametrize("n", [4, 8])
def test_edge_orientation_consistency(n):
    m = build_cube_mesh(MeshConfig(n))
    for t in range(0, m.n_tets, 7):
        for le, (a, b) in enumerate(LOCAL_EDGES):
            e = m.tet_edges[t, le]
            glob = m.vertices[m.edges[e, 1]] - m.vertices[m.edges[e, 0]]
            loc = m.vertices[m.tets[t, b]] - m.vertices[m.tets[t, a]]
            assert np.array_equal(m.tet_edge_signs[t, le] * glob, loc)


@pytest.mark.parametrize("n", [4, 8])
def test_tag_consistency(n):
    m = build_cube_mesh(MeshConfig(n))
    for tag in (GAMMA, SIGMA):
        e = m.edges[m.edge_tags == tag]
        assert np.all(m.vertex_tags[e] == tag)
    # no interior edge joins two vertices of a common boundary face of its tag
    faces = m.boundary_faces
    for tag in (GAMMA, SIGMA):
        f = faces[m.boundary_face_tags == tag]
        ids = np.concatenate([m.edge_ids(f[:, p], f[:, q]) for p, q in ((0, 1), (0, 2), (1, 2))])
        assert np.all(m.edge_tags[ids] == tag)
    # tagged edges all lie on some face of that tag
    for tag in (GAMMA, SIGMA):
        f = faces[m.boundary_face_tags == tag]
        ids = set(np.concatenate([m.edge_ids(f[:, p], f[:, q]) for p, q in ((0, 1), (0, 2), (1, 2))]).tolist())
        assert ids == set(np.flatnonzero(m.edge_tags == tag).tolist())
    assert np.any(m.edge_tags == INTERIOR)


def test_each_boundary_face_has_one_owner():
    m = build_cube_mesh(MeshConfig(4))
    all_faces = np.sort(m.tets[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]], axis=2).reshape(-1, 3)
    uniq, counts = np.unique(all_faces, axis=0, return_counts=True)
    boundary = {tuple(f) for f in uniq[counts == 1].tolist()}
    assert boundary == {tuple(f) for f in m.boundary_faces.tolist()}
    owner = m.tets[m.boundary_face_tet]
    for f, tet, loc in zip(m.boundary_faces, owner, m.boundary_face_local):
        assert sorted(np.delete(tet, loc)) == sorted(f)


def test_scaling_covariance():
    a = build_cube_mesh(MeshConfig(4))
    b = build_cube_mesh(MeshConfig(4, scale=3.0))
    assert np.array_equal(b.vertices, 3.0 * a.vertices)
    assert np.array_equal(a.tets, b.tets)
    assert np.array_equal(a.edge_tags, b.edge_tags)


def test_lexicographic_vertex_order():
    m = build_cube_mesh(MeshConfig(4, scatterer_enabled=False))
    keys = m.vertices[:, ::-1]  # (z, y, x)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    assert np.array_equal(order, np.arange(m.n_vertices))


def test_deterministic():
    a, b = build_cube_mesh(MeshConfig(8)), build_cube_mesh(MeshConfig(8))
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.tet_edges, b.tet_edges)


def test_scatterer_strictly_interior():
    m = build_cube_mesh(MeshConfig(4))
    assert np.abs(m.vertices[m.vertex_tags == GAMMA]).max() <= 0.25 + 1e-14
    assert np.all(np.abs(m.vertices[m.vertex_tags == SIGMA]).max(axis=1) == 0.5)


def test_write_mesh(tmp_path):
    m = build_cube_mesh(MeshConfig(4))
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    lines = path.read_text().splitlines()
    nv, nt = map(int, lines[0].split())
    assert (nv, nt) == (m.n_vertices, m.n_tets)
    assert len(lines) == 1 + nv + nt
    assert np.allclose([float(x) for x in lines[1].split()], m.vertices[0])
    assert [int(x) for x in lines[-1].split()] == m.tets[-1].tolist()
