"""Structured Kuhn tetrahedral mesh of the cube with an L-shaped scatterer.

The domain is ``scale * [-0.5, 0.5]^3``.  The scatterer occupies
``scale * ([-0.25, 0.25]^3 minus [-0.25, 0.25] x [-0.25, 0] x [-0.25, 0])``
and is realized by deleting the hexahedral cells whose centroid lies in it,
so the mesh conforms to the scatterer boundary whenever ``n % 4 == 0``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "INTERIOR",
    "GAMMA",
    "SIGMA",
    "LOCAL_EDGES",
    "MeshConfig",
    "Mesh",
    "build_cube_mesh",
    "points_per_wavelength_to_n",
    "mesh_stats",
    "scatterer_volume",
    "write_mesh",
]

INTERIOR, GAMMA, SIGMA = 0, 1, 2
TAG_NAMES = {INTERIOR: "interior", GAMMA: "gamma", SIGMA: "sigma"}

# local edge (a, b) of a tet; face f is opposite local vertex f
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
LOCAL_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])


@dataclass(frozen=True)
class MeshConfig:
    n: int
    scale: float = 1.0
    scatterer_enabled: bool = True

    def __post_init__(self):
        if self.n < 4 or self.n % 4:
            raise ValueError(f"n must be a positive multiple of 4, got {self.n}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(eq=False)
class Mesh:
    """Tetrahedral mesh with globally oriented edges and tagged boundary.

    Attributes
    ----------
    vertices : (nv, 3) float array
    tets : (nt, 4) int array, positively oriented
    edges : (ne, 2) int array, ``edges[e, 0] < edges[e, 1]``
    tet_edges : (nt, 6) edge ids for ``LOCAL_EDGES``
    tet_edge_signs : (nt, 6) +1 where the local edge runs low -> high id
    boundary_faces : (nf, 3) sorted vertex triples
    boundary_face_tags : (nf,) GAMMA or SIGMA
    boundary_face_tet : (nf,) owning tet
    boundary_face_local : (nf,) local face index (opposite vertex) in that tet
    edge_tags, vertex_tags : per-entity INTERIOR / GAMMA / SIGMA
    """

    config: MeshConfig
    vertices: np.ndarray
    tets: np.ndarray
    edges: np.ndarray
    tet_edges: np.ndarray
    tet_edge_signs: np.ndarray
    boundary_faces: np.ndarray
    boundary_face_tags: np.ndarray
    boundary_face_tet: np.ndarray
    boundary_face_local: np.ndarray
    edge_tags: np.ndarray
    vertex_tags: np.ndarray
    removed_volume: float = 0.0
    _edge_keys: np.ndarray = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def tet_volumes(self) -> np.ndarray:
        X = self.vertices[self.tets]
        J = X[:, 1:] - X[:, :1]
        return np.linalg.det(J) / 6.0

    def edge_ids(self, a, b) -> np.ndarray:
        """Ids of the edges joining vertices ``a`` and ``b`` (arrays)."""
        a, b = np.asarray(a), np.asarray(b)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo.astype(np.int64) * self.n_vertices + hi
        idx = np.searchsorted(self._edge_keys, keys)
        if np.any(idx >= len(self._edge_keys)) or np.any(self._edge_keys[np.minimum(idx, len(self._edge_keys) - 1)] != keys):
            raise KeyError("vertex pair is not a mesh edge")
        return idx


def scatterer_volume(scale: float = 1.0) -> float:
    return (0.5**3 - 0.5 * 0.25 * 0.25) * scale**3


def _in_scatterer(c, scale):
    q = 0.25 * scale
    box = np.all(np.abs(c) < q, axis=1)
    notch = (c[:, 1] < 0) & (c[:, 2] < 0)
    return box & ~notch


def _kuhn_tets():
    # cube corner index = x + 2y + 4z; each tet walks 000 -> 111 along one
    # permutation of the axes, so all six share the main diagonal.
    tets = []
    for perm in itertools.permutations(range(3)):
        c, walk = 0, [0]
        for ax in perm:
            c += 1 << ax
            walk.append(c)
        tets.append(walk)
    return np.array(tets)


def build_cube_mesh(cfg: MeshConfig) -> Mesh:
    n, s = cfg.n, float(cfg.scale)
    m = n + 1
    t = -0.5 + np.arange(m) / n
    # lexicographic in (z, y, x): x varies fastest
    zz, yy, xx = np.meshgrid(t, t, t, indexing="ij")
    verts = s * np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    k, j, i = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    base = i + m * (j + m * k)
    corner_offsets = np.array([dx + m * (dy + m * dz) for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)])
    corners = base[:, None] + corner_offsets[None, :]

    removed_volume = 0.0
    if cfg.scatterer_enabled:
        centroids = s * np.column_stack([-0.5 + (i + 0.5) / n, -0.5 + (j + 0.5) / n, -0.5 + (k + 0.5) / n])
        inside = _in_scatterer(centroids, s)
        corners = corners[~inside]
        removed_volume = inside.sum() * (s / n) ** 3

    tets = corners[:, _kuhn_tets()].reshape(-1, 4)
    X = verts[tets]
    vol = np.linalg.det(X[:, 1:] - X[:, :1])
    flip = vol < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3].copy(), tets[flip, 2].copy()

    used = np.zeros(len(verts), dtype=bool)
    used[tets.ravel()] = True
    renum = np.full(len(verts), -1, dtype=np.int64)
    renum[used] = np.arange(used.sum())
    verts = verts[used]
    tets = renum[tets]
    nv = len(verts)

    # edges, globally oriented low -> high id
    a = tets[:, LOCAL_EDGES[:, 0]]
    b = tets[:, LOCAL_EDGES[:, 1]]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    keys = lo.astype(np.int64) * nv + hi
    edge_keys, tet_edges = np.unique(keys.ravel(), return_inverse=True)
    tet_edges = tet_edges.reshape(-1, 6)
    edges = np.column_stack([edge_keys // nv, edge_keys % nv])
    signs = np.where(a < b, 1, -1).astype(np.int8)

    # boundary faces: faces owned by exactly one tet
    fv = np.sort(tets[:, LOCAL_FACES], axis=2).reshape(-1, 3)
    fkeys = (fv[:, 0] * nv + fv[:, 1]) * nv + fv[:, 2]
    uniq, first, counts = np.unique(fkeys, return_index=True, return_counts=True)
    bidx = first[counts == 1]
    bfaces = fv[bidx]
    btet, blocal = np.divmod(bidx, 4)

    half = 0.5 * s
    tol = 1e-9 * s
    on_hull = np.any(np.abs(np.abs(verts) - half) < tol, axis=1)
    # a face lies on the hull iff its three vertices share a hull plane
    P = verts[bfaces]
    hull_face = np.zeros(len(bfaces), dtype=bool)
    for ax in range(3):
        for sgn in (-1.0, 1.0):
            hull_face |= np.all(np.abs(P[:, :, ax] - sgn * half) < tol, axis=1)
    ftags = np.where(hull_face, SIGMA, GAMMA).astype(np.int8)

    vtags = np.zeros(nv, dtype=np.int8)
    vtags[on_hull] = SIGMA
    vtags[bfaces[ftags == GAMMA].ravel()] = GAMMA

    etags = np.zeros(len(edges), dtype=np.int8)
    for tag in (SIGMA, GAMMA):
        f = bfaces[ftags == tag]
        for p, q in ((0, 1), (0, 2), (1, 2)):
            ids = np.searchsorted(edge_keys, f[:, p].astype(np.int64) * nv + f[:, q])
            etags[ids] = tag

    return Mesh(
        config=cfg,
        vertices=verts,
        tets=tets,
        edges=edges,
        tet_edges=tet_edges,
        tet_edge_signs=signs,
        boundary_faces=bfaces,
        boundary_face_tags=ftags,
        boundary_face_tet=btet,
        boundary_face_local=blocal,
        edge_tags=etags,
        vertex_tags=vtags,
        removed_volume=removed_volume,
        _edge_keys=edge_keys,
    )


def points_per_wavelength_to_n(k: float, ppw: float, scale: float = 1.0) -> int:
    """Smallest multiple of 4 with ``scale / n <= (2 pi / k) / ppw``."""
    if not (k > 0 and ppw > 0):
        raise ValueError("k and ppw must be positive")
    need = scale * k * ppw / (2 * math.pi)
    n = 4 * math.ceil(need / 4 - 1e-9)
    return max(n, 4)


def mesh_stats(m: Mesh) -> dict:
    vol = m.tet_volumes()
    out = {
        "n_vertices": m.n_vertices,
        "n_edges": m.n_edges,
        "n_tets": m.n_tets,
        "min_volume": float(vol.min()),
        "max_volume": float(vol.max()),
        "total_volume": float(vol.sum()),
    }
    for tag in (GAMMA, SIGMA):
        name = TAG_NAMES[tag]
        out[f"n_faces_{name}"] = int(np.count_nonzero(m.boundary_face_tags == tag))
        out[f"n_edges_{name}"] = int(np.count_nonzero(m.edge_tags == tag))
        out[f"n_vertices_{name}"] = int(np.count_nonzero(m.vertex_tags == tag))
    return out


def write_mesh(m: Mesh, path) -> None:
    """Plain-text dump: a counts line, then vertices, then tets (0-based)."""
    with open(path, "w") as fh:
        fh.write(f"{m.n_vertices} {m.n_tets}\n")
        for x, y, z in m.vertices:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for t in m.tets:
            fh.write(" ".join(str(v) for v in t) + "\n")
