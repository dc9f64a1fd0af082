"""Lowest-order Nedelec assembly of the scattering problem.

Edge basis on edge ``a -> b`` of a tet: ``phi = lam_a grad(lam_b) - lam_b grad(lam_a)``
with ``curl(phi) = 2 grad(lam_a) x grad(lam_b)``.  Degrees of freedom on the
scatterer boundary (and vertices there, for the nodal spaces) are removed by
row/column elimination.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .mesh import GAMMA, LOCAL_EDGES, SIGMA, Mesh

__all__ = [
    "Material",
    "SourceSpec",
    "AssembledProblem",
    "barycentric_gradients",
    "assemble_curl_curl",
    "assemble_mass",
    "assemble_boundary",
    "assemble_rhs",
    "discrete_gradient",
    "nodal_interpolation",
    "assemble_aux_laplacians",
    "assemble_problem",
    "free_maps",
    "plane_wave_source",
    "manufactured_source",
    "full_edge_vector",
    "edge_interpolant",
    "hcurl_error",
]

# 4-point degree-2 rule on the reference tet (barycentric coordinates)
_A, _B = 0.5854101966249685, 0.1381966011250105
TET_QUAD_BARY = np.array([[_A, _B, _B, _B], [_B, _A, _B, _B], [_B, _B, _A, _B], [_B, _B, _B, _A]])
TET_QUAD_W = np.full(4, 0.25)
# interior 3-point rule, degree 2 on triangles; on oscillatory data it is
# roughly ten times more accurate than the edge-midpoint rule
TRI_QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
TRI_QUAD_W = np.full(3, 1.0 / 3.0)
FACE_EDGES = np.array([(0, 1), (0, 2), (1, 2)])


@dataclass(frozen=True)
class Material:
    """Piecewise-constant coefficients; scalars broadcast to every tet."""

    k: float
    eps_r: object = 1.0
    mu_r: object = 1.0
    lambda_imp: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")
        if np.any(np.asarray(self.eps_r) <= 0) or np.any(np.asarray(self.mu_r) <= 0):
            raise ValueError("eps_r and mu_r must be positive")

    def eps(self, nt):
        return np.broadcast_to(np.asarray(self.eps_r, dtype=float), (nt,))

    def mu_inv(self, nt):
        return 1.0 / np.broadcast_to(np.asarray(self.mu_r, dtype=float), (nt,))


@dataclass(frozen=True)
class SourceSpec:
    """Incident plane wave ``p exp(i k d.x)`` plus optional extra data.

    ``volume_source`` maps points (npts, 3) to complex F (npts, 3).
    ``boundary_data`` maps (points, outward normals) to the complex tangential
    impedance data ``g`` on Sigma; it is added to the plane-wave data.  It
    exists for manufactured solutions.
    """

    polarization: tuple = (0.0, 0.0, 0.0)
    direction: tuple = (1.0, 0.0, 0.0)
    volume_source: Optional[Callable] = None
    boundary_data: Optional[Callable] = None

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        p = np.asarray(self.polarization, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("propagation direction must be a unit vector")
        if abs(p @ d) > 1e-12:
            raise ValueError("polarization must be orthogonal to the propagation direction")


def plane_wave_source(polarization=(0.0, 0.0, 1.0), direction=(1.0, 0.0, 0.0)) -> SourceSpec:
    return SourceSpec(polarization=tuple(polarization), direction=tuple(direction))


def manufactured_source(E, curl_E, curl_curl_E, material: Material) -> SourceSpec:
    """Source and impedance data reproducing the given exact field.

    ``E``, ``curl_E`` and ``curl_curl_E`` map points (npts, 3) to complex
    (npts, 3) arrays.  Homogeneous ``eps_r``/``mu_r`` are assumed.
    """
    k = material.k
    eps = float(np.mean(material.eps_r))
    mu_inv = 1.0 / float(np.mean(material.mu_r))
    lam = material.lambda_imp

    def F(x):
        return mu_inv * curl_curl_E(x) - k**2 * eps * E(x)

    def g(x, nu):
        e = E(x)
        e_t = e - np.sum(e * nu, axis=1, keepdims=True) * nu
        return mu_inv * np.cross(curl_E(x), nu) - 1j * k * lam * e_t

    return SourceSpec(volume_source=F, boundary_data=g)


@dataclass(eq=False)
class AssembledProblem:
    mesh: Mesh
    material: Material
    C: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    s_R: np.ndarray
    s_I: np.ndarray
    G: sp.csr_matrix
    P_curl: sp.csr_matrix
    L_vec: sp.csr_matrix
    M_vec: sp.csr_matrix
    Lap_scalar: sp.csr_matrix
    free_edge_map: np.ndarray
    free_vertex_map: np.ndarray

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def k(self) -> float:
        return self.material.k


def free_maps(mesh: Mesh):
    """Old -> new index maps for edges and vertices (-1 where eliminated)."""
    emask = mesh.edge_tags != GAMMA
    vmask = mesh.vertex_tags != GAMMA
    emap = np.full(mesh.n_edges, -1, dtype=np.int64)
    emap[emask] = np.arange(emask.sum())
    vmap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vmap[vmask] = np.arange(vmask.sum())
    return emap, vmap


def barycentric_gradients(mesh: Mesh):
    """Per-tet barycentric gradients (nt, 4, 3) and volumes (nt,)."""
    X = mesh.vertices[mesh.tets]
    J = X[:, 1:] - X[:, :1]
    vol = np.linalg.det(J) / 6.0
    if np.any(vol <= 0):
        raise ValueError("degenerate or inverted tetrahedron")
    # lam_{1..3}(x) = J^{-T} (x - x0) since the rows of J are edge vectors
    Jinv = np.linalg.inv(J)
    g = np.empty((len(J), 4, 3))
    g[:, 1:] = np.transpose(Jinv, (0, 2, 1))
    g[:, 0] = -g[:, 1:].sum(axis=1)
    return g, vol


def _edge_map_and_restrict(mesh, rows, cols, vals, emap=None):
    if emap is None:
        emap, _ = free_maps(mesh)
    r, c = emap[rows], emap[cols]
    keep = (r >= 0) & (c >= 0)
    nf = int(emap.max()) + 1
    A = sp.coo_matrix((vals[keep], (r[keep], c[keep])), shape=(nf, nf)).tocsr()
    A.sum_duplicates()
    # exact symmetry: a_ij + a_ji == a_ji + a_ij in IEEE arithmetic
    return ((A + A.T) * 0.5).tocsr()


def _scatter_local(mesh, local):
    te = mesh.tet_edges
    s = mesh.tet_edge_signs.astype(float)
    local = local * s[:, :, None] * s[:, None, :]
    rows = np.repeat(te, 6, axis=1).ravel()
    cols = np.tile(te, (1, 6)).ravel()
    return rows, cols, local.ravel()


def _local_curl_curl(g, vol, mu_inv):
    a, b = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    curls = 2.0 * np.cross(g[:, a], g[:, b])
    return (mu_inv * vol)[:, None, None] * np.einsum("tic,tjc->tij", curls, curls)


def _local_edge_mass(g, vol, weight):
    # int lam_i lam_j = vol (1 + delta_ij) / 20
    a, b = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    gg = np.einsum("tic,tjc->tij", g, g)
    ll = (np.ones((4, 4)) + np.eye(4)) / 20.0
    loc = (
        ll[a][:, a][None] * gg[:, b][:, :, b]
        - ll[a][:, b][None] * gg[:, b][:, :, a]
        - ll[b][:, a][None] * gg[:, a][:, :, b]
        + ll[b][:, b][None] * gg[:, a][:, :, a]
    )
    return (weight * vol)[:, None, None] * loc


def assemble_curl_curl(mesh: Mesh, material: Material, emap=None) -> sp.csr_matrix:
    g, vol = barycentric_gradients(mesh)
    loc = _local_curl_curl(g, vol, material.mu_inv(mesh.n_tets))
    return _edge_map_and_restrict(mesh, *_scatter_local(mesh, loc), emap)


def assemble_mass(mesh: Mesh, material: Material, emap=None) -> sp.csr_matrix:
    """Edge mass matrix including the ``k^2`` factor."""
    g, vol = barycentric_gradients(mesh)
    loc = _local_edge_mass(g, vol, material.k**2 * material.eps(mesh.n_tets))
    return _edge_map_and_restrict(mesh, *_scatter_local(mesh, loc), emap)


def _sigma_faces(mesh):
    sel = mesh.boundary_face_tags == SIGMA
    return mesh.boundary_faces[sel], mesh.boundary_face_tet[sel], mesh.boundary_face_local[sel]


def _face_geometry(mesh, faces, ftet, flocal):
    """Surface barycentric gradients (nf, 3, 3), areas, outward unit normals."""
    P = mesh.vertices[faces]
    E1, E2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    nrm = np.cross(E1, E2)
    area = 0.5 * np.linalg.norm(nrm, axis=1)
    nu = nrm / (2.0 * area)[:, None]
    # orient outward: away from the opposite vertex of the owning tet
    opp = mesh.vertices[mesh.tets[ftet, flocal]]
    flip = np.einsum("fc,fc->f", nu, opp - P[:, 0]) > 0
    nu[flip] *= -1
    G11 = np.einsum("fc,fc->f", E1, E1)
    G12 = np.einsum("fc,fc->f", E1, E2)
    G22 = np.einsum("fc,fc->f", E2, E2)
    det = G11 * G22 - G12**2
    g1 = (G22[:, None] * E1 - G12[:, None] * E2) / det[:, None]
    g2 = (G11[:, None] * E2 - G12[:, None] * E1) / det[:, None]
    g = np.stack([-(g1 + g2), g1, g2], axis=1)
    return g, area, nu


def _face_edge_ids(mesh, faces):
    a = faces[:, FACE_EDGES[:, 0]]
    b = faces[:, FACE_EDGES[:, 1]]
    # faces are sorted, so every face edge already runs low -> high
    return mesh.edge_ids(a, b)


def assemble_boundary(mesh: Mesh, material: Material, emap=None) -> sp.csr_matrix:
    """Tangential-trace mass on Sigma, scaled by ``k * lambda_imp``."""
    faces, ftet, flocal = _sigma_faces(mesh)
    if emap is None:
        emap, _ = free_maps(mesh)
    nf_free = int(emap.max()) + 1
    if len(faces) == 0:
        return sp.csr_matrix((nf_free, nf_free))
    g, area, _ = _face_geometry(mesh, faces, ftet, flocal)
    a, b = FACE_EDGES[:, 0], FACE_EDGES[:, 1]
    gg = np.einsum("fic,fjc->fij", g, g)
    ll = (np.ones((3, 3)) + np.eye(3)) / 12.0
    loc = (
        ll[a][:, a][None] * gg[:, b][:, :, b]
        - ll[a][:, b][None] * gg[:, b][:, :, a]
        - ll[b][:, a][None] * gg[:, a][:, :, b]
        + ll[b][:, b][None] * gg[:, a][:, :, a]
    )
    loc *= (material.k * material.lambda_imp * area)[:, None, None]
    fe = _face_edge_ids(mesh, faces)
    rows = np.repeat(fe, 3, axis=1).ravel()
    cols = np.tile(fe, (1, 3)).ravel()
    return _edge_map_and_restrict(mesh, rows, cols, loc.ravel(), emap)


def _edge_basis_at(g, bary, local_edges):
    """Edge basis values: g (m, nv, 3), bary (q, nv) -> (m, q, ne, 3)."""
    a, b = local_edges[:, 0], local_edges[:, 1]
    la, lb = bary[:, a], bary[:, b]
    return la[None, :, :, None] * g[:, None, b, :] - lb[None, :, :, None] * g[:, None, a, :]


def _plane_wave_data(source: SourceSpec, k):
    p = np.asarray(source.polarization, dtype=float)
    d = np.asarray(source.direction, dtype=float)
    if not np.any(p):
        return None

    def g(x, nu):
        phase = np.exp(1j * k * (x @ d))[:, None]
        E = phase * p[None, :]
        curlE = 1j * k * phase * np.cross(d, p)[None, :]
        E_t = E - np.sum(E * nu, axis=1, keepdims=True) * nu
        return np.cross(curlE, nu) - 1j * k * E_t

    return g


def assemble_rhs(mesh: Mesh, material: Material, source: SourceSpec, emap=None):
    """Return ``(s_R, s_I)`` on the free edges."""
    if emap is None:
        emap, _ = free_maps(mesh)
    b = np.zeros(mesh.n_edges, dtype=complex)

    if source.volume_source is not None:
        g, vol = barycentric_gradients(mesh)
        X = mesh.vertices[mesh.tets]
        pts = np.einsum("qv,tvc->tqc", TET_QUAD_BARY, X)
        F = source.volume_source(pts.reshape(-1, 3)).reshape(pts.shape)
        phi = _edge_basis_at(g, TET_QUAD_BARY, LOCAL_EDGES)
        contrib = np.einsum("q,tqc,tqec->te", TET_QUAD_W, F, phi) * vol[:, None]
        contrib *= mesh.tet_edge_signs
        np.add.at(b, mesh.tet_edges.ravel(), contrib.ravel())

    data = [f for f in (_plane_wave_data(source, material.k), source.boundary_data) if f is not None]
    faces, ftet, flocal = _sigma_faces(mesh)
    if data and len(faces):
        g, area, nu = _face_geometry(mesh, faces, ftet, flocal)
        P = mesh.vertices[faces]
        pts = np.einsum("qv,fvc->fqc", TRI_QUAD_BARY, P)
        nuq = np.repeat(nu[:, None, :], len(TRI_QUAD_W), axis=1)
        gval = sum(f(pts.reshape(-1, 3), nuq.reshape(-1, 3)) for f in data).reshape(pts.shape)
        phi = _edge_basis_at(g, TRI_QUAD_BARY, FACE_EDGES)
        contrib = np.einsum("q,fqc,fqec->fe", TRI_QUAD_W, gval, phi) * area[:, None]
        np.add.at(b, _face_edge_ids(mesh, faces).ravel(), contrib.ravel())

    b = b[emap >= 0]
    return b.real.copy(), b.imag.copy()


def discrete_gradient(mesh: Mesh, emap=None, vmap=None) -> sp.csr_matrix:
    if emap is None or vmap is None:
        emap, vmap = free_maps(mesh)
    fe = np.flatnonzero(emap >= 0)
    a, b = mesh.edges[fe, 0], mesh.edges[fe, 1]
    rows = np.concatenate([emap[fe], emap[fe]])
    cols = np.concatenate([vmap[a], vmap[b]])
    vals = np.concatenate([-np.ones(len(fe)), np.ones(len(fe))])
    keep = cols >= 0
    shape = (len(fe), int((vmap >= 0).sum()))
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=shape)


def nodal_interpolation(mesh: Mesh, emap=None, vmap=None) -> sp.csr_matrix:
    """Edge circulations of vector nodal fields (component-major columns)."""
    if emap is None or vmap is None:
        emap, vmap = free_maps(mesh)
    fe = np.flatnonzero(emap >= 0)
    nvf = int((vmap >= 0).sum())
    a, b = mesh.edges[fe, 0], mesh.edges[fe, 1]
    t = mesh.vertices[b] - mesh.vertices[a]
    rows, cols, vals = [], [], []
    for c in range(3):
        for v in (a, b):
            rows.append(emap[fe])
            cols.append(np.where(vmap[v] >= 0, c * nvf + vmap[v], -1))
            vals.append(0.5 * t[:, c])
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    keep = cols >= 0
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(len(fe), 3 * nvf))


def _nodal_matrix(mesh, local, vmap):
    t = mesh.tets
    rows = np.repeat(t, 4, axis=1).ravel()
    cols = np.tile(t, (1, 4)).ravel()
    r, c = vmap[rows], vmap[cols]
    keep = (r >= 0) & (c >= 0)
    nvf = int((vmap >= 0).sum())
    A = sp.coo_matrix((local.ravel()[keep], (r[keep], c[keep])), shape=(nvf, nvf)).tocsr()
    A.sum_duplicates()
    return ((A + A.T) * 0.5).tocsr()


def assemble_aux_laplacians(mesh: Mesh, material: Material, vmap=None):
    """Return ``(L_vec, M_vec, Lap_scalar)`` on the free vertices.

    ``L_vec`` and ``M_vec`` are component-major (``c * nv + v``) and carry no
    ``k^2``; ``Lap_scalar`` is weighted by ``eps_r``.
    """
    if vmap is None:
        _, vmap = free_maps(mesh)
    g, vol = barycentric_gradients(mesh)
    nt = mesh.n_tets
    stiff = np.einsum("tic,tjc->tij", g, g) * vol[:, None, None]
    mass = ((np.ones((4, 4)) + np.eye(4)) / 20.0)[None] * vol[:, None, None]
    K_mu = _nodal_matrix(mesh, stiff * material.mu_inv(nt)[:, None, None], vmap)
    M_eps = _nodal_matrix(mesh, mass * material.eps(nt)[:, None, None], vmap)
    K_eps = _nodal_matrix(mesh, stiff * material.eps(nt)[:, None, None], vmap)
    I3 = sp.identity(3, format="csr")
    return sp.kron(I3, K_mu, format="csr"), sp.kron(I3, M_eps, format="csr"), K_eps


def assemble_problem(mesh: Mesh, material: Material, source: Optional[SourceSpec] = None) -> AssembledProblem:
    if source is None:
        source = plane_wave_source()
    emap, vmap = free_maps(mesh)
    s_R, s_I = assemble_rhs(mesh, material, source, emap)
    L_vec, M_vec, Lap = assemble_aux_laplacians(mesh, material, vmap)
    return AssembledProblem(
        mesh=mesh,
        material=material,
        C=assemble_curl_curl(mesh, material, emap),
        M=assemble_mass(mesh, material, emap),
        B=assemble_boundary(mesh, material, emap),
        s_R=s_R,
        s_I=s_I,
        G=discrete_gradient(mesh, emap, vmap),
        P_curl=nodal_interpolation(mesh, emap, vmap),
        L_vec=L_vec,
        M_vec=M_vec,
        Lap_scalar=Lap,
        free_edge_map=emap,
        free_vertex_map=vmap,
    )


# ---------------------------------------------------------------- post-processing


def full_edge_vector(ap: AssembledProblem, x) -> np.ndarray:
    """Free-edge coefficients -> all edges, zero on eliminated ones."""
    x = np.asarray(x)
    out = np.zeros(ap.mesh.n_edges, dtype=x.dtype)
    keep = ap.free_edge_map >= 0
    out[keep] = x[ap.free_edge_map[keep]]
    return out


def edge_interpolant(mesh: Mesh, E: Callable, order: int = 6) -> np.ndarray:
    """Circulations of ``E`` along every edge (low -> high id), Gauss-Legendre."""
    t, w = np.polynomial.legendre.leggauss(order)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    a = mesh.vertices[mesh.edges[:, 0]]
    d = mesh.vertices[mesh.edges[:, 1]] - a
    pts = a[:, None, :] + t[None, :, None] * d[:, None, :]
    vals = np.asarray(E(pts.reshape(-1, 3))).reshape(pts.shape)
    return np.einsum("q,eqc,ec->e", w, vals, d)


def _collapsed_tet_rule(order):
    # Duffy map of a tensor Gauss rule; weights sum to one
    t, w = np.polynomial.legendre.leggauss(order)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    a, b, c = np.meshgrid(t, t, t, indexing="ij")
    wa, wb, wc = np.meshgrid(w, w, w, indexing="ij")
    l1 = a
    l2 = b * (1 - a)
    l3 = c * (1 - a) * (1 - b)
    bary = np.stack([1 - l1 - l2 - l3, l1, l2, l3], axis=-1).reshape(-1, 4)
    weight = (6.0 * wa * wb * wc * (1 - a) ** 2 * (1 - b)).ravel()
    return bary, weight


def hcurl_error(mesh: Mesh, u, E: Callable, curl_E: Callable, order: int = 3) -> tuple:
    """``(||E - u_h||, ||curl(E - u_h)||)`` in L2 for edge coefficients ``u``.

    ``u`` holds one coefficient per mesh edge (see :func:`full_edge_vector`).
    """
    g, vol = barycentric_gradients(mesh)
    bary, weight = _collapsed_tet_rule(order)
    coef = np.asarray(u)[mesh.tet_edges] * mesh.tet_edge_signs
    phi = _edge_basis_at(g, bary, LOCAL_EDGES)
    uh = np.einsum("te,tqec->tqc", coef, phi)
    a, b = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    curl_uh = np.einsum("te,tec->tc", coef, 2.0 * np.cross(g[:, a], g[:, b]))
    X = mesh.vertices[mesh.tets]
    pts = np.einsum("qv,tvc->tqc", bary, X).reshape(-1, 3)
    e0 = np.asarray(E(pts)).reshape(uh.shape) - uh
    e1 = np.asarray(curl_E(pts)).reshape(uh.shape) - curl_uh[:, None, :]
    wv = weight[None, :] * vol[:, None]
    l2 = np.sqrt(np.sum(wv * np.sum(np.abs(e0) ** 2, axis=-1)))
    curl = np.sqrt(np.sum(wv * np.sum(np.abs(e1) ** 2, axis=-1)))
    return float(l2), float(curl)
