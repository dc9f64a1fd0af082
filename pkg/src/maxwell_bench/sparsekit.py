"""Sparse and dense kernels shared by the solvers.

Sparse matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted,
duplicate-free column indices).  Dense blocks are plain 2-D numpy arrays.
Everything here is generic over float64 and complex128.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SingularMatrixError",
    "NotSPDError",
    "as_csr",
    "spmv",
    "rcm_ordering",
    "LuFactor",
    "sparse_lu",
    "CholFactor",
    "sparse_cholesky",
    "LowRankBlock",
    "truncated_svd",
    "write_matrix_market",
    "read_matrix_market",
]

PIVOT_RTOL = 1e-14
DENSE_DIAGNOSIS_MAX = 4000


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a factorization meets a zero or negligible pivot."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class NotSPDError(np.linalg.LinAlgError):
    """Raised by :func:`sparse_cholesky` for matrices that are not SPD."""


def as_csr(A) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix (copying only when needed)."""
    A = sp.csr_matrix(A)
    if not A.has_canonical_format:
        A = A.copy()
        A.sum_duplicates()
    return A


def spmv(A, x):
    """Return ``A @ x``, checking dimensions."""
    x = np.asarray(x)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, vector has {x.shape[0]}")
    return A @ x


def _symmetric_pattern(A):
    P = sp.csr_matrix(A, copy=True)
    P.data = np.ones_like(P.data, dtype=np.int8)
    P = (P + P.T).tocsr()
    P.setdiag(0)
    P.eliminate_zeros()
    return P


def _bfs_levels(indptr, indices, start, mask):
    levels = [[start]]
    seen = {start}
    while True:
        nxt = []
        for v in levels[-1]:
            for w in indices[indptr[v]:indptr[v + 1]]:
                if mask[w] and w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            return levels
        levels.append(nxt)


def _pseudo_peripheral(indptr, indices, degree, start, mask):
    # George-Liu: move to a minimum-degree vertex of the last level until
    # the eccentricity stops growing.
    levels = _bfs_levels(indptr, indices, start, mask)
    while True:
        last = min(levels[-1], key=lambda v: (degree[v], v))
        cand = _bfs_levels(indptr, indices, last, mask)
        if len(cand) <= len(levels):
            return start
        start, levels = last, cand


def rcm_ordering(A) -> np.ndarray:
    """Reverse Cuthill-McKee ordering of the symmetrized pattern of ``A``.

    Each connected component is started from a pseudo-peripheral vertex;
    neighbours are visited by increasing (degree, index), so the result is
    deterministic.  Returns ``perm`` with ``A[perm][:, perm]`` reordered.
    """
    P = _symmetric_pattern(A)
    n = P.shape[0]
    indptr, indices = P.indptr, P.indices
    degree = np.diff(indptr)
    unvisited = np.ones(n, dtype=bool)
    order = []
    for seed in range(n):
        if not unvisited[seed]:
            continue
        root = _pseudo_peripheral(indptr, indices, degree, seed, unvisited)
        unvisited[root] = False
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            nbrs = [w for w in indices[indptr[v]:indptr[v + 1]] if unvisited[w]]
            nbrs.sort(key=lambda w: (degree[w], w))
            for w in nbrs:
                unvisited[w] = False
                queue.append(w)
    return np.asarray(order[::-1], dtype=np.int64)


class LuFactor:
    """Sparse LU factorization ``P_r A[perm][:, perm] = L U``.

    Backed by SuperLU with the column ordering fixed to ``perm`` and classic
    partial pivoting.
    """

    def __init__(self, A, ordering="rcm"):
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.shape = A.shape
        self.dtype = A.dtype
        n = A.shape[0]
        if ordering == "rcm":
            self.perm = rcm_ordering(A)
            permc_spec = "NATURAL"
        elif ordering == "colamd":
            self.perm = np.arange(n)
            permc_spec = "COLAMD"
        else:
            raise ValueError(f"unknown ordering {ordering!r}")
        Ap = A[self.perm][:, self.perm].tocsc()
        try:
            self._lu = spla.splu(Ap, permc_spec=permc_spec, diag_pivot_thresh=1.0)
        except RuntimeError as exc:
            row = _dense_singular_row(Ap) if n <= DENSE_DIAGNOSIS_MAX else None
            where = f" at row {int(self.perm[row])}" if row is not None else ""
            raise SingularMatrixError(
                f"matrix is singular{where}: {exc}", row=None if row is None else int(self.perm[row])
            ) from exc
        # SuperLU accepts tiny pivots; reject them relative to the row scale.
        rowmax = abs(Ap.tocsr()).max(axis=1).toarray().ravel()
        udiag = np.abs(self._lu.U.diagonal())
        # row i of U came from row perm_r^{-1}(i) of Ap
        src = np.empty(n, dtype=np.int64)
        src[self._lu.perm_r] = np.arange(n)
        bad = np.flatnonzero(udiag < PIVOT_RTOL * np.maximum(rowmax[src], np.finfo(float).tiny))
        if bad.size:
            row = int(self.perm[src[bad[0]]])
            raise SingularMatrixError(f"near-zero pivot at row {row}", row=row)

    @property
    def nnz(self) -> int:
        return self._lu.L.nnz + self._lu.U.nnz

    def solve(self, b):
        b = np.asarray(b)
        if b.shape[0] != self.shape[0]:
            raise ValueError("right-hand side has wrong length")
        if np.iscomplexobj(b) and not np.iscomplexobj(self._lu.U.data):
            return self.solve(b.real) + 1j * self.solve(b.imag)
        x = np.empty_like(b, dtype=np.result_type(b, self.dtype))
        x[self.perm] = self._lu.solve(b[self.perm])
        return x

    __call__ = solve


def _dense_singular_row(Ap):
    # SuperLU does not say where it failed; redo the factorization densely
    D = Ap.toarray()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(D, check_finite=False)
    perm = np.arange(len(piv))
    for a, b in enumerate(piv):
        perm[a], perm[b] = perm[b], perm[a]
    rowmax = np.maximum(np.abs(D).max(axis=1), np.finfo(float).tiny)
    bad = np.flatnonzero(np.abs(np.diagonal(lu)) < PIVOT_RTOL * rowmax[perm])
    return int(perm[bad[0]]) if bad.size else None


def sparse_lu(A, ordering="rcm") -> LuFactor:
    """Factor a square sparse matrix; see :class:`LuFactor`."""
    if A.shape == (1, 1) and sp.csr_matrix(A).nnz == 0:
        raise SingularMatrixError("near-zero pivot at row 0", row=0)
    return LuFactor(A, ordering=ordering)


class CholFactor:
    """Symmetric factorization ``A[p][:, p] = L D L^T`` of an SPD matrix.

    SuperLU is run in symmetric mode without off-diagonal pivoting, so its
    ``U`` is ``D L^T``; a positive ``D`` certifies positive definiteness.
    """

    def __init__(self, A, name="matrix"):
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"{name} must be square, got {A.shape}")
        if np.iscomplexobj(A.data):
            raise NotSPDError(f"{name} is complex")
        asym = abs(A - A.T).max() if A.nnz else 0.0
        scale = abs(A).max() if A.nnz else 0.0
        if asym > 1e-12 * scale:
            raise NotSPDError(f"{name} is not symmetric")
        self.shape = A.shape
        try:
            self._lu = spla.splu(
                A.tocsc(),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=True),
            )
        except RuntimeError as exc:
            raise NotSPDError(f"{name} is not positive definite: {exc}") from exc
        d = self._lu.U.diagonal()
        if not np.array_equal(self._lu.perm_r, self._lu.perm_c) or np.any(d <= 0):
            raise NotSPDError(f"{name} is not positive definite (non-positive pivot)")

    @property
    def nnz(self) -> int:
        return self._lu.L.nnz

    def solve(self, b):
        b = np.asarray(b)
        if np.iscomplexobj(b):
            return self._lu.solve(b.real) + 1j * self._lu.solve(b.imag)
        return self._lu.solve(b)

    __call__ = solve


def sparse_cholesky(A, name="matrix") -> CholFactor:
    return CholFactor(A, name=name)


@dataclass(frozen=True)
class LowRankBlock:
    """Block stored as ``left @ right`` with ``left`` (m, r), ``right`` (r, n)."""

    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return self.left.shape[1]

    @property
    def shape(self):
        return (self.left.shape[0], self.right.shape[1])

    @property
    def size(self) -> int:
        return self.left.size + self.right.size

    def to_dense(self):
        return self.left @ self.right

    def __matmul__(self, x):
        return self.left @ (self.right @ x)


def truncated_svd(block, tol: float) -> LowRankBlock:
    """Minimal-rank factorization with ``||block - L R||_2 <= tol ||block||_2``.

    Singular values ``<= tol * sigma_max`` are dropped.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    block = np.asarray(block)
    m, n = block.shape
    if block.size == 0 or not np.any(block):
        return LowRankBlock(np.zeros((m, 0), block.dtype), np.zeros((0, n), block.dtype))
    try:
        U, s, Vh = scipy.linalg.svd(block, full_matrices=False, check_finite=False)
    except np.linalg.LinAlgError:
        U, s, Vh = scipy.linalg.svd(block, full_matrices=False, lapack_driver="gesvd")
    rank = int(np.count_nonzero(s > tol * s[0]))
    return LowRankBlock(U[:, :rank] * s[:rank], Vh[:rank].copy())


def write_matrix_market(A, path) -> None:
    """Write ``A`` in coordinate format with 17 significant digits."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), precision=17, symmetry="general")


def read_matrix_market(path) -> sp.csr_matrix:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline()
    if not header.lower().startswith("%%matrixmarket matrix coordinate"):
        raise ValueError(f"{path}: malformed Matrix Market header {header.strip()!r}")
    return as_csr(scipy.io.mmread(str(path)))
