"""Hiptmair-Xu auxiliary-space preconditioning of the split system.

The additive operator is::

    H r = S^{-1} r + P (L + k^2 M)^{-1} P^T r + k^{-2} G Lap^{-1} G^T r

with ``S^{-1}`` one symmetric Gauss-Seidel sweep on ``C + M + B`` and exact
sparse Cholesky solves for the two auxiliary problems.

``aux`` selects the auxiliary matrices:

* ``"boundary"`` (default): ``L + k^2 M + P^T B P`` and
  ``Lap + k^-2 G^T B G``, i.e. the nodal operators plus the impedance term
  seen through ``P`` and ``G``.  This keeps the inner PCG count flat under
  refinement.
* ``"assembled"``: ``L + k^2 M`` and ``Lap`` without the boundary term.
  Inner counts grow with ``n`` because ``G^T B G`` (order ``k``) dominates
  ``k^2 Lap`` (order ``k^2 h``) near the impedance boundary.
* ``"galerkin"``: ``P^T A P`` and ``k^-2 G^T A G`` with ``A = C + M + B``.  It is used through
the block-diagonal operator ``diag(C+M+B, C+M+B)``, inverting each block
either with a short PCG run (``mode="precond"``) or with a single
application of ``H`` (``mode="solver"``).
"""
from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..assembly import AssembledProblem
from ..krylov import pcg
from ..sparsekit import NotSPDError, sparse_cholesky
from .base import Preconditioner

INNER_MAX_ITER = 20
INNER_RTOL = 1e-2
AUX_CHOICES = ("boundary", "assembled", "galerkin")


def _symmetrize(A):
    # triple products are symmetric only up to rounding
    A = sp.csr_matrix(A)
    return ((A + A.T) * 0.5).tocsr()


class _TriangularSolve:
    # SuperLU on a triangular matrix with natural ordering and no pivoting
    # reproduces plain substitution and runs in compiled code.
    def __init__(self, T):
        self._lu = spla.splu(
            sp.csc_matrix(T), permc_spec="NATURAL", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True)
        )

    def __call__(self, r):
        return self._lu.solve(r)


class SymmetricGaussSeidel:
    """``x = (D + U)^{-1} D (D + L)^{-1} r`` repeated ``sweeps`` times."""

    def __init__(self, A, sweeps: int = 1):
        A = sp.csr_matrix(A)
        self.A = A
        self.sweeps = sweeps
        self.diag = A.diagonal()
        self._lower = _TriangularSolve(sp.tril(A, format="csc"))
        self._upper = _TriangularSolve(sp.triu(A, format="csc"))

    def __call__(self, r):
        r = np.asarray(r)
        if np.iscomplexobj(r):
            return self(r.real) + 1j * self(r.imag)
        x = np.zeros_like(r, dtype=float)
        for _ in range(self.sweeps):
            x = x + self._lower(r - self.A @ x)
            x = x + self._upper(r - self.A @ x)
        return x


class HxOperator:
    """Additive three-term auxiliary-space operator on the free edges.

    ``use_smoother``, ``use_vector`` and ``use_scalar`` switch individual
    terms off for diagnostics.
    """

    def __init__(
        self,
        ap: AssembledProblem,
        sweeps: int = 1,
        aux: str = "boundary",
        use_smoother=True,
        use_vector=True,
        use_scalar=True,
    ):
        if aux not in AUX_CHOICES:
            raise ValueError(f"unknown auxiliary matrix choice {aux!r}")
        t0 = time.perf_counter()
        self.aux = aux
        self.k2 = ap.k**2
        self.block_matrix = (ap.C + ap.M + ap.B).tocsr()
        self.G = ap.G.tocsr()
        self.P_curl = ap.P_curl.tocsr()
        self.use_smoother = use_smoother
        self.use_vector = use_vector
        self.use_scalar = use_scalar
        self.smoother = SymmetricGaussSeidel(self.block_matrix, sweeps)
        A, P, G, B = self.block_matrix, self.P_curl, self.G, ap.B
        if aux == "galerkin":
            vec = P.T @ A @ P
            lap = G.T @ A @ G / self.k2
        else:
            vec = ap.L_vec + self.k2 * ap.M_vec
            lap = ap.Lap_scalar
            if aux == "boundary":
                vec = vec + P.T @ B @ P
                lap = lap + G.T @ B @ G / self.k2
        self.chol_beta = sparse_cholesky(_symmetrize(vec), name="vector auxiliary matrix")
        lap = _symmetrize(lap)
        self.pinned = None
        if np.all(ap.free_vertex_map >= 0):
            # no Dirichlet vertex: remove the constants by pinning vertex 0
            self.pinned = 0
            lap = lap[1:, 1:]
            self.G = self.G[:, 1:]
        self.chol_scalar = sparse_cholesky(lap, name="scalar auxiliary matrix")
        self.setup_time = time.perf_counter() - t0

    @property
    def n(self) -> int:
        return self.block_matrix.shape[0]

    def smoother_term(self, r):
        return self.smoother(r)

    def vector_term(self, r):
        return self.P_curl @ self.chol_beta.solve(self.P_curl.T @ r)

    def scalar_term(self, r):
        return (self.G @ self.chol_scalar.solve(self.G.T @ r)) / self.k2

    def apply(self, r):
        r = np.asarray(r)
        z = np.zeros_like(r, dtype=np.result_type(r.dtype, np.float64))
        if self.use_smoother:
            z += self.smoother_term(r)
        if self.use_vector:
            z += self.vector_term(r)
        if self.use_scalar:
            z += self.scalar_term(r)
        return z

    __call__ = apply


def build_hx(ap: AssembledProblem, **kwargs) -> HxOperator:
    try:
        return HxOperator(ap, **kwargs)
    except NotSPDError as exc:
        raise NotSPDError(f"HX setup failed: {exc}") from exc


class HxBlockPrecond(Preconditioner):
    """Approximate inverse of ``diag(C+M+B, C+M+B)`` for the split system.

    In ``precond`` mode each half is solved by PCG (at most 20 iterations,
    relative tolerance 1e-2) preconditioned by HX, so the operator changes
    between applications and needs a flexible outer solver.  ``cg_iterations``
    accumulates the inner iteration counts of the two halves.
    """

    def __init__(self, hx: HxOperator, mode: str = "precond", inner_max_iter=INNER_MAX_ITER, inner_rtol=INNER_RTOL):
        super().__init__()
        if mode not in ("precond", "solver"):
            raise ValueError(f"unknown HX mode {mode!r}")
        self.hx = hx
        self.mode = mode
        self.inner_max_iter = inner_max_iter
        self.inner_rtol = inner_rtol
        self.cg_iterations = [0, 0]
        self.report.update(mode=mode, aux=hx.aux, setup_time=hx.setup_time)

    def _solve_half(self, r, which):
        if self.mode == "solver":
            return self.hx.apply(r)
        x, rep = pcg(self.hx.block_matrix, r, self.hx.apply, rtol=self.inner_rtol, max_iter=self.inner_max_iter)
        self.cg_iterations[which] += rep.iterations
        return x

    def apply(self, r):
        r = np.asarray(r)
        n = self.hx.n
        if r.shape[0] != 2 * n:
            raise ValueError(f"expected a split vector of length {2 * n}")
        return np.concatenate([self._solve_half(r[:n], 0), self._solve_half(r[n:], 1)])
