"""Block low-rank LU factorization.

The matrix is reordered (reverse Cuthill-McKee), cut into contiguous blocks
of ``block_size`` rows, and factored with a right-looking blocked LU.  Each
off-diagonal factor block is compressed by truncated SVD at relative
accuracy ``epsilon`` right after it is computed (it has received all its
updates by then); diagonal blocks stay dense and are factored with partial
pivoting inside the block.  ``epsilon = 0`` disables compression and gives a
full-rank blocked LU.
"""
from __future__ import annotations

import csv
import time
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..krylov import KrylovConfig, fgmres
from ..sparsekit import LowRankBlock, SingularMatrixError, as_csr, rcm_ordering, truncated_svd
from .base import Preconditioner

PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class BlrConfig:
    epsilon: float = 0.0
    block_size: int = 64

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.block_size < 8:
            raise ValueError("block_size must be at least 8")


def _matmul(a, b):
    if isinstance(a, LowRankBlock):
        if isinstance(b, LowRankBlock):
            return a.left @ ((a.right @ b.left) @ b.right)
        return a.left @ (a.right @ b)
    if isinstance(b, LowRankBlock):
        return (a @ b.left) @ b.right
    return a @ b


def _symbolic(Ap, bounds):
    """Block pattern of the LU factors (no pivoting across blocks)."""
    owner = np.repeat(np.arange(len(bounds) - 1), np.diff(bounds))
    C = Ap.tocoo()
    keys = np.unique(owner[C.row].astype(np.int64) * len(bounds) + owner[C.col])
    nb = len(bounds) - 1
    lower = [set() for _ in range(nb)]  # lower[k]: block rows i > k with (i, k)
    upper = [set() for _ in range(nb)]  # upper[k]: block cols j > k with (k, j)
    for key in keys:
        i, j = divmod(int(key), len(bounds))
        if i > j:
            lower[j].add(i)
        elif j > i:
            upper[i].add(j)
    for k in range(nb):
        for i in lower[k]:
            for j in upper[k]:
                if i > j:
                    lower[j].add(i)
                elif j > i:
                    upper[i].add(j)
    return [sorted(s) for s in lower], [sorted(s) for s in upper]


class BlrFactor(Preconditioner):
    """``P A[perm][:, perm] = L U`` with block-diagonal row permutation ``P``."""

    def __init__(self, A, cfg: BlrConfig = BlrConfig()):
        super().__init__()
        t0 = time.perf_counter()
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        self.cfg = cfg
        self.n = n = A.shape[0]
        self.dtype = np.result_type(A.dtype, np.float64)
        self.permutation = rcm_ordering(A)
        Ap = A[self.permutation][:, self.permutation].tocsr()
        bs = cfg.block_size
        self.bounds = np.append(np.arange(0, n, bs), n)
        nb = len(self.bounds) - 1
        lower, upper = _symbolic(Ap, self.bounds)

        # working storage: dense blocks of the envelope, filled lazily
        work = {}
        coo = Ap.tocoo()
        owner = np.repeat(np.arange(nb), np.diff(self.bounds))
        bi, bj = owner[coo.row], owner[coo.col]
        order = np.lexsort((bj, bi))
        bi, bj = bi[order], bj[order]
        rows, cols, vals = coo.row[order], coo.col[order], coo.data[order]
        cuts = np.flatnonzero(np.diff(bi * nb + bj)) + 1
        for seg in np.split(np.arange(len(bi)), cuts):
            if not len(seg):
                continue
            i, j = int(bi[seg[0]]), int(bj[seg[0]])
            blk = np.zeros((self.bounds[i + 1] - self.bounds[i], self.bounds[j + 1] - self.bounds[j]), self.dtype)
            blk[rows[seg] - self.bounds[i], cols[seg] - self.bounds[j]] = vals[seg]
            work[i, j] = blk

        def take(i, j):
            blk = work.pop((i, j), None)
            if blk is None:
                blk = np.zeros((self.bounds[i + 1] - self.bounds[i], self.bounds[j + 1] - self.bounds[j]), self.dtype)
            return blk

        self.diag_lu = []
        self.row_perm = []
        self.L = {}
        self.U = {}
        eps = cfg.epsilon
        for k in range(nb):
            Akk = take(k, k)
            with warnings.catch_warnings():
                # singularity is detected below with a relative pivot test
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(Akk, check_finite=False)
            d = np.abs(np.diagonal(lu))
            scale = np.abs(Akk).max() if Akk.size else 0.0
            if scale == 0 or d.min() < PIVOT_RTOL * scale:
                raise SingularMatrixError(f"diagonal block {k} is singular", row=int(self.bounds[k]))
            perm = np.arange(len(piv))
            for a, b in enumerate(piv):
                perm[a], perm[b] = perm[b], perm[a]
            self.diag_lu.append(lu)
            self.row_perm.append(perm)
            for i in range(k):
                if (k, i) in self.L:
                    blk = self.L[k, i]
                    self.L[k, i] = (
                        LowRankBlock(blk.left[perm], blk.right) if isinstance(blk, LowRankBlock) else blk[perm]
                    )
            for j in upper[k]:
                Ukj = scipy.linalg.solve_triangular(
                    lu, take(k, j)[perm], lower=True, unit_diagonal=True, check_finite=False
                )
                self.U[k, j] = self._compress(Ukj, eps)
            for i in lower[k]:
                # L_ik = A_ik U_kk^{-1}
                Lik = scipy.linalg.solve_triangular(lu, take(i, k).T, trans="T", lower=False, check_finite=False).T
                self.L[i, k] = self._compress(Lik, eps)
            for i in lower[k]:
                Lik = self.L[i, k]
                for j in upper[k]:
                    upd = _matmul(Lik, self.U[k, j])
                    if (i, j) in work:
                        work[i, j] -= upd
                    else:
                        work[i, j] = -upd
        # row i's L blocks, for forward substitution
        self._L_by_row = [[] for _ in range(nb)]
        for (i, k) in sorted(self.L):
            self._L_by_row[i].append(k)
        self._U_by_row = [[] for _ in range(nb)]
        for (k, j) in sorted(self.U):
            self._U_by_row[k].append(j)
        self._stats()
        self.report.update(setup_time=time.perf_counter() - t0)

    @staticmethod
    def _compress(block, eps):
        if eps == 0:
            return block
        lr = truncated_svd(block, eps)
        return lr if lr.size < block.size else block

    def _stats(self):
        fr = sum(lu.size for lu in self.diag_lu)
        blr = fr
        ranks = Counter()
        for blk in list(self.L.values()) + list(self.U.values()):
            m, n = blk.shape
            fr += m * n
            blr += blk.size
            ranks[blk.rank if isinstance(blk, LowRankBlock) else "dense"] += 1
        self.stored_entries_fr = fr
        self.stored_entries_blr = blr
        self.rank_histogram = dict(ranks)
        self.report.update(
            epsilon=self.cfg.epsilon,
            block_size=self.cfg.block_size,
            n_blocks=len(self.diag_lu),
            stored_entries_fr=fr,
            stored_entries_blr=blr,
            compression_ratio=self.compression_ratio,
        )

    @property
    def compression_ratio(self) -> float:
        return self.stored_entries_fr / self.stored_entries_blr

    def solve(self, b):
        b = np.asarray(b)
        if b.shape[0] != self.n:
            raise ValueError("right-hand side has wrong length")
        bp = b[self.permutation].astype(np.result_type(b.dtype, self.dtype))
        bounds = self.bounds
        nb = len(self.diag_lu)
        y = [None] * nb
        for k in range(nb):
            rk = bp[bounds[k]:bounds[k + 1]][self.row_perm[k]]
            for i in self._L_by_row[k]:
                rk = rk - self.L[k, i] @ y[i]
            y[k] = scipy.linalg.solve_triangular(
                self.diag_lu[k], rk, lower=True, unit_diagonal=True, check_finite=False
            )
        x = [None] * nb
        for k in reversed(range(nb)):
            rk = y[k]
            for j in self._U_by_row[k]:
                rk = rk - self.U[k, j] @ x[j]
            x[k] = scipy.linalg.solve_triangular(self.diag_lu[k], rk, lower=False, check_finite=False)
        out = np.empty_like(bp)
        out[self.permutation] = np.concatenate(x)
        return out

    apply = solve

    def stats_rows(self):
        rows = [("epsilon", self.cfg.epsilon), ("block_size", self.cfg.block_size)]
        rows += [("stored_entries_fr", self.stored_entries_fr), ("stored_entries_blr", self.stored_entries_blr)]
        rows += [("compression_ratio", self.compression_ratio)]
        dense = self.rank_histogram.get("dense", 0)
        for rank in sorted(r for r in self.rank_histogram if r != "dense"):
            rows.append((f"blocks_rank_{rank}", self.rank_histogram[rank]))
        rows.append(("blocks_dense", dense))
        return rows

    def write_stats(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "value"])
            w.writerows(self.stats_rows())


def blr_factor(A, cfg: BlrConfig = BlrConfig()) -> BlrFactor:
    return BlrFactor(A, cfg)


def blr_solve(f: BlrFactor, b):
    return f.solve(b)


def blr_preconditioned_solve(A, b, cfg: BlrConfig = BlrConfig(), krylov_cfg: KrylovConfig = KrylovConfig()):
    """FGMRES right-preconditioned by a BLR factorization of ``A``.

    Returns ``(x, report, compression_ratio)``.
    """
    f = blr_factor(A, cfg)
    x, rep = fgmres(A, b, f.solve, krylov_cfg)
    rep.setup_time = f.report["setup_time"]
    rep.extra.update(compression_ratio=f.compression_ratio)
    return x, rep, f.compression_ratio
