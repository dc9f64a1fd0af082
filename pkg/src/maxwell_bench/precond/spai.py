"""Sparse approximate inverse in the style of ParaSails.

The pattern of ``H`` is the ``m``-th power of a thresholded pattern of ``A``;
each column of ``H`` is then the least-squares minimizer of
``||e_j - A h_j||_2`` over that column's pattern, which minimizes
``||I - A H||_F`` column by column.  A relative post-filter drops small
entries afterwards.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..sparsekit import as_csr
from .base import Preconditioner


@dataclass(frozen=True)
class SpaiConfig:
    thresh: float = 0.0
    filter: float = 0.0
    m: int = 3

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("pattern power m must be at least 1")
        if self.thresh < 0 or self.filter < 0:
            raise ValueError("thresh and filter must be nonnegative")


def _bool_pattern(rows, cols, shape):
    P = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=shape)
    P.sum_duplicates()
    P.data[:] = 1
    return P


def sparsify_pattern(A, thresh: float) -> sp.csr_matrix:
    """Pattern of ``|D^-1/2 A D^-1/2| >= thresh`` plus the diagonal."""
    A = sp.coo_matrix(A)
    d = np.abs(A.diagonal()).astype(float)
    d[d == 0] = 1.0
    s = 1.0 / np.sqrt(d)
    scaled = np.abs(A.data) * s[A.row] * s[A.col]
    keep = scaled >= thresh
    n = A.shape[0]
    rows = np.concatenate([A.row[keep], np.arange(n)])
    cols = np.concatenate([A.col[keep], np.arange(n)])
    return _bool_pattern(rows, cols, A.shape)


def pattern_power(P, m: int) -> sp.csr_matrix:
    """Vertices reachable in at most ``m`` steps (boolean matrix power)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    P = sp.csr_matrix(P, dtype=np.int64, copy=True)
    P.data[:] = 1
    P = (P + sp.identity(P.shape[0], dtype=np.int64, format="csr")).tocsr()
    P.data[:] = 1
    out = P
    for _ in range(m - 1):
        out = (out @ P).tocsr()
        out.data[:] = 1
    out = sp.csr_matrix(out, dtype=np.int8)
    out.sort_indices()
    return out


def frobenius_fit(A, pattern) -> sp.csr_matrix:
    """Column-wise least squares ``min ||e_j - A h_j||`` on ``pattern``.

    Rank-deficient local problems get the minimum-norm solution.
    """
    A = sp.csc_matrix(A)
    A.sort_indices()
    Pc = sp.csc_matrix(pattern)
    Pc.sort_indices()
    n = A.shape[0]
    local_row = np.full(n, -1, dtype=np.int64)
    rows_out, cols_out, vals_out = [], [], []
    for j in range(n):
        J = Pc.indices[Pc.indptr[j]:Pc.indptr[j + 1]]
        if len(J) == 0:
            raise ValueError(f"pattern column {j} is empty")
        sub = A[:, J]
        I = np.unique(sub.indices)
        if len(I) == 0:
            continue
        local_row[I] = np.arange(len(I))
        dense = np.zeros((len(I), len(J)), dtype=A.dtype)
        cidx = np.repeat(np.arange(len(J)), np.diff(sub.indptr))
        dense[local_row[sub.indices], cidx] = sub.data
        rhs = np.zeros(len(I), dtype=A.dtype)
        if local_row[j] >= 0:
            rhs[local_row[j]] = 1.0
        h, *_ = scipy.linalg.lstsq(dense, rhs, lapack_driver="gelsy", check_finite=False)
        local_row[I] = -1
        rows_out.append(J)
        cols_out.append(np.full(len(J), j))
        vals_out.append(h)
    H = sp.csc_matrix(
        (np.concatenate(vals_out), (np.concatenate(rows_out), np.concatenate(cols_out))),
        shape=A.shape,
    )
    return H.tocsr()


def post_filter(H, filter: float) -> sp.csr_matrix:
    """Drop ``|h_ij| < filter * max_i |h_ij|`` per column; keep the diagonal."""
    H = sp.coo_matrix(H)
    if filter == 0:
        return H.tocsr()
    colmax = np.zeros(H.shape[1])
    np.maximum.at(colmax, H.col, np.abs(H.data))
    keep = (np.abs(H.data) >= filter * colmax[H.col]) | (H.row == H.col)
    out = sp.csr_matrix((H.data[keep], (H.row[keep], H.col[keep])), shape=H.shape)
    out.sort_indices()
    return out


class SpaiPreconditioner(Preconditioner):
    def __init__(self, H, cfg):
        super().__init__()
        self.H = H
        self.cfg = cfg

    def apply(self, r):
        return self.H @ r


def build_spai(A, cfg: SpaiConfig = SpaiConfig()) -> SpaiPreconditioner:
    t0 = time.perf_counter()
    A = as_csr(A)
    pattern = pattern_power(sparsify_pattern(A, cfg.thresh), cfg.m)
    H = post_filter(frobenius_fit(A, pattern), cfg.filter)
    pre = SpaiPreconditioner(H, cfg)
    pre.report.update(
        thresh=cfg.thresh,
        filter=cfg.filter,
        m=cfg.m,
        pattern_nnz=int(pattern.nnz),
        nnz=int(H.nnz),
        nnz_ratio=H.nnz / A.nnz,
        setup_time=time.perf_counter() - t0,
    )
    return pre
