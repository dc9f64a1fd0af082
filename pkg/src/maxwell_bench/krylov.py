"""GMRES, flexible GMRES and preconditioned CG.

All three start from a zero initial guess and work for real or complex
operators.  Operators and preconditioners may be sparse matrices, dense
arrays, ``LinearOperator`` objects or plain callables ``r -> z``.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

__all__ = [
    "KrylovConfig",
    "SolveReport",
    "IndefiniteError",
    "as_operator",
    "gmres",
    "fgmres",
    "pcg",
    "write_residual_history",
]

BREAKDOWN_TOL = 1e-14
REORTH_TOL = 1e-8


class IndefiniteError(ArithmeticError):
    """CG met a search direction with nonpositive curvature."""


@dataclass(frozen=True)
class KrylovConfig:
    rtol: float = 1e-8
    max_iter: int = 1000
    restart: Optional[int] = None
    # Left preconditioning monitors the preconditioned residual; when set, the
    # iteration only stops once the true residual also meets rtol.
    check_true_residual: bool = True

    def __post_init__(self):
        if not self.rtol > 0:
            raise ValueError("rtol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart must be positive")


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    residual_history: list
    final_true_residual: float
    setup_time: float = 0.0
    solve_time: float = 0.0
    extra: dict = field(default_factory=dict)


def as_operator(A):
    if A is None:
        return None
    if hasattr(A, "shape") and not callable(A):
        return lambda x: A @ x
    if hasattr(A, "matvec"):
        return A.matvec
    if callable(A):
        return A
    raise TypeError(f"cannot use {type(A).__name__} as a linear operator")


def _rel_residual(matvec, b, x, bnorm):
    r = np.linalg.norm(b - matvec(x))
    return r / bnorm if bnorm > 0 else r


def _givens(a, b):
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, 1.0
    denom = np.hypot(abs(a), abs(b))
    return abs(a) / denom, (a / abs(a)) * np.conj(b) / denom


def _arnoldi_cycle(matvec, r0, precond, left, flexible, m, dtype, monitor_scale, history, test_stop):
    """One GMRES cycle of at most ``m`` steps from residual ``r0``.

    Returns ``(dx, steps, status)``.  ``test_stop(monitored, dx_fn)`` sees
    every monitored residual and decides convergence.
    """
    n = r0.shape[0]
    beta = np.linalg.norm(r0)
    V = np.zeros((n, m + 1), dtype=dtype)
    Z = np.zeros((n, m), dtype=dtype) if flexible else None
    H = np.zeros((m + 1, m), dtype=dtype)
    cs = np.zeros(m, dtype=float)
    sn = np.zeros(m, dtype=dtype)
    g = np.zeros(m + 1, dtype=dtype)
    g[0] = beta
    V[:, 0] = r0 / beta

    def update(j):
        y = scipy.linalg.solve_triangular(H[: j + 1, : j + 1], g[: j + 1])
        return (Z[:, : j + 1] if flexible else V[:, : j + 1]) @ y

    for j in range(m):
        if flexible:
            Z[:, j] = precond(V[:, j])
            w = matvec(Z[:, j])
        else:
            w = matvec(V[:, j])
            if left and precond is not None:
                w = precond(w)
        w = np.asarray(w)
        if np.iscomplexobj(w) and not np.iscomplexobj(V):
            raise _NeedComplex
        w = w.astype(dtype, copy=False)
        wnorm0 = np.linalg.norm(w)
        # modified Gram-Schmidt
        for i in range(j + 1):
            h = np.vdot(V[:, i], w)
            H[i, j] = h
            w = w - h * V[:, i]
        wnorm = np.linalg.norm(w)
        c = V[:, : j + 1].conj().T @ w
        if wnorm > 0 and np.max(np.abs(c)) > REORTH_TOL * wnorm:
            w = w - V[:, : j + 1] @ c
            H[: j + 1, j] += c
            wnorm = np.linalg.norm(w)
        H[j + 1, j] = wnorm
        breakdown = wnorm <= BREAKDOWN_TOL * max(wnorm0, np.finfo(float).tiny)
        if not breakdown:
            V[:, j + 1] = w / wnorm

        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
        H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
        H[j + 1, j] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]

        history.append(abs(g[j + 1]) * monitor_scale)
        if breakdown:
            return update(j), j + 1, "breakdown"
        if test_stop(history[-1], lambda: update(j)):
            return update(j), j + 1, "converged"
        if test_stop.exhausted():
            return update(j), j + 1, "maxiter"
    return update(m - 1), m, "restart"


class _NeedComplex(Exception):
    """A real-valued run met a complex operator or preconditioner."""


class _StopTest:
    def __init__(self, cfg, matvec, b, x0_fn, bnorm, check_true):
        self.cfg = cfg
        self.matvec = matvec
        self.b = b
        self.x0_fn = x0_fn
        self.bnorm = bnorm
        self.check_true = check_true
        self.count = 0

    def __call__(self, monitored, dx_fn):
        self.count += 1
        if monitored > self.cfg.rtol:
            return False
        if not self.check_true:
            return True
        x = self.x0_fn() + dx_fn()
        return _rel_residual(self.matvec, self.b, x, self.bnorm) <= self.cfg.rtol

    def exhausted(self):
        return self.count >= self.cfg.max_iter


def _gmres_driver(A, b, precond, cfg, flexible):
    b = np.asarray(b)
    dtype = np.result_type(b.dtype, getattr(A, "dtype", np.float64), np.float64)
    try:
        return _gmres_run(A, b, precond, cfg, flexible, dtype)
    except _NeedComplex:
        return _gmres_run(A, b, precond, cfg, flexible, np.complex128)


def _gmres_run(A, b, precond, cfg, flexible, dtype):
    t0 = time.perf_counter()
    matvec = as_operator(A)
    M = as_operator(precond)
    x = np.zeros(b.shape[0], dtype=dtype)
    bnorm = np.linalg.norm(b)
    left = not flexible and M is not None
    if bnorm == 0:
        return x, SolveReport(0, True, [0.0], 0.0, solve_time=time.perf_counter() - t0)

    r0 = np.asarray(M(b) if left else b)
    if np.iscomplexobj(r0) and not np.issubdtype(dtype, np.complexfloating):
        raise _NeedComplex
    r0 = r0.astype(dtype)
    ref = np.linalg.norm(r0)
    history = [1.0]
    stop = _StopTest(cfg, matvec, b, lambda: x, bnorm, check_true=cfg.check_true_residual)
    m_cycle = cfg.restart or cfg.max_iter
    status = "maxiter"
    r = r0
    while True:
        m = min(m_cycle, cfg.max_iter - stop.count)
        dx, _, status = _arnoldi_cycle(
            matvec, r, M, left, flexible, m, dtype, 1.0 / ref, history, stop
        )
        x = x + dx
        if status != "restart" or stop.exhausted():
            break
        r = b - matvec(x)
        if left:
            r = M(r)
        if np.linalg.norm(r) == 0:
            status = "breakdown"
            break
    true_res = _rel_residual(matvec, b, x, bnorm)
    if cfg.check_true_residual:
        converged = true_res <= cfg.rtol
    else:
        # a breakdown means the Krylov space is invariant: the iterate is exact
        converged = status in ("converged", "breakdown")
    report = SolveReport(
        iterations=len(history) - 1,
        converged=bool(converged),
        residual_history=history,
        final_true_residual=float(true_res),
        solve_time=time.perf_counter() - t0,
    )
    return x, report


def gmres(A, b, precond=None, cfg: KrylovConfig = KrylovConfig()):
    """Left-preconditioned GMRES, modified Gram-Schmidt Arnoldi.

    With a preconditioner the monitored quantity is
    ``||M^{-1}(b - Ax)|| / ||M^{-1} b||``; otherwise it is the true relative
    residual.  Returns ``(x, SolveReport)``.
    """
    return _gmres_driver(A, b, precond, cfg, flexible=False)


def fgmres(A, b, precond=None, cfg: KrylovConfig = KrylovConfig()):
    """Right-preconditioned flexible GMRES.

    The preconditioner may change from one application to the next (an
    inner iterative solve, say); every preconditioned direction is stored.
    """
    if precond is None:
        precond = lambda r: r  # noqa: E731
    return _gmres_driver(A, b, precond, cfg, flexible=True)


def pcg(A, b, precond=None, rtol: float = 1e-2, max_iter: int = 20):
    """Preconditioned conjugate gradient for SPD ``A`` and ``precond``.

    Stops when ``||z_k|| / ||z_0||`` (preconditioned residual) reaches
    ``rtol`` or after ``max_iter`` iterations, and returns the iterate with
    the smallest monitored residual.
    """
    t0 = time.perf_counter()
    matvec = as_operator(A)
    M = as_operator(precond) or (lambda r: r)
    b = np.asarray(b)
    x = np.zeros_like(b, dtype=np.result_type(b.dtype, np.float64))
    r = b.astype(x.dtype, copy=True)
    z = M(r)
    z0 = np.linalg.norm(z)
    history = [1.0]
    if z0 == 0:
        return x, SolveReport(0, True, [0.0], 0.0, solve_time=time.perf_counter() - t0)
    rz = np.vdot(r, z).real
    if rz <= 0:
        raise IndefiniteError("preconditioner is not positive definite")
    p = z.copy()
    best_x, best = x.copy(), 1.0
    converged = False
    for _ in range(max_iter):
        Ap = matvec(p)
        curv = np.vdot(p, Ap).real
        if curv <= 0:
            raise IndefiniteError(f"nonpositive curvature {curv:.3e}")
        alpha = rz / curv
        x = x + alpha * p
        r = r - alpha * Ap
        z = M(r)
        res = np.linalg.norm(z) / z0
        history.append(res)
        if res < best:
            best, best_x = res, x.copy()
        if res <= rtol:
            converged = True
            break
        rz_new = np.vdot(r, z).real
        if rz_new <= 0:
            raise IndefiniteError("preconditioner is not positive definite")
        p = z + (rz_new / rz) * p
        rz = rz_new
    bnorm = np.linalg.norm(b)
    report = SolveReport(
        iterations=len(history) - 1,
        converged=converged,
        residual_history=history,
        final_true_residual=float(_rel_residual(matvec, b, best_x, bnorm)),
        solve_time=time.perf_counter() - t0,
    )
    return best_x, report


def write_residual_history(report: SolveReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual"])
        for i, r in enumerate(report.residual_history):
            w.writerow([i, repr(float(r))])
