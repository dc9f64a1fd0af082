import csv

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_bench.krylov import IndefiniteError, KrylovConfig, fgmres, gmres, pcg, write_residual_history
from maxwell_bench.sparsekit import sparse_cholesky, sparse_lu
from maxwell_bench.systems import build_complex, build_split


def random_nonsymmetric(n, seed, complex_=False):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) / np.sqrt(n) + 3 * np.eye(n)
    if complex_:
        A = A + 1j * rng.standard_normal((n, n)) / np.sqrt(n)
    return A, rng.standard_normal(n)


def test_config_validation():
    with pytest.raises(ValueError):
        KrylovConfig(rtol=0)
    with pytest.raises(ValueError):
        KrylovConfig(max_iter=0)


def test_gmres_identity_one_iteration():
    x, rep = gmres(np.eye(5), np.arange(1.0, 6.0))
    assert rep.iterations == 1 and rep.converged
    assert np.allclose(x, np.arange(1.0, 6.0))


def test_gmres_two_eigenvalues():
    x, rep = gmres(np.diag([1.0, 2.0]), np.ones(2))
    assert rep.iterations <= 2 and rep.converged
    assert np.allclose(x, [1, 0.5])


@pytest.mark.parametrize("complex_", [False, True])
def test_gmres_exact_preconditioner(complex_):
    A, b = random_nonsymmetric(50, 1, complex_)
    lu = sparse_lu(sp.csr_matrix(A))
    x, rep = gmres(A, b, lu.solve)
    assert rep.iterations <= 2 and rep.converged
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-8


def test_fgmres_exact_preconditioner_one_iteration(problem_n4):
    cs = build_complex(problem_n4)
    lu = sparse_lu(cs.A)
    _, rep = fgmres(cs.A, cs.b, lu.solve)
    assert rep.iterations == 1 and rep.converged


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**31 - 1), st.booleans())
def test_gmres_history_monotone_and_true_residual(n, seed, complex_):
    A, b = random_nonsymmetric(n, seed, complex_)
    x, rep = gmres(A, b, cfg=KrylovConfig(rtol=1e-10, max_iter=200))
    h = np.array(rep.residual_history)
    assert np.all(np.diff(h) <= 1e-14)
    assert rep.iterations == len(h) - 1
    assert rep.converged
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) <= 1e-10


def test_gmres_left_preconditioned_reports_true_residual():
    A, b = random_nonsymmetric(80, 4)
    D = np.diag(1.0 / np.diag(A))
    x, rep = gmres(A, b, lambda r: D @ r, KrylovConfig(rtol=1e-8))
    assert rep.converged
    assert rep.final_true_residual <= 1e-8
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) == pytest.approx(rep.final_true_residual)


def test_gmres_maxiter_flags_nonconvergence():
    A, b = random_nonsymmetric(100, 7)
    _, rep = gmres(A, b, cfg=KrylovConfig(max_iter=3))
    assert not rep.converged
    assert rep.iterations == 3
    assert rep.final_true_residual > 1e-8


def test_gmres_restart_still_converges():
    A, b = random_nonsymmetric(60, 2)
    x, rep = gmres(A, b, cfg=KrylovConfig(restart=10, max_iter=500))
    assert rep.converged and rep.iterations > 10
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) <= 1e-8


def test_zero_rhs_returns_zero():
    x, rep = gmres(np.eye(3), np.zeros(3))
    assert rep.converged and rep.iterations == 0 and not x.any()


def test_fgmres_identity_matches_gmres():
    A, b = random_nonsymmetric(40, 3)
    x1, r1 = gmres(A, b)
    x2, r2 = fgmres(A, b, lambda r: r)
    assert r1.iterations == r2.iterations
    assert np.linalg.norm(x1 - x2) <= 1e-12 * np.linalg.norm(x1)


def test_fgmres_varying_preconditioner_converges():
    rng = np.random.default_rng(0)
    Q = rng.standard_normal((20, 20))
    A = Q @ Q.T + 20 * np.eye(20)
    b = rng.standard_normal(20)
    P1 = np.linalg.inv(np.diag(np.diag(A)))
    P2 = np.linalg.inv(A + 5 * np.eye(20))
    choice = np.random.default_rng(1)

    def varying(r):
        return (P1 if choice.random() < 0.5 else P2) @ r

    x, rep = fgmres(A, b, varying, KrylovConfig(rtol=1e-10))
    assert rep.converged
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) <= 1e-10


def test_fgmres_monitored_matches_true_residual():
    A, b = random_nonsymmetric(50, 9)
    D = np.diag(1.0 / np.diag(A))
    x, rep = fgmres(A, b, lambda r: D @ r, KrylovConfig(rtol=1e-8, check_true_residual=False))
    true = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
    assert abs(true - rep.residual_history[-1]) <= 1e-10 * max(true, 1e-8) + 1e-15


def test_breakdown_counts_as_converged():
    # b lies in a 2-dimensional invariant subspace
    A = np.diag([1.0, 2.0, 3.0, 4.0])
    b = np.array([1.0, 1.0, 0.0, 0.0])
    x, rep = gmres(A, b, cfg=KrylovConfig(rtol=1e-14, check_true_residual=False))
    assert rep.converged and rep.iterations == 2
    assert np.allclose(x, [1, 0.5, 0, 0])


def test_split_system_gmres_with_lu(problem_n4):
    ss = build_split(problem_n4)
    lu = sparse_lu(ss.A_hat)
    x, rep = gmres(ss.A_hat, ss.rhs, lu.solve)
    assert rep.converged and rep.iterations <= 2


def test_deterministic_iterations():
    A, b = random_nonsymmetric(70, 11, True)
    r1 = gmres(A, b)[1]
    r2 = gmres(A, b)[1]
    assert r1.iterations == r2.iterations and r1.residual_history == r2.residual_history


# ---------------------------------------------------------------- PCG


def test_pcg_identity():
    x, rep = pcg(np.eye(4), np.ones(4), rtol=1e-12)
    assert rep.iterations == 1 and np.allclose(x, 1)


def test_pcg_two_eigenvalues():
    _, rep = pcg(np.diag([1.0, 4.0]), np.ones(2), rtol=1e-12)
    assert rep.iterations <= 2 and rep.converged


def test_pcg_exact_cholesky_preconditioner(problem_n4):
    A = (problem_n4.C + problem_n4.M + problem_n4.B).tocsr()
    chol = sparse_cholesky(A)
    b = np.ones(A.shape[0])
    x, rep = pcg(A, b, chol.solve, rtol=1e-10)
    assert rep.iterations == 1
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-10


def test_pcg_indefinite_raises():
    with pytest.raises(IndefiniteError):
        pcg(np.diag([1.0, -1.0]), np.array([0.1, 1.0]), rtol=1e-12)


def test_pcg_indefinite_preconditioner_raises():
    with pytest.raises(IndefiniteError):
        pcg(np.eye(2), np.array([1.0, 0.0]), lambda r: -r)


def test_pcg_caps_iterations_and_returns_best():
    rng = np.random.default_rng(2)
    Q = rng.standard_normal((200, 200))
    A = Q @ Q.T + 1e-3 * np.eye(200)
    b = rng.standard_normal(200)
    x, rep = pcg(A, b, rtol=1e-14, max_iter=20)
    assert rep.iterations == 20 and not rep.converged
    assert min(rep.residual_history) == pytest.approx(
        np.linalg.norm(b - A @ x) / np.linalg.norm(b), rel=1e-8
    )


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 50), st.integers(0, 2**31 - 1))
def test_pcg_spd_random(n, seed):
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    A = Q @ Q.T + n * np.eye(n)
    b = rng.standard_normal(n)
    x, rep = pcg(A, b, lambda r: r / np.diag(A), rtol=1e-10, max_iter=10 * n)
    assert rep.converged
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-8


def test_residual_history_csv(tmp_path):
    _, rep = gmres(np.diag([1.0, 2.0, 3.0]), np.ones(3))
    path = tmp_path / "hist.csv"
    write_residual_history(rep, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["iteration", "residual"]
    assert [float(r[1]) for r in rows[1:]] == rep.residual_history
