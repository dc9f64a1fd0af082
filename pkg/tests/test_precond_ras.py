import csv

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_bench.krylov import KrylovConfig, gmres
from maxwell_bench.precond import RasConfig, build_ras
from maxwell_bench.precond.ras import RasPreconditioner, grow_overlap, partition_graph
from maxwell_bench.sparsekit import SingularMatrixError
from maxwell_bench.systems import build_complex


def path_matrix(n):
    return sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n), format="csr")


@pytest.fixture(scope="module")
def complex4(problem_n4):
    return build_complex(problem_n4)


def test_config_validation():
    with pytest.raises(ValueError):
        RasConfig(n_subdomains=0)
    with pytest.raises(ValueError):
        RasConfig(overlap=-1)


def test_single_part_is_everything():
    (part,) = partition_graph(path_matrix(7), 1)
    assert np.array_equal(part, np.arange(7))


def test_path_graph_two_parts():
    parts = partition_graph(path_matrix(4), 2)
    assert [p.tolist() for p in parts] == [[0, 1], [2, 3]]


def test_too_many_parts_rejected():
    with pytest.raises(ValueError):
        partition_graph(path_matrix(3), 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(1, 12), st.floats(0.02, 0.3), st.integers(0, 2**31 - 1))
def test_partition_is_disjoint_balanced_cover(n, N, density, seed):
    N = min(N, n)
    A = sp.random(n, n, density=density, random_state=np.random.default_rng(seed), format="csr")
    parts = partition_graph(A, N)
    allv = np.concatenate(parts)
    assert np.array_equal(np.sort(allv), np.arange(n))
    sizes = [len(p) for p in parts]
    assert max(sizes) - min(sizes) <= 1


def test_overlap_zero_is_core():
    A = path_matrix(6)
    core = partition_graph(A, 3)
    assert all(np.array_equal(a, b) for a, b in zip(grow_overlap(A, core, 0), core))


def test_path_overlap_one_layer():
    A = path_matrix(4)
    over = grow_overlap(A, [np.array([0, 1]), np.array([2, 3])], 1)
    assert over[0].tolist() == [0, 1, 2] and over[1].tolist() == [1, 2, 3]


def test_large_overlap_saturates(complex4):
    core = partition_graph(complex4.A, 4)
    over = grow_overlap(complex4.A, core, 50)
    assert all(len(v) == complex4.n for v in over)


def test_overlap_contains_core_and_grows(complex4):
    core = partition_graph(complex4.A, 4)
    prev = core
    for d in (1, 2, 3):
        cur = grow_overlap(complex4.A, core, d)
        for c, p, v in zip(core, prev, cur):
            assert set(c) <= set(p) <= set(v)
        prev = cur


def test_restriction_identity(complex4):
    pre = build_ras(complex4.A, RasConfig(4, 2))
    counts = np.zeros(complex4.n, dtype=int)
    for c in pre.core_sets:
        counts[c] += 1
    assert np.all(counts == 1)
    assert np.array_equal(np.sort(pre.owner()), np.sort(np.repeat(np.arange(4), [len(c) for c in pre.core_sets])))


def test_one_subdomain_is_exact_inverse(complex4):
    for d in (0, 2):
        pre = build_ras(complex4.A, RasConfig(1, d))
        x, rep = gmres(complex4.A, complex4.b, pre)
        assert rep.converged and rep.iterations <= 2


def test_block_diagonal_no_overlap_is_exact():
    rng = np.random.default_rng(0)
    blocks = [rng.standard_normal((5, 5)) + 5 * np.eye(5) for _ in range(3)]
    A = sp.block_diag(blocks, format="csr")
    pre = RasPreconditioner(A, [np.arange(5 * i, 5 * i + 5) for i in range(3)], [np.arange(5 * i, 5 * i + 5) for i in range(3)])
    r = rng.standard_normal(15)
    assert np.allclose(A @ pre(r), r, atol=1e-12)


def test_scatter_only_at_core_rows():
    A = path_matrix(6)
    core = [np.arange(3), np.arange(3, 6)]
    pre = RasPreconditioner(A, core, grow_overlap(A, core, 1))
    r = np.zeros(6)
    r[3] = 1.0
    z = pre(r)
    # subdomain 0 sees r[3] through its overlap, but writes only rows 0..2
    local = np.linalg.solve(A[:4, :4].toarray(), r[:4])
    assert np.allclose(z[:3], local[:3])


def test_apply_is_linear(complex4):
    pre = build_ras(complex4.A, RasConfig(4, 1))
    rng = np.random.default_rng(3)
    r = rng.standard_normal(complex4.n) + 1j * rng.standard_normal(complex4.n)
    a = 2.5 - 1.5j
    z1, z2 = pre(a * r), a * pre(r)
    assert np.linalg.norm(z1 - z2) <= 1e-13 * np.linalg.norm(z2)


def test_n4_four_subdomains_overlap_two(complex4):
    _, rep = gmres(complex4.A, complex4.b, build_ras(complex4.A, RasConfig(4, 2)), KrylovConfig(max_iter=1000))
    assert rep.converged and rep.final_true_residual <= 1e-8


def test_singular_local_block_names_subdomain():
    A = sp.csr_matrix(np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1.0]]))
    with pytest.raises(SingularMatrixError, match="subdomain 1"):
        RasPreconditioner(A, [np.arange(2), np.arange(2, 4)], [np.arange(2), np.arange(2, 4)])


def test_partition_dump(tmp_path, complex4):
    pre = build_ras(complex4.A, RasConfig(3, 1))
    path = tmp_path / "part.csv"
    pre.write_partition(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["dof", "subdomain"]
    assert [int(r[1]) for r in rows[1:]] == pre.owner().tolist()


def test_deterministic(complex4):
    a = build_ras(complex4.A, RasConfig(4, 2))
    b = build_ras(complex4.A, RasConfig(4, 2))
    assert all(np.array_equal(x, y) for x, y in zip(a.overlapped_sets, b.overlapped_sets))
