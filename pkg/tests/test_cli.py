import csv
import os

import pytest

from maxwell_bench import cli
from maxwell_bench.sparsekit import read_matrix_market


def test_solve_lu_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = cli.main(["solve", "--n", "4", "--k", "1", "--solver", "lu", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["iterations"] == "direct" and float(rows[0]["true_residual"]) <= 1e-12


def test_solve_markdown_to_stdout(capsys):
    rc = cli.main(["solve", "--n", "4", "--solver", "hx:precond", "--format", "markdown", "--rtol", "1e-6"])
    out = capsys.readouterr().out
    assert rc == 0 and out.startswith("| label |") and "cg" in out


def test_nonconverged_exit_code(capsys):
    rc = cli.main(["solve", "--n", "4", "--solver", "none", "--max-iter", "2"])
    assert rc == 1
    assert ">2*" in capsys.readouterr().out


def test_bad_solver_exit_code(capsys):
    assert cli.main(["solve", "--n", "4", "--solver", "magic"]) == 2
    assert "unknown solver" in capsys.readouterr().err


def test_run_from_config(tmp_path, capsys):
    cfg = tmp_path / "cases.toml"
    cfg.write_text(
        '[krylov]\nrtol = 1e-8\nmax_iter = 500\n\n'
        '[[case]]\nk = 1.0\nn = 4\nsolver = "ras:2:1"\nlabel = "a"\n\n'
        '[[case]]\nk = 1.0\nn = 4\nsolver = "blr:0.001"\nlabel = "b"\n'
    )
    out = tmp_path / "o.csv"
    rc = cli.main(["run", "--config", str(cfg), "--out", str(out)])
    rows = list(csv.DictReader(out.open()))
    assert rc == 0 and [r["label"] for r in rows] == ["a", "b"]
    assert "compression" in rows[0]


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[[case]]\nk = 1.0\nsolver = "lu"\nwavelength = 3\n')
    assert cli.main(["run", "--config", str(cfg)]) == 2


def test_run_needs_suite_or_config():
    with pytest.raises(SystemExit):
        cli.main(["run"])


def test_export_matrices(tmp_path, capsys):
    d = tmp_path / "mm"
    assert cli.main(["export-matrices", "--n", "4", "--k", "1", "--dir", str(d)]) == 0
    names = sorted(os.listdir(d))
    assert names == sorted(f"{n}.mtx" for n in ("C", "M", "B", "G", "P_curl", "A_split", "s_R", "s_I"))
    C = read_matrix_market(d / "C.mtx")
    A = read_matrix_market(d / "A_split.mtx")
    assert A.shape == (2 * C.shape[0], 2 * C.shape[0])


def test_threads_flag_sets_environment(monkeypatch):
    for var in cli.THREAD_VARS:
        monkeypatch.delenv(var, raising=False)
    cli._cap_threads(3)
    assert all(os.environ[v] == "3" for v in cli.THREAD_VARS)
    monkeypatch.setenv("BENCH_THREADS", "2")
    cli._cap_threads(None)
    assert os.environ[cli.THREAD_VARS[0]] == "2"
