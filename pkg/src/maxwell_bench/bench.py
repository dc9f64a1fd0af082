"""Benchmark cases, suites and table output.

A case is a wavenumber, a mesh resolution and one solver string:

=====================  ==================================================
``lu``                 sparse LU on the complex system
``blr-direct:EPS``     BLR factorization used as a direct solver
``none``               unpreconditioned GMRES (split system by default)
``spai:T:F[:M]``       GMRES + sparse approximate inverse, split system
``ras:N:D``            GMRES + restricted additive Schwarz, complex system
``hx:MODE[:AUX]``      FGMRES + HX block preconditioner, split system
``blr:EPS``            FGMRES + BLR factorization, complex system
=====================  ==================================================
"""
from __future__ import annotations

import csv
import io
import math
import time
import traceback
from dataclasses import dataclass, field, replace
from typing import Optional

from .assembly import Material, assemble_problem
from .krylov import KrylovConfig, fgmres, gmres
from .mesh import MeshConfig, build_cube_mesh, points_per_wavelength_to_n
from .precond import BlrConfig, HxBlockPrecond, RasConfig, SpaiConfig, blr_factor, build_hx, build_ras, build_spai
from .sparsekit import sparse_lu
from .systems import build_complex, build_split, relative_residual

SOLVER_KINDS = ("lu", "blr-direct", "none", "spai", "ras", "hx", "blr")


@dataclass(frozen=True)
class BenchCase:
    k: float
    solver: str
    ppw: Optional[float] = 10.0
    n: Optional[int] = None  # overrides ppw when given
    scale: float = 1.0
    krylov: KrylovConfig = KrylovConfig()
    system: Optional[str] = None  # "split" or "complex"; only meaningful for "none"
    expect_converged: bool = True
    label: str = ""

    def __post_init__(self):
        parse_solver(self.solver)
        if self.n is None and self.ppw is None:
            raise ValueError("give either n or ppw")
        if self.system not in (None, "split", "complex"):
            raise ValueError(f"unknown system {self.system!r}")

    @property
    def mesh_n(self) -> int:
        if self.n is not None:
            return self.n
        return points_per_wavelength_to_n(self.k, self.ppw, self.scale)


@dataclass
class BenchResult:
    case: BenchCase
    n: int
    dofs: int
    iterations: Optional[int]
    converged: bool
    setup_time: float
    solve_time: float
    true_residual: float
    extra: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def maxed(self) -> bool:
        return self.error is None and not self.converged

    @property
    def acceptable(self) -> bool:
        if self.error is not None:
            return False
        return self.converged or not self.case.expect_converged


def parse_solver(spec: str):
    """Split ``"ras:4:2"`` into ``("ras", [4, 2])`` with typed arguments."""
    kind, *args = spec.strip().split(":")
    kind = kind.lower()
    if kind not in SOLVER_KINDS:
        raise ValueError(f"unknown solver {spec!r}")
    try:
        if kind in ("lu", "none"):
            if args:
                raise ValueError
            return kind, []
        if kind in ("blr", "blr-direct"):
            (eps,) = args
            return kind, [float(eps)]
        if kind == "spai":
            if len(args) not in (2, 3):
                raise ValueError
            return kind, [float(args[0]), float(args[1])] + [int(a) for a in args[2:]]
        if kind == "ras":
            n_sub, overlap = args
            return kind, [int(n_sub), int(overlap)]
        mode, *aux = args
        if mode not in ("precond", "solver") or len(aux) > 1:
            raise ValueError
        return kind, [mode] + aux
    except ValueError:
        raise ValueError(f"malformed solver arguments in {spec!r}") from None


def _direct(A, b, factor):
    t0 = time.perf_counter()
    f = factor(A)
    t1 = time.perf_counter()
    x = f.solve(b)
    t2 = time.perf_counter()
    return x, t1 - t0, t2 - t1, f


def run_case(case: BenchCase) -> BenchResult:
    """Mesh, assemble, build the system, solve.  Setup errors become failed results."""
    n = case.mesh_n
    kind, args = parse_solver(case.solver)
    dofs = 0
    try:
        mesh = build_cube_mesh(MeshConfig(n, scale=case.scale))
        ap = assemble_problem(mesh, Material(k=case.k))
        dofs = ap.n
        extra = {}
        kcfg = case.krylov
        if kind in ("lu", "blr-direct"):
            cs = build_complex(ap)
            if kind == "lu":
                factor = sparse_lu
            else:
                factor = lambda A: blr_factor(A, BlrConfig(epsilon=args[0]))  # noqa: E731
            x, setup, solve, f = _direct(cs.A, cs.b, factor)
            if kind == "blr-direct":
                extra["compression"] = f.compression_ratio
            res = relative_residual(cs.A, cs.b, x)
            return BenchResult(case, n, dofs, None, res <= kcfg.rtol, setup, solve, res, extra)

        if kind == "none":
            system = case.system or "split"
        elif kind in ("spai", "hx"):
            system = "split"
        else:
            system = "complex"
        if system == "split":
            ss = build_split(ap)
            A, b = ss.A_hat, ss.rhs
        else:
            cs = build_complex(ap)
            A, b = cs.A, cs.b

        t0 = time.perf_counter()
        if kind == "none":
            setup = 0.0
            x, rep = gmres(A, b, None, kcfg)
        elif kind == "spai":
            pre = build_spai(A, SpaiConfig(args[0], args[1], *args[2:]))
            setup = time.perf_counter() - t0
            extra["nnz_ratio"] = pre.report["nnz_ratio"]
            x, rep = gmres(A, b, pre, kcfg)
        elif kind == "ras":
            pre = build_ras(A, RasConfig(args[0], args[1]))
            setup = time.perf_counter() - t0
            x, rep = gmres(A, b, pre, kcfg)
        elif kind == "hx":
            hx = build_hx(ap, **({"aux": args[1]} if len(args) > 1 else {}))
            pre = HxBlockPrecond(hx, mode=args[0])
            setup = time.perf_counter() - t0
            x, rep = fgmres(A, b, pre, kcfg)
            if args[0] == "precond":
                extra["cg"] = "{}+{}".format(*pre.cg_iterations)
        else:
            f = blr_factor(A, BlrConfig(epsilon=args[0]))
            setup = time.perf_counter() - t0
            extra["compression"] = f.compression_ratio
            x, rep = fgmres(A, b, f.solve, kcfg)
        res = relative_residual(A, b, x)
        return BenchResult(case, n, dofs, rep.iterations, bool(rep.converged), setup, rep.solve_time, res, extra)
    except Exception as exc:  # recorded, the suite goes on
        msg = f"{type(exc).__name__}: {exc}"
        return BenchResult(case, n, dofs, None, False, 0.0, 0.0, math.nan, {}, error=msg + "\n" + traceback.format_exc())


# ---------------------------------------------------------------- suites

TWO_PI = 2.0 * math.pi


def _suite_spai():
    pairs = [(0.001, 0.01), (0.01, 0.05)]
    return [BenchCase(TWO_PI, f"spai:{t}:{f}", n=8, label=f"thresh={t} filter={f}") for t, f in pairs]


def _suite_ras():
    return [
        BenchCase(TWO_PI, f"ras:{N}:{d}", n=8, label=f"delta={d} N={N}")
        for d in (1, 2, 3)
        for N in (2, 4, 8)
    ]


def _suite_hx(k, ns):
    cases = []
    for n in ns:
        for solver in ("lu", "none", "hx:precond", "hx:solver"):
            expect = not (solver == "none" and n >= 8)
            cases.append(BenchCase(k, solver, n=n, expect_converged=expect, label=f"n={n}"))
    return cases


def _suite_blr():
    cases = [BenchCase(TWO_PI, "blr-direct:0", n=12, label="FR")]
    cases += [BenchCase(TWO_PI, f"blr:{e:g}", n=12, label=f"eps={e:g}") for e in (1e-9, 1e-5, 1e-3, 5e-3)]
    return cases


def _suite_hx_vs_blr():
    # same wavenumber and resolution, growing physical domain
    cases = []
    for scale in (1.0, 4.0):
        for solver in ("hx:precond", "blr:0.001"):
            cases.append(BenchCase(1.0, solver, ppw=10, scale=scale, label=f"scale={scale:g}"))
    return cases


SUITES = {
    "spai-table": _suite_spai,
    "ras-table": _suite_ras,
    "hx-k1": lambda: _suite_hx(1.0, (4, 8, 12)),
    "hx-k2pi": lambda: _suite_hx(TWO_PI, (8, 12, 16)),
    "blr-table": _suite_blr,
    "hx-vs-blr": _suite_hx_vs_blr,
}


def suite_cases(name: str, krylov: Optional[KrylovConfig] = None) -> list:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    cases = SUITES[name]()
    if krylov is not None:
        cases = [replace(c, krylov=krylov) for c in cases]
    return cases


def run_suite(name: str, krylov: Optional[KrylovConfig] = None, cases=None, progress=None) -> list:
    """Run a named suite (or explicit ``cases``) sequentially, in declaration order."""
    cases = suite_cases(name, krylov) if cases is None else cases
    results = []
    for case in cases:
        r = run_case(case)
        if progress is not None:
            progress(r)
        results.append(r)
    return results


# ---------------------------------------------------------------- tables

BASE_COLUMNS = ("label", "k", "n", "dofs", "solver", "iterations", "setup_time", "solve_time", "true_residual")
EXTRA_COLUMNS = ("cg", "compression", "nnz_ratio")


def iterations_cell(r: BenchResult) -> str:
    if r.error is not None:
        return "failed"
    if r.iterations is None:
        return "direct"
    if r.converged:
        return str(r.iterations)
    return f">{r.case.krylov.max_iter}* ({r.true_residual:.1e})"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def table_rows(results) -> tuple:
    """Header and string rows; extra columns only when some result has them."""
    extras = [c for c in EXTRA_COLUMNS if any(c in r.extra for r in results)]
    header = list(BASE_COLUMNS) + extras
    rows = []
    for r in results:
        row = [
            r.case.label,
            _fmt(r.case.k),
            str(r.n),
            str(r.dofs),
            r.case.solver,
            iterations_cell(r),
            f"{r.setup_time:.3f}",
            f"{r.solve_time:.3f}",
            f"{r.true_residual:.2e}",
        ]
        row += [_fmt(r.extra[c]) if c in r.extra else "" for c in extras]
        rows.append(row)
    return header, rows


def emit_table(results, format: str = "csv") -> str:
    if not results:
        raise ValueError("no results to tabulate")
    header, rows = table_rows(results)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if format == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")


def pivot_iterations(results, row_key, col_key) -> str:
    """Markdown grid of iteration cells, e.g. overlap rows by subdomain columns."""
    rows = sorted({row_key(r) for r in results})
    cols = sorted({col_key(r) for r in results})
    cell = {(row_key(r), col_key(r)): iterations_cell(r) for r in results}
    lines = ["| | " + " | ".join(str(c) for c in cols) + " |", "|" + "---|" * (len(cols) + 1)]
    for rv in rows:
        lines.append(f"| {rv} | " + " | ".join(cell.get((rv, c), "") for c in cols) + " |")
    return "\n".join(lines) + "\n"


def ras_grid(results) -> str:
    """Overlap rows, subdomain-count columns."""

    def arg(r, i):
        return parse_solver(r.case.solver)[1][i]

    return pivot_iterations(results, lambda r: f"delta={arg(r, 1)}", lambda r: f"N={arg(r, 0)}")


def iteration_counts(results) -> list:
    return [r.iterations for r in results]


def summary_ok(results) -> bool:
    return all(r.acceptable for r in results)


__all__ = [
    "BenchCase",
    "BenchResult",
    "SUITES",
    "emit_table",
    "iteration_counts",
    "iterations_cell",
    "parse_solver",
    "pivot_iterations",
    "ras_grid",
    "run_case",
    "run_suite",
    "suite_cases",
    "summary_ok",
]
