"""``bench`` command line.

    bench run --suite hx-k1 --out results.csv
    bench run --config cases.toml --format markdown
    bench solve --k 6.283 --ppw 10 --solver hx:precond
    bench export-matrices --n 4 --dir ./mm/

Exit status is 0 when every case converged or was expected not to.
"""
from __future__ import annotations

import argparse
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _cap_threads(threads):
    # BLAS reads these when it loads, so this only bites before numpy import
    threads = threads or os.environ.get("BENCH_THREADS")
    if threads:
        for var in THREAD_VARS:
            os.environ[var] = str(int(threads))


def _load_config(path):
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _krylov(args, config):
    from .krylov import KrylovConfig

    kry = dict(config.get("krylov", {}))
    if args.rtol is not None:
        kry["rtol"] = args.rtol
    if args.max_iter is not None:
        kry["max_iter"] = args.max_iter
    return KrylovConfig(**kry)


def _cases_from_config(config, krylov, overrides):
    from .bench import BenchCase

    allowed = {"k", "solver", "ppw", "n", "scale", "system", "expect_converged", "label"}
    cases = []
    for entry in config.get("case", []):
        unknown = set(entry) - allowed
        if unknown:
            raise ValueError(f"unknown case keys: {sorted(unknown)}")
        entry = {**entry, **{k: v for k, v in overrides.items() if v is not None}}
        cases.append(BenchCase(krylov=krylov, **entry))
    return cases


def _emit(results, args):
    from .bench import emit_table, ras_grid

    text = emit_table(results, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if getattr(args, "suite", None) == "ras-table" and args.format == "markdown":
        sys.stdout.write("\n" + ras_grid(results))
    for r in results:
        if r.error:
            print(f"case {r.case.label or r.case.solver} failed: {r.error.splitlines()[0]}", file=sys.stderr)


def _progress(r):
    from .bench import iterations_cell

    print(f"[{r.case.solver} k={r.case.k:.4g} n={r.n}] {iterations_cell(r)}", file=sys.stderr, flush=True)


def cmd_run(args) -> int:
    from .bench import run_suite, summary_ok

    config = _load_config(args.config) if args.config else {}
    krylov = _krylov(args, config)
    overrides = {"k": args.k, "ppw": args.ppw, "scale": args.scale, "solver": args.solver}
    if args.suite:
        results = run_suite(args.suite, krylov=krylov, progress=_progress)
    elif config.get("case"):
        results = run_suite("", cases=_cases_from_config(config, krylov, overrides), progress=_progress)
    else:
        raise SystemExit("bench run: give --suite or a --config with [[case]] entries")
    _emit(results, args)
    return 0 if summary_ok(results) else 1


def cmd_solve(args) -> int:
    from .bench import BenchCase, run_case, summary_ok

    config = _load_config(args.config) if args.config else {}
    krylov = _krylov(args, config)
    case = BenchCase(
        k=args.k if args.k is not None else 1.0,
        solver=args.solver or "lu",
        ppw=args.ppw if args.ppw is not None else 10.0,
        n=args.n,
        scale=args.scale if args.scale is not None else 1.0,
        system=args.system,
        krylov=krylov,
        expect_converged=True,
    )
    results = [run_case(case)]
    _emit(results, args)
    return 0 if summary_ok(results) else 1


def cmd_export(args) -> int:
    import scipy.sparse as sp

    from .assembly import Material, assemble_problem
    from .mesh import MeshConfig, build_cube_mesh
    from .sparsekit import write_matrix_market
    from .systems import build_split

    ap = assemble_problem(build_cube_mesh(MeshConfig(args.n)), Material(k=args.k))
    os.makedirs(args.dir, exist_ok=True)
    ss = build_split(ap)
    mats = {
        "C": ap.C,
        "M": ap.M,
        "B": ap.B,
        "G": ap.G,
        "P_curl": ap.P_curl,
        "A_split": ss.A_hat,
        "s_R": sp.csr_matrix(ap.s_R.reshape(-1, 1)),
        "s_I": sp.csr_matrix(ap.s_I.reshape(-1, 1)),
    }
    for name, mat in mats.items():
        write_matrix_market(mat, os.path.join(args.dir, f"{name}.mtx"))
    print(f"wrote {len(mats)} matrices for {ap.n} free edges to {args.dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--k", type=float)
    common.add_argument("--ppw", type=float)
    common.add_argument("--scale", type=float)
    common.add_argument("--solver", help="lu, none, blr:EPS, blr-direct:EPS, spai:T:F[:M], ras:N:D, hx:MODE[:AUX]")
    common.add_argument("--threads", type=int, help="BLAS thread cap (also BENCH_THREADS)")
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "markdown"), default="csv")
    common.add_argument("--rtol", type=float)
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--config", help="TOML file with [[case]] entries and an optional [krylov] table")

    parser = argparse.ArgumentParser(prog="bench", description="Maxwell scattering solver benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a suite or configured cases")
    run.add_argument("--suite", choices=("spai-table", "ras-table", "hx-k1", "hx-k2pi", "blr-table", "hx-vs-blr"))
    run.set_defaults(func=cmd_run)

    solve = sub.add_parser("solve", parents=[common], help="run a single case")
    solve.add_argument("--n", type=int, help="mesh cells per side (overrides --ppw)")
    solve.add_argument("--system", choices=("split", "complex"))
    solve.set_defaults(func=cmd_solve)

    export = sub.add_parser("export-matrices", help="write assembled matrices in Matrix Market format")
    export.add_argument("--n", type=int, default=4)
    export.add_argument("--k", type=float, default=1.0)
    export.add_argument("--dir", default="mm")
    export.add_argument("--threads", type=int)
    export.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _cap_threads(args.threads)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
