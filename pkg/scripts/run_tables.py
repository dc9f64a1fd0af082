"""Run benchmark suites and write each table as CSV and Markdown.

    python scripts/run_tables.py                  # every suite
    python scripts/run_tables.py ras-table hx-k1  # a selection
"""
import argparse
import pathlib
import sys

from maxwell_bench.bench import SUITES, emit_table, iterations_cell, ras_grid, run_suite


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("suites", nargs="*", help=", ".join(SUITES))
    ap.add_argument("--out", default="results")
    args = ap.parse_args(argv)
    unknown = set(args.suites) - set(SUITES)
    if unknown:
        ap.error(f"unknown suites: {', '.join(sorted(unknown))}")
    args.suites = args.suites or list(SUITES)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.suites:
        print(f"== {name}", flush=True)
        results = run_suite(
            name,
            progress=lambda r: print(f"  {r.case.label or r.case.solver:<24} {r.case.solver:<18} {iterations_cell(r)}", flush=True),
        )
        (out / f"{name}.csv").write_text(emit_table(results, "csv"))
        md = emit_table(results, "markdown")
        if name == "ras-table":
            md += "\n" + ras_grid(results)
        (out / f"{name}.md").write_text(md)
    return 0


if __name__ == "__main__":
    sys.exit(main())
