"""Outer FGMRES and inner CG counts for the three HX auxiliary-matrix choices.

    python scripts/hx_aux_study.py --k 1 --n 4 8 12
"""
import argparse
import time

from maxwell_bench.assembly import Material, assemble_problem
from maxwell_bench.krylov import KrylovConfig, fgmres
from maxwell_bench.mesh import MeshConfig, build_cube_mesh
from maxwell_bench.precond import HxBlockPrecond, build_hx
from maxwell_bench.precond.hx import AUX_CHOICES
from maxwell_bench.systems import build_split


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--k", type=float, default=1.0)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8])
    ap.add_argument("--aux", nargs="+", default=list(AUX_CHOICES), choices=AUX_CHOICES)
    ap.add_argument("--max-iter", type=int, default=1000)
    args = ap.parse_args()
    cfg = KrylovConfig(max_iter=args.max_iter)
    print("| n | aux | mode | outer | inner CG | time (s) |")
    print("|---|---|---|---|---|---|")
    for n in args.n:
        problem = assemble_problem(build_cube_mesh(MeshConfig(n)), Material(k=args.k))
        ss = build_split(problem)
        for aux in args.aux:
            hx = build_hx(problem, aux=aux)
            for mode in ("precond", "solver"):
                pre = HxBlockPrecond(hx, mode)
                t0 = time.perf_counter()
                _, rep = fgmres(ss.A_hat, ss.rhs, pre, cfg)
                outer = rep.iterations if rep.converged else f">{cfg.max_iter}*"
                cg = "{}+{}".format(*pre.cg_iterations) if mode == "precond" else ""
                print(f"| {n} | {aux} | {mode} | {outer} | {cg} | {time.perf_counter() - t0:.1f} |", flush=True)


if __name__ == "__main__":
    main()
