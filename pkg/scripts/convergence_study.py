"""Manufactured-solution convergence in the H(curl) norm, scatterer disabled.

E = (1 + i/2) (sin(pi y), sin(pi z), sin(pi x)), so curl curl E = pi^2 E.

    python scripts/convergence_study.py --n 4 8 16
"""
import argparse

import numpy as np

from maxwell_bench.assembly import Material, assemble_problem, edge_interpolant, full_edge_vector, hcurl_error, manufactured_source
from maxwell_bench.mesh import MeshConfig, build_cube_mesh
from maxwell_bench.sparsekit import sparse_lu
from maxwell_bench.systems import build_complex

AMP = 1 + 0.5j


def field(x):
    return AMP * np.stack([np.sin(np.pi * x[:, 1]), np.sin(np.pi * x[:, 2]), np.sin(np.pi * x[:, 0])], -1)


def curl(x):
    return -np.pi * AMP * np.stack([np.cos(np.pi * x[:, 2]), np.cos(np.pi * x[:, 0]), np.cos(np.pi * x[:, 1])], -1)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--k", type=float, default=1.0)
    args = ap.parse_args()
    mat = Material(k=args.k)
    src = manufactured_source(field, curl, lambda x: np.pi**2 * field(x), mat)
    print("| n | dofs | L2 error | curl error | H(curl) error | ratio | interpolation error |")
    print("|---|---|---|---|---|---|---|")
    prev = None
    for n in args.n:
        mesh = build_cube_mesh(MeshConfig(n, scatterer_enabled=False))
        problem = assemble_problem(mesh, mat, src)
        cs = build_complex(problem)
        x = sparse_lu(cs.A).solve(cs.b)
        l2, c = hcurl_error(mesh, full_edge_vector(problem, x), field, curl)
        total = np.hypot(l2, c)
        interp = np.hypot(*hcurl_error(mesh, edge_interpolant(mesh, field), field, curl))
        ratio = f"{prev / total:.3f}" if prev else ""
        print(f"| {n} | {problem.n} | {l2:.3e} | {c:.3e} | {total:.3e} | {ratio} | {interp:.3e} |", flush=True)
        prev = total


if __name__ == "__main__":
    main()
