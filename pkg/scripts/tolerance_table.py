"""Iterations, error and time versus stopping tolerance for both algorithms.

    python3 scripts/tolerance_table.py --n 128 --phantom abdomen
"""

import argparse
import time

from cdii.field import Grid2D
from cdii.phantom import BOUNDARIES, PHANTOMS, simulate
from cdii.solver import ReconstructionConfig, reconstruct, relative_error, simple_iterations


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--phantom", default="abdomen", choices=sorted(PHANTOMS))
    ap.add_argument("--f", default="linear", choices=sorted(BOUNDARIES))
    ap.add_argument("--tols", type=float, nargs="+", default=[5e-5, 1e-4, 2e-4, 5e-4])
    args = ap.parse_args()

    grid = Grid2D(args.n)
    data = simulate(PHANTOMS[args.phantom].sample(grid), grid.boundary_data(BOUNDARIES[args.f]))
    print("algorithm,tol,error,seconds,iterations")
    for tol in args.tols:
        cfg = ReconstructionConfig(tol=tol, diagnostics=False)
        t0 = time.perf_counter()
        rec = reconstruct(data, cfg)
        dt = time.perf_counter() - t0
        print(f"bregman,{tol:g},{relative_error(rec.sigma, data.sigma, rec.floor_mask):.4f},{dt:.2f},{rec.iterations}")
        t0 = time.perf_counter()
        res = simple_iterations(data, cfg)
        dt = time.perf_counter() - t0
        tag = " (breakdown)" if res.breakdown else ""
        err = relative_error(res.sigma, data.sigma, res.floor_mask)
        print(f"simple,{tol:g},{err:.4f},{dt:.2f},{res.iterations}{tag}")


if __name__ == "__main__":
    main()
