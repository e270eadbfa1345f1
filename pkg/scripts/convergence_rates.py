"""Per-iteration error of split Bregman and simple iterations, for boundary
data y (two-to-one) and y + 2 sin(7 pi y) (not two-to-one).

Writes one CSV per boundary condition with columns k, bregman, simple.

    python3 scripts/convergence_rates.py --out rates/
"""

import argparse
from pathlib import Path

import numpy as np

from cdii.field import Grid2D
from cdii.phantom import BOUNDARIES, PHANTOMS, simulate
from cdii.solver import ReconstructionConfig, reconstruct, simple_iterations


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--phantom", default="bumps", choices=sorted(PHANTOMS))
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--out", default="rates")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    grid = Grid2D(args.n)
    sigma = PHANTOMS[args.phantom].sample(grid)
    cfg = ReconstructionConfig(tol=1e-12, max_iters=args.iters, diagnostics=False)
    for name in ("linear", "sine7"):
        data = simulate(sigma, grid.boundary_data(BOUNDARIES[name]))
        sb = reconstruct(data, cfg).trace.array("sigma_error")
        si = simple_iterations(data, cfg, stop_on_breakdown=False).trace.array("sigma_error")
        rows = max(len(sb), len(si))
        pad = lambda x: np.concatenate([x, np.full(rows - len(x), np.nan)])  # noqa: E731
        table = np.column_stack([np.arange(1, rows + 1), pad(sb), pad(si)])
        path = out / f"rates_{name}.csv"
        np.savetxt(path, table, delimiter=",", header="k,bregman,simple", comments="", fmt=["%d", "%.6e", "%.6e"])
        print(f"{name}: bregman final {sb[-1]:.4f}, simple final {si[-1]:.4g} -> {path}")


if __name__ == "__main__":
    main()
