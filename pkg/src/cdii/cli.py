"""Command-line driver: simulate data, reconstruct, diagnose a finished run.

Exit codes: 0 success, 2 usage, 3 solver failure, 4 tolerance not reached,
5 simple-iterations breakdown.  Without ``--out`` results go under
``$CDII_OUT`` (default ``runs``) in a directory named after the subcommand.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from cdii import io
from cdii.dual import duality_gap
from cdii.elliptic import SolverError, harmonic_extension
from cdii.field import Grid2D, magnitude
from cdii.phantom import BOUNDARIES, PHANTOMS, SimulatedData, add_noise, simulate
from cdii.solver import (
    IterationTrace,
    ReconstructionConfig,
    reconstruct,
    relative_error,
    simple_iterations,
)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_NOT_CONVERGED, EXIT_BREAKDOWN = 0, 2, 3, 4, 5
ALGORITHMS = ("bregman", "simple", "bregman-approx")

log = logging.getLogger("cdii")


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path(os.environ.get("CDII_OUT", "runs")) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _boundary(choice: str, grid: Grid2D) -> np.ndarray:
    if choice in BOUNDARIES:
        return grid.boundary_data(BOUNDARIES[choice])
    path = Path(choice)
    if not path.is_file():
        raise UsageError(f"--f must be one of {sorted(BOUNDARIES)} or an existing grid field file, got {choice!r}")
    f = io.read_field(path)
    if f.shape != grid.shape:
        raise UsageError(f"boundary file is {f.shape}, grid is {grid.shape}")
    f = f.copy()
    f[1:-1, 1:-1] = 0.0
    return f


def _simulate(args) -> tuple[SimulatedData, np.ndarray]:
    if args.phantom not in PHANTOMS:
        raise UsageError(f"unknown phantom {args.phantom!r}; choose from {sorted(PHANTOMS)}")
    try:
        grid = Grid2D(args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.delta < 0:
        raise UsageError("--delta must be non-negative")
    sigma = PHANTOMS[args.phantom].sample(grid)
    data = simulate(sigma, _boundary(args.f, grid))
    clean = data.a
    data.a = add_noise(clean, args.delta, args.seed)
    return data, clean


def _clamped_fraction(clean, args) -> float:
    """Share of nodes the noise pushed below zero (then clamped)."""
    return float(np.mean(add_noise(clean, args.delta, args.seed, clamp=False) < 0))


def _sim_config(args) -> dict:
    return {"phantom": args.phantom, "f": args.f, "n": args.n, "delta": args.delta, "seed": args.seed}


def _write_manifest(out: Path, command: str, config: dict, inputs: dict, outputs: list, summary: dict, t0: float):
    manifest = {
        "command": command,
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": io.sha256(p)} for name, p in inputs.items()},
        "outputs": sorted(outputs),
        "summary": summary,
        "timing": {"wall_seconds": time.perf_counter() - t0, "finished": time.strftime("%Y-%m-%dT%H:%M:%S")},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    data, clean = _simulate(args)
    out = _out_dir(args)
    files = {
        "sigma.gf": data.sigma,
        "v.gf": data.v,
        "J.gf": data.J,
        "a_clean.gf": clean,
        "a.gf": data.a,
        "f.gf": data.f,
    }
    for name, arr in files.items():
        io.write_field(out / name, arr)
    io.write_pgm(out / "sigma.pgm", data.sigma)
    io.write_pgm(out / "a.pgm", data.a)
    summary = {"clamped_fraction": _clamped_fraction(clean, args)}
    _write_manifest(out, "simulate", _sim_config(args), {}, list(files) + ["sigma.pgm", "a.pgm"], summary, t0)
    print(f"simulated {args.phantom} on {args.n}x{args.n} -> {out}")
    return EXIT_OK


def _load_inputs(args) -> tuple[SimulatedData, dict, dict]:
    """Inputs from ``--data`` (a simulate run), ``--a``/``--f`` files, or inline simulation."""
    if args.data:
        d = Path(args.data)
        for name in ("a.gf", "f.gf"):
            if not (d / name).is_file():
                raise UsageError(f"{d} has no {name}")
        inputs = {"a": d / "a.gf", "f": d / "f.gf"}
        if (d / "sigma.gf").is_file():
            inputs["sigma"] = d / "sigma.gf"
        if (d / "J.gf").is_file():
            inputs["J"] = d / "J.gf"
        return _read_inputs(inputs), inputs, {"data": str(d)}
    if args.a:
        if not Path(args.f).is_file():
            raise UsageError("--a needs --f to name a boundary grid field file")
        inputs = {"a": Path(args.a), "f": Path(args.f)}
        if args.truth:
            inputs["sigma"] = Path(args.truth)
        return _read_inputs(inputs), inputs, {"a": args.a, "f": args.f, "truth": args.truth}
    data, _ = _simulate(args)
    return data, {}, _sim_config(args)


def _read_inputs(paths: dict) -> SimulatedData:
    try:
        arrays = {k: io.read_field(p) for k, p in paths.items()}
    except (OSError, io.FormatError) as exc:
        raise UsageError(f"cannot read inputs: {exc}") from exc
    if arrays["a"].shape != arrays["f"].shape:
        raise UsageError("a and f are on different grids")
    return SimulatedData(a=arrays["a"], f=arrays["f"], sigma=arrays.get("sigma"), J=arrays.get("J"))


def _config(args) -> ReconstructionConfig:
    try:
        return ReconstructionConfig(
            lam=args.lam,
            tol=args.tol,
            max_iters=args.max_iters,
            mode="approximate" if args.algorithm == "bregman-approx" else "exact",
            alpha0=args.alpha0,
            rho=args.rho,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_reconstruct(args) -> int:
    t0 = time.perf_counter()
    data, inputs, source = _load_inputs(args)
    config = _config(args)
    out = _out_dir(args)

    if args.algorithm == "simple":
        res = simple_iterations(data, config)
        status = "breakdown" if res.breakdown else ("converged" if res.converged else "max_iters")
        fields = {"sigma_hat.gf": res.sigma, "v_hat.gf": res.v}
        summary = {"status": status, "iterations": res.iterations, "reason": res.reason,
                   "critical_cells": res.critical_points}
        mask, trace = res.floor_mask, res.trace
    else:
        res = reconstruct(data, config)
        status = "converged" if res.converged else "max_iters"
        fields = {"sigma_hat.gf": res.sigma, "v_hat.gf": res.v, "J_hat.gf": res.J}
        summary = {"status": status, "iterations": res.iterations}
        mask, trace = res.floor_mask, res.trace

    fields["floor_mask.gf"] = mask.astype(float)
    # the run directory is self-contained for diagnose
    fields["a.gf"] = data.a
    fields["f.gf"] = data.f
    if data.sigma is not None:
        fields["sigma.gf"] = data.sigma
        summary["sigma_error"] = relative_error(fields["sigma_hat.gf"], data.sigma, mask)
    if data.J is not None:
        fields["J.gf"] = data.J
    for name, arr in fields.items():
        io.write_field(out / name, arr)
    trace.write_csv(out / "trace.csv")
    io.write_pgm(out / "sigma_hat.pgm", fields["sigma_hat.gf"])
    summary["floored_fraction"] = float(mask.mean())

    cfg = {"algorithm": args.algorithm, **asdict(config), **source}
    _write_manifest(out, "reconstruct", cfg, inputs, list(fields) + ["trace.csv", "sigma_hat.pgm"], summary, t0)
    err = f", sigma error {summary['sigma_error']:.4g}" if "sigma_error" in summary else ""
    print(f"{args.algorithm}: {status} after {summary['iterations']} iterations{err} -> {out}")
    if status == "breakdown":
        print(f"breakdown: {res.reason}", file=sys.stderr)
        return EXIT_BREAKDOWN
    return EXIT_OK if status == "converged" else EXIT_NOT_CONVERGED


def cmd_diagnose(args) -> int:
    run = Path(args.run)
    manifest_path = run / "manifest.json"
    if not (run / "trace.csv").is_file() or not manifest_path.is_file():
        raise UsageError(f"{run} is not a completed reconstruct run (missing trace.csv or manifest.json)")
    manifest = json.loads(manifest_path.read_text())
    cfg = manifest["config"]
    trace = IterationTrace.read_csv(run / "trace.csv")
    a = io.read_field(run / "a.gf")
    f = io.read_field(run / "f.gf")
    v = io.read_field(run / "v_hat.gf")
    sigma_hat = io.read_field(run / "sigma_hat.gf")
    mask = io.read_field(run / "floor_mask.gf") > 0.5

    report: dict = {"run": str(run), "algorithm": cfg.get("algorithm"), "iterations": len(trace)}
    report["status"] = manifest["summary"].get("status")
    if (run / "J_hat.gf").is_file():
        J_hat = io.read_field(run / "J_hat.gf")
        u_f, _ = harmonic_extension(f)
        cert = duality_gap(v, -J_hat, a, u_f, cfg.get("gradient_floor", 1e-8))
        report["duality"] = cert.summary()
        keep = ~mask
        report["current"] = {
            "max_abs_Jhat_minus_a": float(np.abs(magnitude(J_hat) - a)[keep].max()),
            "rel_Jhat_vs_a": relative_error(magnitude(J_hat), a, mask),
        }
        if (run / "J.gf").is_file():
            J = io.read_field(run / "J.gf")
            diff = magnitude(J_hat - J)[keep]
            report["current"]["rel_Jhat_vs_J"] = float(np.linalg.norm(diff) / np.linalg.norm(magnitude(J)[keep]))
    if (run / "sigma.gf").is_file():
        report["sigma_error"] = relative_error(sigma_hat, io.read_field(run / "sigma.gf"), mask)

    ks = trace.array("k")
    if len(ks) > 1 and np.any(np.diff(ks) <= 0):
        raise UsageError("trace rows are not in increasing k")
    out = Path(args.out) if args.out else run
    out.mkdir(parents=True, exist_ok=True)
    _write_rate_table(out / "rates.csv", trace)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for key in ("status", "iterations", "sigma_error"):
        if key in report:
            print(f"{key}: {report[key]}")
    if "duality" in report:
        d = report["duality"]
        print(f"gap: {d['gap']:.3e} (relative {d['relative_gap']:.3e}), dual violation {d['max_violation']:.1e}")
    return EXIT_OK


def _write_rate_table(path: Path, trace: IterationTrace):
    """Per-iteration data for convergence-rate plots; ``ratio`` is ``rel_change_k / rel_change_{k-1}``."""
    rel = trace.array("rel_change")
    ratio = np.full(rel.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio[1:] = rel[1:] / rel[:-1]
    cols = ("k", "rel_change", "ratio", "residual", "step", "gap", "sigma_error")
    data = {c: trace.array(c) for c in cols if c != "ratio"}
    data["ratio"] = ratio
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(trace)):
            fh.write(",".join(str(int(data[c][i])) if c == "k" else repr(float(data[c][i])) for c in cols) + "\n")


def _add_sim_flags(p):
    p.add_argument("--phantom", default="bumps", help=f"one of {', '.join(sorted(PHANTOMS))}")
    p.add_argument("--f", default="linear", help="linear, sine7, or a grid field file with boundary values")
    p.add_argument("--n", type=int, default=128, help="nodes per side")
    p.add_argument("--delta", type=float, default=0.0, help="relative noise level on |J|")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdii", description="Conductivity imaging from one interior current magnitude.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="forward-simulate |J| for a phantom")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct sigma from |J| and f")
    _add_sim_flags(p)
    p.add_argument("--data", help="directory written by simulate")
    p.add_argument("--a", help="grid field file with |J| (needs --f as a file)")
    p.add_argument("--truth", help="grid field file with the true sigma")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="bregman")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--alpha0", type=float, default=1e-3)
    p.add_argument("--rho", type=float, default=0.5)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("diagnose", help="duality gap, current recovery and rate table for a run")
    p.add_argument("run", help="directory written by reconstruct")
    p.add_argument("--out", help="where to write report.json and rates.csv (default: the run)")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cdii: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"cdii: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
