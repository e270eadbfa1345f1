"""Alternating split Bregman reconstruction of conductivity from |J| and f.

The iteration is run in potential variables ``v = u + u_f``: with ``d`` and
``b`` vector fields,

    1. ``Laplacian(u) = div(d - b - grad u_f)``, ``u = 0`` on the boundary
    2. ``v = u + u_f``
    3. ``d <- shrink(grad v + b, a, lam)``
    4. ``b <- b + grad v - d``

which is the standard scheme with its ``d`` shifted by ``grad u_f``.  In this
form the trajectory does not depend on the choice of ``u_f`` beyond its
boundary values.  At convergence ``v`` minimises ``sum a |grad v|`` and
``-lam * b`` is the current density.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, fields

import numpy as np

from cdii.dual import duality_gap
from cdii.elliptic import (
    SolveReport,
    SolverError,
    conductivity_solve,
    harmonic_extension,
    poisson_dirichlet_zero,
    smallest_eigenvalue,
)
from cdii.field import divergence, gradient, magnitude, norm, spacing
from cdii.phantom import SimulatedData

log = logging.getLogger(__name__)


@dataclass
class ReconstructionConfig:
    lam: float = 1.0
    tol: float = 1e-4
    max_iters: int = 500
    sub_solver_tol: float = 1e-10
    mode: str = "exact"  # or "approximate"
    alpha0: float = 1e-3
    rho: float = 0.5
    gradient_floor: float = 1e-8
    poisson_method: str = "dst"
    # also require ||grad v - d|| <= tol * ||grad v|| before stopping
    residual_stop: bool = True
    diagnostics: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.sub_solver_tol > 0:
            raise ValueError("sub_solver_tol must be positive")
        if not self.gradient_floor > 0:
            raise ValueError("gradient_floor must be positive")
        if self.mode not in ("exact", "approximate"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "approximate":
            # tolerances must be summable: geometric with ratio < 1
            if self.alpha0 < 0:
                raise ValueError("alpha0 must be non-negative")
            if not 0 <= self.rho < 1:
                raise ValueError("inexact schedule needs 0 <= rho < 1 (summable tolerances)")

    def alpha(self, k: int) -> float:
        return self.alpha0 * self.rho**k


@dataclass
class BregmanState:
    k: int
    u: np.ndarray
    v: np.ndarray
    d: np.ndarray  # potential variables: d_alg + grad u_f
    b: np.ndarray

    def dr_point(self, lam: float, grad_uf: np.ndarray) -> np.ndarray:
        """Douglas-Rachford iterate ``x = lam (b + d_alg)``."""
        return lam * (self.b + self.d - grad_uf)

    def dual_point(self, lam: float) -> np.ndarray:
        """Douglas-Rachford resolvent point ``p = lam b`` (dual scale)."""
        return lam * self.b


TRACE_COLUMNS = (
    "k",
    "residual",
    "step",
    "energy",
    "dual",
    "gap",
    "rel_change",
    "sigma_error",
    "max_dual_violation",
    "divergence_norm",
    "floored_fraction",
    "subsolve_iters",
)


@dataclass
class IterationTrace:
    k: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    step: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    dual: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)
    sigma_error: list = field(default_factory=list)
    max_dual_violation: list = field(default_factory=list)
    divergence_norm: list = field(default_factory=list)
    floored_fraction: list = field(default_factory=list)
    subsolve_iters: list = field(default_factory=list)

    def append(self, **row):
        for f in fields(self):
            getattr(self, f.name).append(row.get(f.name, np.nan))

    def __len__(self):
        return len(self.k)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for i in range(len(self)):
                w.writerow([_fmt(getattr(self, c)[i]) for c in TRACE_COLUMNS])

    @classmethod
    def read_csv(cls, path) -> "IterationTrace":
        tr = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                tr.append(**{k: (int(v) if k in ("k", "subsolve_iters") and v != "nan" else float(v))
                             for k, v in row.items()})
        return tr


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def shrink(q: np.ndarray, a: np.ndarray, lam: float) -> np.ndarray:
    """Vectorial soft threshold ``max(|q| - a/lam, 0) q/|q|`` (0 where ``q = 0``)."""
    mag = magnitude(q)
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = np.maximum(mag[nz] - a[nz] / lam, 0.0) / mag[nz]
    return q * scale


def recover_sigma(a: np.ndarray, v: np.ndarray, eps_rel: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """``sigma = a / max(|grad v|, eps)`` with ``eps = eps_rel * max |grad v|``.

    Returns the conductivity and the mask of floored nodes.
    """
    gmag = magnitude(gradient(v))
    eps = eps_rel * gmag.max() if gmag.max() > 0 else eps_rel
    mask = gmag <= eps
    return a / np.maximum(gmag, eps), mask


def relative_error(estimate: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Relative L2 error over nodes outside ``mask``."""
    keep = np.ones(truth.shape, dtype=bool) if mask is None else ~mask
    return float(np.linalg.norm((estimate - truth)[keep]) / np.linalg.norm(truth[keep]))


def initial_state(u_f: np.ndarray, b0=None, d0=None) -> BregmanState:
    shape = (2,) + u_f.shape
    b = np.zeros(shape) if b0 is None else np.array(b0, dtype=float)
    d = np.zeros(shape) if d0 is None else np.array(d0, dtype=float)
    return BregmanState(k=0, u=np.zeros(u_f.shape), v=np.array(u_f, dtype=float), d=d, b=b)


def _poisson_step(rhs, state, config, k) -> tuple[np.ndarray, SolveReport]:
    if config.mode == "approximate" and config.alpha(k) > 0:
        # ||grad e||^2 = <e, -Lap e> <= ||r||^2 / mu_min, so a residual of
        # alpha * sqrt(mu_min) (h-weighted) keeps the gradient error below alpha.
        n = rhs.shape[0]
        h = spacing(rhs)
        bnorm = h * np.linalg.norm(rhs[1:-1, 1:-1])
        target = config.alpha(k) * np.sqrt(smallest_eigenvalue(n))
        rel = target / bnorm if bnorm > 0 else 1.0
        return poisson_dirichlet_zero(rhs, rel, method="cg", x0=state.u)
    u, rep = poisson_dirichlet_zero(rhs, config.sub_solver_tol, method=config.poisson_method)
    if not rep.converged:
        raise SolverError(f"Poisson sub-solve failed at iteration {k}: {rep}")
    return u, rep


def bregman_step(
    state: BregmanState,
    a: np.ndarray,
    u_f: np.ndarray,
    config: ReconstructionConfig,
    grad_uf: np.ndarray | None = None,
) -> tuple[BregmanState, dict]:
    """One split Bregman iteration; returns the new state and step diagnostics."""
    if grad_uf is None:
        grad_uf = gradient(u_f)
    rhs = divergence(state.d - state.b - grad_uf)
    u, rep = _poisson_step(rhs, state, config, state.k)
    if config.mode == "approximate" and not rep.converged:
        raise SolverError(f"inexact Poisson solve missed its tolerance at iteration {state.k}: {rep}")
    v = u + u_f
    gv = gradient(v)
    q = gv + state.b
    d = shrink(q, a, config.lam)
    b = q - d
    new = BregmanState(k=state.k + 1, u=u, v=v, d=d, b=b)

    vnorm = norm(v)
    info = {
        "residual": norm(gv - state.d),
        "step": config.lam * norm((b + d) - (state.b + state.d)),
        "rel_change": norm(v - state.v) / vnorm if vnorm > 0 else 0.0,
        "grad_norm": norm(gv),
        "subsolve": rep,
    }
    return new, info


@dataclass
class Reconstruction:
    sigma: np.ndarray
    v: np.ndarray
    J: np.ndarray
    floor_mask: np.ndarray
    trace: IterationTrace
    state: BregmanState
    converged: bool
    u_f: np.ndarray

    @property
    def iterations(self) -> int:
        return self.state.k


def _as_data(data) -> SimulatedData:
    if isinstance(data, SimulatedData):
        return data
    a, f = data
    return SimulatedData(a=np.asarray(a, dtype=float), f=np.asarray(f, dtype=float))


def reconstruct(
    data,
    config: ReconstructionConfig | None = None,
    *,
    u_f: np.ndarray | None = None,
    b0: np.ndarray | None = None,
    d0: np.ndarray | None = None,
) -> Reconstruction:
    """Run split Bregman from ``b0 = d0 = 0`` (unless given) until the relative
    change of ``v`` is below ``config.tol`` or ``max_iters`` is reached.

    ``data`` is a :class:`SimulatedData` or an ``(a, f)`` pair.  ``u_f``
    defaults to the harmonic extension of ``f``; any field with the right
    boundary values gives the same iterates.
    """
    config = config or ReconstructionConfig()
    data = _as_data(data)
    a = data.a
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("|J| data must be finite and non-negative")
    if u_f is None:
        u_f, rep = harmonic_extension(data.f, config.sub_solver_tol)
        if not rep.converged:
            raise SolverError(f"harmonic extension failed: {rep}")
    else:
        u_f = np.asarray(u_f, dtype=float)
        bmask = np.ones(u_f.shape, dtype=bool)
        bmask[1:-1, 1:-1] = False
        if not np.allclose(u_f[bmask], data.f[bmask], rtol=0, atol=1e-12):
            raise ValueError("u_f does not match the boundary data")

    grad_uf = gradient(u_f)
    state = initial_state(u_f, b0, d0)
    trace = IterationTrace()
    converged = False
    rel_change = np.inf
    for _ in range(config.max_iters):
        state, info = bregman_step(state, a, u_f, config, grad_uf)
        # no previous potential exists before the first iteration
        rel_change = info["rel_change"] if state.k > 1 else np.inf
        row = dict(
            k=state.k,
            residual=info["residual"],
            step=info["step"],
            rel_change=rel_change,
            subsolve_iters=info["subsolve"].iterations,
        )
        if config.diagnostics:
            cert = duality_gap(state.v, state.dual_point(config.lam), a, u_f, config.gradient_floor)
            row.update(
                energy=cert.primal,
                dual=cert.dual,
                gap=cert.gap,
                max_dual_violation=cert.max_violation,
                divergence_norm=cert.divergence_norm,
            )
        if data.sigma is not None:
            sig, mask = recover_sigma(a, state.v, config.gradient_floor)
            row["sigma_error"] = relative_error(sig, data.sigma, mask)
            row["floored_fraction"] = float(mask.mean())
        trace.append(**row)

        small_res = info["residual"] <= config.tol * info["grad_norm"]
        if rel_change <= config.tol and (small_res or not config.residual_stop):
            converged = True
            break

    if not converged:
        log.warning("split Bregman stopped at max_iters=%d (rel change %.3g)", config.max_iters, rel_change)
    sigma, mask = recover_sigma(a, state.v, config.gradient_floor)
    return Reconstruction(
        sigma=sigma,
        v=state.v,
        J=-config.lam * state.b,
        floor_mask=mask,
        trace=trace,
        state=state,
        converged=converged,
        u_f=u_f,
    )


def approximate_reconstruct(data, config: ReconstructionConfig, **kwargs) -> Reconstruction:
    """:func:`reconstruct` with Poisson solves to tolerances ``alpha0 * rho^k``."""
    if config.mode != "approximate":
        raise ValueError("approximate_reconstruct needs a config with mode='approximate'")
    return reconstruct(data, config, **kwargs)


def critical_cells(v: np.ndarray) -> np.ndarray:
    """Cells whose corner gradients wind around the origin.

    Returns a boolean ``(n-2, n-2)`` array over the cells with corners
    ``(i, j) .. (i+1, j+1)`` for ``i, j <= n-3`` (all four corners have full
    forward stencils).  A nonzero winding number of ``grad v`` around the cell,
    or a vanishing corner gradient, means ``grad v`` has a zero in the cell.
    """
    g = gradient(v)[:, :-1, :-1]
    theta = np.arctan2(g[1], g[0])
    loop = [theta[:-1, :-1], theta[1:, :-1], theta[1:, 1:], theta[:-1, 1:]]
    total = np.zeros(loop[0].shape)
    for a, b in zip(loop, loop[1:] + loop[:1]):
        total += (b - a + np.pi) % (2 * np.pi) - np.pi
    winding = np.rint(total / (2 * np.pi)).astype(int) != 0
    zero = magnitude(g) == 0
    zero_corner = zero[:-1, :-1] | zero[1:, :-1] | zero[1:, 1:] | zero[:-1, 1:]
    return winding | zero_corner


@dataclass
class SimpleResult:
    sigma: np.ndarray
    v: np.ndarray
    floor_mask: np.ndarray
    trace: IterationTrace
    converged: bool
    breakdown: bool
    reason: str = ""
    critical_points: int = 0

    @property
    def iterations(self) -> int:
        return len(self.trace)


def simple_iterations(
    data,
    config: ReconstructionConfig | None = None,
    *,
    edges: str = "node",
    breakdown_fraction: float = 0.01,
    breakdown_patience: int = 3,
    max_contrast: float = 1e8,
    stop_on_breakdown: bool = True,
) -> SimpleResult:
    """Fixed-point baseline: ``sigma_{k+1} = a / |grad v_k|`` with ``v_k`` the
    potential for ``sigma_k``, stopped on the relative change of ``sigma``.

    The update is only defined while ``grad v_k`` does not vanish in the
    domain.  Breakdown is declared when, for ``breakdown_patience``
    consecutive iterations, ``v_k`` has interior critical points (see
    :func:`critical_cells`) or more than ``breakdown_fraction`` of the
    interior nodes hit the gradient floor; also when the conductivity contrast exceeds
    ``max_contrast`` or the forward solve fails.  With ``stop_on_breakdown``
    false the iteration continues and only the flag is raised.

    Floored nodes keep their previous conductivity.
    """
    config = config or ReconstructionConfig()
    data = _as_data(data)
    a, f = data.a, data.f
    eps_rel = config.gradient_floor
    trace = IterationTrace()

    uh, _ = harmonic_extension(f, config.sub_solver_tol)
    sigma, mask = recover_sigma(a, uh, eps_rel)
    fill = np.median(sigma[~mask]) if np.any(~mask) else 1.0
    sigma[mask] = fill
    v = uh

    def result(converged, breakdown, reason, ncrit=0):
        return SimpleResult(sigma, v, mask, trace, converged, breakdown, reason, ncrit)

    streak = 0
    broke = ""
    ncrit = 0
    for k in range(1, config.max_iters + 1):
        smax = sigma.max()
        if not np.all(np.isfinite(sigma)) or smax <= 0:
            return result(False, True, "non-finite conductivity")
        sigma_pos = np.maximum(sigma, smax / max_contrast)
        try:
            v, rep = conductivity_solve(sigma_pos, f, config.sub_solver_tol, edges=edges)
        except ValueError as exc:
            return result(False, True, f"forward solve rejected: {exc}")
        if not rep.converged:
            return result(False, True, f"forward solve failed: {rep}")

        new, mask = recover_sigma(a, v, eps_rel)
        new[mask] = sigma[mask]
        rel = float(np.linalg.norm(new - sigma) / np.linalg.norm(new))
        ncrit = int(critical_cells(v).sum())
        row = dict(k=k, rel_change=rel, floored_fraction=float(mask.mean()), subsolve_iters=rep.iterations)
        if data.sigma is not None:
            row["sigma_error"] = relative_error(new, data.sigma, mask)
        trace.append(**row)
        sigma = new

        # boundary gradients are fixed by f; only interior flooring counts
        degenerate = ncrit > 0 or mask[1:-1, 1:-1].mean() > breakdown_fraction
        streak = streak + 1 if degenerate else 0
        if streak >= breakdown_patience and not broke:
            broke = (
                f"gradient vanishes inside the domain ({ncrit} critical cells)"
                if ncrit
                else "gradient floored on too many nodes"
            )
        positive = sigma[sigma > 0]
        if not broke and positive.size and sigma.max() / positive.min() > max_contrast:
            broke = "conductivity contrast blew up"
        if broke and stop_on_breakdown:
            return result(False, True, broke, ncrit)
        if rel <= config.tol:
            return result(not broke, bool(broke), broke, ncrit)
    return result(False, bool(broke), broke or "max_iters reached", ncrit)
