"""Dirichlet solvers: zero-data Poisson, harmonic extension, variable conductivity.

Unknowns live on interior nodes; boundary nodes carry prescribed values.  The
constant-coefficient operator is the 5-point Laplacian, which the sine
transform diagonalises exactly.  The variable-coefficient operator is the
flux form ``-div(k * grad u)`` built from :mod:`cdii.field` with edge
conductivities ``k``: by default the harmonic mean of the two end nodes;
with ``edges="node"`` the conductivity of the node owning the forward edge,
which makes ``-div(k grad .)`` equal to ``gradient^T diag(sigma) gradient``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft

from cdii.field import divergence, gradient, laplacian5


class SolverError(RuntimeError):
    """A sub-solve that was required to converge did not."""


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    method: str = ""


def _dirichlet_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues of ``-Laplacian`` on the ``(n-2)^2`` interior nodes."""
    h = 1.0 / (n - 1)
    k = np.arange(1, n - 1)
    mu = (2.0 - 2.0 * np.cos(np.pi * k / (n - 1))) / h**2
    return mu[:, None] + mu[None, :]


def smallest_eigenvalue(n: int) -> float:
    h = 1.0 / (n - 1)
    return 2.0 * (2.0 - 2.0 * np.cos(np.pi / (n - 1))) / h**2


def _neg_laplacian_inverse(r: np.ndarray) -> np.ndarray:
    """Solve ``-Laplacian(u) = r`` on an interior block with zero boundary."""
    n = r.shape[0] + 2
    rt = fft.dstn(r, type=1, norm="ortho")
    return fft.idstn(rt / _dirichlet_eigenvalues(n), type=1, norm="ortho")


def pcg(
    apply_a: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    tol: float,
    maxiter: int,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients on arrays of any shape.

    Stops when ``||rhs - A x|| <= tol * ||rhs||`` (Euclidean norms).
    """
    bnorm = np.linalg.norm(rhs)
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    if bnorm == 0.0:
        return np.zeros_like(rhs), SolveReport(0, 0.0, True, "cg")
    r = rhs - apply_a(x) if x0 is not None else rhs.copy()
    res = np.linalg.norm(r) / bnorm
    if res <= tol:
        return x, SolveReport(0, res, True, "cg")
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, maxiter + 1):
        ap = apply_a(p)
        alpha = rz / np.vdot(p, ap)
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            # recurrence residual drifts from the true one at tight tolerances
            res = np.linalg.norm(rhs - apply_a(x)) / bnorm
            if res <= tol:
                return x, SolveReport(it, res, True, "cg")
            r = rhs - apply_a(x)
        z = precond(r) if precond is not None else r
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(maxiter, res, False, "cg")


def _embed(interior: np.ndarray) -> np.ndarray:
    n = interior.shape[0] + 2
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = interior
    return u


def poisson_dirichlet_zero(
    rhs: np.ndarray,
    tol: float = 1e-10,
    method: str = "dst",
    x0: np.ndarray | None = None,
    maxiter: int | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve ``Laplacian(u) = rhs`` on interior nodes with ``u = 0`` on the boundary.

    ``method="dst"`` is the direct sine-transform solve; ``method="cg"`` runs
    conjugate gradients (optionally warm-started from ``x0``).  Boundary
    entries of ``rhs`` are ignored.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = rhs.shape[0]
    b = -np.asarray(rhs, dtype=float)[1:-1, 1:-1]

    def apply_a(w):
        return -laplacian5(_embed(w))[1:-1, 1:-1]

    bnorm = np.linalg.norm(b)
    if method == "dst":
        if bnorm == 0.0:
            return np.zeros((n, n)), SolveReport(0, 0.0, True, "dst")
        w = _neg_laplacian_inverse(b)
        res = float(np.linalg.norm(b - apply_a(w)) / bnorm)
        return _embed(w), SolveReport(1, res, res <= tol, "dst")
    if method == "cg":
        start = None if x0 is None else np.asarray(x0, dtype=float)[1:-1, 1:-1]
        w, rep = pcg(apply_a, b, tol, maxiter or 10 * n * n, x0=start)
        return _embed(w), rep
    raise ValueError(f"unknown Poisson method {method!r}")


def harmonic_extension(f: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, SolveReport]:
    """Discrete-harmonic field with boundary values taken from ``f``."""
    lift = np.array(f, dtype=float)
    lift[1:-1, 1:-1] = 0.0
    u, rep = poisson_dirichlet_zero(-laplacian5(lift), tol)
    return lift + u, rep


EDGE_RULES = ("harmonic", "node")


def edge_conductivities(sigma: np.ndarray, rule: str = "harmonic") -> np.ndarray:
    """Edge conductivities stored on the node owning each forward edge.

    ``k[0, i, j]`` sits on edge ``(i, j)-(i+1, j)`` and ``k[1, i, j]`` on
    ``(i, j)-(i, j+1)``; entries with no forward edge are zero.
    """
    k = np.zeros((2,) + sigma.shape)
    if rule == "harmonic":
        a, b = sigma[:-1, :], sigma[1:, :]
        k[0, :-1, :] = 2.0 * a * b / (a + b)
        a, b = sigma[:, :-1], sigma[:, 1:]
        k[1, :, :-1] = 2.0 * a * b / (a + b)
    elif rule == "node":
        k[0, :-1, :] = sigma[:-1, :]
        k[1, :, :-1] = sigma[:, :-1]
    else:
        raise ValueError(f"unknown edge rule {rule!r}")
    return k


def flux(k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``k * grad(v)`` with edge conductivities from :func:`edge_conductivities`."""
    return k * gradient(v)


def conductivity_solve(
    sigma: np.ndarray,
    f: np.ndarray,
    tol: float = 1e-10,
    maxiter: int | None = None,
    edges: str = "harmonic",
) -> tuple[np.ndarray, SolveReport]:
    """Solve ``div(sigma grad v) = 0`` with ``v = f`` on the boundary.

    Written as ``v = u_h + u`` with ``u_h`` the harmonic extension of ``f`` and
    ``-div(k grad u) = div(k grad u_h)``, ``u = 0`` on the boundary.  The
    interior system is SPD and solved by conjugate gradients preconditioned
    with a diagonally rescaled sine-transform Poisson solve.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise ValueError("conductivity must be finite and strictly positive")
    if sigma.shape != np.shape(f):
        raise ValueError("conductivity and boundary data are on different grids")
    n = sigma.shape[0]
    uh, hrep = harmonic_extension(f, tol)
    k = edge_conductivities(sigma, edges)

    def apply_a(w):
        return -divergence(flux(k, _embed(w)))[1:-1, 1:-1]

    rhs = divergence(flux(k, uh))[1:-1, 1:-1]

    # local conductivity scale: diag(A) / diag(-Laplacian)
    s = np.sqrt((k[0, 1:-1, 1:-1] + k[0, :-2, 1:-1] + k[1, 1:-1, 1:-1] + k[1, 1:-1, :-2]) / 4.0)

    def precond(r):
        return _neg_laplacian_inverse(r / s) / s

    w, rep = pcg(apply_a, rhs, tol, maxiter or 20 * n, precond=precond)
    rep.converged = rep.converged and hrep.converged
    return uh + _embed(w), rep
