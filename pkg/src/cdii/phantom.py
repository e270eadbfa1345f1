"""Conductivity phantoms, forward simulation of |J|, and the additive noise model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cdii.elliptic import SolverError, conductivity_solve, edge_conductivities, flux
from cdii.field import Grid2D, magnitude


@dataclass(frozen=True)
class Phantom:
    kind: str
    params: dict = field(default_factory=dict)

    def sample(self, grid: Grid2D) -> np.ndarray:
        return make_phantom(self.kind, grid, **self.params)


# Bumps of the smooth tissue-like preset: (x0, y0, width, weight).
_BUMPS = (
    (0.35, 0.60, 0.12, 1.0),
    (0.70, 0.30, 0.10, 0.6),
    (0.68, 0.78, 0.07, 0.45),
    (0.25, 0.22, 0.06, -0.35),
)

# Abdomen-like layout: (cx, cy, rx, ry, angle, value), painted in order.
_ORGANS = (
    (0.50, 0.50, 0.45, 0.38, 0.0, 1.25),
    (0.33, 0.55, 0.16, 0.13, 0.3, 1.6),
    (0.68, 0.42, 0.07, 0.10, 0.0, 1.8),
    (0.32, 0.35, 0.07, 0.09, 0.0, 1.8),
    (0.50, 0.22, 0.06, 0.05, 0.0, 1.05),
    (0.60, 0.65, 0.10, 0.07, -0.4, 1.45),
)


def make_phantom(kind: str, grid: Grid2D, **params) -> np.ndarray:
    """Sample a conductivity phantom (S/m) on ``grid``.

    Kinds and their parameters:

    ``constant``   c (default 1)
    ``layered``    sigma0 + slope * y (defaults 1, 0.8)
    ``bumps``      smooth Gaussian mixture rescaled into [lo, hi] (defaults 1, 1.8)
    ``abdomen``    piecewise-smooth ellipses in [1, 1.8] with edges of width ``edge``
    ``inclusion``  background with one disc of value ``inside``
    """
    x, y = grid.coords()
    if kind == "constant":
        c = float(params.get("c", 1.0))
        if c <= 0:
            raise ValueError("constant conductivity must be positive")
        return np.full(grid.shape, c)
    if kind == "layered":
        s0 = float(params.get("sigma0", 1.0))
        slope = float(params.get("slope", 0.8))
        if min(s0, s0 + slope) <= 0:
            raise ValueError("layered conductivity must stay positive on [0, 1]")
        return s0 + slope * y
    if kind == "bumps":
        lo = float(params.get("lo", 1.0))
        hi = float(params.get("hi", 1.8))
        if not 0 < lo <= hi:
            raise ValueError("bumps range needs 0 < lo <= hi")
        b = np.zeros(grid.shape)
        for x0, y0, w, amp in _BUMPS:
            b += amp * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2 * w**2))
        b = (b - b.min()) / (b.max() - b.min())
        return lo + (hi - lo) * b
    if kind == "abdomen":
        w = float(params.get("edge", 0.01))
        if w <= 0:
            raise ValueError("edge width must be positive")
        sigma = np.ones(grid.shape)
        for cx, cy, rx, ry, th, val in _ORGANS:
            c, s = np.cos(th), np.sin(th)
            X = ((x - cx) * c + (y - cy) * s) / rx
            Y = (-(x - cx) * s + (y - cy) * c) / ry
            # signed distance proxy scaled by the minor radius
            m = 0.5 * (1.0 - np.tanh((np.hypot(X, Y) - 1.0) * min(rx, ry) / w))
            sigma = sigma * (1.0 - m) + val * m
        return sigma
    if kind == "inclusion":
        bg = float(params.get("background", 1.0))
        inside = float(params.get("inside", 1.8))
        cx = float(params.get("cx", 0.5))
        cy = float(params.get("cy", 0.5))
        r = float(params.get("radius", 0.2))
        if bg <= 0 or inside <= 0 or r <= 0:
            raise ValueError("inclusion phantom needs positive values and radius")
        return np.where((x - cx) ** 2 + (y - cy) ** 2 <= r**2, inside, bg)
    raise ValueError(f"unknown phantom kind {kind!r}")


PHANTOMS = {
    "constant": Phantom("constant", {"c": 1.0}),
    "layered": Phantom("layered", {"sigma0": 1.0, "slope": 0.8}),
    "bumps": Phantom("bumps", {"lo": 1.0, "hi": 1.8}),
    "abdomen": Phantom("abdomen", {"edge": 0.01}),
    "inclusion": Phantom("inclusion", {"inside": 1.8}),
    # finite stand-ins for perfectly conducting / insulating inclusions
    "conducting": Phantom("inclusion", {"inside": 1e3}),
    "insulating": Phantom("inclusion", {"inside": 1e-3}),
}


def linear_boundary(x, y):
    return y


def sine7_boundary(x, y):
    """Boundary voltage that is not two-to-one: y + 2 sin(7 pi y)."""
    return y + 2.0 * np.sin(7.0 * np.pi * y)


BOUNDARIES = {"linear": linear_boundary, "sine7": sine7_boundary}


@dataclass
class SimulatedData:
    """Interior data ``a = |J|`` and boundary voltage ``f`` plus ground truth.

    ``f`` is stored as a full node array with zeros in the interior.
    """

    a: np.ndarray
    f: np.ndarray
    sigma: np.ndarray | None = None
    v: np.ndarray | None = None
    J: np.ndarray | None = None

    @property
    def grid(self) -> Grid2D:
        return Grid2D.of(self.a)


def simulate(sigma: np.ndarray, f: np.ndarray, tol: float = 1e-10, edges: str = "node") -> SimulatedData:
    """Forward problem: potential ``v``, current ``J = -k grad v`` and ``a = |J|``.

    The current uses the same edge conductivities as the solve, so its
    discrete divergence vanishes to solver tolerance.  With the default
    ``edges="node"`` this is ``J = -sigma grad v`` node by node, and the
    true potential is an exact minimiser of the discrete weighted
    least-gradient problem for ``a``.

    Components with no forward edge (x on the last column, y on the last
    row) are zero, matching :func:`cdii.field.gradient`; so ``a`` on those
    boundary nodes is ``sigma |grad f|`` along the boundary only.
    """
    v, rep = conductivity_solve(sigma, f, tol, edges=edges)
    if not rep.converged:
        raise SolverError(f"forward solve did not converge: {rep}")
    J = -flux(edge_conductivities(sigma, edges), v)
    return SimulatedData(a=magnitude(J), f=np.array(f, dtype=float), sigma=np.array(sigma), v=v, J=J)


def add_noise(a: np.ndarray, delta: float, seed: int, clamp: bool = True) -> np.ndarray:
    """``a + gamma R`` with ``R`` standard normal and ``gamma = delta ||a|| / ||R||``.

    Negative values are clamped to zero unless ``clamp`` is false.
    """
    if delta < 0:
        raise ValueError("noise level must be non-negative")
    a = np.asarray(a, dtype=float)
    if delta == 0:
        return a.copy()
    R = np.random.default_rng(seed).standard_normal(a.shape)
    noisy = a + delta * np.linalg.norm(a) / np.linalg.norm(R) * R
    return np.maximum(noisy, 0.0) if clamp else noisy
