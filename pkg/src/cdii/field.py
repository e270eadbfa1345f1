"""Node-centred grid calculus on the unit square.

Scalar fields are ``(n, n)`` arrays indexed ``[i, j]`` with node ``(i, j)`` at
``(i*h, j*h)``; vector fields are ``(2, n, n)`` arrays holding the x- and
y-components on the same nodes.  The spacing is implied by the shape,
``h = 1 / (n - 1)``, so most functions take only arrays.

The gradient is a forward difference that is set to zero on the last
row/column, and the divergence is its exact negative adjoint.  With this pair
``divergence(gradient(u))`` is the 5-point Laplacian on interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Uniform ``n x n`` node grid on ``[0, 1]^2``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.n}")

    @property
    def nx(self) -> int:
        return self.n

    @property
    def ny(self) -> int:
        return self.n

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x, y)`` node coordinate arrays, each of shape ``(n, n)``."""
        t = np.linspace(0.0, 1.0, self.n)
        return np.meshgrid(t, t, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def sample(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        x, y = self.coords()
        return np.broadcast_to(np.asarray(fn(x, y), dtype=float), self.shape).copy()

    def boundary_data(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        """Sample ``fn`` on boundary nodes; interior entries are zero."""
        f = self.sample(fn)
        f[self.interior_mask()] = 0.0
        return f

    @classmethod
    def of(cls, field: np.ndarray) -> "Grid2D":
        """Grid implied by a scalar ``(n, n)`` or vector ``(2, n, n)`` field."""
        shape = np.shape(field)[-2:]
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"field shape {np.shape(field)} is not on a square grid")
        return cls(shape[0])


def spacing(field: np.ndarray) -> float:
    return Grid2D.of(field).h


def gradient(u: np.ndarray) -> np.ndarray:
    """Forward-difference gradient; zero on the last row (x) / column (y)."""
    h = spacing(u)
    g = np.zeros((2,) + u.shape)
    g[0, :-1, :] = (u[1:, :] - u[:-1, :]) / h
    g[1, :, :-1] = (u[:, 1:] - u[:, :-1]) / h
    return g


def divergence(p: np.ndarray) -> np.ndarray:
    """Negative adjoint of :func:`gradient` in the node inner product."""
    h = spacing(p)
    px, py = p[0], p[1]
    d = np.zeros(px.shape)

    d[0, :] += px[0, :]
    d[1:-1, :] += px[1:-1, :] - px[:-2, :]
    d[-1, :] -= px[-2, :]

    d[:, 0] += py[:, 0]
    d[:, 1:-1] += py[:, 1:-1] - py[:, :-2]
    d[:, -1] -= py[:, -2]
    return d / h


def laplacian5(u: np.ndarray) -> np.ndarray:
    """Standard 5-point Laplacian on interior nodes (zero on the boundary)."""
    h = spacing(u)
    out = np.zeros(u.shape)
    out[1:-1, 1:-1] = (
        u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]
    ) / h**2
    return out


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """h^2-weighted L2 pairing of two scalar or two vector fields."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b)) * spacing(a) ** 2


def norm(a: np.ndarray) -> float:
    return float(np.sqrt(max(inner(a, a), 0.0)))


def magnitude(p: np.ndarray) -> np.ndarray:
    """Node-wise Euclidean length of a vector field."""
    return np.hypot(p[0], p[1])


pointwise_magnitude = magnitude
