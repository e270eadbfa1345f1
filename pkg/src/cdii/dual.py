"""Fenchel-dual diagnostics for the weighted least-gradient problem.

Primal:  minimise ``sum a |grad v| h^2`` over ``v`` with ``v = f`` on the boundary.
Dual:    maximise ``<grad u_f, b>`` over ``b`` with ``|b| <= a`` and ``div b = 0``
         on interior nodes.

Dual candidates here are at *dual scale* (``|b| <= a``).  The split Bregman
iterate ``b^k`` lives at scale ``1/lam`` of this, so callers pass ``lam * b^k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cdii.field import divergence, gradient, inner, magnitude, norm

FEASIBILITY_TOL = 1e-10


@dataclass
class DualCandidate:
    b: np.ndarray
    max_violation: float  # max(|b| - a, 0) before clipping
    divergence_norm: float  # interior ||div b||, reported, not enforced

    def feasible(self, tol: float = FEASIBILITY_TOL, div_tol: float = FEASIBILITY_TOL) -> bool:
        return self.max_violation <= tol and self.divergence_norm <= div_tol


@dataclass
class CertificateReport:
    primal: float
    dual: float
    gap: float
    relative_gap: float
    divergence_slack: float  # |<v - u_f, div b>|; weak duality holds up to this
    alignment_defect: float
    max_violation: float
    divergence_norm: float
    zero_gradient_mask: np.ndarray
    zero_weight_mask: np.ndarray

    def summary(self) -> dict:
        out = {k: float(v) for k, v in self.__dict__.items() if not isinstance(v, np.ndarray)}
        out["zero_gradient_fraction"] = float(self.zero_gradient_mask.mean())
        out["zero_weight_fraction"] = float(self.zero_weight_mask.mean())
        return out


def primal_energy(v: np.ndarray, a: np.ndarray) -> float:
    return inner(a, magnitude(gradient(v)))


def dual_objective(b: np.ndarray, u_f: np.ndarray) -> float:
    return inner(gradient(u_f), b)


def conjugate_F(b: np.ndarray, a: np.ndarray, u_f: np.ndarray, tol: float = FEASIBILITY_TOL) -> float:
    """Convex conjugate of ``d -> sum a |d + grad u_f| h^2``; ``inf`` if ``|b| > a`` somewhere."""
    if np.any(magnitude(b) > a + tol):
        return np.inf
    return -dual_objective(b, u_f)


def interior_divergence_norm(b: np.ndarray) -> float:
    d = divergence(b)
    d[0, :] = d[-1, :] = d[:, 0] = d[:, -1] = 0.0
    return norm(d)


def project_feasible(b: np.ndarray, a: np.ndarray, tol: float = FEASIBILITY_TOL) -> DualCandidate:
    """Radially clip ``b`` into ``|b| <= a``; the divergence defect is only measured."""
    mag = magnitude(b)
    excess = mag - a
    over = excess > tol
    scale = np.ones_like(mag)
    scale[over] = a[over] / mag[over]
    clipped = b * scale
    return DualCandidate(
        b=clipped,
        max_violation=float(max(excess.max(), 0.0)),
        divergence_norm=interior_divergence_norm(clipped),
    )


def duality_gap(
    v: np.ndarray,
    b: np.ndarray,
    a: np.ndarray,
    u_f: np.ndarray,
    eps_rel: float = 1e-8,
) -> CertificateReport:
    """Certificate for a primal iterate ``v`` and dual-scale candidate ``b``."""
    cand = project_feasible(b, a)
    primal = primal_energy(v, a)
    dual = dual_objective(cand.b, u_f)
    gap = primal - dual

    # boundary entries of div b are not constrained; v - u_f vanishes there
    div_b = divergence(cand.b)
    slack = abs(inner(v - u_f, div_b))

    gv = gradient(v)
    gmag = magnitude(gv)
    eps = eps_rel * gmag.max() if gmag.max() > 0 else eps_rel
    zero_grad = gmag <= eps
    zero_weight = a <= 0
    sel = ~zero_grad & ~zero_weight
    target = np.zeros_like(gv)
    target[:, sel] = a[sel] * gv[:, sel] / gmag[sel]
    defect = norm((cand.b - target) * sel)

    return CertificateReport(
        primal=primal,
        dual=dual,
        gap=gap,
        relative_gap=gap / primal if primal > 0 else gap,
        divergence_slack=slack,
        alignment_defect=defect,
        max_violation=cand.max_violation,
        divergence_norm=cand.divergence_norm,
        zero_gradient_mask=zero_grad,
        zero_weight_mask=zero_weight,
    )


def recover_current(b: np.ndarray, lam: float) -> np.ndarray:
    """Physical current from the split Bregman multiplier: ``J = -lam * b``."""
    return -lam * np.asarray(b)
