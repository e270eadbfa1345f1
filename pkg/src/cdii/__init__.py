"""Conductivity imaging from the magnitude of one interior current density."""

from cdii.dual import CertificateReport, duality_gap, project_feasible, recover_current
from cdii.elliptic import SolverError, conductivity_solve, harmonic_extension, poisson_dirichlet_zero
from cdii.field import Grid2D, divergence, gradient, inner, magnitude, norm, pointwise_magnitude
from cdii.phantom import PHANTOMS, Phantom, SimulatedData, add_noise, make_phantom, simulate
from cdii.solver import (
    IterationTrace,
    Reconstruction,
    ReconstructionConfig,
    approximate_reconstruct,
    reconstruct,
    shrink,
    simple_iterations,
)

__version__ = "0.1.0"
