"""Gram matrices of ReLU^k features on spheres: coefficients, assembly and spectra."""

from .coefficients import band_index, coefficient_oracle, sigma_hat, xi_s_table, xi_table
from .gegenbauer import harmonic_dimension, ladder_eval, projected_quadrature
from .gram import GramMatrix, assemble_mass, assemble_qmc, assemble_stiffness, weighted
from .spectra import (
    condition_sweep,
    counting_function,
    effective_dimension,
    eig_sym,
    plateau_check,
    spectrum_law_fit,
)
from .sphere_points import PointSet, mesh_statistics, riesz_minimize, sample_uniform

__version__ = "0.1.0"
