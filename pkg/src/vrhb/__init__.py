"""Variance-reduced heavy-ball power iteration for the top eigenvector of a covariance."""
from .data import DatasetSpec, SpectralReference, fixture_a, load_dataset, spectrum_b
from .matrix import DataMatrix, MiniBatch, covariance_matvec, error_gap, minibatch_matvec
from .rates import g_of_eta, p_poly, q_poly
from .solvers import (
    Momentum,
    SolverConfig,
    power_momentum_run,
    power_run,
    vr_hb_power_run,
    vr_pca_run,
    vr_power_m_run,
)

__version__ = "0.1.0"
