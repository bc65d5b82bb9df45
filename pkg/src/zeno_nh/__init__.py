"""Measurement-conditioned quantum dynamics of lattice bosons in the weak
Zeno regime: block master equation, quantum-jump unraveling, non-Hermitian
effective dynamics, momentum-space dark states, and Bayesian subspace
inference."""

__version__ = "0.1.0"

from .fockspace import FockBasis, LatticeConfig, build_basis
from .model import (
    BhmParams,
    MeasurementConfig,
    build_hamiltonian,
    build_jump_operator,
    enumerate_zeno_subspaces,
)

__all__ = [
    "__version__",
    "FockBasis",
    "LatticeConfig",
    "build_basis",
    "BhmParams",
    "MeasurementConfig",
    "build_hamiltonian",
    "build_jump_operator",
    "enumerate_zeno_subspaces",
]
