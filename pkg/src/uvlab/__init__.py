"""Truncated-Fock-space laboratory for the UV renormalization of a fermion-boson Hamiltonian."""

__version__ = "0.1.0"

from .modegrid import CutoffSpec, DispersionParams, Kernel, KernelMatrix, KernelSpec, ModeGrid, build_grid, kernel_matrix
from .fock import FockBasis, SparseOperator, algebra_report, enumerate_basis
from .hamiltonian import HamiltonianParts, build_full, c_lambda, two_mode_toy
from .counterterm import e2_discrete, e2_quadrature, thresholds
from .config import RunConfig, build_system, load_config

__all__ = [
    "CutoffSpec", "DispersionParams", "Kernel", "KernelMatrix", "KernelSpec", "ModeGrid", "build_grid",
    "kernel_matrix", "FockBasis", "SparseOperator", "algebra_report", "enumerate_basis", "HamiltonianParts",
    "build_full", "c_lambda", "two_mode_toy", "e2_discrete", "e2_quadrature", "thresholds", "RunConfig",
    "build_system", "load_config",
]
