"""Free Hamiltonian, interaction blocks, the full regularized Hamiltonian and free resolvents."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fock import (ANNIHILATE, FockBasis, SparseOperator, boson_op, diagonal, enumerate_basis,
                   fermion_op, hermitian_deviation)
from .modegrid import (BOSON, FERMION, DispersionParams, Kernel, KernelMatrix, ModeGrid,
                       build_grid)

BLOCK_TAGS = ("ab", "a*b*", "a*b", "ab*")
# tag -> kernel it is built from
BLOCK_KERNEL = {"ab": 2, "a*b*": 2, "a*b": 1, "ab*": 1}


@lru_cache(maxsize=8)
def _lowering_ops(basis: FockBasis):
    a = [boson_op(j, ANNIHILATE, basis).matrix for j in range(basis.M_a)]
    b = [fermion_op(i, ANNIHILATE, basis).matrix for i in range(basis.M_f)]
    return a, b


def _check_modes(basis: FockBasis, grid: ModeGrid):
    if basis.M_a != grid.size or basis.M_f != grid.size:
        raise ValueError(f"basis modes ({basis.M_a}, {basis.M_f}) do not match grid size {grid.size}")


def free_energies(grid: ModeGrid, params: DispersionParams, basis: FockBasis) -> np.ndarray:
    """Diagonal of H0 as a real array."""
    _check_modes(basis, grid)
    bos, ferm = basis.occupations()
    return bos @ grid.energies(BOSON, params) + ferm @ grid.energies(FERMION, params)


def build_free(grid: ModeGrid, params: DispersionParams, basis: FockBasis) -> SparseOperator:
    return diagonal(free_energies(grid, params, basis), basis)


def _annihilating_block(values: np.ndarray, w: float, basis: FockBasis, fermion_created: bool):
    """sum_ij w F_ij b_i a_j, or with b_i^* when `fermion_created`."""
    a, b = _lowering_ops(basis)
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for i in range(basis.M_f):
        row = values[i]
        if not np.any(row):
            continue
        smeared = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for j in np.flatnonzero(row):
            smeared = smeared + (w * row[j]) * a[j]
        bi = b[i].conj().T if fermion_created else b[i]
        total = total + bi @ smeared
    return total


def block(tag: str, F, basis: FockBasis) -> SparseOperator:
    """Interaction block for an arbitrary sampled kernel F.

    ab: sum w F b a;  ab*: sum w F b^* a;  a*b*, a*b: adjoints of ab, ab*.
    """
    if tag not in BLOCK_TAGS:
        raise ValueError(f"unknown block tag {tag!r}")
    if not isinstance(F, Kernel):
        raise TypeError("F must be a Kernel")
    _check_modes(basis, F.grid)
    created = tag in ("ab*", "a*b")
    base = SparseOperator(_annihilating_block(F.values, F.w, basis, created), False, basis.tag)
    return base if tag in ("ab", "ab*") else base.adjoint()


def build_block(tag: str, km: KernelMatrix, basis: FockBasis) -> SparseOperator:
    """Block with the fixed pairing {ab, a*b*} <- G2 and {a*b, ab*} <- G1."""
    if tag not in BLOCK_TAGS:
        raise ValueError(f"unknown block tag {tag!r}")
    return block(tag, km.side(BLOCK_KERNEL[tag]), basis)


def fermion_smeared(F, w: float, basis: FockBasis, create: bool = False) -> SparseOperator:
    """b(F) = sum_i sqrt(w) F_i b_i (or its adjoint), so that ||b(F)|| = ||F||."""
    _, b = _lowering_ops(basis)
    F = np.asarray(F, dtype=complex)
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for i in np.flatnonzero(F):
        total = total + (np.sqrt(w) * F[i]) * b[i]
    op = SparseOperator(total, False, basis.tag)
    return op.adjoint() if create else op


@dataclass(frozen=True, eq=False)
class HamiltonianParts:
    H0: SparseOperator
    Hab: SparseOperator
    Hastbst: SparseOperator
    Hastb: SparseOperator
    Habst: SparseOperator
    H_full: SparseOperator
    basis: FockBasis
    km: KernelMatrix
    params: DispersionParams
    energies: np.ndarray

    @property
    def H_I(self) -> SparseOperator:
        return self.H_full - self.H0

    def block(self, tag: str) -> SparseOperator:
        return {"ab": self.Hab, "a*b*": self.Hastbst, "a*b": self.Hastb, "ab*": self.Habst}[tag]


def build_full(km: KernelMatrix, params: DispersionParams, basis: FockBasis,
               coupling: float = 1.0) -> HamiltonianParts:
    """H0 + H^{ab} + H^{ab*} + adjoints, with both kernels scaled by `coupling`."""
    if coupling != 1.0:
        km = km.scaled(coupling)
    energies = free_energies(km.grid, params, basis)
    H0 = diagonal(energies, basis)
    Hab = build_block("ab", km, basis)
    Habst = build_block("ab*", km, basis)
    Hastbst = Hab.adjoint()
    Hastb = Habst.adjoint()
    X = Hab + Habst
    # entrywise x + conj(y) is exactly symmetric under conjugate transposition
    full = H0.matrix + X.matrix + X.matrix.conj().T
    if hermitian_deviation(full) != 0.0:
        raise RuntimeError("assembled Hamiltonian is not exactly Hermitian")
    H_full = SparseOperator(full, True, basis.tag)
    return HamiltonianParts(H0, Hab, Hastbst, Hastb, Habst, H_full, basis, km, params, energies)


def c_lambda(km: KernelMatrix, params: DispersionParams) -> float:
    """1 + sum w^2 (1 + 1/omega_a(q_j)) (|G1|^2 + |G2|^2)."""
    wa = km.grid.energies(BOSON, params)
    dens = np.abs(km.values1) ** 2 + np.abs(km.values2) ** 2
    return float(1.0 + km.w ** 2 * np.sum(dens * (1.0 + 1.0 / wa)[None, :]))


def relative_bound_constants(km: KernelMatrix, params: DispersionParams) -> tuple[float, float]:
    """(sum w^2 |G|^2 / omega_a, sum w^2 |G|^2) summed over both kernels."""
    wa = km.grid.energies(BOSON, params)
    dens = np.abs(km.values1) ** 2 + np.abs(km.values2) ** 2
    return float(km.w ** 2 * np.sum(dens / wa[None, :])), float(km.w ** 2 * np.sum(dens))


def resolvent_diagonal(energies, z: complex, alpha: float = 1.0, shift: float = 0.0) -> np.ndarray:
    """(E - z + shift)^(-alpha) on the principal branch."""
    if complex(z).real >= 0:
        raise ValueError("free resolvent powers need Re z < 0")
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    base = np.asarray(energies, dtype=complex) - z + shift
    if alpha == 0:
        return np.ones_like(base)
    return np.power(base, -alpha)


def free_resolvent_power(H0: SparseOperator, z: complex, alpha: float, shift: float = 0.0) -> SparseOperator:
    energies = H0.matrix.diagonal()
    if sp.csr_matrix(H0.matrix - sp.diags(energies)).nnz:
        raise ValueError("H0 must be diagonal")
    return SparseOperator(sp.diags(resolvent_diagonal(energies.real, z, alpha, shift), format="csr"),
                          False, H0.tag)


def two_mode_toy(g2: complex, g1: complex = 0.0, w: float = 1.0, boson_cap: int = 2,
                 params: DispersionParams | None = None, coupling: float = 1.0) -> HamiltonianParts:
    """One boson mode and one fermion mode at zero momentum with prescribed kernel values."""
    params = params or DispersionParams()
    grid = build_grid(1, w / 2.0, 1)
    km = KernelMatrix.from_values([[g1]], [[g2]], grid)
    return build_full(km, params, enumerate_basis(1, 1, boson_cap), coupling)
