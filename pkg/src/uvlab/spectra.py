"""Ground-state energies, perturbative checks, cutoff sweeps and resolvent distances."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import RunConfig, build_system
from .counterterm import e2_discrete
from .fock import SparseOperator, hermitian_deviation
from .hamiltonian import HamiltonianParts, build_full, c_lambda
from .linalg import ConvergenceError, lowest_eigs, power_norm
from .modegrid import BOSON, FERMION, DispersionParams


def _residual(H, E: float, v: np.ndarray) -> float:
    return float(np.linalg.norm(H @ v - E * v) / np.linalg.norm(v))


def ground_energy(H, tol: float = 1e-9) -> tuple[float, float]:
    """Smallest eigenvalue and the residual ||Hv - Ev|| / ||v|| of its eigenvector."""
    M = H.matrix if isinstance(H, SparseOperator) else H
    if sp.issparse(M) and hermitian_deviation(M) > 1e-12 * max(1.0, abs(M).max()):
        raise ValueError("ground_energy needs a Hermitian operator")
    vals, vecs = lowest_eigs(M, 1, tol=min(tol, 1e-10))
    E = float(vals[0])
    res = _residual(M, E, vecs[:, 0])
    if res > tol * max(1.0, abs(E)):
        raise ConvergenceError(f"eigen-residual {res:.2e} above tolerance {tol:.1e}")
    return E, res


def toy_closed_form(g2: complex, w: float = 1.0, params: DispersionParams | None = None,
                    coupling: float = 1.0) -> tuple[float, float]:
    """Exact ground energy and second-order coefficient of the one-cell toy with G1 = 0."""
    params = params or DispersionParams()
    omega = params.m_b + params.m_f  # the single cell sits at zero momentum
    s2 = (w * abs(g2) * coupling) ** 2
    return omega / 2.0 - math.sqrt(omega ** 2 / 4.0 + s2), -(w * abs(g2)) ** 2 / omega


@dataclass
class PerturbationReport:
    c2: float
    e2: float
    rel_mismatch: float
    c4: float
    lambdas: list
    energies: list
    unstable: bool


def scaled_hamiltonian(parts: HamiltonianParts, lam: float) -> SparseOperator:
    """H0 + lam * H_I, i.e. the Hamiltonian with kernels multiplied by lam."""
    return SparseOperator(parts.H0.matrix + lam * parts.H_I.matrix, True, parts.basis.tag)


def perturbation_check(parts: HamiltonianParts, lambdas: Sequence[float] = (0.0125, 0.025, 0.0375, 0.05),
                       tol: float = 1e-9) -> PerturbationReport:
    """Fit E(lam)/lam^2 as a polynomial in lam^2 and compare its constant term with E2.

    `parts` is built at unit coupling; the spectrum is even in lam because boson parity
    conjugates lam into -lam. The polynomial fit through all grid points is the
    Richardson extrapolation of E/lam^2 to lam = 0.
    """
    lam = np.asarray(sorted(lambdas), dtype=float)
    if lam[0] <= 0:
        raise ValueError("lambda grid must be positive")
    E = np.array([ground_energy(scaled_hamiltonian(parts, l), tol)[0] for l in lam])
    y = E / lam ** 2
    x = lam ** 2
    deg = min(len(lam) - 1, 3)
    coef = np.polynomial.polynomial.polyfit(x, y, deg)
    c2 = float(coef[0])
    c4 = float(coef[1]) if deg >= 1 else 0.0
    e2 = e2_discrete(parts.km, parts.params)
    rel = abs(c2 - e2) / abs(e2) if e2 != 0 else abs(c2)
    unstable = abs(c4) * x[-1] > abs(c2) and c2 != 0
    return PerturbationReport(c2, e2, rel, c4, lam.tolist(), E.tolist(), bool(unstable))


@dataclass
class SweepRow:
    Lambda: float
    E: float
    e2: float
    renormalized: float
    C: float
    gap: float
    residual: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    def lower_bound_ok(self) -> bool:
        return all(r.E >= -r.C for r in self.rows)

    def differences(self) -> list[float]:
        ren = [r.renormalized for r in self.rows]
        return [b - a for a, b in zip(ren, ren[1:])]

    def tail_decreasing(self, count: int = 3) -> bool:
        """Are the last `count` absolute successive differences strictly decreasing?"""
        diffs = [abs(x) for x in self.differences()][-count:]
        return len(diffs) == count and all(b < a for a, b in zip(diffs, diffs[1:]))


def sweep_row(parts: HamiltonianParts, Lambda: float, tol: float = 1e-9) -> SweepRow:
    H = parts.H_full.matrix
    vals, vecs = lowest_eigs(H, 2, tol=min(tol, 1e-10))
    E = float(vals[0])
    res = _residual(H, E, vecs[:, 0])
    if res > tol * max(1.0, abs(E)):
        raise ConvergenceError(f"eigen-residual {res:.2e} at Lambda={Lambda}")
    gap = float(vals[1] - vals[0]) if len(vals) > 1 else math.nan
    e2 = e2_discrete(parts.km, parts.params)
    return SweepRow(float(Lambda), E, e2, E - e2, c_lambda(parts.km, parts.params), gap, res)


def renormalized_sweep(cfg: RunConfig, lambdas: Sequence[float] | None = None,
                       coupling: float | None = None, threads: int = 1) -> SweepResult:
    """One row per cutoff at fixed grid and Fock caps; rows computed in parallel, ordered by Lambda."""
    lambdas = sorted(float(L) for L in (lambdas or cfg.cutoffs.lambdas))
    grid = cfg.grid()

    def job(L):
        return sweep_row(build_system(cfg, L, coupling, grid), L, cfg.solver.eig_tol)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(job, lambdas))
    m, g = cfg.model, cfg.discretization
    meta = {"d": m.d, "p": m.p, "m_b": m.m_b, "m_f": m.m_f, "n": cfg.cutoffs.n,
            "Q_max": g.Q_max, "cells_per_axis": g.cells_per_axis, "modes": grid.size,
            "boson_cap": g.boson_cap, "coupling": m.coupling if coupling is None else coupling}
    return SweepResult(rows, meta)


def default_z(*parts: HamiltonianParts) -> float:
    """-2 (1 + 25 max C^2), inside every guaranteed convergence region."""
    return -2.0 * (1.0 + 25.0 * max(c_lambda(p.km, p.params) ** 2 for p in parts))


def resolvent_distance(parts1: HamiltonianParts, parts2: HamiltonianParts, z: complex | None = None,
                       e2_1: float | None = None, e2_2: float | None = None,
                       tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """||(H1 - e2_1 - z)^-1 - (H2 - e2_2 - z)^-1|| by power iteration with sparse LU solves."""
    if parts1.basis.tag != parts2.basis.tag:
        raise ValueError("both Hamiltonians must live on the same basis")
    z = default_z(parts1, parts2) if z is None else complex(z)
    e2_1 = e2_discrete(parts1.km, parts1.params) if e2_1 is None else e2_1
    e2_2 = e2_discrete(parts2.km, parts2.params) if e2_2 is None else e2_2
    n = parts1.basis.dim
    I = sp.identity(n, dtype=complex, format="csc")

    def lu(parts, e2, zz):
        return spla.splu((parts.H_full.matrix - (e2 + zz) * I).tocsc())

    try:
        A1, A2 = lu(parts1, e2_1, z), lu(parts2, e2_2, z)
        B1, B2 = lu(parts1, e2_1, np.conj(z)), lu(parts2, e2_2, np.conj(z))
    except RuntimeError as exc:
        raise ConvergenceError(f"sparse factorization failed: {exc}") from exc
    apply = lambda x: A1.solve(x) - A2.solve(x)
    # the adjoint of (H - c)^-1 is (H - conj c)^-1 for Hermitian H
    adjoint = lambda x: B1.solve(x) - B2.solve(x)
    return power_norm(apply, adjoint, n, tol, max_iter)[0]
