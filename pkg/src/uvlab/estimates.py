"""Measured-ratio audits of the fermion, annihilation, power-shift and block inequalities.

Discretization conventions on a grid with cell volume w:
  b(F) = sum_i sqrt(w) F_i b_i,  ||F|| = sqrt(w sum |F_i|^2),
  integral over q of c(q) ||X a(q) Y psi||^2  ->  sum_j c_j ||X a_j Y psi||^2,
  two-variable integrals carry w^2.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .counterterm import k1_constant, k2_constant, k3_constant
from .fock import ANNIHILATE, FockBasis, boson_op, enumerate_basis, fermion_op
from .hamiltonian import HamiltonianParts, block, free_energies
from .linalg import operator_norm
from .modegrid import (BOSON, FERMION, CutoffSpec, DispersionParams, Kernel, KernelSpec, ModeGrid, build_grid,
                       kernel_matrix)

SLACK = 1e-9
DEFAULT_CEILING = 32.0
LEMMA_IDS = ("B1", "B2", "B3", "B4", "B5", "C1", "C2", "C3", "C4", "C5", "C6")


@dataclass
class AuditReport:
    lemma: str
    samples: int
    max_ratio: float
    bound_constant: float
    worst: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_ratio)) and self.max_ratio <= self.bound_constant + SLACK

    # alias under the report field name
    @property
    def pass_(self) -> bool:
        return self.passed


def merge_reports(reports: Sequence[AuditReport]) -> list[AuditReport]:
    """Combine reports per lemma id, keeping the worst ratio; ordered by lemma id."""
    grouped: dict[str, AuditReport] = {}
    for r in reports:
        g = grouped.get(r.lemma)
        if g is None:
            grouped[r.lemma] = AuditReport(r.lemma, r.samples, r.max_ratio, r.bound_constant, dict(r.worst))
            continue
        g.samples += r.samples
        g.bound_constant = min(g.bound_constant, r.bound_constant)
        if r.max_ratio > g.max_ratio:
            g.max_ratio, g.worst = r.max_ratio, dict(r.worst)
    order = {k: i for i, k in enumerate(LEMMA_IDS)}
    return sorted(grouped.values(), key=lambda r: (order.get(r.lemma, 99), r.lemma))


@dataclass(eq=False)
class Truncation:
    """Grid, dispersion and Fock basis with the free energies and dense ladder operators."""
    grid: ModeGrid
    params: DispersionParams
    basis: FockBasis

    @cached_property
    def energies(self) -> np.ndarray:
        return free_energies(self.grid, self.params, self.basis)

    @cached_property
    def omega_a(self) -> np.ndarray:
        return self.grid.energies(BOSON, self.params)

    @cached_property
    def omega_b(self) -> np.ndarray:
        return self.grid.energies(FERMION, self.params)

    @cached_property
    def a(self) -> list[np.ndarray]:
        return [boson_op(j, ANNIHILATE, self.basis).toarray() for j in range(self.basis.M_a)]

    @cached_property
    def b(self) -> list[np.ndarray]:
        return [fermion_op(i, ANNIHILATE, self.basis).toarray() for i in range(self.basis.M_f)]

    @property
    def w(self) -> float:
        return self.grid.w

    def power(self, z: complex, alpha: float, shift: float = 0.0) -> np.ndarray:
        """Diagonal of (H0 - z + shift)^(-alpha)."""
        return np.power(self.energies - complex(z) + shift, -float(alpha))

    def b_smeared(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=complex)
        return sum(np.sqrt(self.w) * F[i] * self.b[i] for i in range(len(F)))


def truncation(grid: ModeGrid, params: DispersionParams, boson_cap: int) -> Truncation:
    return Truncation(grid, params, enumerate_basis(grid.size, grid.size, boson_cap))


def truncation_from_parts(parts: HamiltonianParts) -> Truncation:
    return Truncation(parts.km.grid, parts.params, parts.basis)


def _vector_norm(F, w: float) -> float:
    return math.sqrt(w * float(np.sum(np.abs(np.asarray(F)) ** 2)))


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return 0.0 if lhs <= 1e-14 else math.inf
    return lhs / rhs


# ---------------------------------------------------------------- fermion and annihilation bounds

def audit_fermion_bound(F, z: complex, C: float, Cp: float, alpha: float, T: Truncation) -> AuditReport:
    """||(H0-z+C)^a b(F) (H0-z+C')^-a|| and its adjoint statement, each divided by 2||F||."""
    if not (0.0 <= C <= Cp and 0.0 <= alpha <= 1.0 and complex(z).real < -1):
        raise ValueError("need Re z < -1, 0 <= C <= C', 0 <= alpha <= 1")
    bF = T.b_smeared(F)
    up = T.power(z, -alpha, C)
    down = T.power(z, alpha, Cp)
    lhs1 = operator_norm(up[:, None] * bF * down[None, :])
    lhs2 = operator_norm(down[:, None] * bF.conj().T * up[None, :])
    ratio = _ratio(max(lhs1, lhs2), 2.0 * _vector_norm(F, T.w))
    return AuditReport("B1", 1, ratio, 1.0, {"z": complex(z), "C": C, "Cp": Cp, "alpha": alpha,
                                             "lhs": (lhs1, lhs2)})


def _sup_weighted(ops: Sequence[np.ndarray], weights: Sequence[float], psi=None) -> float:
    """sup over unit psi of sum_j c_j ||A_j psi||^2, or its value at a given psi."""
    M = sum(c * (A.conj().T @ A) for c, A in zip(weights, ops))
    if np.isscalar(M):
        return 0.0
    if psi is not None:
        psi = np.asarray(psi, dtype=complex)
        return float(np.real(psi.conj() @ M @ psi) / np.real(psi.conj() @ psi))
    M = 0.5 * (M + M.conj().T)
    return float(max(np.linalg.eigvalsh(M)[-1], 0.0))


ASHARP_VARIANTS = ("a b(F)", "b*(F) a", "b b(F)", "b*(F) b")


def asharp_lhs(F, z: complex, delta: float, gamma: float, C: float, Cp: float, T: Truncation,
               variant: str, psi=None) -> float:
    """Weighted sum over modes for one of the four annihilation-smeared-fermion products.

    For the fermionic variants the mode weight uses omega_b in both places.
    """
    x = abs(complex(z).real)
    s = 2.0 * (delta + gamma) - 1.0
    bF = T.b_smeared(F) if F is not None else None
    right = T.power(z, gamma, Cp)
    boson = variant in ("a b(F)", "b*(F) a", "a")
    omegas = T.omega_a if boson else T.omega_b
    ladder = T.a if boson else T.b
    ops, weights = [], []
    for j, om in enumerate(omegas):
        L = ladder[j]
        if variant in ("a b(F)", "b b(F)"):
            core = L @ bF
        elif variant in ("b*(F) a", "b*(F) b"):
            core = bF.conj().T @ L
        elif variant in ("a", "b"):
            core = L
        else:
            raise ValueError(f"unknown variant {variant!r}")
        left = T.power(z, delta, om + C)
        ops.append(left[:, None] * core * right[None, :])
        weights.append(om * (om + x) ** s)
    return _sup_weighted(ops, weights, psi)


def _check_dg(delta, gamma, z):
    if not (delta >= 0 and gamma >= 0 and 0.5 <= delta + gamma <= 1.0 + 1e-15):
        raise ValueError("need delta, gamma >= 0 and 1/2 <= delta + gamma <= 1")
    if complex(z).real >= -1:
        raise ValueError("need Re z < -1")


def audit_asharp(F, z: complex, delta: float, gamma: float, C: float, Cp: float, T: Truncation,
                 psi=None) -> list[AuditReport]:
    """Four smeared variants against 4||F||^2 and the two bare variants against 1, as normalized ratios.

    Without `psi` the supremum over all unit vectors is taken (largest eigenvalue).
    """
    _check_dg(delta, gamma, z)
    nF2 = _vector_norm(F, T.w) ** 2
    info = {"z": complex(z), "delta": delta, "gamma": gamma, "C": C, "Cp": Cp}
    worst2, var2 = 0.0, None
    for v in ASHARP_VARIANTS:
        r = _ratio(asharp_lhs(F, z, delta, gamma, C, Cp, T, v, psi), 4.0 * nF2)
        if r >= worst2:
            worst2, var2 = r, v
    worst3, var3 = 0.0, None
    for v in ("a", "b"):
        r = asharp_lhs(None, z, delta, gamma, C, Cp, T, v, psi)
        if r >= worst3:
            worst3, var3 = r, v
    return [AuditReport("B2", 1, worst2, 1.0, {**info, "variant": var2}),
            AuditReport("B3", 1, worst3, 1.0, {**info, "variant": var3})]


def reg_term_alone_rhs(Fq, j: int, z: complex, delta: float, gamma: float, T: Truncation) -> float:
    x = abs(complex(z).real)
    wa, wb = T.omega_a[j], T.omega_b
    f2 = T.w * np.abs(np.asarray(Fq)) ** 2
    t1 = np.sum(f2 / (wb * (wb + x) ** (2 * (delta + gamma) - 1)))
    t2 = np.sum(f2 / ((wa + x) ** (2 * delta) * (wa + wb + x) ** (2 * gamma)))
    return float(math.sqrt(t1) + math.sqrt(t2))


def reg_term_alone_lhs(Fq, j: int, z: complex, delta: float, gamma: float, C: float, Cp: float,
                       T: Truncation) -> float:
    left = T.power(z, delta, T.omega_a[j] + C)
    right = T.power(z, gamma, Cp)
    return operator_norm(left[:, None] * T.b_smeared(Fq) * right[None, :])


def audit_reg_term_alone(F: Kernel, z: complex, delta: float, gamma: float, C: float, Cp: float,
                         T: Truncation) -> AuditReport:
    """Per boson mode q_j: ||R0(z-w_a(q_j)-C)^d b(F(.,q_j)) R0(z-C')^g|| over the two-term bound.

    Both the unshifted statement (C = C' = 0) and the given shifts are measured.
    """
    if not (0 <= delta <= 1 and 0 <= gamma <= 1 and delta + gamma >= 0.5 and complex(z).real < -1):
        raise ValueError("need delta, gamma in [0,1], delta + gamma >= 1/2, Re z < -1")
    worst, info = 0.0, {}
    for j in range(F.values.shape[1]):
        Fq = F.values[:, j]
        rhs = reg_term_alone_rhs(Fq, j, z, delta, gamma, T)
        for c, cp in {(0.0, 0.0), (C, Cp)}:
            r = _ratio(reg_term_alone_lhs(Fq, j, z, delta, gamma, c, cp, T), rhs)
            if r >= worst:
                worst, info = r, {"mode": j, "C": c, "Cp": cp}
    info.update(z=complex(z), delta=delta, gamma=gamma)
    return AuditReport("B4", 1, worst, 1.0, info)


# ---------------------------------------------------------------- power shifts

def power_integral(F: Kernel, exps: Sequence[float], lam: float, params: DispersionParams) -> float:
    """sum w^2 |F|^2 / (w_a^al [w_a+lam]^be w_b^ga [w_b+lam]^de)."""
    al, be, ga, de = exps
    wb = F.grid.energies(FERMION, params)[:, None]
    wa = F.grid.energies(BOSON, params)[None, :]
    den = wa ** al * (wa + lam) ** be * wb ** ga * (wb + lam) ** de
    return float(F.w ** 2 * np.sum(np.abs(F.values) ** 2 / den))


def refine_lambdas(lambdas: Sequence[float]) -> np.ndarray:
    """Insert geometric (or arithmetic next to 0) midpoints between consecutive values."""
    lam = np.sort(np.asarray(lambdas, dtype=float))
    mids = [math.sqrt(a * b) if a > 0 else 0.5 * b for a, b in zip(lam, lam[1:])]
    return np.sort(np.concatenate([lam, mids]))


def audit_power_shift(F: Kernel, lambdas: Sequence[float], exps: Sequence[float], exps2: Sequence[float],
                      params: DispersionParams, ceiling: float = DEFAULT_CEILING) -> AuditReport:
    """sup over lambda of I(exps) / I(exps2); also reports the sup on a refined lambda grid."""
    if min(list(exps) + list(exps2)) < 0:
        raise ValueError("exponents must be nonnegative")
    al, be, ga, de = exps
    al2, be2, ga2, de2 = exps2
    if not (math.isclose(al + ga, al2 + ga2) and math.isclose(be + de, be2 + de2)):
        raise ValueError("exponent balance alpha+gamma and beta+delta must match")

    def sup(grid):
        vals = []
        for lam in grid:
            num, den = power_integral(F, exps, lam, params), power_integral(F, exps2, lam, params)
            vals.append(_ratio(num, den))
        return max(vals)

    coarse = sup(lambdas)
    fine = sup(refine_lambdas(lambdas))
    return AuditReport("B5", 1, max(coarse, fine), ceiling,
                       {"exps": tuple(exps), "exps2": tuple(exps2), "sup_coarse": coarse, "sup_refined": fine})


# ---------------------------------------------------------------- block bounds

def audit_e_fg(F: Kernel, G: Kernel, params: DispersionParams) -> float:
    """-sum w^2 |F G| / (omega_b(k) + omega_a(q))."""
    if F.grid is not G.grid and F.values.shape != G.values.shape:
        raise ValueError("kernels live on different grids")
    wb = F.grid.energies(FERMION, params)[:, None]
    wa = F.grid.energies(BOSON, params)[None, :]
    return -float(F.w ** 2 * np.sum(np.abs(F.values * G.values) / (wb + wa)))


def k1_boson_form(z: complex, beta: float, F: Kernel, params: DispersionParams) -> float:
    """The K1-type constant with the boson dispersion in the weight."""
    x = abs(complex(z).real)
    wa = F.grid.energies(BOSON, params)[None, :]
    return math.sqrt(F.w ** 2 * float(np.sum(np.abs(F.values) ** 2 / (wa * (wa + x) ** (2 * beta - 1)))))


BLOCK_COMBOS = ("C1", "C2", "C3", "C4", "C5", "C6")


def block_norms(combo: str, kernels: Sequence[Kernel], z: complex, exps: Sequence[float],
                T: Truncation) -> dict[str, float]:
    """Measured operator norms of each displayed form of one block combination."""
    basis = T.basis
    H = lambda tag, F: block(tag, F, basis).toarray()
    R = lambda a: T.power(z, a)
    R1 = R(1)
    lmul = lambda d, M: d[:, None] * M
    rmul = lambda M, d: M * d[None, :]
    out: dict[str, float] = {}
    if combo == "C1":
        (F,), (beta,) = kernels, exps
        Rb = R(beta)
        out["ab R^b"] = operator_norm(rmul(H("ab", F), Rb))
        out["R^b a*b*"] = operator_norm(lmul(Rb, H("a*b*", F)))
        out["ab* R^b"] = operator_norm(rmul(H("ab*", F), Rb))
        out["R^b a*b"] = operator_norm(lmul(Rb, H("a*b", F)))
    elif combo == "C2":
        (F, G), (gamma, delta) = kernels, exps
        M = rmul(H("ab", F), R1) @ H("a*b*", G) + audit_e_fg(F, G, T.params) * np.eye(basis.dim)
        out["corrected"] = operator_norm(rmul(lmul(R(gamma), M), R(delta)))
        bare = rmul(H("ab", F), R1) @ H("a*b*", G)
        out["uncorrected"] = operator_norm(rmul(lmul(R(gamma), bare), R(delta)))
    elif combo == "C3":
        (F, G), (beta,) = kernels, exps
        out["ab R a*b R^b"] = operator_norm(rmul(rmul(H("ab", F), R1) @ H("a*b", G), R(beta)))
        out["R^b ab* R a*b*"] = operator_norm(lmul(R(beta), rmul(H("ab*", G), R1) @ H("a*b*", F)))
    elif combo == "C4":
        (F, G), (delta, gamma) = kernels, exps
        M = rmul(H("ab*", F), R1) @ H("a*b", G)
        out["R^d ab* R a*b R^g"] = operator_norm(rmul(lmul(R(delta), M), R(gamma)))
    elif combo in ("C5", "C6"):
        (F1, F2, F3), (gamma,) = kernels, exps
        first = "ab" if combo == "C5" else "ab*"
        last = "a*b" if combo == "C6" else "a*b*"
        M1 = rmul(rmul(H(first, F1), R1) @ H("ab*", F2), R1) @ H("a*b*", F3)
        out["forward"] = operator_norm(rmul(M1, R(gamma)))
        M2 = rmul(rmul(H("ab", F3), R1) @ H("a*b", F2), R1) @ H(last, F1)
        out["backward"] = operator_norm(lmul(R(gamma), M2))
    else:
        raise ValueError(f"unknown block combination {combo!r}")
    return out


def block_constant(combo: str, kernels: Sequence[Kernel], z: complex, exps: Sequence[float],
                   params: DispersionParams) -> float:
    if combo == "C1":
        return k1_constant(z, exps[0], kernels[0], params)
    if combo in ("C2", "C4"):
        return k2_constant(z, exps[0] + exps[1], kernels[0], kernels[1], params)
    if combo == "C3":
        return k2_constant(z, exps[0], kernels[0], kernels[1], params)
    if combo in ("C5", "C6"):
        return k3_constant(z, exps[0], *kernels, params)
    raise ValueError(f"unknown block combination {combo!r}")


def audit_block_bounds(combo: str, kernels: Sequence[Kernel], z: complex, exps: Sequence[float],
                       T: Truncation, ceiling: float = DEFAULT_CEILING) -> AuditReport:
    """Largest measured norm over the K-constant of the combination.

    C1 is tested against 1; the others against `ceiling`. For C1 the descriptor also
    carries the ratio to the boson-dispersion form of the constant.
    """
    if complex(z).real >= -1:
        raise ValueError("need Re z < -1")
    norms = block_norms(combo, kernels, z, exps, T)
    K = block_constant(combo, kernels, z, exps, T.params)
    measured = {k: v for k, v in norms.items() if k != "uncorrected"}
    form, lhs = max(measured.items(), key=lambda kv: kv[1])
    info = {"z": complex(z), "exps": tuple(exps), "form": form, "norms": norms, "K": K}
    if combo == "C1":
        info["ratio_boson_form"] = _ratio(lhs, k1_boson_form(z, exps[0], kernels[0], T.params))
    return AuditReport(combo, 1, _ratio(lhs, K), 1.0 if combo == "C1" else ceiling, info)


# ---------------------------------------------------------------- randomized sweeps

@dataclass(frozen=True)
class AuditConfig:
    seed: int
    z: complex
    kernels: tuple
    exps: dict
    C: float
    Cp: float


def random_kernel(grid: ModeGrid, rng: np.random.Generator) -> Kernel:
    n = grid.size
    mag = rng.uniform(0.0, 1.0, (n, n))
    phase = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, (n, n)))
    return Kernel(mag * phase, grid)


POWER_SHIFT_LAMBDAS = (0.0, 0.1, 1.0, 10.0, 100.0, 1000.0)


def _balanced_exponents(rng: np.random.Generator) -> tuple[tuple, tuple]:
    """Two nonnegative quadruples with alpha+gamma and beta+delta equal."""
    al, be, ga, de = rng.uniform(0.0, 1.0, 4)
    t = rng.uniform(-al, ga)
    u = rng.uniform(-be, de)
    return (al, be, ga, de), (al + t, be + u, ga - t, de - u)


def random_configs(count: int, seed: int, grid: ModeGrid) -> list[AuditConfig]:
    """Seeded configurations: kernels with |F| <= 1, Re z in [-50, -2], admissible exponents."""
    children = np.random.SeedSequence(seed).spawn(count)
    out = []
    for child in children:
        rng = np.random.default_rng(child)
        z = complex(rng.uniform(-50.0, -2.0), rng.uniform(-5.0, 5.0))
        kernels = tuple(random_kernel(grid, rng) for _ in range(3))
        s = rng.uniform(0.5, 1.0)
        d = rng.uniform(0.0, s)
        d4 = rng.uniform(0.0, 1.0)
        g4 = rng.uniform(max(0.0, 0.5 - d4), 1.0)
        C = rng.uniform(0.0, 3.0)
        exps = {
            "alpha": rng.uniform(0.0, 1.0),
            "dg": (d, s - d),
            "dg4": (d4, g4),
            "beta1": rng.uniform(0.5, 1.0),
            "gd2": tuple(rng.uniform(0.0, 1.0, 2)),
            "beta3": rng.uniform(0.0, 1.0),
            "gamma5": rng.uniform(0.0, 1.0),
            "shift": _balanced_exponents(rng),
        }
        out.append(AuditConfig(int(child.generate_state(1)[0]), z, kernels, exps, C, C + rng.uniform(0.0, 3.0)))
    return out


def audit_config(cfg: AuditConfig, T: Truncation, ceiling: float = DEFAULT_CEILING) -> list[AuditReport]:
    F, G, H3 = cfg.kernels
    e = cfg.exps
    reports = [audit_fermion_bound(F.values[:, 0], cfg.z, cfg.C, cfg.Cp, e["alpha"], T)]
    reports += audit_asharp(F.values[:, 0], cfg.z, *e["dg"], cfg.C, cfg.Cp, T)
    reports.append(audit_reg_term_alone(F, cfg.z, *e["dg4"], cfg.C, cfg.Cp, T))
    reports.append(audit_power_shift(F, POWER_SHIFT_LAMBDAS, *e["shift"], T.params, ceiling))
    reports.append(audit_block_bounds("C1", (F,), cfg.z, (e["beta1"],), T, ceiling))
    reports.append(audit_block_bounds("C2", (F, G), cfg.z, e["gd2"], T, ceiling))
    reports.append(audit_block_bounds("C3", (F, G), cfg.z, (e["beta3"],), T, ceiling))
    reports.append(audit_block_bounds("C4", (F, G), cfg.z, e["gd2"], T, ceiling))
    reports.append(audit_block_bounds("C5", (F, G, H3), cfg.z, (e["gamma5"],), T, ceiling))
    reports.append(audit_block_bounds("C6", (F, G, H3), cfg.z, (e["gamma5"],), T, ceiling))
    for r in reports:
        r.worst["seed"] = cfg.seed
    return reports


def run_audits(count: int = 100, seed: int = 0, cells: int = 3, boson_cap: int = 2,
               params: DispersionParams | None = None, threads: int = 1,
               ceiling: float = DEFAULT_CEILING) -> list[AuditReport]:
    """Randomized sweep of all explicit-constant and block audits on a d=1 truncation."""
    params = params or DispersionParams()
    grid = build_grid(1, 2.0, cells)
    T = truncation(grid, params, boson_cap)
    # warm the shared caches before threads read them
    T.a, T.b, T.energies, T.omega_a, T.omega_b
    configs = random_configs(count, seed, grid)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda c: audit_config(c, T, ceiling), configs))
    return merge_reports(list(itertools.chain.from_iterable(results)))


def refinement_study(cells: Sequence[int], z: complex, kspec: KernelSpec, cspec: CutoffSpec,
                     params: DispersionParams | None = None, Q_max: float = 4.0, boson_cap: int = 2,
                     exps: dict | None = None) -> dict[str, list[float]]:
    """Hidden-constant ratios of one physical kernel pair sampled on successively finer d=1 grids."""
    params = params or DispersionParams()
    exps = exps or {"C2": (0.25, 0.25), "C3": (0.5,), "C4": (0.25, 0.25), "C5": (0.25,), "C6": (0.25,)}
    out: dict[str, list[float]] = {k: [] for k in ("B5",) + BLOCK_COMBOS[1:]}
    for n in cells:
        grid = build_grid(1, Q_max, n)
        km = kernel_matrix(kspec, cspec, params, grid)
        T = truncation(grid, params, boson_cap)
        G1, G2 = km.G1, km.G2
        kernels = {"C2": (G2, G2), "C3": (G2, G1), "C4": (G1, G1), "C5": (G2, G1, G2), "C6": (G1, G1, G2)}
        out["B5"].append(audit_power_shift(G2, POWER_SHIFT_LAMBDAS, (0.5, 0.0, 0.0, 0.5),
                                           (0.25, 0.25, 0.25, 0.25), params).max_ratio)
        for combo in BLOCK_COMBOS[1:]:
            out[combo].append(audit_block_bounds(combo, kernels[combo], z, exps[combo], T).max_ratio)
    return out
