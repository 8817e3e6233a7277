"""Run configuration: model, cutoffs, discretization, solver and output blocks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .fock import enumerate_basis
from .hamiltonian import HamiltonianParts, build_full
from .modegrid import (CHI_SHAPES, F_SHAPES, R_CHI, CutoffSpec, DispersionParams, KernelSpec, ModeGrid,
                       build_grid, kernel_matrix)

FERMION_POLICIES = ("shared",)


class ConfigError(ValueError):
    """The configuration tree is malformed or fails validation."""


@dataclass(frozen=True)
class ModelBlock:
    d: int = 1
    p: float = 0.5
    m_b: float = 1.0
    m_f: float = 1.0
    h1: float = 1.0
    h2: float = 1.0
    coupling: float = 1.0


@dataclass(frozen=True)
class CutoffsBlock:
    lambdas: tuple = (2.0, 6.0, 10.0, 14.0)
    chi_shape: str = "indicator"
    n: int = 1
    f_shape: str = "ball-indicator"


@dataclass(frozen=True)
class DiscretizationBlock:
    Q_max: float = 16.0
    cells_per_axis: int = 8
    boson_cap: int = 1
    fermion_modes: str = "shared"


@dataclass(frozen=True)
class SolverBlock:
    eig_tol: float = 1e-9
    series_tol: float = 1e-8
    max_weight: int = 12
    max_order: int = 24
    seed: int = 0
    quadrature: str = "adaptive-radial"
    quad_tol: float = 1e-8
    audit_samples: int = 100
    k: int = 6
    z: float | None = None


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "out"
    csv: bool = True


BLOCKS = {"model": ModelBlock, "cutoffs": CutoffsBlock, "discretization": DiscretizationBlock,
          "solver": SolverBlock, "output": OutputBlock}


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    cutoffs: CutoffsBlock = field(default_factory=CutoffsBlock)
    discretization: DiscretizationBlock = field(default_factory=DiscretizationBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def validate(self) -> "RunConfig":
        m, c, g, s = self.model, self.cutoffs, self.discretization, self.solver
        if m.d not in (1, 2, 3):
            raise ConfigError("model.d must be 1, 2 or 3")
        if m.p < 0 or m.m_b <= 0 or m.m_f <= 0:
            raise ConfigError("model.p must be >= 0 and masses positive")
        if c.chi_shape not in CHI_SHAPES or c.f_shape not in F_SHAPES:
            raise ConfigError(f"cutoffs shapes must be in {CHI_SHAPES} and {F_SHAPES}")
        if not c.lambdas or any(L <= 0 for L in c.lambdas):
            raise ConfigError("cutoffs.lambdas must be a nonempty list of positive values")
        if list(c.lambdas) != sorted(c.lambdas):
            raise ConfigError("cutoffs.lambdas must be increasing")
        if int(c.n) != c.n or c.n < 1:
            raise ConfigError("cutoffs.n must be a positive integer")
        if g.Q_max < max(c.lambdas) * R_CHI:
            raise ConfigError("discretization.Q_max must be at least max(lambdas) * r_chi")
        if g.cells_per_axis < 1 or g.boson_cap < 0:
            raise ConfigError("discretization cells_per_axis >= 1 and boson_cap >= 0 required")
        if g.fermion_modes not in FERMION_POLICIES:
            raise ConfigError(f"discretization.fermion_modes must be one of {FERMION_POLICIES}")
        if min(s.eig_tol, s.series_tol, s.quad_tol) <= 0:
            raise ConfigError("tolerances must be positive")
        if s.max_weight < 0 or s.max_order < 0 or s.audit_samples < 1 or not 0 <= s.k <= s.max_weight:
            raise ConfigError("depth limits must be nonnegative and audit_samples positive")
        if s.z is not None and s.z >= 0:
            raise ConfigError("solver.z must be negative")
        return self

    def to_dict(self) -> dict:
        out = {name: asdict(getattr(self, name)) for name in BLOCKS}
        out["cutoffs"]["lambdas"] = list(self.cutoffs.lambdas)
        return out

    @classmethod
    def from_dict(cls, tree: dict | None) -> "RunConfig":
        tree = tree or {}
        if not isinstance(tree, dict):
            raise ConfigError("configuration root must be a mapping")
        unknown = set(tree) - set(BLOCKS)
        if unknown:
            raise ConfigError(f"unknown configuration blocks: {sorted(unknown)}")
        kwargs = {}
        for name, klass in BLOCKS.items():
            sub = tree.get(name) or {}
            if not isinstance(sub, dict):
                raise ConfigError(f"block {name!r} must be a mapping")
            allowed = {f.name for f in fields(klass)}
            bad = set(sub) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {name}: {sorted(bad)}")
            if "lambdas" in sub:
                sub = {**sub, "lambdas": tuple(float(x) for x in sub["lambdas"])}
            try:
                kwargs[name] = klass(**sub)
            except TypeError as exc:
                raise ConfigError(str(exc)) from exc
        return cls(**kwargs).validate()

    def override(self, block: str, **values) -> "RunConfig":
        return replace(self, **{block: replace(getattr(self, block), **values)}).validate()

    # derived objects

    def dispersion(self) -> DispersionParams:
        return DispersionParams(self.model.m_b, self.model.m_f)

    def kernel_spec(self, coupling: float | None = None) -> KernelSpec:
        m = self.model
        return KernelSpec(m.p, m.h1, m.h2, m.coupling if coupling is None else coupling)

    def cutoff_spec(self, Lambda: float) -> CutoffSpec:
        c = self.cutoffs
        return CutoffSpec(Lambda, c.chi_shape, int(c.n), c.f_shape)

    def grid(self) -> ModeGrid:
        g = self.discretization
        return build_grid(self.model.d, g.Q_max, g.cells_per_axis)


def load_config(path) -> RunConfig:
    """Read a YAML (or JSON) tree; a run manifest is accepted and its `config` entry used."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        tree = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if isinstance(tree, dict) and "config" in tree and "versions" in tree:
        tree = tree["config"]
    try:
        return RunConfig.from_dict(tree)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_system(cfg: RunConfig, Lambda: float, coupling: float | None = None,
                 grid: ModeGrid | None = None) -> HamiltonianParts:
    """Hamiltonian parts at one cutoff, on the configured grid and Fock truncation."""
    grid = grid or cfg.grid()
    params = cfg.dispersion()
    km = kernel_matrix(cfg.kernel_spec(coupling), cfg.cutoff_spec(Lambda), params, grid)
    basis = enumerate_basis(grid.size, grid.size, cfg.discretization.boson_cap)
    return build_full(km, params, basis)
