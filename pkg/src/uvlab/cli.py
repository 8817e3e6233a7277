"""Command-line front end: `uvlab <subcommand> [--config PATH] [--out DIR] ...`.

Every run writes one CSV per table and a manifest.json describing the run.
Exit codes: 0 ok, 1 invalid configuration, 2 numerical non-convergence, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .config import ConfigError, RunConfig, build_system, load_config
from .counterterm import QuadratureSpec, e2_discrete, e2_quadrature, log_fit, power_fit, thresholds
from .estimates import run_audits
from .fock import algebra_report, basis_dimension, enumerate_basis, hermitian_deviation
from .hamiltonian import c_lambda
from .linalg import ConvergenceError, operator_norm
from .neumann import (count_sequences, direct_resolvent, enumerate_sequences, raw_series_partial,
                      region_bound, reordered_series_partial, shadow_check, word_check)
from .spectra import renormalized_sweep

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INVARIANT = 0, 1, 2, 3
SCHEMA_VERSION = 1
SUBCOMMANDS = ("algebra-check", "build", "counterterm", "thresholds", "neumann", "enumerate", "audit", "sweep")


class InvariantViolation(RuntimeError):
    pass


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v + 0.0) if v == v else "nan"  # + 0.0 folds -0.0 into 0.0
    return str(v)


def write_csv(path: Path, table: Table) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------- subcommands

def cmd_algebra_check(cfg: RunConfig, threads: int) -> list[Table]:
    t = Table("algebra", ["M_a", "M_f", "boson_cap", "dim", "car_max", "ccr_max_below_cap", "mixed_max",
                          "boundary_only", "ok"])
    cap = cfg.discretization.boson_cap
    for M in range(1, cfg.grid().size + 1):
        if basis_dimension(M, M, cap) > 10_000:
            break
        r = algebra_report(enumerate_basis(M, M, cap))
        t.rows.append([M, M, cap, r.dim, r.car_max, r.ccr_max_below_cap, r.mixed_max, r.boundary_only, r.ok])
    if not all(row[-1] for row in t.rows):
        raise InvariantViolation("canonical relations violated")
    return [t]


def cmd_build(cfg: RunConfig, threads: int) -> list[Table]:
    t = Table("build", ["Lambda", "modes", "dim", "nnz", "hermitian_deviation", "e2_discrete", "C_Lambda"])
    grid = cfg.grid()
    for L in cfg.cutoffs.lambdas:
        parts = build_system(cfg, L, grid=grid)
        H = parts.H_full.matrix
        t.rows.append([L, grid.size, parts.basis.dim, H.nnz, hermitian_deviation(H),
                       e2_discrete(parts.km, parts.params), c_lambda(parts.km, parts.params)])
    return [t]


def cmd_counterterm(cfg: RunConfig, threads: int) -> list[Table]:
    vals = Table("counterterm", ["Lambda", "e2_quadrature", "error", "converged", "e2_discrete"])
    m, s = cfg.model, cfg.solver
    qspec = QuadratureSpec(method=s.quadrature, error_target=s.quad_tol, seed=s.seed)
    grid = cfg.grid()
    ys = []
    for L in cfg.cutoffs.lambdas:
        res = e2_quadrature(cfg.kernel_spec(), cfg.cutoff_spec(L), cfg.dispersion(), m.d, qspec)
        parts_km = build_system(cfg, L, grid=grid).km if grid.size <= 12 else None
        e2d = e2_discrete(parts_km, cfg.dispersion()) if parts_km is not None else math.nan
        vals.rows.append([L, res.value, res.error, res.converged, e2d])
        ys.append(res.value)
    fits = Table("counterterm_fits", ["model", "coef0", "coef1", "r2"])
    if len(ys) >= 3:
        a, b, r2 = log_fit(cfg.cutoffs.lambdas, ys)
        fits.rows.append(["a+b*log(Lambda)", a, b, r2])
        c, sl = power_fit(cfg.cutoffs.lambdas, ys)
        fits.rows.append(["c*Lambda^s", c, sl, math.nan])
    if not all(row[3] for row in vals.rows):
        raise ConvergenceError("quadrature missed its error target")
    return [vals, fits]


def cmd_thresholds(cfg: RunConfig, threads: int) -> list[Table]:
    r = thresholds(cfg.model.d, cfg.model.p)
    t = Table("thresholds", ["d", "p", "beta_min_K1", "beta_min_K2", "beta_min_K3", "feasible"])
    t.rows.append([r.d, str(r.p), str(r.beta_min_K1), str(r.beta_min_K2), str(r.beta_min_K3), r.scheme_feasible])
    return [t]


def cmd_neumann(cfg: RunConfig, threads: int) -> list[Table]:
    s = cfg.solver
    parts = build_system(cfg, cfg.cutoffs.lambdas[0])
    if parts.basis.dim > 4096:
        raise ConfigError("neumann works on dense matrices; basis dimension must be <= 4096")
    e2 = e2_discrete(parts.km, parts.params)
    z = s.z if s.z is not None else 2.0 * region_bound(parts) - 1.0
    D = direct_resolvent(z, parts, e2)
    raw = raw_series_partial(z, s.max_order, parts, e2, max_order=s.max_order)
    ro = reordered_series_partial(z, s.max_weight, parts, e2, max_weight=s.max_weight)
    t = Table("neumann", ["series", "depth", "last_term_norm", "residual_vs_direct", "gap_raw_reordered"])
    gap = operator_norm(raw.matrix - ro.matrix)
    t.rows.append(["raw", s.max_order, raw.term_norms[-1], operator_norm(raw.matrix - D), gap])
    t.rows.append(["reordered", s.max_weight, ro.term_norms[-1], operator_norm(ro.matrix - D), gap])
    norms = Table("neumann_terms", ["series", "order", "term_norm"])
    norms.rows += [["raw", k, v] for k, v in enumerate(raw.term_norms)]
    norms.rows += [["reordered", k, v] for k, v in enumerate(ro.term_norms)]
    if raw.diverged or ro.diverged:
        raise ConvergenceError("series term norms stopped decreasing")
    if gap > s.series_tol:
        raise InvariantViolation(f"raw and reordered series differ by {gap:.2e}")
    return [t, norms]


def cmd_enumerate(cfg: RunConfig, threads: int) -> list[Table]:
    K = cfg.solver.k
    t = Table("enumerate", ["k", "count", "count_alternative_rule", "word_identity", "shadow_identity"])
    words, shadow = word_check(min(K, 8)), shadow_check(min(K, 8))
    for k in range(K + 1):
        n = len(enumerate_sequences(k, max_weight=cfg.solver.max_weight))
        t.rows.append([k, n, count_sequences(k, "alternative"), words.get(k, ""), shadow.get(k, "")])
    if not all(words.values()) or not all(shadow.values()):
        raise InvariantViolation("regrouping identity failed")
    return [t]


def cmd_audit(cfg: RunConfig, threads: int) -> list[Table]:
    reports = run_audits(cfg.solver.audit_samples, cfg.solver.seed, params=cfg.dispersion(), threads=threads)
    t = Table("audit", ["lemma", "samples", "max_ratio", "bound_constant", "pass", "worst_seed"])
    for r in reports:
        t.rows.append([r.lemma, r.samples, r.max_ratio, r.bound_constant, r.passed, r.worst.get("seed", "")])
    if not all(r.passed for r in reports):
        raise InvariantViolation("an audit exceeded its bound")
    return [t]


def cmd_sweep(cfg: RunConfig, threads: int) -> list[Table]:
    res = renormalized_sweep(cfg, threads=threads)
    t = Table("sweep", ["Lambda", "E", "e2", "E_minus_e2", "C_Lambda", "gap", "residual"])
    for r in res.rows:
        t.rows.append([r.Lambda, r.E, r.e2, r.renormalized, r.C, r.gap, r.residual])
    if not res.lower_bound_ok():
        raise InvariantViolation("E_Lambda < -C_Lambda")
    return [t]


COMMANDS = {
    "algebra-check": cmd_algebra_check, "build": cmd_build, "counterterm": cmd_counterterm,
    "thresholds": cmd_thresholds, "neumann": cmd_neumann, "enumerate": cmd_enumerate,
    "audit": cmd_audit, "sweep": cmd_sweep,
}


# ---------------------------------------------------------------- orchestration

def _parse_lambdas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON config, or a previous manifest.json")
    common.add_argument("--out", type=Path, help="output directory (default: output.dir of the config)")
    common.add_argument("--threads", type=int, help="worker threads (fallback: $UVLAB_THREADS, then 1)")
    common.add_argument("--seed", type=int, help="override solver.seed")
    common.add_argument("--k", type=int, help="override solver.k (enumeration depth)")
    common.add_argument("--lambda-list", type=_parse_lambdas, help="override cutoffs.lambdas, comma separated")
    common.add_argument("--z", type=float, help="override solver.z (spectral parameter)")
    parser = argparse.ArgumentParser(prog="uvlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"uvlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> tuple[RunConfig, dict]:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    overrides = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        overrides["solver.seed"] = args.seed
        cfg = cfg.override("solver", seed=args.seed)
    if args.k is not None:
        overrides["solver.k"] = args.k
        cfg = cfg.override("solver", k=args.k)
    if args.z is not None:
        overrides["solver.z"] = args.z
        cfg = cfg.override("solver", z=args.z)
    if args.lambda_list is not None:
        overrides["cutoffs.lambdas"] = list(args.lambda_list)
        cfg = cfg.override("cutoffs", lambdas=tuple(args.lambda_list))
    return cfg, overrides


def resolve_threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("UVLAB_THREADS", "1")
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"UVLAB_THREADS={env!r} is not an integer") from exc
    if n < 1:
        raise ConfigError("thread count must be positive")
    return n


def versions() -> dict:
    return {"uvlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pyyaml": yaml.__version__}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, overrides = resolve_config(args)
        threads = resolve_threads(args)
    except ConfigError as exc:
        print(f"uvlab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status, message, tables = EXIT_OK, "ok", []
    try:
        tables = COMMANDS[args.command](cfg, threads)
    except ConfigError as exc:
        status, message = EXIT_CONFIG, f"invalid configuration: {exc}"
    except ConvergenceError as exc:
        status, message = EXIT_CONVERGENCE, f"non-convergence: {exc}"
    except InvariantViolation as exc:
        status, message = EXIT_INVARIANT, f"invariant violation: {exc}"
    elapsed = time.perf_counter() - start
    files = {}
    for t in tables:
        path = out / f"{t.name}.csv"
        files[path.name] = write_csv(path, t)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "config": cfg.to_dict(),
        "overrides": overrides,
        "threads": threads,
        "seeds": {"solver.seed": cfg.solver.seed},
        "versions": versions(),
        "timings": {"total_seconds": elapsed},
        "outputs": files,
        "status": status,
        "message": message,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for t in tables:
        print(f"{t.name}: {len(t.rows)} rows -> {out / (t.name + '.csv')}")
    if status != EXIT_OK:
        print(f"uvlab: {message}", file=sys.stderr)
    return status


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
