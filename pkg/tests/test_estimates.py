import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uvlab.counterterm import e2_discrete
from uvlab.estimates import (POWER_SHIFT_LAMBDAS, SLACK, AuditReport, asharp_lhs, audit_asharp, audit_block_bounds,
                             audit_e_fg, audit_fermion_bound, audit_power_shift, audit_reg_term_alone, block_norms,
                             merge_reports, reg_term_alone_lhs, run_audits, truncation, truncation_from_parts)
from uvlab.hamiltonian import two_mode_toy
from uvlab.modegrid import CutoffSpec, DispersionParams, Kernel, KernelSpec, build_grid, kernel_matrix

P = DispersionParams()


@pytest.fixture(scope="module")
def small():
    return truncation(build_grid(1, 2.0, 3), P, 2)


@pytest.fixture(scope="module")
def one_cell():
    # one boson and one fermion mode at zero momentum, w = 1
    return truncation(build_grid(1, 0.5, 1), DispersionParams(1.0, 1.5), 2)


def random_F(rng, n):
    return rng.uniform(0, 1, n) * np.exp(2j * np.pi * rng.uniform(0, 1, n))


def test_report_pass_rule():
    assert AuditReport("B1", 1, 1.0 + SLACK / 2, 1.0).passed
    assert not AuditReport("B1", 1, 1.0 + 2 * SLACK, 1.0).passed
    assert not AuditReport("C2", 1, math.inf, 32.0).passed


def test_merge_keeps_worst_and_orders_ids():
    reports = [AuditReport("C1", 1, 0.2, 1.0), AuditReport("B1", 1, 0.1, 1.0), AuditReport("C1", 1, 0.5, 1.0)]
    merged = merge_reports(reports)
    assert [r.lemma for r in merged] == ["B1", "C1"]
    assert merged[1].max_ratio == 0.5 and merged[1].samples == 2


# ---------------------------------------------------------------- B1

def test_fermion_bound_alpha_zero(small):
    F = random_F(np.random.default_rng(0), 3)
    r = audit_fermion_bound(F, -4.0, 0.5, 1.0, 0.0, small)
    assert r.max_ratio <= 0.5 + 1e-12


def test_fermion_bound_zero_kernel(small):
    assert audit_fermion_bound(np.zeros(3), -4.0, 0.0, 0.0, 0.7, small).max_ratio == 0.0


def test_fermion_bound_single_mode_deep_z(small):
    r = audit_fermion_bound(np.array([0.0, 1.0, 0.0]), -40.0, 0.0, 0.0, 1.0, small)
    assert r.max_ratio <= 1.0


@given(st.floats(0, 1), st.floats(0, 3), st.floats(0, 3), st.floats(-50, -1.01), st.integers(0, 2 ** 16))
@settings(max_examples=30, deadline=None)
def test_fermion_bound_holds(alpha, C, extra, x, seed):
    T = truncation(build_grid(1, 2.0, 2), P, 1)
    F = random_F(np.random.default_rng(seed), 2)
    assert audit_fermion_bound(F, x, C, C + extra, alpha, T).passed


def test_fermion_bound_rejects_bad_input(small):
    with pytest.raises(ValueError):
        audit_fermion_bound(np.ones(3), -0.5, 0.0, 0.0, 0.5, small)
    with pytest.raises(ValueError):
        audit_fermion_bound(np.ones(3), -3.0, 2.0, 1.0, 0.5, small)


# ---------------------------------------------------------------- B2, B3

def test_asharp_vacuum_is_zero(small):
    vac = np.zeros(small.basis.dim)
    vac[small.basis.index((0, 0, 0), 0)] = 1.0
    F = random_F(np.random.default_rng(1), 3)
    for v in ("a b(F)", "b b(F)", "a"):
        assert asharp_lhs(F, -3.0, 0.5, 0.25, 0.0, 0.0, small, v, vac) == 0.0


def test_asharp_zero_kernel(small):
    b2, b3 = audit_asharp(np.zeros(3), -3.0, 0.5, 0.5, 0.0, 0.0, small)
    assert b2.max_ratio == 0.0
    assert b3.passed


def test_asharp_single_boson_hand_formula(one_cell):
    T = one_cell
    psi = np.zeros(T.basis.dim)
    psi[T.basis.index((1,), 0)] = 1.0
    z, d, g, C, Cp = -3.0, 0.4, 0.35, 0.5, 1.25
    om = 1.0
    # a R0^g psi = (om - z + C')^-g |vac>, then the left power sees energy 0 shifted by om + C
    expected = om * (om + 3.0) ** (2 * (d + g) - 1) * (om + 3.0 + Cp) ** (-2 * g) * (om + 3.0 + C) ** (-2 * d)
    assert asharp_lhs(None, z, d, g, C, Cp, T, "a", psi) == pytest.approx(expected, rel=1e-13)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(-50, -1.01), st.floats(0, 3), st.integers(0, 2 ** 16))
@settings(max_examples=30, deadline=None)
def test_asharp_bounds_hold(d, s, x, C, seed):
    delta = d * 0.5
    gamma = 0.5 + s * 0.5 - delta
    T = truncation(build_grid(1, 2.0, 2), P, 2)
    F = random_F(np.random.default_rng(seed), 2)
    for r in audit_asharp(F, x, delta, gamma, C, C + 1.0, T):
        assert r.passed


def test_asharp_rejects_exponents_outside_range(small):
    with pytest.raises(ValueError):
        audit_asharp(np.ones(3), -3.0, 0.1, 0.2, 0.0, 0.0, small)


# ---------------------------------------------------------------- B4

def test_reg_term_zero_column(small):
    F = Kernel(np.zeros((3, 3)), small.grid)
    assert audit_reg_term_alone(F, -3.0, 0.5, 0.5, 0.0, 0.0, small).max_ratio == 0.0


def test_reg_term_single_fermion_mode():
    params = DispersionParams(1.0, 2.0)
    T = truncation(build_grid(1, 0.5, 1), params, 0)
    z, d, g, C, Cp = -3.0, 0.3, 0.6, 0.7, 1.1
    Fq = np.array([0.8 - 0.6j])
    # b(F) maps the occupied fermion state to the vacuum: a single nonzero entry
    expected = abs(Fq[0]) * (0.0 + 3.0 + 1.0 + C) ** (-d) * (2.0 + 3.0 + Cp) ** (-g)
    assert reg_term_alone_lhs(Fq, 0, z, d, g, C, Cp, T) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("x", [-1.5, -5.0, -30.0])
def test_reg_term_boundary_exponents(small, x):
    rng = np.random.default_rng(3)
    for _ in range(5):
        F = Kernel(rng.uniform(-1, 1, (3, 3)), small.grid)
        assert audit_reg_term_alone(F, x, 0.5, 0.0, 0.0, 0.0, small).passed


# ---------------------------------------------------------------- B5

def test_power_shift_identical_exponents(small):
    F = Kernel(np.random.default_rng(4).uniform(0.1, 1, (3, 3)), small.grid)
    e = (0.3, 0.2, 0.4, 0.1)
    r = audit_power_shift(F, POWER_SHIFT_LAMBDAS, e, e, P)
    assert r.max_ratio == pytest.approx(1.0, rel=1e-14)


def test_power_shift_single_cell_at_zero():
    grid = build_grid(1, 0.5, 1)
    F = Kernel([[0.7]], grid)
    # omega_a = 2, omega_b = 3: ratio of 1/omega_a to 1/omega_b
    r = audit_power_shift(F, (0.0,), (1, 0, 0, 0), (0, 0, 1, 0), DispersionParams(2.0, 3.0))
    assert r.max_ratio == pytest.approx(1.5, rel=1e-14)


def test_power_shift_full_unit_is_bounded():
    grid = build_grid(1, 8.0, 32)
    G = kernel_matrix(KernelSpec(0.5), CutoffSpec(8.0, n=4), P, grid).G2
    lams = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 16)])
    r = audit_power_shift(G, lams, (0, 1, 0, 0), (0, 0, 0, 1), P)
    assert np.isfinite(r.max_ratio) and r.passed
    assert r.worst["sup_refined"] <= 1.05 * r.worst["sup_coarse"]


def test_power_shift_requires_balance(small):
    F = Kernel(np.ones((3, 3)), small.grid)
    with pytest.raises(ValueError):
        audit_power_shift(F, (0.0,), (1, 0, 0, 0), (0, 1, 0, 0), P)


# ---------------------------------------------------------------- E(F, G) and block bounds

def test_e_fg_examples():
    grid = build_grid(1, 0.5, 1)
    params = DispersionParams(2.0, 3.0)
    assert audit_e_fg(Kernel([[1.0]], grid), Kernel([[0.0]], grid), params) == 0.0
    assert audit_e_fg(Kernel([[2.0]], grid), Kernel([[3.0]], grid), params) == pytest.approx(-6 / 5, abs=1e-15)


def test_e_fg_equals_counterterm():
    grid = build_grid(1, 4.0, 6)
    km = kernel_matrix(KernelSpec(0.5), CutoffSpec(4.0), P, grid)
    assert audit_e_fg(km.G2, km.G2, P) == e2_discrete(km, P)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30)
def test_e_fg_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(1, 2.0, 3)
    F, G = (Kernel(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)), grid) for _ in range(2))
    lhs = audit_e_fg(F, G, P) ** 2
    assert lhs <= audit_e_fg(F, F, P) * audit_e_fg(G, G, P) * (1 + 1e-12)


def test_block_audits_zero_kernels(small):
    Z = Kernel(np.zeros((3, 3)), small.grid)
    cases = {"C1": ((Z,), (0.75,)), "C2": ((Z, Z), (0.25, 0.25)), "C3": ((Z, Z), (0.5,)),
             "C4": ((Z, Z), (0.25, 0.25)), "C5": ((Z, Z, Z), (0.25,)), "C6": ((Z, Z, Z), (0.25,))}
    for combo, (kernels, exps) in cases.items():
        assert audit_block_bounds(combo, kernels, -3.0, exps, small).max_ratio == 0.0


def test_c1_on_toy():
    parts = two_mode_toy(0.8, 0.5, boson_cap=3)
    T = truncation_from_parts(parts)
    for F in (parts.km.G1, parts.km.G2):
        assert audit_block_bounds("C1", (F,), -4.0, (0.75,), T).passed


def _c2_norms(mass, x):
    parts = two_mode_toy(0.8, 0.0, boson_cap=3, params=DispersionParams(mass, mass))
    G = parts.km.G2
    return block_norms("C2", (G, G), x, (0.25, 0.25), truncation_from_parts(parts))


@pytest.mark.parametrize("x", [-2.0, -5.0])
def test_c2_correction_reduces_norm_when_pair_energy_dominates(x):
    # pair energy 20 >> |z|: the subtraction removes most of the vacuum loop
    norms = _c2_norms(10.0, x)
    assert norms["corrected"] < norms["uncorrected"]


def test_c2_correction_increases_norm_for_light_pairs():
    # pair energy 2 <= |z|: E(F,F) times the identity dominates the sectors where the bare product vanishes
    norms = _c2_norms(1.0, -2.0)
    assert norms["corrected"] > norms["uncorrected"]


def test_c1_fermion_constant_fails_for_heavy_fermions():
    # with m_f >> m_b the fermion-dispersion constant is exceeded, the boson-dispersion form is not
    grid = build_grid(1, 0.5, 1)
    T = truncation(grid, DispersionParams(0.01, 10.0), 2)
    r = audit_block_bounds("C1", (Kernel([[1.0]], grid),), -2.0, (1.0,), T)
    assert not r.passed
    assert r.worst["ratio_boson_form"] <= 1.0


def test_run_audits_is_deterministic():
    a = run_audits(count=6, seed=3)
    b = run_audits(count=6, seed=3, threads=3)
    assert [(r.lemma, r.max_ratio, r.samples) for r in a] == [(r.lemma, r.max_ratio, r.samples) for r in b]
    assert [r.lemma for r in a] == ["B1", "B2", "B3", "B4", "B5", "C1", "C2", "C3", "C4", "C5", "C6"]
    assert all(r.passed for r in a)
