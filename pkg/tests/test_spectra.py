import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import two_by_two_ground
from uvlab.config import RunConfig, build_system
from uvlab.counterterm import e2_discrete
from uvlab.hamiltonian import c_lambda, two_mode_toy
from uvlab.modegrid import DispersionParams
from uvlab.spectra import (default_z, ground_energy, perturbation_check, renormalized_sweep, resolvent_distance,
                           scaled_hamiltonian, toy_closed_form)

SMALL = RunConfig().override("discretization", cells_per_axis=4, boson_cap=2)


def test_ground_energy_of_free_hamiltonian():
    parts = two_mode_toy(0.0, boson_cap=2)
    E, res = ground_energy(parts.H0)
    assert E == pytest.approx(0.0, abs=1e-12) and res <= 1e-9


@pytest.mark.parametrize("g,masses", [(0.4, (1.0, 1.0)), (1.7, (0.5, 2.0)), (0.9 - 0.3j, (2.0, 0.3))])
def test_toy_ground_energy_closed_form(g, masses):
    params = DispersionParams(*masses)
    # cap 1 with G1 = 0 keeps the vacuum sector two-dimensional
    parts = two_mode_toy(g, boson_cap=1, params=params)
    E, _ = ground_energy(parts.H_full)
    exact, _ = toy_closed_form(g, params=params)
    assert E == pytest.approx(exact, abs=1e-10)
    assert exact == pytest.approx(two_by_two_ground(abs(g), sum(masses)), abs=1e-13)


@given(st.floats(0.1, 10), st.integers(0, 2 ** 16))
@settings(max_examples=20, deadline=None)
def test_ground_energy_homogeneous(c, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30))
    H = (A + A.conj().T) / 2
    E1, _ = ground_energy(sp.csr_matrix(H))
    Ec, _ = ground_energy(sp.csr_matrix(c * H))
    assert Ec == pytest.approx(c * E1, rel=1e-9, abs=1e-9)


def test_ground_energy_matches_dense_solver():
    parts = build_system(SMALL, 6.0)
    E, _ = ground_energy(parts.H_full)
    assert abs(E - np.linalg.eigvalsh(parts.H_full.toarray())[0]) < 1e-9


def test_ground_energy_rejects_non_hermitian():
    M = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        ground_energy(M)


def test_perturbation_toy_is_exact():
    params = DispersionParams(1.0, 1.5)
    parts = two_mode_toy(0.8, boson_cap=1, params=params)
    rep = perturbation_check(parts)
    _, c2 = toy_closed_form(0.8, params=params)
    assert c2 == pytest.approx(-0.64 / 2.5, abs=1e-15)
    assert rep.c2 == pytest.approx(c2, abs=1e-8)
    assert rep.e2 == pytest.approx(c2, abs=1e-15)
    assert not rep.unstable


def test_perturbation_zero_kernels():
    parts = two_mode_toy(0.0, 0.0, boson_cap=2)
    rep = perturbation_check(parts)
    assert rep.c2 == pytest.approx(0.0, abs=1e-12) and rep.e2 == 0.0


def test_perturbation_multi_mode():
    parts = build_system(SMALL, 6.0)
    rep = perturbation_check(parts)
    assert rep.rel_mismatch < 1e-2


def test_perturbation_needs_positive_grid():
    with pytest.raises(ValueError):
        perturbation_check(two_mode_toy(0.5), (0.0, 0.1))


def test_scaled_hamiltonian_matches_rebuilt_coupling():
    parts = build_system(SMALL, 6.0)
    rebuilt = build_system(SMALL, 6.0, coupling=0.3)
    assert np.allclose(scaled_hamiltonian(parts, 0.3).toarray(), rebuilt.H_full.toarray(), atol=1e-14)


def test_energy_non_increasing_in_coupling():
    parts = build_system(SMALL, 6.0)
    energies = [ground_energy(scaled_hamiltonian(parts, lam))[0] for lam in (0.0, 0.25, 0.5, 1.0, 2.0)]
    assert energies[0] == pytest.approx(0.0, abs=1e-12)
    assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))


def test_sweep_without_coupling():
    res = renormalized_sweep(SMALL, coupling=0.0)
    for r in res.rows:
        assert r.E == pytest.approx(0.0, abs=1e-12)
        assert r.e2 == 0.0


def test_sweep_rows_and_lower_bound():
    res = renormalized_sweep(SMALL, threads=2)
    assert [r.Lambda for r in res.rows] == [2.0, 6.0, 10.0, 14.0]
    assert res.lower_bound_ok()
    for r in res.rows:
        assert r.residual <= SMALL.solver.eig_tol
        assert r.renormalized == r.E - r.e2
        assert r.gap >= 0
    assert res.metadata["modes"] == 4 and res.metadata["boson_cap"] == 2


def test_sweep_tail_differences_shrink():
    res = renormalized_sweep(RunConfig())
    assert res.tail_decreasing(3)


def test_resolvent_distance_trivial_cases():
    a = build_system(SMALL, 6.0)
    assert resolvent_distance(a, a) == 0.0
    zero1 = build_system(SMALL, 4.0, coupling=0.0)
    zero2 = build_system(SMALL, 8.0, coupling=0.0)
    assert resolvent_distance(zero1, zero2, z=-3.0) == 0.0


def test_resolvent_distance_matches_dense():
    a, b = build_system(SMALL, 4.0), build_system(SMALL, 8.0)
    z = default_z(a, b)
    assert z == -2.0 * (1 + 25 * max(c_lambda(a.km, a.params), c_lambda(b.km, b.params)) ** 2)
    n = a.basis.dim

    def R(p):
        return np.linalg.inv(p.H_full.toarray() - (e2_discrete(p.km, p.params) + z) * np.eye(n))

    dense = np.linalg.norm(R(a) - R(b), 2)
    assert resolvent_distance(a, b) == pytest.approx(dense, rel=1e-6)


def test_resolvent_distance_needs_shared_basis():
    a = build_system(SMALL, 4.0)
    b = build_system(SMALL.override("discretization", boson_cap=1), 4.0)
    with pytest.raises(ValueError):
        resolvent_distance(a, b)
