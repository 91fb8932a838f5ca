"""State-vector oracle: bitwise Hamiltonian, Krylov propagation, observables."""

import numpy as np
import pytest

from dtwa_quench.lattice import build_lattice, coupling_matrix
from dtwa_quench.oracle_ed import (
    M_MAX,
    apply_hamiltonian,
    collective_sx,
    collective_sz,
    dense_evolve,
    dense_hamiltonian,
    ed_run,
    evolve_ed,
    expect_pair,
    expect_pair_ladder,
    expect_sigma_x,
    expect_sigma_y,
    prepare_plus_x,
)
from dtwa_quench.oracle_ising import ising_connected, ising_magnetization


def _couplings(nx, ny, model, alpha, J=1.0):
    return coupling_matrix(build_lattice(nx, ny), model, J=J, alpha=alpha)


def test_plus_x_state_uniform():
    psi = prepare_plus_x(3)
    assert psi.shape == (8,)
    assert np.allclose(psi, 2.0 ** (-1.5))
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        prepare_plus_x(M_MAX + 1)


def test_plus_x_state_observables():
    psi = prepare_plus_x(4)
    for n in range(4):
        assert expect_sigma_x(psi, n) == pytest.approx(1.0, abs=1e-14)
        assert expect_sigma_y(psi, n) == pytest.approx(0.0, abs=1e-14)
    assert collective_sx(psi) == pytest.approx(4.0, abs=1e-13)
    assert collective_sz(psi) == pytest.approx(0.0, abs=1e-13)


def test_ising_hamiltonian_diagonal_convention():
    # bit set = spin up; |up, up> for M = 2 is index 3
    c = _couplings(1, 2, "ising", alpha=1.0, J=0.7)
    basis = np.eye(4, dtype=np.complex128)
    expected_diag = [0.7, -0.7, -0.7, 0.7]  # z_0 z_1 on |00>,|01>,|10>,|11>
    for a in range(4):
        h = apply_hamiltonian(c, basis[a])
        assert h[a].real == pytest.approx(expected_diag[a], rel=1e-15)
        assert np.abs(np.delete(h, a)).max() == 0.0


def test_xy_hamiltonian_swaps_antialigned():
    c = _couplings(1, 2, "xy", alpha=1.0, J=0.7)
    e01 = np.zeros(4, dtype=np.complex128)
    e01[1] = 1.0
    h = apply_hamiltonian(c, e01)
    # (xx + yy) coupling maps |01> to 2 J |10>; aligned states are untouched
    expected = np.zeros(4, dtype=np.complex128)
    expected[2] = 2 * 0.7
    assert np.allclose(h, expected, atol=1e-15)
    e11 = np.zeros(4, dtype=np.complex128)
    e11[3] = 1.0
    assert np.abs(apply_hamiltonian(c, e11)).max() == 0.0


def test_hamiltonian_hermitian():
    rng = np.random.default_rng(0)
    for model in ("ising", "xy"):
        c = _couplings(2, 3, model, alpha=1.3)
        dim = 1 << 6
        u = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        lhs = np.vdot(u, apply_hamiltonian(c, v))
        rhs = np.vdot(apply_hamiltonian(c, u), v)
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_dense_hamiltonian_matches_matrix_free():
    rng = np.random.default_rng(1)
    for model in ("ising", "xy"):
        c = _couplings(2, 2, model, alpha=0.8)
        H = dense_hamiltonian(c)
        assert np.allclose(H, H.T)
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        assert np.allclose(H @ psi, apply_hamiltonian(c, psi), atol=1e-13)
    with pytest.raises(ValueError):
        dense_hamiltonian(_couplings(3, 3, "xy", alpha=1.0))


def test_krylov_matches_dense_evolution():
    times = np.linspace(0.05, 2.0, 9)
    for model, alpha in (("xy", 1.0), ("xy", 3.0), ("ising", 0.5)):
        c = _couplings(2, 4, model, alpha=alpha)
        psi0 = prepare_plus_x(8)
        a = dense_evolve(psi0, c, times)
        b = evolve_ed(psi0, c, times)
        assert np.abs(a - b).max() < 1e-9


def test_krylov_handles_time_zero_and_dense_grids():
    c = _couplings(1, 6, "xy", alpha=2.0)
    psi0 = prepare_plus_x(6)
    times = np.linspace(0.0, 3.0, 61)
    states = evolve_ed(psi0, c, times)
    assert np.array_equal(states[0], psi0)
    ref = dense_evolve(psi0, c, times)
    assert np.abs(states - ref).max() < 1e-9


def test_unitarity_and_conservation():
    c = _couplings(1, 10, "xy", alpha=1.0)
    psi0 = prepare_plus_x(10)
    apply = lambda p: apply_hamiltonian(c, p)  # noqa: E731
    e0 = np.vdot(psi0, apply(psi0)).real
    for psi in evolve_ed(psi0, c, [0.5, 1.5, 3.0]):
        assert abs(np.linalg.norm(psi) - 1.0) < 1e-9
        e = np.vdot(psi, apply(psi)).real
        assert abs(e - e0) <= 1e-9 * max(1.0, abs(e0))
        assert abs(collective_sz(psi)) < 1e-9


def test_two_spin_xy_contrast_analytic():
    c = _couplings(1, 2, "xy", alpha=1.0)
    for t, want in ((0.25, 1.7551651237807455), (0.9, -0.4544041893861741)):
        ed = ed_run(c, [t])
        assert ed.series.mean("S_x")[0] == pytest.approx(want, rel=1e-10)


def test_ising_through_ed_matches_closed_form():
    c = _couplings(3, 3, "ising", alpha=1.0)
    psi0 = prepare_plus_x(9)
    (psi,) = evolve_ed(psi0, c, [0.3])
    assert expect_sigma_x(psi, 4) == pytest.approx(0.3200720460290328, rel=1e-10)
    c_xx, c_yy = ising_connected(c, 0, 4, 0.3)
    got_xx = expect_pair(psi, 0, 4, "xx") - expect_sigma_x(psi, 0) * expect_sigma_x(
        psi, 4
    )
    assert got_xx == pytest.approx(c_xx, rel=1e-10)
    got_yy = expect_pair(psi, 0, 4, "yy")
    assert got_yy == pytest.approx(c_yy, rel=1e-10)


def test_pair_ladder_consistent_with_pauli_pairs():
    c = _couplings(2, 3, "xy", alpha=1.0)
    (psi,) = evolve_ed(prepare_plus_x(6), c, [0.7])
    for i, j in ((0, 3), (1, 4), (2, 5)):
        pp, pm = expect_pair_ladder(psi, i, j)
        xx = expect_pair(psi, i, j, "xx")
        yy = expect_pair(psi, i, j, "yy")
        assert 2 * (pp + pm).real == pytest.approx(xx, abs=1e-12)
        assert 2 * (pm - pp).real == pytest.approx(yy, abs=1e-12)


def test_zz_pair_and_sigma_y_at_plus_x():
    psi = prepare_plus_x(4)
    assert expect_pair(psi, 0, 2, "zz") == pytest.approx(0.0, abs=1e-14)
    assert expect_pair(psi, 0, 2, "xx") == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        expect_pair(psi, 1, 1, "zz")


def test_ed_run_series_and_fields():
    c = _couplings(1, 6, "xy", alpha=3.0)
    times = np.linspace(0.0, 1.0, 6)
    res = ed_run(
        c, times, reference=0, partners=(1, 2, 3), components=("yy", "zz", "pp")
    )
    assert np.array_equal(res.series.times, times)
    assert res.series.mean("S_x")[0] == pytest.approx(6.0, abs=1e-12)
    assert np.all(res.series.stderr("S_x") == 0.0)
    assert set(res.fields) == {"yy", "zz"}
    fld = res.fields["yy"]
    assert np.array_equal(fld.separations, [1, 2, 3])
    assert np.allclose(fld.values[0], 0.0, atol=1e-12)  # product state
    assert "pair_pp_re_j1" in res.series.data
    assert res.diagnostics["max_norm_deviation"] < 1e-9
    assert res.diagnostics["max_sz_drift"] < 1e-9


def test_ed_run_checks_sites():
    c = _couplings(1, 4, "xy", alpha=1.0)
    with pytest.raises(ValueError):
        ed_run(c, [0.1], reference=0, partners=(9,), components=("yy",))


def test_site_cap_enforced():
    lat = build_lattice(1, M_MAX + 1)
    c = coupling_matrix(lat, "xy", alpha=1.0)
    with pytest.raises(ValueError):
        apply_hamiltonian(c, np.zeros(1 << (M_MAX + 1), dtype=np.complex128))
