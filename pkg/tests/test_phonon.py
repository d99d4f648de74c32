import numpy as np
import pytest

from crystorus import crystal as cr
from crystorus import phonon as ph

import oracles

CUBIC = ph.CubicModuli(1.0, 0.5, 0.3, 1.0)


def oh_rotations():
    sg = cr.symmorphic_space_group(cr.Lattice.cubic(3), cr.OH_GENERATORS)
    return cr.cartesian_representation(sg)


def random_objective_tensor(rng, d=3):
    B = ph.objective_basis(d)
    return ph.ElasticTensor(np.einsum("n,nabij->abij", rng.standard_normal(len(B)), B), objective=True)


def random_unit(rng, d=3):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


# -- inputs -------------------------------------------------------------------


def test_density_validation():
    with pytest.raises(ph.DensityNotPositiveDefinite):
        ph.DensityMatrix(np.diag([1.0, -1.0]))
    with pytest.raises(ph.PhononError):
        ph.DensityMatrix(np.array([[1.0, 0.2], [0.0, 1.0]]))
    assert ph.DensityMatrix.scalar(2.0, 2).dim == 2


def test_tensor_validation():
    C = np.zeros((2, 2, 2, 2))
    C[0, 1, 0, 0] = 1.0
    with pytest.raises(ph.PhononError, match="major"):
        ph.ElasticTensor(C)
    C = np.zeros((2, 2, 2, 2))
    C[0, 1, 0, 0] = C[1, 0, 0, 0] = 1.0
    ph.ElasticTensor(C)
    with pytest.raises(ph.PhononError, match="minor"):
        ph.ElasticTensor(C, objective=True)


def test_moduli_checks():
    CUBIC.check()
    with pytest.raises(ph.PhononError):
        ph.CubicModuli(1.0, 1.0, 0.3).check()
    with pytest.raises(ph.PhononError):
        ph.IsotropicModuli(1.0, -0.1).check()


def test_objective_basis_has_21_elements():
    B = ph.objective_basis(3)
    assert B.shape == (21, 3, 3, 3, 3)
    gram = np.einsum("nabij,mabij->nm", B, B)
    np.testing.assert_allclose(gram, np.eye(21), atol=1e-14)


# -- closed forms -----------------------------------------------------------


@pytest.mark.parametrize("kk", [0.3, 1.0, 7.5])
def test_cubic_closed_forms(kk):
    rho, C = ph.assemble_cubic(CUBIC)
    w2 = ph.dispersion(rho, C, kk * np.array([1.0, 0, 0])).eigenvalues
    np.testing.assert_allclose(w2, oracles.cubic_closed_form_100(1.0, 0.5, 0.3, 1.0, kk), rtol=1e-9)
    n = np.ones(3) / np.sqrt(3)
    w2 = ph.dispersion(rho, C, kk * n).eigenvalues
    np.testing.assert_allclose(w2, oracles.cubic_closed_form_111(1.0, 0.5, 0.3, 1.0, kk), rtol=1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_isotropic_closed_forms(d):
    rng = np.random.default_rng(d)
    for _ in range(100):
        mu = rng.uniform(0.1, 3.0)
        lam = rng.uniform(-2 * mu / d + 0.05, 3.0)
        rho_s = rng.uniform(0.5, 4.0)
        m = ph.IsotropicModuli(lam, mu, rho_s)
        m.check()
        rho, C = ph.assemble_isotropic(m, d)
        k = rng.uniform(0.1, 5.0) * random_unit(rng, d)
        w = ph.frequencies(rho, C, k)
        np.testing.assert_allclose(w, oracles.isotropic_frequencies(lam, mu, rho_s, k, d), rtol=1e-9)
        # transverse branch is exactly (d-1)-fold, the longitudinal is separate
        assert np.all(np.abs(w[: d - 1] - w[0]) <= 1e-9 * w[-1])
        assert w[-1] - w[d - 2] > 1e-6 * w[-1]


def test_cubic_christoffel_cross_check():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        c11, c12, c44 = rng.uniform(-2, 2, size=3)
        m = ph.CubicModuli(c11, c12, c44)
        k = rng.uniform(-3, 3, size=3)
        _, C = ph.assemble_cubic(m)
        worst = max(worst, np.abs(ph.cubic_christoffel(m, k) - ph.christoffel(C, k)).max())
    assert worst < 1e-12


def test_cubic_energy_and_stress_match_tensor():
    rng = np.random.default_rng(1)
    _, C = ph.assemble_cubic(CUBIC)
    for _ in range(20):
        e = rng.standard_normal((3, 3))
        e = 0.5 * (e + e.T)
        assert ph.cubic_energy(CUBIC, e) == pytest.approx(ph.strain_energy(C, e), rel=1e-12)
        np.testing.assert_allclose(ph.stress(CUBIC, e), ph.noether_momenta(C, e).T, atol=1e-12)


def test_noether_momenta_isotropic_sign():
    _, C = ph.assemble_isotropic(ph.IsotropicModuli(1.0, 0.5))
    pi = ph.noether_momenta(C, np.eye(3))
    np.testing.assert_allclose(pi, (3 * 1.0 + 2 * 0.5) * np.eye(3), atol=1e-14)


def test_energy_density():
    rho, C = ph.assemble_isotropic(ph.IsotropicModuli(1.0, 0.5, 2.0))
    v = np.array([1.0, 0.0, 0.0])
    assert ph.energy_momentum_tt(rho, C, v, np.zeros((3, 3))) == pytest.approx(1.0)


# -- dispersion details -------------------------------------------------------


def test_polarizations_rho_orthonormal():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3))
    rho = ph.DensityMatrix(A @ A.T + 3 * np.eye(3))
    C = random_objective_tensor(rng)
    C = ph.ElasticTensor(C.coeffs + 10 * ph.assemble_isotropic(ph.IsotropicModuli(1, 1))[1].coeffs)
    r = ph.dispersion(rho, C, random_unit(rng))
    np.testing.assert_allclose(r.polarizations.T @ rho.matrix @ r.polarizations, np.eye(3), atol=1e-12)
    G = ph.christoffel(C, r.k)
    np.testing.assert_allclose(G @ r.polarizations, rho.matrix @ r.polarizations * r.eigenvalues, atol=1e-10)


def test_degenerate_polarizations_are_canonical():
    rho, C = ph.assemble_cubic(CUBIC)
    r = ph.dispersion(rho, C, [1.0, 0, 0])
    np.testing.assert_allclose(r.polarizations, np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]]), atol=1e-12)


def test_unstable_flag():
    rho, C = ph.assemble_cubic(ph.CubicModuli(1.0, 0.5, -0.3))
    assert ph.dispersion(rho, C, [1.0, 0, 0]).unstable
    assert not ph.dispersion(*ph.assemble_cubic(CUBIC), [1.0, 0, 0]).unstable


def test_zero_k():
    r = ph.dispersion(*ph.assemble_cubic(CUBIC), [0.0, 0, 0])
    assert not r.unstable and np.all(r.omegas == 0)


# -- point-group projection ---------------------------------------------------


def test_oh_invariant_rank_is_three():
    assert ph.averaging_rank(oh_rotations()) == 3


def test_trivial_group_rank_is_21():
    assert ph.averaging_rank([np.eye(3)]) == 21


def test_projection_covariance_and_orbits():
    rng = np.random.default_rng(3)
    Rs = oh_rotations()
    rho = ph.DensityMatrix.scalar(1.3)
    C = ph.project_invariant(random_objective_tensor(rng), Rs)
    C = ph.ElasticTensor(C.coeffs + 5 * ph.assemble_cubic(CUBIC)[1].coeffs, objective=True)
    for _ in range(100):
        k = rng.standard_normal(3)
        G = ph.christoffel(C, k)
        w = ph.frequencies(rho, C, k)
        for R in Rs:
            np.testing.assert_allclose(ph.christoffel(C, R @ k), R @ G @ R.T, atol=1e-12)
            np.testing.assert_allclose(ph.frequencies(rho, C, R @ k), w, rtol=1e-9)


def test_projection_idempotent_and_fixes_invariant_tensors():
    rng = np.random.default_rng(4)
    Rs = oh_rotations()
    P1 = ph.project_invariant(random_objective_tensor(rng), Rs)
    P2 = ph.project_invariant(P1, Rs)
    np.testing.assert_allclose(P1.coeffs, P2.coeffs, atol=1e-13)
    _, C = ph.assemble_cubic(CUBIC)
    np.testing.assert_allclose(ph.project_invariant(C, Rs).coeffs, C.coeffs, atol=1e-14)
    rho = ph.DensityMatrix(np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(ph.project_invariant_density(rho, Rs).matrix, 2 * np.eye(3), atol=1e-14)


# -- k-path ---------------------------------------------------------------------


def test_kpath_table():
    rho, C = ph.assemble_cubic(CUBIC)
    table = ph.kpath_sweep(rho, C, [[0, 0, 0], [1, 0, 0], [1, 1, 0]], 4)
    assert table.header() == ["t", "kx", "ky", "kz", "omega1", "omega2", "omega3"]
    assert len(table.t) == 9
    assert table.t[-1] == pytest.approx(2.0)
    np.testing.assert_allclose(table.omegas[4], [np.sqrt(0.3), np.sqrt(0.3), 1.0], rtol=1e-12)
    csv1 = table.to_csv()
    assert csv1 == ph.kpath_sweep(rho, C, [[0, 0, 0], [1, 0, 0], [1, 1, 0]], 4).to_csv()
    assert csv1.splitlines()[0] == "t,kx,ky,kz,omega1,omega2,omega3"


# -- simulation -----------------------------------------------------------------


def run_cubic(n, steps=10_000, branch=2, cfl=0.5):
    rho, C = ph.assemble_cubic(CUBIC)
    state = ph.plane_wave_state(rho, C, [1.0, 0, 0], n, branch=branch)
    dt = ph.stable_dt(rho, C, state, cfl)
    return ph.simulate_wave(rho, C, state, dt, steps, cfl)


def test_simulation_matches_dispersion_and_conserves_energy():
    errs = []
    for n in (64, 128, 256):
        traj = run_cubic(n)
        pred = 2 * np.pi * np.sqrt(CUBIC.c11 / CUBIC.rho)
        assert traj.predicted_omegas[2] == pytest.approx(pred, rel=1e-12)
        errs.append(abs(traj.observed_omegas[2] - pred) / pred)
        assert traj.relative_drift < 1e-6
    assert errs[-1] < 0.01
    assert errs[0] > errs[1] > errs[2]


def test_transverse_branch_isotropic():
    m = ph.IsotropicModuli(1.0, 0.5, 2.0)
    rho, C = ph.assemble_isotropic(m)
    state = ph.plane_wave_state(rho, C, [0, 1.0, 0], 128, length=2.0, mode=2, branch=0)
    traj = ph.simulate_wave(rho, C, state, ph.stable_dt(rho, C, state), 4000)
    pred = np.sqrt(m.mu / m.rho) * 2 * np.pi
    assert traj.observed_omegas[0] == pytest.approx(pred, rel=1e-2)
    assert traj.observed_omegas[2] == 0


def test_zero_initial_state_gives_zero_series():
    rho, C = ph.assemble_cubic(CUBIC)
    state = ph.plane_wave_state(rho, C, [1.0, 0, 0], 32, amplitude=0.0)
    traj = ph.simulate_wave(rho, C, state, 1e-3, 50)
    assert not traj.total.any()
    assert not traj.observed_omegas.any()


def test_cfl_violation():
    rho, C = ph.assemble_cubic(CUBIC)
    state = ph.plane_wave_state(rho, C, [1.0, 0, 0], 32)
    dt_max = ph.stable_dt(rho, C, state, 0.5)
    with pytest.raises(ph.CFLViolation) as info:
        ph.simulate_wave(rho, C, state, 2 * dt_max, 10)
    assert info.value.dt_max == pytest.approx(dt_max)


def test_energy_csv_deterministic():
    a = run_cubic(32, steps=20).energy_csv()
    b = run_cubic(32, steps=20).energy_csv()
    assert a == b
    assert a.splitlines()[0] == "step,time,kinetic,elastic,total"
    assert len(a.splitlines()) == 22
