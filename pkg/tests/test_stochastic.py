import numpy as np
import pytest

from qphase.core import PhysParams, build_grid, phase_moments
from qphase.potentials import PotentialSpec
from qphase import stochastic as st

P1 = PhysParams(1.0, 1.0)
QUARTIC = PotentialSpec.polynomial([0, 0, 0, 0, 1.0])
HARM = PotentialSpec.harmonic(1.0)
rng = np.random.default_rng(12345)


def test_closed_force_quartic_example():
    assert st.quantum_force_closed(QUARTIC, 1.0, 1.0, PhysParams(2.0, 1.0)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("U", [PotentialSpec.constant(2.0), PotentialSpec.linear(-0.7), PotentialSpec.harmonic(1.7)])
def test_classical_potentials_not_stochastic(U):
    R = rng.uniform(-5, 5, 1000)
    xi = rng.uniform(-10, 10, 1000)
    f = st.quantum_force_closed(U, R, xi, P1)
    assert np.abs(f + U.derivative(1, R)).max() <= 1e-12


def test_small_xi_limit():
    U = PotentialSpec.gaussian_well(1.0, 0.7)
    R = np.linspace(-2, 2, 9)
    assert np.array_equal(st.quantum_force_closed(U, R, 0.0, P1), -U.derivative(1, R))
    near = st.quantum_force_closed(U, R, 1e-6, P1)
    assert np.allclose(near, -U.derivative(1, R), atol=1e-10)


def test_series_examples():
    P2 = PhysParams(2.0, 1.0)
    assert st.quantum_force_series(QUARTIC, 1.0, 1.0, P2, 1) == pytest.approx(0.0, abs=1e-15)
    U = PotentialSpec.gaussian_well(1.3, 0.9)
    R = np.linspace(-2, 2, 7)
    assert np.array_equal(st.quantum_force_series(U, R, 3.0, P1, 0), -U.derivative(1, R))
    with pytest.raises(ValueError):
        st.quantum_force_series(U, 0.0, 1.0, P1, 6)


@pytest.mark.parametrize("coeffs", [[0, 0, 0, 0, 1.0], [0.3, -1, 0.5, 0.2, -0.1, 0.05], [0, 0, 0, 0, 0, 0, 0.01]])
def test_series_terminates_for_polynomials(coeffs):
    U = PotentialSpec.polynomial(coeffs)
    order = (U.degree - 1) // 2
    R = rng.uniform(-2, 2, 500)
    xi = rng.uniform(-2, 2, 500)
    a = st.quantum_force_closed(U, R, xi, P1)
    b = st.quantum_force_series(U, R, xi, P1, order)
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max())


def test_series_converges_for_well():
    U = PotentialSpec.gaussian_well(1.0, 1.0)
    closed = st.quantum_force_closed(U, 0.4, 0.5, P1)
    errs = [abs(st.quantum_force_series(U, 0.4, 0.5, P1, n) - closed) for n in range(5)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_noise_none():
    assert not st.sample_noise(st.NoiseModel("none"), 0.01, 100).any()


def test_noise_variance():
    model = st.NoiseModel("gaussian_white", 0.7, 0.01, seed=3)
    x = st.sample_noise(model, 0.01, 100_000)
    assert abs(x.var() / 0.49 - 1) <= 0.05
    u = st.sample_noise(st.NoiseModel("uniform", 0.7, 0.01, seed=3), 0.01, 100_000)
    assert np.abs(u).max() <= 0.7
    assert abs(u.var() / (0.49 / 3) - 1) <= 0.05


def test_noise_determinism():
    model = st.NoiseModel("gaussian_white", 1.0, 0.02, seed=2**63 + 5)
    a = st.sample_noise(model, 0.01, 500, stream=4)
    assert np.array_equal(a, st.sample_noise(model, 0.01, 500, stream=4))
    assert not np.array_equal(a, st.sample_noise(model, 0.01, 500, stream=5))
    # held for the correlation time
    assert np.array_equal(a[0::2], a[1::2])


def test_noise_contract():
    with pytest.raises(ValueError):
        st.NoiseModel("cauchy")
    with pytest.raises(ValueError):
        st.NoiseModel("uniform", -1.0)
    with pytest.raises(ValueError):
        st.sample_noise(st.NoiseModel("uniform", 1.0, 0.001), 0.01, 10)


def test_harmonic_trajectory_ignores_noise():
    noise = st.sample_noise(st.NoiseModel("gaussian_white", 5.0, 0.01, seed=1), 0.01, 1000)
    a = st.integrate_trajectory(1.0, 0.0, HARM, P1, noise, 0.01, 1000)
    b = st.integrate_trajectory(1.0, 0.0, HARM, P1, np.zeros(1000), 0.01, 1000)
    assert np.abs(a[0] - b[0]).max() <= 1e-12


def test_harmonic_oscillator_accuracy():
    T = 2 * np.pi
    dt = 5e-3
    steps = int(round(10 * T / dt))
    R, V = st.integrate_trajectory(1.0, 0.5, HARM, P1, np.zeros(steps), 10 * T / steps, steps, order=4)
    t = np.arange(steps + 1) * 10 * T / steps
    assert np.abs(R - (np.cos(t) + 0.5 * np.sin(t))).max() <= 1e-8


def test_energy_drift():
    steps = 10_000
    R, V = st.integrate_trajectory(1.0, 0.0, HARM, P1, np.zeros(steps), 1e-3, steps)
    E = st.energy(R, V, HARM, P1)
    assert np.abs(E - E[0]).max() <= 1e-6


def test_classical_limit_trajectory():
    tiny = PhysParams(1e-8, 1.0)
    U = PotentialSpec.polynomial([0, 0, 0.5, 0, 0.1])
    steps = 2000
    noise = st.sample_noise(st.NoiseModel("uniform", 3.0, 0.01, seed=9), 0.005, steps)
    a = st.integrate_trajectory(1.0, 0.0, U, tiny, noise, 0.005, steps)
    b = st.integrate_trajectory(1.0, 0.0, U, tiny, np.zeros(steps), 0.005, steps)
    assert np.abs(a[0] - b[0]).max() <= 1e-6


def test_parity_symmetry():
    U = PotentialSpec.polynomial([0, 0, 0.5, 0, 0.2])
    noise = st.NoiseModel("gaussian_white", 1.0, 0.01, seed=4)
    n, steps = 64, 400
    R0 = np.zeros(n)
    V0 = rng.normal(0, 1, n)
    ens = st.run_ensemble(R0, V0, U, P1, noise, 0.01, steps)
    mirrored = st.integrate_trajectory(-R0, -V0, U, P1, -ens.xi, 0.01, steps)
    assert np.abs(mirrored[0] + ens.R).max() <= 1e-12


def test_blow_up_detected():
    U = PotentialSpec.polynomial([0.0] * 12 + [1e10])
    with pytest.raises(FloatingPointError):
        with np.errstate(over="ignore", invalid="ignore"):
            st.integrate_trajectory(50.0, 0.0, U, P1, np.zeros(10), 0.1, 10)


def test_integrator_contract():
    with pytest.raises(ValueError):
        st.integrate_trajectory(0.0, 0.0, HARM, P1, np.zeros(5), 0.0, 5)
    with pytest.raises(ValueError):
        st.integrate_trajectory(0.0, 0.0, HARM, P1, np.zeros(4), 0.1, 5)
    with pytest.raises(ValueError):
        st.integrate_trajectory(0.0, 0.0, HARM, P1, np.zeros(5), 0.1, 5, order=3)


@pytest.fixture(scope="module")
def grid():
    return build_grid(-8, 8, 64, -8, 8, 64)


def test_kde_point_mass(grid):
    q = np.full(1000, 0.5)
    p = np.full(1000, -1.0)
    W = st.kde_field(q, p, grid, (0.4, 0.6))
    P, Q = grid.mesh()
    bump = np.exp(-((Q - 0.5) ** 2) / 0.32 - (P + 1) ** 2 / 0.72) / (2 * np.pi * 0.24)
    assert np.allclose(W.values, bump, atol=1e-13)


def test_kde_variance_identity():
    g = build_grid(-10, 10, 128, -10, 10, 128)
    r = np.random.default_rng(7)
    q = r.normal(0.3, 1.2, 100_000)
    p = r.normal(-0.5, 0.8, 100_000)
    h = (0.5, 0.3)
    m = phase_moments(st.kde_field(q, p, g, h))
    assert m.var_q == pytest.approx(q.var() + h[0] ** 2, rel=0.02)
    assert m.var_p == pytest.approx(p.var() + h[1] ** 2, rel=0.02)
    assert abs(m.norm - 1) <= 1e-6


@pytest.fixture(scope="module")
def ensemble():
    noise = st.NoiseModel("gaussian_white", 0.5, 0.02, seed=11)
    R0, V0 = st.gaussian_initial_states(2000, 0.5, 0.0, 0.8, 0.6, P1, seed=11)
    U = PotentialSpec.polynomial([0, 0, 0.5, 0, 0.05])
    return st.run_ensemble(R0, V0, U, P1, noise, 0.01, 100)


def test_ensemble_density_norm(ensemble, grid):
    W = st.ensemble_density(ensemble, grid)
    assert abs(W.norm - 1) <= 1e-6
    assert W.values.min() >= 0
    assert W.time == pytest.approx(1.0)


def test_ensemble_density_contract(ensemble, grid):
    with pytest.raises(ValueError):
        st.ensemble_density(ensemble, grid, (0.0, 0.1))
    small = st.run_ensemble(np.zeros(10), 0.0, HARM, P1, st.NoiseModel(), 0.01, 5)
    with pytest.raises(ValueError):
        st.ensemble_density(small, grid)
    empty = st.run_ensemble(np.zeros(0), 0.0, HARM, P1, st.NoiseModel(), 0.01, 5)
    with pytest.raises(ValueError):
        st.ensemble_density(empty, grid)


def test_ensemble_deterministic():
    noise = st.NoiseModel("uniform", 0.5, 0.02, seed=11)
    runs = [st.run_ensemble(*st.gaussian_initial_states(50, 0, 0, 1, 1, P1, seed=3), QUARTIC, P1, noise, 0.01, 20)
            for _ in range(2)]
    assert np.array_equal(runs[0].R, runs[1].R)
    assert np.array_equal(runs[0].final_state_table(), runs[1].final_state_table())


def test_closure_order0_and_determinism(ensemble, grid):
    W = st.ensemble_density(ensemble, grid)
    a = st.closure_diagnostic(ensemble, W)
    b = st.closure_diagnostic(ensemble, st.ensemble_density(ensemble, grid))
    assert a.to_text() == b.to_text()
    row0 = a.rows[0]
    assert row0.order == 0 and row0.sup <= a.binning_tolerance
    assert a.order0_within_tolerance
    assert [r.order for r in a.rows] == [0, 1, 2]
    assert a.samples == 2000 and a.p2_xi2_target == 2.0


def test_closure_noise_free(grid):
    R0, V0 = st.gaussian_initial_states(1500, 0.0, 0.0, 1.0, 1.0, P1, seed=2)
    ens = st.run_ensemble(R0, V0, HARM, P1, st.NoiseModel(), 0.01, 10)
    W = st.ensemble_density(ens, grid)
    rep = st.closure_diagnostic(ens, W, orders=(1,))
    # the weighted field vanishes, so the discrepancy is the whole target
    assert rep.rows[0].l2 == pytest.approx(rep.rows[0].target_l2, rel=1e-12)
    assert rep.p2_xi2 == 0


def test_closure_rejects_high_orders(ensemble, grid):
    W = st.ensemble_density(ensemble, grid)
    with pytest.raises(ValueError):
        st.closure_diagnostic(ensemble, W, orders=(0, 3))
