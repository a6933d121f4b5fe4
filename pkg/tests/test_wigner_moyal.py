import numpy as np
import pytest

from qphase.core import PhysParams, WignerField, build_grid, gaussian_wigner, phase_moments
from qphase.potentials import PotentialSpec
from qphase import wigner_moyal as wm

P1 = PhysParams(1.0, 1.0)
HARM = PotentialSpec.harmonic(1.0)
QUARTIC = PotentialSpec.polynomial([0, 0, 0, 0, 0.1])
WELL = PotentialSpec.gaussian_well(1.0, 1.0)


@pytest.fixture(scope="module")
def grid():
    return build_grid(-8, 8, 128, -8, 8, 128)


@pytest.fixture(scope="module")
def W0(grid):
    return gaussian_wigner(grid, 1.0, 0.0, 0.5, 0.5)


def test_constant_kernel_is_zero(grid, W0):
    k = wm.build_kernel(PotentialSpec.constant(3.0), grid, P1)
    assert not k.theta.any()
    # with no force only free transport remains
    free = wm.evolve_to(W0, PotentialSpec.constant(0.0), P1, 0.01, 50)
    const = wm.evolve_to(W0, PotentialSpec.constant(3.0), P1, 0.01, 50)
    assert np.array_equal(free.values, const.values)


@pytest.mark.parametrize("U", [HARM, PotentialSpec.linear(0.7), PotentialSpec.polynomial([1.0, -2.0, 0.3])])
def test_classical_potentials_exact_equals_truncated0(grid, U):
    exact = wm.build_kernel(U, grid, P1, "exact")
    trunc = wm.build_kernel(U, grid, P1, "truncated", 0)
    cls = wm.build_kernel(U, grid, P1, "classical")
    assert np.array_equal(exact.theta, trunc.theta)
    assert np.array_equal(trunc.theta, cls.theta)
    assert np.array_equal(exact.multiplier(0.01), trunc.multiplier(0.01))


def test_quartic_exact_minus_truncated1(grid):
    e = wm.build_kernel(QUARTIC, grid, P1, "exact").theta
    t1 = wm.build_kernel(QUARTIC, grid, P1, "truncated", 1).theta
    t0 = wm.build_kernel(QUARTIC, grid, P1, "truncated", 0).theta
    # the odd series of a quartic stops at the cubic term
    assert np.abs(e - t1).max() == 0
    assert np.abs(e - t0).max() > 0


def test_truncation_remainder_is_fifth_order(grid):
    # for a non-polynomial well the remainder after n = 1 scales as lambda^5
    e = wm.build_kernel(WELL, grid, P1, "exact").theta
    t1 = wm.build_kernel(WELL, grid, P1, "truncated", 1).theta
    j = grid.n_q // 2 + 5  # a q with nonzero fifth derivative
    r1, r2 = abs(e[1, j] - t1[1, j]), abs(e[2, j] - t1[2, j])
    assert r2 / r1 == pytest.approx(32, rel=0.02)


def test_kernel_contract(grid):
    with pytest.raises(ValueError):
        wm.build_kernel(QUARTIC, grid, P1, "truncated", 7)
    with pytest.raises(ValueError):
        wm.build_kernel(QUARTIC, grid, P1, "truncated")
    with pytest.raises(ValueError):
        wm.build_kernel(QUARTIC, grid, P1, "bogus")


def test_kernel_overflow(grid):
    steep = PotentialSpec.polynomial([0.0] * 12 + [1e300])
    with pytest.raises(wm.SolverError):
        wm.build_kernel(steep, grid, P1)


@pytest.mark.parametrize("variant,order", [("exact", None), ("classical", None), ("truncated", 2)])
def test_multiplier_is_unitary(grid, variant, order):
    k = wm.build_kernel(WELL, grid, P1, variant, order)
    assert np.allclose(np.abs(k.multiplier(0.37)), 1.0, rtol=0, atol=1e-15)


def test_free_shear(grid):
    W = gaussian_wigner(grid, -1.0, 0.5, 0.6, 0.4)
    m0 = phase_moments(W)
    P2 = PhysParams(1.0, 2.0)
    t = 1.5
    Wt = wm.evolve_to(W, PotentialSpec.constant(0.0), P2, 0.05, 30)
    m = phase_moments(Wt)
    assert m.var_q == pytest.approx(m0.var_q + t**2 * m0.var_p / 4, rel=1e-10)
    assert m.mean_q == pytest.approx(m0.mean_q + t * m0.mean_p / 2, abs=1e-10)


def test_zero_dt_is_identity(grid, W0):
    k = wm.build_kernel(WELL, grid, P1)
    assert wm.step(W0, k, P1, 0.0) is W0


def test_step_rejects_foreign_params(grid, W0):
    k = wm.build_kernel(WELL, grid, P1)
    with pytest.raises(ValueError):
        wm.step(W0, k, PhysParams(0.5, 1.0), 0.01)


def test_transport_bound(grid, W0):
    with pytest.raises(wm.SolverError):
        wm.evolve_to(W0, HARM, P1, 2.0, 1)


def test_harmonic_period_return():
    g = build_grid(-10, 10, 128, -10, 10, 128)
    W = gaussian_wigner(g, 2.0, 0.0, 1 / np.sqrt(2), 1 / np.sqrt(2))
    n = 4000
    back = wm.evolve_to(W, HARM, P1, 2 * np.pi / n, n)
    assert wm.compare_fields(back, W).l2 <= 1e-6


def test_evolve_records(grid, W0):
    ev = wm.evolve(W0, WELL, P1, wm.SolverConfig(0.01, 10, record_every=4))
    assert len(ev.moments) == 11
    assert [round(t, 12) for t in ev.times] == [0.0, 0.04, 0.08, 0.1]
    assert len(ev.moments_table()[0]) == len(wm.MOMENT_COLUMNS)
    last = wm.evolve_to(W0, WELL, P1, 0.01, 10)
    assert np.array_equal(ev.snapshots[-1].values, last.values)


def test_evolve_zero_steps(grid, W0):
    ev = wm.evolve(W0, WELL, P1, wm.SolverConfig(0.01, 0))
    assert len(ev.snapshots) == 1 and ev.snapshots[0] is W0


def test_classical_kernel_exact_for_linear(grid, W0):
    U = PotentialSpec.linear(0.8)
    a = wm.evolve_to(W0, U, P1, 0.01, 100, "classical")
    b = wm.evolve_to(W0, U, P1, 0.01, 100, "exact")
    assert np.array_equal(a.values, b.values)
    # and the force just shifts the mean momentum
    assert phase_moments(a).mean_p == pytest.approx(-0.8, abs=1e-10)


@pytest.mark.parametrize("variant,order", [("exact", None), ("classical", None), ("truncated", 1), ("truncated", 2)])
def test_norm_conservation(grid, W0, variant, order):
    W = wm.evolve_to(W0, WELL, P1, 1e-3, 1000, variant, order)
    assert abs(W.norm - W0.norm) <= 1e-10


def test_time_reversibility(grid, W0):
    fwd = wm.evolve_to(W0, WELL, P1, 0.01, 200)
    back = wm.evolve_to(fwd, WELL, P1, -0.01, 200)
    assert wm.compare_fields(back, W0).l2 <= 1e-9


def test_hierarchy_quartic_non_increasing(grid, W0):
    e = wm.evolve_to(W0, QUARTIC, P1, 0.01, 50)
    gaps = [wm.compare_fields(wm.evolve_to(W0, QUARTIC, P1, 0.01, 50, "truncated", n), e).l2
            for n in (0, 1, 2)]
    assert gaps[0] > gaps[1] >= gaps[2]
    assert gaps[1] == 0


def test_hierarchy_gaussian_well_strict(grid, W0):
    e = wm.evolve_to(W0, WELL, P1, 0.01, 100)
    gaps = [wm.compare_fields(wm.evolve_to(W0, WELL, P1, 0.01, 100, "truncated", n), e).l2
            for n in (0, 1, 2)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_classical_limit(grid, W0):
    d = []
    for hbar in (1.0, 0.1, 0.01):
        p = PhysParams(hbar, 1.0)
        a = wm.evolve_to(W0, WELL, p, 0.01, 100, "exact")
        b = wm.evolve_to(W0, WELL, p, 0.01, 100, "classical")
        d.append(wm.compare_fields(a, b).l2)
    assert d[0] > d[1] > d[2]


def test_compare_fields(grid, W0):
    z = wm.compare_fields(W0, W0)
    assert (z.l2, z.linf, z.norm_diff) == (0, 0, 0)
    neg = WignerField(grid, -W0.values)
    assert wm.compare_fields(W0, neg).l2 == pytest.approx(2 * wm.l2_norm(W0), rel=1e-14)
    other = gaussian_wigner(build_grid(-8, 8, 64, -8, 8, 128), 1.0, 0.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        wm.compare_fields(W0, other)


def test_realify_rejects_complex_output():
    z = np.ones((4, 4)) + 1e-6j
    with pytest.raises(wm.SolverError):
        wm._realify(z, "probe")
    assert np.array_equal(wm._realify(np.ones((2, 2)) + 1e-14j, "probe"), np.ones((2, 2)))
