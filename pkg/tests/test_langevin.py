import numpy as np
import pytest
from hypothesis import given, strategies as st

from altchain.errors import InsufficientBlocks, InvalidSpec, NonFiniteState
from altchain.langevin import (
    NoiseKind, Scheduler, SimConfig, alternation, block_stderr, equilibrium_positions,
    relaxation_time, apply_momentum_exchange, apply_velocity_flip,
    collision_matrix, default_dt, discrete_covariance, exact_noisy_covariance, jackknife,
    light_minus_heavy, linear_fit_residual, merge_profiles, one_step_map, oscillation_amplitude,
    run_ness, run_replicas, step, total_energy,
)
from altchain.lyapunov import bond_currents, solve_stationary_covariance
from altchain.model import ChainSpec, build_system_matrices, chain_bonds

from support import EVEN_REF, NOISY_REF


def zscores(prof, ref):
    return (prof.temperatures - ref) / prof.temp_stderr


# ---------------------------------------------------------------- local maps


def test_collision_examples():
    np.testing.assert_allclose(collision_matrix(1.0, 1.0), [[0, 1], [1, 0]])
    _, p = apply_momentum_exchange((np.zeros(2), np.array([1.0, 0.0])), 1, [0.5, 1.5])
    np.testing.assert_allclose(p, [-0.5, 1.5])


@given(mi=st.floats(0.05, 5), mj=st.floats(0.05, 5),
       pi=st.floats(-10, 10), pj=st.floats(-10, 10))
def test_collision_conserves_and_is_involution(mi, mj, pi, pj):
    r = collision_matrix(mi, mj)
    p = np.array([pi, pj])
    out = r @ p
    assert out.sum() == pytest.approx(p.sum(), abs=1e-12)
    ke = 0.5 * (pi**2 / mi + pj**2 / mj)
    assert 0.5 * (out[0] ** 2 / mi + out[1] ** 2 / mj) == pytest.approx(ke, rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(r @ r, np.eye(2), atol=1e-12)


def test_noise_maps_validate_indices_and_copy():
    q, p = np.zeros(3), np.array([1.0, 2.0, 3.0])
    _, p2 = apply_velocity_flip((q, p), 2)
    np.testing.assert_array_equal(p2, [1, -2, 3])
    np.testing.assert_array_equal(p, [1, 2, 3])
    _, p3 = apply_velocity_flip((q, p2), 2)
    np.testing.assert_array_equal(p3, p)
    _, p0 = apply_velocity_flip((q, np.zeros(3)), 1)
    np.testing.assert_array_equal(p0, 0)
    with pytest.raises(IndexError):
        apply_velocity_flip((q, p), 4)
    with pytest.raises(IndexError):
        apply_momentum_exchange((q, p), 3, np.ones(3))


# ---------------------------------------------------------------- configuration


def test_invalid_configs():
    with pytest.raises(InvalidSpec) as exc:
        SimConfig(dt=0.1, n_steps=100, lam=2.0).validate()
    assert "InvalidRate" in exc.value.codes
    with pytest.raises(InvalidSpec):
        SimConfig(dt=0.01, n_steps=100, burn_in=100).validate()
    with pytest.raises(InvalidSpec):
        SimConfig(dt=-1.0, n_steps=100).validate()
    with pytest.raises(InvalidSpec):
        SimConfig(dt=0.01, n_steps=100, noise_kind="Teleport").validate()


def test_insufficient_blocks():
    with pytest.raises(InsufficientBlocks):
        run_ness(ChainSpec(4), SimConfig(dt=0.01, n_steps=1000, block_size=100))


def test_blow_up_is_reported():
    with pytest.raises(NonFiniteState):
        run_ness(ChainSpec(8), SimConfig(dt=5.0, n_steps=20_000))


def test_default_dt_uses_band_top():
    assert default_dt(ChainSpec(4)) == pytest.approx(0.005 / np.sqrt(32 / 3))


# ---------------------------------------------------------------- integrator


def test_seed_determinism():
    cfg = SimConfig(dt=0.02, n_steps=20_000, seed=7, lam=1.0, noise_kind="MomentumConserving")
    a, b = run_ness(ChainSpec(6), cfg), run_ness(ChainSpec(6), cfg)
    np.testing.assert_array_equal(a.temperatures, b.temperatures)
    c = run_ness(ChainSpec(6), SimConfig(dt=0.02, n_steps=20_000, seed=8, lam=1.0,
                                         noise_kind="MomentumConserving"))
    assert not np.array_equal(a.temperatures, c.temperatures)


def test_step_does_not_mutate_input():
    q, p = np.ones(4), np.ones(4)
    q2, p2 = step((q, p), ChainSpec(4), 0.01, np.random.default_rng(0))
    np.testing.assert_array_equal(q, 1)
    assert not np.array_equal(q2, q)


def test_frictionless_energy_error_is_third_order():
    spec = ChainSpec(6, gamma_left=1e-300, gamma_right=1e-300, temp_left=0.0, temp_right=0.0)
    rng = np.random.default_rng(3)
    x0 = (rng.standard_normal(6), rng.standard_normal(6))
    errs = []
    for dt in (0.02, 0.01):
        x1 = step(x0, spec, dt, np.random.default_rng(0))
        errs.append(abs(total_energy(x1, spec) - total_energy(x0, spec)))
    # per-step energy change scales like dt^3
    assert errs[0] / errs[1] > 2**2.5


def test_discrete_covariance_is_second_order():
    spec = ChainSpec(6, **EVEN_REF)
    exact = solve_stationary_covariance(build_system_matrices(spec)).b
    e1 = np.abs(discrete_covariance(spec, 0.02) - exact).max()
    e2 = np.abs(discrete_covariance(spec, 0.01) - exact).max()
    assert e1 / e2 == pytest.approx(4.0, rel=0.1)
    f, _ = one_step_map(spec, 0.05)
    assert np.abs(np.linalg.eigvals(f)).max() < 1


def test_simulation_matches_discrete_oracle():
    spec = ChainSpec(8, **EVEN_REF)
    dt = 0.05
    ref = np.diag(discrete_covariance(spec, dt))[8:] / spec.masses()
    prof = run_ness(spec, SimConfig(dt=dt, n_steps=2_000_000, burn_in=20_000, seed=11))
    assert np.abs(zscores(prof, ref)).max() < 4


def test_equilibrium_simulation():
    spec = ChainSpec(8, temp_left=1.0, temp_right=1.0)
    prof = run_ness(spec, SimConfig(dt=0.02, n_steps=1_000_000, burn_in=10_000, seed=5))
    assert np.abs(zscores(prof, 1.0)).max() < 4
    assert abs(prof.mean_current) < 4 * prof.mean_current_stderr


@pytest.mark.parametrize("n", [8, 16, 33])
def test_noiseless_simulation_matches_discrete_oracle(n):
    # the discrete-time covariance is exact at any dt, so a coarse step is fine
    spec = ChainSpec(n, **EVEN_REF)
    dt = 0.05
    tau = relaxation_time(build_system_matrices(spec))
    n_steps = int(60 * tau / dt)
    b = discrete_covariance(spec, dt)
    ref = np.diag(b)[n:] / spec.masses()
    prof = run_ness(spec, SimConfig(dt=dt, n_steps=n_steps, burn_in=int(5 * tau / dt), seed=n))
    z = zscores(prof, ref)
    assert np.sum(np.abs(z) > 3) <= max(1, n // 16)
    j_ref = bond_currents(b, spec.masses(), chain_bonds(n, spec.spring_k)).mean()
    assert abs(prof.mean_current - j_ref) < 4 * prof.mean_current_stderr


# ---------------------------------------------------------------- bulk noise


@pytest.mark.parametrize("kind", ["MomentumConserving", "VelocityFlip"])
def test_noisy_equilibrium_is_gibbs(kind):
    spec = ChainSpec(10, **dict(NOISY_REF, temp_left=1.5, temp_right=1.5))
    cov = exact_noisy_covariance(spec, 0.7, kind)
    np.testing.assert_allclose(np.diag(cov.b)[10:] / spec.masses(), 1.5, atol=1e-10)


def test_noisy_covariance_without_noise_is_plain_solve():
    spec = ChainSpec(7, **NOISY_REF)
    np.testing.assert_allclose(exact_noisy_covariance(spec, 0.0, "VelocityFlip").b,
                               solve_stationary_covariance(build_system_matrices(spec)).b)


def test_velocity_flip_kills_current_oscillation():
    spec = ChainSpec(32, **NOISY_REF)
    b = exact_noisy_covariance(spec, 5.0, "VelocityFlip").b
    temps = np.diag(b)[32:] / spec.masses()
    # strong flipping gives a nearly linear bulk profile
    assert linear_fit_residual(temps) < 1e-3


@pytest.mark.parametrize("kind, sched", [("MomentumConserving", "bernoulli"),
                                         ("VelocityFlip", "bernoulli"),
                                         ("MomentumConserving", "exponential")])
def test_noisy_simulation_matches_exact_moments(kind, sched):
    spec = ChainSpec(8, **NOISY_REF)
    lam, dt = 1.0, 0.01
    ref = np.diag(exact_noisy_covariance(spec, lam, kind).b)[8:] / spec.masses()
    cfg = SimConfig(dt=dt, n_steps=3_000_000, burn_in=20_000, seed=3, lam=lam, noise_kind=kind,
                    scheduler=sched)
    prof = run_ness(spec, cfg)
    assert np.abs(zscores(prof, ref)).max() < 4.5


# ---------------------------------------------------------------- replicas and analysis


def test_replicas_merge():
    spec = ChainSpec(6)
    cfg = SimConfig(dt=0.02, n_steps=100_000, seed=1)
    merged = run_replicas(spec, cfg, 3, workers=2)
    parts = [run_ness(spec, SimConfig(dt=0.02, n_steps=100_000, seed=s)) for s in (1, 2, 3)]
    np.testing.assert_allclose(merged.temperatures, merge_profiles(parts).temperatures)
    assert np.all(merged.temp_stderr < np.min([p.temp_stderr for p in parts], axis=0))
    assert merged.n_blocks == 300


def test_alternation_and_windows():
    masses = np.array([1.0, 2.0] * 4)
    temps = np.array([3.0, 1.0] * 4)  # light sites hotter by 2
    alt = alternation(temps, masses)
    assert np.isnan(alt[0]) and np.isnan(alt[-1])
    np.testing.assert_allclose(alt[1:-1], 2.0)
    assert light_minus_heavy(temps, masses, 0.0, 1.0) == pytest.approx(2.0)
    assert oscillation_amplitude(temps, masses) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        alternation(temps, np.ones(8))


def test_linear_fit_residual():
    assert linear_fit_residual(np.linspace(2, 1, 40)) == pytest.approx(0.0, abs=1e-14)
    wiggle = np.linspace(2, 1, 40) + 0.1 * (-1.0) ** np.arange(40)
    assert linear_fit_residual(wiggle) == pytest.approx(0.1, rel=0.02)


def test_jackknife_of_linear_statistic_is_standard_error(rng):
    blocks = rng.standard_normal((50, 4))
    val, err = jackknife(lambda t: t[1], blocks)
    assert val == pytest.approx(blocks[:, 1].mean())
    assert err == pytest.approx(blocks[:, 1].std(ddof=1) / np.sqrt(50))


def test_scheduler_enum():
    assert Scheduler("exponential") is Scheduler.EXPONENTIAL
    assert NoiseKind("VelocityFlip") is NoiseKind.VELOCITY_FLIP


def test_block_stderr_iid_and_correlated(rng):
    iid = rng.standard_normal((100, 4000))
    assert block_stderr(iid).mean() == pytest.approx(0.1, rel=0.12)
    ar = np.zeros((100, 4000))
    for i in range(1, 100):
        ar[i] = 0.5 * ar[i - 1] + rng.standard_normal(4000)
    # AR(1) with coefficient 1/2: the naive error is low by sqrt(3)
    assert block_stderr(ar).mean() == pytest.approx(ar.mean(axis=0).std(), rel=0.1)
    assert block_stderr(np.ones(50)) == 0.0


def test_equilibrium_positions_covariance(rng):
    import scipy.sparse as sp

    phi = build_system_matrices(ChainSpec(5, pin_k0=0.4)).force
    q = np.array([equilibrium_positions(sp.csr_matrix(phi), 1.5, rng) for _ in range(100_000)])
    np.testing.assert_allclose(np.cov(q.T), 1.5 * np.linalg.inv(phi), atol=0.03)


def test_relaxation_time_grows_with_length():
    taus = [relaxation_time(build_system_matrices(ChainSpec(n))) for n in (8, 16, 32)]
    assert taus[0] < taus[1] < taus[2]
