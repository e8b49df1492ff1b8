from fractions import Fraction as F
import time

import numpy as np
import pytest
from scipy.linalg import solve_continuous_lyapunov

from altchain.errors import TooLarge, UnstableDrift
from altchain.lyapunov import (
    bulk_sublattice_means, kronecker_oracle, profile_from_covariance, solve_chain,
    solve_stationary_covariance,
)
from altchain.model import ChainSpec, assemble_system, build_system_matrices, chain_force_matrix

from support import EVEN_REF, random_spec

# exact stationary covariance of the N = 2 chain with the default parameters
GOLDEN_N2 = np.array([
    [F(7, 8), F(3, 8), 0, F(1, 24)],
    [F(3, 8), F(11, 24), F(-1, 8), 0],
    [0, F(-1, 8), F(33, 32), F(1, 32)],
    [F(1, 24), 0, F(1, 32), F(13, 96)],
], dtype=float)

GOLDEN_N4_TEMPS = [1.3949483352468428, 1.30625717566016, 0.9916762342135472, 0.5350172215843857]
GOLDEN_N4_CURRENT = 0.14006888633754305


def test_golden_two_site_covariance():
    mats = build_system_matrices(ChainSpec(2, **EVEN_REF))
    b = solve_stationary_covariance(mats).b
    np.testing.assert_allclose(b, GOLDEN_N2, atol=1e-14)
    prof = profile_from_covariance(b, ChainSpec(2, **EVEN_REF))
    assert prof.mean_current == pytest.approx(1 / 6, abs=1e-14)


def test_golden_four_site_profile():
    prof = solve_chain(ChainSpec(4, **EVEN_REF))
    np.testing.assert_allclose(prof.temperatures, GOLDEN_N4_TEMPS, atol=1e-13)
    assert prof.mean_current == pytest.approx(GOLDEN_N4_CURRENT, abs=1e-13)


def test_matches_kronecker_oracle(rng):
    for _ in range(10):
        mats = build_system_matrices(random_spec(rng, n=int(rng.integers(1, 13))))
        b = solve_stationary_covariance(mats).b
        np.testing.assert_allclose(b, kronecker_oracle(mats).b, atol=1e-11 * np.abs(b).max())


def test_matches_scipy_reference(rng):
    spec = random_spec(rng, n=40)
    mats = build_system_matrices(spec)
    ref = solve_continuous_lyapunov(-mats.drift, -mats.diffusion)
    b = solve_stationary_covariance(mats).b
    np.testing.assert_allclose(b, ref, atol=1e-10 * np.abs(ref).max())


def test_oracle_size_cap():
    with pytest.raises(TooLarge):
        kronecker_oracle(build_system_matrices(ChainSpec(17)))


def test_equilibrium_is_gibbs(rng):
    for _ in range(5):
        spec = random_spec(rng, equal_temps=True)
        mats = build_system_matrices(spec)
        cov = solve_stationary_covariance(mats)
        t = spec.temp_left
        np.testing.assert_allclose(cov.pp, t * mats.mass, atol=1e-11 * max(t, 1))
        np.testing.assert_allclose(cov.qq, t * np.linalg.inv(mats.force), atol=1e-10 * max(t, 1))
        np.testing.assert_allclose(cov.qp, 0, atol=1e-11 * max(t, 1))


def test_covariance_symmetric_psd_small_residual(rng):
    spec = random_spec(rng, n=30)
    cov = solve_stationary_covariance(build_system_matrices(spec))
    np.testing.assert_array_equal(cov.b, cov.b.T)
    assert np.linalg.eigvalsh(cov.b).min() > -1e-12
    assert cov.residual <= 1e-12 * 2 * max(spec.gamma_left * spec.temp_left,
                                           spec.gamma_right * spec.temp_right)


def test_single_site():
    spec = ChainSpec(1, mass_a=2.0, gamma_left=1.0, gamma_right=3.0, temp_left=2.0, temp_right=1.0)
    prof = solve_chain(spec)
    # one oscillator, two baths: T = (gl TL + gr TR) / (gl + gr)
    assert prof.temperatures[0] == pytest.approx(1.25, abs=1e-13)
    assert prof.bond_currents.size == 0


def test_current_conserved_and_positive(rng):
    for _ in range(5):
        spec = random_spec(rng, n=int(rng.integers(2, 60))).replace(temp_left=2.0, temp_right=1.0)
        j = solve_chain(spec).bond_currents
        assert np.all(j > 0)
        assert np.ptp(j) <= 1e-10 * abs(j).max()


def test_mirror_symmetry(rng):
    for _ in range(5):
        spec = random_spec(rng, n=int(rng.integers(2, 40)))
        p, q = solve_chain(spec), solve_chain(spec.mirrored())
        np.testing.assert_allclose(p.temperatures[::-1], q.temperatures, atol=1e-11)
        np.testing.assert_allclose(p.bond_currents[::-1], -q.bond_currents, atol=1e-11)


def test_equal_masses_flat_bulk():
    for n in (32, 64, 65):
        spec = ChainSpec(n, mass_a=1.0, mass_b=1.0)
        odd, even = bulk_sublattice_means(solve_chain(spec).temperatures)
        temps = solve_chain(spec).temperatures
        lo, hi = n // 4, n - n // 4
        assert np.ptp(temps[lo:hi]) <= 1e-6
        assert abs(odd - even) <= 1e-6


def test_alternating_masses_oscillate():
    temps = solve_chain(ChainSpec(64, **EVEN_REF)).temperatures
    d2 = temps[:-2] - 2 * temps[1:-1] + temps[2:]
    bulk = np.sign(d2[16:48])
    assert np.all(bulk[1:] == -bulk[:-1])


def test_undamped_drift_rejected():
    n = 4
    mats = assemble_system(np.ones(n), chain_force_matrix(n, 1.0), np.zeros(n), np.zeros(n))
    with pytest.raises(UnstableDrift):
        solve_stationary_covariance(mats)


def test_large_chain_fast():
    spec = ChainSpec(400, **EVEN_REF)
    t0 = time.perf_counter()
    cov = solve_stationary_covariance(build_system_matrices(spec))
    assert time.perf_counter() - t0 < 30
    assert cov.residual <= 1e-12 * 3


def test_bulk_sublattice_means():
    temps = np.array([9, 9, 1, 2, 1, 2, 9, 9], dtype=float)
    assert bulk_sublattice_means(temps) == (1.0, 2.0)
