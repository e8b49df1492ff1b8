import numpy as np
import pytest

from altchain.errors import InvalidSpec, TooLarge
from altchain.langevin import SimConfig
from altchain.lattice2d import StripSpec, build_strip, strip_force_matrix, strip_profile
from altchain.lyapunov import solve_chain
from altchain.model import ChainSpec, build_system_matrices


def test_checkerboard_masses_and_index():
    spec = StripSpec(3, 4)
    m = spec.masses().reshape(3, 4)
    i, j = np.meshgrid(np.arange(1, 4), np.arange(1, 5), indexing="ij")
    np.testing.assert_array_equal(m == 0.6, (i + j) % 2 == 0)
    assert spec.index(2, 3) == 6


def test_width_one_is_the_chain():
    strip = StripSpec(10, 1, mass_a=0.75, mass_b=0.25, temp_left=1.5, temp_right=0.5)
    # site (1, 1) has i + j even, so both start on mass_a
    chain = ChainSpec(10, mass_a=0.75, mass_b=0.25, temp_left=1.5, temp_right=0.5)
    a, b = build_strip(strip), build_system_matrices(chain)
    np.testing.assert_array_equal(a.drift, b.drift)
    np.testing.assert_array_equal(a.diffusion, b.diffusion)
    p = strip_profile(strip)
    np.testing.assert_allclose(p.temperatures[:, 0], solve_chain(chain).temperatures, atol=1e-13)
    np.testing.assert_allclose(p.cut_currents, solve_chain(chain).bond_currents, atol=1e-13)


def test_force_matrix_wrap_conventions():
    # W = 2 doubles the transverse bond; W >= 3 is a ring
    phi2 = strip_force_matrix(StripSpec(3, 2))
    assert phi2[0, 1] == -2.0
    np.testing.assert_allclose(np.diag(phi2), [2 + 2, 2 + 2, 2 + 2, 2 + 2, 2 + 2, 2 + 2])
    phi4 = strip_force_matrix(StripSpec(3, 4))
    assert phi4[0, 1] == -1.0 and phi4[0, 3] == -1.0 and phi4[0, 2] == 0.0
    # row sums: interior layers float, end layers feel one wall bond
    rows = phi4.sum(axis=1).reshape(3, 4)
    np.testing.assert_allclose(rows, [[1] * 4, [0] * 4, [1] * 4])
    np.linalg.cholesky(phi4)


def test_equilibrium_is_flat():
    p = strip_profile(StripSpec(6, 3, temp_left=1.2, temp_right=1.2))
    np.testing.assert_allclose(p.temperatures, 1.2, atol=1e-11)
    np.testing.assert_allclose(p.cut_currents, 0.0, atol=1e-12)


@pytest.mark.parametrize("w", [2, 4, 6])
def test_two_column_translation_symmetry_and_kirchhoff(w):
    p = strip_profile(StripSpec(12, w))
    t = p.temperatures
    np.testing.assert_allclose(t, np.roll(t, 2, axis=1), atol=1e-10)
    assert np.ptp(p.cut_currents) <= 1e-9 * np.abs(p.cut_currents).max()
    assert np.all(p.cut_currents > 0)
    np.testing.assert_array_equal(p.transverse_slice(1), t[0])


def test_layer_means_oscillate():
    for n in (32, 64):
        lm = strip_profile(StripSpec(n, 4)).layer_means
        d2 = np.sign(lm[:-2] - 2 * lm[1:-1] + lm[2:])[n // 4: -n // 4]
        assert np.all(d2[1:] == -d2[:-1])


def test_size_cap_and_validation():
    with pytest.raises(TooLarge):
        strip_profile(StripSpec(1001, 2))
    with pytest.raises(InvalidSpec) as exc:
        StripSpec(1, 0, mass_a=-1).validate()
    assert set(exc.value.codes) == {"ZeroSites", "NonPositiveMass"}
    with pytest.raises(ValueError):
        strip_profile(StripSpec(4, 2), "Simulate")


def test_simulated_strip_agrees():
    spec = StripSpec(4, 2)
    ref = strip_profile(spec)
    sim = strip_profile(spec, "Simulate", SimConfig(dt=0.01, n_steps=2_000_000, burn_in=20_000,
                                                    seed=2))
    z = (sim.temperatures - ref.temperatures) / sim.temp_stderr
    assert np.abs(z).max() < 4
    assert np.all(np.abs(sim.cut_currents - ref.cut_currents) < 4 * sim.cut_stderr)
