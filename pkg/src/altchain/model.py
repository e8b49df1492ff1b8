"""Chain description and the deterministic matrices of the open harmonic system.

State vectors are ordered ``x = (q_1, ..., q_N, p_1, ..., p_N)``.  All public
site indices are 1-based; arrays are stored 0-based.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec


class FirstMass(str, enum.Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class ChainSpec:
    n_sites: int
    mass_a: float = 0.75
    mass_b: float = 0.25
    spring_k: float = 1.0
    pin_k0: float = 0.0
    gamma_left: float = 1.0
    gamma_right: float = 1.0
    temp_left: float = 1.5
    temp_right: float = 0.5
    first_mass: FirstMass = FirstMass.A

    def masses(self) -> np.ndarray:
        """Per-site masses, 0-based array of length N."""
        first, second = (self.mass_a, self.mass_b)
        if FirstMass(self.first_mass) is FirstMass.B:
            first, second = second, first
        m = np.full(self.n_sites, second, dtype=float)
        m[::2] = first
        return m

    def replace(self, **changes) -> "ChainSpec":
        return dataclasses.replace(self, **changes)

    def mirrored(self) -> "ChainSpec":
        """The same physical chain read from the right end.

        Site ``i`` of the result is site ``N+1-i`` of ``self``; baths swap.
        """
        first = FirstMass(self.first_mass)
        if self.n_sites % 2 == 0:
            first = FirstMass.B if first is FirstMass.A else FirstMass.A
        return self.replace(
            gamma_left=self.gamma_right,
            gamma_right=self.gamma_left,
            temp_left=self.temp_right,
            temp_right=self.temp_left,
            first_mass=first,
        )

    @property
    def mean_temp(self) -> float:
        return 0.5 * (self.temp_left + self.temp_right)

    @property
    def delta_temp(self) -> float:
        return self.temp_left - self.temp_right


ValidatedSpec = ChainSpec


@dataclass(frozen=True)
class StateLayout:
    n_sites: int

    def q_index(self, site: int) -> int:
        return site

    def p_index(self, site: int) -> int:
        return self.n_sites + site

    @property
    def q_slice(self) -> slice:
        return slice(0, self.n_sites)

    @property
    def p_slice(self) -> slice:
        return slice(self.n_sites, 2 * self.n_sites)


@dataclass(frozen=True)
class SystemMatrices:
    mass: np.ndarray
    force: np.ndarray
    damping: np.ndarray
    drift: np.ndarray
    diffusion: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.mass.shape[0]

    @property
    def layout(self) -> StateLayout:
        return StateLayout(self.n_sites)

    @property
    def masses(self) -> np.ndarray:
        return np.diag(self.mass).copy()


def _finite(x) -> bool:
    return isinstance(x, (int, float, np.floating, np.integer)) and math.isfinite(x)


def validate_spec(spec: ChainSpec) -> ValidatedSpec:
    """Return ``spec`` unchanged or raise ``InvalidSpec`` listing every violation."""
    bad: list[tuple[str, str]] = []
    if not isinstance(spec.n_sites, (int, np.integer)) or spec.n_sites < 1:
        bad.append(("ZeroSites", f"n_sites must be a positive integer, got {spec.n_sites!r}"))
    for name in ("mass_a", "mass_b"):
        v = getattr(spec, name)
        if not _finite(v) or v <= 0:
            bad.append(("NonPositiveMass", f"{name} must be > 0, got {v!r}"))
    if not _finite(spec.spring_k) or spec.spring_k <= 0:
        bad.append(("NonPositiveSpring", f"spring_k must be > 0, got {spec.spring_k!r}"))
    if not _finite(spec.pin_k0) or spec.pin_k0 < 0:
        bad.append(("NonPositiveSpring", f"pin_k0 must be >= 0, got {spec.pin_k0!r}"))
    for name in ("gamma_left", "gamma_right"):
        v = getattr(spec, name)
        if not _finite(v) or v <= 0:
            bad.append(("NonPositiveDamping", f"{name} must be > 0, got {v!r}"))
    for name in ("temp_left", "temp_right"):
        v = getattr(spec, name)
        if not _finite(v) or v < 0:
            bad.append(("NegativeTemperature", f"{name} must be >= 0, got {v!r}"))
    try:
        FirstMass(spec.first_mass)
    except ValueError:
        bad.append(("InvalidFirstMass", f"first_mass must be A or B, got {spec.first_mass!r}"))
    if bad:
        raise InvalidSpec(bad)
    return spec


def chain_force_matrix(n: int, k: float, k0: float = 0.0) -> np.ndarray:
    """Fixed-end force matrix: ``2k + k0`` on the diagonal, ``-k`` next to it."""
    phi = np.diag(np.full(n, 2.0 * k + k0))
    if n > 1:
        off = np.full(n - 1, -k)
        phi += np.diag(off, 1) + np.diag(off, -1)
    return phi


def assemble_system(
    masses: np.ndarray,
    force: np.ndarray,
    gammas: np.ndarray,
    noise: np.ndarray,
) -> SystemMatrices:
    """Build ``a = [[0, -M^-1], [Phi, M^-1 Gamma]]`` and diagonal ``d``.

    ``gammas`` holds the per-site friction and ``noise`` the per-site value of
    ``2 * sum(gamma * T)`` over the baths touching that site.
    """
    n = masses.shape[0]
    inv_m = 1.0 / masses
    drift = np.zeros((2 * n, 2 * n))
    drift[:n, n:] = -np.diag(inv_m)
    drift[n:, :n] = force
    drift[n:, n:] = np.diag(inv_m * gammas)
    diffusion = np.zeros((2 * n, 2 * n))
    diffusion[n:, n:] = np.diag(noise)
    return SystemMatrices(
        mass=np.diag(masses),
        force=force,
        damping=np.diag(gammas),
        drift=drift,
        diffusion=diffusion,
    )


def bath_vectors(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-site friction and noise strength ``2 gamma T``; both baths add up at N=1."""
    n = spec.n_sites
    gammas = np.zeros(n)
    noise = np.zeros(n)
    gammas[0] += spec.gamma_left
    gammas[-1] += spec.gamma_right
    noise[0] += 2.0 * spec.gamma_left * spec.temp_left
    noise[-1] += 2.0 * spec.gamma_right * spec.temp_right
    return gammas, noise


def build_system_matrices(spec: ValidatedSpec) -> SystemMatrices:
    validate_spec(spec)
    gammas, noise = bath_vectors(spec)
    force = chain_force_matrix(spec.n_sites, spec.spring_k, spec.pin_k0)
    return assemble_system(spec.masses(), force, gammas, noise)


def chain_bonds(n: int, k: float) -> list[tuple[int, int, float]]:
    """Nearest-neighbour bonds ``(i, i+1, k)`` with 0-based site indices."""
    return [(i, i + 1, k) for i in range(n - 1)]
