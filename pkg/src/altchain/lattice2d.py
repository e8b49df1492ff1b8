"""N x W strip with checkerboard masses, baths on the two end layers.

Sites are ``(i, j)`` with ``i = 1..N`` along the strip and ``j = 1..W`` across
it, stored layer-major at index ``(i - 1) * W + (j - 1)``.  Displacements are
scalar, the longitudinal ends are fixed, and the transverse direction is
periodic.

Wrap conventions:

* ``W = 1`` has no transverse bonds, so the strip is exactly the 1D chain.
* ``W = 2`` keeps both wrap bonds between the two columns (multiplicity 2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec, TooLarge
from .lyapunov import bond_currents, solve_stationary_covariance
from .model import SystemMatrices, assemble_system

LYAPUNOV_CAP = 4000  # max dimension 2NW of the covariance solve


class StripMethod(str, enum.Enum):
    LYAPUNOV = "Lyapunov"
    SIMULATE = "Simulate"


@dataclass(frozen=True)
class StripSpec:
    n_layers: int
    width: int
    mass_a: float = 0.6
    mass_b: float = 1.4
    spring_k: float = 1.0
    gamma_left: float = 1.0
    gamma_right: float = 1.0
    temp_left: float = 2.0
    temp_right: float = 1.0

    def index(self, i: int, j: int) -> int:
        """0-based storage index of the 1-based site ``(i, j)``."""
        return (i - 1) * self.width + (j - 1)

    def masses(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(1, self.n_layers + 1), np.arange(1, self.width + 1),
                           indexing="ij")
        return np.where((i + j) % 2 == 0, self.mass_a, self.mass_b).ravel().astype(float)

    def bonds(self) -> list[tuple[int, int, float]]:
        """All springs ``(a, b, k)``: longitudinal ones first, then transverse."""
        n, w, k = self.n_layers, self.width, self.spring_k
        out = [(self.index(i, j), self.index(i + 1, j), k)
               for i in range(1, n) for j in range(1, w + 1)]
        if w >= 2:
            # for W = 2 this yields (1, 2) and the wrap (2, 1): a doubled bond
            for i in range(1, n + 1):
                for j in range(1, w + 1):
                    out.append((self.index(i, j), self.index(i, j % w + 1), k))
        return out

    def validate(self) -> "StripSpec":
        bad = []
        if not isinstance(self.n_layers, (int, np.integer)) or self.n_layers < 2:
            bad.append(("ZeroSites", f"n_layers must be >= 2, got {self.n_layers!r}"))
        if not isinstance(self.width, (int, np.integer)) or self.width < 1:
            bad.append(("ZeroSites", f"width must be >= 1, got {self.width!r}"))
        for name in ("mass_a", "mass_b"):
            if not getattr(self, name) > 0:
                bad.append(("NonPositiveMass", f"{name} must be > 0"))
        if not self.spring_k > 0:
            bad.append(("NonPositiveSpring", "spring_k must be > 0"))
        for name in ("gamma_left", "gamma_right"):
            if not getattr(self, name) > 0:
                bad.append(("NonPositiveDamping", f"{name} must be > 0"))
        for name in ("temp_left", "temp_right"):
            if not getattr(self, name) >= 0:
                bad.append(("NegativeTemperature", f"{name} must be >= 0"))
        if bad:
            raise InvalidSpec(bad)
        return self


@dataclass(frozen=True)
class StripProfile:
    temperatures: np.ndarray  # (N, W)
    layer_means: np.ndarray
    cut_currents: np.ndarray  # total current between layers i and i+1
    temp_stderr: np.ndarray | None = None
    cut_stderr: np.ndarray | None = None

    def transverse_slice(self, layer: int) -> np.ndarray:
        return self.temperatures[layer - 1]


def _bath_arrays(spec: StripSpec) -> tuple[np.ndarray, np.ndarray]:
    n, w = spec.n_layers, spec.width
    gamma = np.zeros(n * w)
    noise = np.zeros(n * w)
    gamma[:w] = spec.gamma_left
    noise[:w] = 2 * spec.gamma_left * spec.temp_left
    gamma[-w:] += spec.gamma_right
    noise[-w:] += 2 * spec.gamma_right * spec.temp_right
    return gamma, noise


def strip_force_matrix(spec: StripSpec) -> np.ndarray:
    """``k`` times the strip graph Laplacian, plus one wall bond at each end layer."""
    size = spec.n_layers * spec.width
    phi = np.zeros((size, size))
    for a, b, k in spec.bonds():
        phi[a, a] += k
        phi[b, b] += k
        phi[a, b] -= k
        phi[b, a] -= k
    w = spec.width
    ends = np.r_[np.arange(w), np.arange(size - w, size)]
    phi[ends, ends] += spec.spring_k
    return phi


def build_strip(spec: StripSpec) -> SystemMatrices:
    spec.validate()
    gamma, noise = _bath_arrays(spec)
    return assemble_system(spec.masses(), strip_force_matrix(spec), gamma, noise)


def _cut_sums(spec: StripSpec, per_bond: np.ndarray) -> np.ndarray:
    # longitudinal bonds come first, W per cut
    n, w = spec.n_layers, spec.width
    return per_bond[: (n - 1) * w].reshape(n - 1, w).sum(axis=1)


def strip_profile(spec: StripSpec, method: StripMethod | str = StripMethod.LYAPUNOV,
                  sim_cfg=None) -> StripProfile:
    """Site temperature map, layer means and the current through every layer cut."""
    method = StripMethod(method)
    mats = build_strip(spec)
    n, w = spec.n_layers, spec.width
    bonds = spec.bonds()
    if method is StripMethod.LYAPUNOV:
        if 2 * n * w > LYAPUNOV_CAP:
            raise TooLarge(f"2NW = {2 * n * w} exceeds the covariance-solve cap {LYAPUNOV_CAP}")
        cov = solve_stationary_covariance(mats)
        temps = np.diag(cov.b)[n * w:] / spec.masses()
        per_bond = bond_currents(cov.b, spec.masses(), bonds)
        t_map = temps.reshape(n, w)
        return StripProfile(t_map, t_map.mean(axis=1), _cut_sums(spec, per_bond))

    from .langevin import run_matrices

    if sim_cfg is None:
        raise ValueError("Simulate needs a SimConfig")
    gamma, noise = _bath_arrays(spec)
    prof = run_matrices(mats, gamma, noise, bonds, sim_cfg)
    t_map = prof.temperatures.reshape(n, w)
    cuts = _cut_sums(spec, prof.bond_currents)
    # the W bonds of a cut are correlated; bound the error by adding stderrs linearly
    cut_err = _cut_sums(spec, prof.current_stderr)
    return StripProfile(t_map, t_map.mean(axis=1), cuts, prof.temp_stderr.reshape(n, w), cut_err)
