"""Shared parameter sets and helpers for the test suite."""

from __future__ import annotations

import numpy as np

from altchain.model import ChainSpec

# reference parameters: even N with equal couplings, odd N with unequal couplings
EVEN_REF = dict(mass_a=0.75, mass_b=0.25, spring_k=1.0, gamma_left=1.0, gamma_right=1.0,
                temp_left=1.5, temp_right=0.5)
ODD_REF = dict(EVEN_REF, gamma_left=1.5, gamma_right=0.5)
# bulk-noise runs
NOISY_REF = dict(mass_a=0.5, mass_b=1.5, spring_k=1.0, gamma_left=1.0, gamma_right=1.0,
                 temp_left=2.0, temp_right=1.0)

# lines collected by the acceptance suite and echoed in the terminal summary
ACCEPTANCE_LOG: list[str] = []


def random_spec(rng: np.random.Generator, n: int | None = None, equal_temps: bool = False,
                pinned: bool | None = None) -> ChainSpec:
    n = int(rng.integers(1, 25)) if n is None else n
    t_left = float(rng.uniform(0.1, 3.0))
    t_right = t_left if equal_temps else float(rng.uniform(0.0, 3.0))
    if pinned is None:
        pinned = bool(rng.random() < 0.3)
    return ChainSpec(
        n_sites=n,
        mass_a=float(rng.uniform(0.1, 3.0)),
        mass_b=float(rng.uniform(0.1, 3.0)),
        spring_k=float(rng.uniform(0.2, 3.0)),
        pin_k0=float(rng.uniform(0.0, 1.0)) if pinned else 0.0,
        gamma_left=float(rng.uniform(0.1, 3.0)),
        gamma_right=float(rng.uniform(0.1, 3.0)),
        temp_left=t_left,
        temp_right=t_right,
        first_mass="A" if rng.random() < 0.5 else "B",
    )


def dense_green(spec: ChainSpec, omega: float) -> np.ndarray:
    """``[-M w^2 + Phi - i w Gamma]^-1`` by dense inversion."""
    from altchain.model import build_system_matrices

    mats = build_system_matrices(spec)
    z = -mats.mass * omega**2 + mats.force - 1j * omega * mats.damping
    return np.linalg.inv(z)
