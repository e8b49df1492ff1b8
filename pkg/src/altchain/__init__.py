"""Non-equilibrium steady states of harmonic chains with alternating masses.

Engines:

* ``lyapunov``: exact finite-N covariance solve.
* ``greens``: frequency integrals of the chain Green's function.
* ``asymptotic``: N -> infinity band formulas.
* ``langevin``: stochastic simulation, optionally with bulk noise.
* ``lattice2d``: the same machinery on an N x W strip.
"""

from .asymptotic import BulkResult, bulk_even, bulk_odd, closed_form_even, closed_form_odd
from .errors import InvalidSpec, NessError
from .greens import greens_profile, site_integrals
from .langevin import MeasuredProfile, NoiseKind, SimConfig, run_ness
from .lattice2d import StripSpec, build_strip, strip_profile
from .lyapunov import SteadyStateProfile, solve_chain, solve_stationary_covariance
from .model import ChainSpec, FirstMass, build_system_matrices, validate_spec

__all__ = [
    "BulkResult", "ChainSpec", "FirstMass", "InvalidSpec", "MeasuredProfile", "NessError",
    "NoiseKind", "SimConfig", "SteadyStateProfile", "StripSpec", "build_strip",
    "build_system_matrices", "bulk_even", "bulk_odd", "closed_form_even", "closed_form_odd",
    "greens_profile", "run_ness", "site_integrals", "solve_chain", "solve_stationary_covariance",
    "strip_profile", "validate_spec",
]
