"""Bulk temperatures and current of the alternating chain as N -> infinity.

Units: ``k = 1`` and ``m_a + m_b = 1`` throughout (see ``normalize_units``).

Only band frequencies survive the limit, so each frequency integral becomes a
sum over the acoustic and optical branches, parametrized by the Bloch angle
``q`` in (0, pi).  Inside a band the boundary determinant has the form
``A(q) sin(psi) + B(q) cos(psi)`` with a phase ``psi`` that winds ~N times, and
its inverse square is replaced by its average over ``psi``.  That average is
``1 / (c_norm * |A B* - A* B|)`` with ``c_norm = 1/2``.  ``calibrate_c_norm``
re-derives the constant from a large finite-N solve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad_vec
from scipy.optimize import brentq

from .errors import (
    DegenerateBands,
    NoSignChange,
    PinningUnsupported,
    QuadratureNotConverged,
    UnnormalizedUnits,
    VanishingWronskian,
)
from .model import ChainSpec, FirstMass, validate_spec

C_NORM = 0.5

EPSABS = 1e-13
EPSREL = 1e-12


def check_units(m_a: float, m_b: float, k: float = 1.0) -> None:
    if abs(m_a + m_b - 1.0) > 1e-12 or abs(k - 1.0) > 1e-12:
        raise UnnormalizedUnits(
            f"band formulas need k = 1 and m_a + m_b = 1 (got k={k}, m_a+m_b={m_a + m_b}); "
            "use normalize_units first"
        )


@dataclass(frozen=True)
class Dispersion:
    q: np.ndarray
    phi: np.ndarray
    omega_minus: np.ndarray
    omega_plus: np.ndarray
    m_a: float
    m_b: float

    @property
    def acoustic_range(self) -> tuple[float, float]:
        return 0.0, float(np.sqrt(2.0 / max(self.m_a, self.m_b)))

    @property
    def optical_range(self) -> tuple[float, float]:
        lo, hi = min(self.m_a, self.m_b), max(self.m_a, self.m_b)
        return float(np.sqrt(2.0 / lo)), float(np.sqrt(2.0 / (lo * hi)))


def dispersion(q, m_a: float, m_b: float) -> Dispersion:
    check_units(m_a, m_b)
    if m_a == m_b:
        raise DegenerateBands("equal masses close the gap (phi(pi) = 0)")
    q = np.asarray(q, dtype=float)
    mm = m_a * m_b
    phi = np.sqrt(1.0 - 2.0 * mm * (1.0 - np.cos(q)))
    return Dispersion(
        q=q,
        phi=phi,
        omega_minus=np.sqrt((1.0 - phi) / mm),
        omega_plus=np.sqrt((1.0 + phi) / mm),
        m_a=m_a,
        m_b=m_b,
    )


@dataclass(frozen=True)
class BranchSplit:
    acoustic: float
    optical: float

    @property
    def total(self) -> float:
        return self.acoustic + self.optical


@dataclass(frozen=True)
class BulkResult:
    parity: str
    T_odd: float
    T_even: float
    J: float
    I_odd: float
    I_even: float
    odd_parts: BranchSplit | None = None
    even_parts: BranchSplit | None = None
    current_parts: BranchSplit | None = None


def oscillatory_average(
    C: Callable,
    A: Callable,
    B: Callable,
    c_norm: float = C_NORM,
    lo: float = 0.0,
    hi: float = np.pi,
    epsabs: float = EPSABS,
    epsrel: float = EPSREL,
):
    """N -> infinity limit of ``int C(q) / |A(q) sin(N q) + B(q) cos(N q)|^2 dq``.

    Evaluates ``int_lo^hi C(q) / (c_norm |A B* - A* B|) dq``.  ``C`` may return
    an array, in which case the result is an array.
    """

    def integrand(q):
        a = complex(A(q))
        b = complex(B(q))
        w = abs(a * np.conj(b) - np.conj(a) * b)
        if not np.isfinite(w) or w <= 1e-14 * max(abs(a) * abs(b), 1e-300):
            raise VanishingWronskian(f"|A B* - A* B| vanishes at q = {q:.6g}")
        return np.asarray(C(q), dtype=float) / (c_norm * w)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err, info = quad_vec(integrand, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=2000,
                                  full_output=True)
    if info.status != 0 and err > max(epsabs, epsrel * np.abs(val).max()) * 100:
        raise QuadratureNotConverged(f"band integral error estimate {err:.3e}")
    return val


def _branch_weights(
    parity: str, m1: float, m2: float, gl: float, gr: float, sign: int, c_norm: float
) -> np.ndarray:
    """Forward weights ``(I_odd, I_even)`` and ``J / dT`` from one branch.

    ``m1`` is the mass of site 1, ``m2`` that of site 2.
    """
    mm = m1 * m2

    def omega2(q):
        phi = np.sqrt(1.0 - 2.0 * mm * (1.0 - np.cos(q)))
        return (1.0 + sign * phi) / mm, phi

    if parity == "even":

        def A(q):
            u, _ = omega2(q)
            p = gl * (2 - m2 * u) + gr * (2 - m1 * u)
            return (1 - gl * gr * u) / np.tan(q / 2) - 1j * np.sqrt(u) * p / np.sin(q)

        def B(q):
            u, _ = omega2(q)
            return 1 + gl * gr * u

        def numerators(q, u):
            s1, s2 = np.sin(q) ** 2, np.sin(q / 2) ** 2
            x_odd = (2 - m2 * u) ** 2 / s1 + gr**2 * u / s2
            x_even = 1 / s2 + gr**2 * u * (2 - m1 * u) ** 2 / s1
            return x_odd, x_even

    elif parity == "odd":

        def A(q):
            u, _ = omega2(q)
            r1 = 2 - m1 * u
            r2 = gl * gr * u * (2 - m2 * u)
            return (r1 - r2) * np.cos(q / 2) / np.sin(q) - 1j * np.sqrt(u) * (gl + gr) / np.sin(q / 2)

        def B(q):
            u, _ = omega2(q)
            r1 = 2 - m1 * u
            r2 = gl * gr * u * (2 - m2 * u)
            return (r1 + r2) * np.sin(q / 2) / np.sin(q)

        def numerators(q, u):
            s1, s2 = np.sin(q) ** 2, np.sin(q / 2) ** 2
            x_odd = 1 / s2 + gr**2 * u * (2 - m2 * u) ** 2 / s1
            x_even = (2 - m1 * u) ** 2 / s1 + gr**2 * u / s2
            return x_odd, x_even

    else:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")

    def C(q):
        u, phi = omega2(q)
        # |dw/dq| w^2 = w sin(q) / (2 phi)
        jac = np.sqrt(u) * np.sin(q) / (2.0 * phi)
        x_odd, x_even = numerators(q, u)
        # squared sines of the site phase average to 1/2
        return jac * np.array([
            2 * m1 * gl / np.pi * 0.5 * x_odd,
            2 * m2 * gl / np.pi * 0.5 * x_even,
            2 * gl * gr / np.pi,
        ])

    return oscillatory_average(C, A, B, c_norm=c_norm)


def _band_table(parity, m_a, m_b, gl, gr, c_norm):
    """Rows: acoustic, optical.  Columns: I_odd, I_even, J/dT, Î_odd, Î_even."""
    if parity == "even":
        # mirror image starts with m_b and has the baths swapped; odd <-> even sites
        mirror = lambda s: _branch_weights("even", m_b, m_a, gr, gl, s, c_norm)[[1, 0]]
    else:
        mirror = lambda s: _branch_weights("odd", m_a, m_b, gr, gl, s, c_norm)[[0, 1]]
    rows = []
    for s in (-1, +1):
        fwd = _branch_weights(parity, m_a, m_b, gl, gr, s, c_norm)
        rows.append(np.concatenate([fwd, mirror(s)]))
    return np.array(rows)


def _bulk(parity, m_a, m_b, gamma_left, gamma_right, T, dT, c_norm) -> BulkResult:
    check_units(m_a, m_b)
    if m_a == m_b:
        raise DegenerateBands("equal masses close the gap; band formulas are singular")
    tab = _band_table(parity, m_a, m_b, gamma_left, gamma_right, c_norm)
    t_left, t_right = T + 0.5 * dT, T - 0.5 * dT
    # per-branch temperature contribution: I_branch T_L + Î_branch T_R
    t_odd = tab[:, 0] * t_left + tab[:, 3] * t_right
    t_even = tab[:, 1] * t_left + tab[:, 4] * t_right
    cur = tab[:, 2] * dT
    i_odd, i_even = tab[:, 0].sum(), tab[:, 1].sum()
    return BulkResult(
        parity=parity,
        T_odd=float(T + (i_odd - 0.5) * dT),
        T_even=float(T + (i_even - 0.5) * dT),
        J=float(cur.sum()),
        I_odd=float(i_odd),
        I_even=float(i_even),
        odd_parts=BranchSplit(float(t_odd[0]), float(t_odd[1])),
        even_parts=BranchSplit(float(t_even[0]), float(t_even[1])),
        current_parts=BranchSplit(float(cur[0]), float(cur[1])),
    )


def bulk_even(m_a, m_b, gamma_left, gamma_right, T=1.0, dT=1.0, c_norm=C_NORM) -> BulkResult:
    """Bulk sublattice temperatures and current of an even-N chain (site 1 has mass m_a)."""
    return _bulk("even", m_a, m_b, gamma_left, gamma_right, T, dT, c_norm)


def bulk_odd(m_a, m_b, gamma_left, gamma_right, T=1.0, dT=1.0, c_norm=C_NORM) -> BulkResult:
    """Bulk sublattice temperatures and current of an odd-N chain (site 1 has mass m_a)."""
    return _bulk("odd", m_a, m_b, gamma_left, gamma_right, T, dT, c_norm)


def closed_form_even(m_a, m_b, gamma, T=1.0, dT=1.0) -> BulkResult:
    """Explicit even-N result for equal couplings ``gamma_L = gamma_R = gamma``.

    Finite at ``m_a = m_b`` (where it reduces to a flat bulk).
    """
    check_units(m_a, m_b)
    mu = 2 * m_a * m_b
    de = m_a - m_b
    be = gamma**2 / (m_a * m_b)
    ad = abs(de)
    sd = np.sqrt(1 + de * de)
    r = 1 + 2 * be * mu
    s1 = np.sqrt(1 + 2 * be)
    s2 = np.sqrt(1 + 2 * be + 2 * be**2 * mu)
    i_odd = (
        m_b / 2 * (2 * (1 + be) + (de**2 + 2 * de) * 2 * be + 2 * be**2 / r * de**2 * (de + 1) ** 2)
        / (s1 * s2)
        - m_a / r * (s2 / s1 - 1)
        + m_b / 2 * ad * (de + 1) ** 2 / (mu * r * sd)
        + m_a * 2 * be * mu / r * (1 - ad / sd)
    )
    i_even = m_a * (
        1
        + (-(1 + be) + be * (2 * de - de**2) - de**2 * (1 - de) ** 2 * be**2 / r) / (s1 * s2)
        + be * ad * (1 - de) ** 2 / (sd * r)
    ) + m_b / r * (-ad / sd + s2 / s1)
    j = dT * gamma / (be**2 * mu * (1 + 4 * gamma**2)) * (
        2 * be + 1 + 2 * be**2 * mu * (1 + de * de - ad * sd) - np.sqrt((2 * be + 1) * (2 * be + 1 + 2 * be**2 * mu))
    )
    return BulkResult(
        parity="even",
        T_odd=float(T + (i_odd - 0.5) * dT),
        T_even=float(T + (i_even - 0.5) * dT),
        J=float(j),
        I_odd=float(i_odd),
        I_even=float(i_even),
    )


def closed_form_odd(m_a, m_b, gamma, T=1.0, dT=1.0) -> BulkResult:
    """Explicit odd-N result for equal couplings: flat bulk at the mean temperature."""
    check_units(m_a, m_b)
    if m_a == m_b:
        raise DegenerateBands("equal masses close the gap; odd-N current formula is singular")
    mu = 2 * m_a * m_b
    de = m_a - m_b
    be = gamma**2 / (m_a * m_b)
    a = de / m_b - de * be / m_a
    b = 1 / m_b + 2 * m_b * be / m_a
    c = be / m_a
    f = b / (2 * c) * np.sqrt(b * b - 4 * a * c)
    g = c * mu
    h = b * b / (2 * c) - c * (1 - mu) - a
    j = dT * gamma * b / g**2 * (1 - (np.sqrt((f + h) ** 2 - g**2) + np.sqrt((f - h) ** 2 - g**2)) / (2 * f))
    return BulkResult(parity="odd", T_odd=float(T), T_even=float(T), J=float(j), I_odd=0.5,
                      I_even=0.5)


def crossing_gamma(
    m_a: float,
    m_b: float,
    parity: str,
    free_param_range: tuple[float, float],
    gamma_left: float = 1.0,
    xtol: float = 1e-10,
) -> float:
    """Coupling at which the two sublattices have equal bulk temperature.

    Even parity varies ``gamma = gamma_L = gamma_R``; odd parity holds
    ``gamma_L`` fixed and varies ``gamma_R``.
    """
    if parity == "even":
        def gap(g):
            r = closed_form_even(m_a, m_b, g)
            return r.T_odd - r.T_even
    elif parity == "odd":
        def gap(g):
            r = bulk_odd(m_a, m_b, gamma_left, g)
            return r.T_odd - r.T_even
    else:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    lo, hi = free_param_range
    f_lo, f_hi = gap(lo), gap(hi)
    if f_lo == 0.0:
        return float(lo)
    if f_hi == 0.0:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChange(f"T_odd - T_even keeps sign {np.sign(f_lo):+.0f} on [{lo}, {hi}]")
    return float(brentq(gap, lo, hi, xtol=xtol))


def calibrate_c_norm(
    m_a: float = 0.75,
    m_b: float = 0.25,
    gamma_left: float = 1.0,
    gamma_right: float = 1.0,
    n_sites: int = 256,
) -> float:
    """Fit the averaging constant to bulk temperatures of a finite chain.

    Band weights scale as ``1 / c_norm``, so the least-squares ratio of the
    ``c_norm = 1`` weights to the finite-N sublattice weights is the estimate.
    """
    from .lyapunov import bulk_sublattice_means, solve_chain

    parity = "even" if n_sites % 2 == 0 else "odd"
    spec = ChainSpec(n_sites, m_a, m_b, gamma_left=gamma_left, gamma_right=gamma_right,
                     temp_left=1.0, temp_right=0.0)
    measured = np.array(bulk_sublattice_means(solve_chain(spec).temperatures))
    raw = _bulk(parity, m_a, m_b, gamma_left, gamma_right, 0.5, 1.0, 1.0)
    raw_w = np.array([raw.I_odd, raw.I_even])
    return float(raw_w @ measured / (measured @ measured))


@dataclass(frozen=True)
class NormalizedUnits:
    spec: ChainSpec
    temp_scale: float
    current_scale: float
    time_scale: float


def normalize_units(spec: ChainSpec) -> NormalizedUnits:
    """Rescale to ``k = 1`` and ``m_a + m_b = 1``.

    Physical values follow as ``T = temp_scale * T'`` and
    ``J = current_scale * J'``.
    """
    k = spec.spring_k
    total = spec.mass_a + spec.mass_b
    t0 = np.sqrt(total / k)
    gscale = 1.0 / (k * t0)
    new = spec.replace(
        mass_a=spec.mass_a / total,
        mass_b=spec.mass_b / total,
        spring_k=1.0,
        pin_k0=spec.pin_k0 / k,
        gamma_left=spec.gamma_left * gscale,
        gamma_right=spec.gamma_right * gscale,
        temp_left=spec.temp_left / k,
        temp_right=spec.temp_right / k,
    )
    return NormalizedUnits(spec=new, temp_scale=k, current_scale=k / t0, time_scale=t0)


def bulk_for_spec(spec: ChainSpec, parity: str | None = None, normalize: bool = False
                  ) -> BulkResult:
    """Band result for an unpinned chain spec; parity defaults to that of ``n_sites``.

    The spec must already satisfy ``k = 1`` and ``m_a + m_b = 1`` unless
    ``normalize`` is set, in which case it is rescaled via ``normalize_units``
    and the results are converted back to the spec's own units.
    """
    validate_spec(spec)
    if spec.pin_k0 != 0.0:
        raise PinningUnsupported("band formulas cover the unpinned chain only")
    parity = parity or ("even" if spec.n_sites % 2 == 0 else "odd")
    if normalize:
        units = normalize_units(spec)
    else:
        check_units(spec.mass_a, spec.mass_b, spec.spring_k)
        units = NormalizedUnits(spec=spec, temp_scale=1.0, current_scale=1.0, time_scale=1.0)
    s = units.spec
    m_a, m_b = s.mass_a, s.mass_b
    if FirstMass(s.first_mass) is FirstMass.B:
        m_a, m_b = m_b, m_a
    r = _bulk(parity, m_a, m_b, s.gamma_left, s.gamma_right, s.mean_temp, s.delta_temp, C_NORM)
    ts, js = units.temp_scale, units.current_scale

    def scale(split, f):
        return BranchSplit(split.acoustic * f, split.optical * f)

    return BulkResult(
        parity=r.parity,
        T_odd=r.T_odd * ts,
        T_even=r.T_even * ts,
        J=r.J * js,
        I_odd=r.I_odd,
        I_even=r.I_even,
        odd_parts=scale(r.odd_parts, ts),
        even_parts=scale(r.even_parts, ts),
        current_parts=scale(r.current_parts, js),
    )
