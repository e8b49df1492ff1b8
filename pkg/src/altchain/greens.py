"""Finite-N frequency-domain engine.

Temperatures and currents follow from frequency integrals of two columns of
``G(w) = [-M w^2 + Phi - i w Gamma]^-1``.  The matrix elements are ratios of
leading/trailing principal minors of a complex tridiagonal matrix.  Those minors
grow like ``exp(N kappa)`` in the band gaps, so the integrand works with ratios
of consecutive minors rather than the minors themselves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad_vec

from .errors import PinningUnsupported, QuadratureNotConverged
from .lyapunov import SteadyStateProfile
from .model import ChainSpec, FirstMass, bath_vectors, validate_spec


@dataclass(frozen=True)
class TransferMatrix:
    omega: float
    matrix: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    @property
    def cos_q(self) -> float:
        return 0.5 * self.trace

    @property
    def q(self) -> complex | float:
        """Bloch angle; complex in the gaps (analytic continuation of arccos)."""
        c = self.cos_q
        if abs(c) <= 1.0:
            return float(np.arccos(c))
        return complex(np.arccos(complex(c)))

    @property
    def in_band(self) -> bool:
        return abs(self.cos_q) < 1.0

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass(frozen=True)
class DeterminantSet:
    omega: float
    delta_left: complex  # Delta_{1,l-1}
    delta_right: complex  # Delta_{l+1,N}
    delta_full: complex  # Delta_{1,N}


@dataclass(frozen=True)
class SiteIntegrals:
    site: int
    forward: float  # I_i, weight of T_L
    backward: float  # Î_i, weight of T_R
    error: float

    @property
    def total(self) -> float:
        return self.forward + self.backward


@dataclass(frozen=True)
class QuadConfig:
    epsabs: float = 1e-11
    epsrel: float = 1e-10
    eps_tail: float = 1e-12
    limit: int = 4000


@dataclass(frozen=True)
class GreensResult:
    spec: ChainSpec
    forward: np.ndarray
    backward: np.ndarray
    error: float
    omega_cut: float
    profile: SteadyStateProfile = field(repr=False)


def _site_masses(first: FirstMass, m_a: float, m_b: float) -> tuple[float, float]:
    return (m_a, m_b) if FirstMass(first) is FirstMass.A else (m_b, m_a)


def transfer_matrix(
    omega: float, m_a: float, m_b: float, k: float = 1.0, first_mass: FirstMass = FirstMass.A
) -> TransferMatrix:
    """Two-site transfer matrix advancing ``(D_{1,2l}, D_{1,2l-1})`` by one cell.

    For ``k != 1`` the determinants are normalized by ``k^length``, which amounts
    to using masses ``m/k``.
    """
    m1, m2 = _site_masses(first_mass, m_a, m_b)
    w2 = omega * omega / k
    c1 = 2.0 - m1 * w2
    c2 = 2.0 - m2 * w2
    return TransferMatrix(omega=omega, matrix=np.array([[c1 * c2 - 1.0, -c2], [c1, -1.0]]))


def determinants_f_g(
    l: int,
    omega: float,
    m_a: float,
    m_b: float,
    k: float = 1.0,
    first_mass: FirstMass = FirstMass.A,
) -> tuple[float, float]:
    """``(D_{1,2l}, D_{1,2l-1})`` of ``-M w^2 + Phi`` for an unpinned alternating chain."""
    if l < 0:
        raise ValueError("l must be >= 0")
    if l == 0:
        return 1.0, 0.0
    tm = transfer_matrix(omega, m_a, m_b, k, first_mass)
    m1, _ = _site_masses(first_mass, m_a, m_b)
    cq = tm.cos_q
    sq = np.sqrt(max(0.0, 1.0 - cq * cq))
    if abs(cq) < 1.0 and sq > 1e-6:
        q = np.arccos(cq)
        f = np.sin((l + 0.5) * q) / np.sin(0.5 * q)
        g = np.sin(l * q) / sq * (2.0 - m1 * omega * omega / k)
    else:
        f, g = np.linalg.matrix_power(tm.matrix, l) @ np.array([1.0, 0.0])
    return float(f * k ** (2 * l)), float(g * k ** (2 * l - 1))


def _chain_det(length: int, omega: float, m1: float, m2: float, k: float) -> float:
    """Determinant of a sub-chain of ``length`` sites whose first site has mass ``m1``."""
    if length == -1:
        return 0.0
    if length == 0:
        return 1.0
    l = (length + 1) // 2
    f, g = determinants_f_g(l, omega, m1, m2, k, FirstMass.A)
    return f if length % 2 == 0 else g


def _delta_from_minors(omega: float, spec: ChainSpec) -> complex:
    n = spec.n_sites
    k = spec.spring_k
    m1, m2 = _site_masses(spec.first_mass, spec.mass_a, spec.mass_b)
    gl, gr = spec.gamma_left, spec.gamma_right
    d1n = _chain_det(n, omega, m1, m2, k)
    d1n1 = _chain_det(n - 1, omega, m1, m2, k)
    d2n = _chain_det(n - 1, omega, m2, m1, k)
    d2n1 = _chain_det(n - 2, omega, m2, m1, k)
    return complex(d1n - 1j * omega * (gr * d1n1 + gl * d2n) - omega**2 * gl * gr * d2n1)


def boundary_determinant(omega: float, spec: ChainSpec) -> complex:
    """``Delta_{1,N} = det[-M w^2 + Phi - i w Gamma]`` in closed trigonometric form.

    Valid for unpinned chains; the trigonometric form is continued to complex
    Bloch angle in the gaps.  At band edges, where the closed form is 0/0, the
    value is assembled from the sub-determinants instead.
    """
    validate_spec(spec)
    if spec.pin_k0 != 0.0:
        raise PinningUnsupported("closed-form boundary determinant needs pin_k0 = 0")
    n = spec.n_sites
    k = spec.spring_k
    m1, m2 = _site_masses(spec.first_mass, spec.mass_a, spec.mass_b)
    m1, m2 = m1 / k, m2 / k
    gl, gr = spec.gamma_left / k, spec.gamma_right / k
    w = omega
    w2 = w * w
    cq = ((2 - m1 * w2) * (2 - m2 * w2) - 2) / 2
    q = np.arccos(complex(cq))
    s_half = np.sin(q / 2)
    s_full = np.sin(q)
    if abs(s_half) < 1e-7 or abs(s_full) < 1e-7:
        return _delta_from_minors(omega, spec)
    if n % 2 == 0:
        real = (np.sin((n + 1) * q / 2) - gl * gr * w2 * np.sin((n - 1) * q / 2)) / s_half
        imag = w * (gl * (2 - m2 * w2) + gr * (2 - m1 * w2)) * np.sin(n * q / 2) / s_full
    else:
        real = (
            (2 - m1 * w2) * np.sin((n + 1) * q / 2)
            - gl * gr * w2 * (2 - m2 * w2) * np.sin((n - 1) * q / 2)
        ) / s_full
        imag = w * (gl + gr) * np.sin(n * q / 2) / s_half
    # both pieces are real; complex q only carries the continuation into the gaps
    return complex(complex(real).real, -complex(imag).real) * k**n


def _diagonal(spec: ChainSpec, omega: np.ndarray) -> np.ndarray:
    gammas, _ = bath_vectors(spec)
    m = spec.masses()
    w = np.asarray(omega, dtype=float)[..., None]
    return 2.0 * spec.spring_k + spec.pin_k0 - m * w * w - 1j * w * gammas


def green_columns(spec: ChainSpec, omega) -> tuple[np.ndarray, np.ndarray]:
    """``G_{i,1}`` and ``G_{i,N}`` for every site, vectorized over ``omega``.

    Uses ``rho_i = Delta_{i,N} / Delta_{i+1,N}`` (backward) and
    ``sigma_i = Delta_{1,i} / Delta_{1,i-1}`` (forward), then
    ``G_{i1} = k^{i-1} / prod_{j<=i} rho_j`` and ``G_{iN} = k^{N-i} / prod_{j>=i} sigma_j``.
    """
    z = _diagonal(spec, omega)
    n = spec.n_sites
    k = spec.spring_k
    k2 = k * k
    rho = np.empty_like(z)
    sig = np.empty_like(z)
    rho[..., n - 1] = z[..., n - 1]
    for i in range(n - 2, -1, -1):
        rho[..., i] = z[..., i] - k2 / rho[..., i + 1]
    sig[..., 0] = z[..., 0]
    for i in range(1, n):
        sig[..., i] = z[..., i] - k2 / sig[..., i - 1]
    col1 = np.cumprod(k / rho, axis=-1) / k
    coln = np.cumprod((k / sig)[..., ::-1], axis=-1)[..., ::-1] / k
    return col1, coln


def determinant_set(omega: float, spec: ChainSpec, site: int) -> DeterminantSet:
    """``Delta_{1,l-1}``, ``Delta_{l+1,N}`` and ``Delta_{1,N}`` for a 1-based site ``l``."""
    z = _diagonal(spec, np.array([omega]))[0]
    k2 = spec.spring_k**2
    n = spec.n_sites

    def minor(lo: int, hi: int) -> complex:
        prev, cur = 0.0 + 0j, 1.0 + 0j
        for j in range(lo - 1, hi):
            prev, cur = cur, z[j] * cur - k2 * prev
        return cur

    return DeterminantSet(
        omega=omega,
        delta_left=minor(1, site - 1),
        delta_right=minor(site + 1, n),
        delta_full=minor(1, n),
    )


def green_elements(omega: float, spec: ChainSpec, site: int) -> tuple[complex, complex]:
    """``(G_{i,1}, G_{i,N})`` at one frequency for a 1-based site ``i``."""
    validate_spec(spec)
    if not 1 <= site <= spec.n_sites:
        raise IndexError(f"site {site} outside 1..{spec.n_sites}")
    col1, coln = green_columns(spec, np.array([omega]))
    return complex(col1[0, site - 1]), complex(coln[0, site - 1])


def band_edges(spec: ChainSpec) -> np.ndarray:
    """Edges of the acoustic and optical bands of the infinite alternating chain."""
    k, k0 = spec.spring_k, spec.pin_k0
    ma, mb = spec.mass_a, spec.mass_b
    c = 2 * k + k0
    edges = [c / ma, c / mb]
    # q = 0 edges: (c - ma u)(c - mb u) = 4 k^2
    disc = (c * (ma + mb)) ** 2 - 4 * ma * mb * (c * c - 4 * k * k)
    for sgn in (-1.0, 1.0):
        edges.append((c * (ma + mb) + sgn * np.sqrt(max(disc, 0.0))) / (2 * ma * mb))
    edges = np.sqrt(np.clip(edges, 0.0, None))
    return np.unique(np.round(edges, 14))


def _integrand_factory(spec: ChainSpec):
    m = spec.masses()
    pref_l = 2.0 * m * spec.gamma_left / np.pi
    pref_r = 2.0 * m * spec.gamma_right / np.pi

    def integrand(omega):
        w = np.asarray(omega, dtype=float)
        col1, coln = green_columns(spec, w)
        w2 = (w * w)[..., None]
        return np.concatenate(
            [pref_l * w2 * np.abs(col1) ** 2, pref_r * w2 * np.abs(coln) ** 2], axis=-1
        )

    return integrand


def cutoff_frequency(spec: ChainSpec, eps_tail: float = 1e-12) -> tuple[float, float]:
    """Return ``(omega_cut, peak)`` with integrand at ``omega_cut`` below ``eps_tail * peak``."""
    f = _integrand_factory(spec)
    top = float(band_edges(spec).max())
    grid = np.linspace(0.0, 1.5 * top, 4001)[1:]
    peak = float(f(grid).max())
    cut = 1.05 * top
    while f(np.array([cut])).max() > eps_tail * peak:
        cut *= 1.25
        if cut > 1e8 * top:
            break
    return cut, peak


def all_site_integrals(spec: ChainSpec, cfg: QuadConfig | None = None):
    """``(I, Î, error, omega_cut)`` for every site in one vector-valued quadrature."""
    validate_spec(spec)
    cfg = cfg or QuadConfig()
    n = spec.n_sites
    f = _integrand_factory(spec)

    def scalar(w):
        return f(np.array([w]))[0]

    cut, _ = cutoff_frequency(spec, cfg.eps_tail)
    pts = [0.0] + [e for e in band_edges(spec) if 0.0 < e < cut] + [cut]
    total = np.zeros(2 * n)
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, e, info = quad_vec(
                scalar, lo, hi, epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=cfg.limit,
                full_output=True,
            )
            if info.status == 1 and e > max(cfg.epsabs, cfg.epsrel * np.abs(val).max()):
                raise QuadratureNotConverged(f"panel [{lo:.4g}, {hi:.4g}]: error {e:.3e}")
            total += val
            err += e
        val, e, info = quad_vec(
            scalar, cut, np.inf, epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=cfg.limit,
            full_output=True,
        )
        total += val
        err += e
    return total[:n], total[n:], err, cut


def site_integrals(spec: ChainSpec, site: int, cfg: QuadConfig | None = None) -> SiteIntegrals:
    if not 1 <= site <= spec.n_sites:
        raise IndexError(f"site {site} outside 1..{spec.n_sites}")
    fwd, bwd, err, _ = all_site_integrals(spec, cfg)
    return SiteIntegrals(site=site, forward=float(fwd[site - 1]), backward=float(bwd[site - 1]),
                         error=err)


def greens_profile(spec: ChainSpec, cfg: QuadConfig | None = None) -> GreensResult:
    """Temperature profile ``T_i = I_i T_L + Î_i T_R`` and current ``(g_R/m_N) dT I_N``."""
    fwd, bwd, err, cut = all_site_integrals(spec, cfg)
    temps = fwd * spec.temp_left + bwd * spec.temp_right
    m_last = spec.masses()[-1]
    current = spec.gamma_right / m_last * spec.delta_temp * fwd[-1]
    n = spec.n_sites
    bonds = np.full(max(n - 1, 0), current)
    prof = SteadyStateProfile(temperatures=temps, bond_currents=bonds, mean_current=float(current))
    return GreensResult(spec=spec, forward=fwd, backward=bwd, error=err, omega_cut=cut,
                        profile=prof)
