"""Exact finite-N steady state from the covariance equation ``a b + b a^T = d``.

The solver is a Bartels-Stewart scheme: one real Schur factorization of the
drift matrix, a recursive blocked quasi-triangular solve (GEMM updates around
LAPACK ``trsyl`` on small diagonal blocks), then a couple of
iterative-refinement sweeps whose residual is evaluated in extended precision.
The refinement reuses the Schur factors, so it costs far less than the initial
factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack

from .errors import SolverBreakdown, TooLarge, UnstableDrift
from .model import ChainSpec, SystemMatrices, build_system_matrices, chain_bonds

ORACLE_MAX_SITES = 16


@dataclass(frozen=True)
class CovarianceMatrix:
    b: np.ndarray
    residual: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.b.shape[0] // 2

    @property
    def qq(self) -> np.ndarray:
        n = self.n_sites
        return self.b[:n, :n]

    @property
    def qp(self) -> np.ndarray:
        n = self.n_sites
        return self.b[:n, n:]

    @property
    def pp(self) -> np.ndarray:
        n = self.n_sites
        return self.b[n:, n:]


@dataclass(frozen=True)
class SteadyStateProfile:
    temperatures: np.ndarray
    bond_currents: np.ndarray
    mean_current: float
    temp_stderr: np.ndarray | None = None
    current_stderr: np.ndarray | None = None

    @property
    def n_sites(self) -> int:
        return self.temperatures.shape[0]


def _schur_eigvals(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    out = []
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            out.extend(np.linalg.eigvals(t[i:i + 2, i:i + 2]))
            i += 2
        else:
            out.append(t[i, i])
            i += 1
    return np.asarray(out)


_BASE_BLOCK = 64


def _split(t: np.ndarray) -> int:
    k = t.shape[0] // 2
    if t[k, k - 1] != 0.0:
        k += 1  # never cut through a 2x2 Schur block
    return k


def _trsyl(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    x, scale, info = lapack.dtrsyl(a, b, c, trana="N", tranb="T", isgn=1)
    if info < 0:
        raise SolverBreakdown(f"trsyl rejected argument {-info}")
    if info == 1:
        raise SolverBreakdown("trsyl: drift spectrum too close to the imaginary axis")
    return x / scale if scale != 1.0 else x


def _sylvester(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Recursive blocked solve of ``a x + x b^T = c``, ``a`` and ``b`` quasi-triangular."""
    m, n = c.shape
    if m <= _BASE_BLOCK and n <= _BASE_BLOCK:
        return _trsyl(a, b, c)
    if m >= n:
        k = _split(a)
        x2 = _sylvester(a[k:, k:], b, c[k:])
        x1 = _sylvester(a[:k, :k], b, c[:k] - a[:k, k:] @ x2)
        return np.vstack([x1, x2])
    k = _split(b)
    x2 = _sylvester(a, b[k:, k:], c[:, k:])
    x1 = _sylvester(a, b[:k, :k], c[:, :k] - x2 @ b[:k, k:].T)
    return np.hstack([x1, x2])


def _lyapunov(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Recursive blocked solve of ``t y + y t^T = f`` for symmetric ``f``."""
    n = t.shape[0]
    if n <= _BASE_BLOCK:
        return _trsyl(t, t, f)
    k = _split(t)
    t11, t12, t22 = t[:k, :k], t[:k, k:], t[k:, k:]
    y22 = _lyapunov(t22, f[k:, k:])
    y12 = _sylvester(t11, t22, f[:k, k:] - t12 @ y22)
    rhs = f[:k, :k] - t12 @ y12.T
    y11 = _lyapunov(t11, rhs - y12 @ t12.T)
    return np.block([[y11, y12], [y12.T, y22]])


class _SchurLyapunov:
    """Solves ``a x + x a^T = c`` repeatedly for one fixed ``a``."""

    def __init__(self, a: np.ndarray):
        self.t, self.u = sla.schur(a, output="real")
        self.eigvals = _schur_eigvals(self.t)

    def solve(self, c: np.ndarray) -> np.ndarray:
        u = self.u
        f = u.T @ c @ u
        f = 0.5 * (f + f.T)
        y = _lyapunov(self.t, f)
        return u @ y @ u.T


def _residual_ext(a_sp: sp.csr_matrix, b: np.ndarray, d: np.ndarray) -> np.ndarray:
    bl = b.astype(np.longdouble)
    ab = np.asarray(a_sp @ bl)
    r = d.astype(np.longdouble) - ab - ab.T
    return r.astype(float)


def solve_stationary_covariance(
    mats: SystemMatrices, tol: float = 1e-12, refine: int = 2
) -> CovarianceMatrix:
    """Stationary covariance of the linear Langevin system.

    ``tol`` bounds ``max|a b + b a^T - d|`` relative to ``max|d|``.
    """
    a = mats.drift
    d = mats.diffusion
    solver = _SchurLyapunov(a)
    ev = solver.eigvals
    floor = 1e-14 * max(1.0, float(np.abs(ev).max()))
    if ev.real.min() <= floor:
        raise UnstableDrift(
            f"drift eigenvalue with real part {ev.real.min():.3e} <= 0; some mode is undamped"
        )

    b = solver.solve(d)
    scale_b = np.abs(b).max()
    if scale_b > 0 and np.abs(b - b.T).max() > 1e-8 * scale_b:
        raise SolverBreakdown("covariance came back asymmetric beyond 1e-8 relative")
    b = 0.5 * (b + b.T)

    a_sp = sp.csr_matrix(a.astype(np.longdouble))
    for _ in range(refine):
        r = _residual_ext(a_sp, b, d)
        if not np.any(r):
            break
        db = solver.solve(r)
        b = b + 0.5 * (db + db.T)
        if np.abs(db).max() <= 4 * np.finfo(float).eps * max(np.abs(b).max(), 1e-300):
            break

    if not np.all(np.isfinite(b)):
        raise SolverBreakdown("non-finite entries in covariance")
    res = float(np.abs(a @ b + b @ a.T - d).max())
    ref = float(np.abs(d).max()) or 1.0
    if res > tol * ref:
        raise SolverBreakdown(f"residual {res:.3e} exceeds tolerance {tol * ref:.3e}")
    return CovarianceMatrix(b=b, residual=res)


def kronecker_oracle(mats: SystemMatrices) -> CovarianceMatrix:
    """Brute-force dense solve of the vectorized covariance equation (test oracle)."""
    n = mats.n_sites
    if n > ORACLE_MAX_SITES:
        raise TooLarge(f"oracle limited to N <= {ORACLE_MAX_SITES}, got {n}")
    a = mats.drift
    dim = 2 * n
    eye = np.eye(dim)
    # row-major vec: vec(a b) = (a kron I) vec(b), vec(b a^T) = (I kron a) vec(b)
    big = np.kron(a, eye) + np.kron(eye, a)
    b = np.linalg.solve(big, mats.diffusion.reshape(-1)).reshape(dim, dim)
    b = 0.5 * (b + b.T)
    res = float(np.abs(a @ b + b @ a.T - mats.diffusion).max())
    return CovarianceMatrix(b=b, residual=res)


def bond_currents(
    b: np.ndarray, masses: np.ndarray, bonds: list[tuple[int, int, float]]
) -> np.ndarray:
    """Current ``k <(q_i - q_j) p_i / m_i>`` through each bond ``(i, j, k)``.

    Positive values flow from site ``i`` to site ``j``.
    """
    n = masses.shape[0]
    out = np.empty(len(bonds))
    for idx, (i, j, k) in enumerate(bonds):
        out[idx] = k * (b[i, n + i] - b[j, n + i]) / masses[i]
    return out


def profile_from_covariance(cov: CovarianceMatrix, spec: ChainSpec) -> SteadyStateProfile:
    b = cov.b if isinstance(cov, CovarianceMatrix) else np.asarray(cov)
    n = spec.n_sites
    m = spec.masses()
    temps = np.diag(b)[n:] / m
    currents = bond_currents(b, m, chain_bonds(n, spec.spring_k))
    mean = float(currents.mean()) if currents.size else 0.0
    return SteadyStateProfile(temperatures=temps, bond_currents=currents, mean_current=mean)


def solve_chain(spec: ChainSpec, tol: float = 1e-12) -> SteadyStateProfile:
    """Validate, assemble, solve and extract the profile in one call."""
    mats = build_system_matrices(spec)
    return profile_from_covariance(solve_stationary_covariance(mats, tol=tol), spec)


def bulk_sublattice_means(temps: np.ndarray, fraction: float = 0.5) -> tuple[float, float]:
    """Mean temperature on odd and even sites (1-based) over the central ``fraction``."""
    n = temps.shape[0]
    lo = int(round(n * (1 - fraction) / 2))
    hi = n - lo
    idx = np.arange(lo, hi)
    site = idx + 1
    odd = temps[idx[site % 2 == 1]].mean()
    even = temps[idx[site % 2 == 0]].mean()
    return float(odd), float(even)
