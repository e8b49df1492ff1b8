"""Stochastic simulation of the chain with Langevin end baths and bulk noise.

One step is a symmetric splitting: half kick, half drift, exact
Ornstein-Uhlenbeck update of every bath-coupled momentum, half drift, half
kick.  Splitting the drift around the bath update keeps the stationary bias at
O(dt^2).  Bulk noise events are then applied at the end of the step.  Two channels are available:

* momentum-conserving: a random bond ``(i, j)`` undergoes an elastic
  collision.  This is the only nontrivial map on ``(p_i, p_j)`` that keeps both
  the momentum and the kinetic energy.  A literal swap ``p_i <-> p_j`` would
  not conserve energy for unequal masses.
* velocity-flip: a random site has ``p_i -> -p_i``.

Gaussian draws and event times come from ``numpy.random.default_rng(seed)`` in
fixed per-block chunks, so a run is bit-reproducible from its config.

Both noise channels are linear in ``p``, so the second moments obey a closed
linear equation.  ``exact_noisy_covariance`` solves it and serves as the
reference that simulations are checked against.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import InsufficientBlocks, InvalidSpec, NonFiniteState, SolverBreakdown
from .lyapunov import CovarianceMatrix, SteadyStateProfile, _SchurLyapunov
from .model import ChainSpec, SystemMatrices, bath_vectors, build_system_matrices, chain_bonds

MIN_BLOCKS = 20


class NoiseKind(str, enum.Enum):
    NONE = "None"
    MOMENTUM_CONSERVING = "MomentumConserving"
    VELOCITY_FLIP = "VelocityFlip"


class Scheduler(str, enum.Enum):
    BERNOULLI = "bernoulli"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class SimConfig:
    dt: float
    n_steps: int
    burn_in: int = 0
    seed: int = 0
    lam: float = 0.0
    noise_kind: NoiseKind = NoiseKind.NONE
    block_size: int | None = None
    scheduler: Scheduler = Scheduler.BERNOULLI

    def validate(self) -> "SimConfig":
        bad = []
        if not self.dt > 0:
            bad.append(("InvalidTimeStep", f"dt must be > 0, got {self.dt}"))
        if self.lam < 0:
            bad.append(("InvalidRate", f"lambda must be >= 0, got {self.lam}"))
        if self.lam * self.dt > 0.1:
            bad.append(("InvalidRate", f"lambda*dt = {self.lam * self.dt:.3g} exceeds 0.1"))
        if self.n_steps < 1 or not 0 <= self.burn_in < self.n_steps:
            bad.append(("InvalidSteps", f"need 0 <= burn_in < n_steps, got {self.burn_in}, {self.n_steps}"))
        try:
            NoiseKind(self.noise_kind)
            Scheduler(self.scheduler)
        except ValueError as exc:
            bad.append(("InvalidNoiseKind", str(exc)))
        if self.block_size is not None and self.block_size < 1:
            bad.append(("InvalidSteps", f"block_size must be >= 1, got {self.block_size}"))
        if bad:
            raise InvalidSpec(bad)
        return self

    @property
    def blocks(self) -> tuple[int, int]:
        """``(block_size, n_blocks)`` of the production phase."""
        prod = self.n_steps - self.burn_in
        bs = self.block_size or max(1, prod // 100)
        return bs, prod // bs


@dataclass(frozen=True)
class MeasuredProfile(SteadyStateProfile):
    n_blocks: int = 0
    mean_current_stderr: float = 0.0
    block_temperatures: np.ndarray | None = field(default=None, repr=False)


def default_dt(spec: ChainSpec) -> float:
    """``0.005 / omega_max`` with ``omega_max`` the top of the optical band."""
    k, k0 = spec.spring_k, spec.pin_k0
    ma, mb = spec.mass_a, spec.mass_b
    s = 2 * k + k0
    # top of the band: (s - m_a w^2)(s - m_b w^2) = 4 k^2, larger root in w^2
    w2 = (s * (ma + mb) + np.sqrt((s * (ma - mb)) ** 2 + 16 * k * k * ma * mb)) / (2 * ma * mb)
    return 0.005 / np.sqrt(w2)


# ---------------------------------------------------------------- local noise maps


def collision_matrix(m_i: float, m_j: float) -> np.ndarray:
    """Elastic-collision map on ``(p_i, p_j)``; conserves momentum and kinetic energy."""
    tot = m_i + m_j
    return np.array([[m_i - m_j, 2 * m_i], [2 * m_j, m_j - m_i]]) / tot


def apply_momentum_exchange(state, bond: int, masses, rng=None):
    """Elastic collision across bond ``bond`` (1-based, joining sites ``bond`` and ``bond+1``).

    ``rng`` is unused (the map is deterministic once the bond is picked); it is
    accepted so all noise operations share a signature.
    """
    q, p = state
    n = p.shape[0]
    if not 1 <= bond <= n - 1:
        raise IndexError(f"bond must be in 1..{n - 1}, got {bond}")
    i = bond - 1
    p = np.array(p, dtype=float)
    p[i:i + 2] = collision_matrix(masses[i], masses[i + 1]) @ p[i:i + 2]
    return q, p


def apply_velocity_flip(state, site: int):
    q, p = state
    n = p.shape[0]
    if not 1 <= site <= n:
        raise IndexError(f"site must be in 1..{n}, got {site}")
    p = np.array(p, dtype=float)
    p[site - 1] = -p[site - 1]
    return q, p


# ---------------------------------------------------------------- compiled core


@numba.njit(cache=True, nogil=True)
def _advance(q, p, inv_m, indptr, indices, data, bath_idx, bath_c, bath_s, xi, dt,
             ev_step, ev_cand, kind, pair_i, pair_j, coll, bond_i, bond_j, bond_k,
             sample, t_acc, j_acc):
    n = q.shape[0]
    n_steps = xi.shape[0]
    f = np.empty(n)
    h = 0.5 * dt
    e = 0
    n_ev = ev_step.shape[0]
    # f holds the force at the current q; reused by the next step's first half kick
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * q[indices[k]]
        f[i] = acc
    for s in range(n_steps):
        for i in range(n):
            p[i] -= h * f[i]
            q[i] += h * p[i] * inv_m[i]
        for b in range(bath_idx.shape[0]):
            i = bath_idx[b]
            p[i] = bath_c[b] * p[i] + bath_s[b] * xi[s, b]
        for i in range(n):
            q[i] += h * p[i] * inv_m[i]
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * q[indices[k]]
            f[i] = acc
            p[i] -= h * acc
        while e < n_ev and ev_step[e] == s:
            c = ev_cand[e]
            if kind == 1:
                a, b = pair_i[c], pair_j[c]
                pa, pb = p[a], p[b]
                p[a] = coll[c, 0] * pa + coll[c, 1] * pb
                p[b] = coll[c, 2] * pa + coll[c, 3] * pb
            elif kind == 2:
                p[c] = -p[c]
            e += 1
        if sample:
            for i in range(n):
                t_acc[i] += p[i] * p[i] * inv_m[i]
            for b in range(bond_i.shape[0]):
                a = bond_i[b]
                j_acc[b] += bond_k[b] * (q[a] - q[bond_j[b]]) * p[a] * inv_m[a]


@dataclass(frozen=True)
class _Problem:
    """Flat arrays the compiled kernel needs, built from any ``SystemMatrices``."""

    masses: np.ndarray
    force: sp.csr_matrix
    bath_idx: np.ndarray
    bath_gamma: np.ndarray
    bath_temp: np.ndarray
    bonds: list
    pairs: np.ndarray  # exchange candidates (i, j), 0-based

    @classmethod
    def from_chain(cls, spec: ChainSpec) -> "_Problem":
        mats = build_system_matrices(spec)
        bonds = chain_bonds(spec.n_sites, spec.spring_k)
        return cls.from_matrices(mats, *bath_vectors(spec), bonds)

    @classmethod
    def from_matrices(cls, mats: SystemMatrices, gamma: np.ndarray, noise: np.ndarray,
                      bonds: list) -> "_Problem":
        idx = np.flatnonzero(gamma > 0)
        temp = noise[idx] / (2 * gamma[idx])
        pairs = np.array([(i, j) for i, j, _ in bonds], dtype=np.int64).reshape(-1, 2)
        return cls(mats.masses, sp.csr_matrix(mats.force), idx.astype(np.int64), gamma[idx],
                   temp, bonds, pairs)

    def ou_coefficients(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        m = self.masses[self.bath_idx]
        c = np.exp(-self.bath_gamma * dt / m)
        s = np.sqrt(m * self.bath_temp * (1 - c * c))
        return c, s


class _Stepper:
    def __init__(self, prob: _Problem, cfg: SimConfig):
        self.prob = prob
        self.cfg = cfg
        self.kind = {NoiseKind.NONE: 0, NoiseKind.MOMENTUM_CONSERVING: 1,
                     NoiseKind.VELOCITY_FLIP: 2}[NoiseKind(cfg.noise_kind)]
        self.inv_m = 1.0 / prob.masses
        f = prob.force
        self.indptr = f.indptr.astype(np.int64)
        self.indices = f.indices.astype(np.int64)
        self.data = f.data.astype(float)
        self.c, self.s = prob.ou_coefficients(cfg.dt)
        n = prob.masses.shape[0]
        if self.kind == 2:
            self.n_cand = n
        elif self.kind == 1:
            self.n_cand = prob.pairs.shape[0]
        else:
            self.n_cand = 0
        pairs = prob.pairs if prob.pairs.size else np.zeros((0, 2), np.int64)
        self.pair_i = np.ascontiguousarray(pairs[:, 0])
        self.pair_j = np.ascontiguousarray(pairs[:, 1])
        m = prob.masses
        self.coll = np.array([collision_matrix(m[i], m[j]).ravel() for i, j in pairs]).reshape(-1, 4)
        b = prob.bonds
        self.bond_i = np.array([x[0] for x in b], dtype=np.int64)
        self.bond_j = np.array([x[1] for x in b], dtype=np.int64)
        self.bond_k = np.array([x[2] for x in b], dtype=float)

    def events(self, rng: np.random.Generator, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
        lam, dt, nc = self.cfg.lam, self.cfg.dt, self.n_cand
        if self.kind == 0 or lam == 0 or nc == 0:
            empty = np.zeros(0, np.int64)
            return empty, empty
        if Scheduler(self.cfg.scheduler) is Scheduler.BERNOULLI:
            # geometric gaps between successes of Bernoulli(lam*dt) trials in (step, candidate) order
            prob = lam * dt
            total = n_steps * nc
            expect = int(total * prob + 10 * np.sqrt(total * prob) + 16)
            pos = np.cumsum(rng.geometric(prob, size=expect)) - 1
            while pos[-1] < total:
                more = np.cumsum(rng.geometric(prob, size=expect)) + pos[-1]
                pos = np.concatenate([pos, more])
            pos = pos[pos < total]
            return (pos // nc).astype(np.int64), (pos % nc).astype(np.int64)
        # exact Poisson clocks: total rate lam*nc, uniform candidate, applied after the step they fall in
        rate = lam * nc
        horizon = n_steps * dt
        count = rng.poisson(rate * horizon)
        times = np.sort(rng.uniform(0.0, horizon, size=count))
        cand = rng.integers(0, nc, size=count)
        steps = np.minimum((times / dt).astype(np.int64), n_steps - 1)
        return steps, cand.astype(np.int64)

    def run(self, q, p, rng, n_steps, t_acc, j_acc, sample):
        xi = rng.standard_normal((n_steps, self.prob.bath_idx.shape[0]))
        ev_step, ev_cand = self.events(rng, n_steps)
        _advance(q, p, self.inv_m, self.indptr, self.indices, self.data, self.prob.bath_idx,
                 self.c, self.s, xi, self.cfg.dt, ev_step, ev_cand, self.kind, self.pair_i,
                 self.pair_j, self.coll, self.bond_i, self.bond_j, self.bond_k, sample, t_acc,
                 j_acc)


def step(state, spec: ChainSpec, dt: float, rng: np.random.Generator, cfg: SimConfig | None = None):
    """Advance ``(q, p)`` by one step (copies; inputs are not modified)."""
    cfg = cfg or SimConfig(dt=dt, n_steps=1)
    stepper = _Stepper(_Problem.from_chain(spec), cfg)
    q = np.array(state[0], dtype=float)
    p = np.array(state[1], dtype=float)
    n = q.shape[0]
    stepper.run(q, p, rng, 1, np.zeros(n), np.zeros(max(n - 1, 0)), False)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise NonFiniteState("state became non-finite")
    return q, p


def total_energy(state, spec: ChainSpec) -> float:
    q, p = state
    phi = build_system_matrices(spec).force
    return float(0.5 * np.sum(p * p / spec.masses()) + 0.5 * q @ phi @ q)


def equilibrium_positions(force: sp.spmatrix, temp: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``q ~ N(0, temp * Phi^-1)`` with a banded Cholesky factor of ``Phi``."""
    f = sp.csr_matrix(force)
    n = f.shape[0]
    coo = f.tocoo()
    u = int(np.abs(coo.row - coo.col).max()) if coo.nnz else 0
    band = np.zeros((u + 1, n))
    for k in range(u + 1):
        band[u - k, k:] = f.diagonal(k)
    chol = sla.cholesky_banded(band)
    # Phi = U^T U, so U^-1 xi has covariance Phi^-1
    return np.sqrt(temp) * sla.solve_banded((0, u), chol, rng.standard_normal(n))


def relaxation_time(mats: SystemMatrices) -> float:
    """Decay time of second moments, ``1 / (2 min Re eig(a))``: sets burn-in and block length."""
    return float(1.0 / (2.0 * np.linalg.eigvals(mats.drift).real.min()))


def _simulate(prob: _Problem, cfg: SimConfig):
    cfg.validate()
    bs, nb = cfg.blocks
    if nb < MIN_BLOCKS:
        raise InsufficientBlocks(f"{nb} blocks of {bs} steps; need at least {MIN_BLOCKS}")
    stepper = _Stepper(prob, cfg)
    rng = np.random.default_rng(cfg.seed)
    n = prob.masses.shape[0]
    nbond = len(prob.bonds)
    # start from the Gibbs state at the mean bath temperature; it differs from the
    # steady state only at O(T_L - T_R), which keeps the burn-in transient small
    t_mean = prob.bath_temp.mean()
    q = equilibrium_positions(prob.force, t_mean, rng)
    p = rng.standard_normal(n) * np.sqrt(prob.masses * t_mean)
    t_acc = np.zeros(n)
    j_acc = np.zeros(nbond)
    left = cfg.burn_in
    while left > 0:
        chunk = min(left, bs)
        stepper.run(q, p, rng, chunk, t_acc, j_acc, False)
        left -= chunk
    if not np.all(np.isfinite(p)):
        raise NonFiniteState("state became non-finite during burn-in")
    t_blocks = np.empty((nb, n))
    j_blocks = np.empty((nb, nbond))
    for b in range(nb):
        t_acc[:] = 0.0
        j_acc[:] = 0.0
        stepper.run(q, p, rng, bs, t_acc, j_acc, True)
        if not (np.all(np.isfinite(t_acc)) and np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise NonFiniteState(f"state became non-finite in block {b}")
        t_blocks[b] = t_acc / bs
        j_blocks[b] = j_acc / bs
    return t_blocks, j_blocks


def block_stderr(blocks: np.ndarray) -> np.ndarray:
    """Standard error of the mean of each column of ``blocks`` (one row per block).

    Block means of a slowly relaxing chain stay correlated, so the naive
    ``s / sqrt(nb)`` is inflated by the integrated autocorrelation time of the
    block series.  That time comes from Geyer's initial monotone positive
    sequence and is never allowed below 1.
    """
    blocks = np.asarray(blocks, dtype=float)
    if blocks.ndim == 1:
        return block_stderr(blocks[:, None])[0]
    nb = blocks.shape[0]
    x = blocks - blocks.mean(axis=0)
    var = (x * x).mean(axis=0)
    safe = np.where(var > 0, var, 1.0)
    n_lag = 2 * (nb // 4)
    rho = np.array([(x[k:] * x[:nb - k]).sum(axis=0) / (nb * safe) for k in range(n_lag)])
    pairs = rho[0::2] + rho[1::2]
    keep = np.cumprod(pairs > 0, axis=0).astype(bool)
    pairs = np.minimum.accumulate(np.where(keep, pairs, 0.0), axis=0)
    tau = np.maximum(-1.0 + 2.0 * pairs.sum(axis=0), 1.0)
    return np.sqrt(tau * blocks.var(axis=0, ddof=1) / nb)


def _profile_from_blocks(t_blocks: np.ndarray, j_blocks: np.ndarray) -> MeasuredProfile:
    nb = t_blocks.shape[0]
    t = t_blocks.mean(axis=0)
    t_err = block_stderr(t_blocks)
    j = j_blocks.mean(axis=0)
    j_err = block_stderr(j_blocks) if j_blocks.shape[1] else np.zeros(0)
    jm = j_blocks.mean(axis=1)
    return MeasuredProfile(
        temperatures=t,
        bond_currents=j,
        mean_current=float(jm.mean()) if j.size else 0.0,
        temp_stderr=t_err,
        current_stderr=j_err,
        n_blocks=nb,
        mean_current_stderr=float(block_stderr(jm)) if j.size else 0.0,
        block_temperatures=t_blocks,
    )


def run_ness(spec: ChainSpec, cfg: SimConfig) -> MeasuredProfile:
    """Time-averaged temperatures and bond currents with block-average error bars."""
    return _profile_from_blocks(*_simulate(_Problem.from_chain(spec), cfg))


def run_matrices(mats: SystemMatrices, gamma: np.ndarray, noise: np.ndarray, bonds: list,
                 cfg: SimConfig) -> MeasuredProfile:
    """``run_ness`` for a general harmonic network (used by the strip)."""
    return _profile_from_blocks(*_simulate(_Problem.from_matrices(mats, gamma, noise, bonds), cfg))


def merge_profiles(profiles: list[MeasuredProfile]) -> MeasuredProfile:
    """Inverse-variance combination of independent replicas."""
    if len(profiles) == 1:
        return profiles[0]

    def comb(vals, errs):
        vals, errs = np.asarray(vals), np.asarray(errs)
        w = 1.0 / np.maximum(errs, 1e-300) ** 2
        return (w * vals).sum(axis=0) / w.sum(axis=0), 1.0 / np.sqrt(w.sum(axis=0))

    t, te = comb([p.temperatures for p in profiles], [p.temp_stderr for p in profiles])
    j, je = comb([p.bond_currents for p in profiles], [p.current_stderr for p in profiles])
    jm, jme = comb([p.mean_current for p in profiles], [p.mean_current_stderr for p in profiles])
    return MeasuredProfile(
        temperatures=t, bond_currents=j, mean_current=float(jm), temp_stderr=te,
        current_stderr=je, n_blocks=sum(p.n_blocks for p in profiles),
        mean_current_stderr=float(jme),
    )


def run_replicas(spec: ChainSpec, cfg: SimConfig, n_replicas: int, workers: int | None = None
                 ) -> MeasuredProfile:
    """Independent trajectories with seeds ``cfg.seed + r``, run on threads and merged."""
    from dataclasses import replace

    cfgs = [replace(cfg, seed=cfg.seed + r) for r in range(n_replicas)]
    # compiled kernel releases the GIL
    with ThreadPoolExecutor(max_workers=workers or n_replicas) as pool:
        profiles = list(pool.map(lambda c: run_ness(spec, c), cfgs))
    return merge_profiles(profiles)


# ---------------------------------------------------------------- exact references


def _noise_generator(prob: _Problem, kind: NoiseKind):
    """Return ``(E, local)``: the mean noise generator is ``b -> -(E b + b E^T + local(b))``."""
    n = prob.masses.shape[0]
    dim = 2 * n
    if kind is NoiseKind.VELOCITY_FLIP:
        e = sp.diags(np.r_[np.zeros(n), -2.0 * np.ones(n)]).tocsr()
        pidx = np.arange(n, dim)

        def local(b):
            out = np.zeros_like(b)
            out[pidx, pidx] = 4.0 * b[pidx, pidx]
            return out

        return e, local
    if kind is NoiseKind.MOMENTUM_CONSERVING:
        m = prob.masses
        rows, cols, vals, blocks = [], [], [], []
        for i, j in prob.pairs:
            r = collision_matrix(m[i], m[j]) - np.eye(2)
            idx = (n + i, n + j)
            for a in range(2):
                for c in range(2):
                    rows.append(idx[a]); cols.append(idx[c]); vals.append(r[a, c])
            blocks.append((np.array(idx), r))
        e = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))

        def local(b):
            out = np.zeros_like(b)
            for idx, r in blocks:
                out[np.ix_(idx, idx)] += r @ b[np.ix_(idx, idx)] @ r.T
            return out

        return e, local
    raise ValueError("no bulk noise")


def exact_noisy_covariance(spec: ChainSpec, lam: float, kind: NoiseKind | str,
                           tol: float = 1e-12) -> CovarianceMatrix:
    """Stationary second moments of the continuous-time dynamics with bulk noise.

    Solves ``a b + b a^T + lam * sum_r (b - R_r b R_r^T) = d`` where ``R_r`` is
    the linear map of noise event ``r``.  The part of the noise term that is linear
    in ``E = sum_r (R_r - I)`` goes into the drift.  The remaining local
    quadratic part is handled by GMRES, preconditioned with the Schur solver.
    """
    kind = NoiseKind(kind)
    mats = build_system_matrices(spec)
    if lam == 0 or kind is NoiseKind.NONE:
        from .lyapunov import solve_stationary_covariance

        return solve_stationary_covariance(mats, tol=tol)
    prob = _Problem.from_chain(spec)
    e, local = _noise_generator(prob, kind)
    a_eff = mats.drift - lam * e.toarray()
    solver = _SchurLyapunov(a_eff)
    dim = a_eff.shape[0]
    rhs = solver.solve(mats.diffusion)

    def matvec(v):
        b = v.reshape(dim, dim)
        return (b - lam * solver.solve(local(b))).ravel()

    op = LinearOperator((dim * dim, dim * dim), matvec=matvec, dtype=float)
    x, info = gmres(op, rhs.ravel(), rtol=tol * 1e-2, atol=0.0, restart=100, maxiter=20)
    b = x.reshape(dim, dim)
    b = 0.5 * (b + b.T)
    full = mats.drift @ b + b @ mats.drift.T
    full += lam * (-(e @ b) - (e @ b).T - local(b))
    res = float(np.abs(full - mats.diffusion).max())
    if res > 1e3 * tol * np.abs(mats.diffusion).max():
        raise SolverBreakdown(f"noisy covariance residual {res:.3e} (gmres info {info})")
    return CovarianceMatrix(b=b, residual=res)


def one_step_map(spec: ChainSpec, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear one-step map ``x' = F x + noise`` of the integrator (no bulk noise).

    Returns ``(F, Q)`` with ``Q`` the covariance of the injected noise.
    """
    prob = _Problem.from_chain(spec)
    st = _Stepper(prob, SimConfig(dt=dt, n_steps=1))
    n = prob.masses.shape[0]
    nb = prob.bath_idx.shape[0]
    empty = np.zeros(0, np.int64)

    def apply(x, xi):
        q, p = x[:n].copy(), x[n:].copy()
        _advance(q, p, st.inv_m, st.indptr, st.indices, st.data, prob.bath_idx, st.c, st.s,
                 xi, dt, empty, empty, 0, st.pair_i, st.pair_j, st.coll, st.bond_i,
                 st.bond_j, st.bond_k, False, np.zeros(n), np.zeros(max(n - 1, 0)))
        return np.r_[q, p]

    eye = np.eye(2 * n)
    f = np.column_stack([apply(eye[c], np.zeros((1, nb))) for c in range(2 * n)])
    # response of the zero state to one unit normal per bath
    g = np.column_stack([apply(np.zeros(2 * n), np.eye(nb)[b][None, :]) for b in range(nb)])
    return f, g @ g.T


def discrete_covariance(spec: ChainSpec, dt: float) -> np.ndarray:
    """Exact stationary covariance of the time-discretized dynamics (``lambda = 0``)."""
    f, qn = one_step_map(spec, dt)
    return sla.solve_discrete_lyapunov(f, qn)


# ---------------------------------------------------------------- profile analysis


def alternation(temps: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Local light-minus-heavy signal ``s_i (T_i - (T_{i-1} + T_{i+1}) / 2)``.

    ``s_i = +1`` on the lighter sublattice.  Defined for sites 2..N-1; the two
    end entries are NaN.  Works on the last axis, so block arrays are fine.
    """
    temps = np.asarray(temps, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if np.ptp(masses) == 0:
        raise ValueError("alternation needs two distinct masses")
    sign = np.where(masses < masses.max(), 1.0, -1.0)
    out = np.full(temps.shape, np.nan)
    out[..., 1:-1] = sign[1:-1] * (temps[..., 1:-1] - 0.5 * (temps[..., :-2] + temps[..., 2:]))
    return out


def _site_window(n: int, lo: float, hi: float) -> np.ndarray:
    """Boolean mask of 1-based sites with ``lo < i/N <= hi`` (interior sites only)."""
    i = np.arange(1, n + 1)
    x = i / n
    return (x > lo) & (x <= hi) & (i > 1) & (i < n)


def light_minus_heavy(temps, masses, lo: float, hi: float):
    """Mean alternation over the sites with ``lo < i/N <= hi``."""
    alt = alternation(temps, masses)
    return alt[..., _site_window(alt.shape[-1], lo, hi)].mean(axis=-1)


def oscillation_amplitude(temps, masses, fraction: float = 0.5):
    """Bulk oscillation amplitude over the central ``fraction`` of the chain.

    The alternation is averaged separately on each side of the centre, because
    its sign may flip across the middle, and the magnitudes are averaged.
    """
    lo = 0.5 * (1 - fraction)
    left = light_minus_heavy(temps, masses, lo, 0.5)
    right = light_minus_heavy(temps, masses, 0.5, 1 - lo)
    return 0.5 * (np.abs(left) + np.abs(right))


def linear_fit_residual(temps, fraction: float = 0.5):
    """RMS deviation of the central ``fraction`` of the profile from its best straight line."""
    temps = np.asarray(temps, dtype=float)
    n = temps.shape[-1]
    cut = int(round(n * (1 - fraction) / 2))
    sel = np.arange(cut, n - cut)
    x = np.c_[np.ones(sel.size), sel + 1.0]
    proj = x @ np.linalg.pinv(x)
    r = temps[..., sel] - temps[..., sel] @ proj.T
    return np.sqrt(np.mean(r * r, axis=-1))


def jackknife(fn, block_temps: np.ndarray) -> tuple[float, float]:
    """``fn`` of the mean profile and its delete-one-block jackknife standard error."""
    nb = block_temps.shape[0]
    total = block_temps.sum(axis=0)
    full = float(fn(total / nb))
    loo = np.array([fn((total - block_temps[b]) / (nb - 1)) for b in range(nb)])
    err = np.sqrt((nb - 1) / nb * np.sum((loo - loo.mean()) ** 2))
    return full, float(err)
