"""Trotterized Brownian evolution of the doubled operator state.

The state representing rho^{1/4} O(t) rho^{1/4} is stored as the doubled
register amplitude vector, reshaped to Phi[b, a] with a the original-copy
index and b the auxiliary-copy index. One noise realization H drives both
copies of a step:

    Phi  <-  A(U) @ Phi @ U^T,     U = exp(-i H dt),

where A(U)[i, l] = sigma(~i) sigma(~l) conj(U)[~i, ~l] is the auxiliary-copy
image of conj(U). The complement-and-sign dressing is forced by the
fermionic pairing of the two copies: it makes the update equal, exactly, to
the operator conjugation O -> U O U^dag under the operator-state map, which
plain entrywise conjugation on auxiliary qubits would not be.

Charge conservation makes H block diagonal over total-charge sectors, and
the dressing maps sector q to sector K - q, so the optional charge_sector
mode evolves only the populated (row, column) sector blocks of Phi.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from threadpoolctl import threadpool_limits

from ..core import CouplingMenu, Filling
from ..errors import ConfigError, NumericalError
from ..greens import quasiparticle_rate
from ..sizeflow import SizeDistribution
from .fermions import ModeLayout, complement_permutation, mode_matrix, pairing_signs
from .hamiltonian import HamiltonianSampler, _capacity_check
from .sizeops import SizeSpectrum, state_from_operator

_UNITARITY_TOL = 1e-10      # per-step rejection threshold
_TAYLOR_ACCEPT_TOL = 1e-13  # fast path must not dominate accumulated drift
# Fourth-order Taylor error ~ (||H|| dt)^5 / 120; keeping it below the
# acceptance tolerance bounds the norm drift at ~1e-13 per step, which keeps
# whole trajectories within 1e-10 per unit time at Trotter steps of 1e-3.
_TAYLOR_NORM_LIMIT = 6.5e-3
_STABILITY_LIMIT = 0.05

_INITIAL_OP_RE = re.compile(r"^(c|cdag|charge)([1-9][0-9]*)$")


def parse_initial_operator(spec: str, n_sys: int) -> tuple[str, int]:
    match = _INITIAL_OP_RE.match(spec)
    if not match:
        raise ConfigError(
            f"initial operator {spec!r} not recognized; expected c<j>, "
            "cdag<j>, or charge<j>")
    kind, j = match.group(1), int(match.group(2))
    if j > n_sys:
        raise ConfigError(f"initial operator mode {j} exceeds n_sys={n_sys}")
    return kind, j


def initial_operator_matrix(kind: str, j: int, n_sys: int, n_env: int) -> np.ndarray:
    """Single-copy matrix of the traced operator (system mode j, 1-based)."""
    layout = ModeLayout(n_sys, n_env)
    c = mode_matrix(layout.n_single, j - 1).toarray()
    if kind == "c":
        return c
    if kind == "cdag":
        return c.conj().T
    if kind == "charge":
        return 2.0 * (c.conj().T @ c) - np.eye(layout.dim_single)
    raise ConfigError(f"unknown initial operator kind {kind!r}")


@dataclass(frozen=True)
class OracleConfig:
    """Complete specification of one exact-simulation run."""

    n_sys: int
    n_env: int
    menu: CouplingMenu
    filling: Filling
    dt: float
    t_final: float
    realizations: int
    seed: int
    times: tuple[float, ...] | None = None
    initial_operator: str = "c1"
    charge_sector: bool = False

    def __post_init__(self):
        ModeLayout(self.n_sys, self.n_env)  # validates register bounds
        self.menu.require_valid()
        _capacity_check(self.menu, self.n_sys, self.n_env)
        if not self.dt > 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0.0:
            raise ConfigError(f"t_final must be >= 0, got {self.t_final}")
        if self.realizations < 1:
            raise ConfigError(
                f"realizations must be >= 1, got {self.realizations}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        gamma = quasiparticle_rate(self.menu, self.filling).gamma
        if self.dt * gamma > _STABILITY_LIMIT + 1e-15:
            raise ConfigError(
                f"dt * Gamma = {self.dt * gamma:.4g} exceeds the stability "
                f"bound {_STABILITY_LIMIT}; reduce dt")
        parse_initial_operator(self.initial_operator, self.n_sys)
        if self.times is not None:
            times = tuple(float(t) for t in self.times)
            if any(t < 0.0 or t > self.t_final + 1e-12 for t in times):
                raise ConfigError("snapshot times must lie in [0, t_final]")
            object.__setattr__(self, "times", times)

    @property
    def layout(self) -> ModeLayout:
        return ModeLayout(self.n_sys, self.n_env)

    def snapshot_steps(self) -> list[int]:
        """Snapshot times snapped to Trotter-step boundaries (deduplicated)."""
        if self.times is None:
            requested = np.linspace(0.0, self.t_final, 9)
        else:
            requested = np.asarray(self.times, dtype=float)
        steps = sorted({int(round(t / self.dt)) for t in requested})
        return steps


@dataclass(frozen=True)
class OperatorState:
    """Doubled-register amplitudes of the evolving operator."""

    amplitudes: np.ndarray = field(repr=False)
    n_sys: int
    n_env: int

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class EvolutionResult:
    times: np.ndarray
    states: list[OperatorState]
    unitarity_max_dev: float


def prepare_initial_state(config: OracleConfig) -> OperatorState:
    kind, j = parse_initial_operator(config.initial_operator, config.n_sys)
    op = initial_operator_matrix(kind, j, config.n_sys, config.n_env)
    psi, _ = state_from_operator(op, config.n_sys, config.n_env, config.filling)
    return OperatorState(amplitudes=psi, n_sys=config.n_sys, n_env=config.n_env)


def _step_unitary(h: np.ndarray, dt: float) -> tuple[np.ndarray, float]:
    """exp(-i h dt) with a unitarity audit.

    Fourth-order Taylor when ||h|| dt is small, otherwise (or whenever the
    audit fails) scaling-and-squaring; the returned deviation is the max
    entry of |U^dag U - 1|.
    """
    dim = h.shape[0]
    eye = np.eye(dim)
    if np.linalg.norm(h, "fro") * dt <= _TAYLOR_NORM_LIMIT:
        x = -1j * dt * h
        x2 = x @ x
        u = eye + x + x2 / 2.0 + (x2 @ x) / 6.0 + (x2 @ x2) / 24.0
        dev = float(np.abs(u.conj().T @ u - eye).max())
        if dev <= _TAYLOR_ACCEPT_TOL:
            return u, dev
    u = expm(-1j * dt * h)
    dev = float(np.abs(u.conj().T @ u - eye).max())
    if dev > _UNITARITY_TOL:
        raise NumericalError(
            f"step unitary failed the unitarity audit: deviation {dev:.3e}")
    return u, dev


class _FullPropagator:
    """Dense full-register propagation."""

    def __init__(self, layout: ModeLayout):
        k = layout.n_single
        self.perm = complement_permutation(k)
        sigma = pairing_signs(k)
        self.s2 = sigma[self.perm]

    def step(self, phi: np.ndarray, h: np.ndarray, dt: float) -> tuple[np.ndarray, float]:
        u, dev = _step_unitary(h, dt)
        dressed = (self.s2[:, None] * self.s2[None, :]
                   * np.conj(u)[np.ix_(self.perm, self.perm)])
        return dressed @ phi @ u.T, dev


class _SectorPropagator:
    """Propagation restricted to the populated total-charge sector blocks."""

    def __init__(self, layout: ModeLayout, phi: np.ndarray, tol: float = 0.0):
        k = layout.n_single
        idx = np.arange(layout.dim_single, dtype=np.int64)
        charges = np.bitwise_count(idx.astype(np.uint64)).astype(np.int64)
        self.sectors = [np.flatnonzero(charges == q) for q in range(k + 1)]
        perm = complement_permutation(k)
        sigma = pairing_signs(k)
        s2 = sigma[perm]
        # Position of ~i within its charge sector, and the per-sector signs.
        pos = np.empty(layout.dim_single, dtype=np.int64)
        for sec in self.sectors:
            pos[sec] = np.arange(len(sec))
        self.partner_pos = [pos[perm[sec]] for sec in self.sectors]
        self.s2_sector = [s2[sec] for sec in self.sectors]
        self.k = k
        self.blocks = [
            (qb, qa)
            for qb in range(k + 1)
            for qa in range(k + 1)
            if np.linalg.norm(phi[np.ix_(self.sectors[qb], self.sectors[qa])]) > tol
        ]

    def step(self, phi: np.ndarray, h: np.ndarray, dt: float) -> tuple[np.ndarray, float]:
        needed_u = {qa for _, qa in self.blocks}
        needed_conj = {self.k - qb for qb, _ in self.blocks}
        unitaries = {}
        dev = 0.0
        for q in needed_u | needed_conj:
            sec = self.sectors[q]
            if len(sec) == 0:
                continue
            u_q, d = _step_unitary(h[np.ix_(sec, sec)], dt)
            unitaries[q] = u_q
            dev = max(dev, d)
        out = phi.copy()
        for qb, qa in self.blocks:
            sec_b, sec_a = self.sectors[qb], self.sectors[qa]
            u_conj = np.conj(unitaries[self.k - qb])
            pp = self.partner_pos[qb]
            s2 = self.s2_sector[qb]
            dressed = s2[:, None] * s2[None, :] * u_conj[np.ix_(pp, pp)]
            block = phi[np.ix_(sec_b, sec_a)]
            out[np.ix_(sec_b, sec_a)] = dressed @ block @ unitaries[qa].T
        return out, dev


def evolve_operator_state(config: OracleConfig,
                          rng: np.random.Generator | None = None) -> EvolutionResult:
    """One noise realization: evolve and collect states at the snapshot grid.

    BLAS pools are pinned to one thread: per-step matrices are too small for
    intra-op threading to pay for its synchronization.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    layout = config.layout
    dim = layout.dim_single
    state = prepare_initial_state(config)
    phi = state.amplitudes.reshape(dim, dim).copy()
    sampler = HamiltonianSampler(config.menu, config.n_sys, config.n_env)
    propagator = (_SectorPropagator(layout, phi) if config.charge_sector
                  else _FullPropagator(layout))

    snap_steps = config.snapshot_steps()
    times, states = [], []
    max_dev = 0.0
    next_snap = 0
    with threadpool_limits(limits=1):
        for step in range(snap_steps[-1] + 1):
            if next_snap < len(snap_steps) and step == snap_steps[next_snap]:
                times.append(step * config.dt)
                states.append(OperatorState(
                    amplitudes=phi.reshape(-1).copy(),
                    n_sys=config.n_sys, n_env=config.n_env))
                next_snap += 1
            if step == snap_steps[-1]:
                break
            h = sampler.sample(rng, config.dt)
            phi, dev = propagator.step(phi, h, config.dt)
            max_dev = max(max_dev, dev)
    return EvolutionResult(times=np.asarray(times), states=states,
                           unitarity_max_dev=max_dev)


def size_distribution_oracle(state: OperatorState, spectrum: SizeSpectrum,
                             nu_grid=None, t: float = 0.0):
    """Exact size distribution of a doubled-register state.

    P(s) = <state| Pi_s |state> / <state|state>. With nu_grid given, also
    returns the generating function values sum_s e^{-nu s} P(s).
    """
    if spectrum.n_sys != state.n_sys or spectrum.n_env != state.n_env:
        raise ConfigError("state and size spectrum describe different registers")
    weights = spectrum.measure(state.amplitudes)
    probs = weights / state.norm_sq
    dist = SizeDistribution(t=t, probs=probs,
                            tail_mass=1.0 - probs.sum())
    if nu_grid is None:
        return dist
    nu = np.asarray(nu_grid, dtype=float)
    s = np.arange(len(probs))
    z = np.exp(-nu[:, None] * s[None, :]) @ probs
    return dist, z
