"""Doubled-space reference state, operator-to-state map, and the size
operator in its diagonalizing mode basis.

The size operator of system pair j (modes c_j and xi_j) is

    s_j = d_j^dag d_j + g_j g_j^dag,
    d_j = alpha c_j - beta xi_j,   g_j = beta c_j + alpha xi_j,
    alpha = e^{mu/4} / sqrt(2 cosh(mu/2)),  beta = e^{-mu/4} / sqrt(2 cosh(mu/2)),

with spectrum {0, 1, 1, 2} per pair. Rotating each pair to the (d, g) modes
makes the total size diagonal: a rotated basis state has

    s = N + (occupied c-slots) - (occupied xi-slots).

The pair rotations commute (disjoint mode pairs), and the J-W string between
c_j and xi_j enters only as a configuration-dependent sign eta on the
off-diagonal mixing, handled exactly below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..core import Filling
from ..errors import ConfigError, InternalConsistencyError
from .fermions import (ModeLayout, ModeOperators, apply_monomial,
                       complement_permutation, pairing_signs, parity)

_ROTATION_ATOL = 1e-12


def _alpha_beta(mu: float) -> tuple[float, float]:
    norm = math.sqrt(2.0 * math.cosh(mu / 2.0))
    return math.exp(mu / 4.0) / norm, math.exp(-mu / 4.0) / norm


def rho_quarter_diag(n_single: int, mu: float) -> np.ndarray:
    """Diagonal of the (unnormalized) quarter power of the steady state."""
    a = np.arange(1 << n_single, dtype=np.int64)
    return np.exp(-mu * np.bitwise_count(a.astype(np.uint64)).astype(float) / 4.0)


def reference_state(n_sys: int, n_env: int, filling: Filling) -> np.ndarray:
    """Normalized pair-entangled reference state of the doubled register.

    Built as the ordered product over pairs k of (beta f_k^dag + alpha
    g_k^dag) acting on the vacuum: each pair holds exactly one fermion, with
    the density-dependent weights that make every pair a zero eigenvector of
    the size operator.
    """
    layout = ModeLayout(n_sys, n_env)
    alpha, beta = _alpha_beta(filling.mu)
    k_total = layout.n_single
    psi = np.zeros(layout.dim_doubled, dtype=complex)
    psi[0] = 1.0
    # Rightmost factor (largest k) acts first.
    for k in range(k_total - 1, -1, -1):
        f_branch = apply_monomial(psi, layout.n_doubled, [("+", k)])
        g_branch = apply_monomial(psi, layout.n_doubled, [("+", k_total + k)])
        psi = beta * f_branch + alpha * g_branch
    return psi


def state_from_operator(op: np.ndarray, n_sys: int, n_env: int,
                        filling: Filling) -> tuple[np.ndarray, float]:
    """Map a single-copy operator to its doubled-space state.

    Returns (normalized state, norm of the unnormalized image). The operator
    is dressed on both sides with the quarter power of the steady state
    before mapping, i.e. the state represents rho^{1/4} O rho^{1/4}.
    """
    layout = ModeLayout(n_sys, n_env)
    k = layout.n_single
    rho4 = rho_quarter_diag(k, filling.mu)
    dressed = rho4[:, None] * np.asarray(op, dtype=complex) * rho4[None, :]
    perm = complement_permutation(k)
    sigma = pairing_signs(k)
    # State components: Phi[a, b] = sigma(~b) * dressed[a, ~b]; the flat
    # doubled index is b * 2^K + a (auxiliary copy in the high bits).
    phi = dressed[:, perm] * sigma[perm][None, :]
    psi = np.ascontiguousarray(phi.T).reshape(-1)
    norm = float(np.linalg.norm(psi))
    if norm == 0.0:
        raise ConfigError("initial operator maps to the zero state")
    return psi / norm, norm


def operator_from_state(psi: np.ndarray, n_sys: int, n_env: int,
                        filling: Filling) -> np.ndarray:
    """Inverse of state_from_operator (including the rho^{1/4} undressing)."""
    layout = ModeLayout(n_sys, n_env)
    k = layout.n_single
    perm = complement_permutation(k)
    sigma = pairing_signs(k)
    phi = psi.reshape(layout.dim_single, layout.dim_single).T
    dressed = phi[:, perm] * sigma[None, :]
    rho4 = rho_quarter_diag(k, filling.mu)
    return dressed / rho4[:, None] / rho4[None, :]


@dataclass(frozen=True)
class SizeSpectrum:
    """Size eigenvalues over the doubled basis, via the decoupled-mode rotation.

    `eigenvalues[i]` is the integer size of rotated basis state i; projectors
    are realized as rotate -> mask -> rotate back.
    """

    n_sys: int
    n_env: int
    mu: float
    alpha: float
    beta: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def layout(self) -> ModeLayout:
        return ModeLayout(self.n_sys, self.n_env)

    @property
    def s_max(self) -> int:
        return 2 * self.n_sys

    def rotate(self, psi: np.ndarray, inverse: bool = False) -> np.ndarray:
        """Coordinates of psi in the eigenbasis of the size operator.

        Operates on (and returns) a copy. The J-W string parity eta between
        c_j and xi_j multiplies the off-diagonal mixing per configuration.
        """
        layout = self.layout
        k = layout.n_single
        out = psi.copy()
        idx = np.arange(layout.dim_doubled, dtype=np.int64)
        beta = -self.beta if inverse else self.beta
        for j in range(self.n_sys):
            p, q = j, k + j
            sel = ((idx >> p) & 1 == 0) & ((idx >> q) & 1 == 1)
            i01 = idx[sel]
            i10 = i01 + (1 << p) - (1 << q)
            between = ((1 << q) - 1) ^ ((1 << (p + 1)) - 1)
            eta = 1.0 - 2.0 * parity(i01 & between)
            a01, a10 = out[i01], out[i10]
            out[i01] = self.alpha * a01 + eta * beta * a10
            out[i10] = self.alpha * a10 - eta * beta * a01
        return out

    def measure(self, psi: np.ndarray) -> np.ndarray:
        """Exact size distribution P(s), s = 0..2N, of a normalized state."""
        weights = np.abs(self.rotate(psi)) ** 2
        return np.bincount(self.eigenvalues, weights=weights,
                           minlength=self.s_max + 1)

    def apply_projector(self, s: int, psi: np.ndarray) -> np.ndarray:
        if not 0 <= s <= self.s_max:
            raise ConfigError(f"size {s} outside 0..{self.s_max}")
        rotated = self.rotate(psi)
        rotated[self.eigenvalues != s] = 0.0
        return self.rotate(rotated, inverse=True)


def build_size_spectrum(n_sys: int, n_env: int, filling: Filling) -> SizeSpectrum:
    """Construct the diagonalized size operator for the doubled register.

    The decoupled modes are canonical exactly when alpha^2 + beta^2 = 1;
    that normalization is audited here (matrix-level anticommutator checks
    live in the test suite at small sizes).
    """
    layout = ModeLayout(n_sys, n_env)
    alpha, beta = _alpha_beta(filling.mu)
    if abs(alpha * alpha + beta * beta - 1.0) > _ROTATION_ATOL:
        raise InternalConsistencyError(
            "decoupled size modes lost canonical normalization")
    k = layout.n_single
    idx = np.arange(layout.dim_doubled, dtype=np.int64)
    sys_mask = (1 << n_sys) - 1
    occupied_c = np.bitwise_count((idx & sys_mask).astype(np.uint64)).astype(np.int64)
    occupied_xi = np.bitwise_count(((idx >> k) & sys_mask).astype(np.uint64)).astype(np.int64)
    eigenvalues = n_sys + occupied_c - occupied_xi
    return SizeSpectrum(n_sys=n_sys, n_env=n_env, mu=filling.mu,
                        alpha=alpha, beta=beta,
                        eigenvalues=eigenvalues.astype(np.int64))


def size_operator_matrix(n_sys: int, n_env: int, filling: Filling,
                         j: int | None = None) -> sp.csr_matrix:
    """Explicit (sparse) size operator, for audits at small sizes.

    With j given, the single-pair operator s_j; otherwise the total size.
    """
    ops = ModeOperators(n_sys, n_env)
    alpha, beta = _alpha_beta(filling.mu)

    def single(jj: int) -> sp.csr_matrix:
        c = ops.c(jj)
        xi = ops.xi(jj)
        d = alpha * c - beta * xi
        g = beta * c + alpha * xi
        return (d.conj().T @ d + g @ g.conj().T).tocsr()

    if j is not None:
        return single(j)
    total = sp.csr_matrix((ops.dim, ops.dim))
    for jj in range(1, n_sys + 1):
        total = total + single(jj)
    return total.tocsr()
