"""Jordan-Wigner machinery over an ordered register of fermionic modes.

Conventions used everywhere in the oracle:

* Basis states are integers; bit k of the index is the occupation of mode k.
* A basis ket is the product of creation operators on the vacuum ordered by
  ascending mode index (smallest index leftmost), which makes the JW sign of
  an elementary operator on mode m the parity of the occupied modes below m.
* The doubled register holds the original copy at the low indices and the
  auxiliary copy at the high indices:
      c_1..c_N, e_1..e_M, xi_1..xi_N, eta_1..eta_M
  so strings of original-copy operators never touch auxiliary qubits.

Monomials are applied with vectorized bit arithmetic; explicit sparse
matrices are built from the same primitive so both paths share one sign
convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError

DOUBLED_QUBIT_LIMIT = 20


def popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a.astype(np.uint64)).astype(np.int64)


def parity(a: np.ndarray) -> np.ndarray:
    return popcount(a) & 1


@dataclass(frozen=True)
class ModeLayout:
    """Index bookkeeping for the doubled register of a (N system, M env) model."""

    n_sys: int
    n_env: int

    def __post_init__(self):
        if self.n_sys < 1:
            raise ConfigError(f"need at least one system mode, got {self.n_sys}")
        if self.n_env < 0:
            raise ConfigError(f"environment mode count must be >= 0, got {self.n_env}")
        if 2 * (self.n_sys + self.n_env) > DOUBLED_QUBIT_LIMIT:
            raise ConfigError(
                f"doubled register needs {2 * (self.n_sys + self.n_env)} qubits, "
                f"limit is {DOUBLED_QUBIT_LIMIT}")

    @property
    def n_single(self) -> int:
        """Modes per copy (K = N + M)."""
        return self.n_sys + self.n_env

    @property
    def n_doubled(self) -> int:
        return 2 * self.n_single

    @property
    def dim_single(self) -> int:
        return 1 << self.n_single

    @property
    def dim_doubled(self) -> int:
        return 1 << self.n_doubled

    # 1-based mode labels, matching the physics notation.
    def c(self, j: int) -> int:
        self._check(j, self.n_sys, "system")
        return j - 1

    def e(self, a: int) -> int:
        self._check(a, self.n_env, "environment")
        return self.n_sys + a - 1

    def xi(self, j: int) -> int:
        self._check(j, self.n_sys, "system")
        return self.n_single + j - 1

    def eta(self, a: int) -> int:
        self._check(a, self.n_env, "environment")
        return self.n_single + self.n_sys + a - 1

    @staticmethod
    def _check(i, bound, kind):
        if not 1 <= i <= bound:
            raise ConfigError(f"{kind} mode index {i} outside 1..{bound}")


def monomial_entries(n_modes: int, ops: list[tuple[str, int]]):
    """Nonzero entries of a product of elementary fermion operators.

    `ops` lists ('+', m) for creation and ('-', m) for annihilation in
    operator order (leftmost factor first); application to kets therefore
    walks the list backwards. Returns (rows, cols, signs) over the full
    2^n_modes basis.
    """
    dim = 1 << n_modes
    cols = np.arange(dim, dtype=np.int64)
    cur = cols.copy()
    sign = np.ones(dim, dtype=np.int64)
    for kind, m in reversed(ops):
        bit = np.int64(1 << m)
        occupied = (cur & bit) != 0
        keep = occupied if kind == "-" else ~occupied
        cols, cur, sign = cols[keep], cur[keep], sign[keep]
        sign = np.where(parity(cur & (bit - 1)) == 1, -sign, sign)
        cur = cur ^ bit
    return cur, cols, sign.astype(np.float64)


def apply_monomial(psi: np.ndarray, n_modes: int,
                   ops: list[tuple[str, int]]) -> np.ndarray:
    """Apply a monomial to a dense state vector."""
    rows, cols, signs = monomial_entries(n_modes, ops)
    out = np.zeros_like(psi)
    out[rows] = signs * psi[cols]
    return out


def mode_matrix(n_modes: int, mode: int, dagger: bool = False) -> sp.csr_matrix:
    """Sparse matrix of a single annihilation (or creation) operator."""
    ops = [("+" if dagger else "-", mode)]
    rows, cols, signs = monomial_entries(n_modes, ops)
    dim = 1 << n_modes
    return sp.csr_matrix((signs, (rows, cols)), shape=(dim, dim))


class ModeOperators:
    """Indexed family of doubled-space mode matrices with cached construction."""

    def __init__(self, n_sys: int, n_env: int):
        self.layout = ModeLayout(n_sys, n_env)
        self._cache: dict[tuple[int, bool], sp.csr_matrix] = {}

    @property
    def dim(self) -> int:
        return self.layout.dim_doubled

    def annihilation(self, mode: int) -> sp.csr_matrix:
        return self._get(mode, dagger=False)

    def creation(self, mode: int) -> sp.csr_matrix:
        return self._get(mode, dagger=True)

    def _get(self, mode, dagger):
        if not 0 <= mode < self.layout.n_doubled:
            raise ConfigError(f"mode index {mode} outside doubled register")
        key = (mode, dagger)
        if key not in self._cache:
            self._cache[key] = mode_matrix(self.layout.n_doubled, mode, dagger)
        return self._cache[key]

    # Physics-labelled accessors (1-based).
    def c(self, j: int) -> sp.csr_matrix:
        return self.annihilation(self.layout.c(j))

    def e(self, a: int) -> sp.csr_matrix:
        return self.annihilation(self.layout.e(a))

    def xi(self, j: int) -> sp.csr_matrix:
        return self.annihilation(self.layout.xi(j))

    def eta(self, a: int) -> sp.csr_matrix:
        return self.annihilation(self.layout.eta(a))


def build_mode_operators(n_sys: int, n_env: int) -> ModeOperators:
    """Doubled-space annihilation/creation family; raises ConfigError when
    2(N+M) exceeds the qubit limit."""
    return ModeOperators(n_sys, n_env)


def pairing_signs(n_single: int) -> np.ndarray:
    """Fermionic reordering sign sigma(a) of the maximally-entangled pairing.

    The reference state is prod_k (f_k^dag + g_k^dag)|0> / 2^{K/2}; writing
    a component in the ascending-index basis requires commuting the chosen
    g-creations past later f-creations, giving sigma(a) = (-1)^{#inversions}
    where a is the set of f-occupied pairs.
    """
    dim = 1 << n_single
    a = np.arange(dim, dtype=np.int64)
    inversions = np.zeros(dim, dtype=np.int64)
    for l in range(n_single):
        bit_l = (a >> l) & 1
        zeros_below = l - popcount(a & ((1 << l) - 1))
        inversions += bit_l * zeros_below
    return 1.0 - 2.0 * (inversions & 1)


def complement_permutation(n_single: int) -> np.ndarray:
    """Index permutation a -> ~a over the single-copy register."""
    dim = 1 << n_single
    return (dim - 1) - np.arange(dim, dtype=np.int64)
