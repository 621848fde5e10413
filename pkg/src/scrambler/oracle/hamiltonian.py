"""Brownian Hamiltonian sampling on the single-copy register.

Each menu entry expands into all ordered index tuples of its monomial shape;
every tuple carries an independent Gaussian coupling whose white-noise
variance becomes variance/dt on a Trotter step of length dt. Couplings come
in Hermitian-conjugate pairs: the independent set holds one orientation with
a complex coefficient (self-conjugate diagonal tuples are real), and the
conjugate orientation is restored by adding the dagger of the assembled
matrix.

Variance normalizations (rate units):

    intra q:  J_q / [ (q/2)! (q/2-1)! N^{q-1} ]
    cross p:  U_p / [ p1! p2! p3! p4! N^{p1+p2-1} M^{p3+p4} ]

The cross normalization is symmetric under (p1,p3) <-> (p2,p4); an
orientation-dependent prefactor would assign zero variance to pure
system-to-environment hopping, in contradiction with the quasiparticle rate
it must reproduce, so the symmetric form is used for every key. The test
suite pins the resulting rates against the analytic Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from ..core import CouplingMenu
from ..errors import ConfigError
from .fermions import ModeLayout, monomial_entries


@dataclass(frozen=True)
class TermSpec:
    """One independent monomial: operator content and sampling variance."""

    key: object
    ops: tuple = field(repr=False)
    variance_rate: float
    self_conjugate: bool


def _capacity_check(menu: CouplingMenu, n_sys: int, n_env: int):
    for q in menu.intra:
        if q // 2 > n_sys:
            raise ConfigError(
                f"intra term q={q} needs {q // 2} system modes, have {n_sys}")
    for p in menu.cross:
        p1, p2, p3, p4 = p
        if max(p1, p2) > n_sys:
            raise ConfigError(
                f"cross term {p} needs {max(p1, p2)} system modes, have {n_sys}")
        if max(p3, p4) > n_env:
            raise ConfigError(
                f"cross term {p} needs {max(p3, p4)} environment modes, "
                f"have {n_env}")


def enumerate_terms(menu: CouplingMenu, n_sys: int, n_env: int) -> list[TermSpec]:
    """Independent monomials of every menu entry, with their variances."""
    menu.require_valid()
    _capacity_check(menu, n_sys, n_env)
    n, m = n_sys, n_env
    terms: list[TermSpec] = []

    for q, strength in sorted(menu.intra.items()):
        half = q // 2
        variance = strength / (math.factorial(half) * math.factorial(half - 1)
                               * n ** (q - 1))
        for cre in combinations(range(n), half):
            for ann in combinations(range(n), half):
                if ann < cre:
                    continue  # conjugate of an already-listed tuple
                ops = tuple([("+", i) for i in cre] + [("-", j) for j in ann])
                terms.append(TermSpec(key=q, ops=ops, variance_rate=variance,
                                      self_conjugate=(cre == ann)))

    for p, strength in sorted(menu.cross.items()):
        p1, p2, p3, p4 = p
        variance = strength / (
            math.factorial(p1) * math.factorial(p2) * math.factorial(p3)
            * math.factorial(p4) * n ** (p1 + p2 - 1) * m ** (p3 + p4))
        mirrored_shape = (p1, p3) == (p2, p4)
        for cre_s in combinations(range(n), p1):
            for ann_s in combinations(range(n), p2):
                for cre_e in combinations(range(m), p3):
                    for ann_e in combinations(range(m), p4):
                        if mirrored_shape and (ann_s, ann_e) < (cre_s, cre_e):
                            continue
                        self_conj = mirrored_shape and (
                            cre_s == ann_s and cre_e == ann_e)
                        ops = tuple(
                            [("+", i) for i in cre_s]
                            + [("-", j) for j in ann_s]
                            + [("+", n + a) for a in cre_e]
                            + [("-", n + b) for b in ann_e])
                        terms.append(TermSpec(key=p, ops=ops,
                                              variance_rate=variance,
                                              self_conjugate=self_conj))
    return terms


class HamiltonianSampler:
    """Draws one Trotter-step Hamiltonian matrix per call.

    The sparsity pattern of every monomial is precomputed once; a draw only
    fills in fresh Gaussian coefficients and assembles the dense Hermitian
    matrix. Two standard-normal numbers are consumed per term in a fixed
    order, so the stream layout is independent of term content.
    """

    def __init__(self, menu: CouplingMenu, n_sys: int, n_env: int):
        self.layout = ModeLayout(n_sys, n_env)
        self.terms = enumerate_terms(menu, n_sys, n_env)
        k = self.layout.n_single
        rows, cols, signs, term_ids = [], [], [], []
        nnz_per_term = []
        for t_id, term in enumerate(self.terms):
            r, c, s = monomial_entries(k, list(term.ops))
            rows.append(r)
            cols.append(c)
            signs.append(s)
            term_ids.append(np.full(len(r), t_id, dtype=np.int64))
            nnz_per_term.append(len(r))
        self._rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        self._cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        self._signs = np.concatenate(signs) if signs else np.zeros(0)
        self._term_ids = (np.concatenate(term_ids) if term_ids
                          else np.zeros(0, np.int64))
        self.nnz_per_term = np.array(nnz_per_term, dtype=np.int64)
        self._variances = np.array([t.variance_rate for t in self.terms])
        self._self_conj = np.array([t.self_conjugate for t in self.terms],
                                   dtype=bool)

    @property
    def dim(self) -> int:
        return self.layout.dim_single

    def sample(self, rng: np.random.Generator, dt: float) -> np.ndarray:
        """One Hermitian step Hamiltonian with variances variance_rate/dt."""
        n_terms = len(self.terms)
        dim = self.dim
        if n_terms == 0:
            return np.zeros((dim, dim), dtype=complex)
        draws = rng.standard_normal((n_terms, 2))
        scale = np.sqrt(self._variances / dt)
        coefs = np.where(
            self._self_conj,
            0.5 * scale * draws[:, 0],
            np.sqrt(0.5) * scale * (draws[:, 0] + 1j * draws[:, 1]))
        data = coefs[self._term_ids] * self._signs
        h = sp.coo_matrix((data, (self._rows, self._cols)),
                          shape=(dim, dim)).toarray()
        return h + h.conj().T

    def analytic_frobenius_sq(self, dt: float) -> float:
        """Expected squared Frobenius norm of a sampled step Hamiltonian."""
        weight = np.where(self._self_conj, 1.0, 2.0)
        return float(np.sum(weight * self._variances / dt * self.nnz_per_term))


def total_charge_matrix(n_sys: int, n_env: int) -> np.ndarray:
    """Diagonal single-copy total charge (system plus environment)."""
    layout = ModeLayout(n_sys, n_env)
    idx = np.arange(layout.dim_single, dtype=np.int64)
    return np.diag(np.bitwise_count(idx.astype(np.uint64)).astype(float))
