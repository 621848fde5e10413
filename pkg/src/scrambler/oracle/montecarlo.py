"""Disorder averaging over independent noise realizations.

Each realization owns a private RNG stream spawned deterministically from
(seed, realization index) via SeedSequence, so results are reproducible and
independent of the parallel schedule; aggregation always reduces in
realization order. The SCRAMBLER_THREADS environment variable caps worker
parallelism (0 or unset = auto).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ..errors import ConfigError
from .evolution import OracleConfig, evolve_operator_state, size_distribution_oracle
from .sizeops import build_size_spectrum


def worker_count(n_tasks: int) -> int:
    raw = os.environ.get("SCRAMBLER_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SCRAMBLER_THREADS={raw!r} is not an integer") from exc
    if cap < 0:
        raise ConfigError(f"SCRAMBLER_THREADS must be >= 0, got {cap}")
    if cap == 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


@dataclass(frozen=True)
class RealizationResult:
    times: np.ndarray
    probs: np.ndarray        # (n_times, 2 n_sys + 1)
    mean_size: np.ndarray    # (n_times,)
    unitarity_max_dev: float


@dataclass(frozen=True)
class DisorderAverage:
    """Mean and standard error of P(s, t) and of the mean size."""

    times: np.ndarray
    p_mean: np.ndarray          # (n_times, 2 n_sys + 1)
    p_stderr: np.ndarray
    mean_size: np.ndarray       # (n_times,)
    mean_size_stderr: np.ndarray
    realizations: int
    unitarity_max_dev: float
    per_realization_mean_size: np.ndarray = field(repr=False, default=None)


def run_realization(config: OracleConfig,
                    rng: np.random.Generator) -> RealizationResult:
    """Evolve one noise realization and measure at every snapshot."""
    spectrum = build_size_spectrum(config.n_sys, config.n_env, config.filling)
    evolution = evolve_operator_state(config, rng)
    s_values = np.arange(2 * config.n_sys + 1)
    probs, means = [], []
    for t, state in zip(evolution.times, evolution.states):
        dist = size_distribution_oracle(state, spectrum, t=float(t))
        probs.append(dist.probs)
        means.append(float(s_values @ dist.probs))
    return RealizationResult(times=evolution.times,
                             probs=np.asarray(probs),
                             mean_size=np.asarray(means),
                             unitarity_max_dev=evolution.unitarity_max_dev)


def realization_streams(seed: int, realizations: int) -> list[np.random.Generator]:
    root = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in root.spawn(realizations)]


def aggregate(results: list[RealizationResult]) -> DisorderAverage:
    """Deterministic reduction over realizations, in index order."""
    if len(results) < 2:
        raise ConfigError("disorder averaging needs at least 2 realizations")
    times = results[0].times
    probs = np.stack([r.probs for r in results])          # (R, T, S+1)
    means = np.stack([r.mean_size for r in results])      # (R, T)
    r_count = len(results)
    scale = np.sqrt(r_count)
    return DisorderAverage(
        times=times,
        p_mean=probs.mean(axis=0),
        p_stderr=probs.std(axis=0, ddof=1) / scale,
        mean_size=means.mean(axis=0),
        mean_size_stderr=means.std(axis=0, ddof=1) / scale,
        realizations=r_count,
        unitarity_max_dev=max(r.unitarity_max_dev for r in results),
        per_realization_mean_size=means,
    )


def disorder_average(config: OracleConfig) -> DisorderAverage:
    """Monte Carlo estimate of the disorder-averaged size statistics.

    BLAS pools are pinned to one thread for the duration: the per-step
    matrices are small enough that intra-op threading only adds
    synchronization cost, and parallelism belongs to the realization level.
    """
    if config.realizations < 2:
        raise ConfigError("disorder_average needs realizations >= 2")
    rngs = realization_streams(config.seed, config.realizations)
    workers = worker_count(config.realizations)
    with threadpool_limits(limits=1):
        if workers == 1:
            results = [run_realization(config, rng) for rng in rngs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(
                    lambda rng: run_realization(config, rng), rngs))
    return aggregate(results)


@dataclass(frozen=True)
class ComparisonReport:
    """Per-time z-scores of the oracle against an analytic prediction."""

    times: np.ndarray
    oracle: np.ndarray
    analytic: np.ndarray
    z_scores: np.ndarray
    sup_abs: float
    flagged: bool
    budget: float


def compare_to_meanfield(result: DisorderAverage, analytic_times,
                         analytic_mean_size,
                         budget: float = 0.10) -> ComparisonReport:
    """Compare disorder-averaged mean size against an analytic curve.

    Flags the comparison when any point misses by more than 3 standard
    errors AND by more than the relative systematic budget (default 10%,
    acknowledging finite-size and Trotter bias).
    """
    t_a = np.asarray(analytic_times, dtype=float)
    if t_a.shape != result.times.shape or np.any(np.abs(t_a - result.times) > 1e-12):
        raise ConfigError("oracle and analytic time grids do not match")
    analytic = np.asarray(analytic_mean_size, dtype=float)
    diff = result.mean_size - analytic
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(result.mean_size_stderr > 0.0,
                     diff / result.mean_size_stderr,
                     np.where(diff == 0.0, 0.0, np.inf))
    rel = np.abs(diff) / np.maximum(np.abs(analytic), 1e-300)
    flagged = bool(np.any((np.abs(z) > 3.0) & (rel > budget)))
    return ComparisonReport(times=result.times, oracle=result.mean_size,
                            analytic=analytic, z_scores=z,
                            sup_abs=float(np.abs(diff).max()),
                            flagged=flagged, budget=budget)
