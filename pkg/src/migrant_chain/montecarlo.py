"""Ensemble experiments at finite horizon.

Replication ``r`` always draws from ``stream(master_seed, r)``, and results are
gathered by replication index, so every statistic here is a function of the
ensemble spec and seed alone: the worker count only changes wall time.

Almost-sure statements are checked in finite-window form; the summaries label
them as such.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .chain import ChainConfig, stream
from .families import ThinningFamily

THREADS_ENV = "MIGRANT_CHAIN_THREADS"


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    if threads < 1:
        raise ValueError("thread count must be at least 1")
    return threads


def map_replications(func: Callable[[int], object], replications: int,
                     threads: Optional[int] = None) -> list:
    """``[func(0), ..., func(replications - 1)]`` computed on up to ``threads`` workers."""
    threads = resolve_threads(threads)
    if threads == 1 or replications <= 1:
        return [func(r) for r in range(replications)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, range(replications)))


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


@dataclass(frozen=True)
class EnsembleSpec:
    config: ChainConfig
    replications: int
    burn_in: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if not 0 <= self.burn_in < max(self.config.steps, 1):
            raise ValueError("need 0 <= burn_in < steps")

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "replications": self.replications,
                "burn_in": self.burn_in}


@dataclass(frozen=True)
class SpeedEstimate:
    horizon: int
    mean: float
    stderr: float
    values: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "mean": self.mean, "stderr": self.stderr,
                "replications": int(len(self.values))}


def ensemble_speed(spec: EnsembleSpec, threads: Optional[int] = None) -> SpeedEstimate:
    """Mean and standard error of X_n / n over the replications."""
    cfg = spec.config
    n = cfg.steps
    if n < 1:
        raise ValueError("speed needs at least one step")
    enc = cfg.family.encoded

    def one(r):
        return K.final_state(*enc, cfg.x0, n, stream(cfg.master_seed, r))

    finals = np.asarray(map_replications(one, spec.replications, threads), dtype=np.int64)
    if np.any(finals > cfg.x0 + n):
        raise AssertionError("X_n exceeded x0 + n although upward moves are +1")
    values = finals / n
    mean, se = mean_stderr(values)
    return SpeedEstimate(n, mean, se, values)


@dataclass(frozen=True)
class DropCensus:
    """Drop sizes Y_n for ``window[0] < n <= window[1]``, per replication.

    Zero drops are counted too. This is a finite-window stand-in for
    "eventually" statements.
    """

    window: tuple
    counts: dict
    per_replication: list = field(repr=False)
    max_state: list = field(repr=False)

    @property
    def replications(self) -> int:
        return len(self.per_replication)

    @property
    def max_drop(self) -> int:
        return max(self.counts, default=0)

    def max_drops(self) -> np.ndarray:
        return np.asarray([max(c, default=0) for c in self.per_replication])

    def fraction_max_at_most(self, g: int) -> float:
        return float(np.mean(self.max_drops() <= g)) if self.per_replication else math.nan

    def fraction_containing(self, *sizes: int) -> float:
        """Share of replications in which every listed drop size occurs."""
        if not self.per_replication:
            return math.nan
        return float(np.mean([all(c.get(s, 0) > 0 for s in sizes) for c in self.per_replication]))

    def fraction_zero_drops(self) -> float:
        """Share of replications with no positive drop inside the window."""
        return self.fraction_max_at_most(0)

    def to_dict(self, gamma0: Optional[int] = None) -> dict:
        out = {
            "window": list(self.window),
            "finite_window_proxy": True,
            "replications": self.replications,
            "max_drop": self.max_drop,
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
        }
        if gamma0 is not None:
            out["gamma0"] = gamma0
            out["fraction_max_le_gamma0"] = self.fraction_max_at_most(gamma0)
            out["fraction_containing_all_sizes_1_to_gamma0"] = (
                self.fraction_containing(*range(1, gamma0 + 1)) if gamma0 > 0 else 1.0)
        return out


def drop_census(spec: EnsembleSpec, window: Sequence[int], threads: Optional[int] = None) -> DropCensus:
    """Count drop sizes in the step window ``(start, end]`` of each replication."""
    start, end = int(window[0]), int(window[1])
    if not 0 <= start <= end:
        raise ValueError("window must satisfy 0 <= start <= end")
    cfg = spec.config
    enc = cfg.family.encoded
    if end == start:
        return DropCensus((start, end), {}, [Counter() for _ in range(spec.replications)],
                          [0] * spec.replications)

    def one(r):
        rows, max_state = K.window_drops(*enc, cfg.x0, end, start, stream(cfg.master_seed, r))
        counts = Counter(rows[:, 1].tolist())
        assert np.all(rows[:, 1] <= max_state), "drop exceeded the preceding state"
        nonzero = sum(counts.values())
        if end - start - nonzero:
            counts[0] = end - start - nonzero
        return counts, int(max_state)

    results = map_replications(one, spec.replications, threads)
    total: Counter = Counter()
    for counts, _ in results:
        total.update(counts)
    return DropCensus((start, end), dict(total), [c for c, _ in results], [m for _, m in results])


@dataclass(frozen=True)
class HittingEstimate:
    p_hat: float
    stderr: float
    replications: int
    undecided: int = 0

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat, "stderr": self.stderr, "replications": self.replications,
                "undecided": self.undecided}


def hitting_estimate(family: ThinningFamily, x0: int, target: int, M_cap: int,
                     replications: int, seed: int = 0, max_steps: int = 10**9,
                     threads: Optional[int] = None) -> HittingEstimate:
    """Monte Carlo P_{x0}(tau_target < tau_{M_cap}).

    Runs that decide neither way within ``max_steps`` count as misses and are
    reported as ``undecided``.
    """
    if not target < x0 < M_cap:
        raise ValueError("need target < x0 < M_cap")
    enc = family.encoded

    def one(r):
        return K.hit_before(*enc, x0, target, M_cap, max_steps, stream(seed, r))[0]

    outcomes = np.asarray(map_replications(one, replications, threads))
    hits = outcomes == 1
    p = float(hits.mean())
    se = math.sqrt(p * (1.0 - p) / replications)
    return HittingEstimate(p, se, replications, int(np.sum(outcomes == -1)))


@dataclass(frozen=True)
class ReturnTimeSummary:
    base_state: int
    x0: int
    max_steps: int
    times: np.ndarray = field(repr=False)

    @property
    def returned(self) -> np.ndarray:
        return self.times[self.times > 0]

    @property
    def fraction_not_returned(self) -> float:
        return float(np.mean(self.times < 0)) if self.times.size else math.nan

    @property
    def mean(self) -> float:
        return float(self.returned.mean()) if self.returned.size else math.nan

    def stderr(self) -> float:
        return mean_stderr(self.returned)[1]

    def histogram(self) -> dict:
        vals, counts = np.unique(self.returned, return_counts=True)
        return dict(zip(vals.tolist(), counts.tolist()))

    def to_dict(self) -> dict:
        return {"base_state": self.base_state, "x0": self.x0, "max_steps": self.max_steps,
                "replications": int(self.times.size), "mean_return_time": self.mean,
                "stderr": self.stderr(), "fraction_not_returned": self.fraction_not_returned}


def return_time_stats(family: ThinningFamily, base_state: int, replications: int,
                      max_steps: int, x0: Optional[int] = None, seed: int = 0,
                      threads: Optional[int] = None) -> ReturnTimeSummary:
    """First time t >= 1 with X_t = base_state, started from x0 (default: base_state).

    Runs that do not return within ``max_steps`` are recorded as -1.
    """
    x0 = base_state if x0 is None else x0
    enc = family.encoded
    if max_steps <= 0:
        return ReturnTimeSummary(base_state, x0, max_steps, np.full(replications, -1, dtype=np.int64))

    def one(r):
        return K.first_visit(*enc, x0, base_state, max_steps, stream(seed, r))

    times = np.asarray(map_replications(one, replications, threads), dtype=np.int64)
    return ReturnTimeSummary(base_state, x0, max_steps, times)


def occupation_histogram(family: ThinningFamily, x0: int, steps: int, burn_in: int,
                         seed: int = 0, stream_index: int = 0) -> np.ndarray:
    """Fraction of times burn_in < t <= steps spent in each state (index = state)."""
    if not 0 <= burn_in < steps:
        raise ValueError("need 0 <= burn_in < steps")
    states, _ = K.trajectory(*family.encoded, x0, steps, stream(seed, stream_index))
    counts = np.bincount(states[burn_in + 1:])
    return counts / counts.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    n = max(len(p), len(q))
    a = np.zeros(n)
    b = np.zeros(n)
    a[:len(p)] = p
    b[:len(q)] = q
    return 0.5 * float(np.abs(a - b).sum())


def tail_window_means(family: ThinningFamily, x0: int, steps: int, replications: int,
                      seed: int = 0, fraction: float = 0.2,
                      threads: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-replication mean over the last ``fraction`` of the run, and final states."""
    enc = family.encoded
    tail = max(1, int(round(fraction * steps)))

    def one(r):
        states, _ = K.trajectory(*enc, x0, steps, stream(seed, r))
        return float(states[-tail:].mean()), int(states[-1])

    res = map_replications(one, replications, threads)
    return np.asarray([m for m, _ in res]), np.asarray([f for _, f in res], dtype=np.int64)
