"""One-step law and seeded simulation of X_{n+1} = X_n - Y_{n+1} + 1.

Given X_n = k, the drop Y_{n+1} is Bin(k, c(k)).

Random streams
--------------
Every trajectory draws from its own substream, obtained by :func:`stream` from
``(master_seed, index)`` through ``numpy.random.SeedSequence(master_seed,
spawn_key=(index,))`` feeding a PCG64 generator. A single trajectory built by
:func:`simulate` uses index 0, so it coincides with replication 0 of any
ensemble run with the same master seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import _kernels as K
from .families import ThinningFamily

PMF_SUM_TOL = 1e-12


def stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for trajectory ``index`` under ``master_seed``."""
    if master_seed < 0 or index < 0:
        raise ValueError("seeds and stream indices must be nonnegative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def log_binom_pmf(n: int, c: float) -> np.ndarray:
    """log P(Bin(n, c) = i) for i = 0..n.

    Uses scipy's pmf (Boost's incomplete-beta derivative), which keeps the
    mass normalised to ~1e-14 even for n in the thousands. Entries where the
    pmf underflows fall back to ``logpmf``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = np.arange(n + 1)
    pmf = stats.binom.pmf(k, n, c)
    with np.errstate(divide="ignore"):
        out = np.log(pmf)
    tiny = pmf == 0.0
    if tiny.any():
        out[tiny] = stats.binom.logpmf(k[tiny], n, c)
    return out


@dataclass(frozen=True)
class IncrementLaw:
    """Exact law of the drop Y given X = k."""

    k: int
    c: float
    log_pmf: np.ndarray = field(repr=False)

    @property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.k + 1)

    def mean(self) -> float:
        return float(K.neumaier_sum(self.support * self.pmf))

    def expect(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        """E[func(Y)] by compensated summation over the support."""
        return float(K.neumaier_sum(np.asarray(func(self.support), dtype=float) * self.pmf))


def increment_law(family: ThinningFamily, k: int) -> IncrementLaw:
    if k < 1:
        raise ValueError("state must be at least 1")
    c = family.c(k)
    return IncrementLaw(k, c, log_binom_pmf(k, c))


@dataclass(frozen=True)
class ChainConfig:
    family: ThinningFamily
    x0: int
    steps: int
    master_seed: int = 0

    def __post_init__(self):
        if int(self.x0) < 1:
            raise ValueError("x0 must be at least 1")
        if int(self.steps) < 0:
            raise ValueError("steps must be nonnegative")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"family": self.family.to_record(), "x0": int(self.x0),
                "steps": int(self.steps), "master_seed": int(self.master_seed)}


@dataclass
class Trajectory:
    """Realised path: ``states`` holds X_0..X_n and ``drops`` Y_1..Y_n."""

    states: np.ndarray
    drops: np.ndarray
    config: Optional[ChainConfig] = None
    seed: Optional[int] = None
    stream_index: int = 0

    def __len__(self):
        return len(self.drops)

    def check(self) -> None:
        """Assert the path identities; raises AssertionError on violation."""
        s, y = self.states, self.drops
        assert len(s) == len(y) + 1
        assert np.all(s >= 1), "state dropped below 1"
        assert np.all(y >= 0) and np.all(y <= s[:-1]), "drop outside 0..X_n"
        assert np.array_equal(np.diff(s), 1 - y), "path violates X_{n+1} = X_n - Y_{n+1} + 1"

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``step,x,y`` rows; returns the text when no handle is given."""
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "x", "y"])
        w.writerow([0, int(self.states[0]), ""])
        for n in range(1, len(self.states)):
            w.writerow([n, int(self.states[n]), int(self.drops[n - 1])])
        return fh.getvalue() if own else None


def step(family: ThinningFamily, x: int, rng: np.random.Generator) -> tuple[int, int]:
    """One transition from state ``x``; returns ``(x_next, y)``."""
    if x < 1:
        raise ValueError("state must be at least 1")
    family.c(x)  # domain check for tabulated families
    x_next, y = K.step(*family.encoded, x, rng)
    return int(x_next), int(y)


def sample_drops(family: ThinningFamily, x: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent draws of Y given X = x, from the simulation sampler."""
    family.c(x)
    return K.sample_drops(*family.encoded, x, size, rng)


def _check_range(family: ThinningFamily, x0: int, steps: int) -> None:
    if family.max_k is not None and x0 + steps > family.max_k:
        raise ValueError(
            f"tabulated family covers k <= {family.max_k}; a {steps}-step run from {x0} may leave it")


def simulate(config: ChainConfig) -> Trajectory:
    family = config.family
    _check_range(family, config.x0, config.steps)
    rng = stream(config.master_seed, 0)
    states, drops = K.trajectory(*family.encoded, int(config.x0), int(config.steps), rng)
    return Trajectory(states, drops, config, config.master_seed, 0)


StopPredicate = Callable[[int, int, int], bool]


def simulate_until(family: ThinningFamily, x0: int, seed: int, stop: StopPredicate,
                   max_steps: int, stream_index: int = 0,
                   rng: Optional[np.random.Generator] = None) -> tuple[Trajectory, bool]:
    """Run until ``stop(step, state, drop)`` holds or ``max_steps`` elapse.

    The predicate sees only times t >= 1, so a target equal to ``x0`` counts a
    return, not the starting position. Pass ``rng`` to continue an existing
    stream instead of opening ``stream(seed, stream_index)``.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    if rng is None:
        rng = stream(seed, stream_index)
    enc = family.encoded
    states = [int(x0)]
    drops = []
    x = int(x0)
    hit = False
    for t in range(1, max_steps + 1):
        x, y = K.step(*enc, x, rng)
        states.append(x)
        drops.append(y)
        if stop(t, x, y):
            hit = True
            break
    traj = Trajectory(np.asarray(states, dtype=np.int64), np.asarray(drops, dtype=np.int64),
                      None, seed, stream_index)
    return traj, hit
