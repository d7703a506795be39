"""Exact distributional numerics for the chain.

Covers the inflated-Poisson law that dominates large-state increments, the two
couplings behind the ballistic law of large numbers, drift and martingale
identities, and binomial tail bounds with the factor
``f(l) = exp(l c(l)) (1 - c(l))**(-l)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels as K
from .chain import increment_law, log_binom_pmf
from .families import ThinningFamily, rho_limit

PMF_SUM_TOL = 1e-12
MEAN_TOL = 1e-10
IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    """Outcome of checking ``lhs <= rhs``."""

    lhs: float
    rhs: float
    context: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return bool(self.lhs <= self.rhs)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def row(self) -> dict:
        out = dict(self.context)
        out.update(lhs=repr(float(self.lhs)), rhs=repr(float(self.rhs)),
                   margin=repr(float(self.margin)), holds=str(self.holds).lower())
        return out


def write_bound_reports(fh, reports: Sequence[BoundReport]) -> None:
    """CSV with the context columns first, then ``lhs,rhs,margin,holds``."""
    keys: list = []
    for r in reports:
        for k in r.context:
            if k not in keys:
                keys.append(k)
    w = csv.DictWriter(fh, fieldnames=keys + ["lhs", "rhs", "margin", "holds"],
                       lineterminator="\n", restval="")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())


# -- dominating law -----------------------------------------------------------


@dataclass(frozen=True)
class DominatingLaw:
    """Poisson(rho_bar) inflated by (1 + epsilon) off zero, with the deficit at 0."""

    rho_bar: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.rho_bar < 1.0:
            raise ValueError("rho_bar must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if (1.0 + self.epsilon) * self.rho_bar >= 1.0:
            raise ValueError("need (1 + epsilon) * rho_bar < 1")

    def pmf(self, k: int) -> float:
        return mu_pmf(self, k)

    def log_pmf_positive(self, k) -> np.ndarray:
        """log mu(k) for k >= 1 (array friendly)."""
        k = np.asarray(k, dtype=np.float64)
        return math.log1p(self.epsilon) + k * math.log(self.rho_bar) - self.rho_bar - gammaln(k + 1)

    def mean(self) -> float:
        return (1.0 + self.epsilon) * self.rho_bar


def mu_pmf(law: DominatingLaw, k: int) -> float:
    if k < 0:
        return 0.0
    if k == 0:
        return (1.0 + law.epsilon) * math.exp(-law.rho_bar) - law.epsilon
    return math.exp(float(law.log_pmf_positive(k)))


@dataclass(frozen=True)
class DominationScan:
    """Per-j results of the domination search over ``1 <= j <= j_max``."""

    J: Optional[int]
    law: DominatingLaw
    k_max: int
    j_max: int
    ok: np.ndarray = field(repr=False)
    margin_zero: np.ndarray = field(repr=False)
    max_ratio: np.ndarray = field(repr=False)
    remainder_ratio: np.ndarray = field(repr=False)

    def reports(self, js: Iterable[int]) -> list:
        """Reports at the sampled j: P(Z_j=0) >= mu(0); max_k P(Z_j=k)/mu(k) <= 1 for
        k <= k_max; and the tail-bound ratio covering k > k_max."""
        out = []
        mu0 = mu_pmf(self.law, 0)
        for j in js:
            i = j - 1
            ctx = {"j": j, "rho_bar": self.law.rho_bar, "epsilon": self.law.epsilon}
            out.append(BoundReport(mu0, mu0 + self.margin_zero[i], dict(ctx, check="zero_mass")))
            out.append(BoundReport(self.max_ratio[i], 1.0,
                                   dict(ctx, check=f"k=1..{min(j, self.k_max)}")))
            out.append(BoundReport(self.remainder_ratio[i], 1.0,
                                   dict(ctx, check=f"k>{self.k_max}")))
        return out


def _domination_arrays(family: ThinningFamily, law: DominatingLaw, k_max: int, j_max: int):
    js = np.arange(1, j_max + 1)
    c = family.c_array(js)
    jf = js.astype(np.float64)
    logit = np.log(c) - np.log1p(-c)
    lp = jf * np.log1p(-c)
    p0 = np.exp(lp)
    mu0 = mu_pmf(law, 0)
    margin_zero = p0 - mu0
    # worst log-ratio log P(Z_j=k) - log mu(k) over 1 <= k <= min(j, k_max)
    worst = np.full(j_max, -np.inf)
    for k in range(1, k_max + 1):
        lp = lp + np.log(np.maximum(jf - (k - 1), 1.0)) - math.log(k) + logit
        valid = js >= k
        diff = lp - float(law.log_pmf_positive(k))
        worst = np.where(valid, np.maximum(worst, diff), worst)
    max_ratio = np.exp(worst)
    # k > k_max: P(Z_j = k) <= P(Z_j >= k) <= (jc)^k/k! (1 + jc f(j)); when
    # jc <= rho_bar the ratio to mu(k) decreases in k, so k = k_max + 1 decides.
    jc = jf * c
    log_f = jc - jf * np.log1p(-c)
    kk = k_max + 1
    with np.errstate(divide="ignore", over="ignore"):
        log_bound = (kk * np.log(jc) - gammaln(kk + 1) + np.log1p(jc * np.exp(log_f)))
        remainder_ratio = np.where(jc <= law.rho_bar,
                                   np.exp(log_bound - float(law.log_pmf_positive(kk))), np.inf)
    remainder_ratio[js <= k_max] = 0.0
    ok = (margin_zero >= 0) & (max_ratio <= 1.0) & (remainder_ratio <= 1.0)
    return ok, margin_zero, max_ratio, remainder_ratio


def domination_scan(family: ThinningFamily, rho_bar: float, epsilon: Optional[float] = None,
                    k_max: int = 50, j_max: int = 10**5) -> DominationScan:
    """Find the smallest J such that Bin(j, c(j)) is dominated by mu for J <= j <= j_max.

    Both inequalities ``P(Z_j=0) >= mu(0)`` and ``P(Z_j=k) <= mu(k)`` are
    checked exactly for ``k <= k_max``; for larger k the binomial tail bound
    and the exact mu(k) settle the comparison. ``epsilon`` defaults to half of
    the admissible range ``(0, 1/rho_bar - 1)``.
    """
    rho = rho_limit(family)
    if rho is None or not rho < rho_bar < 1.0:
        raise ValueError("need rho_limit(family) < rho_bar < 1")
    if epsilon is None:
        epsilon = 0.5 * (1.0 / rho_bar - 1.0)
    law = DominatingLaw(rho_bar, epsilon)
    if family.max_k is not None:
        j_max = min(j_max, family.max_k)
    ok, mz, mr, rem = _domination_arrays(family, law, k_max, j_max)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        J: Optional[int] = 1
    elif bad[-1] == j_max - 1:
        J = None
    else:
        J = int(bad[-1]) + 2
    return DominationScan(J, law, k_max, j_max, ok, mz, mr, rem)


def domination_threshold(family: ThinningFamily, rho_bar: float, epsilon: Optional[float] = None,
                         k_max: int = 50, j_max: int = 10**5) -> Optional[int]:
    """Smallest J <= j_max beyond which the domination holds, or None if not found."""
    return domination_scan(family, rho_bar, epsilon, k_max, j_max).J


# -- couplings ----------------------------------------------------------------


class LeCamDraw(NamedTuple):
    z: int
    l: int
    uniforms: Optional[np.ndarray] = None


def lecam_couple(n: int, p: float, rng: np.random.Generator, return_uniforms: bool = False) -> LeCamDraw:
    """Couple Z ~ Bin(n, p) with L ~ Pois(np) so that E|Z - L| <= n p**2.

    Each trial shares one uniform U between the Bernoulli(p) quantile
    ``1{U >= 1-p}`` and the Pois(p) quantile; Z and L are the trial sums.
    """
    if n < 0 or not 0.0 <= p < 1.0:
        raise ValueError("need n >= 0 and 0 <= p < 1")
    u = rng.random(n)
    z, l = _lecam_from_uniforms(u, p)
    return LeCamDraw(z, l, u if return_uniforms else None)


def _lecam_from_uniforms(u: np.ndarray, p: float) -> tuple:
    if p == 0.0:
        return 0, 0
    z = int(np.count_nonzero(u >= 1.0 - p))
    l = int(sum(K.poisson_from_uniform(x, p) for x in u[u >= math.exp(-p)]))
    return z, l


def lecam_couple_many(n: int, p: float, size: int, rng: np.random.Generator,
                      chunk: int = 20000) -> tuple:
    """``size`` independent coupled pairs, vectorised; returns arrays (z, l)."""
    if n < 0 or not 0.0 <= p < 1.0:
        raise ValueError("need n >= 0 and 0 <= p < 1")
    zs = np.zeros(size, dtype=np.int64)
    ls = np.zeros(size, dtype=np.int64)
    if p == 0.0 or n == 0:
        return zs, ls
    # Pois(p) quantile table: smallest k with U < F(k)
    cdf = []
    acc, term, k = 0.0, math.exp(-p), 0
    while True:
        acc_new = acc + term
        if acc_new == acc and k > 0:
            break
        acc = acc_new
        cdf.append(acc)
        k += 1
        term *= p / k
    cdf = np.asarray(cdf)
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        u = rng.random((m, n))
        zs[start:start + m] = np.count_nonzero(u >= 1.0 - p, axis=1)
        q = np.searchsorted(cdf, u, side="right")
        ls[start:start + m] = np.minimum(q, len(cdf) - 1).sum(axis=1)
    return zs, ls


def poisson_sample(lam: float, rng: np.random.Generator) -> int:
    """Pois(lam) deviate: inversion for lam <= 30, numpy's method above."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    return int(K.sample_poisson(rng, float(lam)))


def poisson_split(lam: float, lam_prime: float, rng: np.random.Generator) -> tuple:
    """Coupled (L, L') with L' ~ Pois(lam'), L - L' ~ Pois(lam - lam') independent of L'."""
    if not 0.0 <= lam_prime <= lam:
        raise ValueError("need 0 <= lam_prime <= lam")
    lp = poisson_sample(lam_prime, rng)
    rest = poisson_sample(lam - lam_prime, rng)
    return lp + rest, lp


# -- drift and martingale identities -----------------------------------------


def drift_gap(family: ThinningFamily, i: int) -> float:
    """E_i[X_1] - i = 1 - i c(i), cross-checked against the exact increment law."""
    law = increment_law(family, i)
    closed = 1.0 - i * law.c
    summed = 1.0 - law.mean()
    tol = IDENTITY_TOL * max(1.0, i * law.c)
    if abs(closed - summed) > tol:
        raise ArithmeticError(f"drift identity mismatch at i={i}: {closed} vs {summed}")
    return closed


def submartingale_gap(family: ThinningFamily, x: int, N: int) -> float:
    """E_x[1/(N + X_1)] - 1/(N + x), by exact summation over the drop law."""
    if x < 1 or N < 0:
        raise ValueError("need x >= 1 and N >= 0")
    law = increment_law(family, x)
    e = law.expect(lambda y: 1.0 / (N + x - y + 1.0))
    return e - 1.0 / (N + x)


class SupermartingaleCheck(NamedTuple):
    closed_form: float
    direct_sum: float
    condition: bool
    condition_margin: float


def supermartingale_expectation(x: int, c: float) -> SupermartingaleCheck:
    """E[1/(1 + Bin(x, 1-c))] two ways, plus the test (x+1)c <= 1 + c**(x+1).

    The closed form ``(1 - c**(x+1)) / ((x+1)(1-c))`` integrates the generating
    function of the survivors over [0, 1].
    """
    if x < 1 or not 0.0 < c < 1.0:
        raise ValueError("need x >= 1 and 0 < c < 1")
    closed = -math.expm1((x + 1) * math.log(c)) / ((x + 1) * (1.0 - c))
    logp = log_binom_pmf(x, 1.0 - c)
    direct = float(K.neumaier_sum(np.exp(logp) / np.arange(1.0, x + 2.0)))
    margin = 1.0 + c ** (x + 1) - (x + 1) * c
    return SupermartingaleCheck(closed, direct, margin >= 0, margin)


# -- tail bounds --------------------------------------------------------------


def log_tail_factor(family: ThinningFamily, l: int) -> float:
    c = family.c(l)
    return l * c - l * math.log1p(-c)


def tail_factor(family: ThinningFamily, l: int) -> float:
    """f(l) = exp(l c(l)) (1 - c(l))**(-l); +inf if it overflows."""
    lf = log_tail_factor(family, l)
    return math.exp(lf) if lf < 709.0 else math.inf


def _tail_ge(l: int, c: float, k: int) -> float:
    return 1.0 if k <= 0 else float(K.binom_strict_tail(l, c, k - 1))


def lemma_tail_check(family: ThinningFamily, l: int, k: int) -> BoundReport:
    """P(Z_l >= k) - P(Z_l = k) <= l c(l) f(l) P(Z_l = k) with Z_l ~ Bin(l, c(l))."""
    if not 0 <= k <= l:
        raise ValueError("need 0 <= k <= l")
    c = family.c(l)
    lhs = float(K.binom_strict_tail(l, c, k))
    log_pk = float(K.binom_head_logpmf(l, c, k)[k])
    log_rhs = math.log(l * c) + log_tail_factor(family, l) + log_pk
    rhs = math.exp(log_rhs) if log_rhs < 709.0 else math.inf
    return BoundReport(lhs, rhs, {"family": family.kind, "param": _param(family), "l": l, "k": k,
                                  "bound": "lemma"})


def corollary_tail_check(family: ThinningFamily, l: int, k: int) -> BoundReport:
    """P(Z_l >= k) <= (l c(l))**k / k! * (1 + l c(l) f(l))."""
    if not 0 <= k <= l:
        raise ValueError("need 0 <= k <= l")
    c = family.c(l)
    lhs = _tail_ge(l, c, k)
    lc = l * c
    lf = log_tail_factor(family, l)
    log_second = np.logaddexp(0.0, math.log(lc) + lf)
    log_rhs = k * math.log(lc) - math.lgamma(k + 1) + log_second
    rhs = math.exp(log_rhs) if log_rhs < 709.0 else math.inf
    return BoundReport(lhs, rhs, {"family": family.kind, "param": _param(family), "l": l, "k": k,
                                  "bound": "corollary"})


def tail_grid(family: ThinningFamily, l_values: Iterable[int], k_cap: int) -> list:
    """Lemma and corollary reports for every l in ``l_values`` and k <= min(l, k_cap)."""
    if family.declared_rho is None or math.isinf(family.declared_rho):
        raise ValueError("tail batteries need a family with finite declared rho (f must stay bounded)")
    out = []
    for l in l_values:
        for k in range(0, min(l, k_cap) + 1):
            out.append(lemma_tail_check(family, l, k))
            out.append(corollary_tail_check(family, l, k))
    return out


def _param(family: ThinningFamily):
    return family.params[0] if family.params else ""
