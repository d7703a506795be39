"""First-passage computations: ladder probabilities and downward hitting.

Ladder rung ``s(m)``: starting from m, the chain reaches m+1 before any single
drop exceeds the cap k. Conditioning on the first drop i <= k, the chain sits
at m-i+1 and must climb rungs m-i+1, ..., m again, which gives the forward
recursion

    s(m) = P(Z_m = 0) / (1 - sum_{i=1}^{min(m,k)} P(Z_m = i) prod_{h=1}^{i-1} s(m-h)).

The failure probability ``q(m) = 1 - s(m)`` is carried alongside so that values
of s close to 1 keep full relative precision in ``1 - s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import _kernels as K
from .chain import log_binom_pmf
from .families import ThinningFamily, regularity_sup, rho_limit

DENSE_SOLVE_CAP = 4000
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class LadderProfile:
    family: ThinningFamily
    k: int
    s: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)

    @property
    def l_max(self) -> int:
        return len(self.s)

    def __getitem__(self, m: int) -> float:
        """s(m) for 1 <= m <= l_max."""
        if not 1 <= m <= self.l_max:
            raise IndexError(m)
        return float(self.s[m - 1])

    def failure(self, m: int) -> float:
        return float(self.q[m - 1])

    def rows(self):
        return [(m, float(v)) for m, v in enumerate(self.s, start=1)]


def ladder_profile(family: ThinningFamily, l_max: int, k: int) -> LadderProfile:
    """Exact s(m) = P(S_{m,k}) for m = 1..l_max by the forward recursion."""
    if l_max < 1 or k < 0:
        raise ValueError("need l_max >= 1 and k >= 0")
    ms = np.arange(1, l_max + 1)
    cs = family.c_array(ms)
    s = np.empty(l_max)
    q = np.empty(l_max)
    log_s = np.empty(l_max)
    for idx in range(l_max):
        m = idx + 1
        c = cs[idx]
        top = min(m, k)
        head = np.exp(K.binom_head_logpmf(m, c, top))
        p0 = head[0]
        # D - P(Z=0) = P(Z > top) + sum_i P(Z=i) (1 - prod_{h<i} s(m-h)), all terms >= 0
        excess = K.binom_strict_tail(m, c, top)
        acc = 0.0
        for i in range(1, top + 1):
            if i == 1:
                continue  # the product is empty, so the bracket vanishes
            log_prod = log_s[idx - i + 1:idx].sum()
            acc += head[i] * -math.expm1(log_prod)
        excess += acc
        denom = p0 + excess
        assert denom >= p0 > 0.0, "ladder recursion denominator must dominate P(Z_m = 0)"
        q[idx] = excess / denom
        s[idx] = p0 / denom
        log_s[idx] = math.log(s[idx])
    return LadderProfile(family, k, s, q)


def ladder_linear_solve(family: ThinningFamily, l: int, k: int) -> np.ndarray:
    """Brute-force P(hit l+1 before a drop > k) from every start 1..l.

    Builds the absorbing chain on {1..l} with success at l+1 and a failure
    state for drops above k, and solves (I - Q) h = r densely.
    """
    Q = np.zeros((l, l))
    r = np.zeros(l)
    for x in range(1, l + 1):
        pmf = np.exp(log_binom_pmf(x, family.c(x)))
        for y in range(0, min(x, k) + 1):
            nxt = x - y + 1
            if nxt == l + 1:
                r[x - 1] += pmf[y]
            else:
                Q[x - 1, nxt - 1] += pmf[y]
    return np.linalg.solve(np.eye(l) - Q, r)


@dataclass(frozen=True)
class HkScan:
    k: int
    l: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    regular: bool = True

    @property
    def h_hat(self) -> float:
        return float(self.ratios.max())

    @property
    def argmax_l(self) -> int:
        return int(self.l[int(self.ratios.argmax())])


def hk_scan(family: ThinningFamily, k: int, l_min: int, l_max: int,
            profile: Optional[LadderProfile] = None) -> HkScan:
    """Ratios (1 - s(l)) / (l c(l))**(k+1) over l_min <= l <= l_max."""
    if rho_limit(family) != 0:
        raise ValueError("the ratio scan needs a family with rho = 0")
    if l_min < max(k, 1) or l_max < l_min:
        raise ValueError("need max(k, 1) <= l_min <= l_max")
    regular = regularity_sup(family, max(l_max, 2)).bounded
    if profile is None or profile.k != k or profile.l_max < l_max:
        profile = ladder_profile(family, l_max, k)
    ls = np.arange(l_min, l_max + 1)
    lc = ls * family.c_array(ls)
    ratios = profile.q[ls - 1] / lc ** (k + 1)
    return HkScan(k, ls, ratios, regular)


def no_large_drop_prob(family: ThinningFamily, m_start: int, l_max: int, k: int,
                       profile: Optional[LadderProfile] = None) -> float:
    """prod_{l=m_start}^{l_max} s(l): the climb from m_start never drops by more than k."""
    if m_start < 1 or l_max < m_start:
        raise ValueError("need 1 <= m_start <= l_max")
    if profile is None or profile.k != k or profile.l_max < l_max:
        profile = ladder_profile(family, l_max, k)
    logs = np.log1p(-profile.q[m_start - 1:l_max])
    return math.exp(K.neumaier_sum(logs))


@dataclass(frozen=True)
class FirstPassageSolution:
    family: ThinningFamily
    M: int
    g: np.ndarray = field(repr=False)
    max_residual: float = 0.0

    def __getitem__(self, x: int) -> float:
        """g(x) = P_x(tau_1 < tau_M) for 1 <= x <= M."""
        if not 1 <= x <= self.M:
            raise IndexError(x)
        return float(self.g[x - 1])

    def rows(self):
        return [(x, float(v)) for x, v in enumerate(self.g, start=1)]


def first_passage_down(family: ThinningFamily, M: int, cap: int = DENSE_SOLVE_CAP) -> FirstPassageSolution:
    """P_x(tau_1 < tau_M) for x = 1..M by a dense solve.

    For 1 < x < M, ``g(x) = sum_i P(Z_x = i) g(x - i + 1)`` with g(1) = 1 and
    g(M) = 0. Only one superdiagonal is nonzero (upward moves are +1).
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    if M > cap:
        raise ValueError(f"M={M} exceeds the dense-solve cap {cap}")
    n = M - 2  # unknowns g(2..M-1)
    g = np.zeros(M)
    g[0] = 1.0
    if n == 0:
        return FirstPassageSolution(family, M, g)
    A = np.eye(n)
    b = np.zeros(n)
    for x in range(2, M):
        row = x - 2
        pmf = np.exp(log_binom_pmf(x, family.c(x)))
        # drop y sends x to x - y + 1; columns index states 2..M-1
        nxt = x - np.arange(x + 1) + 1
        b[row] = pmf[x]  # y = x lands on state 1
        inner = (nxt >= 2) & (nxt < M)
        A[row, nxt[inner] - 2] -= pmf[inner]
    sol = scipy.linalg.solve(A, b)
    resid = float(np.max(np.abs(A @ sol - b)))
    if resid > RESIDUAL_TOL:
        raise ArithmeticError(f"first-passage residual {resid:.3e} exceeds {RESIDUAL_TOL}")
    g[1:M - 1] = sol
    return FirstPassageSolution(family, M, g, resid)


def recurrent_lower_bound(x: int, M: float, N: int) -> float:
    """(u_N(x) - u_N(M)) / (u_N(1) - u_N(M)) with u_N(k) = 1/(N + k).

    ``M = math.inf`` gives the limit (N + 1)/(N + x).
    """
    if not 1 <= x <= M or N < 0:
        raise ValueError("need 1 <= x <= M and N >= 0")
    if math.isinf(M):
        return (N + 1.0) / (N + x)
    u = lambda k: 1.0 / (N + k)  # noqa: E731
    return (u(x) - u(M)) / (u(1) - u(M))


def mean_hitting_time_up(family: ThinningFamily, x0: int, target: int) -> float:
    """E_{x0}[tau_target] for target > x0, exact over the states 1..target-1.

    Upward moves are +1, so the chain cannot pass target without visiting it.
    """
    if not 1 <= x0 < target:
        raise ValueError("need 1 <= x0 < target")
    n = target - 1
    Q = np.zeros((n, n))
    for x in range(1, target):
        pmf = np.exp(log_binom_pmf(x, family.c(x)))
        for y in range(x + 1):
            nxt = x - y + 1
            if nxt < target:
                Q[x - 1, nxt - 1] += pmf[y]
    t = np.linalg.solve(np.eye(n) - Q, np.ones(n))
    return float(t[x0 - 1])
