"""Compiled inner loops shared by the simulation and exact modules.

Families are passed to the kernels in a flat encoding ``(kind, params, table)``
so that a single compiled evaluator of c(k) serves both the Python API and
the trajectory loops.
"""

import math

import numpy as np
from numba import njit

POWER_LAW = 0
CONSTANT = 1
RESCALED = 2
CRITICAL = 3
TABULATED = 4

ETA_RECIPROCAL_PLUS = 0
ETA_RECIPROCAL_MINUS = 1
ETA_ZERO = 2
ETA_TABULATED = 3

BERNOULLI_MAX_N = 64
INVERSION_MAX_MEAN = 30.0
POISSON_INVERSION_MAX = 30.0
STATE_CAP = 2**62


@njit(cache=True, nogil=True)
def c_value(kind, params, table, k):
    if k < 1:
        raise ValueError("c(k) is defined for k >= 1")
    if kind == POWER_LAW:
        return 1.0 / (float(k) ** params[0] + 1.0)
    if kind == CONSTANT:
        return params[0]
    if kind == RESCALED:
        return min(params[1], params[0] / k)
    if kind == CRITICAL:
        form = int(params[0])
        if form == ETA_RECIPROCAL_PLUS:
            eta = 1.0 / (1.0 + k)
        elif form == ETA_RECIPROCAL_MINUS:
            eta = -1.0 / (1.0 + k)
        elif form == ETA_ZERO:
            eta = 0.0
        else:
            if k > table.shape[0]:
                raise IndexError("k beyond the tabulated eta range")
            eta = table[k - 1]
        return min(params[1], (1.0 + eta) / k)
    if k > table.shape[0]:
        raise IndexError("k beyond the tabulated range")
    return table[k - 1]


@njit(cache=True, nogil=True)
def c_array(kind, params, table, ks):
    out = np.empty(ks.shape[0])
    for i in range(ks.shape[0]):
        out[i] = c_value(kind, params, table, ks[i])
    return out


# -- binomial / Poisson samplers ---------------------------------------------


@njit(cache=True, nogil=True)
def _binomial_from_mode(rng, n, p):
    # Inversion with the search ordered outward from the mode; O(sd) steps.
    q = 1.0 - p
    mode = int((n + 1) * p)
    if mode > n:
        mode = n
    logp = (math.lgamma(n + 1.0) - math.lgamma(mode + 1.0)
            - math.lgamma(n - mode + 1.0)
            + mode * math.log(p) + (n - mode) * math.log1p(-p))
    pm = math.exp(logp)
    u = rng.random() - pm
    if u <= 0.0:
        return mode
    odds = p / q
    up = mode
    down = mode
    p_up = pm
    p_down = pm
    while True:
        moved = False
        if up < n:
            p_up *= (n - up) / (up + 1.0) * odds
            up += 1
            u -= p_up
            moved = True
            if u <= 0.0:
                return up
        if down > 0:
            p_down *= down / (n - down + 1.0) / odds
            down -= 1
            u -= p_down
            moved = True
            if u <= 0.0:
                return down
        if not moved:
            # rounding leftover after exhausting the support
            return mode


@njit(cache=True, nogil=True)
def sample_binomial(rng, n, p):
    """Bin(n, p) deviate; Bernoulli sum, mode inversion, or numpy's BTPE."""
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    if n <= BERNOULLI_MAX_N:
        s = 0
        for _ in range(n):
            if rng.random() < p:
                s += 1
        return s
    if n * p <= INVERSION_MAX_MEAN:
        return _binomial_from_mode(rng, n, p)
    return rng.binomial(n, p)


@njit(cache=True, nogil=True)
def poisson_from_uniform(u, lam):
    k = 0
    pk = math.exp(-lam)
    cdf = pk
    while u >= cdf:
        k += 1
        pk *= lam / k
        new = cdf + pk
        if new == cdf:
            break
        cdf = new
    return k


@njit(cache=True, nogil=True)
def sample_poisson(rng, lam):
    if lam <= 0.0:
        return 0
    if lam <= POISSON_INVERSION_MAX:
        return poisson_from_uniform(rng.random(), lam)
    return rng.poisson(lam)


# -- trajectory loops ---------------------------------------------------------


@njit(cache=True, nogil=True)
def step(kind, params, table, x, rng):
    y = sample_binomial(rng, x, c_value(kind, params, table, x))
    x_next = x - y + 1
    if x_next >= STATE_CAP:
        raise OverflowError("population exceeded the 2**62 state cap")
    return x_next, y


@njit(cache=True, nogil=True)
def sample_drops(kind, params, table, x, size, rng):
    c = c_value(kind, params, table, x)
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        out[i] = sample_binomial(rng, x, c)
    return out


@njit(cache=True, nogil=True)
def trajectory(kind, params, table, x0, steps, rng):
    states = np.empty(steps + 1, dtype=np.int64)
    drops = np.empty(steps, dtype=np.int64)
    states[0] = x0
    x = x0
    for n in range(steps):
        x, y = step(kind, params, table, x, rng)
        drops[n] = y
        states[n + 1] = x
    return states, drops


@njit(cache=True, nogil=True)
def final_state(kind, params, table, x0, steps, rng):
    x = x0
    for _ in range(steps):
        x, _y = step(kind, params, table, x, rng)
    return x


@njit(cache=True, nogil=True)
def window_drops(kind, params, table, x0, steps, start, rng):
    """Nonzero drops Y_n with start < n <= steps, as (n, y) rows."""
    width = max(steps - start, 0)
    rows = np.empty((width, 2), dtype=np.int64)
    count = 0
    max_state = 0
    x = x0
    for n in range(1, steps + 1):
        prev = x
        x, y = step(kind, params, table, x, rng)
        if n > start:
            if prev > max_state:
                max_state = prev
            if y > 0:
                rows[count, 0] = n
                rows[count, 1] = y
                count += 1
    return rows[:count].copy(), max_state


@njit(cache=True, nogil=True)
def hit_before(kind, params, table, x0, target, cap, max_steps, rng):
    """Returns (+1 target first, 0 cap first, -1 neither), steps used."""
    x = x0
    for n in range(1, max_steps + 1):
        x, _y = step(kind, params, table, x, rng)
        if x == target:
            return 1, n
        if x >= cap:
            return 0, n
    return -1, max_steps


@njit(cache=True, nogil=True)
def first_visit(kind, params, table, x0, base, max_steps, rng):
    x = x0
    for n in range(1, max_steps + 1):
        x, _y = step(kind, params, table, x, rng)
        if x == base:
            return n
    return -1


# -- exact binomial helpers ---------------------------------------------------


@njit(cache=True, nogil=True)
def binom_head_logpmf(n, c, kmax):
    """log P(Bin(n,c)=i) for i = 0..min(n,kmax), by the ratio recursion."""
    m = min(n, kmax)
    out = np.empty(m + 1)
    out[0] = n * math.log1p(-c)
    logit = math.log(c) - math.log1p(-c)
    for i in range(m):
        out[i + 1] = out[i] + math.log(n - i) - math.log(i + 1.0) + logit
    return out


@njit(cache=True, nogil=True)
def binom_strict_tail(n, c, k):
    """P(Bin(n,c) > k) by compensated summation of the upper terms."""
    if k >= n:
        return 0.0
    if k < 0:
        return 1.0
    logit = math.log(c) - math.log1p(-c)
    logp = n * math.log1p(-c)
    for i in range(k + 1):
        logp += math.log(n - i) - math.log(i + 1.0) + logit
    # logp is now log P(Z = k+1)
    total = 0.0
    comp = 0.0
    j = k + 1
    while True:
        term = math.exp(logp)
        t = total + term
        if abs(total) >= term:
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        if j >= n:
            break
        ratio = (n - j) / (j + 1.0) * math.exp(logit)
        if ratio < 1.0 and total > 0.0:
            bound = term * ratio / (1.0 - ratio)
            if bound < 1e-18 * total:
                break
        logp += math.log(n - j) - math.log(j + 1.0) + logit
        j += 1
    return total + comp


@njit(cache=True, nogil=True)
def neumaier_sum(values):
    total = 0.0
    comp = 0.0
    for v in values:
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp
