"""Verification batteries: grids of exact inequality checks, as BoundReport lists."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .exact import (BoundReport, domination_scan, submartingale_gap,
                    supermartingale_expectation, tail_grid, IDENTITY_TOL)
from .families import ThinningFamily
from .passage import (first_passage_down, ladder_linear_solve, ladder_profile,
                      recurrent_lower_bound)

LADDER_TOL = 1e-10

BATTERY_DEFAULTS = {
    "domination": {"family": {"kind": "rescaled", "rho": 0.5, "cap": 0.9},
                   "rho_bar": 0.75, "epsilon": None, "k_max": 50, "j_max": 100000,
                   "grid_points": 60},
    "martingale": {"x_max": 300, "c_values": [0.01, 0.1, 0.5, 0.9, 0.99], "N_values": [0, 10, 100]},
    "tails": {"a_values": [1.2, 1.5, 2.0, 3.0], "l_max": 2000, "k_max": 10},
    "ladder": {"a_values": [1.5, 2.5], "l_max": 30, "k_max": 3},
    "hitting": {"M": 2000, "x_max": 100, "N_values": [0, 10, 100]},
}


def sample_grid(lo: int, hi: int, points: int) -> list:
    """Integers from lo to hi inclusive, log-spaced, both ends included."""
    if hi <= lo:
        return [lo]
    g = np.unique(np.round(np.geomspace(lo, hi, points)).astype(np.int64))
    return sorted(set(g.tolist()) | {lo, hi})


def domination_battery(family: ThinningFamily, rho_bar: float, epsilon: Optional[float] = None,
                       k_max: int = 50, j_max: int = 100000, grid_points: int = 60):
    """Returns (scan, reports on a sample grid of [J, j_max]).

    With no J found the grid covers [1, j_max] and an explicit failing row is added.
    """
    scan = domination_scan(family, rho_bar, epsilon, k_max, j_max)
    start = scan.J if scan.J is not None else 1
    reports = scan.reports(sample_grid(start, scan.j_max, grid_points))
    if scan.J is None:
        reports.append(BoundReport(1.0, 0.0, {"check": "threshold J not found"}))
    return scan, reports


def martingale_battery(x_max: int = 300, c_values: Sequence[float] = (0.01, 0.1, 0.5, 0.9, 0.99),
                       N_values: Sequence[int] = (0, 10, 100)) -> list:
    out = []
    for c in c_values:
        for x in range(1, x_max + 1):
            r = supermartingale_expectation(x, c)
            out.append(BoundReport(abs(r.closed_form - r.direct_sum), IDENTITY_TOL,
                                   {"check": "closed_form_vs_sum", "x": x, "c": c, "N": ""}))
    # 1/x supermartingale when (x+1)c(x) = 1, i.e. power_law(1) with c = 1/(x+1):
    # (x+1)c - 1 <= c^(x+1), decided in exact rationals because c^(x+1) underflows
    for x in range(1, x_max + 1):
        c = Fraction(1, x + 1)
        lhs, rhs = (x + 1) * c - 1, c ** (x + 1)
        assert lhs <= rhs
        out.append(BoundReport(float(lhs), float(rhs),
                               {"check": "supermartingale_condition", "x": x, "c": float(c), "N": "",
                                "log10_margin": repr(-(x + 1) * math.log10(x + 1))}))
    # 1/(N+x) submartingale where eta >= 0 (the eta = 0 family for x >= 2)
    zero = ThinningFamily.critical("zero")
    for N in N_values:
        for x in range(2, x_max + 1):
            gap = submartingale_gap(zero, x, N)
            out.append(BoundReport(0.0, gap, {"check": "submartingale_gap", "x": x,
                                              "c": zero.c(x), "N": N}))
    return out


def tails_battery(a_values: Iterable[float] = (1.2, 1.5, 2.0, 3.0), l_max: int = 2000,
                  k_max: int = 10) -> list:
    out = []
    for a in a_values:
        out.extend(tail_grid(ThinningFamily.power_law(a), range(1, l_max + 1), k_max))
    return out


def ladder_battery(a_values: Iterable[float] = (1.5, 2.5), l_max: int = 30, k_max: int = 3) -> list:
    """|forward recursion - absorbing-chain solve| <= 1e-10 for every l <= l_max, k <= k_max."""
    out = []
    for a in a_values:
        fam = ThinningFamily.power_law(a)
        for k in range(k_max + 1):
            prof = ladder_profile(fam, l_max, k)
            for l in range(1, l_max + 1):
                h = ladder_linear_solve(fam, l, k)[l - 1]
                out.append(BoundReport(abs(prof[l] - h), LADDER_TOL,
                                       {"a": a, "k": k, "l": l, "s_recursion": repr(prof[l]),
                                        "s_linear": repr(float(h))}))
    return out


def hitting_battery(M: int = 2000, x_max: int = 100, N_values: Sequence[int] = (0, 10, 100)) -> list:
    out = []
    g = first_passage_down(ThinningFamily.power_law(1.0), M)
    for x in range(2, x_max + 1):
        out.append(BoundReport(g[x], 1.0 / x, {"check": "upper_1_over_x", "family": "power_law(1)",
                                               "M": M, "x": x, "N": ""}))
    g0 = first_passage_down(ThinningFamily.critical("zero"), M)
    for N in N_values:
        for x in range(1, x_max + 1):
            out.append(BoundReport(recurrent_lower_bound(x, M, N), g0[x],
                                   {"check": "lower_u_N", "family": "critical(zero)",
                                    "M": M, "x": x, "N": N}))
    return out


def all_hold(reports: Sequence[BoundReport]) -> bool:
    return all(r.holds for r in reports)


def violations(reports: Sequence[BoundReport]) -> list:
    return [r for r in reports if not r.holds]


def summarize(reports: Sequence[BoundReport]) -> dict:
    margins = [r.margin for r in reports if math.isfinite(r.margin)]
    return {"checks": len(reports), "violations": len(violations(reports)),
            "min_margin": min(margins) if margins else None}
