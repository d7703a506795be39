"""Acceptance suite: one group of tests per numbered criterion.

Each ``suite_*`` function runs one criterion's workload with a given worker
count and returns ``(summary, payload)``. The summary carries the numbers the
criterion asserts on; the payload is the canonical byte serialisation of the
statistical output. Criterion 11 reruns every suite with another worker count
and compares payloads byte for byte.

Tolerances and budgets below are the criterion values verbatim.
"""

import io
import json
import math
import time

import numpy as np
import pytest
from scipy import stats

from migrant_chain import batteries as B
from migrant_chain.chain import ChainConfig, simulate_until, stream
from migrant_chain.exact import lecam_couple_many, write_bound_reports
from migrant_chain.families import ThinningFamily, gamma0
from migrant_chain.montecarlo import (EnsembleSpec, drop_census, ensemble_speed, map_replications,
                                      tail_window_means)
from migrant_chain.passage import ladder_profile

power_law = ThinningFamily.power_law

# criterion 1
IDENTITY_TOL = 1e-12
C1_BUDGET = 10.0
# criterion 2
C2_BUDGET = 60.0
# criterion 3
C3_BUDGET = 60.0
# criterion 4
LADDER_TOL = 1e-10
LADDER_MC_REPS = 10**5
LADDER_MC_CASES = [(10, 0), (50, 1), (200, 2)]
C4_BUDGET = 300.0
# criterion 5
SPEED_TOL = 0.02
C5_BUDGET = 120.0
# criterion 6
C6_BUDGET = 120.0
# criterion 7
LECAM_DRAWS = 10**6
CHI2_LEVEL = 1e-3
C7_BUDGET = 60.0
# criterion 8
CENSUS_REPS = 200
ZERO_DROP_FRACTION = 0.95
BOTH_SIZES_FRACTION = 0.90
MAX_DROP_FRACTION = 0.90
C8_BUDGET = 600.0
# criterion 9
GAMMA0_TABLE = {1.4: 2, 1.5: 2, 1.6: 1, 2.0: 1, 2.5: 0}
# criterion 10
FIGURE_SEEDS = 100
FIGURE_STEPS = 10**5
RED_THRESHOLD = 60
RED_MIN = 95
BLUE_MIN = 99
C10_BUDGET = 300.0
# 4 standard errors throughout
Z = 4.0

THREADS = 1
ALT_THREADS = 3


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, default=repr).encode()


def _reports_bytes(reports) -> bytes:
    buf = io.StringIO()
    write_bound_reports(buf, reports)
    return buf.getvalue().encode()


# ---------------------------------------------------------------- suites


def suite_identity(threads):
    c_values = [0.01, 0.1, 0.5, 0.9, 0.99]
    reports = [r for r in B.martingale_battery(300, c_values, [])
               if r.context["check"] == "closed_form_vs_sum"]
    # each report carries lhs = |closed form - direct sum|
    violations = sum(not r.lhs <= IDENTITY_TOL for r in reports)
    return {"checks": len(reports), "violations": violations}, _reports_bytes(reports)


def suite_tails(threads):
    reports = B.tails_battery([1.2, 1.5, 2.0, 3.0], 2000, 10)
    return {"checks": len(reports), "violations": len(B.violations(reports))}, _reports_bytes(reports)


def suite_domination(threads):
    fam = ThinningFamily.rescaled(0.5, cap=0.9)
    scan, reports = B.domination_battery(fam, 0.75, None, 50, 10**5, 60)
    summary = {"J": scan.J, "epsilon": scan.law.epsilon,
               "valid_law": (1 + scan.law.epsilon) * 0.75 < 1,
               "all_j_hold": bool(scan.ok[(scan.J or 1) - 1:].all()) if scan.J else False,
               "remainder_max": float(scan.remainder_ratio[(scan.J or 1) - 1:].max()),
               "violations": len(B.violations(reports)), "checks": len(reports)}
    return summary, _reports_bytes(reports)


def suite_ladder_exact(threads):
    reports = B.ladder_battery([1.5, 2.5], 30, 3)
    worst = max(r.lhs for r in reports)
    return {"checks": len(reports), "worst": worst}, _reports_bytes(reports)


def _ladder_trial(fam, l, k, seed, r):
    traj, _ = simulate_until(fam, l, seed, lambda t, x, y: x == l + 1 or y > k,
                             max_steps=10**7, stream_index=r)
    return int(traj.states[-1] == l + 1 and traj.drops[-1] <= k)


def suite_ladder_mc(threads):
    fam = power_law(1.5)
    out = {}
    for case, (l, k) in enumerate(LADDER_MC_CASES):
        seed = 4000 + case
        hits = map_replications(lambda r: _ladder_trial(fam, l, k, seed, r), LADDER_MC_REPS, threads)
        p_hat = float(np.mean(hits))
        exact = ladder_profile(fam, l, k)[l]
        se = math.sqrt(exact * (1 - exact) / LADDER_MC_REPS)
        out[f"{l},{k}"] = {"p_hat": p_hat, "exact": exact, "se": se,
                           "z": (p_hat - exact) / se if se > 0 else 0.0}
    return out, _dumps(out)


def suite_speed(threads):
    spec = EnsembleSpec(ChainConfig(ThinningFamily.rescaled(0.5, cap=0.9), 1, 10**5, 0), 100)
    est = ensemble_speed(spec, threads)
    return est.to_dict(), _dumps(est.values.tolist())


def suite_hitting(threads):
    reports = B.hitting_battery(2000, 100, [0, 10, 100])
    upper = [r for r in reports if r.context["check"] == "upper_1_over_x"]
    lower = [r for r in reports if r.context["check"] == "lower_u_N"]
    summary = {"upper_checks": len(upper), "upper_violations": len(B.violations(upper)),
               "lower_checks": len(lower), "lower_violations": len(B.violations(lower))}
    return summary, _reports_bytes(reports)


def _pooled_chi2(samples, pmf):
    n = len(samples)
    obs = np.bincount(samples, minlength=len(pmf)).astype(float)
    tail_obs = obs[len(pmf):].sum()
    obs = obs[:len(pmf)]
    exp = n * np.asarray(pmf)
    o_cells, e_cells, ao, ae = [], [], 0.0, 0.0
    for o, e in zip(obs, exp):
        ao, ae = ao + o, ae + e
        if ae >= 5:
            o_cells.append(ao)
            e_cells.append(ae)
            ao = ae = 0.0
    o_cells[-1] += ao + tail_obs
    e_cells[-1] += ae + (n - exp.sum())
    return float(stats.chisquare(o_cells, e_cells).pvalue)


def suite_lecam(threads):
    n, p = 100, 0.05
    blocks = 10
    per = LECAM_DRAWS // blocks
    parts = map_replications(lambda b: lecam_couple_many(n, p, per, stream(7000, b)), blocks, threads)
    z = np.concatenate([a for a, _ in parts])
    l = np.concatenate([b for _, b in parts])
    d = np.abs(z - l)
    summary = {"mean_abs": float(d.mean()), "se": float(d.std(ddof=1) / math.sqrt(d.size)),
               "bound": n * p * p,
               "p_binom": _pooled_chi2(z, stats.binom.pmf(np.arange(n + 1), n, p)),
               "p_pois": _pooled_chi2(l, stats.poisson.pmf(np.arange(60), n * p))}
    return summary, _dumps({"z": np.bincount(z).tolist(), "l": np.bincount(l).tolist(),
                            "d": np.bincount(d).tolist()})


def suite_census(threads):
    a25 = drop_census(EnsembleSpec(ChainConfig(power_law(2.5), 10, 10**4, 0), CENSUS_REPS),
                      (5000, 10**4), threads)
    a15 = drop_census(EnsembleSpec(ChainConfig(power_law(1.5), 10, 10**5, 0), CENSUS_REPS),
                      (10**4, 10**5), threads)
    summary = {"zero_drop_fraction": a25.fraction_zero_drops(),
               "both_sizes_fraction": a15.fraction_containing(1, 2),
               "max_le_2_fraction": a15.fraction_max_at_most(2),
               "size_1_fraction": a15.fraction_containing(1),
               "size_2_fraction": a15.fraction_containing(2)}
    payload = _dumps([[sorted(c.items()) for c in a25.per_replication],
                      [sorted(c.items()) for c in a15.per_replication]])
    return summary, payload


def suite_figure(threads):
    red, _ = tail_window_means(power_law(0.99), 100, FIGURE_STEPS, FIGURE_SEEDS, 0, 0.2, threads)
    _, blue = tail_window_means(power_law(1.01), 100, FIGURE_STEPS, FIGURE_SEEDS, 0, 0.2, threads)
    summary = {"red_below": int(np.sum(red < RED_THRESHOLD)), "blue_above": int(np.sum(blue > 100))}
    return summary, _dumps([red.tolist(), blue.tolist()])


SUITES = {
    1: suite_identity, 2: suite_tails, 3: suite_domination, "4a": suite_ladder_exact,
    "4b": suite_ladder_mc, 5: suite_speed, 6: suite_hitting, 7: suite_lecam, 8: suite_census,
    10: suite_figure,
}
_CACHE: dict = {}


def run_suite(key, threads=THREADS):
    if (key, threads) not in _CACHE:
        t0 = time.perf_counter()
        summary, payload = SUITES[key](threads)
        _CACHE[(key, threads)] = (summary, payload, time.perf_counter() - t0)
    return _CACHE[(key, threads)]


# ---------------------------------------------------------------- criteria


@pytest.mark.criterion(1, "supermartingale closed form vs direct sum within 1e-12, x <= 300, 5 values of c, < 10 s")
def test_c1_identity_suite():
    summary, _, elapsed = run_suite(1)
    assert summary["checks"] == 300 * 5
    assert summary["violations"] == 0
    assert elapsed < C1_BUDGET


@pytest.mark.criterion(2, "tail lemma and corollary hold on the full grid, zero violations, < 1 min")
def test_c2_tail_suite():
    summary, _, elapsed = run_suite(2)
    # (l, k) pairs with k <= min(l, 10) for l <= 2000, two bounds each, four families
    pairs = sum(min(l, 10) + 1 for l in range(1, 2001))
    assert summary["checks"] == 4 * 2 * pairs
    assert summary["violations"] == 0
    assert elapsed < C2_BUDGET


@pytest.mark.criterion(3, "domination: valid epsilon, finite J, both inequalities on [J, 1e5], k <= 50 plus remainder, < 1 min")
def test_c3_domination_suite():
    summary, _, elapsed = run_suite(3)
    assert summary["valid_law"]
    assert summary["J"] is not None
    assert summary["all_j_hold"]
    assert summary["remainder_max"] <= 1.0
    assert summary["violations"] == 0
    assert elapsed < C3_BUDGET


@pytest.mark.criterion(4, "ladder recursion = linear solve within 1e-10; Monte Carlo within 4 sigma at 1e5 replications, < 5 min")
def test_c4_ladder_exact():
    summary, _, elapsed = run_suite("4a")
    assert summary["checks"] == 2 * 4 * 30
    assert summary["worst"] <= LADDER_TOL


@pytest.mark.criterion(4, "ladder recursion = linear solve within 1e-10; Monte Carlo within 4 sigma at 1e5 replications, < 5 min")
def test_c4_ladder_monte_carlo():
    summary, _, elapsed = run_suite("4b")
    for case, row in summary.items():
        assert abs(row["p_hat"] - row["exact"]) <= Z * row["se"], case
    assert elapsed + run_suite("4a")[2] < C4_BUDGET


@pytest.mark.criterion(5, "LLN speed: rescaled(0.5), n = 1e5, 100 replications, |mean X_n/n - 0.5| <= 0.02, < 2 min")
def test_c5_speed():
    summary, _, elapsed = run_suite(5)
    assert summary["replications"] == 100
    assert abs(summary["mean"] - 0.5) <= SPEED_TOL
    assert elapsed < C5_BUDGET


@pytest.mark.criterion(6, "critical hitting: g(x) <= 1/x for power_law(1); u_N lower bound for eta = 0, < 2 min")
def test_c6_hitting_bounds():
    summary, _, elapsed = run_suite(6)
    assert summary["upper_checks"] == 99 and summary["upper_violations"] == 0
    assert summary["lower_checks"] == 300 and summary["lower_violations"] == 0
    assert elapsed < C6_BUDGET


@pytest.mark.criterion(7, "LeCam: E|Z-L| <= 0.25 + 4 se over 1e6 draws; both marginals pass chi-square at 1e-3, < 1 min")
def test_c7_lecam():
    summary, _, elapsed = run_suite(7)
    assert summary["mean_abs"] <= summary["bound"] + Z * summary["se"]
    assert summary["p_binom"] > CHI2_LEVEL
    assert summary["p_pois"] > CHI2_LEVEL
    assert elapsed < C7_BUDGET


@pytest.mark.criterion(8, "drop census: zero drops >= 95% (a=2.5); sizes 1 and 2 both >= 90% and max drop <= 2 in >= 90% (a=1.5), < 10 min")
def test_c8_gamma_zero_window():
    summary, _, elapsed = run_suite(8)
    assert summary["zero_drop_fraction"] >= ZERO_DROP_FRACTION
    assert elapsed < C8_BUDGET


@pytest.mark.criterion(8, "drop census: zero drops >= 95% (a=2.5); sizes 1 and 2 both >= 90% and max drop <= 2 in >= 90% (a=1.5), < 10 min")
def test_c8_both_sizes_present():
    summary, _, _ = run_suite(8)
    assert summary["both_sizes_fraction"] >= BOTH_SIZES_FRACTION, summary


@pytest.mark.criterion(8, "drop census: zero drops >= 95% (a=2.5); sizes 1 and 2 both >= 90% and max drop <= 2 in >= 90% (a=1.5), < 10 min")
def test_c8_max_drop_at_most_two():
    summary, _, _ = run_suite(8)
    assert summary["max_le_2_fraction"] >= MAX_DROP_FRACTION


@pytest.mark.criterion(9, "gamma0 table {1.4: 2, 1.5: 2, 1.6: 1, 2: 1, 2.5: 0} exactly")
def test_c9_gamma0_table():
    t0 = time.perf_counter()
    assert {a: gamma0(power_law(a)) for a in GAMMA0_TABLE} == GAMMA0_TABLE
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(10, "phase figure batch: a=0.99 tail mean < 60 in >= 95/100; a=1.01 final > initial in >= 99/100 at 1e5 steps, < 5 min")
def test_c10_figure_batch():
    summary, _, elapsed = run_suite(10)
    assert summary["red_below"] >= RED_MIN
    assert summary["blue_above"] >= BLUE_MIN
    assert elapsed < C10_BUDGET


@pytest.mark.criterion(11, "every suite rerun with the same seed and another thread count is byte-identical")
@pytest.mark.parametrize("key", list(SUITES))
def test_c11_determinism(key):
    _, first, _ = run_suite(key, THREADS)
    _, second, _ = run_suite(key, ALT_THREADS)
    assert first == second
