import math

import numpy as np
import pytest
from scipy import linalg, stats

from migrant_chain.chain import ChainConfig
from migrant_chain.families import ThinningFamily
from migrant_chain.montecarlo import (EnsembleSpec, drop_census, ensemble_speed, hitting_estimate,
                                      map_replications, mean_stderr, occupation_histogram,
                                      resolve_threads, return_time_stats, tail_window_means,
                                      total_variation)
from migrant_chain.passage import first_passage_down

power_law = ThinningFamily.power_law


def stationary_law(fam, K):
    """Stationary pmf on 1..K of the chain with states above K folded into K."""
    P = np.zeros((K, K))
    for x in range(1, K + 1):
        y = np.arange(x + 1)
        nxt = np.minimum(x - y + 1, K)
        np.add.at(P[x - 1], nxt - 1, stats.binom.pmf(y, x, fam.c(x)))
    A = P.T - np.eye(K)
    A[-1] = 1.0
    b = np.zeros(K)
    b[-1] = 1.0
    return linalg.solve(A, b)


# ---------------------------------------------------------------- plumbing


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("MIGRANT_CHAIN_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("MIGRANT_CHAIN_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_map_replications_keeps_order():
    assert map_replications(lambda r: r * r, 50, threads=4) == [r * r for r in range(50)]


def test_mean_stderr():
    m, s = mean_stderr([1.0, 2.0, 3.0])
    assert m == 2.0 and s == pytest.approx(1 / math.sqrt(3))


def test_spec_validation():
    cfg = ChainConfig(power_law(2), 1, 100)
    with pytest.raises(ValueError):
        EnsembleSpec(cfg, 0)
    with pytest.raises(ValueError):
        EnsembleSpec(cfg, 5, burn_in=100)


# ---------------------------------------------------------------- speed


def test_speed_rescaled_half():
    spec = EnsembleSpec(ChainConfig(ThinningFamily.rescaled(0.5, cap=0.9), 1, 10**5, 0), 100)
    est = ensemble_speed(spec)
    assert abs(est.mean - 0.5) <= 0.02
    assert np.all(est.values <= 1 + 1 / 10**5)


def test_speed_power_three_close_to_one():
    est = ensemble_speed(EnsembleSpec(ChainConfig(power_law(3), 1, 10**5, 0), 50))
    assert est.mean >= 0.99


def test_speed_is_thread_independent():
    spec = EnsembleSpec(ChainConfig(power_law(1.01), 100, 10**4, 5), 16)
    a = ensemble_speed(spec, threads=1)
    b = ensemble_speed(spec, threads=4)
    assert np.array_equal(a.values, b.values)


# ---------------------------------------------------------------- drops


def test_drop_census_gamma_zero():
    spec = EnsembleSpec(ChainConfig(power_law(2.5), 10, 10**4, 0), 200)
    census = drop_census(spec, (5000, 10**4))
    assert census.fraction_zero_drops() >= 0.95
    assert census.to_dict(0)["finite_window_proxy"] is True


def test_drop_census_counts_every_step():
    spec = EnsembleSpec(ChainConfig(power_law(1.5), 10, 3000, 1), 10)
    census = drop_census(spec, (1000, 3000))
    assert sum(census.counts.values()) == 10 * 2000
    for c in census.per_replication:
        assert sum(c.values()) == 2000


def test_drop_census_empty_window():
    spec = EnsembleSpec(ChainConfig(power_law(1.5), 10, 3000, 1), 4)
    census = drop_census(spec, (3000, 3000))
    assert census.counts == {} and census.max_drop == 0


# ---------------------------------------------------------------- hitting


def test_hitting_agrees_with_exact_solver():
    fam = power_law(1)
    est = hitting_estimate(fam, 10, 1, 200, 4000, seed=1)
    exact = first_passage_down(fam, 200)[10]
    assert abs(est.p_hat - exact) <= 4 * est.stderr
    assert est.undecided == 0


def test_hitting_below_one_over_x_far_cap():
    est = hitting_estimate(power_law(1), 10, 1, 2000, 100, seed=2)
    assert est.p_hat <= 0.1 + 4 * est.stderr


def test_hitting_preconditions():
    with pytest.raises(ValueError):
        hitting_estimate(power_law(1), 1, 1, 10, 5)


def test_two_state_convention():
    """From target+1 in a tiny window: tau counts t >= 1 only."""
    fam = ThinningFamily.constant(0.5)
    # from 2 with cap 3: Y = 0 goes to 3 (prob 1/4), Y = 1 stays at 2, Y = 2 hits 1 (prob 1/4)
    est = hitting_estimate(fam, 2, 1, 3, 20000, seed=3)
    assert abs(est.p_hat - 0.5) <= 4 * est.stderr


# ---------------------------------------------------------------- return times


def test_return_times_positive_recurrent():
    summary = return_time_stats(power_law(0.5), 1, 1000, 10**5)
    assert summary.fraction_not_returned == 0.0
    assert summary.mean > 1
    assert np.isfinite(summary.to_dict()["mean_return_time"])


def test_return_times_transient_has_escapes():
    summary = return_time_stats(power_law(1.01), 1, 50, 10**4, x0=100)
    assert summary.fraction_not_returned > 0


def test_return_times_zero_budget():
    summary = return_time_stats(power_law(0.5), 1, 7, 0)
    assert summary.fraction_not_returned == 1.0


def test_return_time_from_one_matches_geometric():
    # constant(0.5) at state 1 stays with probability 1/2, else moves to 2;
    # from 2 the chain returns to 1 eventually, so E[tau] = 1 + (1/2) E_2[tau_1]
    fam = ThinningFamily.constant(0.5)
    g = return_time_stats(fam, 1, 20000, 10**6, seed=4)
    assert g.histogram()[1] / 20000 == pytest.approx(0.5, abs=4 * math.sqrt(0.25 / 20000))


# ---------------------------------------------------------------- occupation


def test_histogram_normalised():
    h = occupation_histogram(power_law(0.99), 100, 20000, 1000)
    assert abs(h.sum() - 1.0) <= 1e-12


def test_occupation_against_stationary_law():
    fam = power_law(0.99)
    pi = stationary_law(fam, 1500)
    h = occupation_histogram(fam, 100, 10**6, 10**4, seed=0)
    assert total_variation(h[1:], pi) <= 0.05
    assert h[:60].sum() == pytest.approx(pi[:59].sum(), abs=0.02)


def test_disjoint_runs_are_close():
    fam = power_law(0.99)
    h1 = occupation_histogram(fam, 100, 10**6, 10**4, seed=0, stream_index=0)
    h2 = occupation_histogram(fam, 100, 10**6, 10**4, seed=0, stream_index=1)
    assert total_variation(h1, h2) <= 0.05


def test_tail_window_means_shapes():
    means, finals = tail_window_means(power_law(1.01), 100, 1000, 5, seed=0)
    assert means.shape == finals.shape == (5,)
