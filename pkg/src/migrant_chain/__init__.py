"""Simulation and exact analysis of the one-migrant-per-generation population chain.

The population evolves as ``X_{n+1} = X_n - Y_{n+1} + 1`` where, given
``X_n = k``, the number of deaths ``Y_{n+1}`` is ``Bin(k, c(k))``.
"""

__version__ = "0.1.0"

from .families import (ThinningFamily, EtaSpec, RegimeReport, FamilyError, classify, eta,
                       eval_c, gamma0, regularity_sup, rho_limit)
from .chain import (ChainConfig, IncrementLaw, Trajectory, increment_law, simulate,
                    simulate_until, step, stream)
from .exact import (BoundReport, DominatingLaw, corollary_tail_check, domination_threshold,
                    drift_gap, lecam_couple, lemma_tail_check, mu_pmf, poisson_split,
                    submartingale_gap, supermartingale_expectation, tail_factor)
from .passage import (FirstPassageSolution, LadderProfile, first_passage_down, hk_scan,
                      ladder_profile, no_large_drop_prob, recurrent_lower_bound)
from .montecarlo import (DropCensus, EnsembleSpec, SpeedEstimate, drop_census, ensemble_speed,
                         hitting_estimate, occupation_histogram, return_time_stats)

__all__ = [
    "__version__", "ThinningFamily", "EtaSpec", "RegimeReport", "FamilyError", "classify",
    "eta", "eval_c", "gamma0", "regularity_sup", "rho_limit", "ChainConfig", "IncrementLaw",
    "Trajectory", "increment_law", "simulate", "simulate_until", "step", "stream",
    "BoundReport", "DominatingLaw", "corollary_tail_check", "domination_threshold",
    "drift_gap", "lecam_couple", "lemma_tail_check", "mu_pmf", "poisson_split",
    "submartingale_gap", "supermartingale_expectation", "tail_factor", "FirstPassageSolution",
    "LadderProfile", "first_passage_down", "hk_scan", "ladder_profile", "no_large_drop_prob",
    "recurrent_lower_bound", "DropCensus", "EnsembleSpec", "SpeedEstimate", "drop_census",
    "ensemble_speed", "hitting_estimate", "occupation_histogram", "return_time_stats",
]
