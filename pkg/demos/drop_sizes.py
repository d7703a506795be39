# Walk-through: which drop sizes survive for ever when a > 1?
#
# For a > 1 the kill count k c(k) ~ k^(1-a) decays, and only drops of size at
# most gamma0 keep occurring. Two views of the same fact: the exact ladder
# probabilities and a Monte Carlo census.
#
# Run with:  python3 demos/drop_sizes.py

import numpy as np

from migrant_chain import ChainConfig, EnsembleSpec, ThinningFamily, drop_census, gamma0
from migrant_chain.passage import hk_scan, ladder_profile, no_large_drop_prob

fam = ThinningFamily.power_law(1.5)
print("gamma0(a=1.5) =", gamma0(fam))

# Exact: the chance that the climb from level 100 to 10^4 never drops by more than k.
for k in range(4):
    print(f"k={k}: P(no drop > k between 100 and 10^4) = {no_large_drop_prob(fam, 100, 10**4, k):.4f}")

# The failure probability of one rung scales like (l c(l))^(k+1); the ratio stays bounded.
scan = hk_scan(fam, 2, 10, 5000, profile=ladder_profile(fam, 5000, 2))
print(f"H_2 estimate {scan.h_hat:.4f} (peak at l={scan.argmax_l})")

# Monte Carlo: counts of each drop size in a late window, 50 runs.
spec = EnsembleSpec(ChainConfig(fam, 10, 10**5, master_seed=0), 50)
census = drop_census(spec, (10**4, 10**5))
print("drop-size counts in (10^4, 10^5]:", {k: v for k, v in sorted(census.counts.items()) if k})
print("fraction of runs with max drop <= 2:", census.fraction_max_at_most(2))
print("fraction with both sizes 1 and 2:", census.fraction_containing(1, 2))
# About 1/(2n) size-2 drops per step near level n, so a window (N, 10N] holds
# Poisson(ln(10)/2) of them: both sizes appear in only ~68% of runs.
print("Poisson prediction:", 1 - np.exp(-0.5 * np.log(10)))
