# Walk-through: the phase transition of the power family c(k) = 1/(k^a + 1).
#
# Run with:  python3 demos/phase_transition.py
# Writes phase_transition.svg next to the current directory.

import numpy as np

from migrant_chain import ChainConfig, ThinningFamily, classify, simulate
from migrant_chain._svg import line_chart

# k c(k) = k / (k^a + 1) grows without bound for a < 1 and dies out for a > 1,
# so the regime flips as a crosses 1.
for a in (0.5, 0.99, 1.0, 1.01, 2.5):
    rep = classify(ThinningFamily.power_law(a))
    print(f"a={a:<5} {rep.regime:<20} speed={rep.speed}  gamma0={rep.gamma0}")

# Two trajectories from X_0 = 100 on either side of the threshold.
steps = 10_000
paths = {a: simulate(ChainConfig(ThinningFamily.power_law(a), 100, steps, master_seed=1)).states
         for a in (0.99, 1.01)}
for a, states in paths.items():
    print(f"a={a}: mean over the last 20% = {states[-steps // 5:].mean():.1f}, final = {states[-1]}")

# The red path hovers near the level where k c(k) = 1; the blue one drifts upward.
n = np.arange(steps + 1)
svg = line_chart([("a=0.99", n, paths[0.99], "red"), ("a=1.01", n, paths[1.01], "blue")],
                 "X_0 = 100", "n", "X_n")
with open("phase_transition.svg", "w") as fh:
    fh.write(svg)
print("wrote phase_transition.svg")
