# Walk-through: at rho = 1 the sign of eta(k) = k c(k) - 1 decides everything.
#
# Run with:  python3 demos/critical_hitting.py

from migrant_chain import ThinningFamily, first_passage_down, hitting_estimate, recurrent_lower_bound

M = 2000
below = ThinningFamily.power_law(1.0)        # eta(k) = -1/(1+k): transient
zero = ThinningFamily.critical("zero")       # eta = 0 for k >= 2: recurrent

g_below = first_passage_down(below, M)
g_zero = first_passage_down(zero, M)
print(" x   P(hit 1 before M), eta<0   1/x      P(hit 1 before M), eta=0   lower bound N=10")
for x in (2, 5, 10, 50, 100):
    print(f"{x:3d}   {g_below[x]:.5f}                  {1 / x:.5f}  {g_zero[x]:.5f}"
          f"                  {recurrent_lower_bound(x, M, 10):.5f}")

# Monte Carlo cross-check at a smaller cap (runs to M = 2000 are slow at zero speed).
est = hitting_estimate(below, 10, 1, 200, 2000, seed=0)
print(f"Monte Carlo from 10 with cap 200: {est.p_hat:.4f} +/- {est.stderr:.4f}; "
      f"exact {first_passage_down(below, 200)[10]:.4f}")
