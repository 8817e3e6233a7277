# %% [markdown]
# # Where the construction stops working
#
# The exponent thresholds decide whether the fixed resolvent split keeps every constant
# bounded in the cutoff. The frontier sits at p = d/2 - 3/4.

# %%
from fractions import Fraction

from uvlab.counterterm import thresholds

# %%
for d in (1, 2, 3):
    for p in (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)):
        r = thresholds(d, p)
        print(f"d={d} p={p}: beta_min K1={r.beta_min_K1} K2={r.beta_min_K2} K3={r.beta_min_K3} "
              f"feasible={r.scheme_feasible}")

# %% [markdown]
# Scanning p finely shows the switch happens exactly past the frontier.

# %%
for d in (1, 2, 3):
    first = next(k for k in range(100) if thresholds(d, Fraction(k, 50)).scheme_feasible)
    print(f"d={d}: first feasible p on the 1/50 grid = {Fraction(first, 50)}  frontier = {Fraction(d, 2) - Fraction(3, 4)}")
