# %% [markdown]
# # Raw and regrouped resolvent series
#
# Admissible sequences over the four regrouped blocks are counted by a transfer matrix;
# the regrouping is checked against the raw series symbolically and numerically.

# %%
import numpy as np

from uvlab.counterterm import e2_discrete
from uvlab.hamiltonian import two_mode_toy
from uvlab.linalg import operator_norm
from uvlab.neumann import (count_sequences, direct_resolvent, enumerate_sequences, raw_series_partial,
                           region_bound, reordered_series_partial, shadow_check, word_check)

# %%
print("counts:", [count_sequences(k) for k in range(9)])
print("k=2 sequences as (block, variant):", [s.terms for s in enumerate_sequences(2)][:4], "...")

# %% [markdown]
# The symbolic identities hold for the adjacency rule in use and break at k=3 for the
# alternative rule.

# %%
print("shadow, theorem rule:", shadow_check(6))
print("shadow, alternative rule:", shadow_check(4, rule="alternative"))
print("words, theorem rule:", word_check(5))

# %% [markdown]
# Numerically, deep in the convergence region both partial sums land on the direct inverse.

# %%
parts = two_mode_toy(0.3, 0.2, boson_cap=3)
e2 = e2_discrete(parts.km, parts.params)
z = 2 * region_bound(parts) - 1 + 1j
exact = direct_resolvent(z, parts, e2)
raw = raw_series_partial(z, 24, parts, e2)
reo = reordered_series_partial(z, 12, parts, e2)
print(f"z={z:.3f}")
print(f"raw vs direct: {operator_norm(raw.matrix - exact):.3e}")
print(f"reordered vs raw: {operator_norm(reo.matrix - raw.matrix):.3e}")
print("raw term norms:", np.array(raw.term_norms[:8]))
