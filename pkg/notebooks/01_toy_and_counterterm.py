# %% [markdown]
# # Two-mode toy and the second-order counterterm
#
# One boson mode and one fermion mode at zero momentum. With only the pair-creation
# kernel switched on and a boson cap of 1, the vacuum sector is two-dimensional, so the
# ground energy has a closed form to compare against.

# %%
import numpy as np

from uvlab.counterterm import e2_discrete, e2_quadrature, log_fit, power_fit
from uvlab.hamiltonian import two_mode_toy
from uvlab.modegrid import CutoffSpec, DispersionParams, KernelSpec
from uvlab.spectra import ground_energy, perturbation_check, toy_closed_form

# %%
params = DispersionParams(1.0, 1.5)
for g in (0.2, 0.8, 1.5):
    parts = two_mode_toy(g, boson_cap=1, params=params)
    E, _ = ground_energy(parts.H_full)
    exact, c2 = toy_closed_form(g, params=params)
    print(f"g={g}: E={E:.12f} closed form={exact:.12f} c2={c2:.6f} E2={e2_discrete(parts.km, params):.6f}")

# %% [markdown]
# The second-order coefficient extracted from a small-coupling fit matches the discrete
# counterterm.

# %%
rep = perturbation_check(two_mode_toy(0.8, boson_cap=1, params=params))
print(f"fitted c2={rep.c2:.10f}  E2={rep.e2:.10f}  relative mismatch={rep.rel_mismatch:.2e}")

# %% [markdown]
# ## Continuum counterterm against the cutoff
#
# In one dimension the integral converges, in two it grows like log(Lambda), and in three
# it grows close to linearly.

# %%
lambdas = np.geomspace(10, 1000, 5)
P = DispersionParams()
for d in (1, 2, 3):
    vals = np.array([e2_quadrature(KernelSpec(0.5), CutoffSpec(L), P, d).value for L in lambdas])
    _, _, r2 = log_fit(lambdas, vals)
    print(f"d={d}: E2={np.round(vals, 4)}  log-fit R^2={r2:.4f}  power exponent={power_fit(lambdas, vals)[1]:.3f}")
