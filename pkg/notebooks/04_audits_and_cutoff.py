# %% [markdown]
# # Bound audits and cutoff removal
#
# Randomized audits of the explicit-constant bounds on small truncations, then the
# renormalized ground energy and resolvent distances as the cutoff grows.

# %%
from uvlab.config import RunConfig, build_system
from uvlab.estimates import run_audits
from uvlab.spectra import default_z, renormalized_sweep, resolvent_distance

# %%
for r in run_audits(20, 0, threads=2):
    print(f"{r.lemma}: samples={r.samples} max ratio={r.max_ratio:.4g} bound={r.bound_constant:g} pass={r.passed}")

# %% [markdown]
# Renormalized sweep at the default configuration.

# %%
cfg = RunConfig()
res = renormalized_sweep(cfg)
for row in res.rows:
    print(f"Lambda={row.Lambda:5.1f} E={row.E:.6f} E2={row.e2:.6f} E-E2={row.renormalized:.6f} gap={row.gap:.4f}")

# %% [markdown]
# Resolvent distances between cutoffs shrink as the smaller cutoff grows.

# %%
parts = {L: build_system(cfg, L) for L in (4.0, 8.0, 16.0)}
z = default_z(*parts.values())
for a, b in ((4.0, 8.0), (4.0, 16.0), (8.0, 16.0)):
    print(f"d({a:g}, {b:g}) = {resolvent_distance(parts[a], parts[b], z):.4e}")
