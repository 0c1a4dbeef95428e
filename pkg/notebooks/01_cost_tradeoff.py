# %% [markdown]
# # Upload and download cost trade-off
#
# Every scheme in the package hides A and B from any `ell` colluding servers.
# They differ in how they split the matrices, which moves cost between the
# upload (shares sent to servers) and the download (answers sent back).
# This script sweeps every feasible parameter choice for N = 100, ell = 8 and
# m/p = 200 and prints the efficient points.

# %%
from fractions import Fraction

from csa_sdmm.costs import cost_report, regime_compare, tradeoff_sweep, ul_lower_bound
from csa_sdmm.schemes import SchemeSpec

N, ELL, X = 100, 8, 200

# %% [markdown]
# ## The two extreme schemes
#
# SCSA splits only B, so it downloads little but uploads a lot when m >> p.
# USCSA(42, 1, 42) splits A into 42 blocks, which nearly reaches the upload
# converse.

# %%
for spec in (SchemeSpec.scsa(N, ELL), SchemeSpec.uscsa(N, ELL, 42, 1, 42)):
    rep = cost_report(spec, X)
    print(f"{spec.label:18s} Q={rep.q:3d}  1/K_UL={float(rep.inv_kul):.4f}  1/K_DL={float(rep.inv_kdl):.4f}")
print(f"uplink converse: 1/K_UL <= {float(1 / ul_lower_bound(N, ELL)):.2f}")

# %% [markdown]
# ## Full sweep
#
# Every (f, q, g) with fq + g + 2*ell - 1 <= N is feasible for both USCSA and
# GSCSA. Only points not dominated in both coordinates are printed.

# %%
points = tradeoff_sweep(N, ELL, X)
front = tradeoff_sweep(N, ELL, X, frontier_only=True)
print(f"{len(points)} points, {len(front)} on the frontier")
for pt in sorted(front, key=lambda p: p.inv_kul)[::7]:
    params = "" if pt.f is None else f"({pt.f},{pt.q},{pt.g})"
    print(f"{pt.scheme}{params:12s} b={pt.b}  1/K_UL={float(pt.inv_kul):.4f}  1/K_DL={float(pt.inv_kdl):.4f}")

# %% [markdown]
# ## Which family wins the upload
#
# With f, q > 1 the better family depends only on m/p relative to max(f, q).

# %%
for x in (Fraction(1, 5), Fraction(1, 3), 1, 3, 5):
    print(f"f=2, q=3, m/p={str(x):>4}: {regime_compare(2, 3, x)}")
