# %% [markdown]
# # One secure multiplication, step by step
#
# Encode A and B into N shares, let every server multiply its pairs, and
# decode the product from any Q answers. Everything runs in process over the
# prime field F_(2^61 - 1).

# %%
import numpy as np

from csa_sdmm.ffield import FieldConfig, make_rng
from csa_sdmm.harness import coordinate_run
from csa_sdmm.matrix import FieldMatrix, mat_mul_naive
from csa_sdmm.schemes import SchemeSpec, decode, encode, make_plan, recovery_threshold, server_compute

field = FieldConfig()
rng = make_rng(0)
spec = SchemeSpec.uscsa(15, 4, 2, 3, 2, 0)
print(spec.label, "partition factors", spec.partition_factors, "Q =", recovery_threshold(spec))

# %% [markdown]
# ## Inputs and evaluation points
#
# The plan draws N distinct points. Some are placed as additive-inverse pairs
# so the encoder can evaluate two points with one pass.

# %%
A = FieldMatrix.random(field, 6, 4, rng)
B = FieldMatrix.random(field, 4, 9, rng)
plan = make_plan(spec, rng, field)
print("pairs:", len(plan.pairs), "violations:", plan.violations())

# %% [markdown]
# ## Encode, compute, decode

# %%
shares = encode(A, B, spec, plan, rng)
print("server 1 holds", len(shares[0].pairs), "pairs of shapes",
      shares[0].pairs[0][0].shape, shares[0].pairs[0][1].shape)
answers = [server_compute(s) for s in shares]
C = decode(spec, plan, answers)
print("decoded equals A @ B:", C == mat_mul_naive(A, B))

# %% [markdown]
# ## Over sockets
#
# The harness runs the same pipeline against workers speaking a small binary
# protocol, times every phase and counts bytes. The uplink and downlink ratios
# are exact rationals that must equal the analytic costs.

# %%
rep = coordinate_run(spec, (90, 10, 1000), seed=1)
for key in ("t_ec", "t_ul", "t_c_avg", "t_dl", "t_dc"):
    print(f"{key:8s} {getattr(rep, key) * 1e3:8.2f} ms")
print("bytes up", rep.bytes_up, "ratio", rep.ul_ratio, "expected", rep.expected_ul())
print("bytes down", rep.bytes_down, "ratio", rep.dl_ratio, "expected", rep.expected_dl())
