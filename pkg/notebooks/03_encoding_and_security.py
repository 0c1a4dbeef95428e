# %% [markdown]
# # Encoding cost and collusion secrecy
#
# Two properties beyond correctness: the paired evaluation points cut
# encoding work, and no set of ell servers learns anything about the inputs.

# %%
from csa_sdmm.ffield import FieldConfig, make_rng
from csa_sdmm.matrix import FieldMatrix
from csa_sdmm.polyeval import OpCounter, calibrate, enc_gain_scsa
from csa_sdmm.schemes import SchemeSpec, encode, make_plan
from csa_sdmm.security import collusion_audit

# %% [markdown]
# ## Relative cost of additions and multiplications
#
# lambda_plus is the measured share of an addition in an add+multiply pair.
# The predicted saving of paired evaluation for the first scenario follows.

# %%
params = calibrate()
print(f"lambda_plus={params.lambda_plus:.3f} lambda_dot={params.lambda_dot:.3f}")
print(f"predicted SCSA encoding gain: {enc_gain_scsa(15, 4, 7, 900, 10000, params):.2%}")

# %% [markdown]
# ## Counting operations directly
#
# The encoder can tally its element operations. Weighted by lambda, the tally
# agrees with the closed-form model, with and without pairing.

# %%
field = FieldConfig()
rng = make_rng(2)
spec = SchemeSpec.scsa(15, 4, 1)
A = FieldMatrix.random(field, 18, 10, rng)
B = FieldMatrix.random(field, 10, 1001, rng)
plan = make_plan(spec, 3, field)
for use_pairs in (False, True):
    c = OpCounter()
    encode(A, B, spec, plan, rng, counter=c, use_pairs=use_pairs)
    print(f"pairs={use_pairs!s:5s} mul={c.mul:8d} add={c.add:8d} weighted={c.weighted(params):12.1f}")

# %% [markdown]
# ## Exhaustive collusion audit
#
# For each of the C(15, 4) = 1365 colluding sets the audit checks that the
# noise mixing matrices are invertible, builds the noise that maps one input
# pair onto another, re-encodes, and compares the colluders' bytes.

# %%
for spec in (SchemeSpec.uscsa(15, 4, 2, 3, 2, 0), SchemeSpec.gscsa(15, 4, 2, 3, 2, 1)):
    rep = collusion_audit(spec, make_plan(spec, 0, field))
    print(f"{spec.label}: {len(rep.rows)} subsets, passed={rep.passed}")
