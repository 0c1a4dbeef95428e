import dataclasses

import numpy as np
import pytest

from csa_sdmm.ffield import FieldConfig, make_rng
from csa_sdmm.matrix import FieldMatrix, rank
from csa_sdmm.schemes import SchemeSpec, encode, make_plan, noise_shapes, sample_noise
from csa_sdmm.security import (AuditReport, collusion_audit, collusion_view, noise_mixing_matrices,
                               secrecy_witness)


def inputs(spec, field, rng, n=2):
    vA, hB = spec.partition_factors
    return FieldMatrix.random(field, vA, n, rng), FieldMatrix.random(field, n, hB, rng)


def test_ell1_scalar_blocks(F257):
    spec = SchemeSpec.scsa(5, 1)
    plan = make_plan(spec, 0, F257)
    R, T = noise_mixing_matrices(spec, plan, [2])
    assert R.shape == (spec.jbar, spec.jbar)
    assert all(v != 0 for v in np.diag(np.array(R.data, dtype=object)))
    assert rank(R) == rank(T) == spec.jbar


def test_uscsa_rank_exhaustive(F257):
    spec = SchemeSpec.uscsa(9, 2, 2, 2, 2)
    plan = make_plan(spec, 1, F257)
    rep = collusion_audit(spec, plan, witness=False)
    assert rep.exhaustive and len(rep.rows) == 36
    assert all(r.rank_r == r.rank_t == spec.ell * spec.gbar for r in rep.rows)


def test_identity_witness(F257):
    spec = SchemeSpec.gscsa(9, 1, 2, 2, 2, 1)
    plan = make_plan(spec, 2, F257)
    rng = make_rng(3)
    A, B = inputs(spec, F257, rng)
    cs, ps = noise_shapes(spec, A.rows, A.cols, B.cols)
    noise = sample_noise(spec, F257, cs, ps, rng)
    star = secrecy_witness(spec, plan, [4], A, B, A, B, noise)
    assert np.array_equal(star.z, noise.z) and np.array_equal(star.zp, noise.zp)


@pytest.mark.parametrize("spec", [SchemeSpec.scsa(9, 2, 0), SchemeSpec.uscsa(12, 2, 2, 2, 2, 1),
                                  SchemeSpec.gscsa(12, 2, 2, 2, 2, 0)], ids=lambda s: s.label)
def test_views_match(spec):
    F = FieldConfig(257)
    plan = make_plan(spec, 5, F)
    rng = make_rng(6)
    A1, B1 = inputs(spec, F, rng)
    A2, B2 = inputs(spec, F, rng)
    cs, ps = noise_shapes(spec, A1.rows, A1.cols, B1.cols)
    noise = sample_noise(spec, F, cs, ps, rng)
    sub = [2, 7]
    star = secrecy_witness(spec, plan, sub, A1, B1, A2, B2, noise)
    assert collusion_view(A1, B1, spec, plan, noise, sub) == collusion_view(A2, B2, spec, plan, star, sub)
    # without the witness the views differ
    assert collusion_view(A1, B1, spec, plan, noise, sub) != collusion_view(A2, B2, spec, plan, noise, sub)


def test_gamma_nonzero(F257):
    from csa_sdmm.security import _gamma
    spec = SchemeSpec.uscsa(12, 2, 2, 2, 2)
    plan = make_plan(spec, 1, F257)
    for j in range(1, spec.jbar + 1):
        assert all(_gamma(spec, plan, range(1, 13), j))


def test_small_field_smoke():
    F = FieldConfig(17)
    spec = SchemeSpec.scsa(3, 1)
    plan = make_plan(spec, 0, F)
    rep = collusion_audit(spec, plan, seed=1, inner=1)
    assert rep.passed and len(rep.rows) == 3


def test_bad_plan_fails(F257):
    spec = SchemeSpec.scsa(5, 2)   # r = 1
    plan = make_plan(spec, 0, F257)
    bad = dataclasses.replace(plan, alphas=(plan.alphas[0],) * 2 + plan.alphas[2:])
    rep = collusion_audit(spec, bad, seed=0)
    assert not rep.passed
    assert any(set(r.subset) == {1, 2} for r in rep.failures)
    # a point with s + alpha = 0 makes Gamma singular for the pole s
    spec = SchemeSpec.uscsa(9, 1, 2, 2, 2)
    plan = make_plan(spec, 0, F257)
    bad = dataclasses.replace(plan, alphas=(F257.modulus - 1,) + plan.alphas[1:])
    rep = collusion_audit(spec, bad, seed=0, witness=False)
    assert not rep.passed and [r.subset for r in rep.failures] == [(1,)]


def test_sampled_budget_and_csv(F257):
    spec = SchemeSpec.scsa(15, 4)
    plan = make_plan(spec, 0, FieldConfig())
    rep = collusion_audit(spec, plan, sample_budget=25, seed=3, witness=False)
    assert not rep.exhaustive and len(rep.rows) == 25 and rep.total_subsets == 1365
    assert rep.passed
    again = collusion_audit(spec, plan, sample_budget=25, seed=3, witness=False)
    assert [r.subset for r in again.rows] == [r.subset for r in rep.rows]
    text = rep.to_csv()
    assert "seed=3" in text.splitlines()[0]
    assert text.splitlines()[1] == "subset,rankR,rankT,pass"
    assert isinstance(rep, AuditReport)
