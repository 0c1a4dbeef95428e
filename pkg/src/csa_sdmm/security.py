"""Constructive check of ell-collusion secrecy.

For a colluding set L, the Cauchy-side noise reaching L is ``(R kron I) Z`` and
the plain-side noise is ``(T kron I) Z'``, where

* ``R = blockdiag_j V(j + alpha_L)`` with ``V[t, p] = (j + alpha_t)**(p-1)``, and
* ``T = Gamma R`` with ``Gamma = blockdiag_j diag_t(prod_k (pole_k + alpha_t))``.

Both are invertible whenever the points are distinct and lie in G. Then for any
two inputs there is noise that makes the colluders' view identical, so the
view carries no information about the inputs.  The witness computes that noise
explicitly and the audit re-encodes to confirm byte equality.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .errors import SecurityViolation, SingularMatrixError
from .ffield import make_rng
from .matrix import FieldMatrix, inverse, rank
from .polyeval import EvalPointPlan
from .schemes import Noise, SchemeSpec, encode, noise_shapes, sample_noise, split_inputs

DEFAULT_AUDIT_BUDGET = 10_000


@dataclass(frozen=True)
class CollusionView:
    """Shares seen by a colluding set, as serialized bytes per server."""

    subset: tuple[int, ...]
    shares: tuple[bytes, ...]

    def __eq__(self, other):
        return isinstance(other, CollusionView) and self.subset == other.subset and self.shares == other.shares


def _vandermonde(plan: EvalPointPlan, subset: Sequence[int], j: int, ell: int) -> np.ndarray:
    p = plan.field.modulus
    rows = [[pow((j + plan.alphas[t - 1]) % p, e, p) for e in range(ell)] for t in subset]
    return plan.field.array(np.array(rows, dtype=object))


def _gamma(spec: SchemeSpec, plan: EvalPointPlan, subset: Sequence[int], j: int) -> list[int]:
    p = plan.field.modulus
    poles = spec.layout[j - 1][0]
    out = []
    for t in subset:
        a = plan.alphas[t - 1]
        g = 1
        for s in poles:
            g = g * (s + a) % p
        out.append(g)
    return out


def noise_mixing_matrices(spec: SchemeSpec, plan: EvalPointPlan, subset: Sequence[int]) -> tuple[FieldMatrix, FieldMatrix]:
    """Return (R, T), each (ell * jbar) square, rows ordered by (j, server)."""
    ell, jbar = spec.ell, spec.jbar
    if len(subset) != ell or len(set(subset)) != ell:
        raise ValueError(f"subset must hold {ell} distinct servers")
    field = plan.field
    n = ell * jbar
    R = field.zeros((n, n))
    T = field.zeros((n, n))
    for j in range(1, jbar + 1):
        V = _vandermonde(plan, subset, j, ell)
        G = field.array(np.array(_gamma(spec, plan, subset, j), dtype=object))
        sl = slice((j - 1) * ell, j * ell)
        R[sl, sl] = V
        T[sl, sl] = field.mul(G[:, None], V)
    return FieldMatrix(field, R), FieldMatrix(field, T)


def _combine(field, coeffs: np.ndarray, stack: np.ndarray) -> np.ndarray:
    """Rows of coeffs as linear combinations of the matrices in ``stack``."""
    shape = stack.shape[1:]
    flat = stack.reshape(stack.shape[0], -1)
    return field.matmul(coeffs, flat).reshape((coeffs.shape[0],) + shape)


def secrecy_witness(spec: SchemeSpec, plan: EvalPointPlan, subset: Sequence[int],
                    A1: FieldMatrix, B1: FieldMatrix, A2: FieldMatrix, B2: FieldMatrix,
                    noise: Noise) -> Noise:
    """Noise that makes the view of (A2, B2) equal the view of (A1, B1, noise).

    Raises:
        SecurityViolation: a mixing block is singular.
    """
    field = plan.field
    c1, p1 = split_inputs(spec, A1, B1)
    c2, p2 = split_inputs(spec, A2, B2)
    p = field.modulus
    z = noise.z.copy()
    zp = noise.zp.copy()
    for j, (poles, cblocks, pblock) in enumerate(spec.layout, start=1):
        V = FieldMatrix(field, _vandermonde(plan, subset, j, spec.ell))
        gam = _gamma(spec, plan, subset, j)
        try:
            Vinv = inverse(V).data
            # (Gamma V)^-1 = V^-1 Gamma^-1
            gam_inv = field.array(np.array([field.inv(x) for x in gam], dtype=object))
        except (SingularMatrixError, ZeroDivisionError) as exc:
            raise SecurityViolation(f"mixing block j={j} singular for subset {tuple(subset)}") from exc
        Winv = field.mul(Vinv, gam_inv[None, :])
        deltas = []
        for t in subset:
            a = plan.alphas[t - 1]
            d = field.zeros(c1[0].shape)
            for s, c in zip(poles, cblocks):
                d = field.add(d, field.mul(field.sub(c1[c], c2[c]), field.inv(s + a)))
            deltas.append(d)
        z[j - 1] = field.add(z[j - 1], _combine(field, Vinv, np.stack(deltas)))
        diff = field.sub(p1[pblock], p2[pblock])
        zp[j - 1] = field.add(zp[j - 1], _combine(field, Winv, np.stack([diff] * spec.ell)))
    return Noise(z, zp)


def collusion_view(A: FieldMatrix, B: FieldMatrix, spec: SchemeSpec, plan: EvalPointPlan,
                   noise: Noise, subset: Sequence[int]) -> CollusionView:
    shares = encode(A, B, spec, plan, noise=noise, servers=sorted(subset))
    return CollusionView(tuple(sorted(subset)), tuple(s.to_bytes() for s in shares))


@dataclass
class AuditRow:
    subset: tuple[int, ...]
    rank_r: int
    rank_t: int
    passed: bool


@dataclass
class AuditReport:
    spec: SchemeSpec
    seed: int
    exhaustive: bool
    total_subsets: int
    rows: list[AuditRow] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> list[AuditRow]:
        return [r for r in self.rows if not r.passed]

    def to_csv(self, comment: str | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# scheme={self.spec.label} N={self.spec.N} ell={self.spec.ell} seed={self.seed} "
                  f"exhaustive={self.exhaustive} audited={len(self.rows)}/{self.total_subsets}\n")
        if comment:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subset", "rankR", "rankT", "pass"])
        for r in self.rows:
            w.writerow([" ".join(map(str, r.subset)), r.rank_r, r.rank_t, int(r.passed)])
        return buf.getvalue()


def _subsets(N: int, ell: int, budget: int, rng) -> tuple[list[tuple[int, ...]], bool]:
    total = math.comb(N, ell)
    if total <= budget:
        return list(itertools.combinations(range(1, N + 1), ell)), True
    seen: set[tuple[int, ...]] = set()
    while len(seen) < budget:
        pick = tuple(sorted(int(v) + 1 for v in rng.choice(N, size=ell, replace=False)))
        seen.add(pick)
    return sorted(seen), False


def collusion_audit(spec: SchemeSpec, plan: EvalPointPlan, sample_budget: int = DEFAULT_AUDIT_BUDGET,
                    seed: int = 0, witness: bool = True, inner: int = 2) -> AuditReport:
    """Rank audit of every ell-subset (or a uniform sample of ``sample_budget``).

    With ``witness`` each subset also gets a simulatability check: random
    inputs (A1, B1) and (A2, B2) of the smallest divisible shape, the witness
    noise for (A2, B2), and a byte comparison of the re-encoded views.
    """
    rng = make_rng(seed)
    field = plan.field
    subsets, exhaustive = _subsets(spec.N, spec.ell, sample_budget, rng)
    report = AuditReport(spec, seed, exhaustive, math.comb(spec.N, spec.ell))
    full = spec.ell * spec.jbar
    vA, hB = spec.partition_factors
    if witness:
        A1, A2 = (FieldMatrix.random(field, vA, inner, rng) for _ in range(2))
        B1, B2 = (FieldMatrix.random(field, inner, hB, rng) for _ in range(2))
        cshape, pshape = noise_shapes(spec, vA, inner, hB)
        base_noise = sample_noise(spec, field, cshape, pshape, rng)
        reference = [s.to_bytes() for s in encode(A1, B1, spec, plan, noise=base_noise)]
    for sub in subsets:
        R, T = noise_mixing_matrices(spec, plan, sub)
        rr, rt = rank(R), rank(T)
        ok = rr == full and rt == full
        if ok and witness:
            try:
                star = secrecy_witness(spec, plan, sub, A1, B1, A2, B2, base_noise)
                view = collusion_view(A2, B2, spec, plan, star, sub)
                ok = view.shares == tuple(reference[t - 1] for t in view.subset)
            except SecurityViolation:
                ok = False
        report.rows.append(AuditRow(tuple(sub), rr, rt, ok))
    return report
