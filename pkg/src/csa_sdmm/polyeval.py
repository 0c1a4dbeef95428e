"""Horner and second-order Horner evaluation plus the encoding cost model.

A second-order (SO) pass evaluates ``u(x)`` and ``u(-x)`` together through
``u(x) = u_even(x**2) + x * u_odd(x**2)``.  The evaluation points are laid out
so that, for each shift ``j``, many points come in pairs with
``j + a_low = -(j + a_high)``; each such pair costs one SO pass instead of two
Horner passes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .errors import PlanConstructionError, ShapeError
from .ffield import FieldConfig, FieldElement, make_rng
from .matrix import FieldMatrix

MAX_PLAN_RETRIES = 1000


@dataclass(frozen=True)
class CostModelParams:
    """Relative cost of one scalar addition and one multiplication (sum to 1)."""

    lambda_plus: float = 0.5
    lambda_dot: float = 0.5

    def __post_init__(self):
        for name in ("lambda_plus", "lambda_dot"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if abs(self.lambda_plus + self.lambda_dot - 1.0) > 1e-9:
            raise ValueError("lambda_plus + lambda_dot must equal 1")

    @classmethod
    def from_plus(cls, lambda_plus: float) -> "CostModelParams":
        return cls(lambda_plus, 1.0 - lambda_plus)


@dataclass
class OpCounter:
    """Tally of element-level multiplications and additions."""

    mul: int = 0
    add: int = 0

    def weighted(self, params: CostModelParams) -> float:
        return params.lambda_dot * self.mul + params.lambda_plus * self.add

    def reset(self):
        self.mul = self.add = 0


# -- scalar evaluation -----------------------------------------------------------


def _check_coeffs(coeffs):
    if len(coeffs) == 0:
        raise ValueError("coefficient list must be nonempty")


def horner_eval(coeffs: Sequence[FieldElement], x: FieldElement) -> FieldElement:
    """Evaluate ``sum_k coeffs[k] * x**k`` with len(coeffs) - 1 multiply-adds."""
    _check_coeffs(coeffs)
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def so_horner_eval_pair(coeffs: Sequence[FieldElement], x: FieldElement) -> tuple[FieldElement, FieldElement]:
    """Return ``(u(x), u(-x))`` from one even/odd decomposition."""
    _check_coeffs(coeffs)
    y = x * x
    even = horner_eval(coeffs[0::2], y)
    if len(coeffs) == 1:
        return even, even
    t = x * horner_eval(coeffs[1::2], y)
    return even + t, even - t


# -- evaluation-point plans ----------------------------------------------------


def so_pair_count(N: int, jbar: int) -> int:
    """Number of additive-inverse pairs the layout yields (0 when jbar = 1)."""
    if jbar < 2:
        return 0
    return N - N // (jbar + 1) - 1


@dataclass(frozen=True)
class EvalPointPlan:
    """Evaluation points and their SO pairing.

    Attributes:
        field: field the points live in.
        alphas: the N distinct points; server ``i`` (1-based) uses ``alphas[i-1]``.
        jbar: number of polynomial families per server.
        shift_range: every point satisfies ``s + alpha != 0`` for s in 1..shift_range.
        pairs: ``(low, high, j)`` with 0-based point positions and
            ``j + alphas[low] == -(j + alphas[high])``.
        yD: full pairing blocks, ``N // (jbar + 1)``.
        nR: points in the residual block.
        seed: seed of the generator that drew the plan, when known.
    """

    field: FieldConfig
    alphas: tuple[int, ...]
    jbar: int
    shift_range: int
    pairs: tuple[tuple[int, int, int], ...]
    yD: int
    nR: int
    seed: int | None = None
    _by_shift: dict = dc_field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        by_shift: dict[int, dict[int, int]] = {}
        for low, high, j in self.pairs:
            by_shift.setdefault(j, {})[low] = high
        object.__setattr__(self, "_by_shift", by_shift)

    @property
    def N(self) -> int:
        return len(self.alphas)

    def pairs_for(self, j: int) -> dict[int, int]:
        """Map low position to high position for the pairs recorded at shift ``j``."""
        return self._by_shift.get(j, {})

    def violations(self) -> list[str]:
        """Human-readable list of broken invariants (empty for a valid plan)."""
        p = self.field.modulus
        out = []
        if len(set(self.alphas)) != len(self.alphas):
            out.append("evaluation points are not distinct")
        for i, a in enumerate(self.alphas):
            for s in range(1, self.shift_range + 1):
                if (s + a) % p == 0:
                    out.append(f"alpha[{i}] = -{s} violates G")
        for low, high, j in self.pairs:
            if (2 * j + self.alphas[low] + self.alphas[high]) % p:
                out.append(f"pair ({low}, {high}) is not additive-inverse at shift {j}")
        return out

    def to_dict(self) -> dict:
        return {
            "modulus": self.field.modulus,
            "alphas": [int(a) for a in self.alphas],
            "jbar": self.jbar,
            "shift_range": self.shift_range,
            "pairs": [list(t) for t in self.pairs],
            "yD": self.yD,
            "nR": self.nR,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalPointPlan":
        return cls(
            field=FieldConfig(d["modulus"]),
            alphas=tuple(d["alphas"]),
            jbar=d["jbar"],
            shift_range=d["shift_range"],
            pairs=tuple(tuple(t) for t in d["pairs"]),
            yD=d["yD"],
            nR=d["nR"],
            seed=d.get("seed"),
        )


def _pair_layout(N: int, jbar: int) -> tuple[list[tuple[int, int, int]], int, int]:
    """Positions of base/partner points: (pairs, yD, nR).

    Full blocks of jbar+1 points pair their first point with each of the next
    jbar at shifts 1..jbar. The residual block pairs its base with the next
    nR-1 points.  With nR = 0 the final in-block pair is dropped, so the
    total is always N - yD - 1.
    """
    yD = N // (jbar + 1)
    nR = N - yD * (jbar + 1)
    if jbar < 2:
        return [], yD, nR
    pairs = []
    for s in range(yD):
        base = s * (jbar + 1)
        pairs.extend((base, base + j, j) for j in range(1, jbar + 1))
    if nR >= 1:
        base = yD * (jbar + 1)
        pairs.extend((base, base + j, j) for j in range(1, nR))
    else:
        pairs.pop()
    return pairs, yD, nR


def build_eval_points(N: int, jbar: int, shift_range: int, rng, field: FieldConfig | None = None) -> EvalPointPlan:
    """Draw N distinct points in G with the SO pairing structure.

    Args:
        N: number of servers.
        jbar: polynomial families per server (pairing needs jbar >= 2).
        shift_range: largest shift s that must satisfy ``s + alpha != 0``.
        rng: seed or numpy Generator.
        field: defaults to F_(2^61-1).

    Raises:
        PlanConstructionError: the retry budget ran out.
    """
    field = field or FieldConfig()
    if N < 2:
        raise ValueError("N must be at least 2")
    if jbar < 1 or shift_range < 0:
        raise ValueError("jbar must be positive and shift_range non-negative")
    p = field.modulus
    if p <= 2 * (N + shift_range):
        raise ValueError(f"modulus {p} too small: need p > 2(N + shift_range) = {2 * (N + shift_range)}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = make_rng(rng)
    pairs, yD, nR = _pair_layout(N, jbar)
    partner_of = {high: (low, j) for low, high, j in pairs}
    plan = None
    for _ in range(MAX_PLAN_RETRIES):
        alphas = [0] * N
        for i in range(N):
            if i in partner_of:
                low, j = partner_of[i]
                alphas[i] = (-2 * j - alphas[low]) % p
            else:
                alphas[i] = int(rng.integers(0, p, dtype=np.int64))
        plan = EvalPointPlan(field, tuple(alphas), jbar, shift_range, tuple(pairs), yD, nR, seed)
        if not plan.violations():
            return plan
    raise PlanConstructionError(
        f"no valid evaluation points after {MAX_PLAN_RETRIES} attempts: {plan.violations()[0]}"
    )


# -- matrix polynomial evaluation ---------------------------------------------------


def _horner_arrays(field: FieldConfig, coeffs: Sequence[np.ndarray], x: int, counter: OpCounter | None):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = field.add(field.mul(acc, x), c)
    if counter is not None:
        counter.mul += (len(coeffs) - 1) * acc.size
        counter.add += (len(coeffs) - 1) * acc.size
    return acc


def _so_pair_arrays(field: FieldConfig, coeffs: Sequence[np.ndarray], x: int, counter: OpCounter | None):
    y = x * x % field.modulus  # scalar, not counted
    even = _horner_arrays(field, coeffs[0::2], y, counter)
    if len(coeffs) == 1:
        return even, even
    t = field.mul(_horner_arrays(field, coeffs[1::2], y, counter), x)
    if counter is not None:
        counter.mul += t.size
        counter.add += 2 * t.size
    return field.add(even, t), field.sub(even, t)


def eval_arrays(plan: EvalPointPlan, coeffs: Sequence[np.ndarray], j: int,
                counter: OpCounter | None = None, use_pairs: bool = True,
                only: set[int] | None = None) -> list[np.ndarray]:
    """Array-level core of :func:`matrix_poly_eval`.

    ``only`` restricts evaluation to those 0-based positions (others are None);
    a pair is evaluated jointly only when both its points are requested.
    """
    if len(coeffs) == 0:
        raise ValueError("coefficient list must be nonempty")
    shape = np.shape(coeffs[0])
    if any(np.shape(c) != shape for c in coeffs):
        raise ShapeError("all coefficient matrices must have the same shape")
    if not 1 <= j <= plan.jbar:
        raise ValueError(f"shift {j} outside 1..{plan.jbar}")
    field = plan.field
    p = field.modulus
    out: list = [None] * plan.N
    pairs = plan.pairs_for(j) if use_pairs else {}
    for low, high in pairs.items():
        if only is None or (low in only and high in only):
            out[low], out[high] = _so_pair_arrays(field, coeffs, (j + plan.alphas[low]) % p, counter)
    for i, a in enumerate(plan.alphas):
        if out[i] is None and (only is None or i in only):
            out[i] = _horner_arrays(field, coeffs, (j + a) % p, counter)
    return out


def matrix_poly_eval(plan: EvalPointPlan, coeffs: Sequence[FieldMatrix], j: int,
                     counter: OpCounter | None = None, use_pairs: bool = True) -> list[FieldMatrix]:
    """Evaluate ``sum_t coeffs[t] * (j + alpha_i)**t`` at every point of ``plan``.

    Paired points of shift ``j`` share one SO pass; the rest use Horner. When
    ``counter`` is given, element-level multiplications and additions are
    tallied (the scalar ``x**2`` is not).
    """
    if len(coeffs) == 0:
        raise ValueError("coefficient list must be nonempty")
    field = coeffs[0].field
    if field != plan.field:
        raise ValueError("coefficients and plan live in different fields")
    arrays = eval_arrays(plan, [c.data for c in coeffs], j, counter, use_pairs)
    return [FieldMatrix(field, a) for a in arrays]


# -- complexity model -------------------------------------------------------------


def cec_multiply_count(u_size: int, d: int, N: int, jbar: int) -> int:
    """Element multiplications of SO-HR over all N*jbar evaluations."""
    P = so_pair_count(N, jbar)
    return (N * jbar - P) * (d - 1) * u_size


def cec_add_count(u_size: int, d: int, N: int, jbar: int) -> int:
    """Element additions of SO-HR over all N*jbar evaluations."""
    P = so_pair_count(N, jbar)
    return (N * jbar * (d - 1) - P * (d - 2)) * u_size


def cec_hr(u_size: float, d: int, N: int, jbar: int) -> float:
    """Plain Horner cost: every evaluation takes d-1 operations per element."""
    return N * jbar * (d - 1) * u_size


def cec_so_hr_csa(u_size: float, d: int, N: int, jbar: int, params: CostModelParams) -> float:
    """Operation count of evaluating jbar matrix polynomials at N paired points.

    Equals ``(N*jbar*(d-1) - (d-1-lambda_plus)*(N-yD-1)) * u_size``.  With
    jbar = 1 no pairs exist and the plain Horner count is returned.
    """
    P = so_pair_count(N, jbar)
    return (N * jbar * (d - 1) - (d - 1 - params.lambda_plus) * P) * u_size


def _gbar(spec) -> int:
    return spec.q if spec.g == spec.f else spec.f


def scsa_enc_complexity(N: int, ell: int, b: int, sizeA: float, sizeB: float,
                        params: CostModelParams, so: bool = True) -> float:
    """Encoding cost of SCSA(b).

    b=1 evaluates (A side) length-(ell+1) polynomials of size |A| then scales by
    1/(j+alpha); the B side has size |B|/r.  b=0 mirrors.
    """
    r = N - 2 * ell
    cauchy, plain = (sizeA, sizeB / r) if b == 1 else (sizeB, sizeA / r)
    model = (lambda u: cec_so_hr_csa(u, ell + 1, N, r, params)) if so else (lambda u: cec_hr(u, ell + 1, N, r))
    return model(cauchy + plain) + params.lambda_dot * r * N * cauchy


def enc_complexity(spec, sizeA: float, sizeB: float, params: CostModelParams, so: bool = True) -> float:
    """Encoding operation count for ``spec``.

    SCSA takes the cheaper orientation. USCSA and GSCSA use the orientation
    ``spec.b``. With ``so=False`` the SO-HR term is replaced by plain Horner.
    """
    kind = spec.kind
    N, ell = spec.N, spec.ell
    if kind == "SCSA":
        return min(scsa_enc_complexity(N, ell, b, sizeA, sizeB, params, so) for b in (0, 1))
    if kind not in ("USCSA", "GSCSA"):
        raise ValueError(f"unknown scheme kind {kind!r}")
    f, q, g, b = spec.f, spec.q, spec.g, spec.b
    gb = _gbar(spec)
    if kind == "USCSA":
        u = sizeA / g + sizeB / gb if b == 0 else sizeA / gb + sizeB / g
        extra = N * (gb * sizeA + sizeB) if b == 0 else N * (sizeA + gb * sizeB)
    else:
        u = sizeA / (f * q) + sizeB if b == 0 else sizeA + sizeB / (f * q)
        extra = N * (sizeA + gb * sizeB) if b == 0 else N * (gb * sizeA + sizeB)
    core = cec_so_hr_csa(u, ell, N, gb, params) if so else cec_hr(u, ell, N, gb)
    return core + extra


def enc_gain_scsa(N: int, ell: int, r: int, sizeA: float, sizeB: float, params: CostModelParams) -> float:
    """Relative saving of SO-HR SCSA over Horner SCSA."""
    if r <= 0:
        raise ValueError("r = N - 2*ell must be positive")
    yD = N // (r + 1)
    u = max(sizeA, sizeB) / r + min(sizeA, sizeB)
    hr = N * r * ell * u + params.lambda_dot * r * N * min(sizeA, sizeB)
    return (ell - params.lambda_plus) * (N - yD - 1) * u / hr


# -- calibration --------------------------------------------------------------------


def calibrate(field: FieldConfig | None = None, size: int = 1 << 18, repeats: int = 7, seed: int = 0) -> CostModelParams:
    """Estimate lambda_plus by timing vectorized field additions against multiplications.

    The minimum over ``repeats`` runs is used for each operation.
    """
    field = field or FieldConfig()
    rng = make_rng(seed)
    x = field.random(rng, size)
    y = field.random(rng, size)

    def best(fn):
        fn(x, y)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn(x, y)
            times.append(time.perf_counter() - t0)
        return min(times)

    t_add = best(field.add)
    t_mul = best(field.mul)
    lp = t_add / (t_add + t_mul)
    lp = min(max(lp, 1e-6), 1 - 1e-6)
    return CostModelParams.from_plus(lp)
