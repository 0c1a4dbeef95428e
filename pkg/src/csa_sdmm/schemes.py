"""Encoding, server computation and decoding for SCSA, USCSA and GSCSA.

All three schemes share one structure.  For each group ``j`` in 1..jbar, one
matrix is the *Cauchy side*, a sum of blocks ``C_k / (pole_k + alpha)`` plus a
noise polynomial in ``(j + alpha)``, and the other is the *plain side*, a block
plus a noise polynomial scaled by the product of ``(pole_k + alpha)``.  The
server product then places every desired block product on its own Cauchy pole,
and the noise products land on low powers of alpha.  Decoding inverts the
Cauchy-Vandermonde system built from any Q points.

Orientation ``b`` chooses which of A and B carries the Cauchy side:

=============  ==============  ===========================
scheme         split (vA, hB)  Cauchy side
=============  ==============  ===========================
SCSA(0)        (r, 1)          B
SCSA(1)        (1, r)          A
USCSA(f,q,g,0) (g, gbar)       A, g poles per group
USCSA(f,q,g,1) (gbar, g)       B, g poles per group
GSCSA(f,q,g,0) (fq, 1)         A, g of the fq blocks per group
GSCSA(f,q,g,1) (1, fq)         B, g of the fq blocks per group
=============  ==============  ===========================
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (InfeasibleSchemeError, InsufficientResponsesError, PartitionError,
                     ShapeError)
from .ffield import FieldConfig, make_rng
from .matrix import (FieldMatrix, assemble, get_multiplier, inverse, mat_mul_naive,
                     partition)
from .polyeval import EvalPointPlan, OpCounter, build_eval_points, eval_arrays

KINDS = ("SCSA", "USCSA", "GSCSA")


@dataclass(frozen=True)
class SchemeSpec:
    """One scheme instance.

    Args:
        kind: "SCSA", "USCSA" or "GSCSA".
        N: number of servers.
        ell: collusion parameter.
        b: orientation bit.
        f, q: partition factors (USCSA/GSCSA only).
        g: group size, one of f or q (USCSA/GSCSA only).
    """

    kind: str
    N: int
    ell: int
    b: int = 1
    f: int | None = None
    q: int | None = None
    g: int | None = None

    def __post_init__(self):
        kind = str(self.kind).upper()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.b not in (0, 1):
            raise ValueError(f"b must be 0 or 1, got {self.b}")
        if self.N < 2 or self.ell < 1:
            raise ValueError("need N >= 2 and ell >= 1")
        if kind == "SCSA":
            if self.N - 2 * self.ell < 1:
                raise InfeasibleSchemeError(
                    f"SCSA needs r = N - 2*ell >= 1, got N={self.N}, ell={self.ell}"
                )
            return
        if self.f is None or self.q is None or self.g is None:
            raise ValueError(f"{kind} requires f, q and g")
        if self.f < 1 or self.q < 1:
            raise ValueError("f and q must be positive")
        if self.g not in (self.f, self.q):
            raise ValueError(f"g={self.g} must equal f={self.f} or q={self.q}")
        Q = self.f * self.q + self.g + 2 * self.ell - 1
        if Q > self.N:
            raise InfeasibleSchemeError(
                f"recovery threshold fq+g+2*ell-1 = {Q} exceeds N = {self.N}"
            )

    # -- constructors -------------------------------------------------------

    @classmethod
    def scsa(cls, N: int, ell: int, b: int = 1) -> "SchemeSpec":
        return cls("SCSA", N, ell, b)

    @classmethod
    def uscsa(cls, N: int, ell: int, f: int, q: int, g: int, b: int = 0) -> "SchemeSpec":
        return cls("USCSA", N, ell, b, f, q, g)

    @classmethod
    def gscsa(cls, N: int, ell: int, f: int, q: int, g: int, b: int = 0) -> "SchemeSpec":
        return cls("GSCSA", N, ell, b, f, q, g)

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeSpec":
        return cls(d["kind"], d["N"], d["ell"], d.get("b", 1), d.get("f"), d.get("q"), d.get("g"))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "N": self.N, "ell": self.ell, "b": self.b}
        if self.kind != "SCSA":
            d.update(f=self.f, q=self.q, g=self.g)
        return d

    # -- derived quantities ---------------------------------------------------

    @property
    def label(self) -> str:
        if self.kind == "SCSA":
            return f"SCSA({self.b})"
        return f"{self.kind}({self.f},{self.q},{self.g},{self.b})"

    @property
    def r(self) -> int:
        return self.N - 2 * self.ell

    @property
    def gbar(self) -> int:
        """The factor of {f, q} that is not g (equal to g when f = q)."""
        if self.kind == "SCSA":
            return self.r
        return self.q if self.g == self.f else self.f

    @property
    def group(self) -> int:
        """Cauchy terms per group (1 for SCSA)."""
        return 1 if self.kind == "SCSA" else self.g

    @property
    def jbar(self) -> int:
        return self.r if self.kind == "SCSA" else self.gbar

    @property
    def num_desired(self) -> int:
        """Number of desired block products (Cauchy columns of the decoder)."""
        return self.r if self.kind == "SCSA" else self.f * self.q

    @property
    def shift_range(self) -> int:
        return self.num_desired

    @property
    def Q(self) -> int:
        return recovery_threshold(self)

    @property
    def partition_factors(self) -> tuple[int, int]:
        """(vA, hB): row blocks of A and column blocks of B."""
        if self.kind == "SCSA":
            return (1, self.r) if self.b == 1 else (self.r, 1)
        if self.kind == "USCSA":
            return (self.g, self.gbar) if self.b == 0 else (self.gbar, self.g)
        fq = self.f * self.q
        return (fq, 1) if self.b == 0 else (1, fq)

    @property
    def cauchy_on_a(self) -> bool:
        return self.b == 1 if self.kind == "SCSA" else self.b == 0

    @cached_property
    def layout(self) -> tuple[tuple[tuple[int, ...], tuple[int, ...], int], ...]:
        """Per group j: (poles, Cauchy block indices, plain block index)."""
        groups = []
        g = self.group
        for j in range(1, self.jbar + 1):
            poles = tuple(k + (j - 1) * g for k in range(1, g + 1))
            if self.kind == "GSCSA":
                cblocks = tuple(s - 1 for s in poles)
                pblock = 0
            else:
                cblocks = tuple(range(g))
                pblock = j - 1
            groups.append((poles, cblocks, pblock))
        return tuple(groups)

    @cached_property
    def pole_positions(self) -> tuple[tuple[int, int], ...]:
        """Output-grid (row, col) of the desired product on pole s = 1..P."""
        pos = {}
        for poles, cblocks, pblock in self.layout:
            for s, c in zip(poles, cblocks):
                pos[s] = (c, pblock) if self.cauchy_on_a else (pblock, c)
        return tuple(pos[s] for s in range(1, self.num_desired + 1))


def recovery_threshold(spec: SchemeSpec) -> int:
    """Q: N for SCSA, fq + g + 2*ell - 1 otherwise."""
    if spec.kind == "SCSA":
        return spec.r + 2 * spec.ell
    return spec.f * spec.q + spec.g + 2 * spec.ell - 1


def make_plan(spec: SchemeSpec, rng, field: FieldConfig | None = None) -> EvalPointPlan:
    """Evaluation points sized for ``spec``."""
    return build_eval_points(spec.N, spec.jbar, spec.shift_range, rng, field)


# -- shares and observations ---------------------------------------------------


@dataclass(frozen=True)
class ServerShare:
    """Encoded pairs ``(A~(j), B~(j))`` for one server (1-based index)."""

    server_index: int
    pairs: tuple[tuple[FieldMatrix, FieldMatrix], ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if not self.pairs:
            raise ShapeError("a share needs at least one pair")
        a_shape = self.pairs[0][0].shape
        b_shape = self.pairs[0][1].shape
        for a, b in self.pairs:
            if a.shape != a_shape or b.shape != b_shape:
                raise ShapeError("all pairs of one share must have equal shapes")
        if a_shape[1] != b_shape[0]:
            raise ShapeError(f"inner dimensions differ: {a_shape} @ {b_shape}")

    @property
    def field(self) -> FieldConfig:
        return self.pairs[0][0].field

    @property
    def symbols(self) -> int:
        return sum(a.size + b.size for a, b in self.pairs)

    def to_bytes(self) -> bytes:
        if len(self.pairs) > 255:
            raise ValueError("pair count does not fit in one byte")
        head = struct.pack(">IB", self.server_index, len(self.pairs))
        return head + b"".join(a.to_bytes() + b.to_bytes() for a, b in self.pairs)

    @classmethod
    def from_bytes(cls, field: FieldConfig, buf: bytes) -> "ServerShare":
        if len(buf) < 5:
            raise ValueError("truncated share header")
        index, count = struct.unpack_from(">IB", buf, 0)
        offset = 5
        pairs = []
        for _ in range(count):
            a, offset = FieldMatrix.from_bytes(field, buf, offset)
            b, offset = FieldMatrix.from_bytes(field, buf, offset)
            pairs.append((a, b))
        if offset != len(buf):
            raise ValueError("trailing bytes after share")
        return cls(index, tuple(pairs))


@dataclass(frozen=True)
class ServerObservation:
    server_index: int
    O: FieldMatrix

    def to_bytes(self) -> bytes:
        return struct.pack(">I", self.server_index) + self.O.to_bytes()

    @classmethod
    def from_bytes(cls, field: FieldConfig, buf: bytes) -> "ServerObservation":
        if len(buf) < 4:
            raise ValueError("truncated observation header")
        (index,) = struct.unpack_from(">I", buf, 0)
        O, offset = FieldMatrix.from_bytes(field, buf, 4)
        if offset != len(buf):
            raise ValueError("trailing bytes after observation")
        return cls(index, O)


# -- encoding -----------------------------------------------------------------------


@dataclass(frozen=True)
class Noise:
    """Noise coefficients: ``z[j-1, p-1]`` (Cauchy side), ``zp[j-1, p-1]`` (plain side)."""

    z: np.ndarray
    zp: np.ndarray


def split_inputs(spec: SchemeSpec, A: FieldMatrix, B: FieldMatrix):
    """Return (Cauchy-side blocks, plain-side blocks) as arrays."""
    if A.field != B.field:
        raise ValueError("A and B live in different fields")
    if A.cols != B.rows:
        raise ShapeError(f"inner dimensions differ: {A.shape} @ {B.shape}")
    vA, hB = spec.partition_factors
    if A.rows % vA:
        raise PartitionError(f"{spec.label} needs m divisible by {vA}, got m={A.rows}")
    if B.cols % hB:
        raise PartitionError(f"{spec.label} needs p divisible by {hB}, got p={B.cols}")
    a_blocks = [row[0].data for row in partition(A, vA, 1)]
    b_blocks = [blk.data for blk in partition(B, 1, hB)[0]]
    return (a_blocks, b_blocks) if spec.cauchy_on_a else (b_blocks, a_blocks)


def sample_noise(spec: SchemeSpec, field: FieldConfig, cauchy_shape, plain_shape, rng) -> Noise:
    """All Cauchy-side noise (j, p) first, then all plain-side noise."""
    rng = make_rng(rng)
    z = field.random(rng, (spec.jbar, spec.ell) + tuple(cauchy_shape))
    zp = field.random(rng, (spec.jbar, spec.ell) + tuple(plain_shape))
    return Noise(z, zp)


def noise_shapes(spec: SchemeSpec, m: int, n: int, p: int) -> tuple[tuple[int, int], tuple[int, int]]:
    vA, hB = spec.partition_factors
    a_shape, b_shape = (m // vA, n), (n, p // hB)
    return (a_shape, b_shape) if spec.cauchy_on_a else (b_shape, a_shape)


def _check_plan(spec: SchemeSpec, plan: EvalPointPlan, field: FieldConfig):
    if plan.field != field:
        raise ValueError("plan and matrices live in different fields")
    if plan.N != spec.N:
        raise ValueError(f"plan has {plan.N} points, scheme needs {spec.N}")
    if plan.jbar != spec.jbar:
        raise ValueError(f"plan built for jbar={plan.jbar}, scheme needs {spec.jbar}")
    if plan.shift_range < spec.shift_range:
        raise ValueError(f"plan shift range {plan.shift_range} < required {spec.shift_range}")


def encode(A: FieldMatrix, B: FieldMatrix, spec: SchemeSpec, plan: EvalPointPlan, rng=None,
           noise: Noise | None = None, counter: OpCounter | None = None,
           use_pairs: bool = True, servers: Sequence[int] | None = None) -> list[ServerShare]:
    """Encode (A, B) into one share per server.

    Args:
        A, B: the private inputs.
        spec: scheme instance.
        plan: evaluation points built for ``spec``.
        rng: seed or Generator for fresh noise (ignored when ``noise`` is given).
        noise: explicit noise coefficients, used by the secrecy witness.
        counter: optional tally of element multiplications and additions.
        use_pairs: disable to encode with plain Horner everywhere.
        servers: 1-based indices to emit (default all).
    """
    field = A.field
    _check_plan(spec, plan, field)
    cauchy, plain = split_inputs(spec, A, B)
    if noise is None:
        noise = sample_noise(spec, field, cauchy[0].shape, plain[0].shape, rng)
    p = field.modulus
    want = range(spec.N) if servers is None else sorted({i - 1 for i in servers})
    wanted = set(want)
    only = None if servers is None else wanted
    per_server: list[list] = [[] for _ in range(spec.N)]
    scsa = spec.kind == "SCSA"
    for j, (poles, cblocks, pblock) in enumerate(spec.layout, start=1):
        z = list(noise.z[j - 1])
        zp = list(noise.zp[j - 1])
        if scsa:
            # (1/x)(C + sum_k x^k Z_k) and P_j + sum_k x^k Z'_k
            x_side = eval_arrays(plan, [cauchy[cblocks[0]]] + z, j, counter, use_pairs, only)
            y_side = eval_arrays(plan, [plain[pblock]] + zp, j, counter, use_pairs, only)
        else:
            x_side = eval_arrays(plan, z, j, counter, use_pairs, only)
            y_side = eval_arrays(plan, zp, j, counter, use_pairs, only)
        for i in want:
            a = plan.alphas[i]
            if scsa:
                X = field.mul(x_side[i], field.inv(j + a))
                Y = y_side[i]
                if counter is not None:
                    counter.mul += X.size
            else:
                X = x_side[i]
                gamma = 1
                for s, c in zip(poles, cblocks):
                    X = field.add(X, field.mul(cauchy[c], field.inv(s + a)))
                    gamma = gamma * (s + a) % p
                Y = field.add(field.mul(y_side[i], gamma), plain[pblock])
                if counter is not None:
                    counter.mul += len(poles) * X.size + Y.size
                    counter.add += len(poles) * X.size + Y.size
            pair = (X, Y) if spec.cauchy_on_a else (Y, X)
            per_server[i].append(pair)
    return [
        ServerShare(i + 1, tuple((FieldMatrix(field, a), FieldMatrix(field, b)) for a, b in per_server[i]))
        for i in range(spec.N) if i in wanted
    ]


def _encode_kind(kind: str):
    def fn(A, B, spec, plan, rng=None, **kwargs):
        if spec.kind != kind:
            raise ValueError(f"expected a {kind} spec, got {spec.label}")
        return encode(A, B, spec, plan, rng, **kwargs)

    fn.__name__ = f"{kind.lower()}_encode"
    fn.__doc__ = f"Encode with {kind}; see :func:`encode`."
    return fn


scsa_encode = _encode_kind("SCSA")
uscsa_encode = _encode_kind("USCSA")
gscsa_encode = _encode_kind("GSCSA")


# -- server -----------------------------------------------------------------------


def server_compute(share: ServerShare, multiplier: str = "naive") -> ServerObservation:
    """Honest server: O = sum_j A~(j) B~(j)."""
    mul = get_multiplier(multiplier)
    acc = None
    for a, b in share.pairs:
        prod = mul(a, b)
        acc = prod if acc is None else acc + prod
    return ServerObservation(share.server_index, acc)


# -- decoding -----------------------------------------------------------------------


def build_decoding_matrix(spec: SchemeSpec, plan: EvalPointPlan, subset: Sequence[int]) -> FieldMatrix:
    """Q x Q Cauchy-Vandermonde matrix for the 1-based server ``subset``.

    Row i is [1/(1+a_i), ..., 1/(P+a_i), 1, a_i, ..., a_i^(Q-P-1)].
    """
    Q = recovery_threshold(spec)
    if len(subset) != Q:
        raise InsufficientResponsesError(f"decoding matrix needs {Q} servers, got {len(subset)}")
    if len(set(subset)) != Q:
        raise ValueError("subset indices must be distinct")
    field = plan.field
    p = field.modulus
    P = spec.num_desired
    rows = []
    for i in subset:
        a = plan.alphas[i - 1]
        rows.append([field.inv(s + a) for s in range(1, P + 1)] + [pow(a, t, p) for t in range(Q - P)])
    return FieldMatrix(field, field.array(np.array(rows, dtype=object)))


def _select(spec: SchemeSpec, observations: Sequence[ServerObservation]) -> list[ServerObservation]:
    Q = recovery_threshold(spec)
    by_index = {}
    for obs in observations:
        if not 1 <= obs.server_index <= spec.N:
            raise ValueError(f"server index {obs.server_index} outside 1..{spec.N}")
        if obs.server_index in by_index:
            raise ValueError(f"duplicate observation from server {obs.server_index}")
        by_index[obs.server_index] = obs
    if len(by_index) < Q:
        raise InsufficientResponsesError(f"need {Q} observations, got {len(by_index)}")
    chosen = [by_index[i] for i in sorted(by_index)[:Q]]
    shape = chosen[0].O.shape
    if any(o.O.shape != shape for o in chosen):
        raise ShapeError("observations have inconsistent shapes")
    return chosen


def decode_components(spec: SchemeSpec, plan: EvalPointPlan,
                      observations: Sequence[ServerObservation]) -> list[FieldMatrix]:
    """Solve for all Q unknowns: P desired blocks then Q-P interference blocks."""
    chosen = _select(spec, observations)
    field = plan.field
    D = build_decoding_matrix(spec, plan, [o.server_index for o in chosen])
    shape = chosen[0].O.shape
    stack = np.stack([o.O.data.reshape(-1) for o in chosen])
    X = field.matmul(inverse(D).data, stack)
    return [FieldMatrix(field, X[t].reshape(shape)) for t in range(X.shape[0])]


def decode(spec: SchemeSpec, plan: EvalPointPlan, observations: Sequence[ServerObservation]) -> FieldMatrix:
    """Recover AB from at least Q observations (the lowest Q indices are used)."""
    parts = decode_components(spec, plan, observations)
    vA, hB = spec.partition_factors
    grid: list[list] = [[None] * hB for _ in range(vA)]
    for s, (r, c) in enumerate(spec.pole_positions):
        grid[r][c] = parts[s]
    return assemble(grid)


def run_pipeline(A: FieldMatrix, B: FieldMatrix, spec: SchemeSpec, seed=0,
                 multiplier: str = "naive", subset: Sequence[int] | None = None) -> FieldMatrix:
    """Plan, encode, compute and decode in process; convenience for tests and demos."""
    rng = make_rng(seed)
    plan = make_plan(spec, rng, A.field)
    shares = encode(A, B, spec, plan, rng)
    obs = [server_compute(s, multiplier) for s in shares]
    if subset is not None:
        keep = set(subset)
        obs = [o for o in obs if o.server_index in keep]
    return decode(spec, plan, obs)


__all__ = [
    "SchemeSpec", "ServerShare", "ServerObservation", "Noise", "recovery_threshold",
    "make_plan", "sample_noise", "noise_shapes", "encode", "scsa_encode", "uscsa_encode",
    "gscsa_encode", "server_compute", "build_decoding_matrix", "decode", "decode_components",
    "run_pipeline", "mat_mul_naive",
]
