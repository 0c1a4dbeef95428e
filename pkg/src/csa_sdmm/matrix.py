"""Dense matrices over F_p, block partitioning and multiplication kernels."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FieldMismatchError, PartitionError, ShapeError, SingularMatrixError
from .ffield import FieldConfig

DEFAULT_WS_CUTOFF = 64


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    """Immutable dense matrix of canonical residues.

    ``data`` is a row-major 2-D numpy array (int64, or object for moduli handled
    by the generic kernel). The array is marked read-only at construction.
    """

    field: FieldConfig
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ShapeError(f"matrix data must be 2-D, got {arr.ndim}-D")
        if arr.dtype != np.dtype(self.field.dtype):
            arr = self.field.array(arr)
        if arr.flags.writeable:
            arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_values(cls, field: FieldConfig, values) -> "FieldMatrix":
        """Reduce arbitrary integers (nested lists or arrays) into the field."""
        return cls(field, field.array(np.atleast_2d(np.asarray(values, dtype=object))))

    @classmethod
    def zeros(cls, field: FieldConfig, rows: int, cols: int) -> "FieldMatrix":
        return cls(field, field.zeros((rows, cols)))

    @classmethod
    def identity(cls, field: FieldConfig, n: int) -> "FieldMatrix":
        return cls(field, field.array(np.eye(n, dtype=np.int64)))

    @classmethod
    def random(cls, field: FieldConfig, rows: int, cols: int, rng: np.random.Generator) -> "FieldMatrix":
        return cls(field, field.random(rng, (rows, cols)))

    # -- shape --------------------------------------------------------------

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "FieldMatrix"):
        if not isinstance(other, FieldMatrix):
            raise TypeError(f"expected FieldMatrix, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatchError(
                f"moduli differ: {self.field.modulus} vs {other.field.modulus}"
            )

    def __add__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check(other)
        if other.shape != self.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        return FieldMatrix(self.field, self.field.add(self.data, other.data))

    def __sub__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check(other)
        if other.shape != self.shape:
            raise ShapeError(f"cannot subtract {other.shape} from {self.shape}")
        return FieldMatrix(self.field, self.field.sub(self.data, other.data))

    def __neg__(self) -> "FieldMatrix":
        return FieldMatrix(self.field, self.field.neg(self.data))

    def scale(self, c: int) -> "FieldMatrix":
        return FieldMatrix(self.field, self.field.mul(self.data, int(c) % self.field.modulus))

    def __matmul__(self, other: "FieldMatrix") -> "FieldMatrix":
        return mat_mul_naive(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return (
            self.field == other.field
            and self.shape == other.shape
            and bool(np.array_equal(self.data, other.data))
        )

    def __hash__(self):
        return hash((self.field.modulus, self.shape, self.to_bytes()))

    def __repr__(self):
        return f"FieldMatrix({self.rows}x{self.cols}, p={self.field.modulus})"

    def tolist(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.data]

    # -- wire format ----------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Two big-endian u32 (rows, cols), then little-endian u64 entries."""
        return struct.pack(">II", self.rows, self.cols) + self.field.encode_array(self.data)

    @classmethod
    def from_bytes(cls, field: FieldConfig, buf, offset: int = 0) -> tuple["FieldMatrix", int]:
        """Decode one matrix starting at ``offset``; returns (matrix, next offset)."""
        if len(buf) - offset < 8:
            raise ValueError("truncated matrix header")
        rows, cols = struct.unpack_from(">II", buf, offset)
        offset += 8
        nbytes = rows * cols * field.element_bytes
        if len(buf) - offset < nbytes:
            raise ValueError(f"truncated matrix body: need {nbytes} bytes")
        flat = field.decode_array(bytes(buf[offset:offset + nbytes]), rows * cols)
        return cls(field, flat.reshape(rows, cols)), offset + nbytes

    @property
    def wire_size(self) -> int:
        return 8 + self.size * self.field.element_bytes


@dataclass(frozen=True)
class PartitionSpec:
    """Split counts for the PART operator; ``hA`` must equal ``vB``."""

    vA: int
    hA: int
    vB: int
    hB: int

    def __post_init__(self):
        if min(self.vA, self.hA, self.vB, self.hB) < 1:
            raise PartitionError("split counts must be positive")
        if self.hA != self.vB:
            raise PartitionError(f"hA={self.hA} must equal vB={self.vB}")

    def check(self, m: int, n: int, p: int):
        for dim, name, k in ((m, "m", self.vA), (n, "n", self.hA), (p, "p", self.hB)):
            if dim % k:
                raise PartitionError(f"{name}={dim} is not divisible by {k}")


def partition(M: FieldMatrix, v: int, h: int) -> list[list[FieldMatrix]]:
    """Split ``M`` into a v-by-h grid of equal contiguous blocks (copied)."""
    if v < 1 or h < 1:
        raise PartitionError("split counts must be positive")
    if M.rows % v or M.cols % h:
        raise PartitionError(f"{M.rows}x{M.cols} cannot be split into {v}x{h} equal blocks")
    br, bc = M.rows // v, M.cols // h
    return [
        [FieldMatrix(M.field, M.data[i * br:(i + 1) * br, j * bc:(j + 1) * bc].copy()) for j in range(h)]
        for i in range(v)
    ]


def assemble(blocks: Sequence[Sequence[FieldMatrix]]) -> FieldMatrix:
    """Concatenate a grid of blocks; the inverse of :func:`partition`."""
    if not blocks or not blocks[0]:
        raise ShapeError("empty block grid")
    width = len(blocks[0])
    field = blocks[0][0].field
    for row in blocks:
        if len(row) != width:
            raise ShapeError("ragged block grid")
        h = row[0].rows
        for blk in row:
            if blk.field != field:
                raise FieldMismatchError("blocks live in different fields")
            if blk.rows != h:
                raise ShapeError("blocks in one grid row must share a height")
    for j in range(width):
        w = blocks[0][j].cols
        if any(row[j].cols != w for row in blocks):
            raise ShapeError("blocks in one grid column must share a width")
    return FieldMatrix(field, np.block([[blk.data for blk in row] for row in blocks]))


def _check_mul(A: FieldMatrix, B: FieldMatrix):
    if A.field != B.field:
        raise FieldMismatchError(f"moduli differ: {A.field.modulus} vs {B.field.modulus}")
    if A.cols != B.rows:
        raise ShapeError(f"inner dimensions differ: {A.shape} @ {B.shape}")


def mat_mul_naive(A: FieldMatrix, B: FieldMatrix) -> FieldMatrix:
    """Schoolbook product over F_p (limb-split BLAS, exact)."""
    _check_mul(A, B)
    return FieldMatrix(A.field, A.field.matmul(A.data, B.data))


def _pad_even(x: np.ndarray, field: FieldConfig) -> np.ndarray:
    r, c = x.shape
    if r % 2 == 0 and c % 2 == 0:
        return x
    out = field.zeros((r + r % 2, c + c % 2))
    out[:r, :c] = x
    return out


def _winograd(a: np.ndarray, b: np.ndarray, field: FieldConfig, cutoff: int, depth: list) -> np.ndarray:
    m, k = a.shape
    n = b.shape[1]
    if min(m, k, n) <= cutoff:
        return field.matmul(a, b)
    depth[0] += 1
    a = _pad_even(a, field)
    b = _pad_even(b, field)
    h, kh, w = a.shape[0] // 2, a.shape[1] // 2, b.shape[1] // 2
    a11, a12, a21, a22 = a[:h, :kh], a[:h, kh:], a[h:, :kh], a[h:, kh:]
    b11, b12, b21, b22 = b[:kh, :w], b[:kh, w:], b[kh:, :w], b[kh:, w:]
    add, sub = field.add, field.sub
    s1 = add(a21, a22)
    s2 = sub(s1, a11)
    s3 = sub(a11, a21)
    s4 = sub(a12, s2)
    t1 = sub(b12, b11)
    t2 = sub(b22, t1)
    t3 = sub(b22, b12)
    t4 = sub(t2, b21)
    rec = lambda x, y: _winograd(x, y, field, cutoff, depth)
    p1 = rec(a11, b11)
    p2 = rec(a12, b21)
    p3 = rec(s4, b22)
    p4 = rec(a22, t4)
    p5 = rec(s1, t1)
    p6 = rec(s2, t2)
    p7 = rec(s3, t3)
    u1 = add(p1, p2)
    u2 = add(p1, p6)
    u3 = add(u2, p7)
    u4 = add(u2, p5)
    u5 = add(u4, p3)
    u6 = sub(u3, p4)
    u7 = add(u3, p5)
    out = np.block([[u1, u5], [u6, u7]])
    return out[:m, :n]


def mat_mul_hybrid_ws(A: FieldMatrix, B: FieldMatrix, cutoff: int = DEFAULT_WS_CUTOFF) -> FieldMatrix:
    """Winograd-Strassen recursion (7 products, 15 additions) over schoolbook leaves.

    Odd dimensions are zero-padded by one at each level and stripped afterwards.
    Recursion stops once any dimension is at most ``cutoff``.
    """
    _check_mul(A, B)
    if cutoff < 1:
        raise ValueError("cutoff must be positive")
    return FieldMatrix(A.field, _winograd(A.data, B.data, A.field, cutoff, [0]))


def ws_depth(m: int, k: int, n: int, cutoff: int = DEFAULT_WS_CUTOFF) -> int:
    """Number of Winograd levels applied for an m x k by k x n product."""
    depth = 0
    while min(m, k, n) > cutoff:
        m, k, n = (m + 1) // 2, (k + 1) // 2, (n + 1) // 2
        depth += 1
    return depth


MULTIPLIERS = {
    "naive": mat_mul_naive,
    "hybridWS": mat_mul_hybrid_ws,
}


def get_multiplier(name: str):
    try:
        return MULTIPLIERS[name]
    except KeyError:
        raise ValueError(f"unknown multiplier {name!r}; choose from {sorted(MULTIPLIERS)}") from None


# -- Gaussian elimination -------------------------------------------------------


def _row_reduce(field: FieldConfig, a: np.ndarray, stop_on_singular: bool):
    """In-place Gauss-Jordan on a copy; returns (reduced array, rank, pivot cols)."""
    a = a.copy()
    if a.dtype != object and not a.flags.writeable:
        a = np.array(a)
    rows, cols = a.shape
    rank = 0
    pivots = []
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(a[rank:, c] != 0)[0]
        if nz.size == 0:
            if stop_on_singular:
                raise SingularMatrixError(f"matrix is singular (no pivot in column {c})")
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        inv = field.inv(int(a[rank, c]))
        a[rank] = field.mul(a[rank], inv)
        col = a[:, c].copy()
        col[rank] = 0
        mask = col != 0
        if mask.any():
            a[mask] = field.sub(a[mask], field.mul(col[mask][:, None], a[rank][None, :]))
        pivots.append(c)
        rank += 1
    return a, rank, pivots


def rank(M: FieldMatrix) -> int:
    return _row_reduce(M.field, M.data, stop_on_singular=False)[1]


def inverse(M: FieldMatrix) -> FieldMatrix:
    """Exact inverse by Gauss-Jordan; raises :class:`SingularMatrixError`."""
    if M.rows != M.cols:
        raise ShapeError(f"cannot invert non-square {M.shape} matrix")
    n = M.rows
    aug = np.concatenate([M.data, M.field.array(np.eye(n, dtype=np.int64))], axis=1)
    reduced, _, _ = _row_reduce(M.field, aug, stop_on_singular=True)
    return FieldMatrix(M.field, reduced[:, n:])


def solve(M: FieldMatrix, rhs: FieldMatrix) -> FieldMatrix:
    """Solve ``M X = rhs`` for square invertible ``M``."""
    if M.rows != rhs.rows:
        raise ShapeError(f"rhs has {rhs.rows} rows, expected {M.rows}")
    return mat_mul_naive(inverse(M), rhs)
