"""Exact arithmetic over a prime field F_p.

Scalars are :class:`FieldElement` objects; matrices and batches of scalars are
plain ``numpy`` arrays holding canonical residues, manipulated through the
vectorized kernels on :class:`FieldConfig` (``add``, ``mul``, ``matmul``, ...).

Three kernels are selected from the modulus:

* ``small``: p < 2**31, products fit in int64 directly.
* ``mersenne61``: p = 2**61 - 1, 32-bit split products with shift-fold reduction.
* ``generic``: any other prime below 2**63, backed by object arrays of Python ints.

Matrix products split operands into limbs small enough that a float64 BLAS
product is exact (every partial sum stays below 2**53), then recombine the limb
products modulo p.  No step is probabilistic or rounded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Sequence

import numpy as np
from sympy import isprime

from .errors import FieldMismatchError

MERSENNE_61 = (1 << 61) - 1
ELEMENT_BYTES = 8

_U61 = np.uint64(MERSENNE_61)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK29 = np.uint64((1 << 29) - 1)
_S3 = np.uint64(3)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)

_FLOAT_EXACT = 1 << 53
_LIMB_BITS = 21
_SMALL_BATCH = 128


def _mul_m61(a, b):
    """Elementwise product modulo 2**61 - 1 on canonical int64 inputs."""
    a = np.asarray(a, dtype=np.int64).view(np.uint64)
    b = np.asarray(b, dtype=np.int64).view(np.uint64)
    a_lo, a_hi = a & _MASK32, a >> _S32
    b_lo, b_hi = b & _MASK32, b >> _S32
    ll = a_lo * b_lo
    mid = a_hi * b_lo + a_lo * b_hi
    hh = a_hi * b_hi
    # 2**61 == 1 and 2**64 == 8 (mod p)
    r = (ll & _U61) + (ll >> _S61)
    r = r + (mid >> _S29) + ((mid & _MASK29) << _S32)
    r = r + (hh << _S3)
    r = (r & _U61) + (r >> _S61)
    r = np.where(r >= _U61, r - _U61, r)
    return r.view(np.int64)


@dataclass(frozen=True)
class FieldConfig:
    """A prime field F_p.

    Args:
        modulus: prime p with 2 < p < 2**63. Defaults to the Mersenne prime
            2**61 - 1, which gives fast reduction and fits the 8-byte wire width.
    """

    modulus: int = MERSENNE_61
    element_bytes: int = dc_field(default=ELEMENT_BYTES, compare=False)

    def __post_init__(self):
        p = self.modulus
        if not isinstance(p, (int, np.integer)) or isinstance(p, bool):
            raise TypeError(f"modulus must be an integer, got {type(p).__name__}")
        object.__setattr__(self, "modulus", int(p))
        if not 2 < p < (1 << 63):
            raise ValueError(f"modulus must satisfy 2 < p < 2**63, got {p}")
        if not isprime(p):
            raise ValueError(f"modulus {p} is not prime")

    def __repr__(self):
        return f"FieldConfig(modulus={self.modulus})"

    # -- scalar side ---------------------------------------------------------

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(int(value) % self.modulus, self)

    def elements(self, values: Iterable[int]) -> list["FieldElement"]:
        return [self(v) for v in values]

    def inv(self, value: int) -> int:
        value %= self.modulus
        if value == 0:
            raise ZeroDivisionError("0 has no inverse in F_p")
        return pow(value, -1, self.modulus)

    # -- array side ----------------------------------------------------------

    @property
    def kernel(self) -> str:
        if self.modulus < (1 << 31):
            return "small"
        if self.modulus == MERSENNE_61:
            return "mersenne61"
        return "generic"

    @property
    def dtype(self):
        return object if self.kernel == "generic" else np.int64

    def array(self, values) -> np.ndarray:
        """Canonical residues of ``values`` as an array of this field's dtype."""
        arr = np.asarray(values)
        if arr.dtype == object or not np.issubdtype(arr.dtype, np.integer):
            arr = np.vectorize(lambda v: int(v) % self.modulus, otypes=[object])(arr) if arr.size else arr.astype(object)
        elif arr.dtype == np.uint64:
            arr = arr % np.uint64(self.modulus)
        else:
            arr = np.mod(arr.astype(np.int64), self.modulus)
        return arr.astype(self.dtype)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype) if self.dtype is not object else np.zeros(shape, dtype=np.int64).astype(object)

    def random(self, rng: np.random.Generator, shape) -> np.ndarray:
        arr = rng.integers(0, self.modulus, size=shape, dtype=np.int64)
        return arr if self.dtype is not object else arr.astype(object)

    def add(self, a, b):
        if self.kernel == "generic":
            return (a + b) % self.modulus
        s = np.add(a, b, dtype=np.int64)
        return np.where(s >= self.modulus, s - self.modulus, s)

    def sub(self, a, b):
        if self.kernel == "generic":
            return (a - b) % self.modulus
        d = np.subtract(a, b, dtype=np.int64)
        return np.where(d < 0, d + self.modulus, d)

    def neg(self, a):
        if self.kernel == "generic":
            return (-a) % self.modulus
        a = np.asarray(a, dtype=np.int64)
        return np.where(a == 0, a, self.modulus - a)

    def mul(self, a, b):
        """Elementwise product; either operand may be a scalar."""
        kernel = self.kernel
        if kernel == "small":
            return np.multiply(a, b, dtype=np.int64) % self.modulus
        if kernel == "mersenne61":
            if np.size(a) <= _SMALL_BATCH and np.size(b) <= _SMALL_BATCH:
                # python ints beat the split kernel's fixed ufunc overhead here
                prod = (np.asarray(a).astype(object) * np.asarray(b).astype(object)) % self.modulus
                return np.asarray(prod).astype(np.int64)
            return _mul_m61(a, b)
        return (np.asarray(a, dtype=object) * b) % self.modulus

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Exact matrix product of canonical residue arrays."""
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"inner dimensions differ: {a.shape} @ {b.shape}")
        p = self.modulus
        if self.kernel == "generic":
            return np.dot(a.astype(object), b.astype(object)) % p
        m, k = a.shape
        n = b.shape[1]
        out = np.zeros((m, n), dtype=np.int64)
        if k == 0 or m == 0 or n == 0:
            return out
        bits = (p - 1).bit_length()
        if (p - 1) ** 2 < _FLOAT_EXACT >> 5:
            width, limbs = bits, 1
        else:
            width = _LIMB_BITS
            limbs = -(-bits // width)
        chunk = max(1, (_FLOAT_EXACT - 1) // ((1 << width) - 1) ** 2)
        mask = (1 << width) - 1
        shifts = [pow(2, width * s, p) for s in range(2 * limbs - 1)]
        for start in range(0, k, chunk):
            a_c = a[:, start:start + chunk]
            b_c = b[start:start + chunk]
            if limbs == 1:
                part = (a_c.astype(np.float64) @ b_c.astype(np.float64)).astype(np.int64) % p
                out = self.add(out, part)
                continue
            b_cat = np.concatenate(
                [((b_c >> (width * j)) & mask).astype(np.float64) for j in range(limbs)], axis=1
            )
            acc = [None] * (2 * limbs - 1)
            for i in range(limbs):
                a_limb = ((a_c >> (width * i)) & mask).astype(np.float64)
                prod = a_limb @ b_cat
                for j in range(limbs):
                    block = prod[:, j * n:(j + 1) * n].astype(np.int64) % p
                    s = i + j
                    acc[s] = block if acc[s] is None else self.add(acc[s], block)
            part = acc[0]
            for s in range(1, 2 * limbs - 1):
                part = self.add(part, self.mul(acc[s], shifts[s]))
            out = self.add(out, part)
        return out

    # -- serialization -------------------------------------------------------

    def encode_array(self, arr: np.ndarray) -> bytes:
        """Row-major little-endian 8-byte encoding of every entry."""
        return np.ascontiguousarray(np.asarray(arr).astype("<u8")).tobytes()

    def decode_array(self, buf: bytes, count: int) -> np.ndarray:
        raw = np.frombuffer(buf, dtype="<u8", count=count)
        if raw.size and int(raw.max()) >= self.modulus:
            raise ValueError("encoded element is not a canonical residue")
        out = raw.astype(np.int64)
        return out if self.dtype is not object else out.astype(object)


@dataclass(frozen=True)
class FieldElement:
    """A canonical residue ``value`` in ``field``."""

    value: int
    field: FieldConfig

    def __post_init__(self):
        if not 0 <= self.value < self.field.modulus:
            raise ValueError(f"{self.value} is not canonical modulo {self.field.modulus}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldMismatchError(
                    f"moduli differ: {self.field.modulus} vs {other.field.modulus}"
                )
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other) % self.field.modulus
        return NotImplemented

    def _new(self, value: int) -> "FieldElement":
        return FieldElement(value % self.field.modulus, self.field)

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.value)

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return FieldElement(pow(self.value, exponent, self.field.modulus), self.field)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * self._new(o).inverse()

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __repr__(self):
        return f"F{self.field.modulus}({self.value})"

    def to_bytes(self) -> bytes:
        return encode_element(self)


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "neg": lambda a, b: -a,
    "pow": lambda a, b: a ** (b.value if isinstance(b, FieldElement) else b),
}


def field_arith(a: FieldElement, b, op: str) -> FieldElement:
    """Apply ``op`` in {add, sub, mul, neg, pow}; ``b`` is ignored for neg."""
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown field operation {op!r}") from None
    if op not in ("neg", "pow") and isinstance(b, FieldElement) and b.field != a.field:
        raise FieldMismatchError(f"moduli differ: {a.field.modulus} vs {b.field.modulus}")
    return fn(a, b)


def field_inverse(a: FieldElement) -> FieldElement:
    return a.inverse()


def make_rng(seed) -> np.random.Generator:
    """PCG64 stream; identical across platforms for the same seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sample_uniform(field: FieldConfig, rng: np.random.Generator, exclude: Sequence[int] = ()) -> FieldElement:
    """Uniform draw from F_p minus ``exclude`` by rejection."""
    excluded = {int(v) % field.modulus for v in exclude}
    if len(excluded) >= field.modulus:
        raise ValueError("exclusion set covers the whole field")
    while True:
        v = int(rng.integers(0, field.modulus, dtype=np.int64))
        if v not in excluded:
            return FieldElement(v, field)


def encode_element(a: FieldElement) -> bytes:
    return struct.pack("<Q", a.value)


def decode_element(field: FieldConfig, buf: bytes) -> FieldElement:
    (value,) = struct.unpack("<Q", buf[:ELEMENT_BYTES])
    return FieldElement(value, field)
