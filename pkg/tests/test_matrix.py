import numpy as np
import pytest

from csa_sdmm.errors import PartitionError, ShapeError, SingularMatrixError
from csa_sdmm.ffield import FieldConfig, make_rng
from csa_sdmm.matrix import (FieldMatrix, PartitionSpec, assemble, get_multiplier, inverse,
                             mat_mul_hybrid_ws, mat_mul_naive, partition, rank, solve, ws_depth)


def naive_oracle(A, B):
    p = A.field.modulus
    return (np.array(A.data, dtype=object) @ np.array(B.data, dtype=object)) % p


def test_f7_product(F7):
    A = FieldMatrix.from_values(F7, [[1, 2], [3, 4]])
    B = FieldMatrix.from_values(F7, [[5, 6], [0, 1]])
    assert mat_mul_naive(A, B).tolist() == [[5, 1], [1, 1]]


def test_identity_and_zero(F257, rng):
    A = FieldMatrix.random(F257, 5, 4, rng)
    assert mat_mul_naive(A, FieldMatrix.identity(F257, 4)) == A
    assert mat_mul_naive(A, FieldMatrix.zeros(F257, 4, 3)) == FieldMatrix.zeros(F257, 5, 3)


def test_immutable(F7):
    A = FieldMatrix.from_values(F7, [[1, 2]])
    with pytest.raises(ValueError):
        A.data[0, 0] = 3


def test_shape_mismatch(F7):
    with pytest.raises(ShapeError):
        mat_mul_naive(FieldMatrix.zeros(F7, 2, 3), FieldMatrix.zeros(F7, 2, 3))


def test_partition_roundtrip(F257, rng):
    M = FieldMatrix.random(F257, 4, 4, rng)
    assert partition(M, 1, 1) == [[M]]
    blocks = partition(M, 2, 2)
    assert all(b.shape == (2, 2) for row in blocks for b in row)
    assert assemble(blocks) == M
    M6 = FieldMatrix.random(F257, 6, 6, rng)
    assert assemble(partition(M6, 3, 2)) == M6
    assert assemble([[M6]]) == M6


def test_partition_errors(F257, rng):
    B = FieldMatrix.zeros(F257, 10, 1000)
    with pytest.raises(PartitionError):
        partition(B, 1, 7)
    with pytest.raises(PartitionError):
        PartitionSpec(1, 1, 1, 7).check(90, 10, 1000)
    with pytest.raises(ShapeError):
        assemble([[FieldMatrix.zeros(F257, 2, 2), FieldMatrix.zeros(F257, 3, 2)]])


def test_blockwise_product_assembles(F257, rng):
    A = FieldMatrix.random(F257, 3, 5, rng)
    B = FieldMatrix.random(F257, 5, 14, rng)
    blocks = [mat_mul_naive(A, Bj) for Bj in partition(B, 1, 7)[0]]
    assert np.array_equal(np.array(assemble([blocks]).data, dtype=object), naive_oracle(A, B))


@pytest.mark.parametrize("p", [257, 2**31 - 1, 2**61 - 1, 2**40 + 15])
def test_naive_matches_object_oracle(p):
    F = FieldConfig(p)
    rng = make_rng(7)
    A, B = FieldMatrix.random(F, 9, 33, rng), FieldMatrix.random(F, 33, 4, rng)
    assert np.array_equal(np.array(mat_mul_naive(A, B).data, dtype=object), naive_oracle(A, B))


def test_hybrid_equals_naive(F61):
    rng = make_rng(3)
    A, B = FieldMatrix.random(F61, 128, 128, rng), FieldMatrix.random(F61, 128, 128, rng)
    assert mat_mul_hybrid_ws(A, B, cutoff=32) == mat_mul_naive(A, B)
    A, B = FieldMatrix.random(F61, 37, 51, rng), FieldMatrix.random(F61, 51, 23, rng)
    assert mat_mul_hybrid_ws(A, B, cutoff=4) == mat_mul_naive(A, B)


def test_degenerate_cutoff():
    assert ws_depth(50, 50, 50, cutoff=64) == 0
    assert ws_depth(128, 128, 128, cutoff=32) == 2


def test_registry():
    assert get_multiplier("naive") is mat_mul_naive
    assert get_multiplier("hybridWS") is mat_mul_hybrid_ws
    with pytest.raises(ValueError):
        get_multiplier("fft")


def test_linear_algebra(F257, rng):
    M = FieldMatrix.random(F257, 6, 6, rng)
    assert rank(M) == 6
    assert mat_mul_naive(M, inverse(M)) == FieldMatrix.identity(F257, 6)
    rhs = FieldMatrix.random(F257, 6, 2, rng)
    assert mat_mul_naive(M, solve(M, rhs)) == rhs
    S = FieldMatrix.from_values(F257, [[1, 2], [2, 4]])
    assert rank(S) == 1
    with pytest.raises(SingularMatrixError):
        inverse(S)


def test_wire_roundtrip(F61, rng):
    A = FieldMatrix.random(F61, 3, 4, rng)
    buf = b"xx" + A.to_bytes()
    B, off = FieldMatrix.from_bytes(F61, buf, 2)
    assert B == A and off == len(buf) == 2 + A.wire_size
