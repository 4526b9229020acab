import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpnc import gf
from bpnc.gf import FieldContext, SingularMatrixError, gaussian_eliminate, invert, mul_slow


@pytest.fixture(scope="module")
def f16():
    return FieldContext(4)


def span_size_oracle(ctx, M):
    """Brute-force row-span enumeration, independent of Gaussian elimination.

    Rows are packed into ints (one symbol per m-bit slot) so the span can be
    built with vectorized xors.  rank = log_q(|span|).
    """
    M = np.asarray(M, dtype=np.uint8)
    cols = M.shape[1]
    shifts = np.array([ctx.m * i for i in range(cols)], dtype=np.uint64)

    def pack(row):
        return int(np.bitwise_or.reduce(row.astype(np.uint64) << shifts))

    span = np.array([0], dtype=np.uint64)
    for row in M:
        multiples = np.array(
            [pack(ctx.scale_row(c, row)) for c in range(ctx.size)], dtype=np.uint64
        )
        span = np.unique(span[:, None] ^ multiples[None, :])
    n = len(span)
    r = 0
    while ctx.size**r < n:
        r += 1
    assert ctx.size**r == n
    return r


def test_mul_example(f16):
    assert f16.mul(0x2, 0x9) == 0x1


def test_mul_matches_slow_reference_exhaustive(f16):
    for a in range(16):
        for b in range(16):
            assert f16.mul(a, b) == mul_slow(a, b, 4, 0x13)


def test_annihilator_and_identity(f16):
    for a in range(16):
        assert f16.mul(a, 0) == 0
        assert f16.mul(a, 1) == a


def test_add_self_inverse(f16):
    for a in range(16):
        assert f16.add(a, a) == 0


def test_mul_inv(f16):
    for a in range(1, 16):
        assert f16.mul(a, f16.inv(a)) == 1


def test_exp_log_consistency(f16):
    for a in range(1, 16):
        assert f16.exp(f16.log(a)) == a


def test_distributivity_exhaustive(f16):
    # all 16^3 triples
    for a in range(16):
        for b in range(16):
            for c in range(16):
                lhs = f16.mul(a, f16.add(b, c))
                rhs = f16.add(f16.mul(a, b), f16.mul(a, c))
                assert lhs == rhs


def test_commutative_associative_exhaustive(f16):
    for a in range(16):
        for b in range(16):
            assert f16.mul(a, b) == f16.mul(b, a)
            for c in range(16):
                assert f16.mul(f16.mul(a, b), c) == f16.mul(a, f16.mul(b, c))


@pytest.mark.parametrize("m", range(1, 9))
def test_all_field_sizes_construct_and_invert(m):
    ctx = FieldContext(m)
    for a in range(1, ctx.size):
        assert ctx.mul(a, ctx.inv(a)) == 1


def test_rref_identity(f16):
    I = np.eye(5, dtype=np.uint8)
    rref, rk, pivots = gaussian_eliminate(f16, I)
    assert np.array_equal(rref, I)
    assert rk == 5
    assert pivots == [0, 1, 2, 3, 4]


def test_rref_gf2_example():
    ctx = FieldContext(1)
    M = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    rref, rk, _ = gaussian_eliminate(ctx, M)
    assert rk == 2
    assert np.array_equal(rref, np.eye(2, dtype=np.uint8))


def test_rref_idempotent(f16):
    rng = np.random.default_rng(7)
    for _ in range(50):
        M = rng.integers(0, 16, size=(4, 6), dtype=np.uint8)
        rref, _, _ = gaussian_eliminate(f16, M)
        again, _, _ = gaussian_eliminate(f16, rref)
        assert np.array_equal(rref, again)


def test_rank_vs_bruteforce_all_gf2_small():
    ctx = FieldContext(1)
    for n in (2, 3):
        for bits in itertools.product([0, 1], repeat=n * n):
            M = np.array(bits, dtype=np.uint8).reshape(n, n)
            assert gaussian_eliminate(ctx, M)[1] == span_size_oracle(ctx, M)


def test_rank_vs_bruteforce_random_4x4_gf16(f16):
    rng = np.random.default_rng(42)
    for _ in range(1000):
        M = rng.integers(0, 16, size=(4, 4), dtype=np.uint8)
        assert gaussian_eliminate(f16, M)[1] == span_size_oracle(f16, M)


def test_invert_identity_and_diagonal(f16):
    I = np.eye(4, dtype=np.uint8)
    assert np.array_equal(invert(f16, I), I)
    d = [3, 7, 1, 9]
    D = np.diag(np.array(d, dtype=np.uint8))
    Dinv = invert(f16, D)
    assert np.array_equal(Dinv, np.diag(np.array([f16.inv(x) for x in d], dtype=np.uint8)))


def test_invert_product_is_identity(f16):
    rng = np.random.default_rng(3)
    found = 0
    while found < 20:
        M = rng.integers(0, 16, size=(4, 4), dtype=np.uint8)
        if gaussian_eliminate(f16, M)[1] < 4:
            continue
        found += 1
        assert np.array_equal(f16.matmul(invert(f16, M), M), np.eye(4, dtype=np.uint8))


@pytest.mark.parametrize("n", [2, 4, 8])
def test_invert_succeeds_iff_full_rank(f16, n):
    rng = np.random.default_rng(100 + n)
    for _ in range(1000):
        M = rng.integers(0, 16, size=(n, n), dtype=np.uint8)
        rk = gaussian_eliminate(f16, M)[1]
        if rk == n:
            invert(f16, M)
        else:
            with pytest.raises(SingularMatrixError):
                invert(f16, M)


def test_singular_raises(f16):
    M = np.zeros((3, 3), dtype=np.uint8)
    with pytest.raises(SingularMatrixError):
        invert(f16, M)


def test_symbol_range_validated(f16):
    with pytest.raises(ValueError):
        gaussian_eliminate(f16, np.array([[16, 0], [0, 1]], dtype=np.uint8))


@given(st.binary(min_size=0, max_size=64), st.sampled_from([1, 2, 4, 8]))
@settings(max_examples=200)
def test_byte_packing_roundtrip(data, m):
    syms = gf.bytes_to_symbols(data, m)
    assert gf.symbols_to_bytes(syms, m) == data


def test_nibble_packing_high_first():
    assert list(gf.bytes_to_symbols(b"\xab", 4)) == [0xA, 0xB]
    assert gf.symbols_to_bytes([0xA, 0xB], 4) == b"\xab"


def test_matmul_matches_scalar(f16):
    rng = np.random.default_rng(5)
    A = rng.integers(0, 16, size=(3, 4), dtype=np.uint8)
    B = rng.integers(0, 16, size=(4, 5), dtype=np.uint8)
    C = f16.matmul(A, B)
    for i in range(3):
        for j in range(5):
            acc = 0
            for k in range(4):
                acc ^= f16.mul(int(A[i, k]), int(B[k, j]))
            assert C[i, j] == acc
