import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amqsec.oracle import (
    CoinSource,
    FunctionOracle,
    derive_bits,
    derive_index_vector,
    evaluate,
    splitmix64_next,
)

KEY = "000102030405060708090a0b0c0d0e0f"
KEY256 = KEY + "101112131415161718191a1b1c1d1e1f"


def chi2_critical(df: int, p: float = 0.999) -> float:
    # Wilson-Hilferty approximation; accurate to well under 1% for df >= 5,
    # which is plenty for a p=0.001 smoke threshold.
    z = 3.0902  # N(0,1) quantile at 0.999
    return df * (1 - 2 / (9 * df) + z * math.sqrt(2 / (9 * df))) ** 3


def test_splitmix64_reference_vectors():
    s = 0
    outs = []
    for _ in range(3):
        s, z = splitmix64_next(s)
        outs.append(z)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


class TestFunctionOracle:
    def test_keyed_deterministic(self):
        a = FunctionOracle("keyed", key=KEY)
        b = FunctionOracle("keyed", key=KEY)
        assert evaluate(a, b"hello") == evaluate(b, b"hello")
        assert evaluate(a, b"hello") == evaluate(a, b"hello")

    def test_random_memoized(self):
        o = FunctionOracle("random", seed=1)
        assert evaluate(o, b"x") == evaluate(o, b"x")
        assert evaluate(o, b"x") != evaluate(o, b"y")

    def test_output_len(self):
        for n in (1, 16, 32, 64, 200):
            o = FunctionOracle("keyed", key=KEY, output_len=n)
            assert len(evaluate(o, b"z")) == n

    def test_call_count(self):
        o = FunctionOracle("random", seed=3)
        evaluate(o, b"a")
        evaluate(o, b"a")
        derive_index_vector(o, b"a", 16, 2)
        derive_bits(o, b"a", 8, 1)
        assert o.call_count == 4

    def test_distinct_keys_differ(self):
        a = FunctionOracle("keyed", key=KEY)
        b = FunctionOracle("keyed", key=KEY256)
        assert evaluate(a, b"x") != evaluate(b, b"x")

    def test_key_validation(self):
        with pytest.raises(ValueError):
            FunctionOracle("keyed", key="0011")
        with pytest.raises(ValueError):
            FunctionOracle("keyed")
        with pytest.raises(ValueError):
            FunctionOracle("random")
        with pytest.raises(ValueError):
            FunctionOracle("sponge", key=KEY)

    def test_keyed_collisions_within_birthday_bound(self):
        # 10^4 distinct inputs, 32-bit outputs: expected colliding pairs
        # C(1e4,2)/2^32 ~= 0.0116, so more than 3 would be wildly
        # implausible for anything PRF-shaped.
        o = FunctionOracle("keyed", key=KEY, output_len=4)
        seen = {}
        collisions = 0
        for i in range(10_000):
            out = evaluate(o, i.to_bytes(4, "big"))
            if out in seen:
                collisions += 1
            seen[out] = i
        assert collisions <= 3

    def test_random_mode_unbiased_bytes(self):
        # First output byte over fresh inputs should be uniform on 0..255.
        o = FunctionOracle("random", seed=42, output_len=1)
        counts = [0] * 256
        trials = 100_000
        for i in range(trials):
            counts[evaluate(o, i.to_bytes(4, "big"))[0]] += 1
        expected = trials / 256
        stat = sum((c - expected) ** 2 / expected for c in counts)
        assert stat < chi2_critical(255)


class TestDeriveIndexVector:
    def test_single_index_range(self):
        o = FunctionOracle("keyed", key=KEY)
        assert derive_index_vector(o, b"anything", 1, 5) == (1, 1, 1, 1, 1)

    def test_deterministic(self):
        o = FunctionOracle("random", seed=5)
        assert derive_index_vector(o, b"e", 1000, 4) == derive_index_vector(o, b"e", 1000, 4)

    def test_in_range(self):
        o = FunctionOracle("keyed", key=KEY)
        for m in (2, 3, 7, 8, 100, 1023, 1024):
            v = derive_index_vector(o, b"q", m, 16)
            assert len(v) == 16
            assert all(1 <= i <= m for i in v)

    def test_chi_square_uniform_power_of_two(self):
        o = FunctionOracle("keyed", key=KEY)
        m, k = 1024, 7
        counts = [[0] * m for _ in range(k)]
        trials = 100_000 // k
        for i in range(trials):
            for pos, idx in enumerate(derive_index_vector(o, i.to_bytes(4, "big"), m, k)):
                counts[pos][idx - 1] += 1
        for pos in range(k):
            expected = trials / m
            stat = sum((c - expected) ** 2 / expected for c in counts[pos])
            assert stat < chi2_critical(m - 1), f"position {pos} non-uniform"

    def test_chi_square_uniform_rejection_sampled(self):
        o = FunctionOracle("keyed", key=KEY)
        m = 1000  # not a power of two: exercises rejection
        counts = [0] * m
        trials = 50_000
        for i in range(trials):
            counts[derive_index_vector(o, i.to_bytes(4, "big"), m, 1)[0] - 1] += 1
        expected = trials / m
        stat = sum((c - expected) ** 2 / expected for c in counts)
        assert stat < chi2_critical(m - 1)

    def test_fixed_consumption_for_power_of_two(self):
        # Reproducible transcripts: with m a power of two no chunk is
        # rejected, so every input consumes the same number of stream
        # bytes (the memo entry length in random mode is input-independent).
        o = FunctionOracle("random", seed=11)
        for i in range(50):
            derive_index_vector(o, bytes([i]), 1 << 10, 7)
        lengths = {len(buf) for buf in o._memo.values()}
        assert len(lengths) == 1

    def test_matches_evaluate_prefix(self):
        # The index vector is a structured parse of the evaluate stream:
        # for m = 2^b the first ceil(k*b/8) bytes decode to it.
        m, k, b = 1 << 12, 4, 12
        o = FunctionOracle("keyed", key=KEY, output_len=(k * b + 7) // 8)
        raw = int.from_bytes(evaluate(o, b"elem"), "big")
        total_bits = 8 * ((k * b + 7) // 8)
        expect = tuple(((raw >> (total_bits - b * (j + 1))) & (m - 1)) + 1 for j in range(k))
        assert derive_index_vector(o, b"elem", m, k) == expect

    def test_validation(self):
        o = FunctionOracle("keyed", key=KEY)
        with pytest.raises(ValueError):
            derive_index_vector(o, b"x", 0, 1)
        with pytest.raises(ValueError):
            derive_index_vector(o, b"x", 8, 0)


class TestDeriveBits:
    def test_range(self):
        o = FunctionOracle("keyed", key=KEY)
        for i in range(200):
            assert 0 <= derive_bits(o, bytes([i]), 4, 1) < 16

    def test_deterministic(self):
        o = FunctionOracle("random", seed=8)
        assert derive_bits(o, b"t", 12, 3) == derive_bits(o, b"t", 12, 3)

    def test_domain_tags_independent(self):
        # Same input, different tags: collision rate over 10^4 inputs
        # should sit near 2^-8 (expected 39, generous 4-sigma window).
        o = FunctionOracle("keyed", key=KEY)
        equal = sum(
            derive_bits(o, i.to_bytes(4, "big"), 8, 1) == derive_bits(o, i.to_bytes(4, "big"), 8, 2)
            for i in range(10_000)
        )
        assert 14 <= equal <= 66

    def test_validation(self):
        o = FunctionOracle("keyed", key=KEY)
        with pytest.raises(ValueError):
            derive_bits(o, b"x", 0, 1)
        with pytest.raises(ValueError):
            derive_bits(o, b"x", 257, 1)
        with pytest.raises(ValueError):
            derive_bits(o, b"x", 8, 300)

    @given(st.integers(1, 256), st.binary(max_size=64))
    @settings(max_examples=60, deadline=None)
    def test_width_respected(self, nbits, x):
        o = FunctionOracle("keyed", key=KEY)
        assert 0 <= derive_bits(o, x, nbits, 7) < (1 << nbits)


class TestCoinSource:
    def test_deterministic(self):
        a, b = CoinSource(42), CoinSource(42)
        assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]

    def test_bits(self):
        c = CoinSource(1)
        draws = [c.bit() for _ in range(1000)]
        assert set(draws) <= {0, 1}
        assert 400 < sum(draws) < 600

    def test_index_range(self):
        c = CoinSource(2)
        for n in (1, 2, 3, 7, 64):
            assert all(0 <= c.index(n) < n for _ in range(200))
        with pytest.raises(ValueError):
            c.index(0)

    def test_index_roughly_uniform(self):
        c = CoinSource(3)
        counts = [0] * 4
        for _ in range(40_000):
            counts[c.index(4)] += 1
        expected = 10_000
        stat = sum((x - expected) ** 2 / expected for x in counts)
        assert stat < chi2_critical(3)

    def test_bytes_len(self):
        c = CoinSource(4)
        for n in (0, 1, 7, 8, 9, 33):
            assert len(c.bytes(n)) == n
