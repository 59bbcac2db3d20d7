import io
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from securecache.core import (
    BitBlock,
    ConfigurationError,
    DeliveryPayload,
    FileLibrary,
    InfeasibleError,
    IntegrityError,
    KeyStore,
    ParameterError,
    SystemParams,
    UserCache,
    all_demands,
    check_demand,
    enumerate_subsets,
    gen_uniform_block,
    make_rng,
    nonempty_subsets,
    parse_subset_label,
    subset_label,
    subset_rank,
    subset_unrank,
    worst_case_demand,
    xor_all,
    xor_pad,
)

blocks = st.text(alphabet="01", max_size=80).map(BitBlock.from_string)


def naive_xor(a: str, b: str) -> str:
    n = max(len(a), len(b))
    a, b = a.ljust(n, "0"), b.ljust(n, "0")
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


class TestBitBlock:
    def test_string_roundtrip(self):
        assert str(BitBlock.from_string("1011")) == "1011"
        assert BitBlock.from_string("1").value == 1
        assert BitBlock.from_string("01").value == 2

    def test_rejects_value_wider_than_length(self):
        with pytest.raises(ParameterError):
            BitBlock(8, 3)

    def test_self_inverse(self):
        b = BitBlock.from_string("1011")
        assert str(xor_pad(b, b)) == "0000"

    def test_identity_with_empty(self):
        assert str(xor_pad(BitBlock.from_string("101"), BitBlock.zeros(0))) == "101"

    def test_right_zero_pad(self):
        out = xor_pad(BitBlock.from_string("11"), BitBlock.from_string("1001"))
        assert str(out) == "0101"
        assert str(out) == naive_xor("11", "1001")

    @given(blocks, blocks)
    def test_matches_naive_loop(self, a, b):
        assert str(xor_pad(a, b)) == naive_xor(str(a), str(b))
        assert len(xor_pad(a, b)) == max(len(a), len(b))

    @given(blocks, blocks)
    def test_decodability(self, a, b):
        assert xor_pad(xor_pad(a, b), b).truncate(len(a)) == a

    def test_slice_take_concat(self):
        b = BitBlock.from_string("110010")
        assert str(b.slice(1, 4)) == "100"
        assert str(b.take(np.array([0, 5, 2]))) == "100"
        assert BitBlock.concat([b.slice(0, 2), b.slice(2, 6)]) == b

    def test_bits_roundtrip(self):
        b = BitBlock.from_string("0110100111")
        assert BitBlock.from_bits(b.to_bits()) == b
        assert b.popcount() == 6

    @given(blocks)
    def test_serialization_roundtrip(self, b):
        assert BitBlock.from_bytes(b.to_bytes()) == b

    def test_serialization_layout(self):
        data = BitBlock.from_string("1000000001").to_bytes()
        assert data[:8] == (10).to_bytes(8, "little")
        assert data[8:] == bytes([0b00000001, 0b00000010])

    def test_xor_all(self):
        parts = [BitBlock.from_string(s) for s in ("1", "01", "001")]
        assert str(xor_all(parts)) == "111"
        assert xor_all([]) == BitBlock.zeros(0)


class TestUniformBlocks:
    def test_empty(self, rng):
        assert gen_uniform_block(0, rng) == BitBlock.zeros(0)

    def test_deterministic(self):
        a = gen_uniform_block(1000, make_rng(5))
        b = gen_uniform_block(1000, make_rng(5))
        assert a == b
        assert a != gen_uniform_block(1000, make_rng(6))

    def test_ones_fraction(self, rng):
        b = gen_uniform_block(100_000, rng)
        assert abs(b.popcount() / 100_000 - 0.5) <= 0.01

    @pytest.mark.parametrize("n", [1, 7, 8, 9, 63, 65])
    def test_exact_length(self, rng, n):
        b = gen_uniform_block(n, rng)
        assert b.length == n and b.value < 2**n


class TestSubsets:
    def test_enumeration(self):
        assert enumerate_subsets(3, 2) == [(1, 2), (1, 3), (2, 3)]
        assert enumerate_subsets(4, 0) == [()]

    @pytest.mark.parametrize("K", range(1, 8))
    def test_counts(self, K):
        for s in range(K + 1):
            subs = enumerate_subsets(K, s)
            assert len(subs) == comb(K, s) == len(set(subs))
            assert all(len(S) == s for S in subs)
        assert sum(comb(K, s) for s in range(1, K + 1)) == 2**K - 1
        assert len(list(nonempty_subsets(K))) == 2**K - 1

    @pytest.mark.parametrize("K,s", [(5, 2), (6, 3), (4, 0), (7, 7)])
    def test_rank_bijection(self, K, s):
        for i, S in enumerate(enumerate_subsets(K, s)):
            assert subset_rank(S, K) == i
            assert subset_unrank(i, K, s) == S

    def test_descending_order(self):
        sizes = [len(S) for S in nonempty_subsets(3, descending=True)]
        assert sizes == sorted(sizes, reverse=True)

    def test_labels(self):
        assert subset_label((1, 2)) == "{1,2}"
        assert parse_subset_label("{1,2}") == (1, 2)
        assert parse_subset_label("{}") == ()

    def test_rank_rejects_unsorted(self):
        with pytest.raises(ParameterError):
            subset_rank((2, 1), 3)


class TestSystemParams:
    def test_centralized_memory(self):
        assert SystemParams("centralized", 3, 3, 3, 1).M == pytest.approx(5 / 3)

    def test_indivisible_file(self):
        with pytest.raises(ConfigurationError, match="divisible by C\\(3,1\\)=3"):
            SystemParams("centralized", 3, 3, 4, 1)

    def test_t_range(self):
        with pytest.raises(ParameterError):
            SystemParams("centralized", 3, 3, 3, 4)
        with pytest.raises(ParameterError):
            SystemParams("centralized", 3, 3, 3, 0.5)

    def test_decentralized_needs_positive_t(self):
        with pytest.raises(InfeasibleError):
            SystemParams("decentralized", 3, 3, 30, 0)

    def test_from_memory(self):
        p = SystemParams.from_memory("centralized", 3, 3, 3, 5 / 3)
        assert p.t == 1
        q = SystemParams.from_memory("decentralized", 3, 3, 300, 5 / 3)
        assert q.q == pytest.approx(1 / 3)
        with pytest.raises(InfeasibleError, match="M < 1 infeasible"):
            SystemParams.from_memory("centralized", 3, 3, 3, 0.5)
        with pytest.raises(ParameterError):
            SystemParams.from_memory("centralized", 3, 3, 3, 1.3)

    def test_unknown_scheme(self):
        with pytest.raises(ParameterError):
            SystemParams("hybrid", 2, 2, 2, 1)


class TestDemands:
    def test_worst_case(self):
        assert worst_case_demand(3, 3) == (1, 2, 3)
        assert worst_case_demand(2, 5) == (1, 2, 1, 2, 1)
        assert worst_case_demand(5, 2) == (1, 2)

    def test_check(self):
        assert check_demand([1, 2], 2, 2) == (1, 2)
        with pytest.raises(ParameterError):
            check_demand([1, 3], 2, 2)
        with pytest.raises(ParameterError):
            check_demand([1], 2, 2)

    def test_all_demands(self):
        assert len(list(all_demands(3, 2))) == 9


def test_library_indexing(rng):
    lib = FileLibrary.random(3, 10, rng)
    assert lib.N == 3 and lib.F == 10
    assert lib[1] == lib.files[0]
    with pytest.raises(ParameterError):
        lib[0]


def test_user_cache_accounting():
    c = UserCache(user=1, budget_bits=10)
    c.data[(1, (1,))] = BitBlock.zeros(4)
    c.keys[(1, 2)] = BitBlock.zeros(3)
    assert (c.data_bits, c.key_bits, c.stored_bits) == (4, 3, 7)


class TestKeyStore:
    def test_tags(self, rng):
        ks = KeyStore()
        ks.generate((1, 2), 5, rng)
        ks.generate((1, 3), 5, rng)
        assert ks.tag((1, 2)) != ks.tag((1, 3))
        assert ks.tag((1, 2))[0] == "uniform"
        ks.alias((1, 3), (1, 2))
        assert ks.tag((1, 2)) == ks.tag((1, 3))
        ks.put((2, 3), BitBlock.zeros(5))
        assert ks.tag((2, 3))[0] == "manual"
        assert ks.total_bits == 15 and len(ks) == 3

    def test_copy_is_independent(self, rng):
        ks = KeyStore()
        ks.generate((1,), 4, rng)
        other = ks.copy()
        other.put((2,), BitBlock.zeros(1))
        assert (2,) not in ks


class TestPayload:
    def test_duplicate_subset(self):
        p = DeliveryPayload()
        p.append((1, 2), BitBlock.zeros(3))
        with pytest.raises(IntegrityError):
            p.append((1, 2), BitBlock.zeros(3))

    def test_rate(self):
        p = DeliveryPayload()
        p.append((1, 2), BitBlock.zeros(3))
        p.append((1,), BitBlock.zeros(1))
        assert p.total_bits == 4 and p.rate(8) == 0.5

    @given(st.lists(st.tuples(st.sets(st.integers(1, 6), min_size=1), blocks), max_size=6, unique_by=lambda x: frozenset(x[0])))
    @settings(max_examples=50)
    def test_dump_roundtrip(self, recs):
        p = DeliveryPayload()
        for S, b in recs:
            p.append(tuple(sorted(S)), b)
        back = DeliveryPayload.from_bytes(p.to_bytes())
        assert back.canonical() == p.canonical()
        buf = io.BytesIO()
        p.dump(buf)
        assert buf.getvalue().startswith(b"SCPD")
