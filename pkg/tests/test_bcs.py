import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spsk.baselines import exact_hamming, exact_ip
from spsk.bcs import (
    BinarySketch,
    Regime,
    SparseBinaryVector,
    compress_binary,
    compress_binary_batch,
    corruption_bound,
    expected_compressed_hamming,
    expected_hamming_lower_bound,
    hamming,
    hamming_rescaled,
    inner_product_binary,
    odd_bucket_probability,
    pairwise_hamming,
    pairwise_inner_product,
    plan_binary,
    plan_pairwise_hamming,
    unmatched_count,
    update_binary,
)
from spsk.errors import DimensionMismatch, DomainError, ParameterError, ProvenanceMismatch
from spsk.harness import brute_force_expectation
from spsk.kernels import odd_counts_trials
from spsk.mapping import BucketMap, new_bucket_map, trial_assignments


def bv(bits):
    return SparseBinaryVector.from_dense(bits)


def one_bucket(d):
    return BucketMap.from_assignment([0] * d, 1)


class TestSparseBinaryVector:
    def test_round_trip(self):
        u = bv([0, 1, 0, 1, 1])
        assert u.ones.tolist() == [1, 3, 4]
        assert u.to_dense().tolist() == [0, 1, 0, 1, 1]
        assert u.popcount == 3

    @pytest.mark.parametrize("ones", [[2, 1], [1, 1], [5], [-1]])
    def test_rejects_bad_indices(self, ones):
        with pytest.raises(ParameterError):
            SparseBinaryVector(5, np.array(ones))

    def test_toggled(self):
        u = bv([1, 0, 1])
        assert u.toggled(1).ones.tolist() == [0, 1, 2]
        assert u.toggled(0).ones.tolist() == [2]


class TestPlanner:
    def test_large_deviation(self):
        p = plan_binary(16, 3, 20, 1.0)
        assert (p.n_buckets, p.replication, p.regime) == (144, 1, Regime.LARGE_DEVIATION)

    def test_replicated(self):
        p = plan_binary(16, 3, 2, 1.0)
        assert (p.n_buckets, p.replication, p.regime) == (20736, 12, Regime.REPLICATED)

    def test_minimal_n(self):
        p = plan_binary(2, 1, 4, 1.0)
        assert (p.n_buckets, p.replication) == (16, 1)

    def test_boundary_is_strict(self):
        # eps*r == 3 log2 n exactly falls in the replicated regime.
        assert plan_binary(16, 3, 12, 1.0).regime is Regime.REPLICATED
        assert plan_binary(16, 3, 13, 1.0).regime is Regime.LARGE_DEVIATION

    def test_non_power_of_two_n_uses_ceil(self):
        p = plan_binary(1000, 2, 1, 1.0)
        assert p.replication == 3 * 10 and p.n_buckets == 144 * 4 * 100

    def test_inner_product_warning(self):
        with pytest.warns(UserWarning):
            p = plan_binary(16, 3, 2, 1.0, for_inner_product=True)
        assert p.warnings

    @pytest.mark.parametrize("args", [(1, 3, 2, 1.0), (16, 0, 2, 1.0), (16, 3, 0, 1.0), (16, 3, 2, 0.0)])
    def test_rejects(self, args):
        with pytest.raises(ParameterError):
            plan_binary(*args)

    @pytest.mark.parametrize("r,N", [(2, 32), (10, 800)])
    def test_pairwise(self, r, N):
        assert plan_pairwise_hamming(r).n_buckets == N

    def test_pairwise_domain(self):
        with pytest.raises(DomainError):
            plan_pairwise_hamming(1)


class TestCompress:
    def test_single_one_survives_collapse(self):
        assert compress_binary(bv([1, 0]), one_bucket(2)).to_bits().tolist() == [1]

    def test_pair_cancels(self):
        assert compress_binary(bv([1, 1]), one_bucket(2)).to_bits().tolist() == [0]

    def test_three_position_example(self):
        m = one_bucket(3)
        su, sv = compress_binary(bv([1, 0, 1]), m), compress_binary(bv([0, 1, 0]), m)
        assert su.to_bits().tolist() == [0] and sv.to_bits().tolist() == [1]
        assert hamming(su, sv) == 1
        assert exact_hamming(bv([1, 0, 1]), bv([0, 1, 0])) == 3

    def test_ip_remarks(self):
        m = one_bucket(2)
        a, b = compress_binary(bv([1, 0]), m), compress_binary(bv([0, 1]), m)
        assert inner_product_binary(a, b) == 1
        c = compress_binary(bv([1, 1]), m)
        assert inner_product_binary(c, c) == 0

    def test_zero_vector(self):
        s = compress_binary(SparseBinaryVector(10, []), new_bucket_map(10, 13, seed=1))
        assert s.to_bits().sum() == 0

    def test_replication_parity(self):
        m = BucketMap.from_assignment([[0, 1, 1], [2, 2, 0]], 3)
        assert compress_binary(bv([1, 0]), m).to_bits().tolist() == [1, 0, 0]
        assert compress_binary(bv([1, 1]), m).to_bits().tolist() == [0, 0, 0]

    def test_padding_bits_zero(self):
        s = compress_binary(bv(np.ones(40, dtype=int)), new_bucket_map(40, 13, seed=3))
        assert s.bits[-1] >> 5 == 0

    def test_packed_layout(self):
        s = BinarySketch.from_bits([1, 0, 0, 0, 0, 0, 0, 0, 0, 1])
        assert s.bits.tolist() == [1, 2]

    def test_batch_matches_single(self, rng):
        m = new_bucket_map(200, 37, 2, seed=9)
        vs = [bv(rng.integers(0, 2, 200)) for _ in range(20)]
        assert all(a == compress_binary(v, m) for a, v in zip(compress_binary_batch(vs, m), vs))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            compress_binary(bv([1, 0, 0]), new_bucket_map(4, 3))


class TestStreaming:
    def test_toggle_stream_equals_batch(self, rng):
        for trial in range(50):
            d = int(rng.integers(1, 65))
            m = new_bucket_map(d, int(rng.integers(1, 40)), int(rng.integers(1, 4)), seed=trial)
            u = SparseBinaryVector(d, [])
            sk = compress_binary(u, m)
            for i in rng.integers(0, d, size=30):
                u = u.toggled(int(i))
                sk = update_binary(sk, m, int(i))
            assert sk == compress_binary(u, m)

    def test_wrong_map_rejected(self):
        sk = compress_binary(bv([1, 0]), new_bucket_map(2, 4, seed=1))
        with pytest.raises(ProvenanceMismatch):
            update_binary(sk, new_bucket_map(2, 4, seed=2), 0)


class TestComparability:
    def test_seed_mismatch(self):
        a = compress_binary(bv([1, 0]), new_bucket_map(2, 4, seed=1))
        b = compress_binary(bv([1, 0]), new_bucket_map(2, 4, seed=2))
        with pytest.raises(ProvenanceMismatch):
            hamming(a, b)

    def test_rescaled(self):
        m = new_bucket_map(100, 50, 3, seed=0)
        a, b = compress_binary(bv([1] * 10 + [0] * 90), m), compress_binary(SparseBinaryVector(100, []), m)
        assert hamming_rescaled(a, b) == hamming(a, b) / 3

    def test_pairwise_matrices(self, rng):
        m = new_bucket_map(50, 29, seed=5)
        vs = compress_binary_batch([bv(rng.integers(0, 2, 50)) for _ in range(6)], m)
        H, P = pairwise_hamming(vs, vs), pairwise_inner_product(vs, vs)
        for i, j in itertools.product(range(6), repeat=2):
            assert H[i, j] == hamming(vs[i], vs[j])
            assert P[i, j] == inner_product_binary(vs[i], vs[j])


vec_pairs = st.integers(1, 40).flatmap(
    lambda d: st.tuples(
        st.just(d),
        st.lists(st.integers(0, 1), min_size=d, max_size=d),
        st.lists(st.integers(0, 1), min_size=d, max_size=d),
        st.lists(st.integers(0, 1), min_size=d, max_size=d),
    )
)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(vec_pairs, st.integers(1, 20), st.integers(1, 3), st.integers(0, 2**64 - 1))
    def test_one_sided_and_linear(self, data, N, R, seed):
        d, x, y, z = data
        u, v, w = bv(x), bv(y), bv(z)
        m = new_bucket_map(d, N, R, seed)
        su, sv, sw = (compress_binary(t, m) for t in (u, v, w))
        # one-sided: never exceeds the true distance (raw units include R)
        assert hamming(su, sv) <= R * exact_hamming(u, v)
        assert hamming_rescaled(su, sv) <= exact_hamming(u, v)
        # GF(2) linearity: sketch(u xor v) = sketch(u) xor sketch(v)
        x_or = bv(np.bitwise_xor(x, y))
        assert np.array_equal(compress_binary(x_or, m).bits, su.bits ^ sv.bits)
        # pseudometric on sketches
        assert hamming(su, su) == 0
        assert hamming(su, sv) == hamming(sv, su)
        assert hamming(su, sw) <= hamming(su, sv) + hamming(sv, sw)

    def test_one_sided_many_maps(self, rng):
        u, v = bv(rng.integers(0, 2, 32)), bv(rng.integers(0, 2, 32))
        true = exact_hamming(u, v)
        active = np.union1d(u.ones, v.ones)
        diff = np.setxor1d(u.ones, v.ones)
        # 1e5 maps restricted to unmatched positions (the only ones that matter)
        assign = trial_assignments(0, 100_000, diff.size, 8)
        assert active.size >= diff.size
        assert int(odd_counts_trials(assign, 8).max()) <= true


class TestOddBucket:
    @pytest.mark.parametrize("psi_u,N,p", [(1, 2, 0.5), (2, 2, 0.5), (1, 3, Fraction(1, 3)), (0, 5, 0)])
    def test_values(self, psi_u, N, p):
        assert odd_bucket_probability(psi_u, N, exact=True) == p
        assert odd_bucket_probability(psi_u, N) == pytest.approx(float(p))

    def test_expected_distance(self):
        assert expected_compressed_hamming(2, 2, exact=True) == 1
        assert expected_compressed_hamming(1, 3, exact=True) == 1

    def test_lower_bound(self):
        lb = expected_hamming_lower_bound(40, 800)
        assert lb == pytest.approx(400 * (1 - math.exp(-0.1)))
        assert lb == pytest.approx(38.06, abs=0.01)
        assert expected_compressed_hamming(40, 800) >= lb

    @pytest.mark.parametrize("psi_u", range(0, 60, 3))
    @pytest.mark.parametrize("N", [2, 3, 7, 64, 800])
    def test_lower_bound_never_exceeds(self, psi_u, N):
        assert expected_compressed_hamming(psi_u, N) >= expected_hamming_lower_bound(psi_u, N) - 1e-12

    def test_lower_bound_needs_two_buckets(self):
        # one bucket, two unmatched bits: they always cancel
        assert expected_compressed_hamming(2, 1) == 0
        with pytest.raises(DomainError):
            expected_hamming_lower_bound(2, 1)

    def test_enumeration_oracle_examples(self):
        assert brute_force_expectation(bv([1, 1]), bv([0, 0]), 2) == 1
        u = bv([1, 0, 1, 1])
        assert brute_force_expectation(u, u, 3) == 0
        assert brute_force_expectation(bv([1, 0]), bv([0, 0]), 3) == 1

    def test_enumeration_matches_formula(self):
        for N in range(1, 5):
            for m in range(0, 9):
                if N**m > 4**8:
                    continue
                for matched in range(0, m + 1, 3):
                    psi_u = m - matched
                    u = SparseBinaryVector(12, np.arange(m))
                    v = SparseBinaryVector(12, np.arange(psi_u, m))
                    assert unmatched_count(u, v) == psi_u
                    assert brute_force_expectation(u, v, N) == expected_compressed_hamming(psi_u, N, exact=True)

    def test_enumeration_limit(self):
        with pytest.raises(ParameterError):
            brute_force_expectation(bv([1] * 9), bv([0] * 9), 4)

    @pytest.mark.parametrize("psi_u,N", [(10, 64), (40, 800)])
    def test_monte_carlo_odd_frequency(self, psi_u, N):
        trials = 100_000
        counts = odd_counts_trials(trial_assignments(7, trials, psi_u, N), N)
        p = odd_bucket_probability(psi_u, N)
        # each trial contributes N Bernoulli(p) buckets (dependent); use per-trial variance
        mean = counts.mean() / N
        sigma = counts.std() / N / math.sqrt(trials)
        assert abs(mean - p) <= 4 * sigma


class TestCorruptionBound:
    @pytest.mark.parametrize("r,b", [(1, 0.5), (3, 0.125)])
    def test_values(self, r, b):
        assert corruption_bound(2, 64, 1.0, r) == pytest.approx(b)

    def test_clamped(self):
        assert corruption_bound(10, 16, 1.0, 2) == 1.0

    def test_rejects(self):
        with pytest.raises(ParameterError):
            corruption_bound(2, 0, 1.0, 1)


def test_exact_oracles_agree_with_dense(rng):
    for _ in range(50):
        d = int(rng.integers(1, 65))
        x, y = rng.integers(0, 2, d), rng.integers(0, 2, d)
        assert exact_hamming(bv(x), bv(y)) == int(np.sum(x != y))
        assert exact_ip(bv(x), bv(y)) == int(np.dot(x, y))
