import numpy as np
import pytest

from spsk.ann import HashTableSet, build_index, lsh_params, query, query_with_stats, sample_positions
from spsk.bcs import SparseBinaryVector, compress_binary, compress_binary_batch, hamming_rescaled
from spsk.errors import ParameterError, ProvenanceMismatch
from spsk.harness import gen_sparse_corpus, perturb
from spsk.mapping import generator, new_bucket_map


class TestParams:
    def test_reference_example(self):
        p = lsh_params(1024, 10, 5, 100)
        assert p.p1 == pytest.approx(0.9) and p.p2 == pytest.approx(0.5)
        assert p.K == 10
        assert p.rho == pytest.approx(0.152, abs=5e-4)
        assert p.L == 29
        assert p.candidate_cap == 87

    def test_smallest_n(self):
        assert lsh_params(2, 10, 5, 100).K == 1

    def test_replication_scales_radii(self):
        p = lsh_params(64, 2, 2, 120, replication=3)
        assert p.p1 == pytest.approx(1 - 6 / 120) and p.p2 == pytest.approx(1 - 12 / 120)

    @pytest.mark.parametrize("args", [(1, 1, 2, 10), (10, 0, 2, 10), (10, 1, 1, 10), (10, 5, 2, 10)])
    def test_rejects(self, args):
        with pytest.raises(ParameterError):
            lsh_params(*args)


def _corpus(n=100, d=2000, psi=20, N=400, seed=3):
    vecs = gen_sparse_corpus(n, d, psi, seed)
    m = new_bucket_map(d, N, seed=seed)
    return vecs, m, compress_binary_batch(vecs, m)


class TestIndex:
    def test_positions_deterministic(self):
        p = lsh_params(100, 5, 2, 200)
        assert np.array_equal(sample_positions(p, 4), sample_positions(p, 4))
        assert sample_positions(p, 4).shape == (p.L, p.K)

    def test_self_query_recall(self):
        _, _, sk = _corpus()
        p = lsh_params(len(sk), 5, 2, sk[0].n_buckets)
        index = build_index(sk, p, seed=1)
        for i, s in enumerate(sk):
            got = query(index, s, 5, 2)
            assert got is not None and hamming_rescaled(sk[got], s) <= 10
            # identical sketches collide everywhere; the first hit is the
            # lowest id with the same sketch
            assert hamming_rescaled(sk[got], s) == 0 or got == i

    def test_soundness(self, rng):
        vecs, m, sk = _corpus()
        p = lsh_params(len(sk), 5, 2, sk[0].n_buckets)
        index = build_index(sk, p, seed=2)
        g = generator(0, 99)
        for _ in range(50):
            q = compress_binary(perturb(g, vecs[int(g.integers(0, 100))], int(g.integers(0, 30))), m)
            got, checked = query_with_stats(index, q, 5, 2)
            assert checked <= p.candidate_cap
            if got is not None:
                assert hamming_rescaled(sk[got], q) <= 10

    def test_empty_index(self):
        p = lsh_params(10, 2, 2, 64)
        assert query(HashTableSet.empty(p), compress_binary(SparseBinaryVector(5, [1]), new_bucket_map(5, 64)), 2, 2) is None

    def test_provenance_checked(self):
        _, _, sk = _corpus()
        p = lsh_params(100, 5, 2, 400)
        index = build_index(sk, p)
        foreign = compress_binary(SparseBinaryVector(2000, [1]), new_bucket_map(2000, 400, seed=999))
        with pytest.raises(ProvenanceMismatch):
            query(index, foreign, 5, 2)

    def test_params_must_match_sketches(self):
        _, _, sk = _corpus()
        with pytest.raises(ProvenanceMismatch):
            build_index(sk, lsh_params(100, 5, 2, 401))

    def test_deterministic(self):
        _, _, sk = _corpus()
        p = lsh_params(100, 5, 2, 400)
        a, b = build_index(sk, p, seed=7), build_index(sk, p, seed=7)
        assert a.tables == b.tables
