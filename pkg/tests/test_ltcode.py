import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ratelessmv import ltcode
from ratelessmv.exceptions import (
    DimensionMismatchError,
    DuplicateSymbolError,
    InvalidIndexError,
    InvalidParameterError,
    NeedMoreSymbols,
)
from ratelessmv.ltcode import (
    DecoderState,
    EncodingGraph,
    build_degree_distribution,
    decode_full,
    encode_matrix,
    generate_graph,
)


def reference_weights(m, c, delta):
    """Direct per-degree evaluation of the Robust Soliton weights, loop by loop."""
    R = c * math.log(m / delta) * math.sqrt(m)
    spike = math.ceil(m / R)
    out = []
    for d in range(1, m + 1):
        rho = 1.0 / m if d == 1 else 1.0 / (d * (d - 1))
        if d < spike:
            t = R / (d * m)
        elif d == spike:
            t = R * math.log(R / delta) / m
        else:
            t = 0.0
        out.append(rho + t)
    return out, spike


class TestDegreeDistribution:
    def test_ideal_soliton_m4(self):
        dist = build_degree_distribution(4, ideal=True)
        np.testing.assert_allclose(dist.pmf, [1 / 4, 1 / 2, 1 / 6, 1 / 12], rtol=0, atol=1e-15)

    def test_ideal_soliton_sums_to_one_exactly(self):
        total = Fraction(1, 50) + sum(Fraction(1, d * (d - 1)) for d in range(2, 51))
        assert total == 1

    @pytest.mark.parametrize("m", [10, 100, 1000, 10000])
    def test_normalized(self, m):
        dist = build_degree_distribution(m, 0.03, 0.5) if m >= 100 else build_degree_distribution(m, 0.5, 0.5)
        assert abs(dist.pmf.sum() - 1.0) < 1e-12
        assert (dist.pmf >= 0).all()
        assert dist.pmf.shape == (m,)

    def test_R_formula(self):
        dist = build_degree_distribution(1000, 0.03, 0.5)
        assert dist.R == 0.03 * math.log(1000 / 0.5) * math.sqrt(1000)

    def test_matches_direct_evaluation(self):
        weights, _ = reference_weights(1000, 0.03, 0.5)
        expected = np.array(weights) / sum(weights)
        dist = build_degree_distribution(1000, 0.03, 0.5)
        np.testing.assert_allclose(dist.pmf, expected, rtol=1e-12)

    def test_spike_is_local_peak(self):
        weights, spike = reference_weights(1000, 0.03, 0.5)
        assert spike == 139
        dist = build_degree_distribution(1000, 0.03, 0.5)
        assert dist.spike == spike
        s = spike - 1
        assert dist.pmf[s] > dist.pmf[s - 1] and dist.pmf[s] > dist.pmf[s + 1]

    @pytest.mark.parametrize("m", [0, 1])
    def test_rejects_small_m(self, m):
        with pytest.raises(InvalidParameterError):
            build_degree_distribution(m)

    def test_rejects_R_at_least_m(self):
        with pytest.raises(InvalidParameterError):
            build_degree_distribution(10, c=5.0, delta=0.5)

    @pytest.mark.parametrize("m", [4, 10, 50])
    def test_small_m_spike_beyond_support(self, m):
        # default c gives R < 1 here, so ceil(m/R) > m and no spike term applies
        weights, spike = reference_weights(m, 0.03, 0.5)
        assert spike > m
        dist = build_degree_distribution(m, 0.03, 0.5)
        assert dist.spike is None
        np.testing.assert_allclose(dist.pmf, np.array(weights) / sum(weights), rtol=1e-12)


class TestGraph:
    def test_deterministic(self):
        dist = build_degree_distribution(4, ideal=True)
        assert generate_graph(4, 2, dist, seed=11) == generate_graph(4, 2, dist, seed=11)

    def test_different_seeds_differ(self):
        dist = build_degree_distribution(100)
        assert generate_graph(100, 2, dist, seed=1) != generate_graph(100, 2, dist, seed=2)

    def test_degree_bounds_and_distinct(self):
        dist = build_degree_distribution(100)
        g = generate_graph(100, 2, dist, seed=3)
        assert g.m_e == 200
        for j in range(g.m_e):
            nb = g.neighbors(j)
            assert 1 <= len(nb) <= 100
            assert np.all(np.diff(nb) > 0)
            assert nb[0] >= 0 and nb[-1] < 100

    def test_m_e_is_ceiling(self):
        dist = build_degree_distribution(100)
        assert generate_graph(100, 1.555, dist, seed=0).m_e == 156

    def test_alpha_too_small(self):
        dist = build_degree_distribution(100)
        with pytest.raises(InvalidParameterError):
            generate_graph(100, 1.001, dist, seed=0)

    def test_mean_degree_matches_pmf(self):
        dist = build_degree_distribution(10000)
        analytic = float(sum(d * p for d, p in zip(range(1, 10001), dist.pmf)))
        sample = np.mean([generate_graph(10000, 2, dist, seed=s).degrees.mean() for s in range(10)])
        assert abs(sample - analytic) / analytic < 0.3

    def test_sources_uniform(self):
        # every source should be hit roughly equally often
        dist = build_degree_distribution(50, 0.5, 0.5)
        hits = np.zeros(50)
        for s in range(40):
            g = generate_graph(50, 2, dist, seed=s)
            hits += np.bincount(g.indices, minlength=50)
        expected = hits.sum() / 50
        chi2 = ((hits - expected) ** 2 / expected).sum()
        assert chi2 < 100  # 49 dof, p ~ 1e-4 cutoff


class TestEncode:
    def test_two_row_example(self):
        g = EncodingGraph.from_neighbor_sets(2, [{0}, {0, 1}])
        A = np.array([[1.0, 2.0], [10.0, 20.0]])
        np.testing.assert_array_equal(encode_matrix(A, g), [[1, 2], [11, 22]])

    def test_identity_graph(self):
        g = EncodingGraph.from_neighbor_sets(5, [{j} for j in range(5)])
        A = np.arange(15.0).reshape(5, 3)
        np.testing.assert_array_equal(encode_matrix(A, g), A)

    def test_brute_force_sum(self):
        rng = np.random.default_rng(0)
        A = rng.integers(-10, 11, size=(100, 7))
        g = generate_graph(100, 2, build_degree_distribution(100), seed=4)
        Ae = encode_matrix(A, g)
        for j in range(g.m_e):
            expected = [0] * 7
            for i in g.neighbors(j):
                for col in range(7):
                    expected[col] += int(A[i, col])
            assert Ae[j].tolist() == expected

    def test_dimension_mismatch(self):
        g = EncodingGraph.from_neighbor_sets(3, [{0}, {1}, {2}])
        with pytest.raises(DimensionMismatchError):
            encode_matrix(np.zeros((4, 2)), g)


class TestDecoder:
    def test_hand_peeling_example(self):
        g = EncodingGraph.from_neighbor_sets(4, [{0, 1, 2}, {1, 3}, {2}, {3}])
        b = np.array([1.0, 2.0, 3.0, 4.0])
        out, used = decode_full(zip(range(4), [6.0, 6.0, 3.0, 4.0]), g)
        np.testing.assert_array_equal(out, b)
        assert used == 4

    def test_singletons(self):
        g = EncodingGraph.from_neighbor_sets(3, [{0}, {1}, {2}])
        state = DecoderState(g)
        for j, v in enumerate([5, 7, 9]):
            state.ingest(j, v)
        assert state.complete
        assert state.result().tolist() == [5, 7, 9]

    def test_stall(self):
        g = EncodingGraph.from_neighbor_sets(2, [{0, 1}])
        state = DecoderState(g).ingest(0, 3.0)
        assert state.decoded_count == 0
        with pytest.raises(NeedMoreSymbols):
            decode_full([(0, 3.0)], g)

    def test_duplicate_rejected_unchanged(self):
        g = EncodingGraph.from_neighbor_sets(2, [{0, 1}, {1}])
        state = DecoderState(g).ingest(0, 3.0)
        with pytest.raises(DuplicateSymbolError):
            state.ingest(0, 3.0)
        assert state.received == 1 and state.decoded_count == 0

    @pytest.mark.parametrize("bad", [-1, 2, 7])
    def test_invalid_index(self, bad):
        g = EncodingGraph.from_neighbor_sets(2, [{0, 1}, {1}])
        with pytest.raises(InvalidIndexError):
            DecoderState(g).ingest(bad, 1.0)

    def test_redundant_symbol_after_completion(self):
        g = EncodingGraph.from_neighbor_sets(2, [{0}, {1}, {0, 1}])
        state = DecoderState(g).ingest(0, 1.0).ingest(1, 2.0).ingest(2, 3.0)
        assert state.complete and state.active == []

    def test_residual_degrees_stay_positive(self):
        g = generate_graph(200, 2, build_degree_distribution(200), seed=9)
        state = DecoderState(g)
        for j in np.random.default_rng(1).permutation(g.m_e):
            state.ingest(j, 0.0)
            assert all(state.residual_degree(s) >= 1 for s in state.active)

    def test_singletons_first_uses_m(self):
        m = 30
        sets = [{j} for j in range(m)] + [{0, 1}, {2, 3, 4}]
        g = EncodingGraph.from_neighbor_sets(m, sets)
        _, used = decode_full(((j, float(j)) for j in range(g.m_e)), g)
        assert used == m

    def test_vector_values(self):
        g = EncodingGraph.from_neighbor_sets(2, [{0, 1}, {1}])
        out, _ = decode_full([(0, np.array([3.0, 4.0])), (1, np.array([1.0, 1.0]))], g)
        np.testing.assert_array_equal(out, [[2.0, 3.0], [1.0, 1.0]])


def _instance(m, seed, alpha=2.0):
    rng = np.random.default_rng(seed)
    g = generate_graph(m, alpha, build_degree_distribution(m), seed=rng)
    A = rng.integers(-10, 11, size=(m, 8)).astype(float)
    x = rng.integers(-10, 11, size=8).astype(float)
    be = encode_matrix(A, g) @ x
    order = rng.permutation(g.m_e)
    return g, A, x, be, order


def test_decodes_m1000_within_2m():
    completed = 0
    for seed in range(100):
        g, A, x, be, order = _instance(1000, seed)
        try:
            b, used = decode_full(((j, be[j]) for j in order), g)
        except NeedMoreSymbols:
            continue
        assert np.array_equal(b, A @ x)
        assert used <= 2000
        completed += 1
    assert completed >= 99


def test_batch_equals_incremental():
    for seed in range(20):
        g, A, x, be, order = _instance(100, 1000 + seed)
        state = DecoderState(g)
        seen = []
        for j in order:
            state.ingest(j, be[j])
            seen.append(state.decoded_count)
            if state.complete:
                break
        try:
            b, used = decode_full(((j, be[j]) for j in order), g)
        except NeedMoreSymbols as exc:
            assert not state.complete and exc.decoded_count == state.decoded_count
            continue
        assert used == state.received
        assert np.array_equal(b, state.result())
        assert seen == sorted(seen)


def test_compiled_peeler_matches_reference():
    for seed in range(10):
        g, A, x, be, order = _instance(300, 50 + seed)
        state = DecoderState(g)
        for j in order:
            state.ingest(j, be[j])
        traj, used = ltcode.decode_trajectory(g, order)
        ref = np.array(state.trajectory)
        assert np.array_equal(traj, ref[: len(traj)])
        if state.complete:
            assert used == int(np.argmax(ref == 300)) + 1
        else:
            assert used == -1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 40))
def test_decode_correct_and_order_invariant(seed, m):
    rng = np.random.default_rng(seed)
    dist = build_degree_distribution(m, ideal=True)
    g = generate_graph(m, 3, dist, seed=rng)
    A = rng.integers(-10, 11, size=(m, 4))
    x = rng.integers(-10, 11, size=4)
    be = encode_matrix(A, g) @ x
    results = []
    for _ in range(3):
        order = rng.permutation(g.m_e)
        state = DecoderState(g)
        for j in order:
            state.ingest(j, be[j])
        assert state.trajectory == sorted(state.trajectory)
        if state.complete:
            results.append(state.result())
    # completion depends only on the symbol set, not the order
    assert len(results) in (0, 3)
    for b in results:
        assert np.array_equal(b, A @ x)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_real_valued_decode_relative_error(seed):
    rng = np.random.default_rng(seed)
    m = 60
    g = generate_graph(m, 3, build_degree_distribution(m, 0.1, 0.5), seed=rng)
    A = rng.standard_normal((m, 5))
    x = rng.standard_normal(5)
    be = encode_matrix(A, g) @ x
    try:
        b, _ = decode_full(((j, be[j]) for j in range(g.m_e)), g)
    except NeedMoreSymbols:
        return
    exact = A @ x
    assert np.all(np.abs(b - exact) <= 1e-9 * np.maximum(np.abs(exact), 1.0))


class TestOverhead:
    def test_m100_completes_within_2m(self):
        est = ltcode.estimate_overhead(100, trials=100, seed=2024)
        assert est.failures <= 5
        assert (est.completed <= 200).all()

    def test_epsilon_shrinks_with_m(self):
        small = ltcode.estimate_overhead(100, trials=100, seed=1)
        large = ltcode.estimate_overhead(10000, trials=100, seed=1)
        assert large.epsilon < small.epsilon
        assert large.failures == 0

    def test_trajectories_monotone_and_reproducible(self):
        a = ltcode.estimate_overhead(10, c=0.5, trials=5, seed=3)
        b = ltcode.estimate_overhead(10, c=0.5, trials=5, seed=3)
        assert np.array_equal(a.symbols_used, b.symbols_used)
        for ta, tb in zip(a.trajectories, b.trajectories):
            assert np.array_equal(ta, tb)
            assert np.all(np.diff(ta) >= 0)

    def test_rejects_zero_trials(self):
        with pytest.raises(InvalidParameterError):
            ltcode.estimate_overhead(100, trials=0)
