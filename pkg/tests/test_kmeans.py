import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from claq.errors import ValidationError
from claq.kmeans import Codebook, assign, exact_cluster_1d, lloyd_cluster, wcss_of


def brute_force_assign(value, centroids):
    return min(range(len(centroids)), key=lambda q: (abs(centroids[q] - value), q))


class TestLloyd:
    def test_degenerate_two_distinct_values(self):
        cb = lloyd_cluster(np.array([0, 0, 0, 0, 10, 10, 10, 10.0]), 2, seed=0)
        assert cb.centroids.tolist() == [0, 0, 10, 10]
        assert cb.wcss == 0.0

    def test_constant_input(self):
        for bits in (2, 3, 4):
            cb = lloyd_cluster(np.full(9, 3.5), bits, seed=1)
            assert (cb.centroids == 3.5).all()
            assert cb.wcss == 0.0

    def test_well_separated_matches_exact(self):
        v = np.array([1, 2, 3, 10, 11, 12, 20, 21.0])
        exact = exact_cluster_1d(v, 2)
        lloyd = lloyd_cluster(v, 2, seed=0)
        assert lloyd.wcss >= exact.wcss - 1e-12
        assert lloyd.wcss == pytest.approx(exact.wcss, abs=1e-9)

    def test_deterministic_byte_for_byte(self):
        v = np.random.default_rng(3).normal(size=200)
        a = lloyd_cluster(v, 3, seed=42)
        b = lloyd_cluster(v, 3, seed=42)
        assert a.centroids.tobytes() == b.centroids.tobytes()
        assert a.wcss == b.wcss

    def test_centroid_fixed_point(self):
        v = np.random.default_rng(4).normal(size=300)
        cb = lloyd_cluster(v, 3, seed=9, tol=1e-9, max_iter=500)
        idx = assign(v, cb)
        for q in range(cb.centroids.size):
            members = v[idx == q]
            if members.size:
                assert cb.centroids[q] == pytest.approx(members.mean(), abs=1e-6)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            lloyd_cluster(np.array([]), 2, seed=0)
        with pytest.raises(ValidationError):
            lloyd_cluster(np.array([1.0, np.nan]), 2, seed=0)
        with pytest.raises(ValidationError):
            lloyd_cluster(np.ones(4), 5, seed=0)


class TestExact:
    def test_k_equals_distinct_count(self):
        cb = exact_cluster_1d(np.array([1, 2, 3, 10.0]), 2)
        assert cb.centroids.tolist() == [1, 2, 3, 10]
        assert cb.wcss == 0.0

    def test_two_cluster_split(self):
        cb = exact_cluster_1d(np.array([1, 2, 3, 10.0]), 1)
        assert cb.centroids.tolist() == [2.0, 10.0]
        assert cb.wcss == 2.0

    def test_symmetric_pairs(self):
        cb = exact_cluster_1d(np.array([-5, -4, 4, 5.0]), 1)
        assert cb.centroids.tolist() == [-4.5, 4.5]
        assert cb.wcss == 1.0

    def test_oracle_cap(self):
        with pytest.raises(ValidationError, match="cap"):
            exact_cluster_1d(np.zeros(100), 2, cap=50)

    def test_never_worse_than_lloyd(self):
        rng = np.random.default_rng(0)
        for trial in range(40):
            n = int(rng.integers(8, 200))
            v = rng.normal(size=n) * rng.uniform(0.1, 10)
            bits = int(rng.choice([2, 3]))
            exact = exact_cluster_1d(v, bits)
            lloyd = lloyd_cluster(v, bits, seed=trial)
            assert exact.wcss <= lloyd.wcss + 1e-9 * max(1.0, lloyd.wcss)

    def test_monotone_in_k(self):
        rng = np.random.default_rng(1)
        for trial in range(30):
            v = rng.normal(size=int(rng.integers(20, 150)))
            w2 = exact_cluster_1d(v, 2).wcss
            w3 = exact_cluster_1d(v, 3).wcss
            w4 = exact_cluster_1d(v, 4).wcss
            assert w3 <= w2
            assert w4 <= w3


class TestAssign:
    def test_exact_centroid_hit(self):
        cb = Codebook(bits=2, centroids=np.array([-2.0, 0.0, 1.5, 9.0]), wcss=0.0)
        assert assign(np.array([9.0]), cb).tolist() == [3]

    def test_tie_goes_to_lower_index(self):
        cb = Codebook(bits=2, centroids=np.array([-5.0, 0.0, 2.0, 6.0]), wcss=0.0)
        assert assign(np.array([1.0]), cb).tolist() == [1]

    def test_linear_scan_example(self):
        cb = Codebook(bits=2, centroids=np.array([1.0, 5.0, 10.0, 20.0]), wcss=0.0)
        assert assign(np.array([0.9, 5.1, 9.7]), cb).tolist() == [0, 1, 2]

    def test_duplicate_centroids_pick_first(self):
        cb = Codebook(bits=2, centroids=np.array([0.0, 0.0, 10.0, 10.0]), wcss=0.0)
        # 5.0 is equidistant from every centroid, so index 0 wins the tie
        assert assign(np.array([0.0, 10.0, 5.0]), cb).tolist() == [0, 2, 0]

    @settings(max_examples=300)
    @given(st.data())
    def test_matches_brute_force(self, data):
        k = data.draw(st.sampled_from([4, 8, 16]))
        cents = np.sort(
            np.array(
                data.draw(
                    st.lists(
                        st.floats(-100, 100, allow_nan=False), min_size=k, max_size=k
                    )
                )
            )
        )
        value = data.draw(st.floats(-150, 150, allow_nan=False))
        # include engineered midpoints to exercise exact ties
        if data.draw(st.booleans()) and k >= 2:
            q = data.draw(st.integers(0, k - 2))
            value = (cents[q] + cents[q + 1]) / 2
        got = assign(np.array([value]), cents)[0]
        assert got == brute_force_assign(value, cents.tolist())

    @settings(max_examples=200)
    @given(st.data())
    def test_nearest_assignment_property(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        cents = np.sort(rng.normal(size=8))
        v = rng.normal(size=32)
        idx = assign(v, cents)
        chosen = np.abs(v - cents[idx])
        for q in range(8):
            assert (chosen <= np.abs(v - cents[q]) + 0.0).all()


class TestWcss:
    def test_zero_when_values_in_codebook(self):
        cents = np.array([1.0, 2.0, 3.0, 4.0])
        assert wcss_of(np.array([1.0, 4.0, 2.0]), cents) == 0.0

    def test_forced_arithmetic(self):
        assert wcss_of(np.array([0.0, 2.0]), np.array([1.0])) == 2.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        v = rng.normal(size=64)
        cents = np.sort(rng.normal(size=8))
        expected = sum(min((x - c) ** 2 for c in cents) for x in v)
        assert wcss_of(v, cents) == pytest.approx(expected, rel=1e-12)
