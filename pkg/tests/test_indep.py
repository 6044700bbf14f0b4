import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layerdag.exceptions import InvalidParameterError
from layerdag.indep import QUADRATIC_MAX_N, all_independent, dcov_sq, indep_test, pair_seed


def dcov_brute(x, y):
    """Double-centered distance matrices, averaged elementwise product."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    a = np.array([[abs(x[i] - x[j]) for j in range(n)] for i in range(n)])
    b = np.array([[abs(y[i] - y[j]) for j in range(n)] for i in range(n)])
    A = a - a.mean(axis=0) - a.mean(axis=1)[:, None] + a.mean()
    Bm = b - b.mean(axis=0) - b.mean(axis=1)[:, None] + b.mean()
    return float((A * Bm).sum() / n**2)


class TestDcov:
    def test_small_example(self):
        assert dcov_sq([1, 2, 3], [1, 3, 2]) == pytest.approx(dcov_brute([1, 2, 3], [1, 3, 2]), abs=1e-12)

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 51))
            x, y = rng.standard_normal(n), rng.standard_normal(n) + rng.standard_normal(n) * 0.3
            assert abs(dcov_sq(x, y) - dcov_brute(x, y)) <= 1e-12

    def test_ties(self, rng):
        x = rng.integers(0, 4, 40).astype(float)
        y = rng.integers(0, 3, 40).astype(float)
        assert abs(dcov_sq(x, y) - dcov_brute(x, y)) <= 1e-12

    @given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=2, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_property_matches_oracle(self, pairs):
        x, y = map(np.array, zip(*pairs))
        ref = dcov_brute(x, y)
        scale = max(1.0, np.abs(x).max() * np.abs(y).max())
        assert abs(dcov_sq(x, y) - ref) <= 1e-12 * scale * 10
        assert dcov_sq(x, y) >= 0

    def test_symmetric_and_invariant(self, rng):
        x, y = rng.standard_normal(30), rng.standard_normal(30)
        v = dcov_sq(x, y)
        assert dcov_sq(y, x) == pytest.approx(v, rel=1e-12)
        assert dcov_sq(x + 5, y - 2) == pytest.approx(v, rel=1e-10)
        assert dcov_sq(2 * x, y) == pytest.approx(2 * v, rel=1e-10)
        perm = rng.permutation(30)
        assert dcov_sq(x[perm], y[perm]) == pytest.approx(v, rel=1e-10)

    def test_constant_input(self):
        assert dcov_sq(np.ones(5), np.arange(5.0)) == 0.0

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            dcov_sq([1, 2], [1, 2, 3])
        with pytest.raises(InvalidParameterError):
            dcov_sq([1], [1])


class TestPermutationTest:
    def test_dependent_rejects(self, rng):
        x = rng.uniform(-1, 1, 200)
        y = x**2 + 0.05 * rng.standard_normal(200)
        res = indep_test(x, y, alpha=0.01, n_perm=199, seed=0)
        assert res.reject and res.p_value == pytest.approx(1 / 200)

    def test_p_value_grid_and_reproducibility(self, rng):
        x, y = rng.standard_normal(50), rng.standard_normal(50)
        r1 = indep_test(x, y, n_perm=99, seed=3)
        r2 = indep_test(x, y, n_perm=99, seed=3)
        assert r1 == r2
        assert r1.p_value * 100 == pytest.approx(round(r1.p_value * 100))
        assert r1.statistic == pytest.approx(dcov_sq(x, y), rel=1e-10)

    def test_both_kernels_agree(self, rng):
        n = QUADRATIC_MAX_N + 1
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        res = indep_test(x, y, n_perm=49, seed=1)
        assert res.statistic == pytest.approx(dcov_sq(x, y), rel=1e-10)
        small = indep_test(x[:-1], y[:-1], n_perm=49, seed=1)
        assert small.statistic == pytest.approx(dcov_sq(x[:-1], y[:-1]), rel=1e-10)

    def test_constant_input(self):
        res = indep_test(np.ones(10), np.arange(10.0))
        assert res.p_value == 1.0 and not res.reject

    def test_level_calibration(self):
        rng = np.random.default_rng(2024)
        rejections = sum(indep_test(rng.uniform(-3, 3, 60), rng.uniform(-3, 3, 60), alpha=0.05,
                                    n_perm=99, seed=i).reject for i in range(300))
        assert abs(rejections / 300 - 0.05) < 0.035

    def test_sequential_stopping(self, rng):
        x, y = rng.standard_normal(100), rng.standard_normal(100)
        res = indep_test(x, y, n_perm=4999, seed=0, stop_after=10)
        assert res.n_permutations < 4999
        assert res.p_value == pytest.approx(10 / res.n_permutations)
        # a clearly dependent pair runs to the end and gets the smallest p-value
        dep = indep_test(x, x + 0.1 * y, n_perm=999, seed=0, stop_after=10)
        assert dep.n_permutations == 999 and dep.p_value == pytest.approx(1 / 1000)

    def test_sequential_matches_full_until_stop(self, rng):
        x, y = rng.standard_normal(80), rng.standard_normal(80)
        full = indep_test(x, y, n_perm=999, seed=5)
        seq = indep_test(x, y, n_perm=999, seed=5, stop_after=999)
        assert seq.p_value == full.p_value

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            indep_test(np.arange(3.0), np.arange(3.0))
        with pytest.raises(InvalidParameterError):
            indep_test(np.arange(9.0), np.arange(9.0), alpha=1.5)
        with pytest.raises(InvalidParameterError):
            indep_test(np.arange(9.0), np.arange(9.0), n_perm=0)
        with pytest.raises(InvalidParameterError):
            indep_test(np.arange(9.0), np.arange(9.0), stop_after=0)


class TestAllIndependent:
    def test_early_stop_and_full_grid(self, rng):
        n = 150
        X = rng.uniform(-1, 1, (n, 4))
        e = X[:, 2] ** 2 + 0.01 * rng.standard_normal(n)
        ok, res = all_independent(e, X, [0, 1, 2, 3], n_perm=99, seed=0, node=9)
        assert not ok and max(res) == 2
        ok, res = all_independent(e, X, [3, 0, 2, 1], n_perm=99, seed=0, node=9, stop_early=False)
        assert not ok and sorted(res) == [0, 1, 2, 3]
        assert res[2].reject

    def test_stop_below(self, rng):
        n = 150
        X = rng.uniform(-1, 1, (n, 4))
        e = X[:, 1] ** 2 + 0.01 * rng.standard_normal(n)
        _, full = all_independent(e, X, [0, 1, 2, 3], n_perm=99, seed=0, stop_early=False)
        _, cut = all_independent(e, X, [0, 1, 2, 3], n_perm=99, seed=0, stop_early=False, stop_below=0.05)
        assert sorted(cut) == [0, 1]
        assert all(cut[k] == full[k] for k in cut)

    def test_bonferroni_raises_permutations(self, rng):
        X = rng.uniform(-1, 1, (60, 5))
        e = rng.uniform(-1, 1, 60)
        _, res = all_independent(e, X, range(5), alpha=0.01, n_perm=19, bonferroni=True, stop_early=False)
        # per-test level 0.002 needs 2 / (B + 1) <= 0.002
        assert all(r.n_permutations == 999 for r in res.values())

    def test_independent_passes(self, rng):
        X = rng.uniform(-1, 1, (120, 3))
        e = rng.uniform(-1, 1, 120)
        ok, res = all_independent(e, X, [0, 1, 2], alpha=0.01, n_perm=99, seed=4, bonferroni=True)
        assert ok
        assert all(r.alpha == pytest.approx(0.01 / 3) for r in res.values())

    def test_empty_partner_set(self):
        assert all_independent(np.arange(5.0), np.zeros((5, 1)), []) == (True, {})

    def test_pair_seeds_distinct(self):
        a = pair_seed(0, 1, 2).generate_state(2)
        b = pair_seed(0, 2, 1).generate_state(2)
        assert not np.array_equal(a, b)
