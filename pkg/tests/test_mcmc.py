import math

import numpy as np
from scipy import stats

from growfn.mcmc import (
    default_ladder,
    ladder_time_indices,
    slice_update,
    tempered_update_scalar,
)


class TestSliceUpdate:
    def test_leaves_normal_invariant(self):
        rng = np.random.default_rng(1)
        logpdf = lambda x: -0.5 * (x - 2.0) ** 2
        x = 0.0
        xs = []
        for _ in range(20000):
            x, _ = slice_update(x, logpdf, 1.0, rng)
            xs.append(x)
        xs = np.array(xs[2000:])
        assert abs(xs.mean() - 2.0) < 0.05
        assert abs(xs.var() - 1.0) < 0.08

    def test_returns_logpdf_at_new_point(self):
        rng = np.random.default_rng(2)
        logpdf = lambda x: -abs(x)
        x, lf = slice_update(0.3, logpdf, 0.5, rng)
        assert abs(lf - logpdf(x)) < 1e-14

    def test_accepts_cached_density(self):
        rng = np.random.default_rng(3)
        logpdf = lambda x: -0.5 * x * x
        a = slice_update(1.0, logpdf, 1.0, np.random.default_rng(9), log_fx=logpdf(1.0))
        b = slice_update(1.0, logpdf, 1.0, np.random.default_rng(9))
        assert a == b

    def test_bimodal_mixes(self):
        rng = np.random.default_rng(4)
        logpdf = lambda x: np.logaddexp(-0.5 * (x + 3) ** 2, -0.5 * (x - 3) ** 2)
        x = -3.0
        visited_right = False
        for _ in range(5000):
            x, _ = slice_update(x, logpdf, 2.0, rng)
            if x > 2.0:
                visited_right = True
        assert visited_right


class TestTemperedUpdate:
    def test_identity_ladder_exact_zero_ratio(self):
        logpdf = lambda x: -0.5 * (x - 1.0) ** 2
        rng = np.random.default_rng(0)
        for _ in range(50):
            _, accepted, log_ratio = tempered_update_scalar(
                0.2, logpdf, [logpdf, logpdf], 1.0, rng
            )
            assert accepted
            assert abs(log_ratio) < 1e-10

    def test_empty_ladder_is_single_slice(self):
        logpdf = lambda x: -0.5 * x * x
        x, accepted, log_ratio = tempered_update_scalar(
            0.5, logpdf, [], 1.0, np.random.default_rng(11)
        )
        y, _ = slice_update(0.5, logpdf, 1.0, np.random.default_rng(11))
        assert accepted
        assert log_ratio == 0.0
        assert x == y

    def test_invariant_distribution(self):
        # Tempered transitions through widened surrogates must preserve the
        # exact target; compare long-run moments against the true N(0, 1).
        exact = lambda x: -0.5 * x * x
        ladder = [lambda x: -0.5 * x * x / 4.0, lambda x: -0.5 * x * x / 16.0]
        rng = np.random.default_rng(8)
        x = 0.0
        xs = []
        for _ in range(40000):
            x, _, _ = tempered_update_scalar(x, exact, ladder, 1.0, rng)
            xs.append(x)
        xs = np.array(xs[4000:])
        assert abs(xs.mean()) < 0.05
        assert abs(xs.var() - 1.0) < 0.08
        assert stats.kstest(xs[::20], "norm").pvalue > 1e-4

    def test_rejection_keeps_current(self):
        exact = lambda x: -0.5 * (x - 5.0) ** 2 * 50.0
        ladder = [lambda x: -0.5 * x * x / 100.0]
        rng = np.random.default_rng(3)
        saw_reject = False
        for _ in range(200):
            x, accepted, _ = tempered_update_scalar(5.0, exact, ladder, 1.0, rng)
            if not accepted:
                assert x == 5.0
                saw_reject = True
        assert saw_reject


class TestLadders:
    def test_default_ladder(self):
        assert default_ladder(158) == (100, 61)
        assert default_ladder(60) == (38, 23)

    def test_indices_even_and_unique(self):
        (idx,) = ladder_time_indices(158, [100])
        assert len(idx) == 100
        assert len(set(idx.tolist())) == 100
        assert idx[0] == 0 and idx[-1] == 157
        gaps = np.diff(idx)
        assert gaps.max() - gaps.min() <= 1

    def test_nested_sizes(self):
        a, b = ladder_time_indices(60, [38, 23])
        assert len(a) == 38 and len(b) == 23

    def test_full_size_is_identity(self):
        (idx,) = ladder_time_indices(20, [20])
        assert np.array_equal(idx, np.arange(20))
