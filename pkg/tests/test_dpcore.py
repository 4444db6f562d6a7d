import math

import numpy as np
import pytest

from growfn.dpcore import (
    ClusterState,
    GammaPrior,
    compact_clusters,
    escobar_west_mixture,
    resample_alpha,
    urn_weights,
)
from growfn.errors import DegenerateLikelihoodError, ParameterError


class TestGammaPrior:
    def test_log_pdf_matches_scipy(self):
        from scipy import stats

        p = GammaPrior(2.5, 0.7)
        for x in (0.1, 1.0, 4.2):
            assert abs(p.log_pdf(x) - stats.gamma.logpdf(x, 2.5, scale=1 / 0.7)) < 1e-12

    def test_draw_moments(self):
        rng = np.random.default_rng(0)
        p = GammaPrior(3.0, 2.0)
        xs = np.array([p.draw(rng) for _ in range(20000)])
        assert abs(xs.mean() - 1.5) < 0.03

    def test_validation(self):
        with pytest.raises(ParameterError):
            GammaPrior(0.0, 1.0)


class TestClusterState:
    def test_counts(self):
        st = ClusterState(np.array([0, 1, 0, 2, 1]), [1.0, 2.0, 3.0], alpha=1.0)
        assert np.array_equal(st.counts, [2, 2, 1])
        assert st.n_clusters == 3

    def test_invariants_reject_gap(self):
        with pytest.raises(ParameterError):
            ClusterState(np.array([0, 2]), [1.0, 2.0, 3.0], alpha=1.0)

    def test_compact_first_appearance_order(self):
        st = ClusterState(np.array([1, 0, 1, 2]), ["a", "b", "c"], alpha=0.5, check=False)
        out = compact_clusters(st)
        assert np.array_equal(out.s, [0, 1, 0, 2])
        assert out.locations == ["b", "a", "c"]

    def test_compact_drops_empty(self):
        st = ClusterState(np.array([0, 0, 2]), ["a", "b", "c"], alpha=0.5, check=False)
        out = compact_clusters(st)
        assert np.array_equal(out.s, [0, 0, 1])
        assert out.locations == ["a", "c"]


class TestUrnWeights:
    def test_equal_likelihood_reduces_to_prior(self):
        w = urn_weights([3, 2], alpha=1.5, c_star=3, logliks=np.zeros(5))
        total = 3 + 2 + 1.5
        assert np.allclose(w, [3 / total, 2 / total, 0.5 / total, 0.5 / total, 0.5 / total])

    def test_likelihood_tilts(self):
        w = urn_weights([1, 1], alpha=1.0, c_star=1, logliks=np.log([4.0, 1.0, 1.0]))
        assert np.allclose(w, [4 / 6, 1 / 6, 1 / 6])

    def test_sums_to_one_extreme_logs(self):
        w = urn_weights([5, 1], alpha=0.3, c_star=3, logliks=[-1e4, -1e4 + 3, -1e4, -1e4, -1e4])
        assert abs(w.sum() - 1.0) < 1e-12
        assert w[1] > w[0]

    def test_all_impossible_raises(self):
        with pytest.raises(DegenerateLikelihoodError):
            urn_weights([2], alpha=1.0, c_star=1, logliks=[-np.inf, -np.inf])

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            urn_weights([2, 1], alpha=1.0, c_star=2, logliks=[0.0, 0.0, 0.0])


class TestEscobarWest:
    def test_check_value(self):
        odds, pi = escobar_west_mixture(
            alpha=1.0, n_clusters=2, n_series=51, prior=GammaPrior(1.0, 1.0), eta=0.5
        )
        assert abs(odds - 2.0 / (51.0 * (1.0 - math.log(0.5)))) < 1e-12
        assert abs(pi - 0.022634) < 1e-5

    def test_resample_matches_mixture_density(self):
        # Long-run draws at fixed M should match the marginal density obtained
        # by integrating the gamma mixture over eta ~ Beta(alpha+1, N).
        from scipy import stats

        rng = np.random.default_rng(42)
        prior = GammaPrior(1.0, 1.0)
        M, N, alpha0 = 4, 30, 1.3
        draws = np.array([resample_alpha(alpha0, M, N, prior, rng) for _ in range(40000)])

        etas = np.random.default_rng(7).beta(alpha0 + 1.0, N, size=4000)
        grid_mean = 0.0
        for eta in etas:
            rate = prior.rate - math.log(eta)
            _, pi = escobar_west_mixture(alpha0, M, N, prior, eta)
            grid_mean += (pi * (prior.shape + M) + (1 - pi) * (prior.shape + M - 1)) / rate
        grid_mean /= len(etas)
        se = draws.std() / math.sqrt(len(draws))
        assert abs(draws.mean() - grid_mean) < 4 * se + 0.01

    def test_resample_deterministic(self):
        prior = GammaPrior(1.0, 1.0)
        a = resample_alpha(1.0, 3, 20, prior, np.random.default_rng(5))
        b = resample_alpha(1.0, 3, 20, prior, np.random.default_rng(5))
        assert a == b
