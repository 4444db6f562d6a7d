import numpy as np
import pytest

from growfn.dpcore import ClusterState, GammaPrior
from growfn.igmrf import (
    IgmrfChainConfig,
    conditional_mean_weights,
    gibbs_f_sweep,
    gibbs_kappa_update,
    igmrf_assignment_sweep,
    log_new_cluster_marginal,
    run_igmrf_chain,
)
from growfn.kernels import rw2_structure
from growfn.panel import Panel


def _toy_panel(N=5, T=14, seed=0, missing=None):
    rng = np.random.default_rng(seed)
    times = np.arange(1.0, T + 1.0)
    smooth = np.sin(times[None, :] / 3.0 + rng.uniform(0, 6, size=(N, 1)))
    values = smooth + 0.3 * rng.normal(size=(N, T))
    mask = np.ones((N, T), bool)
    if missing:
        for i, j in missing:
            mask[i, j] = False
    return Panel(np.where(mask, values, np.nan), times, mask, [f"s{i}" for i in range(N)])


class TestConditionalMean:
    def test_interior_weights(self):
        s = rw2_structure(10)
        idx, w = conditional_mean_weights(s, 5)
        assert np.array_equal(idx, [3, 4, 6, 7])
        assert np.allclose(w, [-1 / 6, 4 / 6, 4 / 6, -1 / 6])

    def test_edge_weights(self):
        s = rw2_structure(10)
        idx, w = conditional_mean_weights(s, 0)
        assert np.array_equal(idx, [1, 2])
        assert np.allclose(w, [2.0, -1.0])


class TestGibbsFSweep:
    def test_posterior_mean_closed_form(self):
        # Long-run average of the single-site sweep must match the joint
        # conditional mean (tau*I + kappa*Q)^{-1} tau*y.
        T, kappa, tau = 12, 4.0, 2.5
        structure = rw2_structure(T)
        rng = np.random.default_rng(1)
        y = np.sin(np.arange(T) / 2.0)[None, :] + 0.1 * rng.normal(size=(1, T))
        mask = np.ones((1, T), bool)
        prec = tau * np.eye(T) + kappa * structure.Q
        target = np.linalg.solve(prec, tau * y[0])
        cov = np.linalg.inv(prec)

        f = y.copy()
        draws = []
        for r in range(8000):
            f = gibbs_f_sweep(f, y, mask, [0], [kappa], tau, structure, rng)
            if r >= 500:
                draws.append(f[0].copy())
        draws = np.array(draws)
        se = np.sqrt(np.diag(cov) / len(draws)) * 6  # autocorrelated sweep
        assert np.all(np.abs(draws.mean(axis=0) - target) < 3 * se + 0.01)

    def test_missing_cells_fall_back_to_prior_mean(self):
        T = 10
        structure = rw2_structure(T)
        rng = np.random.default_rng(2)
        y = np.zeros((1, T))
        mask = np.ones((1, T), bool)
        mask[0, 4] = False
        f = np.linspace(0.0, 1.0, T)[None, :].copy()
        out = gibbs_f_sweep(f, y, mask, [0], [1e6], 1.0, structure, rng)
        # huge kappa: site 4 pinned to its stencil mean, i.e. stays on the line
        line = np.linspace(0.0, 1.0, T)
        assert abs(out[0, 4] - line[4]) < 0.05


class TestKappaUpdate:
    def test_shape_arithmetic(self):
        # 3 members, T=10, gamma shape 1 -> posterior shape 0.5*3*8 + 1 = 13
        structure = rw2_structure(10)
        rng = np.random.default_rng(0)
        f = rng.normal(size=(3, 10))
        prior = GammaPrior(1.0, 0.1)
        draws = np.array(
            [
                gibbs_kappa_update(f, [0, 0, 0], structure, prior, rng)[0]
                for _ in range(40000)
            ]
        )
        b2 = 0.5 * sum(np.sum(np.diff(fi, n=2) ** 2) for fi in f) + prior.rate
        assert abs(draws.mean() - 13.0 / b2) < 0.02 * (13.0 / b2)
        assert abs(draws.var() - 13.0 / b2**2) < 0.05 * (13.0 / b2**2)

    def test_polynomial_members_warn_and_use_prior(self):
        structure = rw2_structure(10)
        f = np.outer(np.ones(2), np.arange(10.0))  # exactly linear
        msgs = []
        rng = np.random.default_rng(1)
        k = gibbs_kappa_update(f, [0, 0], structure, GammaPrior(1.0, 1.0), rng, warn=msgs.append)
        assert len(msgs) == 1
        assert k[0] > 0


class TestAssignmentSweep:
    def test_new_cluster_marginal_value(self):
        # d0 = b^a Gamma(a + (T-2)/2) / (Gamma(a) (b + b_i)^(a + (T-2)/2))
        from scipy.special import gammaln

        prior = GammaPrior(1.5, 0.5)
        b_i, eff_dim = 2.0, 8
        expected = (
            1.5 * np.log(0.5)
            - gammaln(1.5)
            + gammaln(1.5 + 4.0)
            - (1.5 + 4.0) * np.log(0.5 + 2.0)
        )
        assert abs(log_new_cluster_marginal(b_i, eff_dim, prior) - expected) < 1e-12

    def test_new_cluster_marginal_is_integral(self):
        # Monte Carlo check of the closed-form integral over G0.
        prior = GammaPrior(1.0, 0.1)
        b_i, eff_dim = 0.7, 10
        rng = np.random.default_rng(3)
        ks = rng.gamma(prior.shape, 1.0 / prior.rate, size=400000)
        mc = np.log(np.mean(ks ** (eff_dim / 2.0) * np.exp(-ks * b_i)))
        assert abs(mc - log_new_cluster_marginal(b_i, eff_dim, prior)) < 0.02

    def test_sweep_keeps_labels_compact(self):
        structure = rw2_structure(12)
        rng = np.random.default_rng(4)
        f = rng.normal(size=(8, 12)).cumsum(axis=1)
        state = ClusterState(np.zeros(8, dtype=int), [1.0], alpha=1.0)
        prior = GammaPrior(1.0, 0.1)
        for _ in range(50):
            state.locations = list(gibbs_kappa_update(f, state.s, structure, prior, rng))
            state = igmrf_assignment_sweep(state, f, structure, prior, rng)
            state.check_invariants()
            assert len(state.locations) == state.n_clusters


class TestChain:
    def test_runs_and_shapes(self):
        draws = run_igmrf_chain(
            _toy_panel(), IgmrfChainConfig(iterations=80, burn_in=30, thin=2, seed=0)
        )
        assert draws.s.shape == (25, 5)
        assert draws.f.shape == (25, 5, 14)
        assert np.all(draws.tau_eps > 0)
        assert draws.accept_rate == 1.0

    def test_handles_missing(self):
        draws = run_igmrf_chain(
            _toy_panel(missing=[(1, 3), (4, 13)]),
            IgmrfChainConfig(iterations=40, burn_in=10, seed=2),
        )
        assert np.isfinite(draws.f).all()

    def test_determinism(self):
        panel = _toy_panel()
        cfg = IgmrfChainConfig(iterations=40, burn_in=10, seed=5)
        a = run_igmrf_chain(panel, cfg)
        b = run_igmrf_chain(panel, cfg)
        assert np.array_equal(a.s, b.s)
        assert np.array_equal(a.tau_eps, b.tau_eps)

    def test_smooths_toward_truth(self):
        rng = np.random.default_rng(9)
        T = 30
        times = np.arange(1.0, T + 1)
        truth = np.sin(times / 4.0)
        y = truth[None, :] + 0.4 * rng.normal(size=(6, T))
        panel = Panel(y, times, np.ones((6, T), bool), [f"s{i}" for i in range(6)])
        draws = run_igmrf_chain(panel, IgmrfChainConfig(iterations=600, burn_in=200, seed=0))
        fhat = draws.f.mean(axis=0)
        raw_err = np.mean((y - truth[None, :]) ** 2)
        fit_err = np.mean((fhat - truth[None, :]) ** 2)
        assert fit_err < raw_err
