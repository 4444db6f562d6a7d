import numpy as np
import pytest

from growfn.draws import load_draws, save_draws
from growfn.errors import FormatError
from growfn.gp import GpChainConfig, run_gp_chain
from growfn.igmrf import IgmrfChainConfig, run_igmrf_chain
from growfn.panel import Panel


def _panel(N=3, T=12, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(N, T)).cumsum(axis=1)
    return Panel(
        values, np.arange(1.0, T + 1), np.ones((N, T), bool), [f"s{i}" for i in range(N)]
    )


class TestRoundTrip:
    def test_gp(self, tmp_path):
        cfg = GpChainConfig(iterations=25, burn_in=5, thin=2, ladder=(8, 6), seed=3)
        draws = run_gp_chain(_panel(), cfg)
        save_draws(draws, tmp_path)
        back = load_draws(tmp_path)
        assert back.model == "gp"
        assert np.array_equal(back.s, draws.s)
        assert np.array_equal(back.iteration, draws.iteration)
        assert np.array_equal(back.alpha, draws.alpha)
        assert np.array_equal(back.tau_eps, draws.tau_eps)
        assert np.array_equal(back.n_clusters, draws.n_clusters)
        assert np.array_equal(back.f, draws.f)
        for a, b in zip(back.locations, draws.locations):
            assert np.array_equal(np.asarray(a), np.asarray(b))
        assert back.config == cfg

    def test_igmrf(self, tmp_path):
        cfg = IgmrfChainConfig(iterations=30, burn_in=10, seed=1)
        draws = run_igmrf_chain(_panel(T=14), cfg)
        save_draws(draws, tmp_path)
        back = load_draws(tmp_path)
        assert back.model == "igmrf"
        assert np.array_equal(back.s, draws.s)
        assert np.array_equal(back.f, draws.f)
        for a, b in zip(back.locations, draws.locations):
            assert np.array_equal(np.asarray(a), np.asarray(b))
        assert back.config == cfg

    def test_no_f(self, tmp_path):
        cfg = GpChainConfig(iterations=12, burn_in=2, ladder=(8, 6), store_f=False)
        draws = run_gp_chain(_panel(), cfg)
        save_draws(draws, tmp_path)
        back = load_draws(tmp_path)
        assert back.f is None
        assert not (tmp_path / "draws_f.csv").exists()


class TestErrors:
    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FormatError):
            load_draws(tmp_path)

    def test_wrong_manifest_kind(self, tmp_path):
        (tmp_path / "manifest.json").write_text('{"kind": "other"}')
        with pytest.raises(FormatError):
            load_draws(tmp_path)
