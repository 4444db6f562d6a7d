"""End-to-end experiment drivers: simulate, fit both models, score.

Used by the ``reproduce`` CLI command and by the acceptance suite. The
"desk" scale shrinks the benchmark dimensions and chain lengths so a
full comparison runs in minutes on one core.
"""

from dataclasses import replace

import numpy as np

from .gp import GpChainConfig, run_gp_chain
from .igmrf import IgmrfChainConfig, run_igmrf_chain
from .panel import make_holdout
from .summarize import dahl_select, misclustering_rate, normalized_mspe, pairwise_probability
from .synth import SynthConfig, generate

SCALES = {
    "desk": dict(
        n_series=30,
        n_times=60,
        gp_iterations=2000,
        gp_burn_in=500,
        gp_thin=5,
        igmrf_iterations=8000,
        igmrf_burn_in=2000,
        igmrf_thin=10,
    ),
    "paper": dict(
        n_series=100,
        n_times=158,
        gp_iterations=10000,
        gp_burn_in=2000,
        gp_thin=10,
        igmrf_iterations=25000,
        igmrf_burn_in=5000,
        igmrf_thin=20,
    ),
}

GENERATOR_BY_SIM = {"sim1": "two-term-se", "sim2": "proper-gmrf"}


def chain_config(model, scale="desk", seed=0, **overrides):
    dims = SCALES[scale]
    if model == "gp":
        cfg = GpChainConfig(
            iterations=dims["gp_iterations"],
            burn_in=dims["gp_burn_in"],
            thin=dims["gp_thin"],
            seed=seed,
        )
    else:
        cfg = IgmrfChainConfig(
            iterations=dims["igmrf_iterations"],
            burn_in=dims["igmrf_burn_in"],
            thin=dims["igmrf_thin"],
            seed=seed,
        )
    return replace(cfg, **overrides) if overrides else cfg


def synth_config(sim, scale="desk", seed=0, **overrides):
    dims = SCALES[scale]
    base = dict(
        generator=GENERATOR_BY_SIM[sim],
        n_series=dims["n_series"],
        n_times=dims["n_times"],
        n_clusters=3,
        seed=seed,
    )
    base.update(overrides)
    return SynthConfig(**base)


def score_fit(draws, data, split):
    """Normalized MSPE at the held-out cells plus Dahl mis-clustering."""
    f_hat = draws.f.mean(axis=0)
    mspe = normalized_mspe(f_hat, split.test_index, data.f_true)
    pw = pairwise_probability(draws.s)
    selected = dahl_select(draws.s, pw, draws.iteration)
    return {
        "normalized_mspe": mspe,
        "misclustering": misclustering_rate(selected.s, data.s_true),
        "selected_n_clusters": int(len(np.unique(selected.s))),
        "mean_n_clusters": float(draws.n_clusters.mean()),
    }


def run_simulation(sim, seed, scale="desk", models=("gp", "igmrf"), holdout=0.1, **cfg_overrides):
    """Generate one benchmark replicate, fit the requested models on the
    10%-holdout panel, and score each against the known truth."""
    data = generate(synth_config(sim, scale, seed))
    split = make_holdout(data.panel, holdout, seed)
    results = {"sim": sim, "seed": seed, "scale": scale, "models": {}}
    for model in models:
        cfg = chain_config(model, scale, seed, **cfg_overrides.get(model, {}))
        if model == "gp":
            draws = run_gp_chain(split.train, cfg)
        else:
            draws = run_igmrf_chain(split.train, cfg)
        results["models"][model] = score_fit(draws, data, split)
    return results


def run_ablation(seed, scale="desk"):
    """Clustered vs clustering-disabled GP on the proper-GMRF benchmark."""
    data = generate(synth_config("sim2", scale, seed))
    split = make_holdout(data.panel, 0.1, seed)
    out = {"sim": "sim2", "seed": seed, "scale": scale, "models": {}}
    for label, single in (("gp", False), ("gp_no_clustering", True)):
        cfg = chain_config("gp", scale, seed, single_cluster=single)
        draws = run_gp_chain(split.train, cfg)
        out["models"][label] = score_fit(draws, data, split)
    return out
