"""Command-line front door: simulate, fit, summarize, reproduce."""

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments
from .draws import load_draws, save_draws
from .dpcore import GammaPrior
from .errors import GrowfnError, NumericError
from .gp import GpChainConfig, run_gp_chain
from .igmrf import IgmrfChainConfig, run_igmrf_chain
from .panel import load_panel, make_holdout, standardize
from .summarize import (
    credible_bands,
    dahl_select,
    misclustering_rate,
    normalized_mspe,
    pairwise_probability,
)
from .synth import SynthConfig, generate, load_synthetic_truth, save_synthetic

_FMT = "%.15g"


def _worker_count(requested):
    cap = os.environ.get("GROWFN_THREADS")
    if cap:
        return max(1, min(int(cap), requested))
    return max(1, requested)


def _write_manifest(outdir, payload):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = dict(payload)
    if "args" in payload:
        payload["args"] = {k: v for k, v in payload["args"].items() if k != "func"}
    payload.setdefault("manifest_version", 1)
    (outdir / "run_manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---- simulate ---------------------------------------------------------------


def cmd_simulate(args):
    cfg = SynthConfig(
        generator=args.generator,
        n_series=args.n_series,
        n_times=args.n_times,
        n_clusters=args.clusters,
        noise_to_signal=args.noise_to_signal,
        seed=args.seed,
        rho=args.rho,
        draw_locations=args.draw_locations,
    )
    data = generate(cfg)
    save_synthetic(data, args.outdir)
    _write_manifest(args.outdir, {"command": "simulate", "args": vars(args)})
    print(f"wrote synthetic bundle to {args.outdir}")
    return 0


# ---- fit --------------------------------------------------------------------


def _run_one_chain(model, panel, cfg):
    if model == "gp":
        return run_gp_chain(panel, cfg)
    return run_igmrf_chain(panel, cfg)


def _pool_draws(chunks):
    first = chunks[0]
    merged = dataclasses.replace(first) if dataclasses.is_dataclass(first) else first
    merged.s = np.concatenate([c.s for c in chunks])
    merged.locations = [loc for c in chunks for loc in c.locations]
    merged.alpha = np.concatenate([c.alpha for c in chunks])
    merged.tau_eps = np.concatenate([c.tau_eps for c in chunks])
    merged.n_clusters = np.concatenate([c.n_clusters for c in chunks])
    merged.iteration = np.concatenate(
        [c.iteration + k * int(c.iteration.max() + 1) for k, c in enumerate(chunks)]
    )
    if first.f is not None:
        merged.f = np.concatenate([c.f for c in chunks])
    merged.accept_rate = float(np.mean([c.accept_rate for c in chunks]))
    return merged


def cmd_fit(args):
    panel = load_panel(args.input, args.layout)
    if args.standardize:
        panel = standardize(panel)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    split = None
    if args.holdout is not None:
        split = make_holdout(panel, args.holdout, args.holdout_seed)
        panel = split.train
        with open(outdir / "holdout_truth.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["series", "t", "value"])
            for (i, j), v in zip(split.test_index, split.test_truth):
                w.writerow([i, j, _FMT % v])
    if args.model == "gp":
        cfg = GpChainConfig(
            iterations=args.iterations,
            burn_in=args.burn_in,
            thin=args.thin,
            c_star=args.c_star,
            ladder=tuple(int(v) for v in args.ladder.split(",")) if args.ladder else None,
            slice_width=args.slice_width,
            alpha_prior=GammaPrior(args.alpha_shape, 1.0),
            seed=args.seed,
            store_f=not args.no_store_f,
            single_cluster=args.single_cluster,
        )
    else:
        cfg = IgmrfChainConfig(
            iterations=args.iterations,
            burn_in=args.burn_in,
            thin=args.thin,
            alpha_prior=GammaPrior(args.alpha_shape, 1.0),
            seed=args.seed,
            store_f=not args.no_store_f,
        )
    if args.chains == 1:
        draws = _run_one_chain(args.model, panel, cfg)
    else:
        cfgs = [dataclasses.replace(cfg, seed=cfg.seed + k) for k in range(args.chains)]
        with ProcessPoolExecutor(max_workers=_worker_count(args.chains)) as pool:
            chunks = list(pool.map(_run_one_chain, [args.model] * args.chains, [panel] * args.chains, cfgs))
        draws = _pool_draws(chunks)
    save_draws(draws, outdir)
    _write_manifest(outdir, {"command": "fit", "args": vars(args)})
    print(f"wrote draws to {outdir} (accept rate {draws.accept_rate:.3f})")
    return 0


# ---- summarize --------------------------------------------------------------


def cmd_summarize(args):
    draws = load_draws(args.draws)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    pw = pairwise_probability(draws.s)
    np.savetxt(outdir / "pairwise.csv", pw, delimiter=",", fmt=_FMT)
    selected = dahl_select(draws.s, pw, draws.iteration)
    with open(outdir / "selected_partition.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "cluster"])
        for i, m in enumerate(selected.s):
            w.writerow([i, int(m)])
    metrics = {
        "n_draws": int(draws.s.shape[0]),
        "selected_source_iteration": selected.source_iteration,
        "selected_loss": selected.loss,
        "selected_n_clusters": int(len(np.unique(selected.s))),
        "cluster_count_distribution": {
            str(int(k)): int(v)
            for k, v in zip(*np.unique(draws.n_clusters, return_counts=True))
        },
        "mspe_convention": "posterior mean of f first, then squared error",
    }
    if draws.f is not None:
        lower, mean, upper = credible_bands(draws.f, args.level)
        with open(outdir / "bands.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["series", "t", "lower", "mean", "upper"])
            for i in range(mean.shape[0]):
                for j in range(mean.shape[1]):
                    w.writerow([i, j, _FMT % lower[i, j], _FMT % mean[i, j], _FMT % upper[i, j]])
    if args.truth:
        f_true, s_true = load_synthetic_truth(args.truth)
        metrics["misclustering"] = misclustering_rate(selected.s, s_true)
        holdout_path = Path(args.draws) / "holdout_truth.csv"
        if holdout_path.exists() and draws.f is not None:
            cells = np.loadtxt(holdout_path, delimiter=",", skiprows=1, ndmin=2)
            test_index = [(int(i), int(j)) for i, j in cells[:, :2]]
            metrics["normalized_mspe"] = normalized_mspe(draws.f.mean(axis=0), test_index, f_true)
    (outdir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    _write_manifest(outdir, {"command": "summarize", "args": vars(args)})
    print(f"wrote summaries to {outdir}")
    return 0


# ---- reproduce --------------------------------------------------------------


def cmd_reproduce(args):
    seeds = [int(v) for v in args.seeds.split(",")]
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results = []
    for seed in seeds:
        if args.experiment == "ablation":
            results.append(experiments.run_ablation(seed, args.scale))
        else:
            results.append(experiments.run_simulation(args.experiment, seed, args.scale))
    report = {"experiment": args.experiment, "scale": args.scale, "seeds": seeds, "runs": results}
    (outdir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    lines = [
        f"# Reproduction report: {args.experiment} ({args.scale} scale)",
        "",
        "| seed | model | normalized MSPE | mis-clustering | selected M |",
        "|------|-------|-----------------|----------------|------------|",
    ]
    for run in results:
        for model, m in run["models"].items():
            lines.append(
                f"| {run['seed']} | {model} | {m['normalized_mspe']:.3f} "
                f"| {m['misclustering']:.3f} | {m['selected_n_clusters']} |"
            )
    (outdir / "report.md").write_text("\n".join(lines) + "\n")
    _write_manifest(outdir, {"command": "reproduce", "args": vars(args)})
    print((outdir / "report.md").read_text())
    return 0


# ---- parser -----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="growfn",
        description="DP-mixture functional smoothing of noisy time-series panels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic benchmark bundle")
    p.add_argument("--generator", choices=["two-term-se", "proper-gmrf"], required=True)
    p.add_argument("--n-series", type=int, default=100)
    p.add_argument("--n-times", type=int, default=158)
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--noise-to-signal", type=float, default=0.20)
    p.add_argument("--rho", type=float, default=0.95)
    p.add_argument("--draw-locations", action="store_true", help="draw locations from hyperpriors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run an MCMC chain on a CSV panel")
    p.add_argument("--input", required=True)
    p.add_argument("--layout", choices=["series-rows", "long-format"], default="series-rows")
    p.add_argument("--model", choices=["gp", "igmrf"], required=True)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--c-star", type=int, default=3)
    p.add_argument("--ladder", default=None, help="comma-separated time-subset sizes, e.g. 100,60")
    p.add_argument("--slice-width", type=float, default=1.0)
    p.add_argument("--alpha-shape", type=float, default=1.0)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--holdout", type=float, default=None)
    p.add_argument("--holdout-seed", type=int, default=0)
    p.add_argument("--no-store-f", action="store_true")
    p.add_argument("--single-cluster", action="store_true", help="disable clustering (ablation)")
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("summarize", help="summarize a draws directory")
    p.add_argument("--draws", required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--truth", default=None, help="synthetic truth directory for metrics")
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("reproduce", help="run a benchmark comparison end to end")
    p.add_argument("experiment", choices=["sim1", "sim2", "ablation"])
    p.add_argument("--scale", choices=list(experiments.SCALES), default="desk")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    except (GrowfnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
