"""Serialization of chain draws: JSON manifest plus CSV tables."""

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from .dpcore import GammaPrior
from .errors import FormatError
from .gp import GpChainConfig, GpDraws
from .igmrf import IgmrfChainConfig, IgmrfDraws

_FMT = "%.17g"


def _config_dict(cfg):
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, GammaPrior):
            v = {"shape": v.shape, "rate": v.rate}
        elif isinstance(v, tuple):
            v = list(v)
        elif isinstance(v, np.ndarray):
            v = v.tolist()
        out[f.name] = v
    return out


def save_draws(draws, outdir):
    """Write one chain's draws: manifest.json, draws_assignments.csv,
    draws_locations.csv, draws_scalars.csv and (optionally) draws_f.csv."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    R, N = draws.s.shape
    T = draws.f.shape[2] if draws.f is not None else None
    manifest = {
        "manifest_version": 1,
        "kind": "draws",
        "model": draws.model,
        "n_draws": int(R),
        "n_series": int(N),
        "n_times": T,
        "seed": draws.config.seed,
        "accept_rate": draws.accept_rate,
        "config": _config_dict(draws.config),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    with open(outdir / "draws_assignments.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + [f"s{i + 1}" for i in range(N)])
        for r in range(R):
            w.writerow([int(draws.iteration[r])] + [int(v) for v in draws.s[r]])
    loc_header = (
        ["iteration", "cluster", "theta1", "theta2", "theta3"]
        if draws.model == "gp"
        else ["iteration", "cluster", "kappa"]
    )
    with open(outdir / "draws_locations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(loc_header)
        for r in range(R):
            loc = np.atleast_2d(np.asarray(draws.locations[r], dtype=float))
            if draws.model == "igmrf":
                loc = loc.reshape(-1, 1)
            for m in range(loc.shape[0]):
                w.writerow([int(draws.iteration[r]), m] + [_FMT % v for v in loc[m]])
    with open(outdir / "draws_scalars.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "alpha", "tau_eps", "M"])
        for r in range(R):
            w.writerow(
                [
                    int(draws.iteration[r]),
                    _FMT % draws.alpha[r],
                    _FMT % draws.tau_eps[r],
                    int(draws.n_clusters[r]),
                ]
            )
    if draws.f is not None:
        with open(outdir / "draws_f.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "series", "t", "value"])
            for r in range(R):
                it = int(draws.iteration[r])
                for i in range(N):
                    for j in range(T):
                        w.writerow([it, i, j, _FMT % draws.f[r, i, j]])


def load_draws(outdir):
    """Read a draws directory back into a GpDraws / IgmrfDraws object."""
    outdir = Path(outdir)
    manifest_path = outdir / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"{outdir}: missing manifest.json (not a draws directory)")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("kind") != "draws":
        raise FormatError(f"{outdir}: manifest is not a draws manifest")
    model = manifest["model"]
    assign = np.loadtxt(outdir / "draws_assignments.csv", delimiter=",", skiprows=1, ndmin=2)
    iteration = assign[:, 0].astype(int)
    s = assign[:, 1:].astype(int)
    scalars = np.loadtxt(outdir / "draws_scalars.csv", delimiter=",", skiprows=1, ndmin=2)
    locs_raw = np.loadtxt(outdir / "draws_locations.csv", delimiter=",", skiprows=1, ndmin=2)
    locations = []
    for it in iteration:
        rows = locs_raw[locs_raw[:, 0] == it]
        vals = rows[np.argsort(rows[:, 1]), 2:]
        locations.append(vals[:, 0] if model == "igmrf" else vals)
    f = None
    f_path = outdir / "draws_f.csv"
    if f_path.exists():
        raw = np.loadtxt(f_path, delimiter=",", skiprows=1, ndmin=2)
        R, N = s.shape
        T = int(raw[:, 2].max()) + 1
        f = np.empty((R, N, T))
        pos = {int(it): r for r, it in enumerate(iteration)}
        idx_r = np.vectorize(pos.__getitem__)(raw[:, 0].astype(int))
        f[idx_r, raw[:, 1].astype(int), raw[:, 2].astype(int)] = raw[:, 3]
    config_raw = dict(manifest["config"])
    for key in ("theta_prior", "tau_prior", "alpha_prior", "kappa_prior"):
        if key in config_raw and isinstance(config_raw[key], dict):
            config_raw[key] = GammaPrior(**config_raw[key])
    if "ladder" in config_raw and config_raw["ladder"] is not None:
        config_raw["ladder"] = tuple(config_raw["ladder"])
    common = dict(
        s=s,
        locations=locations,
        alpha=scalars[:, 1],
        tau_eps=scalars[:, 2],
        n_clusters=scalars[:, 3].astype(int),
        f=f,
        iteration=iteration,
        accept_rate=manifest["accept_rate"],
    )
    if model == "gp":
        return GpDraws(config=GpChainConfig(**config_raw), **common)
    return IgmrfDraws(config=IgmrfChainConfig(**config_raw), **common)
