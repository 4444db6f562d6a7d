"""The two synthetic benchmarks: clustered two-term squared-exponential
GP draws and clustered proper order-2 GMRF draws, with calibrated noise
and known ground truth."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import NumericError, ParameterError
from .kernels import DEFAULT_NUGGET, SEParams, proper_gmrf_precision, rw2_structure, se_covariance
from .panel import Panel, write_panel

# Locations (theta*_{1,m,1}, theta*_{1,m,2}, theta*_{2,m,1}, theta*_{2,m,2})
# by cluster: a long length-scale term plus a short one per cluster.
DEFAULT_TWO_TERM_THETA = np.array(
    [
        [2.61, 0.38, 0.91],
        [3.00, 3.53, 1.56],
        [1.04, 2.26, 0.84],
        [0.22, 0.15, 0.71],
    ]
)


@dataclass(frozen=True)
class SynthConfig:
    generator: str = "two-term-se"          # or "proper-gmrf"
    n_series: int = 100
    n_times: int = 158
    n_clusters: int = 3
    noise_to_signal: float = 0.20
    seed: int = 0
    theta_star: Optional[np.ndarray] = None  # 4 x M; None = paper defaults or hyperprior draw
    draw_locations: bool = False             # draw locations from the generating hyperpriors
    rho: float = 0.95
    kappa_star: Optional[tuple] = None       # M-vector; None = Ga(1,1) draws

    def validate(self):
        if self.generator not in ("two-term-se", "proper-gmrf"):
            raise ParameterError(f"unknown generator {self.generator!r}")
        if self.n_clusters > self.n_series:
            raise ParameterError("need at least as many series as clusters")
        if not self.noise_to_signal > 0:
            raise ParameterError("noise_to_signal must be positive")
        if not abs(self.rho) < 1:
            raise ParameterError("rho must lie in (-1, 1)")


@dataclass
class SyntheticData:
    panel: Panel
    f_true: np.ndarray
    s_true: np.ndarray
    locations_true: np.ndarray
    tau_eps_true: float
    config: SynthConfig


def _random_disjoint_allocation(n_series, n_clusters, rng):
    """Uniform assignment, redrawn until every cluster is nonempty."""
    while True:
        s = rng.integers(0, n_clusters, size=n_series)
        if len(np.unique(s)) == n_clusters:
            return s


def _calibrate_noise(f, noise_to_signal):
    mean_var = float(np.var(f, axis=1, ddof=1).mean())
    return 1.0 / (noise_to_signal * mean_var)


def gen_two_term_se(cfg, rng=None):
    """Clustered functions from a sum of two squared-exponential kernels."""
    cfg.validate()
    if cfg.generator != "two-term-se":
        raise ParameterError("config generator is not two-term-se")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    M = cfg.n_clusters
    if cfg.theta_star is not None:
        theta = np.asarray(cfg.theta_star, dtype=float)
        if theta.shape != (4, M):
            raise ParameterError(f"theta_star must be 4 x {M}")
    elif cfg.draw_locations:
        theta = np.vstack(
            [
                rng.gamma(3.0, 1.0 / 3.0, size=M),   # vertical scale, long term
                rng.gamma(3.0, 1.0 / 2.0, size=M),   # long length scale
                rng.gamma(3.0, 1.0 / 3.0, size=M),   # vertical scale, short term
                rng.gamma(2.0, 1.0 / 5.0, size=M),   # short length scale
            ]
        )
    elif M == 3:
        theta = DEFAULT_TWO_TERM_THETA.copy()
    else:
        raise ParameterError("default theta_star table has M = 3 clusters; pass theta_star")
    times = np.arange(1, cfg.n_times + 1, dtype=float)
    chols = []
    for m in range(M):
        c = (
            se_covariance(SEParams(theta[0, m], theta[1, m]), times).matrix
            + se_covariance(SEParams(theta[2, m], theta[3, m]), times).matrix
        )
        jitter = DEFAULT_NUGGET * float(np.mean(np.diag(c)))
        try:
            chols.append(np.linalg.cholesky(c + jitter * np.eye(cfg.n_times)))
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"summed kernel for cluster {m} is not PSD") from exc
    s = _random_disjoint_allocation(cfg.n_series, M, rng)
    f = np.empty((cfg.n_series, cfg.n_times))
    for i in range(cfg.n_series):
        f[i] = chols[s[i]] @ rng.standard_normal(cfg.n_times)
    tau = _calibrate_noise(f, cfg.noise_to_signal)
    y = f + rng.standard_normal(f.shape) / math.sqrt(tau)
    panel = Panel(y, times, np.ones(f.shape, dtype=bool), [f"series-{i + 1:03d}" for i in range(cfg.n_series)])
    return SyntheticData(panel, f, s, theta, tau, cfg)


def gen_proper_gmrf(cfg, rng=None):
    """Clustered functions from a proper order-2 GMRF with precision
    kappa*_m (D - rho * Omega)."""
    cfg.validate()
    if cfg.generator != "proper-gmrf":
        raise ParameterError("config generator is not proper-gmrf")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    M = cfg.n_clusters
    if cfg.kappa_star is not None:
        kappas = np.asarray(cfg.kappa_star, dtype=float)
        if kappas.shape != (M,):
            raise ParameterError(f"kappa_star must have length {M}")
    else:
        kappas = rng.gamma(1.0, 1.0, size=M)
    structure = rw2_structure(cfg.n_times)
    times = np.arange(1, cfg.n_times + 1, dtype=float)
    # Draw f via the upper Cholesky factor of the precision matrix.
    upper_factors = []
    for m in range(M):
        prec = proper_gmrf_precision(structure, kappas[m], cfg.rho)
        try:
            upper_factors.append(np.linalg.cholesky(prec).T)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"precision for cluster {m} is not PD") from exc
    s = _random_disjoint_allocation(cfg.n_series, M, rng)
    f = np.empty((cfg.n_series, cfg.n_times))
    for i in range(cfg.n_series):
        z = rng.standard_normal(cfg.n_times)
        f[i] = sla.solve_triangular(upper_factors[s[i]], z, lower=False)
    tau = _calibrate_noise(f, cfg.noise_to_signal)
    y = f + rng.standard_normal(f.shape) / math.sqrt(tau)
    panel = Panel(y, times, np.ones(f.shape, dtype=bool), [f"series-{i + 1:03d}" for i in range(cfg.n_series)])
    return SyntheticData(panel, f, s, kappas, tau, cfg)


def generate(cfg, rng=None):
    if cfg.generator == "two-term-se":
        return gen_two_term_se(cfg, rng)
    return gen_proper_gmrf(cfg, rng)


def misclustering_truth_tables(s_true):
    """Pairwise co-clustering indicator matrix of the true partition."""
    s = np.asarray(s_true)
    return s[:, None] == s[None, :]


def save_synthetic(data, outdir):
    """Write the noisy panel plus truth sidecars and a manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_panel(data.panel, outdir / "panel.csv")
    np.savetxt(outdir / "f_true.csv", data.f_true, delimiter=",", fmt="%.15g")
    np.savetxt(outdir / "s_true.csv", data.s_true[None, :], delimiter=",", fmt="%d")
    np.savetxt(outdir / "locations_true.csv", np.atleast_2d(data.locations_true), delimiter=",", fmt="%.15g")
    cfg = data.config
    manifest = {
        "manifest_version": 1,
        "kind": "synthetic",
        "generator": cfg.generator,
        "n_series": cfg.n_series,
        "n_times": cfg.n_times,
        "n_clusters": cfg.n_clusters,
        "noise_to_signal": cfg.noise_to_signal,
        "seed": cfg.seed,
        "rho": cfg.rho,
        "tau_eps_true": data.tau_eps_true,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_synthetic_truth(outdir):
    outdir = Path(outdir)
    f_true = np.loadtxt(outdir / "f_true.csv", delimiter=",", ndmin=2)
    s_true = np.loadtxt(outdir / "s_true.csv", delimiter=",", dtype=int, ndmin=2)[0]
    return f_true, s_true
