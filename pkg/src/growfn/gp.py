"""Posterior sampler for the DP mixture of Gaussian processes.

Runs a sequential scan over cluster locations (rational quadratic
parameters, updated through tempered transitions with slice moves inside
a ladder of time-subset approximations), Polya-urn cluster assignments
with auxiliary locations, the Escobar-West concentration update, the
noise precision, and the latent functions. Two regimes: marginalized
(latent functions integrated out; fully observed panels) and co-sampled
(latent functions kept in the state; required under missingness).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import mcmc
from .dpcore import ClusterState, GammaPrior, compact_clusters, resample_alpha, urn_weights
from .errors import NumericError, ParameterError
from .kernels import (
    DEFAULT_NUGGET,
    RQParams,
    add_nugget,
    chol_logdet,
    chol_solve,
    rq_covariance,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GpChainConfig:
    iterations: int = 2000
    burn_in: int = 500
    thin: int = 1
    c_star: int = 3
    ladder: Optional[tuple] = None          # time-subset sizes, coarse last
    slice_width: float = 1.0
    theta_prior: GammaPrior = field(default_factory=lambda: GammaPrior(1.0, 1.0))
    tau_prior: GammaPrior = field(default_factory=lambda: GammaPrior(1.0, 1.0))
    alpha_prior: GammaPrior = field(default_factory=lambda: GammaPrior(1.0, 1.0))
    seed: int = 0
    store_f: bool = True
    force_regime: Optional[str] = None      # "marginal" | "cosample"
    single_cluster: bool = False            # ablation: alpha pinned, M fixed at 1
    fix_tau: Optional[float] = None         # known noise precision: skip tau updates
    fix_alpha: Optional[float] = None       # fixed concentration: skip alpha updates

    def resolved_ladder(self, T):
        ladder = self.ladder if self.ladder is not None else mcmc.default_ladder(T)
        ladder = tuple(int(v) for v in ladder)
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ParameterError("ladder sizes must be strictly decreasing")
        if any(not 5 <= v < T for v in ladder):
            raise ParameterError(f"ladder sizes must lie in [5, T) for T={T}")
        return ladder

    def validate(self, T):
        if self.burn_in >= self.iterations:
            raise ParameterError("burn_in must be smaller than iterations")
        if self.thin < 1 or self.c_star < 1:
            raise ParameterError("thin and c_star must be >= 1")
        self.resolved_ladder(T)


@dataclass
class GpDraws:
    """Retained posterior draws from one GP chain."""

    s: np.ndarray               # (R, N) cluster labels
    locations: list             # per draw: (M, 3) theta array
    alpha: np.ndarray           # (R,)
    tau_eps: np.ndarray         # (R,)
    n_clusters: np.ndarray      # (R,)
    f: Optional[np.ndarray]     # (R, N, T) or None
    iteration: np.ndarray       # (R,) 1-based iteration numbers
    accept_rate: float
    config: GpChainConfig
    model: str = "gp"


def _mvn_zero_loglik(y, L):
    """Summed log N(y | 0, A) over the columns of y, given the lower
    Cholesky factor L of A."""
    z = sla.solve_triangular(L, y, lower=True, check_finite=False)
    n = y.shape[0]
    k = 1 if y.ndim == 1 else y.shape[1]
    return -0.5 * (k * (n * LOG_2PI + chol_logdet(L)) + float(np.sum(z * z)))


def gp_marginal_loglik(ys, theta, tau_eps, times):
    """Sum over series of log N(y | 0, C(theta) + I/tau_eps).

    ``ys`` is an iterable of vectors fully observed on ``times``; the
    2*pi constant is included.
    """
    ymat = np.column_stack([np.asarray(y, dtype=float) for y in ys])
    ctau = add_nugget(rq_covariance(theta, times), tau_eps)
    L = ctau.cholesky()
    return _mvn_zero_loglik(ymat, L)


def predictive_f_draw(y, theta, tau_eps, times, rng):
    """Draw the de-noised function f | y for one fully observed series.

    f | y ~ N(m, V) with m = C (C + I/tau)^{-1} y and
    V = C - C (C + I/tau)^{-1} C.
    """
    c = rq_covariance(theta, times).matrix
    ctau = add_nugget(rq_covariance(theta, times), tau_eps)
    L = ctau.cholesky()
    m = c @ chol_solve(L, np.asarray(y, dtype=float))
    v = c - c @ chol_solve(L, c)
    v = 0.5 * (v + v.T)
    scale = max(float(np.mean(np.diag(c))), 1e-300)
    for jit in (0.0, 1e-12 * scale, 1e-10 * scale, 1e-8 * scale):
        try:
            lv = np.linalg.cholesky(v + jit * np.eye(len(v)))
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise NumericError("predictive covariance not PSD within jitter tolerance")
    return m + lv @ rng.standard_normal(len(v))


def draw_theta_from_base(prior, rng):
    """One rational quadratic location from the base measure G0 (iid gamma)."""
    return np.array([prior.draw(rng) for _ in range(3)])


class _GpEngine:
    """Owns the state and caches of one GP chain."""

    def __init__(self, panel, cfg):
        cfg.validate(panel.n_times)
        self.panel = panel
        self.cfg = cfg
        self.N, self.T = panel.values.shape
        self.times = panel.times
        self.rng = np.random.default_rng(cfg.seed)
        self.mask = panel.mask
        self.fully_observed = bool(panel.mask.all())
        if cfg.force_regime is not None:
            if cfg.force_regime not in ("marginal", "cosample"):
                raise ParameterError("force_regime must be 'marginal' or 'cosample'")
            if cfg.force_regime == "marginal" and not self.fully_observed:
                raise ParameterError("marginalized regime requires a fully observed panel")
            self.regime = cfg.force_regime
        else:
            self.regime = "marginal" if self.fully_observed else "cosample"
        self.ladder_sizes = cfg.resolved_ladder(self.T)
        self.ladder_idx = mcmc.ladder_time_indices(self.T, self.ladder_sizes)
        # Squared-lag matrices for the exact space and every ladder level;
        # the chain's kernel evaluations skip the checked CovMatrix path.
        from .kernels import unit_spaced

        t = unit_spaced(self.times)
        self._d2 = {None: (t[:, None] - t[None, :]) ** 2}
        for lvl, idx in enumerate(self.ladder_idx):
            tl = t[idx]
            self._d2[lvl] = (tl[:, None] - tl[None, :]) ** 2
        self.y = np.where(self.mask, panel.values, 0.0)
        # Initial state: one cluster, base-measure location, interpolated f.
        alpha0 = 0.0 if cfg.single_cluster else (
            cfg.fix_alpha if cfg.fix_alpha is not None else 1.0
        )
        self.state = ClusterState(
            np.zeros(self.N, dtype=int),
            [draw_theta_from_base(cfg.theta_prior, self.rng)],
            alpha0,
        )
        self.tau = cfg.fix_tau if cfg.fix_tau is not None else 1.0
        self.f = np.empty((self.N, self.T))
        for i in range(self.N):
            obs = self.mask[i]
            self.f[i] = np.interp(self.times, self.times[obs], panel.values[i, obs])
        self.accepts = 0
        self.proposals = 0
        self.n_obs_total = int(self.mask.sum())

    # ---- likelihood kernels -------------------------------------------------

    def _data_matrix(self, members):
        """Data the location kernel conditions on for a cluster's members."""
        if self.regime == "marginal":
            return self.y[members].T          # (T, n_m)
        return self.f[members].T

    def _rq_chol(self, theta_vec, level, tau=None):
        """Cholesky of the RQ covariance (plus noise or nugget diagonal)
        on the exact grid (level None) or one ladder level."""
        d2 = self._d2[level]
        th1, th2, th3 = theta_vec
        c = (1.0 / th1) * (1.0 + d2 / (th2 * th3)) ** (-th3)
        n = len(c)
        if self.regime == "marginal":
            c.flat[:: n + 1] += 1.0 / (self.tau if tau is None else tau)
        else:
            c.flat[:: n + 1] += DEFAULT_NUGGET / th1
        return np.linalg.cholesky(c)

    def _cluster_kernel(self, theta_vec, data, level):
        """Gaussian log-kernel of a cluster's data on a time-subset level.

        Marginal regime: y ~ N(0, C^tau); co-sampled regime: f ~ N(0, C
        + small nugget), both restricted to the level's time points.
        """
        try:
            L = self._rq_chol(theta_vec, level)
        except np.linalg.LinAlgError:
            return -np.inf
        d = data if level is None else data[self.ladder_idx[level]]
        return _mvn_zero_loglik(d, L)

    def _theta_logpdf(self, theta_vec, p, data, level):
        """Log posterior kernel of log(theta_p) with the others fixed."""
        prior = self.cfg.theta_prior

        def logpdf(x):
            if not -250.0 < x < 250.0:
                return -np.inf
            vec = theta_vec.copy()
            vec[p] = math.exp(x)
            kern = self._cluster_kernel(vec, data, level)
            return kern + float(prior.log_pdf(vec[p])) + x

        return logpdf

    def _tau_logpdf(self, level):
        """Marginal-regime log posterior kernel of log(tau_eps)."""
        prior = self.cfg.tau_prior
        by_cluster = [
            (self.state.locations[m], self._data_matrix(self.state.s == m))
            for m in range(self.state.n_clusters)
        ]

        def logpdf(x):
            if not -250.0 < x < 250.0:
                return -np.inf
            tau = math.exp(x)
            total = 0.0
            for theta_vec, data in by_cluster:
                try:
                    L = self._rq_chol(theta_vec, level, tau=tau)
                except np.linalg.LinAlgError:
                    return -np.inf
                total += _mvn_zero_loglik(data if level is None else data[self.ladder_idx[level]], L)
            return total + float(prior.log_pdf(tau)) + x

        return logpdf

    # ---- sweep steps --------------------------------------------------------

    def _tempered_scalar(self, exact, ladders, current_log):
        new_log, accepted, _ = mcmc.tempered_update_scalar(
            current_log, exact, ladders, self.cfg.slice_width, self.rng
        )
        self.proposals += 1
        self.accepts += int(accepted)
        return new_log

    def update_locations_and_tau(self):
        """Tempered updates of every theta*_{pm}; tau_eps too when marginalized."""
        for m in range(self.state.n_clusters):
            data = self._data_matrix(self.state.s == m)
            theta_vec = self.state.locations[m].copy()
            levels = range(len(self.ladder_idx))
            for p in range(3):
                exact = self._theta_logpdf(theta_vec, p, data, None)
                ladders = [self._theta_logpdf(theta_vec, p, data, lvl) for lvl in levels]
                new_log = self._tempered_scalar(exact, ladders, math.log(theta_vec[p]))
                theta_vec[p] = math.exp(new_log)
            self.state.locations[m] = theta_vec
        if self.regime == "marginal" and self.cfg.fix_tau is None:
            exact = self._tau_logpdf(None)
            ladders = [self._tau_logpdf(lvl) for lvl in range(len(self.ladder_idx))]
            self.tau = math.exp(self._tempered_scalar(exact, ladders, math.log(self.tau)))

    def _candidate_chol(self, theta_vec):
        try:
            return self._rq_chol(theta_vec, None)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"covariance not PD for theta={theta_vec}") from exc

    def _series_loglik(self, i, L):
        d = self.y[i] if self.regime == "marginal" else self.f[i]
        return _mvn_zero_loglik(d[:, None], L)

    def assignment_sweep(self):
        """Resample every cluster membership with c_star auxiliary locations."""
        c_star = self.cfg.c_star
        state = self.state
        chol_cache = {}

        def chol_for(m):
            if m not in chol_cache:
                chol_cache[m] = self._candidate_chol(state.locations[m])
            return chol_cache[m]

        for i in range(self.N):
            counts = state.counts
            counts[state.s[i]] -= 1
            singleton = counts[state.s[i]] == 0
            aux = [draw_theta_from_base(self.cfg.theta_prior, self.rng) for _ in range(c_star)]
            if singleton:
                # Neal's Algorithm 8: a singleton's current location serves
                # as one of the auxiliaries.
                aux[0] = state.locations[state.s[i]].copy()
            logliks = [self._series_loglik(i, chol_for(m)) for m in range(state.n_clusters)]
            aux_chols = [self._candidate_chol(vec) for vec in aux]
            logliks += [self._series_loglik(i, L) for L in aux_chols]
            w = urn_weights(counts, state.alpha, c_star, logliks)
            pick = int(self.rng.choice(len(w), p=w))
            if pick >= state.n_clusters:
                which = pick - state.n_clusters
                state.locations.append(aux[which])
                pick = state.n_clusters - 1
                chol_cache[pick] = aux_chols[which]
            old = state.s[i]
            state.s[i] = pick
            if singleton and pick != old:
                # Old cluster emptied: compact relabels by first appearance,
                # so rebuild the factor cache lazily.
                chol_cache.clear()
                self.state = state = compact_clusters(state)

    def cosample_f(self):
        """Gibbs draw of every latent function given its cluster's kernel."""
        inv_cache = {}
        for m in range(self.state.n_clusters):
            theta = RQParams.from_array(self.state.locations[m])
            cov = rq_covariance(theta, self.times)
            L = cov.cholesky(jitter=DEFAULT_NUGGET / theta.theta1)
            inv_cache[m] = chol_solve(L, np.eye(self.T))
        for i in range(self.N):
            phi = inv_cache[self.state.s[i]].copy()
            obs = self.mask[i]
            phi[np.diag_indices(self.T)] += self.tau * obs
            e = self.tau * np.where(obs, self.y[i], 0.0)
            try:
                lp = np.linalg.cholesky(phi)
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"co-sampling precision not PD for series {i}") from exc
            mean = sla.cho_solve((lp, True), e)
            z = sla.solve_triangular(lp, self.rng.standard_normal(self.T), lower=True, trans="T")
            self.f[i] = mean + z

    def gibbs_tau(self):
        """Conjugate tau_eps draw from the observed-cell residuals."""
        prior = self.cfg.tau_prior
        resid = np.where(self.mask, self.panel.values - self.f, 0.0)
        a1 = 0.5 * self.n_obs_total + prior.shape
        b1 = 0.5 * float(np.sum(resid * resid)) + prior.rate
        self.tau = self.rng.gamma(a1, 1.0 / b1)

    def predictive_f(self):
        for i in range(self.N):
            theta = RQParams.from_array(self.state.locations[self.state.s[i]])
            self.f[i] = predictive_f_draw(self.y[i], theta, self.tau, self.times, self.rng)

    # ---- main loop ----------------------------------------------------------

    def run(self):
        cfg = self.cfg
        kept_s, kept_loc, kept_alpha, kept_tau, kept_m, kept_f, kept_iter = (
            [], [], [], [], [], [], []
        )
        for it in range(1, cfg.iterations + 1):
            try:
                self.update_locations_and_tau()
                if not cfg.single_cluster:
                    self.assignment_sweep()
                    if cfg.fix_alpha is None:
                        self.state.alpha = resample_alpha(
                            self.state.alpha,
                            self.state.n_clusters,
                            self.N,
                            cfg.alpha_prior,
                            self.rng,
                        )
                if self.regime == "cosample":
                    self.cosample_f()
                    if cfg.fix_tau is None:
                        self.gibbs_tau()
                retained = it > cfg.burn_in and (it - cfg.burn_in - 1) % cfg.thin == 0
                if retained:
                    if self.regime == "marginal" and cfg.store_f:
                        self.predictive_f()
                    kept_s.append(self.state.s.copy())
                    kept_loc.append(np.array(self.state.locations))
                    kept_alpha.append(self.state.alpha)
                    kept_tau.append(self.tau)
                    kept_m.append(self.state.n_clusters)
                    kept_iter.append(it)
                    if cfg.store_f:
                        kept_f.append(self.f.copy())
            except NumericError as exc:
                raise NumericError(f"GP chain failed at iteration {it}: {exc}") from exc
        return GpDraws(
            s=np.array(kept_s),
            locations=kept_loc,
            alpha=np.array(kept_alpha),
            tau_eps=np.array(kept_tau),
            n_clusters=np.array(kept_m),
            f=np.array(kept_f) if cfg.store_f else None,
            iteration=np.array(kept_iter),
            accept_rate=self.accepts / max(self.proposals, 1),
            config=cfg,
        )


def run_gp_chain(panel, cfg):
    """Run one GP mixture chain on a panel; deterministic given cfg.seed.

    The regime is chosen automatically: marginalized when the panel is
    fully observed, co-sampled otherwise (missing cells are imputed from
    their posterior predictive distribution).
    """
    return _GpEngine(panel, cfg).run()
