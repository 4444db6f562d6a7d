"""Dirichlet-process machinery shared by both samplers.

Partition state, Polya-urn assignment weights (including the
auxiliary-location scheme for non-conjugate models), and the
Escobar-West concentration parameter update.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateLikelihoodError, ParameterError


@dataclass(frozen=True)
class GammaPrior:
    """Shape/rate parameterization: mean = shape / rate."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ParameterError("gamma prior shape and rate must be positive")

    def log_pdf(self, x):
        return (
            self.shape * math.log(self.rate)
            - math.lgamma(self.shape)
            + (self.shape - 1.0) * np.log(x)
            - self.rate * x
        )

    def draw(self, rng):
        return rng.gamma(self.shape, 1.0 / self.rate)


class ClusterState:
    """Partition of N series plus per-cluster location payloads.

    ``s`` holds 0-based labels into ``locations``; every cluster is
    nonempty (compact_clusters restores this after a sweep) and the
    counts always match the histogram of ``s``.
    """

    def __init__(self, s, locations, alpha, check=True):
        self.s = np.asarray(s, dtype=int)
        self.locations = list(locations)
        self.alpha = float(alpha)
        if check:
            self.check_invariants()

    @property
    def n_series(self):
        return len(self.s)

    @property
    def n_clusters(self):
        return len(self.locations)

    @property
    def counts(self):
        return np.bincount(self.s, minlength=self.n_clusters)

    def check_invariants(self):
        if self.alpha < 0:
            raise ParameterError("alpha must be nonnegative")
        if self.n_clusters == 0 or self.s.min() < 0 or self.s.max() >= self.n_clusters:
            raise ParameterError("cluster labels out of range")
        if (self.counts == 0).any():
            raise ParameterError("empty cluster present; call compact_clusters")

    def copy(self):
        return ClusterState(self.s.copy(), list(self.locations), self.alpha, check=False)


def compact_clusters(state):
    """Drop empty clusters and relabel 0..M-1 in first-appearance order."""
    order = []
    seen = {}
    for label in state.s:
        if label not in seen:
            seen[label] = len(order)
            order.append(label)
    s = np.array([seen[label] for label in state.s], dtype=int)
    locations = [state.locations[old] for old in order]
    return ClusterState(s, locations, state.alpha)


def urn_weights(counts_minus_i, alpha, c_star, logliks):
    """Normalized Polya-urn assignment probabilities for one series.

    ``counts_minus_i`` are the occupancies n_{-i,m} of the existing
    clusters (the series' own membership already removed); ``logliks``
    holds one log-likelihood per existing cluster followed by one per
    auxiliary location. Existing clusters weigh n_{-i,m} * lik, each
    auxiliary weighs (alpha / c_star) * lik.
    """
    counts_minus_i = np.asarray(counts_minus_i, dtype=float)
    logliks = np.asarray(logliks, dtype=float)
    if c_star < 1:
        raise ParameterError("c_star must be >= 1")
    if len(logliks) != len(counts_minus_i) + c_star:
        raise ParameterError("need one log-likelihood per existing cluster and per auxiliary")
    with np.errstate(divide="ignore"):
        log_prior = np.concatenate(
            [np.log(counts_minus_i), np.full(c_star, np.log(alpha) - np.log(c_star))]
        )
    logw = log_prior + logliks
    if np.all(np.isinf(logw) & (logw < 0)):
        raise DegenerateLikelihoodError("all assignment weights are zero")
    w = np.exp(logw - logsumexp(logw))
    return w / w.sum()


def escobar_west_mixture(alpha, n_clusters, n_series, prior, eta):
    """Mixture odds and weight for the Escobar-West alpha update at a
    given beta draw eta: odds = (shape + M - 1) / (N * (rate - log eta))."""
    odds = (prior.shape + n_clusters - 1.0) / (n_series * (prior.rate - math.log(eta)))
    return odds, odds / (1.0 + odds)


def resample_alpha(alpha, n_clusters, n_series, prior, rng):
    """One draw from the Escobar-West conditional for the concentration.

    eta ~ Beta(alpha + 1, N); then alpha is drawn from a two-component
    gamma mixture with shapes (shape + M) and (shape + M - 1) and rate
    (rate - log eta).
    """
    if n_clusters < 1 or n_series < 1:
        raise ParameterError("need at least one cluster and one series")
    eta = rng.beta(alpha + 1.0, n_series)
    _, pi_eta = escobar_west_mixture(alpha, n_clusters, n_series, prior, eta)
    rate = prior.rate - math.log(eta)
    shape = prior.shape + n_clusters
    if rng.random() >= pi_eta:
        shape -= 1.0
    return rng.gamma(shape, 1.0 / rate)
