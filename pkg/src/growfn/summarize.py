"""Chain summaries: co-clustering probabilities, Dahl's least-squares
partition, credible bands, normalized MSPE and mis-clustering."""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class SelectedPartition:
    s: np.ndarray
    draw_index: int
    source_iteration: int
    loss: float


def pairwise_probability(s_draws):
    """N x N matrix of co-clustering frequencies over the retained draws."""
    s_draws = np.asarray(s_draws)
    if s_draws.ndim != 2 or s_draws.shape[0] < 1:
        raise ParameterError("need at least one retained assignment draw")
    acc = np.zeros((s_draws.shape[1], s_draws.shape[1]))
    for s in s_draws:
        acc += s[:, None] == s[None, :]
    return acc / s_draws.shape[0]


def dahl_select(s_draws, pairwise, iterations=None):
    """Pick the retained draw whose association matrix is closest to the
    pairwise probability matrix in squared Euclidean distance.

    Ties break toward the earliest draw.
    """
    s_draws = np.asarray(s_draws)
    losses = np.empty(s_draws.shape[0])
    for r, s in enumerate(s_draws):
        eq = (s[:, None] == s[None, :]).astype(float)
        losses[r] = float(np.sum((eq - pairwise) ** 2))
    best = int(np.argmin(losses))
    source = int(iterations[best]) if iterations is not None else best
    return SelectedPartition(s_draws[best].copy(), best, source, float(losses[best]))


def misclustering_rate(est, truth):
    """Fraction of off-diagonal pairwise co-clustering indicators that
    disagree between the two partitions."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ParameterError("partitions must have equal length")
    n = len(est)
    if n < 2:
        return 0.0
    e = est[:, None] == est[None, :]
    t = truth[:, None] == truth[None, :]
    disagree = np.sum(e != t) # diagonal always agrees
    return float(disagree) / (n * (n - 1))


def normalized_mspe(f_hat, test_index, f_true):
    """Mean squared prediction error over the held-out cells, divided by
    the (population) variance of the true values there; 1.0 is the
    constant-predictor baseline."""
    test_index = list(test_index)
    if len(test_index) < 2:
        raise ParameterError("need at least 2 test cells for the variance denominator")
    rows = np.array([i for i, _ in test_index])
    cols = np.array([j for _, j in test_index])
    truth = np.asarray(f_true)[rows, cols]
    pred = np.asarray(f_hat)[rows, cols]
    var = float(np.var(truth))  # n-denominator: constant predictor scores 1
    if var == 0.0:
        raise ParameterError("test-cell truth has zero variance")
    return float(np.mean((pred - truth) ** 2)) / var


def credible_bands(f_draws, level=0.95, standardization=None):
    """Pointwise posterior mean and equal-tailed band per (series, time).

    Returns (lower, mean, upper), each N x T. With standardization
    metadata the bands are mapped back to original units.
    """
    f_draws = np.asarray(f_draws)
    if f_draws.ndim != 3 or f_draws.shape[0] < 20:
        raise ParameterError("need at least 20 retained function draws")
    if not 0.0 <= level < 1.0:
        raise ParameterError("level must lie in [0, 1)")
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    lower = np.quantile(f_draws, lo_q, axis=0)
    upper = np.quantile(f_draws, hi_q, axis=0)
    mean = f_draws.mean(axis=0)
    if standardization is not None:
        sd = standardization[:, 1][:, None]
        mu = standardization[:, 0][:, None]
        lower = lower * sd + mu
        upper = upper * sd + mu
        mean = mean * sd + mu
    return lower, mean, upper
