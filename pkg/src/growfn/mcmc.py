"""Univariate slice sampling and tempered-transition updates.

The tempered move proposes through a ladder of coarse posteriors (built
from time subsets by the GP sampler), one slice update per level on the
way up and down, and accepts with the telescoping ratio that targets the
exact posterior.
"""

import math

import numpy as np

from .errors import NumericError

MAX_STEPOUT = 10**6


def slice_update(x, logpdf, width, rng, log_fx=None):
    """One stepping-out/shrinkage slice update (Neal 2003).

    Returns (x_new, logpdf(x_new)). ``log_fx`` may pass a cached
    logpdf(x) to save one evaluation.
    """
    if log_fx is None:
        log_fx = logpdf(x)
    log_y = log_fx + math.log(rng.random())
    u = rng.random()
    left = x - u * width
    right = left + width
    for _ in range(MAX_STEPOUT):
        if logpdf(left) <= log_y:
            break
        left -= width
    else:
        raise NumericError("slice stepping-out exceeded expansion limit (left)")
    for _ in range(MAX_STEPOUT):
        if logpdf(right) <= log_y:
            break
        right += width
    else:
        raise NumericError("slice stepping-out exceeded expansion limit (right)")
    while True:
        prop = left + rng.random() * (right - left)
        log_fp = logpdf(prop)
        if log_fp > log_y:
            return prop, log_fp
        if prop < x:
            left = prop
        elif prop > x:
            right = prop
        else:
            # Interval shrank to the current point; keep it.
            return x, log_fx


def tempered_update_scalar(current, exact_logpdf, ladder_logpdfs, slice_width, rng):
    """Tempered-transition update of one scalar.

    Levels are pi_0 = exact_logpdf and pi_1..pi_n = ladder_logpdfs
    (increasingly coarse). The proposal runs one slice update per level
    on the way up (targets pi_1..pi_{n-1}), one at the top (pi_n), and
    one per level on the way down, then accepts with the telescoped
    log-ratio

        sum_i [pi_{i+1}(up_i) - pi_i(up_i)] + [pi_i(down_i) - pi_{i+1}(down_i)].

    An empty ladder degenerates to a single always-accepted slice update
    on the exact posterior. Returns (value, accepted, log_ratio).
    """
    ladder = list(ladder_logpdfs)
    if not ladder:
        new, _ = slice_update(current, exact_logpdf, slice_width, rng)
        return new, True, 0.0
    n = len(ladder)
    levels = [exact_logpdf] + ladder
    # Cache every level evaluation the ratio needs; the slice updates
    # supply most of them as their entry/exit log-densities.
    up = [current]
    up_own = [exact_logpdf(current)]        # levels[i](up[i])
    up_next = []                            # levels[i+1](up[i])
    for i in range(1, n):
        entry = levels[i](up[-1])
        up_next.append(entry)
        x, fx = slice_update(up[-1], levels[i], slice_width, rng, log_fx=entry)
        up.append(x)
        up_own.append(fx)
    top_entry = levels[n](up[-1])
    up_next.append(top_entry)
    down = [None] * n
    down_own = [None] * n                   # levels[i](down[i])
    down_next = [None] * n                  # levels[i+1](down[i])
    down[n - 1], down_next[n - 1] = slice_update(
        up[-1], levels[n], slice_width, rng, log_fx=top_entry
    )
    for i in range(n - 1, 0, -1):
        entry = levels[i](down[i])
        down_own[i] = entry
        down[i - 1], down_next[i - 1] = slice_update(
            down[i], levels[i], slice_width, rng, log_fx=entry
        )
    down_own[0] = exact_logpdf(down[0])
    log_ratio = 0.0
    for i in range(n):
        log_ratio += up_next[i] - up_own[i]
        log_ratio += down_own[i] - down_next[i]
    if math.log(rng.random()) < log_ratio:
        return down[0], True, log_ratio
    return current, False, log_ratio


def ladder_time_indices(T, ladder_sizes):
    """Evenly spaced time-subset indices for each tempering level."""
    out = []
    for size in ladder_sizes:
        idx = np.unique(np.round(np.linspace(0, T - 1, int(size))).astype(int))
        out.append(idx)
    return out


def default_ladder(T):
    """Two-level ladder with roughly 63% and 38% of the time points."""
    return (math.ceil(0.63 * T), math.ceil(0.38 * T))
