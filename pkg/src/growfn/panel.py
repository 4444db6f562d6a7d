"""Panels of time series: ingestion, standardization, holdout splits.

A panel is an N x T value matrix with an observation mask, series labels
and an optional per-series standardization record used to map results
back to original units.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateSeriesError, FormatError, ParameterError, ParseError

MISSING_TOKENS = {"", "NA"}

_FMT = "%.17g"


def _freeze(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Panel:
    """Immutable N x T panel of (possibly partially observed) series."""

    values: np.ndarray          # (N, T), NaN where unobserved
    times: np.ndarray           # (T,)
    mask: np.ndarray            # (N, T) bool, True = observed
    series_ids: tuple
    standardization: Optional[np.ndarray] = None  # (N, 2): mean, sd

    def __post_init__(self):
        values = _freeze(np.asarray(self.values, dtype=float))
        mask = _freeze(np.asarray(self.mask, dtype=bool))
        times = _freeze(np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "series_ids", tuple(str(s) for s in self.series_ids))
        if self.standardization is not None:
            object.__setattr__(
                self, "standardization", _freeze(np.asarray(self.standardization, dtype=float))
            )
        n, t = values.shape
        if n < 1 or t < 2:
            raise ParameterError("panel must have N >= 1 series and T >= 2 time points")
        if mask.shape != (n, t):
            raise ParameterError("mask shape does not match values")
        if times.shape != (t,):
            raise ParameterError("times length does not match T")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("times must be strictly increasing")
        if len(self.series_ids) != n:
            raise ParameterError("series_ids length does not match N")
        if not mask.any(axis=1).all():
            bad = int(np.flatnonzero(~mask.any(axis=1))[0])
            raise ParameterError(f"series {self.series_ids[bad]} has no observed entries")

    @property
    def n_series(self):
        return self.values.shape[0]

    @property
    def n_times(self):
        return self.values.shape[1]

    @property
    def n_observed(self):
        return int(self.mask.sum())


@dataclass(frozen=True)
class HoldoutSplit:
    """A train panel with some observed cells masked out as a test set."""

    train: Panel
    test_index: tuple          # ((series, time), ...) integer index pairs
    test_truth: np.ndarray     # values at the held-out cells

    def __post_init__(self):
        object.__setattr__(self, "test_index", tuple((int(i), int(j)) for i, j in self.test_index))
        object.__setattr__(self, "test_truth", _freeze(np.asarray(self.test_truth, dtype=float)))


def _parse_cell(text, row, col):
    text = text.strip()
    if text in MISSING_TOKENS:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"cannot parse value {text!r} at row {row}, column {col}", row=row, column=col
        ) from None


def load_panel(path, layout="series-rows"):
    """Read a CSV panel in either ``series-rows`` or ``long-format`` layout.

    series-rows: one row per series, first column the id, remaining T
    columns the values. long-format: columns (series_id, time, value),
    with an optional header row. Missing cells are "NA" or empty.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty file")
    if layout == "series-rows":
        width = len(rows[0])
        ids, values = [], []
        for r, row in enumerate(rows):
            if len(row) != width:
                raise FormatError(f"{path}: ragged row {r} (expected {width} fields, got {len(row)})")
            ids.append(row[0])
            values.append([_parse_cell(c, r, j + 1) for j, c in enumerate(row[1:])])
        values = np.asarray(values, dtype=float)
        times = np.arange(1, values.shape[1] + 1, dtype=float)
        return Panel(values, times, ~np.isnan(values), ids)
    if layout == "long-format":
        if [c.strip().lower() for c in rows[0][:3]] == ["series_id", "time", "value"]:
            rows = rows[1:]
        records = {}
        times = set()
        for r, row in enumerate(rows):
            if len(row) != 3:
                raise FormatError(f"{path}: long-format row {r} needs 3 fields, got {len(row)}")
            sid = row[0].strip()
            t = _parse_cell(row[1], r, 1)
            if math.isnan(t):
                raise ParseError(f"missing time at row {r}", row=r, column=1)
            records.setdefault(sid, {})[t] = _parse_cell(row[2], r, 2)
            times.add(t)
        times = np.asarray(sorted(times))
        ids = list(records)
        values = np.full((len(ids), len(times)), np.nan)
        tpos = {t: j for j, t in enumerate(times)}
        for i, sid in enumerate(ids):
            for t, v in records[sid].items():
                values[i, tpos[t]] = v
        return Panel(values, times, ~np.isnan(values), ids)
    raise ParameterError(f"unknown layout {layout!r}")


def write_panel(panel, path, layout="series-rows"):
    """Write a panel back to CSV, mirroring one of the input layouts."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if layout == "series-rows":
            for i, sid in enumerate(panel.series_ids):
                row = [sid] + [
                    (_FMT % v if m else "NA") for v, m in zip(panel.values[i], panel.mask[i])
                ]
                w.writerow(row)
        elif layout == "long-format":
            w.writerow(["series_id", "time", "value"])
            for i, sid in enumerate(panel.series_ids):
                for j, t in enumerate(panel.times):
                    w.writerow([sid, _FMT % t, _FMT % panel.values[i, j] if panel.mask[i, j] else "NA"])
        else:
            raise ParameterError(f"unknown layout {layout!r}")


def standardize(panel):
    """Center and scale each series to mean 0, sd 1 over its observed cells.

    Uses the (n-1)-denominator sample sd. The per-series (mean, sd) pair
    is recorded for back-transformation. Idempotent on standardized input
    (composes the recorded transforms).
    """
    values = panel.values.copy()
    prev = panel.standardization
    record = np.zeros((panel.n_series, 2))
    for i in range(panel.n_series):
        obs = panel.mask[i]
        if obs.sum() < 2:
            raise DegenerateSeriesError(
                f"series {panel.series_ids[i]} has fewer than 2 observed entries"
            )
        mu = values[i, obs].mean()
        sd = values[i, obs].std(ddof=1)
        if sd == 0.0 or not np.isfinite(sd):
            raise DegenerateSeriesError(f"series {panel.series_ids[i]} has zero variance")
        values[i, obs] = (values[i, obs] - mu) / sd
        if prev is None:
            record[i] = (mu, sd)
        else:
            # y = m0 + s0 * (m1 + s1 * z)  =>  composed mean m0 + s0*m1, sd s0*s1
            record[i] = (prev[i, 0] + prev[i, 1] * mu, prev[i, 1] * sd)
    return Panel(values, panel.times, panel.mask, panel.series_ids, record)


def destandardize(panel):
    """Undo standardize, restoring original units."""
    if panel.standardization is None:
        return panel
    values = panel.values.copy()
    for i in range(panel.n_series):
        obs = panel.mask[i]
        mu, sd = panel.standardization[i]
        values[i, obs] = values[i, obs] * sd + mu
    return Panel(values, panel.times, panel.mask, panel.series_ids, None)


def _round_half_away(x):
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def make_holdout(panel, fraction, seed):
    """Mask a uniformly random fraction of the observed cells as a test set.

    The test count is round-half-away-from-zero(fraction * #observed);
    the choice of cells is deterministic given the seed.
    """
    if not 0.0 < fraction < 1.0:
        raise ParameterError("holdout fraction must lie in (0, 1)")
    obs = np.argwhere(panel.mask)
    n_test = _round_half_away(fraction * len(obs))
    if n_test < 1:
        raise ParameterError("holdout fraction leaves no test cells")
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(obs), size=n_test, replace=False)
    pick = np.sort(pick)
    cells = obs[pick]
    mask = panel.mask.copy()
    values = panel.values.copy()
    truth = values[cells[:, 0], cells[:, 1]].copy()
    mask[cells[:, 0], cells[:, 1]] = False
    values[cells[:, 0], cells[:, 1]] = np.nan
    train = Panel(values, panel.times, mask, panel.series_ids, panel.standardization)
    return HoldoutSplit(train, [tuple(c) for c in cells], truth)
