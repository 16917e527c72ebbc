"""Attribution of observed counts to background and triggering sources.

Given counts and a model, each cell total splits across its background
cell and its active sources in proportion to their rate shares.  The
conditional mean of every part is the count times its rate share for both
building-block families; only the conditional variance feels the
dispersion, through the inflation factor
``kappa = (rate + phi * count) / (rate + phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import conditional_split_sample
from .model import CountSeries, ModelSpec, RateField, TriggerMap, compute_rates
from .simulator import CascadeDecomposition

__all__ = [
    "ConditionalWeights",
    "ConditionalVariance",
    "conditional_weights",
    "conditional_expectation",
    "conditional_variance",
    "conditional_sample",
    "total_triggered",
    "cascade_sizes",
]


@dataclass(frozen=True)
class ConditionalWeights:
    """Rate shares of each cell: background share plus one share per source.

    For every cell the background share and its triggered shares sum to
    one; they are the split probabilities of the cell's count.
    """

    background_share: np.ndarray
    triggered_share: TriggerMap


@dataclass(frozen=True)
class ConditionalVariance:
    """Conditional variances of the latent parts, mirroring the mean layout."""

    background: np.ndarray
    triggered: TriggerMap


def _rates(model: ModelSpec, counts: CountSeries, rates: RateField | None) -> RateField:
    return compute_rates(model, counts) if rates is None else rates


def conditional_weights(
    model: ModelSpec, counts: CountSeries, rates: RateField | None = None
) -> ConditionalWeights:
    """Normalized rate shares ``background/total`` and ``trigger/total``."""
    field = _rates(model, counts, rates)
    shares = field.triggered.value / field.total[field.triggered.i, field.triggered.t]
    return ConditionalWeights(
        background_share=field.background / field.total,
        triggered_share=TriggerMap(
            field.triggered.i,
            field.triggered.t,
            field.triggered.j,
            field.triggered.s,
            shares,
        ),
    )


def conditional_expectation(
    model: ModelSpec, counts: CountSeries, rates: RateField | None = None
) -> CascadeDecomposition:
    """Minimum-squared-error estimate of the latent decomposition.

    Every part's conditional mean is the cell count times the part's rate
    share; the dispersion does not enter.  Cells whose rate is pure
    background keep their whole count there.  Entries are stored only for
    sources of cells with positive counts.
    """
    field = _rates(model, counts, rates)
    n = counts.counts
    background = n * (field.background / field.total)
    trig = field.triggered
    values = trig.value * n[trig.i, trig.t] / field.total[trig.i, trig.t]
    keep = values > 0.0
    triggered = TriggerMap(
        trig.i[keep], trig.t[keep], trig.j[keep], trig.s[keep], values[keep]
    )
    return CascadeDecomposition(background=background, triggered=triggered, mode="expected")


def conditional_variance(
    model: ModelSpec, counts: CountSeries, rates: RateField | None = None
) -> ConditionalVariance:
    """Conditional variances of the latent parts given the counts.

    With dispersion zero each part is a multinomial cell with variance
    ``n * share * (1 - share)``; positive dispersion inflates that by
    ``kappa = (rate + phi * n) / (rate + phi)``, which is one whenever the
    cell count is one.
    """
    field = _rates(model, counts, rates)
    n = counts.counts
    phi = model.dispersion
    kappa = (field.total + phi * n) / (field.total + phi)
    share_bg = field.background / field.total
    background = kappa * n * share_bg * (1.0 - share_bg)
    trig = field.triggered
    shares = trig.value / field.total[trig.i, trig.t]
    values = (
        kappa[trig.i, trig.t] * n[trig.i, trig.t] * shares * (1.0 - shares)
    )
    return ConditionalVariance(
        background=background,
        triggered=TriggerMap(trig.i, trig.t, trig.j, trig.s, values),
    )


def conditional_sample(
    model: ModelSpec, counts: CountSeries, seed, rates: RateField | None = None
) -> CascadeDecomposition:
    """Draw one latent decomposition consistent with the observed counts.

    Each cell's count is split across its background cell and active
    sources by :func:`conditional_split_sample` with the cell's rate
    components as weights.  Cells with no active sources keep their count
    as background without consuming randomness.  Deterministic given
    ``seed``; cells are visited in time-major order.
    """
    field = _rates(model, counts, rates)
    n = counts.counts
    rng = np.random.default_rng(seed)
    background = n.astype(np.int64).copy()
    trig = field.triggered

    order = np.lexsort((trig.j, trig.s, trig.i, trig.t))
    ti, tt = trig.i[order], trig.t[order]
    tj, ts, tv = trig.j[order], trig.s[order], trig.value[order]
    boundaries = np.flatnonzero((np.diff(tt) != 0) | (np.diff(ti) != 0))
    starts = np.concatenate(([0], boundaries + 1)) if len(tv) else np.empty(0, dtype=np.int64)
    ends = np.concatenate((boundaries + 1, [len(tv)])) if len(tv) else starts

    out_i, out_t, out_j, out_s, out_v = [], [], [], [], []
    for lo, hi in zip(starts, ends):
        i, t = int(ti[lo]), int(tt[lo])
        total = int(n[i, t])
        if total == 0:
            continue
        weights = np.concatenate(([model.mu[i]], tv[lo:hi]))
        parts = conditional_split_sample(total, weights, model.dispersion, rng)
        background[i, t] = parts[0]
        hit = np.flatnonzero(parts[1:])
        if hit.size:
            out_i.append(np.full(hit.size, i, dtype=np.int64))
            out_t.append(np.full(hit.size, t, dtype=np.int64))
            out_j.append(tj[lo:hi][hit])
            out_s.append(ts[lo:hi][hit])
            out_v.append(parts[1:][hit])

    if out_i:
        triggered = TriggerMap(
            np.concatenate(out_i),
            np.concatenate(out_t),
            np.concatenate(out_j),
            np.concatenate(out_s),
            np.concatenate(out_v),
        )
    else:
        triggered = TriggerMap.empty(value_dtype=np.int64)
    return CascadeDecomposition(background=background, triggered=triggered, mode="sampled")


def total_triggered(decomposition: CascadeDecomposition) -> float:
    """Total triggered events in a decomposition (count or expectation)."""
    return decomposition.triggered.total()


def cascade_sizes(decomposition: CascadeDecomposition) -> np.ndarray:
    """Events directly triggered by each source cell, as a K x T grid.

    Entry ``[j, s]`` sums the decomposition values attributed to source
    ``(j, s)`` across all later target cells: first-generation progeny
    only, not the full descendant tree.  Attributions to sources outside
    the grid (negative offsets from burn-in) are skipped.
    """
    grid = np.zeros(
        (decomposition.n_components, decomposition.n_bins), dtype=np.float64
    )
    trig = decomposition.triggered
    inside = trig.s >= 0
    np.add.at(grid, (trig.j[inside], trig.s[inside]), trig.value[inside])
    return grid
