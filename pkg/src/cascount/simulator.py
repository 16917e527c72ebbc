"""Generative sampling: complete cascades, observed counts, random networks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import nb_sample
from .model import CountSeries, ModelSpec, TriggerMap, spectral_radius

__all__ = [
    "CascadeDecomposition",
    "simulate",
    "sample_influence_matrix",
    "BURN_IN_HORIZONS",
]

# Number of kernel horizons discarded when a stationary start is requested.
BURN_IN_HORIZONS = 5


@dataclass
class CascadeDecomposition:
    """Latent split of each cell count into background and triggered parts.

    ``background[i, t]`` holds the exogenous part of cell ``(i, t)`` and
    ``triggered`` the per-source attributions; for every cell the count
    equals background plus the sum of its triggered entries.  ``mode`` is
    ``"sampled"`` for integer draws and ``"expected"`` for conditional
    expectations (real-valued).  Source offsets in ``triggered`` may be
    negative when burn-in discarded the bins they point into.
    """

    background: np.ndarray
    triggered: TriggerMap
    mode: str

    def __post_init__(self):
        if self.mode not in ("sampled", "expected"):
            raise ValueError(f"unknown decomposition mode: {self.mode!r}")

    @property
    def n_components(self) -> int:
        return self.background.shape[0]

    @property
    def n_bins(self) -> int:
        return self.background.shape[1]

    def combined_counts(self) -> np.ndarray:
        """Reassemble the per-cell totals (background plus triggered)."""
        totals = self.background.astype(
            np.int64 if self.mode == "sampled" else np.float64
        ).copy()
        np.add.at(totals, (self.triggered.i, self.triggered.t), self.triggered.value)
        return totals


def simulate(
    model: ModelSpec,
    n_bins: int,
    seed,
    burn_in: bool = False,
) -> tuple[CascadeDecomposition, CountSeries]:
    """Draw a complete cascade and its observed counts from the model.

    The first bin draws only background events; every later bin draws one
    independent count per active source cell within the kernel horizon
    (mean ``influence[i, j] * n[j, s] * h(t - s)``) plus a background
    count, all from the model's building-block family.  Deterministic
    given ``seed``.

    With ``burn_in`` the simulation runs for ``BURN_IN_HORIZONS * t_max``
    extra leading bins that are then discarded, so the returned window
    starts near the stationary regime.  Triggered attributions whose
    source fell inside the discarded prefix keep negative source offsets.

    An unstable model (spectral radius >= 1) is allowed -- finite-horizon
    draws remain well-defined -- but a warning is emitted.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    radius = spectral_radius(model.influence)
    if radius >= 1.0:
        warnings.warn(
            f"simulating an unstable model (spectral radius {radius:.4f} >= 1); "
            "counts may grow without bound",
            RuntimeWarning,
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    n_comp = model.n_components
    discard = BURN_IN_HORIZONS * model.kernel.t_max if burn_in else 0
    total_bins = n_bins + discard

    h = model.kernel.weights()
    t_max = model.kernel.t_max
    phi = model.dispersion
    counts = np.zeros((n_comp, total_bins), dtype=np.int64)
    background = np.zeros((n_comp, total_bins), dtype=np.int64)
    trig_i, trig_t, trig_j, trig_s, trig_v = [], [], [], [], []

    for t in range(total_bins):
        bin_counts = nb_sample(model.mu, phi, rng)
        background[:, t] = bin_counts

        lo = max(0, t - t_max)
        window = counts[:, lo:t]
        src_j, src_rel = np.nonzero(window)
        if src_j.size:
            src_s = src_rel + lo
            lag_weights = h[t - src_s - 1]
            means = model.influence[:, src_j] * (window[src_j, src_rel] * lag_weights)[None, :]
            draws = np.zeros_like(means, dtype=np.int64)
            active = means > 0.0
            if active.any():
                draws[active] = nb_sample(means[active], phi, rng)
            hit_i, hit_src = np.nonzero(draws)
            if hit_i.size:
                trig_i.append(hit_i)
                trig_t.append(np.full(hit_i.size, t, dtype=np.int64))
                trig_j.append(src_j[hit_src])
                trig_s.append(src_s[hit_src])
                trig_v.append(draws[hit_i, hit_src])
                bin_counts = bin_counts + draws.sum(axis=1)
        counts[:, t] = bin_counts

    if trig_i:
        triggered = TriggerMap(
            np.concatenate(trig_i),
            np.concatenate(trig_t),
            np.concatenate(trig_j),
            np.concatenate(trig_s),
            np.concatenate(trig_v),
        )
    else:
        triggered = TriggerMap.empty(value_dtype=np.int64)

    if discard:
        counts = counts[:, discard:]
        background = background[:, discard:]
        keep = triggered.t >= discard
        triggered = TriggerMap(
            triggered.i[keep],
            triggered.t[keep] - discard,
            triggered.j[keep],
            triggered.s[keep] - discard,
            triggered.value[keep],
        )

    decomposition = CascadeDecomposition(background=background, triggered=triggered, mode="sampled")
    return decomposition, CountSeries(counts=counts)


def sample_influence_matrix(n_components: int, mean: float, shape: float, seed) -> np.ndarray:
    """Random influence matrix with i.i.d. gamma entries.

    Entries have the requested mean and gamma shape (so the scale is
    ``mean / shape``).  Deterministic given ``seed``.
    """
    if n_components < 1:
        raise ValueError("n_components must be at least 1")
    mean = float(mean)
    shape = float(shape)
    if mean <= 0.0 or shape <= 0.0:
        raise ValueError("mean and shape must be positive")
    rng = np.random.default_rng(seed)
    return rng.gamma(shape, mean / shape, size=(n_components, n_components))
