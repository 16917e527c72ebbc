"""Model parameters, excitation kernel, rate fields, and stability checks.

The model describes a network of K count sequences on a discrete time
grid.  Events at cell ``(j, s)`` raise the expected count of every later
cell ``(i, t)`` by ``influence[i, j] * n[j, s] * h(t - s)``, where ``h``
is a normalized causal lag kernel.  The total rate of a cell is the
background rate plus the sum of those excitation terms.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

__all__ = [
    "Kernel",
    "ModelSpec",
    "CountSeries",
    "TriggerMap",
    "RateField",
    "UnstableModelError",
    "compute_rates",
    "spectral_radius",
    "steady_state_rate",
]

KERNEL_MASS_TOL = 1.0e-10


class UnstableModelError(ValueError):
    """Raised when an operation requires a spectral radius below one."""


@dataclass(frozen=True)
class Kernel:
    """Causal lag profile spreading one event's excitation over later bins.

    Only the exponential kind exists: ``h(t) = (e^{1/tau} - 1) e^{-t/tau}``
    for ``1 <= t <= t_max`` and zero elsewhere.  The prefactor makes the
    infinite sum over ``t >= 1`` equal one exactly; ``t_max`` truncates
    where the remaining tail mass (``e^{-t_max/tau}``) is negligible.
    """

    tau: float
    t_max: int
    kind: str = "exponential"

    def __post_init__(self):
        if self.kind != "exponential":
            raise ValueError(f"unsupported kernel kind: {self.kind!r}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise ValueError("tau must be positive and finite")
        if int(self.t_max) < 1:
            raise ValueError("t_max must be at least 1")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "t_max", int(self.t_max))

    @classmethod
    def exponential(cls, tau: float, mass_tol: float = KERNEL_MASS_TOL) -> "Kernel":
        """Exponential kernel truncated where tail mass drops below ``mass_tol``."""
        tau = float(tau)
        if tau <= 0.0:
            raise ValueError("tau must be positive")
        if not 0.0 < mass_tol < 1.0:
            raise ValueError("mass_tol must lie in (0, 1)")
        t_max = max(1, math.ceil(-tau * math.log(mass_tol)))
        return cls(tau=tau, t_max=t_max)

    @property
    def normalizer(self) -> float:
        return math.expm1(1.0 / self.tau)

    def evaluate(self, lag):
        """Kernel value at integer lags >= 1 (zero beyond the horizon)."""
        lag_arr = np.asarray(lag)
        if np.any(lag_arr < 1):
            raise ValueError("kernel lags must be at least 1")
        out = np.where(
            lag_arr <= self.t_max,
            self.normalizer * np.exp(-lag_arr / self.tau),
            0.0,
        )
        return float(out) if np.ndim(lag) == 0 else out

    def weights(self) -> np.ndarray:
        """Kernel values at lags ``1 .. t_max``."""
        lags = np.arange(1, self.t_max + 1, dtype=float)
        return self.normalizer * np.exp(-lags / self.tau)

    def tau_gradient(self) -> np.ndarray:
        """d h(lag) / d tau at lags ``1 .. t_max`` (horizon held fixed).

        Includes the tau-dependence of the normalizer:
        ``dh/dtau = e^{-lag/tau} (c * lag - e^{1/tau}) / tau^2``.
        """
        lags = np.arange(1, self.t_max + 1, dtype=float)
        c = self.normalizer
        return np.exp(-lags / self.tau) * (c * lags - math.exp(1.0 / self.tau)) / self.tau**2


@dataclass(frozen=True)
class ModelSpec:
    """Full parameter set of the network count model.

    ``mu`` holds the per-component background rates (events per bin),
    ``influence`` the non-negative K x K matrix whose entry ``[i, j]``
    scales how strongly events in component ``j`` excite component ``i``,
    and ``dispersion`` the common over-dispersion of the count building
    blocks (zero means Poisson).
    """

    mu: np.ndarray
    influence: np.ndarray
    kernel: Kernel
    dispersion: float = 0.0

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        influence = np.asarray(self.influence, dtype=float)
        if mu.ndim != 1:
            raise ValueError("mu must be a vector")
        if np.any(mu <= 0.0) or not np.all(np.isfinite(mu)):
            raise ValueError("background rates must be positive and finite")
        if influence.ndim != 2 or influence.shape[0] != influence.shape[1]:
            raise ValueError("influence must be a square matrix")
        if influence.shape[0] != mu.shape[0]:
            raise ValueError(
                f"influence is {influence.shape[0]}x{influence.shape[1]} "
                f"but mu has length {mu.shape[0]}"
            )
        if np.any(influence < 0.0) or not np.all(np.isfinite(influence)):
            raise ValueError("influence entries must be non-negative and finite")
        if not (self.dispersion >= 0.0 and math.isfinite(self.dispersion)):
            raise ValueError("dispersion must be non-negative and finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "influence", influence)
        object.__setattr__(self, "dispersion", float(self.dispersion))

    @property
    def n_components(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class CountSeries:
    """Fully populated K x T grid of non-negative event counts.

    Column ``c`` of ``counts`` holds the counts of time bin ``t0 + c``;
    the public file formats fix ``t0 = 1``.
    """

    counts: np.ndarray
    t0: int = 1

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ValueError("counts must be a K x T grid")
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts)
            if not np.all(counts == rounded):
                raise ValueError("counts must be integers")
            counts = rounded.astype(np.int64)
        else:
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "t0", int(self.t0))

    @property
    def n_components(self) -> int:
        return self.counts.shape[0]

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]


@dataclass
class TriggerMap:
    """Sparse map from (target i, target t, source j, source s) to a value.

    Stored as parallel arrays; ``t`` and ``s`` are zero-based bin offsets
    into the associated count grid.  Source offsets may be negative when a
    decomposition retains attributions to bins discarded by burn-in.
    """

    i: np.ndarray
    t: np.ndarray
    j: np.ndarray
    s: np.ndarray
    value: np.ndarray

    @classmethod
    def empty(cls, value_dtype=np.float64) -> "TriggerMap":
        idx = np.empty(0, dtype=np.int64)
        return cls(idx, idx.copy(), idx.copy(), idx.copy(), np.empty(0, dtype=value_dtype))

    def __post_init__(self):
        n = len(self.value)
        for name in ("i", "t", "j", "s"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError("trigger map arrays must share one length")

    def __len__(self) -> int:
        return len(self.value)

    def total(self) -> float:
        return float(self.value.sum())

    def to_dict(self) -> dict:
        """Dense dictionary view keyed by (i, t, j, s); for small maps."""
        return {
            (int(i), int(t), int(j), int(s)): v
            for i, t, j, s, v in zip(self.i, self.t, self.j, self.s, self.value)
        }


@dataclass(frozen=True)
class RateField:
    """Per-cell total rates with their background and triggered parts.

    ``total[i, t]`` is the cell rate, ``background[i, t]`` its exogenous
    part, and ``triggered`` maps each active source/target pair to its
    excitation contribution.  For every cell the total equals background
    plus the sum of its triggered entries.
    """

    total: np.ndarray
    background: np.ndarray
    triggered: TriggerMap


def _check_dimensions(model: ModelSpec, counts: CountSeries) -> None:
    if model.n_components != counts.n_components:
        raise ValueError(
            f"model has {model.n_components} components "
            f"but counts have {counts.n_components}"
        )


def lagged_excitation(counts: CountSeries, kernel: Kernel, weights: np.ndarray | None = None) -> np.ndarray:
    """Per-source convolution ``conv[j, t] = sum_lag n[j, t-lag] w(lag)``.

    ``weights`` defaults to the kernel weights; passing the kernel's tau
    gradient gives the matching derivative field.  Only lags up to the
    kernel horizon (and the grid length) contribute.
    """
    if weights is None:
        weights = kernel.weights()
    n = counts.counts.astype(float)
    conv = np.zeros_like(n)
    max_lag = min(kernel.t_max, counts.n_bins - 1)
    for lag in range(1, max_lag + 1):
        conv[:, lag:] += weights[lag - 1] * n[:, :-lag]
    return conv


def rate_matrix(model: ModelSpec, counts: CountSeries, conv: np.ndarray | None = None) -> np.ndarray:
    """Total rate grid ``mu + influence @ conv`` without the sparse part."""
    _check_dimensions(model, counts)
    if conv is None:
        conv = lagged_excitation(counts, model.kernel)
    total = model.mu[:, None] + model.influence @ conv
    if not np.all(total > 0.0):
        raise RuntimeError("internal invariant violated: non-positive rate")
    return total


def _triggered_entries(model: ModelSpec, counts: CountSeries) -> TriggerMap:
    n = counts.counts
    n_comp, n_bins = n.shape
    h = model.kernel.weights()
    max_lag = min(model.kernel.t_max, n_bins - 1)
    src_j, src_s = np.nonzero(n)
    src_n = n[src_j, src_s].astype(float)

    # First pass sizes the output so the fill pass can write into
    # preallocated arrays instead of concatenating per-lag chunks.
    positive_per_source = np.count_nonzero(model.influence[:, src_j] > 0.0, axis=0)
    sizes = []
    for lag in range(1, max_lag + 1):
        live = src_s + lag < n_bins
        sizes.append(int(positive_per_source[live].sum()))
    total_entries = sum(sizes)

    tgt_i = np.empty(total_entries, dtype=np.int64)
    tgt_t = np.empty(total_entries, dtype=np.int64)
    out_j = np.empty(total_entries, dtype=np.int64)
    out_s = np.empty(total_entries, dtype=np.int64)
    values = np.empty(total_entries, dtype=np.float64)

    offset = 0
    for lag in range(1, max_lag + 1):
        live = src_s + lag < n_bins
        if not np.any(live):
            continue
        j_live = src_j[live]
        s_live = src_s[live]
        psi = model.influence[:, j_live] * (src_n[live] * h[lag - 1])[None, :]
        keep_i, keep_src = np.nonzero(psi > 0.0)
        m = keep_i.size
        tgt_i[offset : offset + m] = keep_i
        tgt_t[offset : offset + m] = s_live[keep_src] + lag
        out_j[offset : offset + m] = j_live[keep_src]
        out_s[offset : offset + m] = s_live[keep_src]
        values[offset : offset + m] = psi[keep_i, keep_src]
        offset += m
    if offset != total_entries:
        tgt_i, tgt_t = tgt_i[:offset], tgt_t[:offset]
        out_j, out_s, values = out_j[:offset], out_s[:offset], values[:offset]
    return TriggerMap(tgt_i, tgt_t, out_j, out_s, values)


def compute_rates(model: ModelSpec, counts: CountSeries) -> RateField:
    """Rate field of every cell given the observed history.

    The rate of cell ``(i, t)`` is the background rate plus
    ``influence[i, j] * n[j, s] * h(t - s)`` summed over all earlier
    source cells within the kernel horizon.  Triggered contributions are
    returned sparsely, keyed only where they are nonzero.
    """
    total = rate_matrix(model, counts)
    background = np.broadcast_to(model.mu[:, None], total.shape).copy()
    return RateField(total=total, background=background, triggered=_triggered_entries(model, counts))


def spectral_radius(matrix) -> float:
    """Largest absolute eigenvalue of a square matrix (dense solve)."""
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("matrix must be square")
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def steady_state_rate(model: ModelSpec) -> np.ndarray:
    """Long-run expected rate vector of a stable model.

    Solves ``(I - influence) rate = mu``; defined only when the spectral
    radius of the influence matrix is below one.
    """
    radius = spectral_radius(model.influence)
    if radius >= 1.0:
        raise UnstableModelError(
            f"spectral radius {radius:.6f} >= 1: the expected rate diverges"
        )
    eye = np.eye(model.n_components)
    rate = np.linalg.solve(eye - model.influence, model.mu)
    return rate
