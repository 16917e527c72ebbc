"""Additive count distributions and the split families they induce.

Two additive building blocks are implemented: the Poisson distribution and
a mean/dispersion form of the negative binomial with mean ``lam`` and
variance ``(1 + phi) * lam``.  Sums of independent members with a shared
dispersion stay inside the family with the means adding, which is what
makes superposed count processes tractable.  Conditioning such a sum on
its total turns the parts into a multinomial split (Poisson case) or a
Dirichlet-multinomial split (negative binomial case).

All mass functions are evaluated in log space; probabilities are only
exponentiated by callers.  ``phi = 0`` always denotes the exact
Poisson/multinomial case and is routed to those code paths explicitly --
the negative binomial formulas are singular there and must not be used as
a numeric limit.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

__all__ = [
    "poisson_log_pmf",
    "nb_log_pmf",
    "nb_cgf",
    "nb_sample",
    "nb_params_from_classic",
    "nb_params_to_classic",
    "multinomial_conditional_log_pmf",
    "dm_conditional_log_pmf",
    "conditional_split_sample",
]

# Above this value the direct gammaln/digamma differences lose too many
# digits to cancellation; switch to exact index sums (counts are integers).
_LARGE_SHAPE = 1.0e6


def _as_counts(y) -> np.ndarray:
    arr = np.asarray(y)
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.all(arr == rounded):
            raise ValueError("counts must be integers")
        arr = rounded.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    return arr


def _match_shape(out: np.ndarray, template) -> np.ndarray | float:
    if np.isscalar(template) or np.ndim(template) == 0:
        return float(out)
    return out


def log_gamma_ratio(y, shape):
    """log Gamma(y + shape) - log Gamma(shape) for integer counts ``y``.

    For large ``shape`` the two log-gamma values agree to many digits and
    their direct difference is dominated by rounding, so the ratio is
    evaluated as the exact sum ``sum_{k<y} log(shape + k)`` instead.
    """
    y_arr, shape_arr = np.broadcast_arrays(np.asarray(y), np.asarray(shape, dtype=float))
    out = np.empty(y_arr.shape, dtype=float)
    small = shape_arr < _LARGE_SHAPE
    out[small] = gammaln(y_arr[small] + shape_arr[small]) - gammaln(shape_arr[small])
    if not small.all():
        yb = y_arr[~small].astype(np.int64)
        sb = shape_arr[~small]
        acc = np.zeros(sb.shape, dtype=float)
        for k in range(int(yb.max(initial=0))):
            acc += np.where(k < yb, np.log(sb + k), 0.0)
        out[~small] = acc
    return _match_shape(out, y if np.ndim(y) else shape)


def digamma_ratio(y, shape):
    """digamma(y + shape) - digamma(shape), stably, for integer ``y``."""
    y_arr, shape_arr = np.broadcast_arrays(np.asarray(y), np.asarray(shape, dtype=float))
    out = np.empty(y_arr.shape, dtype=float)
    small = shape_arr < _LARGE_SHAPE
    out[small] = digamma(y_arr[small] + shape_arr[small]) - digamma(shape_arr[small])
    if not small.all():
        yb = y_arr[~small].astype(np.int64)
        sb = shape_arr[~small]
        acc = np.zeros(sb.shape, dtype=float)
        for k in range(int(yb.max(initial=0))):
            acc += np.where(k < yb, 1.0 / (sb + k), 0.0)
        out[~small] = acc
    return _match_shape(out, y if np.ndim(y) else shape)


def poisson_log_pmf(y, lam):
    """Log probability of count ``y`` under a Poisson with mean ``lam``.

    Vectorized over both arguments.  ``lam`` must be strictly positive.
    """
    y_arr = _as_counts(y)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0.0):
        raise ValueError("poisson mean must be positive")
    out = y_arr * np.log(lam_arr) - lam_arr - gammaln(y_arr + 1.0)
    return _match_shape(np.asarray(out, dtype=float), y)


def nb_log_pmf(y, lam, phi):
    """Log probability of ``y`` under NB(mean=lam, variance=(1+phi)*lam).

    Requires ``phi > 0``; callers must route ``phi = 0`` to
    :func:`poisson_log_pmf` (the mass function is singular at zero
    dispersion).
    """
    y_arr = _as_counts(y)
    lam_arr = np.asarray(lam, dtype=float)
    phi = float(phi)
    if np.any(lam_arr <= 0.0):
        raise ValueError("negative binomial mean must be positive")
    if phi <= 0.0:
        raise ValueError("dispersion must be positive; use poisson_log_pmf for phi = 0")
    shape = lam_arr / phi
    out = (
        log_gamma_ratio(y_arr, shape)
        - gammaln(y_arr + 1.0)
        + y_arr * (np.log(phi) - np.log1p(phi))
        - shape * np.log1p(phi)
    )
    return _match_shape(np.asarray(out, dtype=float), y)


def nb_cgf(s, lam, phi):
    """Cumulant generating function of NB(lam, phi) at the real point ``s``.

    Equals ``-(lam/phi) * log(1 - (e^s - 1) * phi)`` on the region where
    the argument of the logarithm is positive; outside it the moment
    integral diverges and a ValueError is raised.  Additive in ``lam``.
    """
    s_arr = np.asarray(s, dtype=float)
    lam_arr = np.asarray(lam, dtype=float)
    phi = float(phi)
    if np.any(lam_arr <= 0.0):
        raise ValueError("negative binomial mean must be positive")
    if phi <= 0.0:
        raise ValueError("dispersion must be positive")
    u = phi * np.expm1(s_arr)
    if np.any(u >= 1.0):
        raise ValueError("s outside the convergence region: (e^s - 1) * phi must stay below 1")
    out = -(lam_arr / phi) * np.log1p(-u)
    return _match_shape(np.asarray(out, dtype=float), s if np.ndim(s) else lam)


def nb_sample(lam, phi, rng: np.random.Generator):
    """Draw counts with mean ``lam`` and variance ``(1 + phi) * lam``.

    Uses the gamma-mixed Poisson construction: a gamma variable with shape
    ``lam/phi`` and scale ``phi`` feeds a Poisson draw.  ``phi = 0`` draws a
    plain Poisson.  Vectorized over ``lam``.
    """
    lam_arr = np.asarray(lam, dtype=float)
    phi = float(phi)
    if np.any(lam_arr <= 0.0):
        raise ValueError("mean must be positive")
    if phi < 0.0:
        raise ValueError("dispersion must be non-negative")
    if phi == 0.0:
        return rng.poisson(lam_arr)
    mixed_rate = rng.gamma(lam_arr / phi, phi)
    return rng.poisson(mixed_rate)


def nb_params_from_classic(r, p):
    """Map the classic (r failures, success prob p) form to (lam, phi)."""
    r = float(r)
    p = float(p)
    if r <= 0.0:
        raise ValueError("r must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    return r * p / (1.0 - p), p / (1.0 - p)


def nb_params_to_classic(lam, phi):
    """Inverse of :func:`nb_params_from_classic`."""
    lam = float(lam)
    phi = float(phi)
    if lam <= 0.0 or phi <= 0.0:
        raise ValueError("lam and phi must be positive")
    return lam / phi, phi / (1.0 + phi)


def _split_arguments(parts, weights):
    parts_arr = _as_counts(parts)
    weights_arr = np.asarray(weights, dtype=float)
    if parts_arr.ndim != 1 or weights_arr.ndim != 1:
        raise ValueError("parts and weights must be one-dimensional")
    if parts_arr.shape != weights_arr.shape:
        raise ValueError("parts and weights must have equal length")
    if np.any(weights_arr < 0.0) or not np.all(np.isfinite(weights_arr)):
        raise ValueError("weights must be finite and non-negative")
    if weights_arr.sum() <= 0.0:
        raise ValueError("weights must have positive total")
    return parts_arr, weights_arr


def multinomial_conditional_log_pmf(parts, weights):
    """Log probability of an ordered split of its own total.

    The split of ``n = sum(parts)`` into cells follows a multinomial with
    probabilities ``weights / sum(weights)``.  A cell with weight exactly
    zero is structurally empty: a positive part there has probability
    zero, reported as ``-inf``.
    """
    parts_arr, weights_arr = _split_arguments(parts, weights)
    active = weights_arr > 0.0
    if np.any(parts_arr[~active] > 0):
        return float("-inf")
    total = int(parts_arr.sum())
    log_probs = np.log(weights_arr[active]) - np.log(weights_arr.sum())
    return float(
        gammaln(total + 1.0)
        - gammaln(parts_arr + 1.0).sum()
        + (parts_arr[active] * log_probs).sum()
    )


def dm_conditional_log_pmf(parts, weights, phi):
    """Log probability of a Dirichlet-multinomial split of its own total.

    This is the conditional law of negative binomial parts with means
    ``weights`` and common dispersion ``phi`` given their sum; the
    concentration of cell ``k`` is ``weights[k] / phi``.  Converges to the
    multinomial split as ``phi -> 0``.
    """
    parts_arr, weights_arr = _split_arguments(parts, weights)
    phi = float(phi)
    if phi <= 0.0:
        raise ValueError(
            "dispersion must be positive; use multinomial_conditional_log_pmf for phi = 0"
        )
    active = weights_arr > 0.0
    if np.any(parts_arr[~active] > 0):
        return float("-inf")
    total = int(parts_arr.sum())
    conc = weights_arr[active] / phi
    cell_terms = log_gamma_ratio(parts_arr[active], conc) - gammaln(parts_arr[active] + 1.0)
    return float(
        gammaln(total + 1.0)
        - log_gamma_ratio(total, weights_arr.sum() / phi)
        + np.sum(cell_terms)
    )


def conditional_split_sample(total, weights, phi, rng: np.random.Generator) -> np.ndarray:
    """Draw one split of ``total`` across cells with the given weights.

    ``phi = 0`` draws from the multinomial split; ``phi > 0`` draws cell
    probabilities from a Dirichlet with concentrations ``weights / phi``
    and then a multinomial, which compounds to the Dirichlet-multinomial.
    Cells with weight zero always receive zero.  ``total = 0`` returns the
    all-zero split without consuming randomness.
    """
    total = int(total)
    if total < 0:
        raise ValueError("total must be non-negative")
    weights_arr = np.asarray(weights, dtype=float)
    _, weights_arr = _split_arguments(np.zeros_like(weights_arr, dtype=np.int64), weights_arr)
    phi = float(phi)
    if phi < 0.0:
        raise ValueError("dispersion must be non-negative")
    out = np.zeros(weights_arr.shape[0], dtype=np.int64)
    if total == 0:
        return out
    active = weights_arr > 0.0
    active_weights = weights_arr[active]
    if phi == 0.0:
        probs = active_weights / active_weights.sum()
    else:
        gammas = rng.gamma(active_weights / phi)
        gamma_sum = gammas.sum()
        if gamma_sum > 0.0:
            probs = gammas / gamma_sum
        else:
            # All concentrations so tiny that every gamma draw underflowed
            # to zero; fall back to the mean split rather than divide by 0.
            probs = active_weights / active_weights.sum()
    out[active] = rng.multinomial(total, probs)
    return out
