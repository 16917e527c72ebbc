"""Maximum-likelihood fitting of background rates, influence, kernel, dispersion.

The marginal likelihood of the counts is available in closed form: each
cell is an independent draw from the building-block family with the
cell's total rate as its mean.  Fitting therefore reduces to smooth
box-constrained maximization, done here with L-BFGS-B over a transformed
parameter vector: background rates and the kernel time constant move in
log space (strictly positive), influence entries and the dispersion carry
plain lower bounds at zero because exact zeros are meaningful (absent
edges, the Poisson family).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .distributions import digamma_ratio, log_gamma_ratio
from .model import CountSeries, Kernel, ModelSpec, lagged_excitation, rate_matrix

__all__ = [
    "FitConfig",
    "FitResult",
    "LikelihoodGradient",
    "log_likelihood",
    "log_likelihood_gradient",
    "fit",
]

# Reported dispersions below this are snapped to exactly zero (Poisson).
_POISSON_SNAP = 1.0e-8
# Generous exploration range for the kernel time constant during fitting.
_TAU_RANGE = (1.0e-2, 1.0e3)


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings and initialization strategy for :func:`fit`.

    ``gradient_tolerance`` is relative to the initial projected-gradient
    norm.  ``init_strategy`` is one of ``"moment"`` (data-driven start),
    ``"fixed"`` (unit-scale start), or ``"user"`` (take ``initial``).
    ``fixed_tau``/``fixed_phi`` freeze those parameters when ``fit_tau``/
    ``fit_phi`` are off; leaving them ``None`` freezes at the initial
    value.
    """

    max_iterations: int = 2000
    gradient_tolerance: float = 1.0e-6
    parameter_floor: float = 1.0e-8
    init_strategy: str = "moment"
    fit_tau: bool = True
    fit_phi: bool = True
    fixed_tau: float | None = None
    fixed_phi: float | None = None
    initial: ModelSpec | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.gradient_tolerance <= 0.0:
            raise ValueError("gradient_tolerance must be positive")
        if self.parameter_floor < 0.0:
            raise ValueError("parameter_floor must be non-negative")
        if self.init_strategy not in ("moment", "fixed", "user"):
            raise ValueError(f"unknown init_strategy: {self.init_strategy!r}")
        if self.init_strategy == "user" and self.initial is None:
            raise ValueError("init_strategy 'user' requires an initial model")


@dataclass(frozen=True)
class FitResult:
    """Fitted model plus convergence diagnostics.

    ``gradient_norm`` is the final projected-gradient infinity norm in the
    optimizer's (log-transformed) coordinates; ``converged`` means it fell
    below the configured relative tolerance within the iteration budget.
    ``family`` records whether the dispersion landed on the Poisson
    boundary.
    """

    model: ModelSpec
    log_likelihood: float
    iterations: int
    converged: bool
    gradient_norm: float
    family: str = "negative-binomial"


@dataclass(frozen=True)
class LikelihoodGradient:
    """Partial derivatives of the count log-likelihood.

    ``dispersion`` holds the one-sided (right) derivative when the model
    sits exactly on the Poisson boundary.
    """

    mu: np.ndarray
    influence: np.ndarray
    tau: float
    dispersion: float


def _cell_terms(n: np.ndarray, total: np.ndarray, phi: float, want_scores: bool):
    """Summed log pmf over cells, plus per-cell rate scores and the
    dispersion score sum when requested."""
    if phi == 0.0:
        logpmf = float(np.sum(n * np.log(total) - total) - gammaln(n + 1.0).sum())
        if not want_scores:
            return logpmf, None, None
        rate_score = n / total - 1.0
        # Right derivative of the NB log pmf in the dispersion at zero.
        phi_score = float(np.sum(n * (n - 1.0) / (2.0 * total) - n + total / 2.0))
        return logpmf, rate_score, phi_score
    shape = total / phi
    ratio = log_gamma_ratio(n, shape)
    logpmf = float(
        np.sum(ratio)
        - gammaln(n + 1.0).sum()
        + n.sum() * (math.log(phi) - math.log1p(phi))
        - np.sum(shape) * math.log1p(phi)
    )
    if not want_scores:
        return logpmf, None, None
    dig = digamma_ratio(n, shape)
    rate_score = (dig - math.log1p(phi)) / phi
    phi_score = float(
        np.sum(
            -(total / phi**2) * dig
            + n / phi
            - (n + shape) / (1.0 + phi)
            + (total / phi**2) * math.log1p(phi)
        )
    )
    return logpmf, rate_score, phi_score


def _value_and_gradient(model: ModelSpec, counts: CountSeries) -> tuple[float, LikelihoodGradient]:
    conv = lagged_excitation(counts, model.kernel)
    total = rate_matrix(model, counts, conv=conv)
    value, rate_score, phi_score = _cell_terms(
        counts.counts, total, model.dispersion, want_scores=True
    )
    dconv = lagged_excitation(counts, model.kernel, weights=model.kernel.tau_gradient())
    grad = LikelihoodGradient(
        mu=rate_score.sum(axis=1),
        influence=rate_score @ conv.T,
        tau=float(np.sum(rate_score * (model.influence @ dconv))),
        dispersion=phi_score,
    )
    return value, grad


def log_likelihood(model: ModelSpec, counts: CountSeries) -> float:
    """Log-likelihood of the observed counts under the model.

    Sum over cells of the building-block log pmf at the cell's total
    rate: negative binomial when the dispersion is positive, Poisson when
    it is zero.
    """
    total = rate_matrix(model, counts)
    value, _, _ = _cell_terms(counts.counts, total, model.dispersion, want_scores=False)
    return value


def log_likelihood_gradient(model: ModelSpec, counts: CountSeries) -> LikelihoodGradient:
    """Analytic gradient of :func:`log_likelihood` in all parameters.

    Rate-mediated parts follow the chain rule through the per-cell rate:
    the background derivative sums the rate scores, the influence
    derivative pairs them with the lagged count excitation, and the time
    constant enters through the closed-form kernel derivative (normalizer
    included, horizon held fixed).  At zero dispersion the dispersion
    entry is the one-sided derivative into the family.
    """
    return _value_and_gradient(model, counts)[1]


@dataclass
class _Packing:
    """Layout of the optimizer vector: [log mu | influence | log tau? | phi?]."""

    n_components: int
    fit_tau: bool
    fit_phi: bool
    tau_value: float
    phi_value: float
    floor: float

    @property
    def size(self) -> int:
        k = self.n_components
        return k + k * k + int(self.fit_tau) + int(self.fit_phi)

    def pack(self, model: ModelSpec) -> np.ndarray:
        z = np.concatenate([np.log(model.mu), model.influence.ravel()])
        if self.fit_tau:
            z = np.append(z, math.log(model.kernel.tau))
        if self.fit_phi:
            z = np.append(z, model.dispersion)
        return z

    def unpack(self, z: np.ndarray) -> ModelSpec:
        k = self.n_components
        mu = np.exp(z[:k])
        influence = z[k : k + k * k].reshape(k, k)
        pos = k + k * k
        tau = math.exp(z[pos]) if self.fit_tau else self.tau_value
        phi = z[-1] if self.fit_phi else self.phi_value
        return ModelSpec(
            mu=mu,
            influence=np.maximum(influence, 0.0),
            kernel=Kernel.exponential(tau),
            dispersion=max(float(phi), 0.0),
        )

    def pack_gradient(self, model: ModelSpec, grad: LikelihoodGradient) -> np.ndarray:
        g = np.concatenate([grad.mu * model.mu, grad.influence.ravel()])
        if self.fit_tau:
            g = np.append(g, grad.tau * model.kernel.tau)
        if self.fit_phi:
            g = np.append(g, grad.dispersion)
        return g

    def bounds(self) -> list[tuple[float | None, float | None]]:
        k = self.n_components
        mu_low = math.log(self.floor) if self.floor > 0.0 else None
        out: list[tuple[float | None, float | None]] = [(mu_low, None)] * k
        out += [(0.0, None)] * (k * k)
        if self.fit_tau:
            out.append((math.log(_TAU_RANGE[0]), math.log(_TAU_RANGE[1])))
        if self.fit_phi:
            out.append((0.0, None))
        return out


def _projected_gradient_norm(z, grad, bounds) -> float:
    """Infinity norm of the gradient with outward components at active
    bounds zeroed (the optimizer cannot move along them)."""
    norm = 0.0
    for zk, gk, (lo, hi) in zip(z, grad, bounds):
        if lo is not None and zk <= lo and gk > 0.0:
            continue
        if hi is not None and zk >= hi and gk < 0.0:
            continue
        norm = max(norm, abs(gk))
    return norm


def _moment_start(counts: CountSeries, config: FitConfig) -> ModelSpec:
    n = counts.counts.astype(float)
    means = n.mean(axis=1)
    variances = n.var(axis=1)
    phi0 = max(0.0, float(np.mean(variances / means - 1.0)))
    k = counts.n_components
    return ModelSpec(
        mu=np.maximum(0.5 * means, max(config.parameter_floor, 1.0e-8)),
        influence=np.full((k, k), 0.01),
        kernel=Kernel.exponential(1.0),
        dispersion=phi0,
    )


def _fixed_start(counts: CountSeries) -> ModelSpec:
    k = counts.n_components
    return ModelSpec(
        mu=np.ones(k),
        influence=np.full((k, k), 0.01),
        kernel=Kernel.exponential(1.0),
        dispersion=1.0,
    )


def _initial_model(counts: CountSeries, config: FitConfig) -> ModelSpec:
    if config.init_strategy == "user":
        return config.initial
    if config.init_strategy == "fixed":
        start = _fixed_start(counts)
    else:
        start = _moment_start(counts, config)
    if not config.fit_tau and config.fixed_tau is not None:
        start = replace(start, kernel=Kernel.exponential(config.fixed_tau))
    if not config.fit_phi and config.fixed_phi is not None:
        start = replace(start, dispersion=config.fixed_phi)
    return start


def fit(counts: CountSeries, config: FitConfig = FitConfig()) -> FitResult:
    """Maximum-likelihood estimate of the model from observed counts.

    Components whose counts are identically zero are rejected up front
    (their background rate would diverge to the log-space boundary).  The
    dispersion is handled with an explicit boundary rule: if its moment
    start is zero and the one-sided likelihood derivative there is
    non-positive, the Poisson model is fitted with the dispersion frozen;
    a fitted dispersion within 1e-8 of zero is reported as exactly zero
    with the family flagged as Poisson.
    """
    dead = np.flatnonzero(counts.counts.sum(axis=1) == 0)
    if dead.size:
        raise ValueError(
            "components with all-zero counts cannot be fitted: "
            + ", ".join(str(int(d)) for d in dead)
        )

    start = _initial_model(counts, config)
    fit_phi = config.fit_phi
    phi0 = start.dispersion
    if config.fit_phi and phi0 == 0.0:
        boundary_score = log_likelihood_gradient(start, counts).dispersion
        if boundary_score <= 0.0:
            fit_phi = False  # stay on the Poisson boundary
        else:
            start = replace(start, dispersion=1.0e-3)

    packing = _Packing(
        n_components=counts.n_components,
        fit_tau=config.fit_tau,
        fit_phi=fit_phi,
        tau_value=start.kernel.tau,
        phi_value=start.dispersion,
        floor=config.parameter_floor,
    )
    bounds = packing.bounds()
    z0 = packing.pack(start)

    def objective(z):
        model = packing.unpack(z)
        value, grad = _value_and_gradient(model, counts)
        return -value, -packing.pack_gradient(model, grad)

    _, g0 = objective(z0)
    pg0 = _projected_gradient_norm(z0, -g0, bounds)
    tol_abs = config.gradient_tolerance * max(pg0, 1.0e-12)

    result = minimize(
        objective,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "maxiter": config.max_iterations,
            "maxfun": 20 * config.max_iterations,
            "ftol": 1.0e-14,
            "gtol": tol_abs,
            "maxcor": 20,
        },
    )

    final_pg = _projected_gradient_norm(result.x, -np.asarray(result.jac), bounds)
    fitted = packing.unpack(result.x)
    family = "negative-binomial"
    if fitted.dispersion < _POISSON_SNAP:
        fitted = replace(fitted, dispersion=0.0)
        family = "poisson"
    return FitResult(
        model=fitted,
        log_likelihood=float(-result.fun),
        iterations=int(result.nit),
        converged=bool(final_pg <= tol_abs),
        gradient_norm=float(final_pg),
        family=family,
    )
