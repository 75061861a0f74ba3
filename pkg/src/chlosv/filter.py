"""Liu-West auxiliary particle filter for joint state/parameter inference.

Each particle carries the current log volatility and the unconstrained
structural parameters eta = (mu, alpha, logit(phi), log(tau2)); the
range-only variant fixes mu = 0 and drops the first coordinate.  One filter
step runs the five-stage update: shrunk point estimates, auxiliary indicator
draw proportional to the likelihood at those estimates, kernel move of eta,
AR(1) state propagation, and importance reweighting by the likelihood ratio
of the moved particle over its parent's point estimate.

The cloud stays weighted between periods (no unconditional resample); an
optional systematic resample can be armed on an ESS threshold.  Per-period
random draws come from seed-sequence substreams so a run is reproducible
from its seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import FilterDegeneracyError, InvalidInputError, InvalidParameterError
from .likelihood import (
    DEFAULT_SERIES,
    ChloObservation,
    SeriesControl,
    chlo_loglik,
    close_max_loglik,
    close_min_loglik,
    gaussian_close_loglik,
    range_close_loglik,
    range_loglik,
)
from .volprocess import PriorHyper, expit

WEIGHT_TOL = 1e-12


class ModelVariant(str, Enum):
    """Which slice of the bar feeds the likelihood."""

    STSV = "stsv"   # close only
    RASV = "rasv"   # range only, drift fixed at zero
    RCSV = "rcsv"   # range and close
    EXSV = "exsv"   # low, high and close jointly

    @property
    def has_mu(self) -> bool:
        return self is not ModelVariant.RASV

    @property
    def eta_dim(self) -> int:
        return 4 if self.has_mu else 3

    @property
    def i_alpha(self) -> int:
        return 1 if self.has_mu else 0

    @property
    def i_phi(self) -> int:
        return self.i_alpha + 1

    @property
    def i_tau2(self) -> int:
        return self.i_alpha + 2


@dataclass(frozen=True)
class Particle:
    """One (log volatility, eta vector) pair; mostly a debugging view."""

    log_sigma: float
    eta: np.ndarray


@dataclass
class ParticleCloud:
    """Filter state at one period: N particles with simplex weights."""

    log_sigma: np.ndarray
    eta: np.ndarray
    weights: np.ndarray
    time_index: int
    variant: ModelVariant

    def __post_init__(self):
        n = len(self.weights)
        if n < 2:
            raise InvalidParameterError("a particle cloud needs at least 2 particles")
        if self.eta.shape != (n, self.variant.eta_dim) or self.log_sigma.shape != (n,):
            raise InvalidParameterError("inconsistent cloud array shapes")
        if not (np.all(np.isfinite(self.log_sigma)) and np.all(np.isfinite(self.eta))):
            raise InvalidInputError("non-finite particle state")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidParameterError("weights must be a simplex summing to 1")

    @property
    def n_particles(self) -> int:
        return len(self.weights)

    def particle(self, j: int) -> Particle:
        return Particle(float(self.log_sigma[j]), self.eta[j].copy())


@dataclass(frozen=True)
class FilterSnapshot:
    """Per-period posterior summaries and diagnostics."""

    period: int
    sigma_mean: float
    sigma_q05: float
    sigma_q95: float
    mu_mean: float
    mu_q05: float
    mu_q95: float
    alpha_mean: float
    alpha_q05: float
    alpha_q95: float
    phi_mean: float
    phi_q05: float
    phi_q95: float
    tau2_mean: float
    tau2_q05: float
    tau2_q95: float
    ess: float
    n_loglik_neginf: int
    n_series_nonconverged: int


@dataclass(frozen=True)
class FilterConfig:
    """Everything a filter run needs besides the data."""

    variant: ModelVariant = ModelVariant.EXSV
    n_particles: int = 30_000
    discount: float = 0.95
    prior: PriorHyper = field(default_factory=PriorHyper)
    series: SeriesControl = DEFAULT_SERIES
    seed: int = 0
    resample_threshold: float | None = None   # fraction of N; None disarms

    def __post_init__(self):
        if self.n_particles < 2:
            raise InvalidParameterError("n_particles must be >= 2")
        shrinkage_constants(self.discount)
        if self.resample_threshold is not None and not (0.0 < self.resample_threshold <= 1.0):
            raise InvalidParameterError("resample_threshold must be in (0, 1]")


@dataclass(frozen=True)
class StepDraws:
    """Injectable random variates for one filter step (testing hook).

    ``parent_idx`` bypasses the indicator draw; the noise arrays feed the
    kernel move and the state propagation.
    """

    parent_idx: np.ndarray | None
    param_noise: np.ndarray
    state_noise: np.ndarray


def shrinkage_constants(epsilon: float) -> tuple[float, float]:
    """Kernel shrinkage a = (3 eps - 1) / (2 eps) and the move variance
    factor 1 - a^2, for a discount factor strictly inside (0.5, 1)."""
    if not (0.5 < epsilon < 1.0):
        raise InvalidParameterError(f"discount factor must satisfy 0.5 < eps < 1, got {epsilon}")
    a = (3.0 * epsilon - 1.0) / (2.0 * epsilon)
    return a, 1.0 - a * a


def ess(weights: np.ndarray) -> float:
    """Effective sample size N / (1 + V(w)/E(w)^2); invariant to weight scale."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise InvalidInputError("empty weight vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite and nonnegative")
    mean = w.mean()
    if mean == 0.0:
        raise InvalidInputError("weights sum to zero")
    var = np.mean((w - mean) ** 2)
    return float(len(w) / (1.0 + var / (mean * mean)))


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Smallest value whose cumulative weight reaches q, sorting by value.

    Cumulative weights within WEIGHT_TOL of q count as reaching it, so exact
    grid cases (uniform weights at q = k/N) do not fall to rounding.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.size == 0:
        raise InvalidInputError("empty value vector")
    if not (0.0 <= q <= 1.0):
        raise InvalidParameterError(f"quantile level must be in [0, 1], got {q}")
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(w[order])
    cum /= cum[-1]
    # clamp above zero so q = 0 lands on the smallest value carrying mass
    target = max(q - WEIGHT_TOL, np.finfo(float).tiny)
    idx = int(np.searchsorted(cum, target, side="left"))
    return float(v[order[min(idx, v.size - 1)]])


def weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.dot(weights, values))


def systematic_resample(weights: np.ndarray, u0: float) -> np.ndarray:
    """Systematic resampling indices from a single uniform u0 in [0, 1)."""
    n = len(weights)
    positions = (u0 + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="left").astype(np.intp)


def init_cloud(hyper: PriorHyper, n: int, variant: ModelVariant,
               rng: np.random.Generator) -> ParticleCloud:
    """N independent prior draws in eta space plus stationary log-vol draws,
    uniformly weighted."""
    if n < 2:
        raise InvalidParameterError("n must be >= 2")
    cols = []
    if variant.has_mu:
        cols.append(rng.normal(hyper.mu_mean, math.sqrt(hyper.mu_var), n))
    alpha = rng.normal(hyper.alpha_mean, math.sqrt(hyper.alpha_var), n)
    phi = np.clip(rng.beta(hyper.phi_shape1, hyper.phi_shape2, n), 1e-12, 1.0 - 1e-12)
    tau2 = 1.0 / np.maximum(rng.gamma(hyper.tau2_shape, 1.0 / hyper.tau2_scale, n),
                            np.finfo(float).tiny)
    cols += [alpha, np.log(phi) - np.log1p(-phi), np.log(tau2)]
    eta = np.column_stack(cols)
    stat_sd = np.sqrt(tau2 / (1.0 - phi * phi))
    log_sigma = alpha + stat_sd * rng.standard_normal(n)
    weights = np.full(n, 1.0 / n)
    return ParticleCloud(log_sigma=log_sigma, eta=eta, weights=weights,
                         time_index=0, variant=variant)


def bar_loglik(variant: ModelVariant, obs: ChloObservation, mu: np.ndarray,
               sigma: np.ndarray, control: SeriesControl) -> tuple[np.ndarray, int]:
    """Per-particle log likelihood of one bar under the variant's data slice.

    Missing extremes degrade the likelihood gracefully: the full model falls
    back to the single-extreme marginals and then to the Gaussian close;
    the range+close variant falls back to the close alone, and the
    range-only model to a flat likelihood (it carries no close information).
    An observation sitting exactly on its support boundary -- an extreme
    tying max/min(open, close) for the full model, or range == |net move|
    for range+close -- is a measure-zero artifact of grid simulation or
    price rounding and is treated as unobserved; strict violations keep
    their zero likelihood.  Returns the log-likelihood vector and the count
    of non-converged series.
    """
    x = obs.close - obs.open
    low = None if obs.low is None else obs.low - obs.open
    high = None if obs.high is None else obs.high - obs.open

    if variant is ModelVariant.STSV:
        return gaussian_close_loglik(x, mu, sigma), 0

    if variant is ModelVariant.RASV:
        if low is None or high is None or high == low:
            return np.zeros_like(sigma, dtype=float), 0
        res = range_loglik(high - low, sigma, control)
        return res.logp, int(np.count_nonzero(~res.converged))

    if variant is ModelVariant.RCSV:
        if low is None or high is None or high - low == abs(x):
            return gaussian_close_loglik(x, mu, sigma), 0
        res = range_close_loglik(high - low, x, mu, sigma, control)
        return res.logp, int(np.count_nonzero(~res.converged))

    # EXSV: full joint when possible, marginals per the missingness pattern
    if high is not None and high == max(0.0, x):
        high = None
    if low is not None and low == min(0.0, x):
        low = None
    if low is not None and high is not None:
        res = chlo_loglik(x, low, high, mu, sigma, control)
        return res.logp, int(np.count_nonzero(~res.converged))
    if high is not None:
        return close_max_loglik(x, high, mu, sigma), 0
    if low is not None:
        return close_min_loglik(x, low, mu, sigma), 0
    return gaussian_close_loglik(x, mu, sigma), 0


def _natural_arrays(variant: ModelVariant, eta: np.ndarray) -> dict[str, np.ndarray]:
    n = eta.shape[0]
    mu = eta[:, 0] if variant.has_mu else np.zeros(n)
    return {
        "mu": mu,
        "alpha": eta[:, variant.i_alpha],
        "phi": expit(eta[:, variant.i_phi]),
        "tau2": np.exp(eta[:, variant.i_tau2]),
    }


def _summarize(variant: ModelVariant, period: int, sigma: np.ndarray,
               eta: np.ndarray, weights: np.ndarray,
               n_neginf: int, n_nonconv: int) -> FilterSnapshot:
    fields = {}
    series = {"sigma": sigma, **_natural_arrays(variant, eta)}
    for name, vals in series.items():
        # one sort serves both quantiles; matches weighted_quantile exactly
        order = np.argsort(vals, kind="stable")
        cum = np.cumsum(weights[order])
        cum /= cum[-1]
        idx = np.searchsorted(cum, [0.05 - WEIGHT_TOL, 0.95 - WEIGHT_TOL], side="left")
        idx = np.minimum(idx, vals.size - 1)
        fields[f"{name}_mean"] = weighted_mean(vals, weights)
        fields[f"{name}_q05"] = float(vals[order[idx[0]]])
        fields[f"{name}_q95"] = float(vals[order[idx[1]]])
    return FilterSnapshot(period=period, ess=ess(weights),
                          n_loglik_neginf=n_neginf,
                          n_series_nonconverged=n_nonconv, **fields)


def filter_step(cloud: ParticleCloud, bar: ChloObservation, epsilon: float,
                control: SeriesControl, rng: np.random.Generator,
                draws: StepDraws | None = None,
                resample_threshold: float | None = None) -> tuple[ParticleCloud, FilterSnapshot]:
    """Advance the cloud through one bar and summarize the new posterior.

    ``bar.open`` must already hold the conditioning price for the period
    (own open or previous close).  Raises FilterDegeneracyError when the bar
    is impossible under every particle.
    """
    variant = cloud.variant
    n = cloud.n_particles
    dim = variant.eta_dim
    a, one_minus_a2 = shrinkage_constants(epsilon)
    eta, ls, w = cloud.eta, cloud.log_sigma, cloud.weights

    if draws is None:
        u_ind = rng.random(n)
        param_noise = rng.standard_normal((n, dim))
        state_noise = rng.standard_normal(n)
        parent_idx = None
    else:
        u_ind = None
        param_noise = draws.param_noise
        state_noise = draws.state_noise
        parent_idx = draws.parent_idx

    # step 1: shrunk point estimates for parameters and the state
    eta_bar = w @ eta
    centered = eta - eta_bar
    cov = (centered * w[:, None]).T @ centered
    cov[np.diag_indices(dim)] += 1e-12
    alpha_c = eta[:, variant.i_alpha]
    z = np.exp(alpha_c + expit(eta[:, variant.i_phi]) * (ls - alpha_c))
    m = a * eta + (1.0 - a) * eta_bar

    # step 2: auxiliary indicators from likelihood at the point estimates
    mu1 = m[:, 0] if variant.has_mu else np.zeros(n)
    ll1, nonconv1 = bar_loglik(variant, bar, mu1, z, control)
    neginf1 = int(np.count_nonzero(np.isneginf(ll1)))
    if parent_idx is None:
        top = np.max(ll1)
        if top == -np.inf:
            raise FilterDegeneracyError(cloud.time_index,
                                        "zero first-stage likelihood for every particle")
        g = w * np.exp(ll1 - top)
        total = g.sum()
        if total <= 0.0:
            raise FilterDegeneracyError(cloud.time_index,
                                        "first-stage probabilities degenerate")
        cum = np.cumsum(g / total)
        cum[-1] = 1.0
        parent_idx = np.searchsorted(cum, u_ind, side="left").astype(np.intp)

    # step 3: kernel move of the structural parameters
    chol = np.linalg.cholesky(cov)
    eta_new = m[parent_idx] + math.sqrt(one_minus_a2) * (param_noise @ chol.T)

    # step 4: AR(1) state propagation from the resampled parent
    alpha_n = eta_new[:, variant.i_alpha]
    phi_n = expit(eta_new[:, variant.i_phi])
    tau_n = np.exp(0.5 * np.clip(eta_new[:, variant.i_tau2], -700.0, 700.0))
    ls_new = alpha_n + phi_n * (ls[parent_idx] - alpha_n) + tau_n * state_noise
    # keep sigma, sigma^2 and 1/sigma^2 representable; the clamp only binds for
    # particles whose likelihood is zero anyway
    ls_new = np.clip(ls_new, -170.0, 170.0)

    # step 5: importance weights against the parents' point estimates
    mu_new = eta_new[:, 0] if variant.has_mu else np.zeros(n)
    ll2, nonconv2 = bar_loglik(variant, bar, mu_new, np.exp(ls_new), control)
    neginf2 = int(np.count_nonzero(np.isneginf(ll2)))
    denom = ll1[parent_idx]
    with np.errstate(invalid="ignore"):
        log_w = ll2 - denom
    # injected ancestry may point at zero-probability parents; their ratio is
    # ill-defined and the particle is discarded
    log_w[~np.isfinite(denom)] = -np.inf
    top = np.max(log_w)
    if top == -np.inf:
        raise FilterDegeneracyError(cloud.time_index,
                                    "zero likelihood for every propagated particle")
    w_new = np.exp(log_w - top)
    w_new /= w_new.sum()

    snap = _summarize(variant, cloud.time_index, np.exp(ls_new), eta_new, w_new,
                      neginf1 + neginf2, nonconv1 + nonconv2)

    if resample_threshold is not None and snap.ess < resample_threshold * n:
        idx = systematic_resample(w_new, rng.random())
        ls_new, eta_new = ls_new[idx], eta_new[idx]
        w_new = np.full(n, 1.0 / n)

    new_cloud = ParticleCloud(log_sigma=ls_new, eta=eta_new, weights=w_new,
                              time_index=cloud.time_index + 1, variant=variant)
    return new_cloud, snap


def run_filter(bars: Sequence[ChloObservation], config: FilterConfig,
               seed_seq: np.random.SeedSequence | None = None) -> list[FilterSnapshot]:
    """Filter a bar sequence; deterministic given the config seed.

    Each period consumes its own seed-sequence substream, so results do not
    depend on how the per-particle work is scheduled.  ``seed_seq`` lets a
    caller (the study runner) supply an already-spawned stream in place of
    ``config.seed``.
    """
    if len(bars) == 0:
        raise InvalidInputError("need at least one bar")
    if seed_seq is None:
        seed_seq = np.random.SeedSequence(config.seed)
    streams = seed_seq.spawn(len(bars) + 1)
    cloud = init_cloud(config.prior, config.n_particles, config.variant,
                       np.random.default_rng(streams[0]))
    snapshots = []
    for t, bar in enumerate(bars):
        cloud, snap = filter_step(cloud, bar, config.discount, config.series,
                                  np.random.default_rng(streams[t + 1]),
                                  resample_threshold=config.resample_threshold)
        snapshots.append(snap)
    return snapshots
