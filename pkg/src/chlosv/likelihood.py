"""Per-period likelihoods for OHLC bars of a drifted Brownian log-price.

Within one unit-length trading period the log price is Brownian motion with
drift ``mu`` and volatility ``sigma``.  This module evaluates, in log space,
the joint density of any observed subset of (low, high, close) conditional
on the period's starting value:

* ``log_density_close``       -- close only (Gaussian),
* ``log_density_chlo``        -- low, high and close jointly (image-sum series),
* ``log_density_range_close`` -- range = high - low, plus close,
* ``log_density_range``       -- range only (drift-free by construction),
* ``log_density_close_max``   -- close and high (low unobserved),
* ``log_density_close_min``   -- close and low (high unobserved).

The series densities share one truncation engine, ``truncated_signed_series``.
Every function returns -inf outside the stated support; NaN/Inf inputs raise
``InvalidInputError`` instead, so data corruption is never silently mapped to
zero likelihood.

Array kernels (``chlo_loglik`` and friends) broadcast over vectors of
(mu, sigma) for a fixed bar; the particle filter uses them directly and the
scalar operations above are thin wrappers, so both routes run the same math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
NEG_INF = float("-inf")


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the image-sum series.

    ``rel_tol`` stops summation once a block contributes less than
    ``rel_tol`` times the running total in absolute value; ``max_terms``
    caps the number of symmetric blocks (|n| levels).
    """

    rel_tol: float = 1e-12
    max_terms: int = 100

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0) or not math.isfinite(self.rel_tol):
            raise InvalidParameterError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if int(self.max_terms) < 1 or self.max_terms != int(self.max_terms):
            raise InvalidParameterError(f"max_terms must be a positive integer, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


@dataclass(frozen=True)
class PeriodParams:
    """Drift and volatility of the log price over one period."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise InvalidInputError(f"non-finite period parameters (mu={self.mu}, sigma={self.sigma})")
        if self.sigma <= 0.0:
            raise InvalidParameterError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class ChloObservation:
    """One period's log prices: conditioning open, close, optional extremes.

    ``open`` is the value the period is conditioned on (the bar's own open,
    or the previous close when the weekend effect is ignored).  Ordering is
    not enforced here: densities return -inf outside their support, which
    keeps genuinely impossible bars distinguishable from corrupt ones.
    """

    open: float
    close: float
    low: float | None = None
    high: float | None = None

    def __post_init__(self):
        for name in ("open", "close", "low", "high"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise InvalidInputError(f"non-finite {name} in observation: {v}")

    @property
    def has_low(self) -> bool:
        return self.low is not None

    @property
    def has_high(self) -> bool:
        return self.high is not None


class SeriesResult(NamedTuple):
    value: float | np.ndarray
    blocks_used: int | np.ndarray
    converged: bool | np.ndarray


class LogDensityResult(NamedTuple):
    """Array log-density with per-element series diagnostics."""

    logp: np.ndarray
    blocks_used: np.ndarray
    converged: np.ndarray


def truncated_signed_series(block_fn: Callable[[int], float | np.ndarray],
                            control: SeriesControl = DEFAULT_SERIES) -> SeriesResult:
    """Sum a signed series block by block with relative-tolerance stopping.

    ``block_fn(k)`` returns the k-th block's total contribution (scalar or
    ndarray; arrays are summed elementwise with per-element stopping).
    Callers whose terms are indexed over n in Z pair the +n/-n terms into a
    single block and must not pass identically-zero leading blocks (e.g. the
    n = 0 term of the joint CHLO series, which vanishes exactly).

    Summation stops after block k when |b_k| <= rel_tol * |sum| or when
    ``max_terms`` blocks have been used; the converged flag reports which.
    Callers are expected to pre-scale terms (factor the largest e^{-d} out of
    the leading block) so the sum stays in floating range.
    """
    b0 = np.asarray(block_fn(0), dtype=float)
    scalar = b0.ndim == 0
    total = np.array(b0, dtype=float, copy=True)
    blocks = np.ones_like(total, dtype=np.int64)
    active = np.abs(b0) > control.rel_tol * np.abs(total)
    k = 0
    while bool(np.any(active)) and k + 1 < control.max_terms:
        k += 1
        bk = np.asarray(block_fn(k), dtype=float)
        total = np.where(active, total + bk, total)
        blocks = np.where(active, k + 1, blocks)
        active = active & (np.abs(bk) > control.rel_tol * np.abs(total))
    converged = ~active
    if scalar:
        return SeriesResult(float(total), int(blocks), bool(converged))
    return SeriesResult(total, blocks, converged)


def _check_params(mu, sigma):
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise InvalidInputError("non-finite mu/sigma")
    if np.any(sigma <= 0.0):
        raise InvalidParameterError("sigma must be > 0")
    return mu, sigma


def _check_finite(name, value):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise InvalidInputError(f"non-finite {name}")
    return value


def _masked_logp(valid, total, shift, prefac, blocks, converged) -> LogDensityResult:
    ok = valid & (np.asarray(total) > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(ok, np.log(np.where(ok, total, 1.0)) - shift + prefac, NEG_INF)
    blocks = np.where(valid, blocks, 0)
    converged = np.where(valid, converged, True)
    return LogDensityResult(np.asarray(logp, dtype=float), blocks, converged)


def gaussian_close_loglik(x, mu, sigma) -> np.ndarray:
    """log N(x | mu, sigma^2) for the net move x = close - open."""
    mu, sigma = _check_params(mu, sigma)
    z = (_check_finite("close", x) - mu) / sigma
    return -LOG_SQRT_2PI - np.log(sigma) - 0.5 * z * z


def chlo_loglik(x, low, high, mu, sigma,
                control: SeriesControl = DEFAULT_SERIES) -> LogDensityResult:
    """Log joint density of (low, high, close) for one bar; all five
    arguments broadcast together.

    Coordinates are relative to the conditioning open: ``x = close - open``,
    ``low``/``high`` likewise shifted.  Support: low < min(0, x) and
    high > max(0, x); outside it the log density is -inf.

    The image sum runs over pairs n = +-k.  Each block's exponents grow with
    k, so the minimal |n| = 1 exponent is factored out of every term before
    accumulation; a truncated sum that is not strictly positive (possible
    under heavy cancellation when sigma >> high - low) is reported as -inf
    with converged = False left to the diagnostics.
    """
    mu, sigma = _check_params(mu, sigma)
    x = _check_finite("close", x)
    low = _check_finite("low", low)
    high = _check_finite("high", high)
    floor = np.minimum(0.0, x)
    ceil = np.maximum(0.0, x)
    valid = (low < floor) & (high > ceil)
    x, lo, hi, mu, sigma, valid = np.broadcast_arrays(
        x, np.where(valid, low, floor - sigma), np.where(valid, high, ceil + sigma),
        mu, sigma, valid)
    r = hi - lo
    beta = x - 2.0 * lo             # s - 2a translated to the open
    inv2s2 = 0.5 / (sigma * sigma)
    shift = np.minimum(
        np.minimum((x - 2.0 * r) ** 2, (x + 2.0 * r) ** 2),
        np.minimum((beta - 2.0 * r) ** 2, (beta + 2.0 * r) ** 2),
    ) * inv2s2

    def block(k: int):
        out = 0.0
        for n in (k + 1, -(k + 1)):
            d1 = (x - 2.0 * n * r) ** 2 * inv2s2
            d2 = (beta - 2.0 * n * r) ** 2 * inv2s2
            out = out + (4.0 * n * n * (2.0 * d1 - 1.0) * np.exp(shift - d1)
                         - 4.0 * n * (n - 1) * (2.0 * d2 - 1.0) * np.exp(shift - d2))
        return out

    total, blocks, converged = truncated_signed_series(block, control)
    prefac = -LOG_SQRT_2PI - 3.0 * np.log(sigma) - (mu * mu - 2.0 * mu * x) * inv2s2
    return _masked_logp(valid, total, shift, prefac, blocks, converged)


def range_close_loglik(r, x, mu, sigma,
                       control: SeriesControl = DEFAULT_SERIES) -> LogDensityResult:
    """Log joint density of (range, close) for one bar; arguments broadcast.

    Obtained by integrating the CHLO joint density over the location of a
    window of fixed width r; support r > |x|.  The closed form is

        1/(sqrt(2 pi) sigma^3) exp{-(mu^2 - 2 mu x)/(2 sigma^2)} * sum_n [
            4 n^2 (2 d1 - 1)(r - |x|) e^{-d1}
            + 2 n (n-1) ((2nr - |x|) e^{-d1} - (2(n-1)r + |x|) e^{-e2}) ]

    with d1 = (2nr - |x|)^2/(2 sigma^2), e2 = (2(n-1)r + |x|)^2/(2 sigma^2),
    verified against quadrature of the CHLO density (the published variant of
    this formula carries sign/normalization typos that diverge).
    """
    mu, sigma = _check_params(mu, sigma)
    x = _check_finite("close", x)
    r = _check_finite("range", r)
    ax = np.abs(x)
    valid = r > ax
    ax, r, mu, sigma, valid = np.broadcast_arrays(
        ax, np.where(valid, r, ax + sigma), mu, sigma, valid)
    width = r - ax
    inv2s2 = 0.5 / (sigma * sigma)
    shift = (2.0 * r - ax) ** 2 * inv2s2

    def block(k: int):
        out = 0.0
        for n in (k + 1, -(k + 1)):
            g1 = 2.0 * n * r - ax
            d1 = g1 * g1 * inv2s2
            coef = 2.0 * n * (n - 1)
            term = (4.0 * n * n * (2.0 * d1 - 1.0) * width + coef * g1) * np.exp(shift - d1)
            if coef != 0.0:   # n = 1 has no window-edge image; its exponent can sit below the shift
                g2 = 2.0 * (n - 1) * r + ax
                term = term - coef * g2 * np.exp(shift - g2 * g2 * inv2s2)
            out = out + term
        return out

    total, blocks, converged = truncated_signed_series(block, control)
    prefac = -LOG_SQRT_2PI - 3.0 * np.log(sigma) - (mu * mu - 2.0 * mu * x) * inv2s2
    return _masked_logp(valid, total, shift, prefac, blocks, converged)


def range_loglik(r, sigma, control: SeriesControl = DEFAULT_SERIES) -> LogDensityResult:
    """Log density of the range of a driftless period; arguments broadcast.

    The range is ancillary for the drift, so no drift argument exists.  The
    density is the alternating image sum

        p(r) = 8 sum_{n>=1} (-1)^{n-1} n^2 / (sqrt(2 pi) sigma) e^{-n^2 r^2 / (2 sigma^2)}

    (this normalizes to one; the published rendering with an extra r factor
    does not).  Support r > 0.
    """
    _, sigma = _check_params(0.0, sigma)
    r = _check_finite("range", r)
    valid = r > 0.0
    r, sigma, valid = np.broadcast_arrays(np.where(valid, r, sigma), sigma, valid)
    t = r * r * 0.5 / (sigma * sigma)

    def block(k: int):
        n = k + 1
        sign = 1.0 if n % 2 == 1 else -1.0
        return sign * n * n * np.exp(-(n * n - 1.0) * t)

    total, blocks, converged = truncated_signed_series(block, control)
    prefac = math.log(8.0) - LOG_SQRT_2PI - np.log(sigma)
    return _masked_logp(valid, total, t, prefac, blocks, converged)


def close_max_loglik(x, high, mu, sigma) -> np.ndarray:
    """Log joint density of (close, high) with the low unobserved.

    Reflection-principle closed form over a unit period; support
    high > max(0, x).  Coordinates relative to the conditioning open;
    arguments broadcast.
    """
    mu, sigma = _check_params(mu, sigma)
    x = _check_finite("close", x)
    high = _check_finite("high", high)
    valid = high > np.maximum(0.0, x)
    g = np.where(valid, 2.0 * high - x, 1.0)
    inv2s2 = 0.5 / (sigma * sigma)
    logp = (np.log(2.0 * g) - LOG_SQRT_2PI - 3.0 * np.log(sigma)
            - g * g * inv2s2 + (2.0 * mu * x - mu * mu) * inv2s2)
    return np.where(valid, logp, NEG_INF)


def close_min_loglik(x, low, mu, sigma) -> np.ndarray:
    """Log joint density of (close, low) with the high unobserved.

    Mirror image of ``close_max_loglik``; support low < min(0, x).
    """
    mu, sigma = _check_params(mu, sigma)
    x = _check_finite("close", x)
    low = _check_finite("low", low)
    valid = low < np.minimum(0.0, x)
    g = np.where(valid, x - 2.0 * low, 1.0)
    inv2s2 = 0.5 / (sigma * sigma)
    logp = (np.log(2.0 * g) - LOG_SQRT_2PI - 3.0 * np.log(sigma)
            - g * g * inv2s2 + (2.0 * mu * x - mu * mu) * inv2s2)
    return np.where(valid, logp, NEG_INF)


# -- scalar operations on observations ---------------------------------------


def _relative(obs: ChloObservation):
    x = obs.close - obs.open
    low = None if obs.low is None else obs.low - obs.open
    high = None if obs.high is None else obs.high - obs.open
    return x, low, high


def log_density_close(obs: ChloObservation, p: PeriodParams) -> float:
    """Gaussian log density of the close given the open."""
    x, _, _ = _relative(obs)
    return float(gaussian_close_loglik(x, p.mu, p.sigma))


def log_density_chlo(obs: ChloObservation, p: PeriodParams,
                     control: SeriesControl = DEFAULT_SERIES) -> float:
    """Log joint density of (low, high, close) given the open."""
    x, low, high = _relative(obs)
    if low is None or high is None:
        raise InvalidInputError("chlo density requires both extremes")
    return float(chlo_loglik(x, low, high, p.mu, p.sigma, control).logp)


def log_density_range_close(r: float, obs: ChloObservation, p: PeriodParams,
                            control: SeriesControl = DEFAULT_SERIES) -> float:
    """Log joint density of (range, close) given the open."""
    if not math.isfinite(r):
        raise InvalidInputError(f"non-finite range: {r}")
    x, _, _ = _relative(obs)
    return float(range_close_loglik(r, x, p.mu, p.sigma, control).logp)


def log_density_range(r: float, sigma: float,
                      control: SeriesControl = DEFAULT_SERIES) -> float:
    """Log density of the period range; drift-free by ancillarity."""
    return float(range_loglik(r, sigma, control).logp)


def log_density_close_max(obs: ChloObservation, p: PeriodParams) -> float:
    """Log joint density of (close, high) given the open, low unobserved."""
    x, _, high = _relative(obs)
    if high is None:
        raise InvalidInputError("close/max density requires the high")
    return float(close_max_loglik(x, high, p.mu, p.sigma))


def log_density_close_min(obs: ChloObservation, p: PeriodParams) -> float:
    """Log joint density of (close, low) given the open, high unobserved."""
    x, low, _ = _relative(obs)
    if low is None:
        raise InvalidInputError("close/min density requires the low")
    return float(close_min_loglik(x, low, p.mu, p.sigma))
