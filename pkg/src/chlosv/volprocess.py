"""AR(1) log-volatility dynamics, structural-parameter priors and transforms.

The structural parameters live in two coordinate systems: ``Theta`` holds the
natural values (mu, alpha, phi, tau2) and ``Eta`` the unconstrained ones
(mu, alpha, logit(phi), log(tau2)) used by the particle filter's Gaussian
kernel moves.  ``to_eta``/``from_eta`` are exact inverses up to the logistic
clamp at phi in {0, 1}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

PHI_CLAMP = 1e-12


@dataclass(frozen=True)
class Theta:
    """Natural-space structural parameters of the volatility model."""

    mu: float
    alpha: float
    phi: float
    tau2: float

    def __post_init__(self):
        vals = (self.mu, self.alpha, self.phi, self.tau2)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"non-finite structural parameters: {vals}")
        if not (0.0 <= self.phi < 1.0):
            raise InvalidParameterError(f"phi must be in [0, 1), got {self.phi}")
        if self.tau2 <= 0.0:
            raise InvalidParameterError(f"tau2 must be > 0, got {self.tau2}")

    @property
    def tau(self) -> float:
        return math.sqrt(self.tau2)


@dataclass(frozen=True)
class Eta:
    """Unconstrained parameters: (mu, alpha, logit(phi), log(tau2))."""

    mu: float
    alpha: float
    logit_phi: float
    log_tau2: float

    def __post_init__(self):
        vals = (self.mu, self.alpha, self.logit_phi, self.log_tau2)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"non-finite transformed parameters: {vals}")


@dataclass(frozen=True)
class PriorHyper:
    """Hyperparameters of the independent structural priors.

    mu ~ N(mu_mean, mu_var), alpha ~ N(alpha_mean, alpha_var),
    phi ~ Beta(phi_shape1, phi_shape2) with mean shape1/(shape1+shape2),
    tau2 ~ InvGamma(tau2_shape, tau2_scale) with mean scale/(shape-1).

    Defaults center the prior on the simulation-study truth: weekly drift
    near zero, long-run volatility median exp(-3.75), phi around 0.9 and
    tau2 around 0.012.
    """

    mu_mean: float = 0.0
    mu_var: float = 1e-4
    alpha_mean: float = -3.75
    alpha_var: float = 0.025
    phi_shape1: float = 9.0
    phi_shape2: float = 1.0
    tau2_shape: float = 6.0
    tau2_scale: float = 0.06

    def __post_init__(self):
        vals = (self.mu_mean, self.mu_var, self.alpha_mean, self.alpha_var,
                self.phi_shape1, self.phi_shape2, self.tau2_shape, self.tau2_scale)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError(f"non-finite prior hyperparameters: {vals}")
        if self.mu_var <= 0 or self.alpha_var <= 0:
            raise InvalidParameterError("prior variances must be > 0")
        if min(self.phi_shape1, self.phi_shape2, self.tau2_shape, self.tau2_scale) <= 0:
            raise InvalidParameterError("prior shapes/scales must be > 0")


def evolve_logvol(logsigma_prev: float, theta: Theta, noise: float) -> float:
    """One AR(1) step: alpha + phi (logsigma_prev - alpha) + tau * noise."""
    return theta.alpha + theta.phi * (logsigma_prev - theta.alpha) + theta.tau * noise


def stationary_init(theta: Theta, noise: float) -> float:
    """Draw from the stationary law N(alpha, tau2 / (1 - phi^2)) given a
    standard-normal ``noise``."""
    if theta.phi >= 1.0:
        raise InvalidParameterError("stationary distribution requires phi < 1")
    sd = theta.tau / math.sqrt(1.0 - theta.phi * theta.phi)
    return theta.alpha + sd * noise


def sample_prior(hyper: PriorHyper, rng: np.random.Generator) -> Theta:
    """One independent draw of Theta from the prior."""
    mu = rng.normal(hyper.mu_mean, math.sqrt(hyper.mu_var))
    alpha = rng.normal(hyper.alpha_mean, math.sqrt(hyper.alpha_var))
    phi = min(rng.beta(hyper.phi_shape1, hyper.phi_shape2), 1.0 - PHI_CLAMP)
    tau2 = 1.0 / max(rng.gamma(hyper.tau2_shape, 1.0 / hyper.tau2_scale),
                     np.finfo(float).tiny)
    return Theta(mu=mu, alpha=alpha, phi=phi, tau2=tau2)


def logit(p):
    return np.log(p) - np.log1p(-p)


def expit(z):
    # evaluated from the side that keeps exp() underflowing, not overflowing
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


def to_eta(theta: Theta) -> Eta:
    """Map Theta to the unconstrained space.

    phi exactly 0 (or within PHI_CLAMP of 1) is clamped before the logit and
    reported with a warning; the Liu-West perturbation can push particles to
    those boundaries.
    """
    phi = theta.phi
    if phi < PHI_CLAMP or phi > 1.0 - PHI_CLAMP:
        warnings.warn(f"phi={phi} clamped to ({PHI_CLAMP}, {1 - PHI_CLAMP}) before logit",
                      RuntimeWarning, stacklevel=2)
        phi = min(max(phi, PHI_CLAMP), 1.0 - PHI_CLAMP)
    return Eta(mu=theta.mu, alpha=theta.alpha,
               logit_phi=float(logit(phi)), log_tau2=math.log(theta.tau2))


def from_eta(eta: Eta) -> Theta:
    """Inverse of ``to_eta``; always lands strictly inside Theta's support."""
    return Theta(mu=eta.mu, alpha=eta.alpha,
                 phi=float(expit(eta.logit_phi)), tau2=math.exp(eta.log_tau2))
