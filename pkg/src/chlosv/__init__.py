"""Stochastic volatility from OHLC bars.

Core pieces: exact per-period likelihoods built on the joint law of the
extremes and close of drifted Brownian motion (``likelihood``), the AR(1)
log-volatility process with its priors and transforms (``volprocess``), a
Liu-West auxiliary particle filter for joint state/parameter learning
(``filter``), a ground-truth simulator with a model-comparison study runner
and a Monte Carlo density oracle (``simulate``), and CSV/CLI plumbing
(``io``, ``cli``, ``report``).
"""

from .errors import (
    ChlosvError,
    ConfigError,
    DataError,
    FilterDegeneracyError,
    InvalidInputError,
    InvalidParameterError,
)
from .filter import (
    FilterConfig,
    FilterSnapshot,
    ModelVariant,
    Particle,
    ParticleCloud,
    ess,
    filter_step,
    init_cloud,
    run_filter,
    shrinkage_constants,
    weighted_quantile,
)
from .likelihood import (
    ChloObservation,
    PeriodParams,
    SeriesControl,
    log_density_chlo,
    log_density_close,
    log_density_close_max,
    log_density_close_min,
    log_density_range,
    log_density_range_close,
    truncated_signed_series,
)
from .simulate import (
    Box,
    SimConfig,
    SimDataset,
    mc_density_oracle,
    run_study,
    simulate_dataset,
    simulate_period,
)
from .volprocess import (
    Eta,
    PriorHyper,
    Theta,
    evolve_logvol,
    from_eta,
    sample_prior,
    stationary_init,
    to_eta,
)

__version__ = "0.1.0"
