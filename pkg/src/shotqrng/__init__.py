"""Shot-noise QRNG modelling: outcome distributions, randomness bounds, simulation."""

__version__ = "0.1.0"

from .bounds import (
    DetectorParams,
    RandomnessReport,
    lower_bound_per_sample,
    randomness_report,
    rate_ceiling,
    total_rates,
    upper_bound_per_sample,
)
from .dist import (
    LoParams,
    Pmf,
    SignalParams,
    branch_means_heterodyne,
    branch_means_homodyne,
    general_skellam_pmf,
    heterodyne_pmfs,
    poisson_pmf,
    sample_counts,
    skellam_pmf,
)
from .entropy import AdcParams, classical_quadrature_stats, min_entropy, quantize, shannon_entropy
from .errors import ConfigurationError, DomainError, EstimationError
from .sim import RawTrace, certify, estimate_mu, read_trace, simulate_trace, write_trace
from .specfun import log_bessel_i, log_factorial, log_sum_exp
