"""Per-sample randomness bounds and hardware-limited generation rates."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

from .dist import DEFAULT_EPSILON, PLANCK_H, poisson_pmf, skellam_pmf
from .entropy import AdcParams, quantize, shannon_entropy
from .errors import ConfigurationError, DomainError

__all__ = [
    "PLANCK_H",
    "DetectorParams",
    "RandomnessReport",
    "upper_bound_per_sample",
    "lower_bound_per_sample",
    "rate_ceiling",
    "randomness_report",
    "total_rates",
    "sweep",
]


@dataclass(frozen=True)
class DetectorParams:
    """Photodetector and laser parameters.

    ``max_frequency_nu_m`` may be ``inf`` to ignore the Nyquist limit.
    """

    response_time_tau: float | None = None
    max_frequency_nu_m: float | None = None
    power_P: float | None = None
    center_frequency_nu: float | None = None
    sampling_frequency_f: float | None = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if f.name == "power_P":
                ok = value >= 0 and math.isfinite(value)
            elif f.name == "max_frequency_nu_m":
                ok = value > 0
            else:
                ok = value > 0 and math.isfinite(value)
            if not ok:
                raise DomainError(f"detector parameter {f.name} out of range: {value!r}")

    @property
    def two_mu(self) -> float:
        """Mean photon number of the LO within one response time, ``P tau / (h nu)``."""
        missing = [n for n in ("power_P", "response_time_tau", "center_frequency_nu") if getattr(self, n) is None]
        if missing:
            raise ConfigurationError("mean photon number needs " + ", ".join(missing))
        return self.power_P * self.response_time_tau / (PLANCK_H * self.center_frequency_nu)

    @property
    def mu(self) -> float:
        return self.two_mu / 2.0

    def replace(self, **changes) -> "DetectorParams":
        return DetectorParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class RandomnessReport:
    """Randomness per sample (bits) and rates (bits/s) for one operating point.

    ``mu`` is the per-detector mean photon number; the upper bound is
    evaluated at the total ``two_mu = 2 mu``.
    """

    mu: float
    two_mu: float
    r0_bits: float
    r1_bits: float
    r_upper_bits: float
    r_lower_bits: float
    rate_ceiling_hz: float | None = None
    rate_upper_bps: float | None = None
    rate_lower_bps: float | None = None
    window_epsilon: float = DEFAULT_EPSILON
    adc: dict = field(default_factory=dict)
    detector: dict | None = None

    CSV_COLUMNS = (
        "mu", "two_mu", "r0_bits", "r1_bits", "r_upper_bits", "r_lower_bits",
        "rate_ceiling_hz", "rate_upper_bps", "rate_lower_bps", "resolution",
    )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_row(self) -> list:
        res = self.adc.get("interval_a", 1.0) / self.adc.get("gain_k", 1.0) if self.adc else ""
        values = [getattr(self, c) for c in self.CSV_COLUMNS[:-1]] + [res]
        return ["" if v is None else repr(float(v)) for v in values]

    @classmethod
    def to_csv(cls, reports) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cls.CSV_COLUMNS)
        for r in reports:
            writer.writerow(r.csv_row())
        return buf.getvalue()

    @classmethod
    def from_dict(cls, data: dict) -> "RandomnessReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def upper_bound_per_sample(two_mu: float, window_epsilon: float = DEFAULT_EPSILON) -> float:
    """``log2(2mu + 1) + H(Poisson(2mu))`` bits per sample."""
    if not two_mu >= 0:
        raise DomainError("two_mu must be >= 0")
    return math.log2(1.0 + two_mu) + shannon_entropy(poisson_pmf(two_mu, window_epsilon))


def lower_bound_per_sample(mu: float, adc: AdcParams, window_epsilon: float = DEFAULT_EPSILON) -> float:
    """Min-entropy of the ADC output: ``-log2`` of the mass in the zero-centred bin."""
    central = quantize(skellam_pmf(mu, window_epsilon), adc).log_prob(0)
    return max(-central / math.log(2.0), 0.0) + 0.0


def rate_ceiling(det: DetectorParams) -> float:
    """Useful sampling rate ``min(1/tau, 2 nu_m)`` in Hz."""
    if det.response_time_tau is None or det.max_frequency_nu_m is None:
        raise ConfigurationError("rate ceiling needs response_time_tau and max_frequency_nu_m")
    return min(1.0 / det.response_time_tau, 2.0 * det.max_frequency_nu_m)


def randomness_report(
    mu: float,
    adc: AdcParams,
    det: DetectorParams | None = None,
    window_epsilon: float = DEFAULT_EPSILON,
) -> RandomnessReport:
    """All per-sample quantities at per-detector mean ``mu``; rates if ``det`` has tau and nu_m."""
    if not (mu >= 0 and math.isfinite(mu)):
        raise DomainError("mu must be finite and >= 0")
    report = RandomnessReport(
        mu=mu,
        two_mu=2.0 * mu,
        r0_bits=shannon_entropy(poisson_pmf(mu, window_epsilon)),
        r1_bits=shannon_entropy(skellam_pmf(mu, window_epsilon)),
        r_upper_bits=upper_bound_per_sample(2.0 * mu, window_epsilon),
        r_lower_bits=lower_bound_per_sample(mu, adc, window_epsilon),
        window_epsilon=window_epsilon,
        adc=adc.to_dict(),
        detector=det.to_dict() if det is not None else None,
    )
    if det is not None and det.response_time_tau is not None and det.max_frequency_nu_m is not None:
        ceiling = rate_ceiling(det)
        report.rate_ceiling_hz = ceiling
        report.rate_upper_bps = ceiling * report.r_upper_bits
        report.rate_lower_bps = ceiling * report.r_lower_bits
    return report


def total_rates(det: DetectorParams, adc: AdcParams, window_epsilon: float = DEFAULT_EPSILON) -> RandomnessReport:
    """Report for a detector with LO power; ``mu = P tau / (2 h nu)``."""
    rate_ceiling(det)  # fail early on missing fields
    return randomness_report(det.mu, adc, det, window_epsilon)


def sweep(func, points, max_workers: int | None = None) -> list:
    """Evaluate ``func`` over ``points`` concurrently; results keep input order."""
    points = list(points)
    if max_workers == 1 or len(points) < 2:
        return [func(p) for p in points]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(func, points))
