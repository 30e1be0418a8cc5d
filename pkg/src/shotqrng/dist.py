"""Photon-count and photon-difference distributions.

All distributions are returned as :class:`Pmf` objects: log-probabilities on
a finite window of integer outcomes together with a certified bound on the
probability mass that falls outside the window.  Windows are chosen from
Chernoff bounds on the tails, so ``tail_mass_bound`` is a proof, not an
estimate.
"""
from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError
from .specfun import _SERIES_RADIUS, _debye_prefactor, log_bessel_i_scaled

__all__ = [
    "DEFAULT_EPSILON",
    "Pmf",
    "LoParams",
    "SignalParams",
    "poisson_pmf",
    "skellam_pmf",
    "general_skellam_pmf",
    "branch_means_homodyne",
    "branch_means_heterodyne",
    "homodyne_pmf",
    "heterodyne_pmfs",
    "detector_count_pmf",
    "difference_pmf",
    "sample_counts",
]

DEFAULT_EPSILON = 1e-12
PLANCK_H = 6.62607015e-34  # J s, exact by SI definition


@dataclass(frozen=True)
class Pmf:
    """A pmf over the integers ``offset, offset + 1, ...`` stored as logs."""

    offset: int
    log_probs: np.ndarray
    tail_mass_bound: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=float)
        if lp.ndim != 1 or lp.size == 0:
            raise DomainError("Pmf needs a nonempty 1-d array of log-probabilities")
        if np.any(np.isnan(lp)) or np.any(lp > 0.0):
            raise DomainError("log-probabilities must be <= 0")
        lp.setflags(write=False)
        object.__setattr__(self, "log_probs", lp)
        object.__setattr__(self, "offset", int(self.offset))

    def __len__(self):
        return self.log_probs.size

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self), dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def total_mass(self) -> float:
        return float(math.fsum(self.probs))

    def mean(self) -> float:
        p = self.probs
        return float(math.fsum(p * self.support) / math.fsum(p))

    def variance(self) -> float:
        p = self.probs
        d = self.support - self.mean()
        return float(math.fsum(p * d * d) / math.fsum(p))

    def log_prob(self, j: int) -> float:
        i = int(j) - self.offset
        if 0 <= i < len(self):
            return float(self.log_probs[i])
        return -math.inf

    def prob(self, j: int) -> float:
        return math.exp(self.log_prob(j))

    # serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "offset": self.offset,
            "probs": [float(p) for p in self.probs],
            "tail_mass_bound": float(self.tail_mass_bound),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "probability"])
        for j, p in zip(self.support, self.probs):
            writer.writerow([int(j), repr(float(p))])
        return buf.getvalue()

    @classmethod
    def from_probs(cls, offset: int, probs, tail_mass_bound: float = 0.0) -> "Pmf":
        with np.errstate(divide="ignore"):
            lp = np.log(np.asarray(probs, dtype=float))
        return cls(offset, np.minimum(lp, 0.0), tail_mass_bound)

    @classmethod
    def from_json(cls, text: str) -> "Pmf":
        try:
            data = json.loads(text)
            return cls.from_probs(data["offset"], data["probs"], data.get("tail_mass_bound", 0.0))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"malformed pmf JSON: {exc}") from exc

    @classmethod
    def from_csv(cls, text: str) -> "Pmf":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["j", "probability"]:
            raise ConfigurationError("pmf CSV must start with the header 'j,probability'")
        js = np.array([int(r[0]) for r in rows[1:]])
        ps = np.array([float(r[1]) for r in rows[1:]])
        if js.size == 0 or np.any(np.diff(js) != 1):
            raise ConfigurationError("pmf CSV outcomes must be consecutive integers")
        return cls.from_probs(int(js[0]), ps)

    @classmethod
    def load(cls, path) -> "Pmf":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json":
            return cls.from_json(text)
        return cls.from_csv(text)


@dataclass(frozen=True)
class LoParams:
    """Local oscillator seen by one detector: mean photons per window and phase."""

    mean_photons_mu: float
    phase_phi: float = 0.0

    def __post_init__(self):
        if not self.mean_photons_mu >= 0:
            raise DomainError("mean photon number must be >= 0")

    @classmethod
    def from_amplitude(cls, alpha: complex) -> "LoParams":
        alpha = complex(alpha)
        return cls(abs(alpha) ** 2 / 2.0, cmath.phase(alpha))

    @classmethod
    def from_power(cls, power_w: float, tau_s: float, nu_hz: float, phase: float = 0.0) -> "LoParams":
        # total photons per response window is P tau / (h nu), split over two detectors
        return cls(power_w * tau_s / (2.0 * PLANCK_H * nu_hz), phase)


@dataclass(frozen=True)
class SignalParams:
    """Coherent signal amplitude and the local oscillator amplitude(s)."""

    amplitude_beta: complex = 0j
    lo_amplitude: complex = 0j
    lo2_amplitude: complex | None = None


# --- tail certification -------------------------------------------------------


def _log_upper_tail(mu1: float, mu2: float, k: int) -> float:
    """Chernoff bound on ln P(N1 - N2 >= k) for k above the mean, N_i ~ Poisson(mu_i)."""
    if k <= mu1 - mu2:
        return 0.0
    if mu1 == 0.0:
        if k > 0:
            return -math.inf
        # -N2 >= k  <=>  N2 <= -k : Poisson lower tail
        m = -k
        return -mu2 + m + (m * math.log(mu2 / m) if m > 0 else 0.0)
    # optimal tilt e^t = (k + sq) / (2 mu1); the bound mu1 (e^t - 1) + mu2 (e^-t - 1) - k t
    # then simplifies to sq - mu1 - mu2 - k t
    sq = math.hypot(k, 2.0 * math.sqrt(mu1) * math.sqrt(mu2))
    if k >= 0:
        t = math.log(k + sq) - math.log(2.0 * mu1)
    else:
        t = math.log(2.0 * mu2) - math.log(sq - k)
    mean = mu1 - mu2
    return (k - mean) * (k + mean) / (sq + mu1 + mu2) - k * t


def _log_lower_tail(mu1: float, mu2: float, k: int) -> float:
    """Chernoff bound on ln P(N1 - N2 <= k) for k below the mean."""
    return _log_upper_tail(mu2, mu1, -k)


def _first_below(bound, start: int, step_sign: int, log_target: float) -> int:
    """Smallest |k - start| such that bound(k) <= log_target, walking away from start."""
    if bound(start) <= log_target:
        return start
    lo, step = 0, 1
    while bound(start + step_sign * step) > log_target:
        lo = step
        step *= 2
    hi = step
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(start + step_sign * mid) <= log_target:
            hi = mid
        else:
            lo = mid
    return start + step_sign * hi


def _difference_window(mu1: float, mu2: float, epsilon: float) -> tuple[int, int, float]:
    """Window [lo, hi] for N1 - N2 and the certified mass outside it."""
    mean = mu1 - mu2
    log_half = math.log(epsilon / 2.0)
    above = _first_below(lambda k: _log_upper_tail(mu1, mu2, k), math.floor(mean) + 1, +1, log_half)
    below = _first_below(lambda k: _log_lower_tail(mu1, mu2, k), math.ceil(mean) - 1, -1, log_half)
    tail = math.exp(_log_upper_tail(mu1, mu2, above)) + math.exp(_log_lower_tail(mu1, mu2, below))
    return below + 1, above - 1, tail


def _check_epsilon(epsilon: float):
    if not 0.0 < epsilon < 1.0:
        raise DomainError("window epsilon must lie in (0, 1)")


def _check_mean(name: str, mu: float):
    if not (mu >= 0.0 and math.isfinite(mu)):
        raise DomainError(f"{name} must be finite and >= 0, got {mu!r}")


_LOG_2PI = math.log(2.0 * math.pi)
_SMALL_N = np.arange(16, dtype=float)
# ln n! - ((n + 1/2) ln n - n + ln(2 pi) / 2), exact for small n
_SMALL_STIRLERR = np.array(
    [math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - 0.5 * _LOG_2PI if n else 1.0 - 0.5 * _LOG_2PI
     for n in range(16)]
)


def _stirlerr(n: np.ndarray) -> np.ndarray:
    out = np.empty_like(n, dtype=float)
    small = n < 16
    out[small] = _SMALL_STIRLERR[n[small].astype(np.int64)]
    x = n[~small].astype(float)
    x2 = x * x
    out[~small] = (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - (1.0 / 1680 - 1.0 / (1188 * x2)) / x2) / x2) / x2) / x
    return out


def _deviance(x: np.ndarray, mu: float) -> np.ndarray:
    """x ln(x / mu) + mu - x, accurate when x is close to mu."""
    x = x.astype(float)
    out = np.empty_like(x)
    near = np.abs(x - mu) < 0.1 * (x + mu)
    far = ~near
    out[far] = x[far] * (np.log(x[far]) - math.log(mu)) + mu - x[far]
    if np.any(near):
        xs = x[near]
        v = (xs - mu) / (xs + mu)
        s = (xs - mu) * v
        ej = 2.0 * xs * v
        v2 = v * v
        for k in range(1, 200):
            ej = ej * v2
            term = ej / (2 * k + 1)
            s = s + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(s)):
                break
        out[near] = s
    return out


def _poisson_log_pmf(j: np.ndarray, mu: float) -> np.ndarray:
    # saddle-point form: avoids cancelling -mu + j ln mu - ln j! at large mu
    out = np.full(j.shape, -mu, dtype=float)
    pos = j > 0
    jp = j[pos]
    out[pos] = -_stirlerr(jp) - _deviance(jp, mu) - 0.5 * (_LOG_2PI + np.log(jp.astype(float)))
    return out


def _point_mass(j: int = 0) -> Pmf:
    return Pmf(j, np.zeros(1), 0.0)


# --- distributions ------------------------------------------------------------


def poisson_pmf(mu: float, window_epsilon: float = DEFAULT_EPSILON) -> Pmf:
    """Photon-count distribution of one detector, ``exp(-mu) mu^j / j!``."""
    _check_mean("mu", mu)
    _check_epsilon(window_epsilon)
    if mu == 0.0:
        return _point_mass(0)
    lo, hi, tail = _difference_window(mu, 0.0, window_epsilon)
    lo = max(lo, 0)
    j = np.arange(lo, hi + 1, dtype=np.int64)
    log_p = _poisson_log_pmf(j, mu)
    return Pmf(lo, np.minimum(log_p, 0.0), tail)


def general_skellam_pmf(mu1: float, mu2: float, window_epsilon: float = DEFAULT_EPSILON) -> Pmf:
    """Distribution of ``N1 - N2`` with independent ``N_i ~ Poisson(mu_i)``.

    ``p_j = exp(-(mu1 + mu2)) (mu1 / mu2)^(j / 2) I_j(2 sqrt(mu1 mu2))``.  When
    either mean is zero the result is a (reflected) Poisson pmf.
    """
    _check_mean("mu1", mu1)
    _check_mean("mu2", mu2)
    _check_epsilon(window_epsilon)
    if mu2 == 0.0:
        return poisson_pmf(mu1, window_epsilon)
    if mu1 == 0.0:
        p = poisson_pmf(mu2, window_epsilon)
        return Pmf(-(p.offset + len(p) - 1), p.log_probs[::-1].copy(), p.tail_mass_bound)

    lo, hi, tail = _difference_window(mu1, mu2, window_epsilon)
    j = np.arange(lo, hi + 1, dtype=np.int64)
    return Pmf(lo, np.minimum(_difference_log_pmf(j, mu1, mu2), 0.0), tail)


def _difference_log_pmf(j: np.ndarray, mu1: float, mu2: float) -> np.ndarray:
    # both means > 0
    z = 2.0 * math.sqrt(mu1) * math.sqrt(mu2)
    nu = np.abs(j).astype(float)
    out = np.empty(j.shape, dtype=float)
    small = np.hypot(nu, z) < _SERIES_RADIUS
    if np.any(small):
        # -(mu1 + mu2) + z, without cancellation
        log_scale = -((math.sqrt(mu1) - math.sqrt(mu2)) ** 2)
        log_ratio = 0.5 * (math.log(mu1) - math.log(mu2))
        out[small] = log_scale + j[small] * log_ratio + log_bessel_i_scaled(nu[small], z)
    big = ~small
    if np.any(big):
        # With the uniform expansion the exponent collapses to
        #   s - mu1 - mu2 + nu ln(2 mu_b / (nu + s)),
        # mu_b the mean of the detector on the side of j.  Both pieces vanish
        # at the mode, so they are formed from (nu - d) with d the signed mean.
        n = nu[big]
        s, prefactor = _debye_prefactor(n, np.full_like(n, z))
        pos = j[big] >= 0
        mu_b = np.where(pos, mu1, mu2)
        d = np.where(pos, mu1 - mu2, mu2 - mu1)
        excess = (n - d) * (n + d) / (s + mu1 + mu2)  # s - (mu1 + mu2)
        exponent = excess - n * np.log1p(((n - d) + excess) / (2.0 * mu_b))
        out[big] = exponent + prefactor
    return out


def skellam_pmf(mu: float, window_epsilon: float = DEFAULT_EPSILON) -> Pmf:
    """Photon-number difference of a balanced detector, ``exp(-2mu) I_|j|(2mu)``."""
    return general_skellam_pmf(mu, mu, window_epsilon)


def detector_count_pmf(lo: LoParams, window_epsilon: float = DEFAULT_EPSILON) -> Pmf:
    """Counts at one detector; the LO phase does not enter."""
    return poisson_pmf(lo.mean_photons_mu, window_epsilon)


def difference_pmf(lo: LoParams, window_epsilon: float = DEFAULT_EPSILON) -> Pmf:
    """Photon-number difference for vacuum input; the LO phase does not enter."""
    return skellam_pmf(lo.mean_photons_mu, window_epsilon)


def branch_means_homodyne(sig: SignalParams) -> tuple[float, float]:
    beta = complex(sig.amplitude_beta)
    alpha = complex(sig.lo_amplitude)
    return abs(beta + alpha) ** 2 / 2.0, abs(beta - alpha) ** 2 / 2.0


def branch_means_heterodyne(sig: SignalParams) -> tuple[float, float, float, float]:
    if sig.lo2_amplitude is None:
        raise ConfigurationError("heterodyne detection needs a second local oscillator")
    half_beta = complex(sig.amplitude_beta) / 2.0
    a1 = complex(sig.lo_amplitude) / math.sqrt(2.0)
    a2 = complex(sig.lo2_amplitude) / math.sqrt(2.0)
    return (
        abs(half_beta + a1) ** 2,
        abs(half_beta - a1) ** 2,
        abs(half_beta + a2) ** 2,
        abs(half_beta - a2) ** 2,
    )


def homodyne_pmf(sig: SignalParams, window_epsilon: float = DEFAULT_EPSILON) -> Pmf:
    return general_skellam_pmf(*branch_means_homodyne(sig), window_epsilon)


def heterodyne_pmfs(sig: SignalParams, window_epsilon: float = DEFAULT_EPSILON) -> tuple[Pmf, Pmf]:
    """The two output distributions of heterodyne detection.

    The outputs are treated as independent, so their joint pmf is the product
    of these marginals.
    """
    m3, m4, m5, m6 = branch_means_heterodyne(sig)
    return general_skellam_pmf(m3, m4, window_epsilon), general_skellam_pmf(m5, m6, window_epsilon)


def sample_counts(mu: float, n: int, seed=None) -> np.ndarray:
    """``n`` i.i.d. Poisson(mu) photon counts; deterministic for a fixed seed.

    ``seed`` may be an int, a ``SeedSequence`` or a ``numpy.random.Generator``.
    """
    _check_mean("mu", mu)
    if n < 1:
        raise DomainError("need at least one sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.poisson(mu, size=int(n))
