"""Monte Carlo model of the generator and certification of recorded traces.

A trace is a sequence of unsigned ADC codes.  Codes are the signed bin index
from :func:`shotqrng.entropy.bin_index` shifted so the lowest reportable bin
is code 0.

Binary trace layout (little-endian)::

    magic      4s   b"SNQR"
    version    u16  1
    bit_depth  u16
    interval_a f64
    gain_k     f64
    sample_hz  f64
    alignment  f64  bin-grid shift as a fraction of a bin
    bin_min    i64  signed bin index of code 0
    bin_max    i64
    seed       i64  -1 if unknown
    count      u64
    codes      count x (u8 | u16 | u32), smallest type holding bit_depth bits

The CSV form carries the same header as ``# key=value`` comment lines
followed by a ``code`` column.
"""
from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .bounds import lower_bound_per_sample
from .dist import skellam_pmf
from .entropy import AdcParams, bin_index, quantize
from .errors import ConfigurationError, DomainError, EstimationError

__all__ = [
    "RawTrace",
    "MuEstimate",
    "Verdict",
    "CertificationResult",
    "simulate_trace",
    "estimate_mu",
    "certify",
    "plugin_entropies",
    "write_trace",
    "read_trace",
]

MAGIC = b"SNQR"
VERSION = 1
_HEADER = struct.Struct("<4sHHddddqqqQ")
STREAM_SIZE = 1 << 20
MIN_ESTIMATION_SAMPLES = 1000
SATURATION_LIMIT = 0.01


@dataclass
class RawTrace:
    samples: np.ndarray
    adc: AdcParams
    sample_rate_hz: float = 1.0
    seed: int | None = None
    source_tag: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1:
            raise DomainError("trace samples must be one-dimensional")
        if self.samples.size and (self.samples.min() < 0 or self.samples.max() >= 2 ** self.adc.bit_depth):
            raise DomainError("trace code outside the ADC range")

    def __len__(self):
        return self.samples.size

    @property
    def bins(self) -> np.ndarray:
        """Signed bin index of every sample."""
        return self.samples.astype(np.int64) + self.adc.bin_range[0]


def _code_dtype(bit_depth: int):
    if bit_depth <= 8:
        return np.dtype("<u1")
    if bit_depth <= 16:
        return np.dtype("<u2")
    return np.dtype("<u4")


def simulate_trace(
    mu: float,
    adc: AdcParams,
    n: int,
    seed: int = 0,
    sample_rate_hz: float = 1.0,
) -> RawTrace:
    """Simulate ``n`` ADC samples of ``k (N0 - N1)`` with ``N0, N1 ~ Poisson(mu)``.

    The sample count is cut into fixed-size blocks.  Block ``i`` gives each
    detector its own child of ``SeedSequence([seed, i])``, so the output
    depends only on ``seed`` and a shorter trace is a prefix of a longer one.
    """
    if not (mu >= 0 and math.isfinite(mu)):
        raise DomainError("mu must be finite and >= 0")
    if n < 1:
        raise DomainError("need at least one sample")
    n = int(n)
    lo = adc.bin_range[0]
    codes = np.empty(n, dtype=_code_dtype(adc.bit_depth))
    for i, start in enumerate(range(0, n, STREAM_SIZE)):
        size = min(STREAM_SIZE, n - start)
        det0, det1 = (np.random.default_rng(c) for c in np.random.SeedSequence([int(seed), i]).spawn(2))
        diff = det0.poisson(mu, size) - det1.poisson(mu, size)
        codes[start:start + size] = bin_index(diff, adc) - lo
    return RawTrace(codes, adc, sample_rate_hz, int(seed), "simulated")


@dataclass(frozen=True)
class MuEstimate:
    mu: float
    stderr: float


def _model_bin_variance(mu: float, adc: AdcParams) -> float:
    return quantize(skellam_pmf(mu), adc).variance()


def estimate_mu(trace: RawTrace) -> MuEstimate:
    """Per-detector mean photon number by moment matching.

    Solves ``Var[bin | mu] = s**2`` for the unbiased sample variance ``s**2``
    of the signed bin index.  For resolutions up to one photon per bin this is
    ``mu = s**2 r**2 / 2``; coarser bins are handled exactly, without a
    uniform-rounding (Sheppard) approximation.  The standard error follows
    from the delta method.
    """
    n = len(trace)
    if n < MIN_ESTIMATION_SAMPLES:
        raise EstimationError(f"need at least {MIN_ESTIMATION_SAMPLES} samples, got {n}")
    lo, hi = trace.adc.bin_range
    bins = trace.bins
    saturated = np.count_nonzero((bins == lo) | (bins == hi))
    if saturated >= SATURATION_LIMIT * n:
        raise EstimationError("trace is saturated: variance is censored by the ADC range")
    centered = bins.astype(float) - bins.mean()
    m2 = float(np.dot(centered, centered))
    s2 = m2 / (n - 1)
    m4 = float(np.sum(centered ** 4)) / n
    var_of_s2 = max(m4 - (m2 / n) ** 2 * (n - 3) / (n - 1), 0.0) / n
    if s2 == 0.0:
        return MuEstimate(0.0, 0.0)

    adc = trace.adc
    r = adc.resolution
    if r <= 1.0 and adc.alignment == 0.0 and float(1.0 / r).is_integer():
        # every bin holds at most one outcome and bin * r recovers it exactly
        return MuEstimate(s2 * r * r / 2.0, math.sqrt(var_of_s2) * r * r / 2.0)

    def gap(mu):
        return _model_bin_variance(mu, adc) - s2

    upper = max(s2 * r * r, 1.0)
    while gap(upper) < 0.0:
        upper *= 2.0
        if upper > 1e12:
            raise EstimationError("sample variance cannot be matched by the model")
    mu_hat = optimize.brentq(gap, 0.0, upper, xtol=1e-12, rtol=1e-12)
    h = max(1e-4 * mu_hat, 1e-8)
    slope = (gap(mu_hat + h) - gap(max(mu_hat - h, 0.0))) / (mu_hat + h - max(mu_hat - h, 0.0))
    stderr = math.sqrt(var_of_s2) / slope if slope > 0 else math.inf
    return MuEstimate(mu_hat, stderr)


class Verdict(str, enum.Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    INSUFFICIENT_DATA = "insufficient-data"


@dataclass
class CertificationResult:
    estimated_mu: float | None
    goodness_of_fit_pvalue: float
    empirical_shannon_bits: float
    empirical_min_entropy_bits: float
    analytic_r_lower_bits: float | None
    verdict: Verdict
    n_samples: int = 0
    chi_square: float | None = None
    degrees_of_freedom: int | None = None
    mu_stderr: float | None = None
    p_threshold: float = 0.01
    miller_madow: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["verdict"] = self.verdict.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def plugin_entropies(codes: np.ndarray, miller_madow: bool = False) -> tuple[float, float]:
    """Plug-in (Shannon, min) entropy in bits of the empirical code histogram."""
    _, counts = np.unique(codes, return_counts=True)
    n = counts.sum()
    p = counts / n
    shannon = -math.fsum(p * np.log2(p))
    if miller_madow:
        shannon += (counts.size - 1) / (2.0 * n * math.log(2.0))
    return max(shannon, 0.0) + 0.0, -math.log2(p.max()) + 0.0


def _pool_small_bins(expected: np.ndarray, observed: np.ndarray, minimum: float = 5.0):
    """Merge bins so every expected count is at least ``minimum``.

    Tails are pooled inward first; any remaining small interior bin is merged
    into its right neighbour.
    """
    exp_out, obs_out = [], []
    acc_e = acc_o = 0.0
    for e, o in zip(expected, observed):
        acc_e += e
        acc_o += o
        if acc_e >= minimum:
            exp_out.append(acc_e)
            obs_out.append(acc_o)
            acc_e = acc_o = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_out:
            exp_out[-1] += acc_e
            obs_out[-1] += acc_o
        else:
            exp_out.append(acc_e)
            obs_out.append(acc_o)
    return np.array(exp_out), np.array(obs_out)


def certify(
    trace: RawTrace,
    p_threshold: float = 0.01,
    min_samples: int = MIN_ESTIMATION_SAMPLES,
    miller_madow: bool = False,
) -> CertificationResult:
    """Test a trace against the quantized photon-difference model.

    Estimates ``mu`` from the trace, runs a chi-square goodness-of-fit test of
    the code histogram against the model at that ``mu`` (one fitted
    parameter), and reports plug-in entropies next to the analytic lower bound.
    """
    n = len(trace)
    if n == 0:
        return CertificationResult(None, 0.0, 0.0, 0.0, None, Verdict.INSUFFICIENT_DATA,
                                   p_threshold=p_threshold, miller_madow=miller_madow)
    shannon, hmin = plugin_entropies(trace.samples, miller_madow)
    base = dict(
        empirical_shannon_bits=shannon,
        empirical_min_entropy_bits=hmin,
        n_samples=n,
        p_threshold=p_threshold,
        miller_madow=miller_madow,
    )
    if n < max(min_samples, MIN_ESTIMATION_SAMPLES):
        return CertificationResult(None, 0.0, analytic_r_lower_bits=None,
                                   verdict=Verdict.INSUFFICIENT_DATA, **base)
    try:
        est = estimate_mu(trace)
    except EstimationError as exc:
        return CertificationResult(None, 0.0, analytic_r_lower_bits=None,
                                   verdict=Verdict.INCONSISTENT, notes=[str(exc)], **base)

    adc = trace.adc
    lo, hi = adc.bin_range
    model = quantize(skellam_pmf(est.mu), adc)
    probs = np.zeros(hi - lo + 1)
    probs[model.support - lo] = model.probs
    observed = np.bincount(trace.samples.astype(np.int64), minlength=probs.size).astype(float)
    expected, observed = _pool_small_bins(probs / probs.sum() * n, observed)
    dof = expected.size - 2
    if dof < 1:
        pvalue = 1.0 if np.allclose(expected, observed) else 0.0
        chi2 = 0.0 if pvalue == 1.0 else math.inf
        dof = max(dof, 0)
    else:
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        pvalue = float(stats.chi2.sf(chi2, dof))
    verdict = Verdict.CONSISTENT if pvalue >= p_threshold else Verdict.INCONSISTENT
    return CertificationResult(
        estimated_mu=est.mu,
        goodness_of_fit_pvalue=pvalue,
        analytic_r_lower_bits=lower_bound_per_sample(est.mu, adc),
        verdict=verdict,
        chi_square=chi2,
        degrees_of_freedom=dof,
        mu_stderr=est.stderr,
        **base,
    )


# --- file formats -------------------------------------------------------------


def write_trace(trace: RawTrace, path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    adc = trace.adc
    lo, hi = adc.bin_range
    seed = -1 if trace.seed is None else int(trace.seed)
    if fmt == "bin":
        header = _HEADER.pack(MAGIC, VERSION, adc.bit_depth, adc.interval_a, adc.gain_k,
                              trace.sample_rate_hz, adc.alignment, lo, hi, seed, len(trace))
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(trace.samples.astype(_code_dtype(adc.bit_depth)).tobytes())
    elif fmt == "csv":
        lines = [
            f"# shotqrng-trace version={VERSION}",
            f"# bit_depth={adc.bit_depth}",
            f"# interval_a={adc.interval_a!r}",
            f"# gain_k={adc.gain_k!r}",
            f"# sample_rate_hz={float(trace.sample_rate_hz)!r}",
            f"# alignment={float(adc.alignment)!r}",
            f"# bin_min={lo}",
            f"# bin_max={hi}",
            f"# seed={seed}",
            f"# count={len(trace)}",
            "code",
        ]
        body = "\n".join(map(str, trace.samples.tolist()))
        path.write_text("\n".join(lines) + "\n" + body + ("\n" if len(trace) else ""))
    else:
        raise ConfigurationError(f"unknown trace format {fmt!r}")
    return path


def _adc_from_header(bit_depth, a, k, alignment, lo, hi) -> AdcParams:
    half = 2 ** (bit_depth - 1)
    if (lo, hi) == (-half, half - 1):
        return AdcParams(a, k, bit_depth, alignment=alignment)
    # half-bin margins keep ceil/floor in bin_range clear of rounding
    return AdcParams(a, k, bit_depth, input_range=((lo - 0.5) * a, (hi + 0.5) * a), alignment=alignment)


def read_trace(path) -> RawTrace:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return _read_binary(path)
    return _read_csv(path)


def _read_binary(path: Path) -> RawTrace:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigurationError("truncated trace header")
    magic, version, bits, a, k, rate, alignment, lo, hi, seed, count = _HEADER.unpack_from(data)
    if version != VERSION:
        raise ConfigurationError(f"unsupported trace version {version}")
    dtype = _code_dtype(bits)
    codes = np.frombuffer(data, dtype=dtype, offset=_HEADER.size)
    if codes.size != count:
        raise ConfigurationError(f"trace declares {count} samples but holds {codes.size}")
    adc = _adc_from_header(bits, a, k, alignment, lo, hi)
    return RawTrace(codes.copy(), adc, rate, None if seed < 0 else seed, path.name)


def _read_csv(path: Path) -> RawTrace:
    meta = {}
    codes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for item in line[1:].split():
                    if "=" in item:
                        key, value = item.split("=", 1)
                        meta[key] = value
            elif line == "code":
                continue
            else:
                codes.append(int(line))
    try:
        bits = int(meta["bit_depth"])
        adc = _adc_from_header(bits, float(meta["interval_a"]), float(meta["gain_k"]),
                               float(meta.get("alignment", 0.0)), int(meta["bin_min"]), int(meta["bin_max"]))
        rate = float(meta.get("sample_rate_hz", 1.0))
        seed = int(meta.get("seed", -1))
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"malformed trace CSV header: {exc}") from exc
    samples = np.array(codes, dtype=_code_dtype(bits))
    if "count" in meta and int(meta["count"]) != samples.size:
        raise ConfigurationError("trace CSV count does not match its rows")
    return RawTrace(samples, adc, rate, None if seed < 0 else seed, path.name)
