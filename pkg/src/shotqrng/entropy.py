"""Randomness measures on pmfs and the ADC quantizer.

Entropies are in bits.  The quantizer places one bin symmetrically around a
zero photon difference, so with resolution ``r = a / k`` (photons per bin)
bin ``m`` collects the outcomes ``j`` with ``(m - 1/2) r <= j <= (m + 1/2) r``.
An outcome sitting exactly on a bin edge goes to the bin nearer zero; that
keeps the partition symmetric and makes the central bin the closed interval
``[-r/2, r/2]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import Pmf, SignalParams
from .errors import ConfigurationError, DomainError

__all__ = [
    "AdcParams",
    "shannon_entropy",
    "truncation_error_bits",
    "min_entropy",
    "bin_index",
    "quantize",
    "classical_quadrature_stats",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class AdcParams:
    """Digitizer after the balanced receiver.

    ``interval_a`` is the bin width in volts and ``gain_k`` the volts per
    photon, so ``resolution = a / k`` is the bin width in photons.
    ``input_range`` is a (low, high) pair in volts; bins whose centres lie
    outside it are folded into the edge bins.  Without a range the ADC spans
    ``2**bit_depth`` bins centred on zero.  ``alignment`` shifts the bin grid
    by a fraction of a bin (0 puts a bin centre at zero).
    """

    interval_a: float = 1.0
    gain_k: float = 1.0
    bit_depth: int = 16
    input_range: tuple[float, float] | None = None
    alignment: float = 0.0

    def __post_init__(self):
        if not self.gain_k > 0:
            raise DomainError("ADC gain k must be > 0")
        if not (self.interval_a > 0 and math.isfinite(self.interval_a)):
            raise DomainError("ADC interval a must be finite and > 0")
        if int(self.bit_depth) != self.bit_depth or not 1 <= self.bit_depth <= 32:
            raise ConfigurationError("bit depth must be an integer in [1, 32]")
        if not -0.5 <= self.alignment < 0.5:
            raise ConfigurationError("alignment must lie in [-0.5, 0.5)")
        lo, hi = self.bin_range
        if not lo <= 0 <= hi:
            raise ConfigurationError("input range must contain zero")
        if hi - lo + 1 > 2 ** self.bit_depth:
            raise ConfigurationError(
                f"input range spans {hi - lo + 1} bins, more than 2**{self.bit_depth}"
            )

    @classmethod
    def from_resolution(cls, resolution: float, bit_depth: int = 16, **kwargs) -> "AdcParams":
        return cls(interval_a=float(resolution), gain_k=1.0, bit_depth=bit_depth, **kwargs)

    @property
    def resolution(self) -> float:
        return self.interval_a / self.gain_k

    @property
    def bin_range(self) -> tuple[int, int]:
        """Lowest and highest bin index the converter can report."""
        if self.input_range is None:
            half = 2 ** (int(self.bit_depth) - 1)
            return -half, half - 1
        v_lo, v_hi = self.input_range
        if not v_lo < v_hi:
            raise ConfigurationError("input range must satisfy low < high")
        return math.ceil(v_lo / self.interval_a), math.floor(v_hi / self.interval_a)

    @property
    def zero_code(self) -> int:
        """Unsigned output code of the bin centred on zero."""
        return -self.bin_range[0]

    def to_dict(self) -> dict:
        return {
            "interval_a": self.interval_a,
            "gain_k": self.gain_k,
            "bit_depth": int(self.bit_depth),
            "input_range": list(self.input_range) if self.input_range is not None else None,
            "alignment": self.alignment,
        }


def bin_index(j, adc: AdcParams) -> np.ndarray:
    """Signed ADC bin for photon difference(s) ``j``, saturating at the range ends."""
    x = np.asarray(j, dtype=float) / adc.resolution + adc.alignment
    m = np.sign(x) * np.ceil(np.abs(x) - 0.5)
    lo, hi = adc.bin_range
    return np.clip(m, lo, hi).astype(np.int64)


def _grouped_log_sum_exp(lp: np.ndarray, starts: np.ndarray) -> np.ndarray:
    # log-sum-exp over the runs lp[starts[i]:starts[i+1]]
    top = np.maximum.reduceat(lp, starts)
    top = np.where(np.isfinite(top), top, 0.0)
    sizes = np.diff(np.r_[starts, lp.size])
    with np.errstate(divide="ignore"):
        return top + np.log(np.add.reduceat(np.exp(lp - np.repeat(top, sizes)), starts))


def quantize(p: Pmf, adc: AdcParams) -> Pmf:
    """Distribution of the ADC bin index for photon-difference pmf ``p``."""
    bins = bin_index(p.support, adc)
    starts = np.flatnonzero(np.r_[True, bins[1:] != bins[:-1]])
    group = _grouped_log_sum_exp(p.log_probs, starts)
    occupied = bins[starts]
    first = int(occupied[0])
    out = np.full(int(occupied[-1]) - first + 1, -np.inf)
    out[occupied - first] = np.minimum(group, 0.0)
    return Pmf(first, out, p.tail_mass_bound)


def shannon_entropy(p: Pmf, return_error: bool = False):
    """Shannon entropy in bits over the stored window.

    With ``return_error=True`` also returns a bound on the entropy carried by
    the excluded tails, ``d (log2(1/d) + log2(W) + 2)`` for tail mass ``d``
    and window width ``W``.
    """
    lp = p.log_probs
    finite = np.isfinite(lp)
    h = -math.fsum(np.exp(lp[finite]) * lp[finite]) / _LN2
    h = max(h, 0.0) + 0.0
    if return_error:
        return h, truncation_error_bits(p)
    return h


def truncation_error_bits(p: Pmf) -> float:
    d = float(p.tail_mass_bound)
    if d <= 0.0:
        return 0.0
    return d * (math.log2(1.0 / d) + math.log2(len(p)) + 2.0)


def min_entropy(p: Pmf) -> float:
    """``-log2 max_j p_j`` in bits."""
    return max(-float(np.max(p.log_probs)) / _LN2, 0.0) + 0.0


def classical_quadrature_stats(sig: SignalParams, gain_k: float = 1.0) -> tuple[float, float]:
    """Mean and variance of the photocurrent difference for a strong classical LO.

    Valid for coherent or vacuum signals; uses ``tr(x rho) = Re(beta e^{-i phi})``,
    quadrature variance 1/4 and photon number ``|beta|^2``.
    """
    if not isinstance(sig, SignalParams):
        raise DomainError("only coherent-state (or vacuum) signals are supported")
    beta = complex(sig.amplitude_beta)
    alpha = complex(sig.lo_amplitude)
    k = gain_k
    lo_intensity = alpha.real * alpha.real + alpha.imag * alpha.imag
    signal_photons = beta.real * beta.real + beta.imag * beta.imag
    # |alpha| Re(beta e^{-i phi}) = Re(beta conj(alpha))
    mean = 2.0 * k * (beta.real * alpha.real + beta.imag * alpha.imag)
    quad_var = 0.25
    variance = 4.0 * k * k * lo_intensity * quad_var + k * k * signal_photons
    return mean, variance
