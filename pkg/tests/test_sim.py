import json
import math

import numpy as np
import pytest

from shotqrng.dist import skellam_pmf
from shotqrng.entropy import AdcParams, quantize, shannon_entropy
from shotqrng.errors import ConfigurationError, DomainError, EstimationError
from shotqrng.sim import (
    STREAM_SIZE,
    RawTrace,
    Verdict,
    certify,
    estimate_mu,
    plugin_entropies,
    read_trace,
    simulate_trace,
    write_trace,
)

UNIT8 = AdcParams(interval_a=1.0, bit_depth=8)




def test_zero_mu_gives_zero_code():
    t = simulate_trace(0.0, UNIT8, 100, seed=3)
    assert np.all(t.samples == UNIT8.zero_code)
    assert t.samples.dtype == np.uint8
    assert np.all(t.bins == 0)


def test_deterministic_and_seed_sensitive():
    n = STREAM_SIZE + 1000  # crosses a stream boundary
    a = simulate_trace(20.0, UNIT8, n, seed=5)
    b = simulate_trace(20.0, UNIT8, n, seed=5)
    c = simulate_trace(20.0, UNIT8, n, seed=6)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    # a prefix does not depend on the total length
    assert np.array_equal(simulate_trace(20.0, UNIT8, 500, seed=5).samples, a.samples[:500])


def test_pipeline_matches_analytic():
    adc = AdcParams(interval_a=1.0)
    t = simulate_trace(50.0, adc, 10**7, seed=1)
    q = quantize(skellam_pmf(50.0), adc)
    emp = np.bincount(t.bins - q.offset, minlength=len(q))[: len(q)] / len(t)
    assert 0.5 * np.abs(emp - q.probs).sum() <= 3e-3
    h, _ = plugin_entropies(t.samples)
    assert abs(h - shannon_entropy(q)) <= 0.02


@pytest.mark.parametrize("a", [2.0, 4.5])
def test_coarse_pipeline_matches_analytic(a):
    adc = AdcParams(interval_a=a, bit_depth=10, alignment=0.25)
    t = simulate_trace(30.0, adc, 10**6, seed=2)
    q = quantize(skellam_pmf(30.0), adc)
    emp = np.bincount(t.bins - q.offset, minlength=len(q))[: len(q)] / len(t)
    assert 0.5 * np.abs(emp - q.probs).sum() <= 3e-3


def test_autocorrelation_vanishes():
    t = simulate_trace(10.0, UNIT8, 10**6, seed=4)
    x = t.bins - t.bins.mean()
    var = np.dot(x, x)
    bound = 5 / math.sqrt(len(x))
    for lag in (1, 2, 3, 10, 1000, STREAM_SIZE // 2):
        assert abs(np.dot(x[:-lag], x[lag:]) / var) < bound


@pytest.mark.parametrize("a,gain", [(1.0, 1.0), (0.5, 1.0), (2.0, 1.0), (3.0, 2.0)])
def test_estimate_mu_within_five_se(a, gain):
    adc = AdcParams(interval_a=a, gain_k=gain, bit_depth=12)
    est = estimate_mu(simulate_trace(50.0, adc, 10**6, seed=9))
    assert abs(est.mu - 50.0) <= 5 * est.stderr
    assert 0 < est.stderr < 0.5


def test_estimate_mu_constant_and_errors():
    const = RawTrace(np.full(5000, 7, dtype=np.uint8), UNIT8)
    assert estimate_mu(const).mu == 0.0
    with pytest.raises(EstimationError):
        estimate_mu(RawTrace(np.full(999, 7, dtype=np.uint8), UNIT8))
    small = AdcParams(interval_a=1.0, bit_depth=4)
    with pytest.raises(EstimationError):
        estimate_mu(simulate_trace(50.0, small, 10**4, seed=1))


def test_trace_code_validation():
    with pytest.raises(DomainError):
        RawTrace(np.array([256]), UNIT8)
    with pytest.raises(DomainError):
        RawTrace(np.array([-1]), UNIT8)


def test_certify_consistent_and_inconsistent():
    ok = certify(simulate_trace(50.0, UNIT8, 10**6, seed=7))
    assert ok.verdict is Verdict.CONSISTENT
    assert ok.goodness_of_fit_pvalue >= 0.01
    assert ok.empirical_min_entropy_bits <= ok.empirical_shannon_bits
    assert abs(ok.estimated_mu - 50) < 5 * ok.mu_stderr
    uniform = RawTrace(np.random.default_rng(1).integers(0, 256, 10**6).astype(np.uint8), UNIT8)
    bad = certify(uniform)
    assert bad.verdict is Verdict.INCONSISTENT
    assert bad.goodness_of_fit_pvalue < 0.01


def test_certify_small_and_saturated():
    few = certify(simulate_trace(5.0, UNIT8, 200, seed=1))
    assert few.verdict is Verdict.INSUFFICIENT_DATA
    sat = certify(simulate_trace(50.0, AdcParams(bit_depth=4), 10**4, seed=1))
    assert sat.verdict is Verdict.INCONSISTENT
    assert sat.notes
    json.loads(sat.to_json())


def test_miller_madow_adds_bias_term():
    codes = np.array([0, 0, 1, 2, 2, 2])
    plain, hmin = plugin_entropies(codes)
    corrected, _ = plugin_entropies(codes, miller_madow=True)
    assert corrected - plain == pytest.approx(2 / (2 * 6 * math.log(2)))
    assert hmin == pytest.approx(1.0)


@pytest.mark.parametrize("suffix", [".bin", ".csv"])
@pytest.mark.parametrize(
    "adc",
    [
        UNIT8,
        AdcParams(interval_a=0.3, gain_k=0.1, bit_depth=12, alignment=-0.2),
        AdcParams(interval_a=0.5, bit_depth=9, input_range=(-30.0, 90.0)),
        AdcParams(interval_a=2.0, bit_depth=20),
    ],
)
def test_trace_round_trip(tmp_path, suffix, adc):
    t = simulate_trace(12.0, adc, 3000, seed=11, sample_rate_hz=2.5e9)
    path = write_trace(t, tmp_path / f"trace{suffix}")
    back = read_trace(path)
    assert np.array_equal(back.samples, t.samples)
    # the range is stored as bin indices, so compare what the converter does
    for attr in ("interval_a", "gain_k", "bit_depth", "alignment", "bin_range"):
        assert getattr(back.adc, attr) == getattr(adc, attr)
    assert (back.sample_rate_hz, back.seed) == (2.5e9, 11)


def test_unseeded_trace_round_trip(tmp_path):
    t = RawTrace(np.array([1, 2, 3], dtype=np.uint8), UNIT8)
    back = read_trace(write_trace(t, tmp_path / "x.bin"))
    assert back.seed is None and back.samples.tolist() == [1, 2, 3]


def test_bad_trace_files(tmp_path):
    short = tmp_path / "short.bin"
    short.write_bytes(b"SNQR\x01")
    with pytest.raises(ConfigurationError):
        read_trace(short)
    t = simulate_trace(1.0, UNIT8, 10, seed=0)
    path = write_trace(t, tmp_path / "t.bin")
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(ConfigurationError):
        read_trace(path)
    csv_path = tmp_path / "bad.csv"
    csv_path.write_text("code\n1\n2\n")
    with pytest.raises(ConfigurationError):
        read_trace(csv_path)
    with pytest.raises(ConfigurationError):
        write_trace(t, tmp_path / "t.x", fmt="hdf5")
