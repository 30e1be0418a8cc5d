import json

import pytest

from shotqrng.config import (
    PRESET_DIR_ENV,
    adc_from_config,
    detector_from_config,
    get_preset,
    load_config,
    load_presets,
    merge,
    validate,
)
from shotqrng.errors import ConfigurationError


def test_packaged_presets_load():
    presets = load_presets()
    assert {"fast-pin", "balanced-receiver", "slow-photodiode"} <= set(presets)
    for name, body in presets.items():
        assert "illustrative" in body["description"]
        det = detector_from_config(body)
        adc = adc_from_config(body)
        # presets are usable end to end: no ADC saturation at their photon number
        sigma_bins = (2 * det.mu) ** 0.5 / adc.resolution
        assert 6 * sigma_bins < -adc.bin_range[0], name


def test_fast_pin_ceiling():
    det = detector_from_config(get_preset("fast-pin"))
    assert det.response_time_tau == 1e-10
    assert adc_from_config(get_preset("fast-pin")).resolution == 1.0


def test_unknown_preset():
    with pytest.raises(ConfigurationError, match="unknown preset"):
        get_preset("no-such-thing")


def test_preset_dir_override(tmp_path, monkeypatch):
    (tmp_path / "mine.toml").write_text('[lab]\nlo = { mean_photons_mu = 12.0 }\n[fast-pin]\nadc = { resolution = 2.0 }\n')
    monkeypatch.setenv(PRESET_DIR_ENV, str(tmp_path))
    assert get_preset("lab")["lo"]["mean_photons_mu"] == 12.0
    assert get_preset("fast-pin") == {"adc": {"resolution": 2.0}}
    monkeypatch.setenv(PRESET_DIR_ENV, str(tmp_path / "missing"))
    with pytest.raises(ConfigurationError):
        load_presets()


def test_load_toml_and_json(tmp_path):
    toml = tmp_path / "c.toml"
    toml.write_text("[adc]\ninterval_a = 2\nbit_depth = 10\ninput_range = [-5, 5]\n")
    cfg = load_config(toml)
    assert cfg["adc"] == {"interval_a": 2.0, "bit_depth": 10, "input_range": [-5.0, 5.0]}
    assert adc_from_config(cfg).bin_range == (-2, 2)
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"lo": {"mean_photons_mu": 3}}))
    assert load_config(js)["lo"]["mean_photons_mu"] == 3.0
    bad = tmp_path / "bad.toml"
    bad.write_text("[adc\n")
    with pytest.raises(ConfigurationError):
        load_config(bad)


@pytest.mark.parametrize(
    "cfg",
    [
        {"amplifier": {}},
        {"adc": {"bits": 8}},
        {"adc": {"bit_depth": 8.5}},
        {"adc": {"bit_depth": True}},
        {"lo": {"power_P": "1 mW"}},
        {"adc": {"input_range": [1.0]}},
        {"adc": 3},
    ],
)
def test_validate_rejects(cfg):
    with pytest.raises(ConfigurationError):
        validate(cfg)


def test_merge_later_wins_and_skips_none():
    a = {"adc": {"interval_a": 1.0, "bit_depth": 8}, "lo": {"mean_photons_mu": 1.0}}
    b = {"adc": {"interval_a": 3.0, "bit_depth": None}, "detector": {"response_time_tau": 1e-9}}
    m = merge(a, b, None)
    assert m == {
        "adc": {"interval_a": 3.0, "bit_depth": 8},
        "lo": {"mean_photons_mu": 1.0},
        "detector": {"response_time_tau": 1e-9},
    }


def test_resolution_conflict():
    with pytest.raises(ConfigurationError):
        adc_from_config({"adc": {"resolution": 2.0, "interval_a": 1.0}})
    assert adc_from_config({}).resolution == 1.0
    assert detector_from_config({}) is None


