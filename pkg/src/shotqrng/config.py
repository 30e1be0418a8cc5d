"""Preset and configuration-file handling.

A configuration is a mapping with up to three sections, ``detector``, ``lo``
and ``adc`` (see ``presets/detectors.toml`` for the keys).  Presets are named
configurations; the packaged ones can be extended or shadowed by ``*.toml``
files in the directory named by ``SHOTQRNG_PRESET_DIR``.
"""
from __future__ import annotations

import json
import os
import sys
from importlib import resources
from pathlib import Path

from .bounds import DetectorParams
from .entropy import AdcParams
from .errors import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PRESET_DIR_ENV = "SHOTQRNG_PRESET_DIR"

SCHEMA = {
    "detector": {
        "response_time_tau": float,
        "max_frequency_nu_m": float,
        "sampling_frequency_f": float,
    },
    "lo": {
        "power_P": float,
        "center_frequency_nu": float,
        "mean_photons_mu": float,
        "phase_phi": float,
    },
    "adc": {
        "interval_a": float,
        "gain_k": float,
        "bit_depth": int,
        "input_range": list,
        "alignment": float,
        "resolution": float,
    },
}


def _parse(text: str, name: str) -> dict:
    try:
        if name.endswith(".json"):
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {name}: {exc}") from exc


def load_config(path) -> dict:
    path = Path(path)
    config = _parse(path.read_text(), path.name)
    validate(config)
    return config


def validate(config: dict) -> dict:
    """Type-check a configuration mapping in place and return it."""
    for section, values in config.items():
        if section in ("description", "preset"):
            continue
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigurationError(f"config section {section!r} must be a table")
        for key, value in values.items():
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise ConfigurationError(f"unknown key {section}.{key}")
            if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
                values[key] = float(value)
            elif kind is int and isinstance(value, int) and not isinstance(value, bool):
                pass
            elif kind is list and isinstance(value, list) and len(value) == 2:
                values[key] = [float(v) for v in value]
            else:
                raise ConfigurationError(f"{section}.{key} has the wrong type: {value!r}")
    return config


def load_presets(extra_dir=None) -> dict:
    presets = _parse(
        resources.files("shotqrng").joinpath("presets/detectors.toml").read_text(),
        "detectors.toml",
    )
    extra_dir = extra_dir or os.environ.get(PRESET_DIR_ENV)
    if extra_dir:
        directory = Path(extra_dir)
        if not directory.is_dir():
            raise ConfigurationError(f"preset directory {directory} does not exist")
        for path in sorted(directory.glob("*.toml")):
            presets.update(_parse(path.read_text(), path.name))
    for body in presets.values():
        validate(body)
    return presets


def get_preset(name: str, extra_dir=None) -> dict:
    presets = load_presets(extra_dir)
    if name not in presets:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    return presets[name]


def merge(*configs: dict) -> dict:
    """Section-wise merge, later configurations winning."""
    out: dict = {}
    for config in configs:
        for section, values in (config or {}).items():
            if isinstance(values, dict):
                out.setdefault(section, {}).update({k: v for k, v in values.items() if v is not None})
            elif values is not None:
                out[section] = values
    return out


def adc_from_config(config: dict) -> AdcParams:
    section = dict(config.get("adc", {}))
    resolution = section.pop("resolution", None)
    if resolution is not None:
        if "interval_a" in section or "gain_k" in section:
            raise ConfigurationError("give either adc.resolution or adc.interval_a/gain_k, not both")
        section["interval_a"] = resolution
        section["gain_k"] = 1.0
    if "input_range" in section:
        section["input_range"] = tuple(section["input_range"])
    return AdcParams(**section)


def detector_from_config(config: dict) -> DetectorParams | None:
    det = config.get("detector", {})
    lo = config.get("lo", {})
    values = {
        "response_time_tau": det.get("response_time_tau"),
        "max_frequency_nu_m": det.get("max_frequency_nu_m"),
        "sampling_frequency_f": det.get("sampling_frequency_f"),
        "power_P": lo.get("power_P"),
        "center_frequency_nu": lo.get("center_frequency_nu"),
    }
    if all(v is None for v in values.values()):
        return None
    return DetectorParams(**values)
