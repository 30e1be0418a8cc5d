"""Command-line interface.

Exit codes: 0 success, 1 domain error, 2 configuration error, 3 I/O error.
Failures print a single JSON object ``{"error": kind, "message": ...}`` on
stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import RandomnessReport, randomness_report, sweep, total_rates
from .config import adc_from_config, detector_from_config, get_preset, load_config, merge
from .dist import (
    DEFAULT_EPSILON,
    SignalParams,
    general_skellam_pmf,
    heterodyne_pmfs,
    homodyne_pmf,
    poisson_pmf,
    skellam_pmf,
)
from .entropy import min_entropy, quantize, shannon_entropy
from .errors import ConfigurationError, DomainError, ShotQrngError
from .sim import certify, read_trace, simulate_trace, write_trace

EXIT_OK, EXIT_DOMAIN, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DEFAULT_RESOLUTIONS = (0.5, 1.0, 2.0, 4.0, 8.0)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _report_error("configuration", message)
        raise SystemExit(EXIT_CONFIG)


def _report_error(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc


# --- parameter resolution ------------------------------------------------------


def _config_from_args(args) -> dict:
    layers = []
    if getattr(args, "preset", None):
        layers.append(get_preset(args.preset))
    if getattr(args, "config", None):
        layers.append(load_config(args.config))
    flags = {
        "detector": {
            "response_time_tau": getattr(args, "tau", None),
            "max_frequency_nu_m": getattr(args, "nu_m", None),
        },
        "lo": {
            "power_P": getattr(args, "power", None),
            "center_frequency_nu": getattr(args, "nu", None),
            "mean_photons_mu": getattr(args, "mu", None),
        },
        "adc": {
            "interval_a": getattr(args, "interval_a", None),
            "gain_k": getattr(args, "gain_k", None),
            "bit_depth": getattr(args, "bit_depth", None),
        },
    }
    if getattr(args, "resolution", None) is not None:
        flags["adc"]["interval_a"] = args.resolution
        flags["adc"]["gain_k"] = 1.0
    return merge(*(_expand_resolution(layer) for layer in layers), flags)


def _expand_resolution(config: dict) -> dict:
    # turn adc.resolution into interval_a / gain_k so later layers can override either
    adc = config.get("adc")
    if not adc or adc.get("resolution") is None:
        return config
    adc = dict(adc)
    adc["interval_a"] = adc.pop("resolution")
    adc["gain_k"] = 1.0
    return {**config, "adc": adc}


def _mu_from_config(config: dict, required: bool = True) -> float | None:
    mu = config.get("lo", {}).get("mean_photons_mu")
    if mu is not None:
        return float(mu)
    det = detector_from_config(config)
    if det is not None and None not in (det.power_P, det.response_time_tau, det.center_frequency_nu):
        return det.mu
    if required:
        raise ConfigurationError("need --mu, or --power, --tau and --nu to fix the photon number")
    return None


def _emit(text: str, output):
    if output is None or str(output) == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


# --- subcommands --------------------------------------------------------------


def _pmf_from_args(args):
    eps = args.epsilon
    if args.kind == "poisson":
        return poisson_pmf(_require(args.mu, "--mu"), eps)
    if args.kind == "skellam":
        return skellam_pmf(_require(args.mu, "--mu"), eps)
    if args.kind == "general":
        return general_skellam_pmf(_require(args.mu1, "--mu1"), _require(args.mu2, "--mu2"), eps)
    sig = SignalParams(args.beta, _require(args.lo_amplitude, "--lo-amplitude"), args.lo2_amplitude)
    if args.kind == "homodyne":
        return homodyne_pmf(sig, eps)
    return heterodyne_pmfs(sig, eps)[args.port - 1]


def _require(value, flag):
    if value is None:
        raise ConfigurationError(f"{flag} is required here")
    return value


def cmd_pmf(args) -> int:
    pmf = _pmf_from_args(args)
    if args.quantize:
        pmf = quantize(pmf, adc_from_config(_config_from_args(args)))
    _emit(pmf.to_json() if args.format == "json" else pmf.to_csv(), args.output)
    return EXIT_OK


def cmd_entropy(args) -> int:
    pmf = _pmf_from_args(args)
    adc = adc_from_config(_config_from_args(args))
    h, err = shannon_entropy(pmf, return_error=True)
    q = quantize(pmf, adc)
    result = {
        "kind": args.kind,
        "shannon_bits": h,
        "truncation_error_bits": err,
        "min_entropy_bits": min_entropy(pmf),
        "quantized_shannon_bits": shannon_entropy(q),
        "quantized_min_entropy_bits": min_entropy(q),
        "adc": adc.to_dict(),
        "window": [pmf.offset, pmf.offset + len(pmf) - 1],
        "tail_mass_bound": pmf.tail_mass_bound,
    }
    if args.format == "csv":
        keys = [k for k, v in result.items() if not isinstance(v, (dict, list))]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys)
        writer.writerow([result[k] if isinstance(result[k], str) else repr(float(result[k])) for k in keys])
        _emit(buf.getvalue(), args.output)
    else:
        _emit(json.dumps(result, indent=2, sort_keys=True) + "\n", args.output)
    return EXIT_OK


def cmd_bounds(args) -> int:
    config = _config_from_args(args)
    adc = adc_from_config(config)
    det = detector_from_config(config)
    mu = _mu_from_config(config)
    report = randomness_report(mu, adc, det, args.epsilon)
    _emit(report.to_json() if args.format == "json" else RandomnessReport.to_csv([report]), args.output)
    return EXIT_OK


def _figure2_csv(mu: float, eps: float) -> str:
    pmf = skellam_pmf(mu, eps)
    var = 2.0 * mu
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["j", "skellam_probability", "gaussian_density"])
    for j, p in zip(pmf.support, pmf.probs):
        g = math.exp(-j * j / (2.0 * var)) / math.sqrt(2.0 * math.pi * var) if var > 0 else float(j == 0)
        writer.writerow([int(j), repr(float(p)), repr(g)])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    eps = args.epsilon
    if args.figure == 2:
        text = _figure2_csv(_mu_from_config(config), eps)
    elif args.figure == 3:
        adc = adc_from_config(merge({"adc": {"interval_a": 1.0, "gain_k": 1.0}}, config))
        grid = np.logspace(math.log10(args.mu_min), math.log10(args.mu_max), args.points)
        reports = sweep(lambda mu: randomness_report(float(mu), adc, None, eps), grid, args.workers)
        text = RandomnessReport.to_csv(reports)
    else:
        det = detector_from_config(config)
        if det is None or det.power_P is None or det.center_frequency_nu is None:
            raise ConfigurationError("sweep --figure 4 needs --power and --nu (or a preset)")
        if det.max_frequency_nu_m is None:
            # only the response time limits the sampling rate here
            det = det.replace(max_frequency_nu_m=math.inf)
        taus = np.logspace(math.log10(args.tau_min), math.log10(args.tau_max), args.points)
        base = config.get("adc", {})
        points = [(res, float(tau)) for res in args.resolutions for tau in taus]

        def evaluate(point):
            res, tau = point
            adc = adc_from_config({"adc": {**base, "interval_a": res, "gain_k": 1.0}})
            return total_rates(det.replace(response_time_tau=tau), adc, eps)

        text = RandomnessReport.to_csv(sweep(evaluate, points, args.workers))
    _emit(text, args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    adc = adc_from_config(config)
    mu = _mu_from_config(config)
    trace = simulate_trace(mu, adc, args.n, args.seed, args.sample_rate)
    write_trace(trace, args.output, args.format)
    return EXIT_OK


def cmd_certify(args) -> int:
    trace = read_trace(args.trace)
    result = certify(trace, p_threshold=args.p_threshold, miller_madow=args.miller_madow)
    _emit(result.to_json(), args.output)
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def _add_common(p, adc=True, physics=True):
    p.add_argument("--config", help="TOML or JSON file with detector/lo/adc sections")
    p.add_argument("--preset", help="named preset (packaged or from $SHOTQRNG_PRESET_DIR)")
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="tail mass allowed outside pmf windows")
    if physics:
        p.add_argument("--mu", type=float, help="mean photons per detector per sample")
        p.add_argument("--power", type=float, help="LO power P in watts")
        p.add_argument("--nu", type=float, help="laser centre frequency in Hz")
        p.add_argument("--tau", type=float, help="detector response time in seconds")
        p.add_argument("--nu-m", dest="nu_m", type=float, help="maximum laser frequency in Hz")
    if adc:
        p.add_argument("--resolution", type=float, help="ADC resolution a/k in photons (sets k = 1)")
        p.add_argument("--interval-a", dest="interval_a", type=float)
        p.add_argument("--gain-k", dest="gain_k", type=float)
        p.add_argument("--bit-depth", dest="bit_depth", type=int)


def _add_pmf_args(p):
    p.add_argument("--kind", choices=["poisson", "skellam", "general", "homodyne", "heterodyne"], default="skellam")
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--beta", type=_complex, default=0j, help="signal amplitude, e.g. 1+2j")
    p.add_argument("--lo-amplitude", dest="lo_amplitude", type=_complex)
    p.add_argument("--lo2-amplitude", dest="lo2_amplitude", type=_complex)
    p.add_argument("--port", type=int, choices=[1, 2], default=1, help="heterodyne output to report")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shotqrng", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pmf", help="evaluate an outcome distribution")
    _add_common(p)
    _add_pmf_args(p)
    p.add_argument("--quantize", action="store_true", help="report the ADC-bin distribution")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("entropy", help="Shannon and min-entropy of a distribution")
    _add_common(p)
    _add_pmf_args(p)
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("bounds", help="randomness report: R0, R1, upper/lower bounds, rates")
    _add_common(p)
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="plot-ready data for the distribution, bound and rate figures")
    _add_common(p)
    p.add_argument("--figure", type=int, choices=[2, 3, 4], required=True)
    p.add_argument("--mu-min", type=float, default=0.1)
    p.add_argument("--mu-max", type=float, default=1000.0)
    p.add_argument("--tau-min", type=float, default=1e-20)
    p.add_argument("--tau-max", type=float, default=1e-12)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--resolutions", type=_float_list, default=list(DEFAULT_RESOLUTIONS))
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=["csv"], default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="simulate a raw ADC trace")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", dest="sample_rate", type=float, default=1.0)
    p.add_argument("--format", choices=["bin", "csv"], default=None, help="default: from the output suffix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="check a trace against the shot-noise model")
    p.add_argument("trace")
    p.add_argument("-o", "--output")
    p.add_argument("--p-threshold", dest="p_threshold", type=float, default=0.01)
    p.add_argument("--miller-madow", dest="miller_madow", action="store_true")
    p.set_defaults(func=cmd_certify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and not args.output:
        _report_error("configuration", "simulate needs --output")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigurationError as exc:
        _report_error(exc.kind, exc)
        return EXIT_CONFIG
    except (DomainError, ShotQrngError) as exc:
        _report_error(exc.kind, exc)
        return EXIT_DOMAIN
    except OSError as exc:
        _report_error("io", exc)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
