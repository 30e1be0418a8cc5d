import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from shotqrng import __version__
from shotqrng.bounds import RandomnessReport
from shotqrng.cli import EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO, EXIT_OK, main
from shotqrng.dist import Pmf, skellam_pmf
from shotqrng.sim import read_trace


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_figure2(capsys):
    code, out, _ = run(capsys, "sweep", "--figure", "2", "--mu", "50")
    assert code == EXIT_OK
    table = rows(out)
    assert list(table[0]) == ["j", "skellam_probability", "gaussian_density"]
    p = skellam_pmf(50.0)
    assert [int(r["j"]) for r in table] == p.support.tolist()
    sk = np.array([float(r["skellam_probability"]) for r in table])
    g = np.array([float(r["gaussian_density"]) for r in table])
    assert np.array_equal(sk, p.probs)
    assert 0.5 * np.abs(sk - g).sum() < 1e-3


def test_bounds_zero(capsys):
    code, out, _ = run(capsys, "bounds", "--mu", "0")
    assert code == EXIT_OK
    report = json.loads(out)
    for key in ("mu", "two_mu", "r0_bits", "r1_bits", "r_upper_bits", "r_lower_bits"):
        assert report[key] == 0.0
    assert RandomnessReport.from_dict(report).r1_bits == 0.0


def test_bounds_preset_csv(capsys):
    code, out, _ = run(capsys, "bounds", "--preset", "fast-pin", "--format", "csv")
    assert code == EXIT_OK
    (row,) = rows(out)
    assert float(row["rate_ceiling_hz"]) == 1e10
    assert float(row["r_lower_bits"]) <= float(row["r1_bits"]) <= float(row["r_upper_bits"])


def test_flags_override_preset(capsys):
    _, out, _ = run(capsys, "bounds", "--preset", "fast-pin", "--mu", "50", "--resolution", "3")
    report = json.loads(out)
    assert report["mu"] == 50.0
    assert report["adc"]["interval_a"] == 3.0
    assert report["rate_ceiling_hz"] == 1e10


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[lo]\nmean_photons_mu = 2.5\n[adc]\nresolution = 2.0\nbit_depth = 10\n")
    _, out, _ = run(capsys, "bounds", "--config", str(cfg))
    report = json.loads(out)
    assert report["mu"] == 2.5 and report["adc"]["bit_depth"] == 10


def test_sweep_figure3(capsys):
    _, out, _ = run(capsys, "sweep", "--figure", "3", "--points", "12")
    table = rows(out)
    mus = [float(r["mu"]) for r in table]
    assert len(table) == 12 and mus[0] == pytest.approx(0.1) and mus[-1] == pytest.approx(1000.0)
    for r in table:
        assert float(r["r_lower_bits"]) <= float(r["r1_bits"]) <= float(r["r_upper_bits"])


def test_sweep_figure4(capsys):
    code, out, _ = run(
        capsys, "sweep", "--figure", "4", "--power", "1e-3", "--nu", "1.934e14",
        "--points", "7", "--resolutions", "1,4",
    )
    assert code == EXIT_OK
    table = rows(out)
    assert len(table) == 14
    assert [float(r["resolution"]) for r in table] == [1.0] * 7 + [4.0] * 7


def test_pmf_outputs_round_trip(tmp_path, capsys):
    for fmt, name in (("csv", "p.csv"), ("json", "p.json")):
        path = tmp_path / name
        assert run(capsys, "pmf", "--kind", "general", "--mu1", "60.5", "--mu2", "40.5",
                   "--format", fmt, "-o", str(path))[0] == EXIT_OK
        p = Pmf.load(path)
        assert p.mean() == pytest.approx(20.0, abs=1e-9)
    _, out, _ = run(capsys, "pmf", "--kind", "skellam", "--mu", "50", "--quantize", "--resolution", "3")
    assert Pmf.from_csv(out).prob(0) == pytest.approx(sum(skellam_pmf(50.0).prob(j) for j in (-1, 0, 1)))


def test_pmf_heterodyne(capsys):
    _, out, _ = run(capsys, "pmf", "--kind", "heterodyne", "--beta", "2", "--lo-amplitude",
                    repr(math.sqrt(2)), "--lo2-amplitude", f"{math.sqrt(2)!r}j", "--port", "2", "--format", "json")
    p = Pmf.from_json(out)
    assert p.mean() == pytest.approx(0.0, abs=1e-9) and p.variance() == pytest.approx(4.0, abs=1e-9)


def test_entropy(capsys):
    _, out, _ = run(capsys, "entropy", "--kind", "skellam", "--mu", "50")
    result = json.loads(out)
    assert result["shannon_bits"] == pytest.approx(5.36902070361893, abs=1e-10)
    assert result["quantized_min_entropy_bits"] == pytest.approx(result["min_entropy_bits"])
    _, out, _ = run(capsys, "entropy", "--kind", "poisson", "--mu", "3", "--format", "csv")
    (row,) = rows(out)
    assert row["kind"] == "poisson" and float(row["shannon_bits"]) > 0


def test_simulate_certify_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.bin", tmp_path / "b.bin"]
    for path in paths:
        assert run(capsys, "simulate", "--mu", "50", "--n", "1000000", "--seed", "7", "-o", str(path))[0] == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert len(read_trace(paths[0])) == 10**6
    code, out, _ = run(capsys, "certify", str(paths[0]))
    assert code == EXIT_OK
    assert json.loads(out)["verdict"] == "consistent"


def test_simulate_csv_round_trip(tmp_path, capsys):
    path = tmp_path / "t.csv"
    run(capsys, "simulate", "--mu", "3", "--n", "2000", "--seed", "1", "--bit-depth", "8", "-o", str(path))
    trace = read_trace(path)
    assert trace.adc.bit_depth == 8 and trace.seed == 1 and len(trace) == 2000
    _, out, _ = run(capsys, "certify", str(path), "--miller-madow")
    assert json.loads(out)["miller_madow"] is True


def test_outputs_byte_identical(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"s{i}.csv"
        run(capsys, "sweep", "--figure", "3", "--points", "8", "-o", str(path))
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def _error(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


@pytest.mark.parametrize(
    "argv,code,kind",
    [
        (["bounds", "--mu", "-1"], EXIT_DOMAIN, "domain"),
        (["bounds", "--mu", "1", "--gain-k", "0"], EXIT_DOMAIN, "domain"),
        (["bounds"], EXIT_CONFIG, "configuration"),
        (["bounds", "--preset", "nope"], EXIT_CONFIG, "configuration"),
        (["bounds", "--mu", "1", "--bit-depth", "99"], EXIT_CONFIG, "configuration"),
        (["sweep", "--figure", "5"], EXIT_CONFIG, "configuration"),
        (["frobnicate"], EXIT_CONFIG, "configuration"),
        (["simulate", "--mu", "1", "--n", "10"], EXIT_CONFIG, "configuration"),
        (["pmf", "--kind", "general", "--mu1", "1"], EXIT_CONFIG, "configuration"),
        (["certify", "/nonexistent/trace.bin"], EXIT_IO, "io"),
        (["bounds", "--mu", "1", "-o", "/nonexistent/dir/r.json"], EXIT_IO, "io"),
    ],
)
def test_errors(capsys, argv, code, kind):
    got, out, err = run_catching(capsys, argv)
    assert got == code
    assert _error(err)["error"] == kind
    assert out == ""


def run_catching(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def test_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[adc]\nbits = 3\n")
    code, _, err = run_catching(capsys, ["bounds", "--mu", "1", "--config", str(cfg)])
    assert code == EXIT_CONFIG and "adc.bits" in _error(err)["message"]


def test_console_script_and_preset_env(tmp_path):
    (tmp_path / "lab.toml").write_text("[lab]\nlo = { mean_photons_mu = 4.0 }\n")
    env = {"SHOTQRNG_PRESET_DIR": str(tmp_path), "PATH": ""}
    proc = subprocess.run(
        [sys.executable, "-m", "shotqrng.cli", "bounds", "--preset", "lab"],
        capture_output=True, text=True, env=env, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["mu"] == 4.0
    proc = subprocess.run([sys.executable, "-m", "shotqrng.cli", "--version"], capture_output=True, text=True)
    assert __version__ in proc.stdout
