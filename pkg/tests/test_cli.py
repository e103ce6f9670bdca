import csv
import json
import subprocess
import sys

import pytest

from bernshift.cli import main
from bernshift.reporting import validate_report


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def load(path):
    doc = json.loads(path.read_text())
    validate_report(doc)
    return doc


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def test_measure_list(capsys):
    assert main(["measure", "--list"]) == 0
    assert "const-half" in capsys.readouterr().out


def test_measure_outputs(tmp_path):
    assert run(tmp_path, "measure", "--measure", "inv-k1", "--kmax", "4096") == 0
    assert header(tmp_path / "bias.csv")[0] == "k"
    load(tmp_path / "measure_report.json")
    assert json.loads((tmp_path / "measure.json").read_text())["rule"]["kind"] == "power"


def test_measure_validate_file(tmp_path):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"rule": {"kind": "constant", "c": 0.25}, "version": 1}))
    assert main(["measure", "--validate", str(f), "--out", str(tmp_path)]) == 0
    f.write_text(json.dumps({"rule": {"kind": "constant", "c": 1.5}, "version": 1}))
    assert main(["measure", "--validate", str(f), "--out", str(tmp_path)]) == 1


def test_diagnose(tmp_path):
    assert run(tmp_path, "diagnose", "--measure", "first-half", "--nmax", "20", "--kakutani-max", "20",
               "--classify", "--hopf-samples", "20", "--hopf-N", "100", "--scan-max", "2000", "--seed", "0") == 0
    assert header(tmp_path / "hellinger.csv") == ["n", "rho", "d", "neg_log_rho", "err_bound"]
    assert load(tmp_path / "classification.json")["result"]["type_guess"] == "II1"
    load(tmp_path / "diagnose.json")


def test_certify(tmp_path):
    assert run(tmp_path, "certify", "--measure", "step-third", "--p", "0.3333333333333333", "--eps", "0.05") == 0
    r = load(tmp_path / "certificate.json")["result"]
    assert r["n_k"] == 16 and r["mass_ratio"] >= r["beta"]


def test_certify_not_found_is_success(tmp_path):
    assert run(tmp_path, "certify", "--measure", "fair", "--p", "0.3", "--eps", "0.01", "--scan-max", "100") == 0
    assert load(tmp_path / "certificate.json")["result"]["not_found"] is True


def test_simulate_hopf_and_maharam(tmp_path):
    assert run(tmp_path, "simulate", "hopf", "--measure", "const-half", "--samples", "10", "--N", "50", "--seed", "1") == 0
    assert header(tmp_path / "hopf.csv") == ["sample_id", "N", "S_N"]
    load(tmp_path / "hopf.json")
    assert run(tmp_path, "simulate", "maharam", "--measure", "const-half", "--samples", "50", "--steps", "40",
               "--trace-samples", "3", "--seed", "1") == 0
    assert header(tmp_path / "maharam.csv") == ["sample_id", "step", "height"]
    load(tmp_path / "maharam.json")


def test_odometer_commands(tmp_path):
    assert run(tmp_path, "odometer", "property", "--N", "8") == 0
    assert run(tmp_path, "odometer", "rigidity", "--measure", "inv-k1", "--nmax", "6", "--samples", "50", "--seed", "0") == 0
    assert header(tmp_path / "rigidity.csv")[0] == "n"
    assert run(tmp_path, "odometer", "transport", "--measure", "inv-k1", "--N", "6") == 0
    load(tmp_path / "odometer.json")


def test_examples_commands(tmp_path):
    assert run(tmp_path, "examples", "dissipative", "--nmax", "200") == 0
    assert "taylor" in load(tmp_path / "dissipative.json")["result"]["variants"]["printed"]
    assert run(tmp_path, "examples", "weird", "--tmax", "1", "--audit", "--samples", "500",
               "--audit-samples", "500", "--factorization-points", "100", "--seed", "0") == 0
    sched = load(tmp_path / "schedule.json")
    assert sched["result"]["stages"][0]["m_t"] == 6
    assert header(tmp_path / "audit.csv")[0] == "t"


@pytest.mark.parametrize(
    "args,code",
    [
        (["diagnose", "--measure", "no-such-thing"], 1),
        (["diagnose", "--measure", "fair", "--nmax", "0"], 1),
        (["certify", "--measure", "fair"], 1),
        (["bogus"], 1),
        (["examples", "weird", "--tmax", "3", "--samples", "200"], 2),
    ],
)
def test_exit_codes(tmp_path, args, code):
    assert run(tmp_path, *args) == code


def test_env_out(tmp_path, monkeypatch):
    monkeypatch.setenv("BERNSHIFT_OUT", str(tmp_path / "envdir"))
    assert main(["odometer", "property", "--N", "4"]) == 0
    assert (tmp_path / "envdir" / "odometer.json").exists()


def test_unseeded_run_prints_seed(tmp_path, capsys):
    assert run(tmp_path, "selftest", "--only", "marginals") == 0
    assert "seed:" in capsys.readouterr().err


def test_selftest_byte_identical(tmp_path):
    assert run(tmp_path, "selftest", "--seed", "11") == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert run(tmp_path, "selftest", "--seed", "11") == 0
    second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert first == second and set(first) == {"selftest.csv", "selftest.json"}


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bernshift", "odometer", "property", "--N", "3", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "odometer.json" in r.stdout
