import json

import pytest

from qbarrier.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, format_csv, format_table, main

Z_JOB = {"schema": "qbarrier.job/1", "case": "z-gate/n1/p0", "budgets": {"samples": 20000}}

GROVER_SYSTEM = {
    "schema": "qbarrier.system/1",
    "n_qubits": 2,
    "modes": [{"grover_oracle": 0}, {"grover_diffusion": True}],
    "schedule": {"cycle": [0, 1]},
    "regions": {
        "initial": [{"builder": "amplitude_band", "j": "all", "lo": 0.249, "hi": 0.251},
                    {"builder": "imag_band", "j": "all", "bound": 0.001**0.5}],
        "unsafe": [{"builder": "amplitude_at_least", "j": 1, "c": 0.9}],
    },
}


def write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(scope="module")
def z_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("z")
    cfg = write(d / "z.json", Z_JOB)
    code = main(["synth", "--config", cfg, "--out", str(d / "out")])
    return d, cfg, code, d / "out" / "z-gate_n1_p0.cert.json"


def test_synth_z_solved(z_run, capsys):
    d, cfg, code, cert = z_run
    assert code == EXIT_OK and cert.is_file()
    assert json.loads(cert.read_text())["schema"] == "qbarrier.certificate/1"
    assert (d / "out" / "synth.csv").read_text().splitlines()[1].split(",")[4] == "solved"


def test_check_z_all_verified(z_run, capsys):
    d, cfg, _, cert = z_run
    assert main(["check", "--config", cfg, "--cert", str(cert)]) == EXIT_OK
    assert capsys.readouterr().out.count("verified") >= 5


def test_check_corrupted_certificate(z_run, tmp_path, capsys):
    d, cfg, _, cert = z_run
    data = json.loads(cert.read_text())
    recs = data["barriers"]["cycle:0"]
    # flip one real coefficient on a self-conjugate monomial so the barrier stays real-valued
    diag = [r for r in recs if r["alpha"] == r["beta"]]
    rec = max(diag, key=lambda r: abs(r["coeff"][0]))
    rec["coeff"][0] = -rec["coeff"][0]
    bad = write(tmp_path / "bad.json", data)
    assert main(["check", "--config", cfg, "--cert", bad, "--samples", "20000"]) == EXIT_FAIL
    assert "falsified (violation" in capsys.readouterr().out


def test_check_phase_mismatch(z_run, tmp_path, capsys):
    _, _, _, cert = z_run
    xz = write(tmp_path / "xz.json", {"schema": "qbarrier.job/1", "case": "xz-gates/n1/p0"})
    assert main(["check", "--config", xz, "--cert", str(cert)]) == EXIT_USAGE
    assert "do not match" in capsys.readouterr().err


def test_smt_export_byte_identical(z_run, tmp_path):
    _, cfg, _, cert = z_run
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["smt-export", "--config", cfg, "--cert", str(cert), "--out", str(a)]) == EXIT_OK
    assert main(["smt-export", "--config", cfg, "--cert", str(cert), "--out", str(b)]) == EXIT_OK
    names = sorted(p.name for p in a.iterdir())
    assert len(names) == 5
    assert all((a / n).read_bytes() == (b / n).read_bytes() for n in names)


def test_smt_export_empty_certificate(z_run, tmp_path, capsys):
    _, cfg, _, cert = z_run
    data = json.loads(cert.read_text())
    data["barriers"] = {}
    empty = write(tmp_path / "empty.json", data)
    assert main(["smt-export", "--config", cfg, "--cert", empty, "--out", str(tmp_path / "s")]) == EXIT_USAGE
    assert "no barrier" in capsys.readouterr().err


def test_simulate_z_safe(z_run, capsys):
    _, cfg, _, _ = z_run
    assert main(["simulate", "--config", cfg, "--trajectories", "200", "--horizon", "10"]) == EXIT_OK
    assert " 0 " in capsys.readouterr().out


def test_synth_grover_unsolved(tmp_path):
    job = {"schema": "qbarrier.job/1", "system": GROVER_SYSTEM, "hyperparams": {"k": 1}}
    cfg = write(tmp_path / "g.json", job)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_FAIL
    assert list((tmp_path / "o").glob("*.unsolved.json"))


def test_system_file_reference(tmp_path):
    write(tmp_path / "sys.json", GROVER_SYSTEM)
    job = {"schema": "qbarrier.job/1", "system_file": "sys.json", "hyperparams": {"k": 1, "d": 0.01}}
    cfg = write(tmp_path / "g.json", job)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE


@pytest.mark.parametrize("job, message", [
    ({"schema": "qbarrier.job/1", "case": "z-gate/n1/p0", "hyperparams": {"d": 0.01}}, "d:"),
    ({"schema": "qbarrier.job/1", "case": "z-gate/n1/p0", "hyperparams": {"degree": 3}}, "degree:"),
    ({"schema": "qbarrier.job/0", "case": "z-gate/n1/p0"}, "schema:"),
    ({"schema": "qbarrier.job/1", "case": "z-gate/n9/p0"}, "case:"),
    ({"schema": "qbarrier.job/1"}, "exactly one"),
    ({"schema": "qbarrier.job/1", "case": "z-gate/n1/p0", "budgets": {"time": 1}}, "budgets:"),
    ({"schema": "qbarrier.job/1", "system_file": "missing.json"}, "system_file:"),
    ({"schema": "qbarrier.job/1", "system": {**GROVER_SYSTEM, "n_qubits": 0}}, "n_qubits"),
])
def test_config_errors_exit_2(tmp_path, capsys, job, message):
    cfg = write(tmp_path / "job.json", job)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert message in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["synth", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE
    assert "--config" in capsys.readouterr().err


def test_bad_arguments_exit_2(capsys):
    assert main(["reproduce", "nonsense"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_reproduce_z_suite(tmp_path, capsys):
    out = tmp_path / "rep"
    assert main(["reproduce", "z-gate", "--out", str(out), "--samples", "20000"]) == EXIT_OK
    lines = (out / "report.csv").read_text().splitlines()
    assert len(lines) == 7
    assert all(row.split(",")[4] == "solved" for row in lines[1:])
    assert all(":?" not in row and ":F" not in row for row in lines[1:])


def test_reproduce_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["reproduce", "z-gate", "--no-check", "--out", str(d)]) == EXIT_OK
    certs = sorted(p.name for p in a.glob("*.cert.json"))
    assert len(certs) == 6
    for name in certs:
        x, y = json.loads((a / name).read_text()), json.loads((b / name).read_text())
        assert x["barriers"] == y["barriers"] and x["constants"] == y["constants"]


def test_report_formats():
    rows = [{"experiment": "e", "qubits": 1, "status": "solved"}]
    text = format_table(rows, ["experiment", "qubits", "status"])
    assert text.splitlines()[0].split() == ["experiment", "qubits", "status"]
    assert format_csv(rows, ["experiment", "status"]) == "experiment,status\ne,solved\n"
