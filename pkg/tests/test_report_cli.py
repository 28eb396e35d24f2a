import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import starquad as sq
from starquad.cli import main
from starquad.report import report_from_csv, report_to_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run_cli(*args, env=None):
    import os

    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(
        [sys.executable, "-m", "starquad.cli", *args],
        capture_output=True, text=True, env=full_env,
    )


# -- scalar subcommands -----------------------------------------------------

def test_cli_constant_inf(capsys):
    assert main(["constant", "-d", "2", "-p", "inf"]) == 0
    assert capsys.readouterr().out.strip() == "2.6666666667"


def test_cli_constant_3d(capsys):
    assert main(["constant", "-d", "3", "-p", "inf"]) == 0
    assert capsys.readouterr().out.strip() == "6.0000000000"


def test_cli_bound(capsys):
    assert main(["bound", "-d", "2", "-p", "inf", "--mes", "1", "-n", "100"]) == 0
    assert capsys.readouterr().out.strip() == "0.0333333333"


def test_cli_measure(capsys):
    code = main(["measure", "--domain", str(CONFIGS / "cross.cfg"),
                 "--resolution", "96"])
    assert code == 0
    out = capsys.readouterr().out
    assert "inner=20.0000000000" in out
    assert "outer=20.0000000000" in out


# -- exit codes ----------------------------------------------------------------

def test_cli_unknown_flag_exits_1():
    proc = run_cli("constant", "-d", "2", "-p", "inf", "--bogus")
    assert proc.returncode == 1
    assert "usage" in proc.stderr.lower()


def test_cli_bad_config_exits_1(tmp_path):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("dim = 2\ncenter = 0,0\nball_radius = zzz\nshape = ball\n")
    proc = run_cli("measure", "--domain", str(cfg))
    assert proc.returncode == 1
    assert "line 3" in proc.stderr


def test_cli_missing_domain_exits_1():
    proc = run_cli("measure", "--domain", "no-such-file.cfg")
    assert proc.returncode == 1


def test_cli_precondition_exits_2(tmp_path):
    # n far too small for the remainder-region check on the cross
    proc = run_cli(
        "verify-lemmas", "--trials-scale", "0.01",
        "--wregion-domain", str(CONFIGS / "cross.cfg"), "--wregion-n", "256",
        "-o", str(tmp_path / "t.tsv"),
    )
    assert proc.returncode == 2
    assert "precondition" in proc.stderr.lower()


def test_cli_p_not_above_dim_exits_1():
    proc = run_cli("constant", "-d", "3", "-p", "2.5")
    assert proc.returncode == 1


# -- rule subcommand -------------------------------------------------------------

def test_cli_rule_writes_csv_and_figure(tmp_path):
    out = tmp_path / "rule.csv"
    code = main([
        "rule", "--domain", str(CONFIGS / "square.cfg"), "-n", "4",
        "--subgrid", "8", "-o", str(out), "--plot",
    ])
    assert code == 0
    rule = sq.load_rule_csv(out)
    assert len(rule) == 4
    assert np.allclose(rule.weights, 0.25)
    assert (tmp_path / "rule.png").exists()


def test_cli_integrate(capsys):
    code = main([
        "integrate", "--domain", str(CONFIGS / "square.cfg"), "-n", "16",
        "-f", "linear-x1", "--resolution", "512",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "rule_value=0.5000000000" in out


# -- convergence ------------------------------------------------------------------

def test_run_convergence_square_exact(square):
    report = sq.run_convergence(square, "inf", [16, 64, 256, 1024],
                                subgrid=4, resolution=2048, seed=0)
    assert len(report.rows) == 4
    for row in report.rows:
        assert row.ratio == pytest.approx(1.0, abs=0.01)
    assert report.slope == pytest.approx(-0.5, abs=0.01)
    assert not report.failures


def test_run_convergence_requires_three_entries(square):
    with pytest.raises(ValueError):
        sq.run_convergence(square, "inf", [4, 16])
    with pytest.raises(ValueError):
        sq.run_convergence(square, "inf", [16, 4, 64])


def test_report_csv_roundtrip(square):
    report = sq.run_convergence(square, "inf", [16, 64, 256], subgrid=4,
                                resolution=512, seed=7)
    text = report_to_csv(report)
    back = report_from_csv(text)
    assert back == report


def test_report_records_failures(cross):
    # n = 1 requests a rule but leaves h_n so coarse the ladder still works;
    # inject a failing row via an impossible reference resolution instead
    report = sq.run_convergence(cross, "inf", [16, 64, 256], subgrid=4,
                                resolution=1 << 15, seed=0)
    assert len(report.failures) == 3
    assert report.rows == ()


def test_cli_convergence_writes_outputs(tmp_path):
    out = tmp_path / "report.csv"
    code = main([
        "convergence", "--domain", str(CONFIGS / "square.cfg"),
        "--n-list", "16,64,256", "--subgrid", "4", "--resolution", "512",
        "-o", str(out),
    ])
    assert code == 0
    report = sq.load_report_csv(out)
    assert [r.n for r in report.rows] == [16, 64, 256]
    assert (tmp_path / "report.png").exists()


def test_cli_convergence_no_plot(tmp_path):
    out = tmp_path / "report.csv"
    code = main([
        "convergence", "--domain", str(CONFIGS / "square.cfg"),
        "--n-list", "16,64,256", "--subgrid", "4", "--resolution", "256",
        "-o", str(out), "--no-plot",
    ])
    assert code == 0
    assert not (tmp_path / "report.png").exists()


# -- verify-lemmas TSV ---------------------------------------------------------

def test_cli_verify_lemmas_tsv(tmp_path):
    out = tmp_path / "lemmas.tsv"
    code = main([
        "verify-lemmas", "--trials-scale", "0.01", "--wregion-n", "0",
        "-o", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "check\ttrials\tworst\ttol\tstatus"
    assert len(lines) == 11
    body = [line.split("\t") for line in lines[1:]]
    assert [row[0] for row in body] == [
        "det-identity", "p-map-geometry", "distance-bound", "jacobian-p-fd",
        "jacobian-phi-fd", "jacobian-psi-fd", "psi-identity-t1",
        "preimage-quartic", "segment-identity", "w-region-bounds",
    ]
    assert all(row[-1] in ("pass", "skipped") for row in body)


# -- determinism across processes and thread counts -----------------------------

def test_rule_csv_bit_identical_across_thread_counts(tmp_path):
    outputs = []
    for threads in ("1", "2", "4"):
        out = tmp_path / f"rule_{threads}.csv"
        proc = run_cli(
            "rule", "--domain", str(CONFIGS / "cross.cfg"), "-n", "500",
            "--subgrid", "4", "-o", str(out),
            env={"STARQUAD_THREADS": threads},
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_lemma_tsv_bit_identical_across_runs(tmp_path):
    blobs = []
    for run in range(2):
        out = tmp_path / f"lemmas_{run}.tsv"
        proc = run_cli(
            "verify-lemmas", "--trials-scale", "0.01", "--wregion-n", "0",
            "--seed", "3", "-o", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]
