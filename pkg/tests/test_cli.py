import subprocess
import sys

import pytest

from mirecourse.cli import main, read_config


@pytest.fixture(scope="module")
def model(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["train", "--data", "synthetic:loan", "--n-rows", "600", "--out", str(d / "m.json")]) == 0
    (d / "row.csv").write_text("income,age,savings,debt,employment_years\nNA,27,14,38,3\n")
    (d / "orig.csv").write_text("income,age,savings,debt,employment_years\n40,27,14,38,3\n")
    return d


def test_recourse_table(model, capsys):
    code = main(["recourse", "--model", str(model / "m.json"), "--instance", str(model / "row.csv"),
                 "--original", str(model / "orig.csv"), "--method", "armin", "--n", "40", "--rho", "0.75"])
    out = capsys.readouterr().out
    assert code == 0
    assert "feature" in out and "cost:" in out and "valid for original:" in out
    assert "age" not in out.split("\n\n")[1]  # immutable, never moved
    assert "missing: income" in out


def test_recourse_imputation_shows_imputed_value(model, capsys):
    main(["recourse", "--model", str(model / "m.json"), "--instance", str(model / "row.csv"),
          "--method", "imputation_mean"])
    assert "imputed: income=" in capsys.readouterr().out


def test_path_command(model, capsys, tmp_path):
    code = main(["path", "--model", str(model / "m.json"), "--instance", str(model / "row.csv"),
                 "--n", "10", "--out-dir", str(tmp_path)])
    assert code == 0 and "rho" in capsys.readouterr().out
    assert (tmp_path / "path.csv").read_text().startswith("step,rho,cost,validity,income")


def test_verify_prop5_echo(capsys):
    assert main(["verify", "prop5", "--eps", "0.25", "--delta", "0.05", "--dstar", "2", "--trials", "200"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("N=12\n") and "PASS" in out and "SE" in out


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["recourse", "--no-such-flag", "1"]) == 1
    assert main(["verify", "prop9"]) == 1
    assert main(["recourse", "--instance", "x.csv"]) == 1  # --model missing


def test_runtime_errors(model, capsys, tmp_path):
    assert main(["recourse", "--model", str(tmp_path / "absent.json"), "--instance", "r.csv"]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("income,zip\n1,2\n")
    assert main(["recourse", "--model", str(model / "m.json"), "--instance", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err


def test_config_file_and_flag_precedence(model, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# recourse settings\nmodel = %s\ninstance = %s\nmethod = imputation_mean\nn = 30\n"
                   % (model / "m.json", model / "row.csv"))
    assert read_config(cfg)["method"] == "imputation_mean"
    assert main(["recourse", "--config", str(cfg)]) == 0
    assert "method: imputation_mean" in capsys.readouterr().out
    assert main(["recourse", "--config", str(cfg), "--method", "robust"]) == 0
    assert "method: robust" in capsys.readouterr().out
    cfg.write_text("colour = blue\n")
    assert main(["recourse", "--config", str(cfg)]) == 1


def test_experiment_writes_reports(tmp_path, capsys):
    args = ["experiment", "--n-rows", "400", "--max-instances", "3", "--n", "15", "--heuristic", "5,2",
            "--data", "synthetic:correlated", "--sweep", "0.5,0.9", "--sweep-n", "6", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "valid ratio" in out and "armin" in out
    for name in ("report.json", "records.csv", "sweep.csv"):
        assert (tmp_path / name).exists()


def test_stdout_is_byte_identical(model):
    args = [sys.executable, "-m", "mirecourse", "recourse", "--model", str(model / "m.json"),
            "--instance", str(model / "row.csv"), "--n", "30", "--seed", "3"]
    a = subprocess.run(args, capture_output=True, check=True, env={"NO_COLOR": "1", "PATH": ""})
    b = subprocess.run(args, capture_output=True, check=True, env={"NO_COLOR": "1", "PATH": ""})
    assert a.stdout == b.stdout and a.stdout
