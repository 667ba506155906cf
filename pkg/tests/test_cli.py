import logging
import subprocess
import sys

import numpy as np
import pytest

from neurovid import cli
from neurovid.autodiff import NumericalError
from neurovid.data import read_tensor_file, write_tensor_file


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One tiny dataset and adversarially trained checkpoint shared by the CLI tests."""
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["gen-data", "--out", str(d / "waves.nvt"), "--frames", "300"]) == 0
    assert cli.main(["train", "--data", str(d / "waves.nvt"), "--model", "benchmark", "--channels", "2",
                     "--adv", "on", "--iters", "2", "--batch", "2", "--out-checkpoint", str(d / "m.ckpt"),
                     "--metrics-csv", str(d / "m.csv")]) == 0
    return d


@pytest.mark.parametrize("argv,expected", [
    (["--model", "benchmark", "--channels", "64", "--height", "19", "--width", "19"], "4123266"),
    (["--model", "mrlayer", "--channels", "128", "--height", "19", "--width", "19"], "15619844"),
    (["--model", "mrlstm", "--channels", "64", "--height", "19", "--width", "19"], "8265732"),
])
def test_count_params(capsys, argv, expected):
    assert cli.main(["count-params"] + argv) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == expected


def test_count_params_by_scale(capsys):
    cli.main(["count-params", "--model", "mrlstm", "--channels", "64", "--height", "19", "--width", "19",
              "--by-scale"])
    assert capsys.readouterr().out.split() == ["scale1", "4123266", "scale0", "4142466", "8265732"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "neurovid", "count-params", "--height", "19", "--width", "19"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "4123266"


def test_usage_errors(capsys):
    assert cli.main([]) == 1
    assert cli.main(["count-params", "--bogus"]) == 1
    assert cli.main(["train", "--data", "x"]) == 1
    assert cli.main(["count-params", "--channels", "abc"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_data_errors(tmp_path, workdir, capsys):
    empty = tmp_path / "empty.nvt"
    empty.write_bytes(b"")
    assert cli.main(["eval", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(empty),
                     "--report", str(tmp_path / "r.csv")]) == 2
    assert "data error" in capsys.readouterr().err
    assert cli.main(["eval", "--checkpoint", str(tmp_path / "none.ckpt"), "--data", str(workdir / "waves.nvt"),
                     "--report", str(tmp_path / "r.csv")]) == 2
    wrong = tmp_path / "wrong.nvt"
    write_tensor_file(wrong, np.zeros((100, 9, 9)))
    assert cli.main(["eval", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(wrong),
                     "--report", str(tmp_path / "r.csv")]) == 2
    assert cli.main(["train", "--data", str(empty), "--out-checkpoint", str(tmp_path / "x.ckpt")]) == 2


def test_numerical_failures_exit_3(tmp_path, workdir, monkeypatch):
    def explode(self, batch):
        raise NumericalError("iteration 0: non-finite l_pred (nan)")

    monkeypatch.setattr(cli.Trainer, "step", explode)
    assert cli.main(["train", "--data", str(workdir / "waves.nvt"), "--channels", "2", "--iters", "1",
                     "--out-checkpoint", str(tmp_path / "x.ckpt")]) == 3
    monkeypatch.setattr(cli, "run_suite", lambda *a: {"add": 1.0})
    assert cli.main(["grad-check", "--seeds", "1"]) == 3


def test_eval_writes_reports(workdir, capsys):
    report = workdir / "report.csv"
    assert cli.main(["eval", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(workdir / "waves.nvt"),
                     "--report", str(report)]) == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "horizon,psnr" and len(lines) == 18 and lines[-1].startswith("aggregate,")
    assert (workdir / "report_persistence.csv").exists() and (workdir / "report_sequences.csv").exists()
    first = report.read_bytes()
    cli.main(["eval", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(workdir / "waves.nvt"),
              "--report", str(report)])
    assert report.read_bytes() == first


def test_predict_and_inspect(workdir, capsys):
    assert cli.main(["predict", "--checkpoint", str(workdir / "m.ckpt"), "--data", str(workdir / "waves.nvt"),
                     "--out", str(workdir / "pred.nvt")]) == 0
    pred = read_tensor_file(workdir / "pred.nvt")
    assert pred.shape[1:] == (16, 18, 20)
    assert cli.main(["inspect-critic", "--checkpoint", str(workdir / "m.ckpt"), "--data",
                     str(workdir / "waves.nvt"), "--out", str(workdir / "act.nvt")]) == 0
    fmap = read_tensor_file(workdir / "act.nvt")
    assert fmap.shape == (32, 9, 10)
    assert "mean |activation|" in capsys.readouterr().out


def test_metrics_csv(workdir):
    lines = (workdir / "m.csv").read_text().splitlines()
    assert lines[0] == "iteration,lr,l_rec,l_pred,l_adv,l_d"
    assert len(lines) == 3 and lines[1].endswith(",") and not lines[2].endswith(",")


def test_config_file_and_precedence(tmp_path, workdir, caplog):
    conf = tmp_path / "run.conf"
    conf.write_text("# tiny run\nchannels=2\niters=1\nbatch=1\nseed=5\nlambda_adv=0.3\n")
    with caplog.at_level(logging.INFO, logger="neurovid"):
        assert cli.main(["train", "--config", str(conf), "--data", str(workdir / "waves.nvt"), "--seed", "7",
                         "--out-checkpoint", str(tmp_path / "c.ckpt")]) == 0
    logged = caplog.text
    assert "config seed=7" in logged and "config iters=1" in logged and "config lambda_adv=0.3" in logged
    bad = tmp_path / "bad.conf"
    bad.write_text("just words\n")
    assert cli.main(["count-params", "--config", str(bad)]) == 1
